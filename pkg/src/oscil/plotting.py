"""PNG renderings of table and figure CSVs (Agg backend, no display needed)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, csv_path) -> Path:
    out = Path(csv_path).with_suffix(".png")
    fig.tight_layout()
    fig.savefig(out, dpi=110)
    plt.close(fig)
    return out


def plot_table(csv_path, records, title: str = "") -> Path:
    """Errors against ``N`` on log-log axes."""
    N = np.array([r.N for r in records], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in ("e_q", "e_p", "e_H"):
        vals = [getattr(r, name) for r in records]
        if all(v is not None and v > 0 for v in vals):
            ax.loglog(N, vals, "o-", label=name)
    ax.set_xlabel("N")
    ax.set_ylabel("error")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, csv_path)


def plot_figure(figure_id: str, csv_path, header, rows) -> Path:
    data = np.array(rows, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    if figure_id == "g-bound":
        for x in np.unique(data[:, 0]):
            sel = data[data[:, 0] == x]
            s = sel[:, 1]
            line = ax.semilogy(s, sel[:, 4], "-", label=f"g, omega h = {x:g}")[0]
            ax.semilogy(s, sel[:, 2], "o", ms=3, color=line.get_color())
            ax.semilogy(s, sel[:, 3], "x", ms=3, color=line.get_color())
        ax.set_xlabel("s")
        ax.set_ylim(1e-18, 2)
        ax.legend(fontsize=8)
    elif figure_id == "phi-u":
        ax.plot(data[:, 0], data[:, 1], "-")
        ax.set_xlabel("omega h")
        ax.set_ylabel("phi_u")
    else:
        ax.plot(data[:, 0], data[:, 1], "o-")
        ax.set_xlabel("N")
        ax.set_ylabel("time [s]")
        ax2 = ax.twinx()
        ax2.semilogy(data[:, 0], data[:, 2], "s--", color="tab:red")
        ax2.set_ylabel("e_q", color="tab:red")
    ax.grid(True, alpha=0.3)
    ax.set_title(figure_id)
    return _save(fig, csv_path)
