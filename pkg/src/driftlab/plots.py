"""Matplotlib figures written next to the report CSVs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def plot_rates(groups: dict, filename) -> None:
    """Log-log median error against T, one series per (scenario, beta) with its fitted line.

    ``groups`` maps a label to a dict with arrays ``T``, ``median`` and optional
    ``fitted`` (log error) and ``slope``.
    """
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for label, g in sorted(groups.items()):
            T = np.asarray(g["T"], dtype=float)
            line, = ax.plot(T, g["median"], "o", label=label if g.get("slope") is None
                            else f"{label} (slope {g['slope']:.3f})")
            if g.get("fitted") is not None:
                ax.plot(T, np.exp(g["fitted"]), "-", color=line.get_color(), lw=1)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("horizon T")
        ax.set_ylabel("median posterior-mean $L^2$ error")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(filename)
        plt.close(fig)


def plot_small_ball(rows: list, filename) -> None:
    """-log P(||W|| < eps) against 1/eps on log axes, one series per alpha."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        alphas = sorted({float(r["alpha"]) for r in rows})
        for a in alphas:
            pts = sorted((float(r["epsilon"]), float(r["neg_log_p"])) for r in rows
                         if float(r["alpha"]) == a and np.isfinite(float(r["neg_log_p"])))
            eps = np.array([p[0] for p in pts])
            nl = np.array([p[1] for p in pts])
            ax.plot(1 / eps, nl, "o-", label=f"alpha={a:g}")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("1 / epsilon")
        ax.set_ylabel("-log P(small ball)")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(filename)
        plt.close(fig)
