"""Deterministic SVG decay plots."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bounds import OBSERVABLE  # noqa: E402

_STYLE = {
    "svg.hashsalt": "mixlab",
    "svg.fonttype": "path",
    "path.simplify": False,
    "font.size": 9,
}


def decay_plot(stored, path, log_scale: bool = True) -> None:
    """``mix_f`` and ``mix_g`` against time with the stored bound curves overlaid.

    ``stored`` is a :class:`~mixlab.scenario.StoredSeries`.  The figure is
    written without a timestamp and with a fixed id salt, so identical
    series give identical files.
    """
    cols = stored.columns
    t = cols["t"]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        ax.plot(t, cols["mix_f"], "o-", color="C0", label="mix_f", ms=3)
        ax.plot(t, cols["mix_g"], "s-", color="C1", label="mix_g", ms=3)
        for k, kind in enumerate(stored.bound_kinds):
            obs = OBSERVABLE[kind]
            ax.plot(t, cols[kind], "--", color=f"C{k + 2}", lw=1.0, label=f"{kind} ({obs})")
        if log_scale:
            positive = np.concatenate([cols["mix_f"], cols["mix_g"]])
            positive = positive[np.isfinite(positive) & (positive > 0)]
            ax.set_yscale("log", nonpositive="mask")
            if positive.size:
                ax.set_ylim(bottom=positive.min() / 10.0)
        ax.set_xlabel("t")
        ax.set_ylabel("mixing scale")
        ax.legend(loc="best", fontsize=7)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
