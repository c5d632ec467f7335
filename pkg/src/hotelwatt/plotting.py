"""Matplotlib chart emission with reproducible bytes.

SVG output is deterministic for identical inputs: the clip-path hash salt
is pinned and the creation date is stripped, so reruns diff clean.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_RC = {
    "svg.hashsalt": "hotelwatt",
    "figure.figsize": (10.0, 4.5),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
    "legend.frameon": False,
}


def save_forecast_chart(dates, actual, predicted, path, title: str = "") -> None:
    """Two-series line chart of actual vs predicted daily consumption."""
    path = Path(path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(dates, actual, label="actual", color="#1f77b4", linewidth=1.4)
        ax.plot(dates, predicted, label="predicted", color="#d62728", linewidth=1.2, linestyle="--")
        ax.set_xlabel("date")
        ax.set_ylabel("energy [kWh/day]")
        if title:
            ax.set_title(title)
        ax.legend(loc="best")
        fig.autofmt_xdate()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
