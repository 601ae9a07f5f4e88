"""Static SVG figure of a simulation run."""

from __future__ import annotations

import os
from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .metrics import EARLY_LABELS, LATE_LABELS
from .solver import TraceRecord

# fixed id salt and no timestamp: identical records give identical bytes
_RC = {"svg.hashsalt": "becsim", "svg.fonttype": "path", "font.size": 9}
_QD_LABELS = ("G", "X1", "X2", "XX")


def group_numbers(record: TraceRecord) -> tuple[np.ndarray, np.ndarray]:
    """Early and late photon numbers at every record point."""
    nums = record.numbers()
    labels = [f.mode_label for f in record.layout.factors]
    early = [i for i, m in enumerate(labels) if m in EARLY_LABELS]
    late = [i for i, m in enumerate(labels) if m in LATE_LABELS]
    return nums[:, early].sum(axis=1), nums[:, late].sum(axis=1)


def render_figure(record: TraceRecord, title: str | None = None) -> Figure:
    t_ps = np.asarray(record.times) * 1e12
    pops = record.populations()
    n_early, n_late = group_numbers(record)

    fig = Figure(figsize=(6.4, 5.2))
    ax_pop, ax_num = fig.subplots(2, 1, sharex=True)
    for k, label in enumerate(_QD_LABELS):
        ax_pop.plot(t_ps, pops[:, k], label=f"$P_{{\\mathrm{{{label}}}}}$", lw=1.2)
    ax_pop.set_ylabel("population")
    ax_pop.set_ylim(-0.05, 1.05)
    ax_pop.legend(loc="center right", frameon=False)

    ax_num.plot(t_ps, n_early, label=r"$N_\mathrm{early}$", lw=1.2)
    ax_num.plot(t_ps, n_late, label=r"$N_\mathrm{late}$", lw=1.2)
    ax_num.set_xlabel("time (ps)")
    ax_num.set_ylabel("photon number")
    ax_num.legend(loc="lower right", frameon=False)
    for ax in (ax_pop, ax_num):
        ax.grid(alpha=0.3, lw=0.5)
    if title:
        ax_pop.set_title(title)
    fig.tight_layout()
    return fig


def emit_plot(record: TraceRecord, path: str | os.PathLike, title: str | None = None) -> Path:
    """Write populations and group photon numbers against time as SVG."""
    if not record.times:
        raise ValueError("empty trace record")
    path = Path(path)
    with matplotlib.rc_context(_RC):
        fig = render_figure(record, title)
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path
