"""Log-scale KKT-violation plots, one vector file per instance."""

from __future__ import annotations

import csv
import glob
import logging
import os
import re
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..trace import Trace  # noqa: E402

__all__ = ["LOG_FLOOR", "min_so_far", "plot_dir", "plot_instance"]

log = logging.getLogger(__name__)

LOG_FLOOR = 1e-8
CAPTION = "curves show the running minimum of kkt_p over sampled iterations"
_NAME = re.compile(r"^trace_(?P<solver>[^_]+)_(?P<inst>.+)_(?P<seed>-?\d+)\.csv$")


def min_so_far(grads, kkt):
    """Drop unsampled (NaN) rows and take the running minimum, floored at ``LOG_FLOOR``."""
    grads = np.asarray(grads, dtype=np.float64)
    kkt = np.asarray(kkt, dtype=np.float64)
    keep = np.isfinite(kkt)
    g, v = grads[keep], np.minimum.accumulate(kkt[keep]) if keep.any() else kkt[keep]
    return g, np.maximum(v, LOG_FLOOR)


def _titles(directory):
    """Map instance id to ``(d, kappa, rho)`` using summary.csv when present."""
    out = {}
    path = os.path.join(directory, "summary.csv")
    if not os.path.exists(path):
        return out
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        out[(r["solver"], r["seed"])] = (r["d"], r["kappa"], r["rho"])
    return out


def _title_from_ident(ident):
    m = re.match(r"^qp_d(\d+)_k([^_]+)_r([^_]+)$", ident)
    if m:
        return m.groups()
    return None


def plot_instance(ident, curves, out_path, title=None):
    """Write one figure; ``curves`` maps a legend label to ``(grads, kkt)``."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ymax = LOG_FLOOR
    for label in sorted(curves):
        g, v = min_so_far(*curves[label])
        if not len(g):
            continue
        ax.plot(g, v, label=label, linewidth=1.4)
        ymax = max(ymax, float(v.max()))
    ax.set_yscale("log")
    ax.set_ylim(bottom=LOG_FLOOR, top=10 ** np.ceil(np.log10(ymax) + 0.1))
    ax.set_xlabel("Grad")
    ax.set_ylabel("KKT violation")
    ax.set_title(title or ident)
    ax.legend(loc="upper right", frameon=False)
    fig.text(0.01, 0.01, CAPTION, fontsize=7, color="0.35")
    fig.tight_layout(rect=(0, 0.03, 1, 1))
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return out_path


def plot_dir(directory, out_dir=None):
    """Plot every instance found among ``trace_*.csv`` files in ``directory``.

    Traces from several seeds of one solver on the same instance id are drawn
    as separate curves labelled ``solver (seed s)``; with a single seed the
    label is just the solver name. Returns the list of written files.
    """
    out_dir = out_dir or directory
    os.makedirs(out_dir, exist_ok=True)
    meta = _titles(directory)
    groups = defaultdict(dict)
    for path in sorted(glob.glob(os.path.join(directory, "trace_*.csv"))):
        m = _NAME.match(os.path.basename(path))
        if not m:
            log.warning("skipping %s: unexpected file name", path)
            continue
        trace = Trace.from_csv(path)
        if not len(trace) or not np.isfinite(trace.column("kkt_p")).any():
            log.warning("skipping %s: empty trace", path)
            continue
        groups[m["inst"]][(m["solver"], m["seed"])] = (trace.column("grad_evals"),
                                                         trace.column("kkt_p"))
    written = []
    for ident, runs in sorted(groups.items()):
        seeds = {s for _, s in runs}
        curves = {(name if len(seeds) == 1 else f"{name} (seed {s})"): c
                  for (name, s), c in runs.items()}
        dkr = _title_from_ident(ident)
        if dkr is None:
            dkr = next((meta[k] for k in runs if k in meta), None)
        title = f"d={dkr[0]}, kappa={dkr[1]}, rho={dkr[2]}" if dkr else ident
        out = os.path.join(out_dir, f"kkt_{ident}.svg")
        written.append(plot_instance(ident, curves, out, title=title))
    return written
