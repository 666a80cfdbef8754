"""Figure rendering for the experiment CSV schemas.

Four figure kinds, all display-only (nothing is recomputed):

* ``landscape``: cost scatter against one angle from a gorge sample dump.
* ``training``: exact (and estimated) cost versus iteration from a trace.
* ``layers``: one exact-cost curve per depth from several traces, with an
  inset of cumulative shots needed to reach fixed cost thresholds.
* ``scaling``: log2 variance versus qubit count from a variance scan (or the
  warm-up table), with bound overlays when those columns are present.

Rendering is deterministic: the Agg backend, fixed fonts, and scrubbed PNG
metadata make re-rendering the same CSV byte-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIGURE_KINDS = ("landscape", "training", "layers", "scaling")

REQUIRED_COLUMNS = {
    "landscape": ("cost_family", "n", "theta0", "cost"),
    "training": ("iteration", "shots", "exact_cost"),
    "layers": ("iteration", "shots", "exact_cost", "layers"),
    "scaling": ("n", "var"),
}

_SAVE_OPTS = {"dpi": 110, "metadata": {"Software": "plateau-plots"}}


class MissingColumnError(ValueError):
    def __init__(self, kind: str, column: str, path: str):
        super().__init__(
            f"figure kind {kind!r} needs column {column!r}, not found in {path}"
        )


@dataclass(frozen=True)
class PlotSpec:
    kind: str
    inputs: tuple[str, ...]
    output: str
    log_y: bool = False
    title: str | None = None
    thresholds: tuple[float, ...] = (0.05, 0.02)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; pick from {FIGURE_KINDS}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")


def read_table(path: str) -> dict[str, list[str]]:
    """CSV as column -> values, skipping leading comment lines."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty table")
    header, body = rows[0], rows[1:]
    return {col: [r[i] for r in body] for i, col in enumerate(header)}


def _columns(table, kind, path, names):
    out = []
    for name in names:
        if name not in table:
            raise MissingColumnError(kind, name, path)
        out.append(table[name])
    return out


def _floats(values) -> np.ndarray:
    return np.array([float(v) for v in values])


def render(spec: PlotSpec) -> str:
    """Write the figure for ``spec`` and return the output path."""
    fig = plt.figure(figsize=(6.0, 4.0))
    try:
        _RENDERERS[spec.kind](spec, fig)
        if spec.title:
            fig.suptitle(spec.title)
        fig.savefig(spec.output, **_SAVE_OPTS)
    finally:
        plt.close(fig)
    return spec.output


def _render_landscape(spec: PlotSpec, fig):
    ax = fig.add_subplot(111)
    for path in spec.inputs:
        table = read_table(path)
        family, n, theta0, cost = _columns(
            table, "landscape", path, REQUIRED_COLUMNS["landscape"]
        )
        for key in sorted(set(zip(family, n))):
            mask = [k == key for k in zip(family, n)]
            ax.scatter(
                _floats(theta0)[mask],
                _floats(cost)[mask],
                s=6,
                alpha=0.5,
                label=f"{key[0]}, n={key[1]}",
            )
    ax.set_xlabel(r"$\theta_0$ (rad)")
    ax.set_ylabel("cost")
    if spec.log_y:
        ax.set_yscale("log")
    ax.legend(loc="lower right", fontsize=8)


def _render_training(spec: PlotSpec, fig):
    ax = fig.add_subplot(111)
    for path in spec.inputs:
        table = read_table(path)
        iteration, _shots, exact = _columns(
            table, "training", path, REQUIRED_COLUMNS["training"]
        )
        it = _floats(iteration)
        ax.plot(it, _floats(exact), lw=1.5, label=_trace_label(table))
        if "est_cost" in table:
            ax.plot(it, _floats(table["est_cost"]), lw=0.6, alpha=0.45)
    ax.set_xlabel("iteration")
    ax.set_ylabel("exact cost")
    if spec.log_y:
        ax.set_yscale("log")
    ax.legend(fontsize=8)


def _trace_label(table) -> str:
    parts = []
    for col in ("cost_kind", "n_b", "layers", "seed"):
        if col in table and table[col]:
            parts.append(f"{col.replace('_', '')}={table[col][0]}")
    return ", ".join(parts) if parts else "trace"


def _render_layers(spec: PlotSpec, fig):
    ax = fig.add_subplot(111)
    shots_to_threshold: dict[float, list[tuple[int, float]]] = {
        t: [] for t in spec.thresholds
    }
    for path in spec.inputs:
        table = read_table(path)
        iteration, shots, exact, layers = _columns(
            table, "layers", path, REQUIRED_COLUMNS["layers"]
        )
        depth = int(layers[0])
        it = _floats(iteration)
        costs = _floats(exact)
        ax.plot(it, costs, lw=1.2, label=f"L={depth}")
        cumulative = np.cumsum(_floats(shots))
        for threshold in spec.thresholds:
            hits = np.nonzero(costs <= threshold)[0]
            if hits.size:
                shots_to_threshold[threshold].append((depth, float(cumulative[hits[0]])))
    ax.set_xlabel("iteration")
    ax.set_ylabel("exact cost")
    if spec.log_y:
        ax.set_yscale("log")
    ax.legend(fontsize=8, ncol=2)

    inset = ax.inset_axes([0.58, 0.55, 0.38, 0.4])
    drawn = False
    for threshold, points in sorted(shots_to_threshold.items()):
        if not points:
            continue
        points.sort()
        inset.semilogy(
            [p[0] for p in points], [p[1] for p in points], "o-", ms=3,
            label=f"cost {threshold}",
        )
        drawn = True
    inset.set_xlabel("L", fontsize=7)
    inset.set_ylabel("shots to reach", fontsize=7)
    inset.tick_params(labelsize=6)
    if drawn:
        inset.legend(fontsize=6)


def _render_scaling(spec: PlotSpec, fig):
    ax = fig.add_subplot(111)
    for path in spec.inputs:
        table = read_table(path)
        ns, variances = _columns(table, "scaling", path, REQUIRED_COLUMNS["scaling"])
        group_col = table.get("cost_family", ["series"] * len(ns))
        for family in sorted(set(group_col)):
            mask = [g == family for g in group_col]
            x = _floats(ns)[mask]
            y = np.log2(_floats(variances)[mask])
            order = np.argsort(x)
            ax.plot(x[order], y[order], "o-", lw=1.2, label=family)
        for bound_col, style in (("F_upper", "--"), ("G_lower", ":"), ("var_closed_form", "-.")):
            if bound_col in table:
                vals = [(float(n), float(v)) for n, v in zip(ns, table[bound_col]) if v not in ("", "0.0")]
                if vals:
                    vals.sort()
                    ax.plot(
                        [v[0] for v in vals],
                        np.log2([v[1] for v in vals]),
                        style,
                        lw=1.0,
                        label=bound_col,
                    )
    ax.set_xlabel("qubits n")
    ax.set_ylabel(r"$\log_2$ variance")
    ax.legend(fontsize=8)


_RENDERERS = {
    "landscape": _render_landscape,
    "training": _render_training,
    "layers": _render_layers,
    "scaling": _render_scaling,
}
