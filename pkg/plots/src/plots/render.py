"""Figure rendering from harness results CSVs.

The input is the per-trial CSV written by the ``eigendebias experiment``
harness (header ``instance,trial,dist_plugin,...``); this module never
imports that package — the CSV is the interface.  Three figure kinds:

- ``ScalingCurve``: median error vs n on log-log axes, annotated with the
  least-squares slope of log(median de-biased distance) against log(n) —
  the same fit the harness reports, re-implemented here so the two can be
  cross-checked.
- ``BiasDominance``: per-instance bars of median plug-in vs de-biased
  distance.
- ``CorrectionOverlay``: per-trial correction factors against the observed
  eigenvalue, with per-instance medians and a power-law trend through them.

Rendering is deterministic: fixed fonts, fixed figure geometry, and axis
contents that are a pure function of the CSV bytes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .errors import InvalidInput, IoError

RESULTS_COLUMNS = (
    "instance",
    "trial",
    "dist_plugin",
    "dist_debiased",
    "correction",
    "lambda_l",
    "lambda_corrected",
    "wall_ms",
)

FIXED_RC = {
    "font.family": "DejaVu Sans",
    "font.size": 10.0,
    "figure.figsize": (6.4, 4.8),
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.frameon": False,
}


class FigureKind(Enum):
    SCALING_CURVE = "scaling"
    BIAS_DOMINANCE = "bias"
    CORRECTION_OVERLAY = "overlay"


@dataclass(frozen=True)
class PlotSpec:
    input_csv: str
    kind: FigureKind
    output_path: str
    title: str | None = None
    xlabel: str | None = None
    ylabel: str | None = None


@dataclass(frozen=True)
class ResultRow:
    instance: str
    trial: int
    dist_plugin: float
    dist_debiased: float
    correction: float
    lambda_l: float
    lambda_corrected: float
    wall_ms: float


@dataclass(frozen=True)
class InstanceGroup:
    """All trials of one sweep instance, with the medians figures draw."""

    instance: str
    n: int
    rows: tuple[ResultRow, ...]
    median_plugin: float = field(init=False)
    median_debiased: float = field(init=False)
    median_correction: float = field(init=False)
    median_lambda: float = field(init=False)

    def __post_init__(self):
        for name, values in (
            ("median_plugin", [r.dist_plugin for r in self.rows]),
            ("median_debiased", [r.dist_debiased for r in self.rows]),
            ("median_correction", [r.correction for r in self.rows]),
            ("median_lambda", [r.lambda_l for r in self.rows]),
        ):
            object.__setattr__(self, name, float(np.median(values)))


@dataclass(frozen=True)
class RenderResult:
    path: str
    kind: FigureKind
    annotations: dict


def read_results(path) -> list[ResultRow]:
    """Parse a harness results CSV, validating the schema strictly."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            raw = list(csv.reader(fh))
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from exc
    raw = [row for row in raw if row]
    if not raw:
        raise IoError(path, "file is empty")
    header = tuple(raw[0])
    for i, expected in enumerate(RESULTS_COLUMNS):
        if i >= len(header):
            raise InvalidInput(f"schema mismatch: missing column {expected!r}")
        if header[i] != expected:
            raise InvalidInput(
                f"schema mismatch: column {i + 1} is {header[i]!r}, "
                f"expected {expected!r}"
            )
    if len(header) > len(RESULTS_COLUMNS):
        raise InvalidInput(
            f"schema mismatch: unexpected column {header[len(RESULTS_COLUMNS)]!r}"
        )
    if len(raw) == 1:
        raise InvalidInput("results CSV has a valid header but no data rows")

    rows = []
    for lineno, rec in enumerate(raw[1:], start=2):
        if len(rec) != len(RESULTS_COLUMNS):
            raise InvalidInput(
                f"line {lineno}: {len(rec)} fields, expected {len(RESULTS_COLUMNS)}"
            )
        try:
            rows.append(
                ResultRow(
                    instance=rec[0],
                    trial=int(rec[1]),
                    dist_plugin=float(rec[2]),
                    dist_debiased=float(rec[3]),
                    correction=float(rec[4]),
                    lambda_l=float(rec[5]),
                    lambda_corrected=float(rec[6]),
                    wall_ms=float(rec[7]),
                )
            )
        except ValueError as exc:
            raise InvalidInput(f"line {lineno}: {exc}") from exc
    return rows


def group_by_instance(rows) -> list[InstanceGroup]:
    """Group rows by instance id, in order of first appearance.

    The harness labels instances ``str(n)`` with an optional ``#k``
    disambiguator, so n is recovered from the id itself.
    """
    order: dict[str, list[ResultRow]] = {}
    for row in rows:
        order.setdefault(row.instance, []).append(row)
    groups = []
    for instance, members in order.items():
        stem = instance.split("#", 1)[0]
        try:
            n = int(stem)
        except ValueError as exc:
            raise InvalidInput(
                f"instance id {instance!r} does not encode a problem size n"
            ) from exc
        if n < 1:
            raise InvalidInput(f"instance id {instance!r} encodes n < 1")
        groups.append(InstanceGroup(instance=instance, n=n, rows=tuple(members)))
    return groups


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.asarray(ys, dtype=float))
    xc = x - x.mean()
    yc = y - y.mean()
    denom = float(xc @ xc)
    if denom == 0.0:
        raise InvalidInput("need at least two distinct x values to fit a slope")
    return float(xc @ yc) / denom


def scaling_slope(groups) -> float | None:
    """Slope of log(median de-biased distance) vs log(n), or None when the
    sweep is too degenerate to fit (fewer than 3 distinct n, or a
    nonpositive median)."""
    ns = [g.n for g in groups]
    medians = [g.median_debiased for g in groups]
    if len(set(ns)) < 3 or any(not m > 0.0 for m in medians):
        return None
    return loglog_slope(ns, medians)


def _power_law_fit(groups):
    """(exponent, scale) through the per-instance (median lambda, median
    correction) points, or None when fewer than two positive distinct
    points exist."""
    pts = [
        (g.median_lambda, g.median_correction)
        for g in groups
        if g.median_lambda > 0.0 and g.median_correction > 0.0
    ]
    if len({x for x, _ in pts}) < 2:
        return None
    logx = np.log([x for x, _ in pts])
    logy = np.log([y for _, y in pts])
    exponent = loglog_slope([x for x, _ in pts], [y for _, y in pts])
    scale = math.exp(float(logy.mean()) - exponent * float(logx.mean()))
    return exponent, scale


def _draw_scaling(ax, groups, annotations) -> None:
    ordered = sorted(groups, key=lambda g: g.n)
    ns = [g.n for g in ordered]
    ax.loglog(
        ns, [g.median_plugin for g in ordered], marker="o", linestyle="--",
        color="tab:red", label="plug-in",
    )
    ax.loglog(
        ns, [g.median_debiased for g in ordered], marker="s", linestyle="-",
        color="tab:blue", label="de-biased",
    )
    slope = scaling_slope(groups)
    if slope is not None:
        annotations["slope"] = slope
        ax.text(
            0.04, 0.06, f"fitted slope = {slope:.6f}",
            transform=ax.transAxes, fontsize=10,
        )
    ax.set_xlabel("n")
    ax.set_ylabel("median distance")
    ax.legend()


def _draw_bias(ax, groups, annotations) -> None:
    idx = np.arange(len(groups))
    width = 0.38
    ax.bar(
        idx - width / 2, [g.median_plugin for g in groups], width,
        color="tab:red", label="plug-in",
    )
    ax.bar(
        idx + width / 2, [g.median_debiased for g in groups], width,
        color="tab:blue", label="de-biased",
    )
    for i, g in enumerate(groups):
        if g.median_debiased > 0.0:
            annotations[f"ratio:{g.instance}"] = g.median_plugin / g.median_debiased
    ax.set_xticks(idx)
    ax.set_xticklabels([g.instance for g in groups])
    ax.set_xlabel("instance")
    ax.set_ylabel("median distance")
    ax.legend()


def _draw_overlay(ax, groups, annotations) -> None:
    cycle = matplotlib.rcParams["axes.prop_cycle"].by_key()["color"]
    for i, g in enumerate(groups):
        color = cycle[i % len(cycle)]
        ax.scatter(
            [r.lambda_l for r in g.rows], [r.correction for r in g.rows],
            s=14, alpha=0.6, color=color, label=g.instance,
        )
        ax.scatter(
            [g.median_lambda], [g.median_correction],
            marker="D", s=45, color="black", zorder=3,
        )
    fit = _power_law_fit(groups)
    if fit is not None:
        exponent, scale = fit
        annotations["power_law_exponent"] = exponent
        xs = np.geomspace(
            min(g.median_lambda for g in groups if g.median_lambda > 0.0),
            max(g.median_lambda for g in groups if g.median_lambda > 0.0),
            64,
        )
        ax.plot(
            xs, scale * xs**exponent, color="black", linewidth=1.0,
            label=f"trend: $\\lambda^{{{exponent:.3f}}}$",
        )
    ax.set_xlabel("observed eigenvalue")
    ax.set_ylabel("correction factor")
    ax.legend()


_DRAWERS = {
    FigureKind.SCALING_CURVE: _draw_scaling,
    FigureKind.BIAS_DOMINANCE: _draw_bias,
    FigureKind.CORRECTION_OVERLAY: _draw_overlay,
}


def render(spec: PlotSpec) -> RenderResult:
    """Render the figure described by ``spec``; returns the output path and
    the annotation values drawn onto it.  Raises (writing nothing) when the
    CSV is missing, malformed, or holds no data rows."""
    if not isinstance(spec.kind, FigureKind):
        raise InvalidInput(f"unknown figure kind {spec.kind!r}")
    groups = group_by_instance(read_results(spec.input_csv))
    annotations: dict = {}
    with matplotlib.rc_context(FIXED_RC):
        fig = Figure()
        ax = fig.subplots()
        _DRAWERS[spec.kind](ax, groups, annotations)
        if spec.title is not None:
            ax.set_title(spec.title)
        if spec.xlabel is not None:
            ax.set_xlabel(spec.xlabel)
        if spec.ylabel is not None:
            ax.set_ylabel(spec.ylabel)
        try:
            fig.savefig(spec.output_path)
        except OSError as exc:
            raise IoError(spec.output_path, exc.strerror or str(exc)) from exc
    return RenderResult(path=str(spec.output_path), kind=spec.kind, annotations=annotations)
