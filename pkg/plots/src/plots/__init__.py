"""Figures from eigendebias harness results CSVs (standalone batch tool)."""

from .errors import InvalidInput, IoError
from .render import (
    RESULTS_COLUMNS,
    FigureKind,
    InstanceGroup,
    PlotSpec,
    RenderResult,
    ResultRow,
    group_by_instance,
    loglog_slope,
    read_results,
    render,
    scaling_slope,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
