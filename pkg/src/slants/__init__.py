"""Streaming sparse additive modeling of vector time series.

Each target coordinate is modeled as an additive function of lagged
values of every coordinate, expanded in B-splines and fitted online by a
group-LASSO EM with self-tuning penalty and step scale.  See README.md
for the CLI and file formats.
"""

from . import _backend
from .estimator import (
    Coefficients,
    EmSettings,
    SufficientStats,
    e_step,
    em_iterate,
    em_iterate_multi,
    group_soft_threshold,
    power_iteration,
    predict,
    spectral_check,
)
from .generators import DeterministicRng, generate
from .lags import RegressionSample, SeriesWindow, design_row
from .oracle import batch_group_lasso, group_lasso_objective
from .pipeline import ArBaseline, FitConfig, StepRecord, StreamModel
from .selection import (
    backward_select,
    extract_graph,
    graph_from_support,
    subset_mse,
)
from .splines import RunningMean, SplineBasis, centered_eval, make_knots
from .tuning import (
    InnovationScale,
    PenaltySearch,
    WeightSchedule,
    weights_closed_form,
)

__version__ = "0.1.0"


def backend_name():
    """Name of the active kernel backend ('compiled' or 'python')."""
    return _backend.active.NAME
