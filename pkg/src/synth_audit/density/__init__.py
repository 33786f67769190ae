"""Density estimators exposing exact per-row log-densities."""
from .closed_form import ClosedFormDensity, TransformedDensity, closed_form_log_density, log_shift_representation
from .flow import FlowConfig, FlowModel, flow_fit
from .kde import KdeModel, kde_fit, scott_bandwidth

__all__ = [
    "ClosedFormDensity",
    "FlowConfig",
    "FlowModel",
    "KdeModel",
    "TransformedDensity",
    "closed_form_log_density",
    "flow_fit",
    "kde_fit",
    "log_shift_representation",
    "scott_bandwidth",
]
