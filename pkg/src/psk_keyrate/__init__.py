"""Secret-key rates for phase-encoded coherent-state QKD."""

from .channel import ChannelParams
from .config import Settings, SweepConfig
from .constellation import INFINITE, Constellation, build_constellation, source_entropy
from .rates import (
    RatePoint,
    gaussian_rr_rate,
    holevo_dr,
    mutual_information,
    rate_dr,
    rate_dr_upper,
    rate_point,
    rate_rr,
)
from .sweep import ResultTable, figure_preset, run_sweep

__all__ = [
    "INFINITE",
    "ChannelParams",
    "Constellation",
    "RatePoint",
    "ResultTable",
    "Settings",
    "SweepConfig",
    "build_constellation",
    "figure_preset",
    "gaussian_rr_rate",
    "holevo_dr",
    "mutual_information",
    "rate_dr",
    "rate_dr_upper",
    "rate_point",
    "rate_rr",
    "run_sweep",
    "source_entropy",
]
