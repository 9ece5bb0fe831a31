"""Derivative-driven spike approximation and a desk-scale spike-sorting bench.

The approximation unit keeps 22 of 66 samples per spike, chosen from the
peaks of the first three discrete differences, ahead of feature extraction.
"""

__version__ = "0.1.0"

from .signal_core import (
    SpikeWaveform,
    ApproxSpike,
    DegenerateWaveformError,
    normalize_amplitude,
    align_peak,
)
from .approx import (
    DerivativeCascade,
    RankedPeaks,
    SelectionRule,
    cascaded_derivatives,
    rank_peaks,
    select_samples,
    approximation_cost,
)

__all__ = [
    "SpikeWaveform",
    "ApproxSpike",
    "DegenerateWaveformError",
    "normalize_amplitude",
    "align_peak",
    "DerivativeCascade",
    "RankedPeaks",
    "SelectionRule",
    "cascaded_derivatives",
    "rank_peaks",
    "select_samples",
    "approximation_cost",
]
