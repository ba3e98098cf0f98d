"""Robustness certification for single-object anchor-based detectors.

The engine propagates sound bounds through a small feed-forward network,
turns per-anchor offset bounds into constraints on corner coordinates, and
derives provably tight IoU intervals that drive a branch-and-bound
robustness decision (ROBUST / NONROBUST / UNKNOWN).
"""

__version__ = "0.1.0"

from boxcert.intervals import Interval, IntervalTensor

__all__ = ["Interval", "IntervalTensor", "__version__"]
