"""Orbit kernel dispatch: compiled extension if built, NumPy otherwise.

Both backends implement the same counter-based fixed-point theta stream,
so any quantity derived from the angle alone is bit-identical across
them. The x coordinate may differ by a few ulps per step (libm vs SIMD
transcendentals), which matters only to trajectory-level comparisons,
not to any distributional estimate.
"""

from __future__ import annotations

from . import _kernels_py

try:
    from . import _kernels as _impl

    KERNEL_BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on build environment
    _impl = _kernels_py
    KERNEL_BACKEND = "python"

PHI_OVERFLOW = _kernels_py.PHI_OVERFLOW

advance = _impl.advance
checkpoint_states = _impl.checkpoint_states
birkhoff_sums = _impl.birkhoff_sums
first_returns = _impl.first_returns
excursions = _impl.excursions
obs_values = _impl.obs_values
theta_float = _impl.theta_float
theta_fixed = _impl.theta_fixed

__all__ = [
    "KERNEL_BACKEND",
    "PHI_OVERFLOW",
    "advance",
    "birkhoff_sums",
    "checkpoint_states",
    "excursions",
    "first_returns",
    "obs_values",
    "theta_fixed",
    "theta_float",
]
