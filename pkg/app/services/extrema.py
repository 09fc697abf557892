"""
Extrema Module

This module is responsible for:
- Locating local maxima / minima of an even function sampled on [0, W]
- Sub-grid refinement of location and value by a 3-point parabola
- 5-point finite-difference second derivatives at (fractional) grid positions
- Classifying the origin w = 0 by its one-sided slope

Peaks come from scipy.signal.find_peaks on the mirrored samples, so the prominence
of extrema near w = 0 accounts for the even continuation and flat runs report
their midpoint.
"""

from typing import Optional, Union

import numpy as np
from scipy.signal import find_peaks

from app.config import settings
from app.models.atoms import ExtremaReport, ExtremumPoint
from app.models.errors import ChirpletError, ErrorCode
from app.utils.grids import GridError, mirror_even, uniform_step
from app.utils.logging import log_event

_MIN_SAMPLES = 5


class ExtremaInputError(ChirpletError):
    code = ErrorCode.INVALID_INPUT


class ExtremumBoundaryError(ChirpletError):
    """The 5-point stencil does not fit inside the sampled range."""
    code = ErrorCode.DEGENERATE_EXTREMUM


def _fd2_at(values: np.ndarray, k: int, h: float) -> float:
    if k - 2 < 0 or k + 2 >= values.size:
        raise ExtremumBoundaryError(
            "second derivative needs 2 samples on each side",
            detail={"index": int(k), "size": int(values.size)},
        )
    v = values[k - 2:k + 3]
    return float((-v[0] + 16 * v[1] - 30 * v[2] + 16 * v[3] - v[4]) / (12 * h * h))


def second_derivative(
    values: np.ndarray,
    position: Union[int, float],
    step: float,
) -> float:
    """
    Central 5-point estimate of f'' on a uniform grid starting at 0.

    Args:
        values: samples f(k * step), k = 0..n-1
        position: an integer sample index, or a float location in frequency units;
            fractional locations interpolate linearly between neighbouring stencils
        step: grid step

    Raises:
        ExtremumBoundaryError: the stencil would leave the sampled range
    """
    values = np.asarray(values, dtype=float)
    if step <= 0:
        raise ExtremaInputError("step must be positive")
    if isinstance(position, (int, np.integer)):
        return _fd2_at(values, int(position), step)
    x = float(position) / step
    k0 = int(np.floor(x))
    frac = x - k0
    if frac < 1e-12:
        return _fd2_at(values, k0, step)
    if frac > 1 - 1e-12:
        return _fd2_at(values, k0 + 1, step)
    return (1 - frac) * _fd2_at(values, k0, step) + frac * _fd2_at(values, k0 + 1, step)


def _parabolic_refine(y: np.ndarray, i: int):
    denom = y[i - 1] - 2 * y[i] + y[i + 1]
    if denom == 0:
        return 0.0, float(y[i])
    delta = float(np.clip(0.5 * (y[i - 1] - y[i + 1]) / denom, -0.5, 0.5))
    return delta, float(y[i] - 0.25 * (y[i - 1] - y[i + 1]) * delta)


def _classify_origin(values: np.ndarray) -> str:
    moved = np.flatnonzero(values[1:] != values[0])
    if moved.size == 0:
        return "degenerate"
    return "max" if values[1 + moved[0]] < values[0] else "min"


def find_extrema(
    values: np.ndarray,
    omega: np.ndarray,
    min_prominence: Optional[float] = None,
    curvature_ratio: Optional[float] = None,
) -> ExtremaReport:
    """
    Detect the extrema of an even function from its samples on w_p = p * h, p = 0..N.

    Args:
        values: samples on the half grid
        omega: the half grid itself (uniform, starting at 0)
        min_prominence: extrema less prominent than this are dropped
            (default settings.PROMINENCE_RATIO * max|values|)
        curvature_ratio: |f''| below ratio * max|values| / h^2 counts as degenerate

    Returns:
        ExtremaReport with interior extrema ordered by location, the origin class and,
        when the origin is a non-degenerate extremum, its ExtremumPoint
    """
    values = np.asarray(values, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if values.ndim != 1 or values.size < _MIN_SAMPLES:
        raise ExtremaInputError(f"need at least {_MIN_SAMPLES} samples")
    if omega.shape != values.shape:
        raise ExtremaInputError("values and grid differ in length")
    try:
        h = uniform_step(omega)
    except GridError as e:
        raise ExtremaInputError(f"grid: {e}") from e
    if abs(omega[0]) > 1e-9 * h:
        raise ExtremaInputError("half grid must start at 0")
    if not np.all(np.isfinite(values)):
        raise ExtremaInputError("values must be finite")

    scale = float(np.max(np.abs(values)))
    origin = _classify_origin(values)
    if origin == "degenerate":
        log_event("extrema_constant_input", level="warning", value=float(values[0]))
        return ExtremaReport(extrema=[], origin="degenerate")

    if min_prominence is None:
        min_prominence = settings.PROMINENCE_RATIO * scale
    if curvature_ratio is None:
        curvature_ratio = settings.DEGENERATE_CURVATURE_RATIO
    curvature_floor = curvature_ratio * scale / (h * h)

    full = mirror_even(values)
    centre = values.size - 1
    found = []
    for kind, sign in (("max", 1.0), ("min", -1.0)):
        peaks, _ = find_peaks(sign * full, prominence=min_prominence)
        found.extend((int(p) - centre, kind) for p in peaks if p > centre)

    extrema, rejected = [], 0
    for i, kind in sorted(found):
        # find_peaks never reports the ends of `full`, so 1 <= i <= N-1
        delta, value = _parabolic_refine(values, i)
        location = (i + delta) * h
        try:
            curvature = second_derivative(full, (centre + i + delta) * h, h)
        except ExtremumBoundaryError:
            log_event("extremum_rejected", level="warning", location=location, kind=kind, reason="boundary")
            rejected += 1
            continue
        wrong_sign = curvature >= 0 if kind == "max" else curvature <= 0
        if abs(curvature) < curvature_floor or wrong_sign:
            log_event(
                "extremum_rejected",
                level="warning",
                location=location,
                kind=kind,
                second_deriv=curvature,
                reason="degenerate",
            )
            rejected += 1
            continue
        extrema.append(ExtremumPoint(location=location, value=value, second_deriv=curvature, kind=kind))

    origin_point = None
    origin_curvature = second_derivative(full, centre, h)
    if origin == "max" and origin_curvature < -curvature_floor:
        origin_point = ExtremumPoint(location=0.0, value=float(values[0]), second_deriv=origin_curvature, kind="max")
    elif origin == "min" and origin_curvature > curvature_floor:
        origin_point = ExtremumPoint(location=0.0, value=float(values[0]), second_deriv=origin_curvature, kind="min")

    return ExtremaReport(extrema=extrema, origin=origin, origin_point=origin_point, rejected=rejected)
