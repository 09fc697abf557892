"""
Hierarchy Module

This module is responsible for:
- Residual amplitudes A_n = A_0 - sum of the fitted level mixtures
- One refinement level: extrema of the residual -> signed Gaussian mixture
  (positive maxima, negative minima, and a signed center atom when w = 0 is a
  positive maximum or a negative minimum)
- The level loop with its energy ledger and stopping rules

Residual norms and L2 level fits run on the amplitude grid padded with zeros
out to pad_factor * W, so atom tails beyond the band are accounted for and
||A_{n+1}||^2 = ||A_n||^2 - Q_n holds at solved weights.
"""

from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from app.config import settings
from app.models.atoms import SignedMixture
from app.models.errors import ChirpletError, ErrorCode
from app.models.ledger import L2Diagnostics, LevelRecord, Method, PointwiseDiagnostics, RefinementLedger
from app.services.extrema import find_extrema
from app.services.gaussian_model import mixture_eval, squared_norm
from app.services.l2_select import L2Config, fit_l2
from app.services.pointwise_select import PointwiseConfig, fit_pointwise
from app.utils.grids import GridError, pad_symmetric, uniform_step
from app.utils.logging import log_event


class HierarchyInputError(ChirpletError):
    code = ErrorCode.INVALID_INPUT


class HierarchyConfig(BaseModel):
    method: Method = "l2"
    eps_stop: Optional[float] = Field(default=None, gt=0)
    max_levels: int = Field(default_factory=lambda: settings.HIERARCHY_MAX_LEVELS, ge=0)
    pad_factor: float = Field(default_factory=lambda: settings.HIERARCHY_PAD_FACTOR, ge=1.0)
    prominence_ratio: float = Field(default_factory=lambda: settings.PROMINENCE_RATIO, ge=0)
    noise_floor_ratio: float = Field(default_factory=lambda: settings.NOISE_FLOOR_RATIO, ge=0, lt=1)
    pointwise: PointwiseConfig = Field(default_factory=PointwiseConfig)
    l2: L2Config = Field(default_factory=L2Config)


class LevelFit(BaseModel):
    mixture: SignedMixture = Field(default_factory=SignedMixture)
    q: float = 0.0
    p_n: int = 0
    q_n: int = 0
    center: bool = False
    below_floor: int = 0
    converged: bool = True
    empty: bool = False
    diagnostics: Optional[Union[PointwiseDiagnostics, L2Diagnostics]] = None


def residual(original: np.ndarray, omega: np.ndarray, levels: List[SignedMixture]) -> np.ndarray:
    """A_n = A_0 - sum_k A_{p_k,k}, pointwise on the grid."""
    out = np.asarray(original, dtype=float).copy()
    for mixture in levels:
        out -= mixture_eval(mixture, omega)
    return out


def captured_energy(target: np.ndarray, fitted: np.ndarray, omega: np.ndarray) -> float:
    """2<A, A_p> - ||A_p||^2 = ||A||^2 - ||A - A_p||^2."""
    return squared_norm(target, omega) - squared_norm(np.asarray(target) - np.asarray(fitted), omega)


def _check_grid(values: np.ndarray, omega: np.ndarray) -> float:
    if values.shape != omega.shape or values.ndim != 1 or values.size % 2 != 1:
        raise HierarchyInputError("amplitude must live on a symmetric grid of 2N+1 points")
    try:
        h = uniform_step(omega)
    except GridError as e:
        raise HierarchyInputError(f"grid: {e}") from e
    if abs(omega[0] + omega[-1]) > 1e-9 * h * omega.size:
        raise HierarchyInputError("grid must be symmetric about 0")
    return h


def refine_once(
    residual_values: np.ndarray,
    omega: np.ndarray,
    method: Method,
    config: Optional[HierarchyConfig] = None,
    omega_max: Optional[float] = None,
) -> LevelFit:
    """
    Fit one signed mixture to a residual.

    Args:
        residual_values: residual on the symmetric grid `omega` (possibly padded)
        omega: the grid
        method: "pointwise" or "l2"
        config: hierarchy settings (prominence, per-method configs)
        omega_max: band limit; extrema are searched on [0, omega_max]

    Returns:
        LevelFit; `empty` is set when no extremum qualifies
    """
    config = config or HierarchyConfig()
    residual_values = np.asarray(residual_values, dtype=float)
    omega = np.asarray(omega, dtype=float)
    h = _check_grid(residual_values, omega)
    band = float(omega[-1]) if omega_max is None else float(omega_max)

    in_band = (omega >= -0.5 * h) & (omega <= band + 0.5 * h)
    half_vals, half_omega = residual_values[in_band], omega[in_band]
    scale = float(np.max(np.abs(half_vals)))
    if scale == 0.0:
        return LevelFit(empty=True)
    report = find_extrema(half_vals, half_omega, min_prominence=config.prominence_ratio * scale)

    floor = config.noise_floor_ratio * scale
    maxima = [e for e in report.maxima() if e.value >= floor]
    minima = [e for e in report.minima() if -e.value >= floor]
    below = len(report.maxima()) + len(report.minima()) - len(maxima) - len(minima)

    # a negative dip at w = 0 gets a negative center just like a positive peak
    center = report.origin_point
    if center is not None and not (
        (report.origin == "max" and center.value > 0) or (report.origin == "min" and center.value < 0)
    ):
        center = None
    if center is not None and abs(center.value) < floor:
        center, below = None, below + 1
    if not maxima and not minima and center is None:
        return LevelFit(empty=True, below_floor=below)

    targets = sorted(maxima + minima, key=lambda e: e.location)
    if method == "pointwise":
        mixture, diag = fit_pointwise(targets, center=center, config=config.pointwise)
        q = captured_energy(residual_values, mixture_eval(mixture, omega), omega)
    else:
        init = [(e.location, -e.value / e.second_deriv) for e in targets]
        center_sigma = None if center is None else -center.value / center.second_deriv
        mixture, diag = fit_l2(
            residual_values, omega, init, center_sigma=center_sigma, config=config.l2, omega_max=band
        )
        q = diag.q_value
    return LevelFit(
        mixture=mixture,
        q=q,
        p_n=len(maxima),
        q_n=len(minima),
        center=center is not None,
        below_floor=below,
        converged=diag.converged,
        diagnostics=diag,
    )


def _default_eps(method: Method, norm0: float, original: np.ndarray) -> float:
    if method == "l2":
        return settings.L2_EPS_RATIO * norm0
    return settings.POINTWISE_EPS_RATIO * float(np.max(original))


def _below_stop(method: Method, values: np.ndarray, omega: np.ndarray, eps: float) -> bool:
    if method == "l2":
        return squared_norm(values, omega) <= eps
    return float(np.max(values)) <= eps and float(np.min(values)) >= -eps


def refine_until(
    original: np.ndarray,
    omega: np.ndarray,
    config: Optional[HierarchyConfig] = None,
    omega_max: Optional[float] = None,
) -> Tuple[RefinementLedger, np.ndarray, np.ndarray]:
    """
    Refine level by level until the stopping rule of the method holds.

    L2 stops once ||A_{n+1}||^2 <= eps_stop; pointwise once
    max A_{n+1} <= eps_stop and min A_{n+1} >= -eps_stop. Both also stop on an
    empty level, on max_levels, and when a level fails to reduce the residual.
    A level whose extrema all sit under the noise floor counts as empty.

    Returns:
        (ledger, padded grid, final residual on the padded grid)
    """
    config = config or HierarchyConfig()
    original = np.asarray(original, dtype=float)
    omega = np.asarray(omega, dtype=float)
    _check_grid(original, omega)
    band = float(omega[-1]) if omega_max is None else float(omega_max)

    padded_omega, current = pad_symmetric(omega, original, config.pad_factor)
    norm0 = squared_norm(current, padded_omega)
    eps = config.eps_stop if config.eps_stop is not None else _default_eps(config.method, norm0, original)
    ledger = RefinementLedger(method=config.method, eps_stop=eps, original_sq_norm=norm0)

    norm = norm0
    for level in range(config.max_levels):
        if _below_stop(config.method, current, padded_omega, eps):
            ledger.stop_reason = "eps_reached"
            break
        fit = refine_once(current, padded_omega, config.method, config, omega_max=band)
        if fit.empty:
            ledger.stop_reason = "below_noise_floor" if fit.below_floor else "no_extrema"
            break
        nxt = current - mixture_eval(fit.mixture, padded_omega)
        nxt_norm = squared_norm(nxt, padded_omega)
        ledger.levels.append(
            LevelRecord(
                level=level,
                mixture=fit.mixture,
                q_max=fit.q,
                residual_sq_norm_before=norm,
                residual_sq_norm=nxt_norm,
                p_n=fit.p_n,
                q_n=fit.q_n,
                center=fit.center,
                converged=fit.converged,
                below_floor=fit.below_floor,
                diagnostics=fit.diagnostics,
            )
        )
        log_event(
            "hierarchy_level_fitted",
            level_index=level,
            method=config.method,
            atoms=fit.mixture.atom_count,
            p_n=fit.p_n,
            q_n=fit.q_n,
            center=fit.center,
            q=fit.q,
            residual_sq_norm=nxt_norm,
            ledger_gap=norm - fit.q - nxt_norm,
            converged=fit.converged,
        )
        if nxt_norm >= norm:
            log_event("hierarchy_no_improvement", level="warning", level_index=level, residual_sq_norm=nxt_norm)
            ledger.stop_reason = "no_improvement"
            current, norm = nxt, nxt_norm
            break
        current, norm = nxt, nxt_norm
    else:
        ledger.stop_reason = "max_levels"

    return ledger, padded_omega, current
