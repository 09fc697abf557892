"""
Pointwise Selection Module

This module is responsible for:
- Initial atom triples (alpha, omega, sigma) from amplitude extrema
- Gauss-Seidel sweeps that match value, slope and curvature of the mixture
  at every target extremum
- The fit driver with convergence control, guard bookkeeping and a
  per-iteration parameter table

Targets carry a sign: +1 for a positive maximum, -1 for a negative minimum
(fitted as a maximum of the negated residual). An optional center target at
w = 0 fits the single Gaussian alpha0 * exp(-w^2 / 2 sigma0).
"""

from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from app.config import settings
from app.models.atoms import ExtremumPoint, GaussianAtom, SignedMixture
from app.models.errors import ChirpletError, ErrorCode
from app.models.ledger import PointwiseDiagnostics, PointwiseRow
from app.services.gaussian_model import clamp_width, mixture_eval, pair_values
from app.utils.logging import log_event


class RejectedTargetError(ChirpletError):
    code = ErrorCode.REJECTED_TARGET


class PointwiseConfig(BaseModel):
    tol: float = Field(default_factory=lambda: settings.POINTWISE_TOL, gt=0)
    max_iter: int = Field(default_factory=lambda: settings.POINTWISE_MAX_ITER, ge=1)
    guard_limit: int = Field(default_factory=lambda: settings.POINTWISE_GUARD_LIMIT, ge=1)
    width_floor: float = Field(default_factory=lambda: settings.WIDTH_FLOOR, gt=0)


class PointwiseState(BaseModel):
    """
    Current triples for the pair targets plus the optional center pair (alpha0, sigma0).

    alpha values are magnitudes; the signed weight of pair j is signs[j] * alpha.
    """

    params: List[Tuple[float, float, float]]
    signs: List[float]
    center: Optional[Tuple[float, float]] = None
    center_sign: float = 1.0
    iteration: int = 0
    last_change: float = float("inf")
    failures: List[int] = Field(default_factory=list)
    center_failures: int = 0
    skipped: List[bool] = Field(default_factory=list)
    center_skipped: bool = False
    clamped: List[int] = Field(default_factory=list)


def _target_sign(target: ExtremumPoint) -> float:
    if target.kind == "max":
        if not target.value > 0:
            raise RejectedTargetError(
                "maximum targets need a positive value",
                detail={"location": target.location, "value": target.value},
            )
        return 1.0
    if not target.value < 0:
        raise RejectedTargetError(
            "minimum targets need a negative value",
            detail={"location": target.location, "value": target.value},
        )
    return -1.0


def _initial_pair(target: ExtremumPoint, sign: float) -> Tuple[float, float, float]:
    value, curvature = sign * target.value, sign * target.second_deriv
    if not curvature < 0:
        raise RejectedTargetError(
            "target curvature has the wrong sign",
            detail={"location": target.location, "second_deriv": target.second_deriv},
        )
    return value, target.location, -value / curvature


def init_params(targets: List[ExtremumPoint], center: Optional[ExtremumPoint] = None) -> PointwiseState:
    """
    alpha_j = |A(W_j)|, omega_j = W_j, sigma_j = -A(W_j) / A''(W_j).

    Raises:
        RejectedTargetError: a target whose value or curvature cannot seed an atom
    """
    params, signs = [], []
    for target in sorted(targets, key=lambda t: t.location):
        if target.location <= 0:
            raise RejectedTargetError("pass the w = 0 extremum as the center target")
        sign = _target_sign(target)
        params.append(_initial_pair(target, sign))
        signs.append(sign)
    center_pair, center_sign = None, 1.0
    if center is not None:
        center_sign = _target_sign(center)
        alpha0, _, sigma0 = _initial_pair(center, center_sign)
        center_pair = (alpha0, sigma0)
    return PointwiseState(
        params=params,
        signs=signs,
        center=center_pair,
        center_sign=center_sign,
        failures=[0] * len(params),
        skipped=[False] * len(params),
    )


def _contributions(state: PointwiseState, at: float, exclude: Optional[int]) -> Tuple[float, float, float]:
    """Signed value / first / second derivative at `at` of every atom except pair `exclude`."""
    total = np.zeros(3)
    if state.center is not None and exclude != -1:
        alpha0, sigma0 = state.center
        e = np.exp(-at * at / (2 * sigma0))
        w = state.center_sign * alpha0
        total += w * np.array([e, -at / sigma0 * e, (-1 / sigma0 + at * at / sigma0 ** 2) * e])
    idx = [k for k in range(len(state.params)) if k != exclude]
    if idx:
        om = np.array([state.params[k][1] for k in idx])
        sg = np.array([state.params[k][2] for k in idx])
        weights = np.array([state.signs[k] * state.params[k][0] for k in idx])
        ones = np.ones(len(idx))
        grid = np.array([at])
        for order in (0, 1, 2):
            total[order] += float(weights @ pair_values(grid, om, sg, ones, order)[:, 0])
    return total[0], total[1], total[2]


def _relative_change(old: Tuple[float, float, float], new: Tuple[float, float, float]) -> float:
    a0, w0, s0 = old
    a1, w1, s1 = new
    return max(abs(a1 - a0) / abs(a0), abs(w1 - w0) / np.sqrt(s0), abs(s1 - s0) / s0)


def sweep(
    state: PointwiseState,
    targets: List[ExtremumPoint],
    center: Optional[ExtremumPoint] = None,
    width_floor: Optional[float] = None,
) -> PointwiseState:
    """
    One Gauss-Seidel pass: the center first, then pairs j = 1..p in location order,
    each using already-updated triples for earlier atoms and current ones for later
    atoms and for its own mirror term.

    An index whose guard (A > 0, C < 0) fails keeps its triple and is flagged.
    """
    ordered = sorted(targets, key=lambda t: t.location)
    if len(ordered) != len(state.params):
        raise RejectedTargetError("target count does not match the state")
    if (center is None) != (state.center is None):
        raise RejectedTargetError("center target and center state must come together")
    floor = settings.WIDTH_FLOOR if width_floor is None else width_floor

    new = state.model_copy(deep=True)
    change = 0.0

    if new.center is not None:
        v, _, c = _contributions(new, 0.0, exclude=-1)
        big_a = new.center_sign * (center.value - v)
        big_c = new.center_sign * (center.second_deriv - c)
        if big_a > 0 and big_c < 0:
            sigma0, clamped = clamp_width(big_a / -big_c, floor)
            if clamped and 0 not in new.clamped:
                new.clamped.append(0)
            old = new.center
            new.center = (big_a, sigma0)
            change = max(change, abs(big_a - old[0]) / abs(old[0]), abs(sigma0 - old[1]) / old[1])
            new.center_failures, new.center_skipped = 0, False
        else:
            new.center_failures += 1
            new.center_skipped = True
            log_event("pointwise_guard_failed", level="warning", index=0, A=big_a, C=big_c)

    for j, target in enumerate(ordered):
        sign = new.signs[j]
        alpha, omega_j, sigma_j = new.params[j]
        v, d1, d2 = _contributions(new, target.location, exclude=j)
        # mirror half of pair j, evaluated at the current triple
        s = target.location + omega_j
        e = np.exp(-s * s / (2 * sigma_j))
        mirror = alpha * np.array([e, -s / sigma_j * e, (-1 / sigma_j + s * s / sigma_j ** 2) * e])

        big_a = sign * (target.value - v) - mirror[0]
        big_b = -(sign * (0.0 - d1) - mirror[1])
        big_c = sign * (target.second_deriv - d2) - mirror[2]
        if big_a > 0 and big_c < 0:
            d = big_b / big_a
            sigma_new, clamped = clamp_width(big_a / (big_a * d * d - big_c), floor)
            if clamped and (j + 1) not in new.clamped:
                new.clamped.append(j + 1)
            omega_new = abs(target.location - sigma_new * d)
            alpha_new = big_a * np.exp(sigma_new * d * d / 2)
            triple = (float(alpha_new), float(omega_new), float(sigma_new))
            change = max(change, _relative_change(new.params[j], triple))
            new.params[j] = triple
            new.failures[j], new.skipped[j] = 0, False
        else:
            new.failures[j] += 1
            new.skipped[j] = True
            log_event("pointwise_guard_failed", level="warning", index=j + 1, A=big_a, C=big_c)

    new.iteration = state.iteration + 1
    new.last_change = change
    return new


def _drop(state: PointwiseState, targets: List[ExtremumPoint], j: int):
    keep = [k for k in range(len(state.params)) if k != j]
    state = state.model_copy(
        update={
            "params": [state.params[k] for k in keep],
            "signs": [state.signs[k] for k in keep],
            "failures": [state.failures[k] for k in keep],
            "skipped": [state.skipped[k] for k in keep],
        }
    )
    return state, [targets[k] for k in keep]


def to_mixture(state: PointwiseState) -> SignedMixture:
    center = None
    if state.center is not None:
        alpha0, sigma0 = state.center
        center = GaussianAtom(alpha=state.center_sign * alpha0, sigma=sigma0, kind="center")
    return SignedMixture.from_signed(
        center,
        [(sign * a, w, s) for sign, (a, w, s) in zip(state.signs, state.params)],
    )


def _table_rows(state: PointwiseState, rows: List[PointwiseRow], labels: List[int]) -> None:
    if state.center is not None:
        rows.append(PointwiseRow(
            iter=state.iteration, index=0, alpha=state.center_sign * state.center[0],
            omega=0.0, sigma=state.center[1], skipped=state.center_skipped,
        ))
    for label, sign, (a, w, s), skipped in zip(labels, state.signs, state.params, state.skipped):
        rows.append(PointwiseRow(iter=state.iteration, index=label, alpha=sign * a, omega=w, sigma=s, skipped=skipped))


def fit_pointwise(
    targets: List[ExtremumPoint],
    center: Optional[ExtremumPoint] = None,
    config: Optional[PointwiseConfig] = None,
    amplitude: Optional[np.ndarray] = None,
    omega: Optional[np.ndarray] = None,
) -> Tuple[SignedMixture, PointwiseDiagnostics]:
    """
    Sweep until the largest relative parameter change falls below tol.

    Args:
        targets: extrema of the amplitude (A(W_j), A''(W_j) from the extrema module)
        center: optional extremum at w = 0 fitted by the center atom
        config: iteration controls
        amplitude, omega: optional sampled amplitude; when given, the largest
            absolute misfit on the grid is logged

    Returns:
        (mixture, diagnostics). Non-convergence is reported, never raised.
    """
    config = config or PointwiseConfig()
    targets = sorted(targets, key=lambda t: t.location)
    state = init_params(targets, center)
    labels = list(range(1, len(targets) + 1))
    rows: List[PointwiseRow] = []
    _table_rows(state, rows, labels)
    dropped: List[int] = []
    converged = False

    while state.iteration < config.max_iter:
        state = sweep(state, targets, center, config.width_floor)
        _table_rows(state, rows, labels)

        for j in reversed(range(len(state.params))):
            if state.failures[j] >= config.guard_limit:
                log_event("pointwise_atom_dropped", level="warning", index=labels[j], failures=state.failures[j])
                dropped.append(labels[j])
                state, targets = _drop(state, targets, j)
                labels.pop(j)
        if state.center is not None and state.center_failures >= config.guard_limit:
            log_event("pointwise_atom_dropped", level="warning", index=0, failures=state.center_failures)
            dropped.append(0)
            state = state.model_copy(update={"center": None, "center_failures": 0, "center_skipped": False})
            center = None

        if state.last_change < config.tol and not any(state.skipped) and not state.center_skipped:
            converged = True
            break

    mixture = to_mixture(state)
    fields = {}
    if amplitude is not None and omega is not None:
        fields["max_abs_misfit"] = float(np.max(np.abs(np.asarray(amplitude) - mixture_eval(mixture, omega))))
    log_event(
        "pointwise_fit_finished",
        converged=converged,
        iterations=state.iteration,
        last_change=state.last_change,
        atoms=mixture.atom_count,
        dropped=dropped,
        **fields,
    )
    diagnostics = PointwiseDiagnostics(
        converged=converged,
        iterations=state.iteration,
        last_change=state.last_change,
        guard_failures={labels[j]: f for j, f in enumerate(state.failures) if f},
        dropped=sorted(dropped),
        clamped=sorted(state.clamped),
        table=rows,
    )
    return mixture, diagnostics
