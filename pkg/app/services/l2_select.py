"""
L2 Selection Module

This module is responsible for:
- Assembling the Gram matrix of Gaussian pair atoms (closed form)
- Solving the normal equations G alpha = f by Cholesky factorization
- The gradient of the captured energy Q = f^T G^-1 f over the atom shapes
- Steepest ascent on Q with backtracking and step growth, measured in the
  natural metric of the atoms

f_i are the discrete inner products of the sampled amplitude with the atoms;
weights are signed, so one fit covers positive and negative atoms alike.
A center atom (single Gaussian at w = 0) may lead the atom list; only its
width moves during the ascent.

Each shape parameter is stepped by Delta * dQ/dbeta / D_beta, where D_beta is
the squared norm of alpha * dG/dbeta. Delta is then dimensionless, and small
or narrow atoms move as fast as the dominant ones.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from app.config import settings
from app.models.atoms import GaussianAtom, SignedMixture
from app.models.errors import ChirpletError, ErrorCode
from app.models.ledger import AscentRecord, L2Diagnostics
from app.services.gaussian_model import discrete_inner_products, gram_matrix, gram_partials
from app.utils.grids import uniform_step
from app.utils.logging import log_event


class IllConditionedError(ChirpletError):
    code = ErrorCode.ILL_CONDITIONED


class L2InputError(ChirpletError):
    code = ErrorCode.INVALID_INPUT


class L2Config(BaseModel):
    max_iter: int = Field(default_factory=lambda: settings.L2_MAX_ITER, ge=0)
    grad_tol: float = Field(default_factory=lambda: settings.L2_GRAD_TOL, gt=0)
    step_scale: float = Field(default_factory=lambda: settings.L2_STEP_SCALE, gt=0)
    step_growth: float = Field(default_factory=lambda: settings.L2_STEP_GROWTH, ge=1.0)
    max_rejections: int = Field(default_factory=lambda: settings.L2_MAX_REJECTIONS, ge=1)
    width_floor: float = Field(default_factory=lambda: settings.WIDTH_FLOOR, gt=0)
    # explicit initial Delta; None falls back to step_scale
    step0: Optional[float] = Field(default=None, gt=0)


class L2State(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    omegas: np.ndarray
    sigmas: np.ndarray
    has_center: bool = False
    weights: np.ndarray
    q_value: float
    step: float = 0.0

    @property
    def shapes(self) -> List[Tuple[float, float]]:
        return list(zip(self.omegas.tolist(), self.sigmas.tolist()))

    @property
    def scales(self) -> np.ndarray:
        return _scales(self.omegas.size, self.has_center)


def _scales(n: int, has_center: bool) -> np.ndarray:
    scales = np.ones(n)
    if has_center and n:
        scales[0] = 0.5
    return scales


def assemble_gram(shapes: Sequence[Tuple[float, float]], has_center: bool = False) -> np.ndarray:
    """
    G_ij = <G_i, G_j> from the closed form.

    Raises:
        L2InputError: empty shape list
        IllConditionedError: two atoms with identical (omega, sigma)
    """
    if len(shapes) == 0:
        raise L2InputError("at least one atom shape is required")
    omegas = np.array([s[0] for s in shapes], dtype=float)
    sigmas = np.array([s[1] for s in shapes], dtype=float)
    if np.any(sigmas <= 0):
        raise L2InputError("widths must be positive")
    for i in range(len(shapes)):
        same = np.isclose(omegas[i + 1:], omegas[i], rtol=1e-12, atol=1e-12) & np.isclose(
            sigmas[i + 1:], sigmas[i], rtol=1e-12, atol=0.0
        )
        if np.any(same):
            raise IllConditionedError(
                "duplicate atoms make the Gram matrix singular",
                detail={"omega": float(omegas[i]), "sigma": float(sigmas[i])},
            )
    return gram_matrix(omegas, sigmas, _scales(len(shapes), has_center))


def solve_weights(gram: np.ndarray, f: np.ndarray) -> np.ndarray:
    """
    Solve G alpha = f with a Cholesky factorization plus one refinement step.

    Raises:
        IllConditionedError: factorization failed or the residual stays large;
            detail carries the 2-norm condition estimate
    """
    gram = np.asarray(gram, dtype=float)
    f = np.asarray(f, dtype=float)
    try:
        factor = cho_factor(gram, lower=True, check_finite=True)
        alpha = cho_solve(factor, f)
        alpha = alpha + cho_solve(factor, f - gram @ alpha)
    except (LinAlgError, ValueError) as e:
        raise IllConditionedError(
            "Gram matrix is not numerically positive definite",
            detail={"condition": float(np.linalg.cond(gram)), "reason": str(e)},
        ) from e
    residual = float(np.linalg.norm(gram @ alpha - f))
    if residual > 1e-8 * max(float(np.linalg.norm(f)), 1e-300):
        raise IllConditionedError(
            "normal equations solved inaccurately",
            detail={"condition": float(np.linalg.cond(gram)), "residual": residual},
        )
    return alpha


def _evaluate(amplitude, omega, omegas, sigmas, has_center):
    scales = _scales(omegas.size, has_center)
    f, df_omega, df_sigma = discrete_inner_products(amplitude, omega, omegas, sigmas, scales)
    gram = gram_matrix(omegas, sigmas, scales)
    weights = solve_weights(gram, f)
    return float(f @ weights), weights, (df_omega, df_sigma)


def q_gradient(
    state: L2State,
    amplitude: np.ndarray,
    omega: np.ndarray,
    df: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    dQ/d(beta_i) = 2 alpha_i (df_i/dbeta_i - sum_{j != i} d<G_i,G_j>/dbeta_i alpha_j)
                   - alpha_i^2 d<G_i,G_i>/dbeta_i

    The self term's total derivative is twice the row partial, so both sums
    collapse to 2 alpha_i (df_i - (P alpha)_i).

    Returns:
        (dQ/domega, dQ/dsigma); a center atom's omega component is 0
    """
    if df is None:
        _, df_omega, df_sigma = discrete_inner_products(amplitude, omega, state.omegas, state.sigmas, state.scales)
    else:
        df_omega, df_sigma = df
    p_omega, p_sigma = gram_partials(state.omegas, state.sigmas, state.scales)
    alpha = state.weights
    grad_omega = 2 * alpha * (df_omega - p_omega @ alpha)
    grad_sigma = 2 * alpha * (df_sigma - p_sigma @ alpha)
    if state.has_center:
        grad_omega[0] = 0.0
    return grad_omega, grad_sigma


def natural_metric(
    weights: np.ndarray, sigmas: np.ndarray, scales: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Diagonal metric (D_omega, D_sigma) = (alpha^2 ||dG/domega||^2, alpha^2 ||dG/dsigma||^2).

    Exact for the two separated lobes of a pair and for the merged lobes of
    a center atom. Near-zero weights are floored at 1e-12 of the largest one
    so the metric stays invertible.
    """
    weights = np.asarray(weights, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    scales = np.asarray(scales, dtype=float)
    a2 = np.maximum(weights ** 2, max(1e-12 * float(np.max(weights ** 2)), 1e-300)) * scales ** 2
    root = np.sqrt(np.pi * sigmas)
    lobes = np.where(scales < 1.0, 2.0, 1.0)
    return a2 * root / sigmas, a2 * lobes * 3 * root / (8 * sigmas ** 2)


def to_mixture(state: L2State) -> SignedMixture:
    center = None
    pairs = list(zip(state.weights.tolist(), state.omegas.tolist(), state.sigmas.tolist()))
    if state.has_center:
        weight, _, sigma = pairs.pop(0)
        center = GaussianAtom(alpha=weight, sigma=sigma, kind="center")
    return SignedMixture.from_signed(center, pairs)


def fit_l2(
    amplitude: np.ndarray,
    omega: np.ndarray,
    init: Sequence[Tuple[float, float]],
    center_sigma: Optional[float] = None,
    config: Optional[L2Config] = None,
    omega_max: Optional[float] = None,
) -> Tuple[SignedMixture, L2Diagnostics]:
    """
    Maximize Q over the atom shapes by steepest ascent.

    Converged once sqrt(g^T D^-1 g) <= grad_tol * sqrt(Q); also stops at
    max_iter or after max_rejections consecutive halvings.

    Args:
        amplitude: sampled target on the symmetric grid `omega`
        omega: uniform symmetric frequency grid (may extend beyond the band)
        init: initial (omega, sigma) per pair atom
        center_sigma: initial width of a center atom, or None for no center
        config: ascent controls
        omega_max: band limit bounding the atom centers (default: grid extent)

    Returns:
        (mixture with solved signed weights, diagnostics with the ascent history)

    Raises:
        IllConditionedError: the initial Gram system cannot be solved
    """
    config = config or L2Config()
    amplitude = np.asarray(amplitude, dtype=float)
    omega = np.asarray(omega, dtype=float)
    h = uniform_step(omega)
    band = float(omega[-1]) if omega_max is None else float(omega_max)
    sigma_lo, sigma_hi = max(config.width_floor, 4 * h * h), (2 * band) ** 2
    # centers stay two samples inside the band, where a 5-point phase stencil exists
    omega_hi = max(band - 2 * h, 0.0)

    has_center = center_sigma is not None
    omegas = np.array(([0.0] if has_center else []) + [s[0] for s in init], dtype=float)
    sigmas = np.array(([center_sigma] if has_center else []) + [s[1] for s in init], dtype=float)
    if omegas.size == 0:
        raise L2InputError("at least one atom shape is required")
    raw_sigmas = sigmas.copy()
    omegas = np.clip(omegas, 0.0, omega_hi)
    sigmas = np.clip(sigmas, sigma_lo, sigma_hi)
    clamped = bool(np.any(sigmas != raw_sigmas))
    assemble_gram(list(zip(omegas, sigmas)), has_center)

    q, weights, df = _evaluate(amplitude, omega, omegas, sigmas, has_center)
    state = L2State(omegas=omegas, sigmas=sigmas, has_center=has_center, weights=weights, q_value=q)
    grad_omega, grad_sigma = q_gradient(state, amplitude, omega, df)
    metric = natural_metric(state.weights, state.sigmas, state.scales)

    def metric_norm(g_om, g_sg, d):
        return float(np.sqrt(np.sum(g_om ** 2 / d[0] + g_sg ** 2 / d[1])))

    step = config.step0 or config.step_scale
    grad_norm = metric_norm(grad_omega, grad_sigma, metric)
    history = [AscentRecord(iter=0, q=q, step=step, grad_norm=grad_norm)]

    converged, rejections, total_rejections, iteration = False, 0, 0, 0
    while True:
        # gradient length in the metric is an amplitude, like sqrt(Q)
        if grad_norm <= config.grad_tol * np.sqrt(max(q, 1e-300)):
            converged = True
            break
        if iteration >= config.max_iter:
            break
        iteration += 1
        cand_omegas = np.clip(state.omegas + step * grad_omega / metric[0], 0.0, omega_hi)
        cand_sigmas = np.clip(state.sigmas + step * grad_sigma / metric[1], sigma_lo, sigma_hi)
        if has_center:
            cand_omegas[0] = 0.0
        try:
            cand_q, cand_weights, cand_df = _evaluate(amplitude, omega, cand_omegas, cand_sigmas, has_center)
        except IllConditionedError:
            cand_q = -np.inf
        if cand_q > q:
            state = L2State(
                omegas=cand_omegas, sigmas=cand_sigmas, has_center=has_center,
                weights=cand_weights, q_value=cand_q, step=step,
            )
            q = cand_q
            grad_omega, grad_sigma = q_gradient(state, amplitude, omega, cand_df)
            metric = natural_metric(state.weights, state.sigmas, state.scales)
            grad_norm = metric_norm(grad_omega, grad_sigma, metric)
            history.append(AscentRecord(iter=iteration, q=q, step=step, grad_norm=grad_norm))
            step *= config.step_growth
            rejections = 0
        else:
            step *= 0.5
            rejections += 1
            total_rejections += 1
            if rejections >= config.max_rejections:
                log_event("l2_ascent_stalled", level="warning", iteration=iteration, q=q, grad_norm=grad_norm)
                break

    state = state.model_copy(update={"step": step})
    log_event(
        "l2_ascent_finished",
        converged=converged,
        iterations=iteration,
        q=q,
        grad_norm=grad_norm,
        atoms=int(state.omegas.size),
    )
    diagnostics = L2Diagnostics(
        converged=converged,
        iterations=iteration,
        q_value=q,
        rejections=total_rejections,
        clamped=clamped,
        history=history,
    )
    return to_mixture(state), diagnostics
