"""
Chirplet Module

This module is responsible for:
- Local quadratic Taylor data (gamma, t, kappa) of the unwrapped spectral phase
- Attaching that data to a fitted Gaussian mixture -> ChirpletModel
- The closed-form model spectrum H_{p,2} and its time-domain sum of real
  Gaussian chirps f_{p,2}

Each pair atom (alpha, w_k, s_k, gamma, t_k, kappa) synthesizes to
    2 (2 pi s_k)^(1/2) alpha (1 + k^2 s^2)^(-1/4) exp(-s (t - t_k)^2 / 2(1 + k^2 s^2))
      * cos(k s^2 (t - t_k)^2 / 2(1 + k^2 s^2) + w_k t - gamma - phi),
phi = angle(1 + j k s) / 2, and the center atom to (2 pi s0)^(1/2) a0 exp(-s0 (t - t0)^2 / 2).
"""

from typing import List, Sequence, Tuple

import numpy as np

from app.models.atoms import ChirpAtom, ChirpCenter, ChirpletModel, SignedMixture
from app.models.errors import ChirpletError, ErrorCode
from app.models.signals import RealSignal
from app.utils.grids import GridError, uniform_step
from app.utils.logging import log_event


class PhaseInvalidError(ChirpletError):
    code = ErrorCode.PHASE_INVALID


class ChirpletInputError(ChirpletError):
    code = ErrorCode.INVALID_INPUT


def _grid_step(phase: np.ndarray, omega: np.ndarray) -> float:
    if phase.shape != omega.shape or phase.ndim != 1:
        raise ChirpletInputError("phase and frequency grid must match")
    try:
        return uniform_step(omega)
    except GridError as e:
        raise ChirpletInputError(f"frequency grid: {e}") from e


def _stencil(phase: np.ndarray, i: int) -> np.ndarray:
    if i - 2 < 0 or i + 2 >= phase.size:
        return None
    window = phase[i - 2:i + 3]
    return window if np.all(np.isfinite(window)) else None


def _d1(v: np.ndarray, h: float) -> float:
    return float((v[0] - 8 * v[1] + 8 * v[3] - v[4]) / (12 * h))


def _d2(v: np.ndarray, h: float) -> float:
    return float((-v[0] + 16 * v[1] - 30 * v[2] + 16 * v[3] - v[4]) / (12 * h * h))


def phase_taylor(phase: np.ndarray, omega: np.ndarray, omega_c: float) -> Tuple[float, float, float]:
    """
    (gamma, t, kappa) = (psi, psi', psi'') at omega_c.

    5-point stencils at the nearest grid sample, shifted to omega_c by the local
    quadratic; kappa is interpolated between neighbouring stencils when both are valid.
    Quadratic phases are recovered exactly.

    Raises:
        PhaseInvalidError: fewer than 2 valid phase samples on either side of omega_c
    """
    phase = np.asarray(phase, dtype=float)
    omega = np.asarray(omega, dtype=float)
    h = _grid_step(phase, omega)
    i = int(np.rint((omega_c - omega[0]) / h))
    window = _stencil(phase, i)
    if window is None:
        raise PhaseInvalidError(
            "phase is not valid around the requested frequency",
            detail={"omega": float(omega_c)},
        )
    delta = float(omega_c - omega[i])
    slope, curvature = _d1(window, h), _d2(window, h)
    gamma = float(window[2] + slope * delta + 0.5 * curvature * delta ** 2)
    t_c = slope + curvature * delta

    neighbour = _stencil(phase, i + (1 if delta > 0 else -1)) if delta != 0 else None
    kappa = curvature
    if neighbour is not None:
        frac = abs(delta) / h
        kappa = (1 - frac) * curvature + frac * _d2(neighbour, h)
    return gamma, t_c, kappa


def phase_offset(kappa: float, sigma: float) -> float:
    """phi = angle(1 + j kappa sigma) / 2, in (-pi/4, pi/4)."""
    if not sigma > 0:
        raise ChirpletInputError("sigma must be positive")
    return 0.5 * float(np.angle(1 + 1j * kappa * sigma))


def build_model(mixture: SignedMixture, phase: np.ndarray, omega: np.ndarray) -> ChirpletModel:
    """
    Attach local phase data to every atom of a mixture.

    Pair atoms get (gamma, t, kappa) from phase_taylor at their centers; a
    negative-weight atom becomes a chirp of weight beta with gamma + pi. The center
    atom gets t0 = psi'(0); its gamma and kappa vanish for an odd phase. When the
    phase is anchored at pi (H_e(0) < 0) the center weight changes sign instead.

    Raises:
        PhaseInvalidError: phase invalid at an atom center (the detail names the atom)
    """
    phase = np.asarray(phase, dtype=float)
    omega = np.asarray(omega, dtype=float)
    h = _grid_step(phase, omega)

    center = None
    if mixture.center is not None:
        i0 = int(np.rint(-omega[0] / h))
        window = _stencil(phase, i0)
        if window is None:
            raise PhaseInvalidError("phase invalid at the center atom", detail={"atom": "center"})
        anchor = float(window[2])
        sign = -1.0 if abs(anchor - np.pi) < 1e-6 else 1.0
        center = ChirpCenter(alpha0=sign * mixture.center.alpha, sigma0=mixture.center.sigma, t0=_d1(window, h))

    atoms: List[ChirpAtom] = []
    for label, group, shift in (("positive", mixture.positive, 0.0), ("negative", mixture.negative, np.pi)):
        for k, atom in enumerate(group):
            try:
                gamma, t_c, kappa = phase_taylor(phase, omega, atom.omega_c)
            except PhaseInvalidError as e:
                raise PhaseInvalidError(
                    f"phase invalid at {label} atom {k}",
                    detail={"atom": f"{label}[{k}]", "omega": atom.omega_c},
                ) from e
            atoms.append(ChirpAtom(
                alpha=atom.alpha, omega_c=atom.omega_c, sigma=atom.sigma,
                gamma=gamma + shift, t_c=t_c, kappa=kappa,
            ))
    atoms.sort(key=lambda a: a.omega_c)
    model = ChirpletModel(center=center, atoms=atoms)
    log_event("chirplet_model_built", atoms=len(atoms), center=center is not None, parameters=model.parameter_count)
    return model


def model_spectrum(model: ChirpletModel, omega: np.ndarray) -> np.ndarray:
    """H_{p,2}(w): Gaussian lobes carrying the local quadratic phase, conj(H(w)) = H(-w)."""
    w = np.asarray(omega, dtype=float)
    out = np.zeros(w.shape, dtype=complex)
    if model.center is not None:
        c = model.center
        out += c.alpha0 * np.exp(-w ** 2 / (2 * c.sigma0)) * np.exp(-1j * c.t0 * w)
    for a in model.atoms:
        up, down = w - a.omega_c, w + a.omega_c
        out += a.alpha * np.exp(-up ** 2 / (2 * a.sigma)) * np.exp(
            -1j * (a.gamma + a.t_c * up + 0.5 * a.kappa * up ** 2)
        )
        out += a.alpha * np.exp(-down ** 2 / (2 * a.sigma)) * np.exp(
            1j * (a.gamma - a.t_c * down + 0.5 * a.kappa * down ** 2)
        )
    return out


def _chirp_sum(model: ChirpletModel, t: np.ndarray) -> np.ndarray:
    out = np.zeros(t.shape)
    if model.center is not None:
        c = model.center
        out += np.sqrt(2 * np.pi * c.sigma0) * c.alpha0 * np.exp(-c.sigma0 * (t - c.t0) ** 2 / 2)
    for a in model.atoms:
        spread = 1 + (a.kappa * a.sigma) ** 2
        shifted = (t - a.t_c) ** 2
        envelope = np.exp(-a.sigma * shifted / (2 * spread))
        carrier = np.cos(
            a.kappa * a.sigma ** 2 * shifted / (2 * spread)
            + a.omega_c * t
            - a.gamma
            - phase_offset(a.kappa, a.sigma)
        )
        out += 2 * np.sqrt(2 * np.pi * a.sigma) * a.alpha * spread ** -0.25 * envelope * carrier
    return out


def _times(t_grid: np.ndarray) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ChirpletInputError("time grid needs at least 2 points")
    try:
        uniform_step(t)
    except GridError as e:
        raise ChirpletInputError(f"time grid: {e}") from e
    return t


def synthesize_chirps(model: ChirpletModel, t_grid: np.ndarray) -> RealSignal:
    """f_{p,2}(t) on a uniform time grid; real by construction."""
    t = _times(t_grid)
    return RealSignal.from_grid(t, _chirp_sum(model, t))


def synthesize_levels(models: Sequence[ChirpletModel], t_grid: np.ndarray) -> RealSignal:
    """Sum of the chirp syntheses of several hierarchy levels."""
    t = _times(t_grid)
    total = np.zeros(t.shape)
    for model in models:
        total += _chirp_sum(model, t)
    return RealSignal.from_grid(t, total)
