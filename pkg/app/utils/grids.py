"""Uniform grid helpers shared by the spectral and fitting modules."""

from typing import Tuple

import numpy as np


class GridError(ValueError):
    pass


def frequency_grid(omega_max: float, n_freq: int) -> np.ndarray:
    """omega_p = p * omega_max / n_freq for p = -N..N."""
    return np.arange(-n_freq, n_freq + 1) * (omega_max / n_freq)


def uniform_step(grid: np.ndarray, rtol: float = 1e-6) -> float:
    """Return the step of a strictly increasing uniform grid or raise GridError."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise GridError("grid needs at least 2 points")
    steps = np.diff(grid)
    h = float(steps.mean())
    if h <= 0 or np.any(steps <= 0):
        raise GridError("grid must be strictly increasing")
    if np.max(np.abs(steps - h)) > rtol * max(abs(h), 1e-300) + 1e-12 * np.max(np.abs(grid)):
        raise GridError("grid must be uniform")
    return h


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def half_grid(values: np.ndarray) -> np.ndarray:
    """Samples at omega >= 0 of a symmetric grid p = -N..N."""
    values = np.asarray(values)
    n = values.shape[-1] // 2
    return values[..., n:]


def mirror_even(half: np.ndarray) -> np.ndarray:
    """Rebuild p = -N..N from samples at p = 0..N of an even function."""
    half = np.asarray(half)
    return np.concatenate([half[:0:-1], half])


def pad_symmetric(omega: np.ndarray, values: np.ndarray, pad_factor: float) -> Tuple[np.ndarray, np.ndarray]:
    """Extend a symmetric grid with zeros out to pad_factor times its half-width."""
    omega = np.asarray(omega, dtype=float)
    values = np.asarray(values, dtype=float)
    if pad_factor <= 1.0:
        return omega, values
    h = uniform_step(omega)
    n = omega.size // 2
    n_total = int(np.ceil(n * pad_factor))
    extra = n_total - n
    if extra <= 0:
        return omega, values
    padded_omega = np.arange(-n_total, n_total + 1) * h
    padded_values = np.concatenate([np.zeros(extra), values, np.zeros(extra)])
    return padded_omega, padded_values
