"""
Spectrum Module

This module is responsible for:
- Computing H_e / H_o of a sampled real signal by trapezoidal quadrature
- Amplitude / unwrapped phase of the polar form H = A exp(-j psi)
- The standard (trapezoidal) synthesis f_N and its lattice inversion
- Roundtrip sanity checks between an original spectrum and a model spectrum

Normalization: f(t) = integral e^{jwt} H(w) dw over (-W, W) and
H(w) = (1/2pi) integral e^{-jwt} f(t) dt.
"""

from typing import Callable, Optional, Tuple

import numpy as np

from app.config import settings
from app.models.errors import ChirpletError, ErrorCode
from app.models.signals import RealSignal, SampledSpectrum
from app.utils.grids import frequency_grid, trapezoid_weights, uniform_step, GridError
from app.utils.logging import log_event

_CHUNK = 2048


class SpectrumInputError(ChirpletError):
    """Malformed input: wrong sample counts, too-short signals, bad grids."""
    code = ErrorCode.INVALID_INPUT


class SpectrumDomainError(ChirpletError):
    """Parameter outside its mathematical domain (e.g. omega_max <= 0)."""
    code = ErrorCode.DOMAIN_ERROR


class DegenerateSpectrumError(ChirpletError):
    """Amplitude vanishes (below the phase floor) everywhere, or a zero-norm reference."""
    code = ErrorCode.DEGENERATE_SPECTRUM


class GridMismatchError(ChirpletError):
    code = ErrorCode.GRID_MISMATCH


def _mirror_odd(half: np.ndarray) -> np.ndarray:
    return np.concatenate([-half[:0:-1], half])


def _mirror_even(half: np.ndarray) -> np.ndarray:
    return np.concatenate([half[:0:-1], half])


def spectrum_from_halves(
    omega_max: float,
    n_freq: int,
    he_half: np.ndarray,
    ho_half: np.ndarray,
    floor_ratio: Optional[float] = None,
    boundary_ratio: Optional[float] = None,
) -> SampledSpectrum:
    """
    Assemble a SampledSpectrum from samples at p = 0..N.

    The negative half is mirrored, so the symmetry invariants hold exactly.
    """
    if not omega_max > 0:
        raise SpectrumDomainError("omega_max must be positive", {"omega_max": omega_max})
    he_half = np.asarray(he_half, dtype=float)
    ho_half = np.array(ho_half, dtype=float)
    if he_half.size != n_freq + 1 or ho_half.size != n_freq + 1:
        raise SpectrumInputError("half spectra need N+1 samples", {"n_freq": n_freq})
    if not (np.all(np.isfinite(he_half)) and np.all(np.isfinite(ho_half))):
        raise SpectrumInputError("spectrum values must be finite")
    ho_half[0] = 0.0

    h_even = _mirror_even(he_half)
    h_odd = _mirror_odd(ho_half)
    amplitude = np.hypot(h_even, h_odd)
    peak = float(amplitude.max())
    if peak == 0.0:
        raise DegenerateSpectrumError("spectrum amplitude is identically zero")

    floor = (settings.PHASE_FLOOR_RATIO if floor_ratio is None else floor_ratio) * peak
    phase = unwrap_phase(h_even, h_odd, amplitude, floor)

    ratio = settings.BOUNDARY_TOL_RATIO if boundary_ratio is None else boundary_ratio
    boundary_ok = bool(amplitude[-1] < ratio * peak)
    if not boundary_ok:
        log_event(
            "spectrum_boundary_warning",
            level="warning",
            amplitude_at_boundary=float(amplitude[-1]),
            peak=peak,
            omega_max=omega_max,
        )

    return SampledSpectrum(
        omega_max=omega_max,
        n_freq=n_freq,
        h_even=h_even,
        h_odd=h_odd,
        phase=phase,
        phase_floor=floor,
        boundary_ok=boundary_ok,
    )


def spectrum_from_polar(
    omega_max: float,
    n_freq: int,
    amplitude: Callable[[np.ndarray], np.ndarray],
    phase: Callable[[np.ndarray], np.ndarray],
    **kwargs,
) -> SampledSpectrum:
    """Sample H = A exp(-j psi) for an even A and odd psi given as callables."""
    w = np.arange(n_freq + 1) * (omega_max / n_freq)
    return spectrum_from_samples(omega_max, amplitude(w), phase(w), **kwargs)


def spectrum_from_samples(
    omega_max: float,
    amplitude: np.ndarray,
    phase: np.ndarray,
    **kwargs,
) -> SampledSpectrum:
    """
    H = A exp(-j psi) from amplitude and phase samples at p = 0..N.

    Raises:
        SpectrumInputError: length mismatch, fewer than 3 samples or negative amplitude
    """
    a = np.asarray(amplitude, dtype=float)
    psi = np.asarray(phase, dtype=float)
    if a.ndim != 1 or a.shape != psi.shape or a.size < 3:
        raise SpectrumInputError(
            "amplitude and phase need the same N+1 >= 3 samples",
            {"amplitude": int(a.size), "phase": int(psi.size)},
        )
    if np.any(a < 0):
        raise SpectrumInputError("amplitude samples must be non-negative")
    return spectrum_from_halves(omega_max, a.size - 1, a * np.cos(psi), a * np.sin(psi), **kwargs)


def compute_spectrum(
    signal: RealSignal,
    omega_max: float,
    n_freq: int,
    floor_ratio: Optional[float] = None,
    boundary_ratio: Optional[float] = None,
) -> SampledSpectrum:
    """
    Cosine/sine transforms of the signal by composite trapezoid over its support.

    H_e(w) = (1/2pi) integral cos(wt) f(t) dt only sees the even part of f and
    H_o(w) = (1/2pi) integral sin(wt) f(t) dt only the odd part.

    Raises:
        SpectrumDomainError: omega_max <= 0
        SpectrumInputError: n_freq < 2 or fewer than 3 samples
        DegenerateSpectrumError: zero amplitude
    """
    if not omega_max > 0:
        raise SpectrumDomainError("omega_max must be positive", {"omega_max": omega_max})
    if n_freq < 2:
        raise SpectrumInputError("n_freq must be at least 2", {"n_freq": n_freq})
    if signal.size < 3:
        raise SpectrumInputError("signal too short for quadrature", {"samples": signal.size})

    t = signal.times
    fw = signal.samples * trapezoid_weights(signal.size, signal.dt)
    w = np.arange(n_freq + 1) * (omega_max / n_freq)

    he_half = np.empty(w.size)
    ho_half = np.empty(w.size)
    for start in range(0, w.size, _CHUNK):
        arg = np.outer(w[start:start + _CHUNK], t)
        he_half[start:start + _CHUNK] = np.cos(arg) @ fw
        ho_half[start:start + _CHUNK] = np.sin(arg) @ fw
    he_half /= 2 * np.pi
    ho_half /= 2 * np.pi

    return spectrum_from_halves(omega_max, n_freq, he_half, ho_half, floor_ratio, boundary_ratio)


def unwrap_phase(
    h_even: np.ndarray,
    h_odd: np.ndarray,
    amplitude: np.ndarray,
    floor: float,
) -> np.ndarray:
    """
    Continuous phase psi with cos(psi) A = H_e and sin(psi) A = H_o where A > floor.

    Unwrapping runs on the half-line w >= 0, segment by segment over valid samples;
    a segment after an invalid gap is shifted by the multiple of 2pi closest to the
    linear continuation of the previous one. psi(0) is 0 (pi when H_e(0) < 0) and the
    negative half is rebuilt by psi(-w) = 2 psi(0) - psi(w). Invalid samples are NaN.

    Raises:
        SpectrumInputError: length mismatch or non-positive floor
        DegenerateSpectrumError: no sample above the floor
    """
    h_even = np.asarray(h_even, dtype=float)
    h_odd = np.asarray(h_odd, dtype=float)
    amplitude = np.asarray(amplitude, dtype=float)
    if not (h_even.shape == h_odd.shape == amplitude.shape) or h_even.ndim != 1:
        raise SpectrumInputError("h_even, h_odd and amplitude must share one grid")
    if h_even.size % 2 != 1:
        raise SpectrumInputError("phase grid must be symmetric (odd sample count)")
    if not floor > 0:
        raise SpectrumInputError("phase floor must be positive", {"floor": floor})

    valid = amplitude > floor
    if not np.any(valid):
        raise DegenerateSpectrumError("amplitude below the phase floor everywhere", {"floor": floor})

    n = h_even.size // 2
    raw = np.arctan2(h_odd[n:], h_even[n:])
    ok = valid[n:]
    psi0 = np.pi if (ok[0] and h_even[n] < 0) else 0.0

    half = np.full(raw.size, np.nan)
    prev_end: Optional[Tuple[int, float, float]] = None  # (index, value, slope)
    i = 0
    while i < raw.size:
        if not ok[i]:
            i += 1
            continue
        j = i
        while j + 1 < raw.size and ok[j + 1]:
            j += 1
        seg = np.unwrap(raw[i:j + 1])
        if i == 0:
            target = psi0
        elif prev_end is not None:
            idx, value, slope = prev_end
            target = value + slope * (i - idx)
        else:
            target = seg[0]
        seg = seg + 2 * np.pi * np.round((target - seg[0]) / (2 * np.pi))
        half[i:j + 1] = seg
        slope = float(seg[-1] - seg[-2]) if seg.size > 1 else 0.0
        prev_end = (j, float(seg[-1]), slope)
        i = j + 1

    if ok[0]:
        half[0] = psi0
    return np.concatenate([2 * psi0 - half[:0:-1], half])


def synthesize_standard(spec: SampledSpectrum, times: np.ndarray) -> RealSignal:
    """
    Trapezoidal synthesis f_N(t) = (W/N) sum_k w_k e^{j k W t / N} H(kW/N), w_{+-N} = 1/2.

    f_N is periodic with period 2 N pi / W; the imaginary residue is checked, not returned.
    """
    times = np.asarray(times, dtype=float)
    try:
        uniform_step(times)
    except GridError as e:
        raise SpectrumInputError(f"time grid: {e}") from e

    omega = spec.omega
    weights = trapezoid_weights(omega.size, spec.omega_max / spec.n_freq)
    he = spec.h_even * weights
    ho = spec.h_odd * weights

    real = np.empty(times.size)
    imag = np.empty(times.size)
    for start in range(0, times.size, _CHUNK):
        arg = np.outer(times[start:start + _CHUNK], omega)
        c, s = np.cos(arg), np.sin(arg)
        real[start:start + _CHUNK] = c @ he + s @ ho
        imag[start:start + _CHUNK] = s @ he - c @ ho

    scale = max(float(np.max(np.abs(real))), 1e-300)
    residue = float(np.max(np.abs(imag))) / scale
    if residue > 1e-10 and np.max(np.abs(real)) > 0:
        log_event("synthesis_imaginary_residue", level="warning", relative_residue=residue)
    return RealSignal.from_grid(times, real)


def lattice_times(omega_max: float, n_freq: int) -> np.ndarray:
    """t_n = n pi / W for n = -N..N-1."""
    return np.arange(-n_freq, n_freq) * (np.pi / omega_max)


def _lattice_samples(samples_at_lattice: np.ndarray) -> Tuple[np.ndarray, int]:
    samples = np.asarray(samples_at_lattice, dtype=float)
    if samples.ndim != 1 or samples.size < 4 or samples.size % 2 != 0:
        raise SpectrumInputError(
            "lattice inversion needs exactly 2N samples (N >= 2)", {"samples": int(samples.size)}
        )
    return samples, samples.size // 2


def lattice_coefficients(samples_at_lattice: np.ndarray, omega_max: float) -> np.ndarray:
    """
    H(pW/N) = (1/2W) sum_{n=-N}^{N-1} e^{-j p n pi / N} f_N(n pi / W), p = -N..N.

    At p = +-N the two half-weight endpoints alias onto one value, H_e(W).
    """
    if not omega_max > 0:
        raise SpectrumDomainError("omega_max must be positive", {"omega_max": omega_max})
    samples, n_freq = _lattice_samples(samples_at_lattice)
    n = np.arange(-n_freq, n_freq)
    p = np.arange(-n_freq, n_freq + 1)
    kernel = np.exp(-1j * np.pi * np.outer(p, n) / n_freq)
    return kernel @ samples / (2 * omega_max)


def boundary_sums(samples_at_lattice: np.ndarray) -> Tuple[complex, complex]:
    """The alternating sums sum e^{-j n pi} f_n and sum e^{j n pi} f_n; zero for band-limited f_N."""
    samples, n_freq = _lattice_samples(samples_at_lattice)
    n = np.arange(-n_freq, n_freq)
    return complex(np.exp(-1j * np.pi * n) @ samples), complex(np.exp(1j * np.pi * n) @ samples)


def lattice_even_odd(samples_at_lattice: np.ndarray, omega_max: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    (H_e, H_o) at p = 0..N from the cosine / sine lattice sums over the even and odd
    parts of the samples.
    """
    if not omega_max > 0:
        raise SpectrumDomainError("omega_max must be positive", {"omega_max": omega_max})
    samples, n_freq = _lattice_samples(samples_at_lattice)
    f0 = samples[n_freq]
    f_minus_n = samples[0]
    pos = samples[n_freq + 1:]                 # n = 1..N-1
    neg = samples[n_freq - 1:0:-1]             # n = -1..-(N-1)
    f_e = 0.5 * (pos + neg)
    f_o = 0.5 * (pos - neg)

    p = np.arange(n_freq + 1)
    n = np.arange(1, n_freq)
    arg = np.pi * np.outer(p, n) / n_freq
    he = f0 + 2 * np.cos(arg) @ f_e + np.cos(np.pi * p) * f_minus_n
    ho = 2 * np.sin(arg) @ f_o
    return he / (2 * omega_max), ho / (2 * omega_max)


def roundtrip_error(spec: SampledSpectrum, model_spectrum: np.ndarray) -> float:
    """Relative L2 distance ||H - H_model|| / ||H|| over the spectrum grid (trapezoid)."""
    model = np.asarray(model_spectrum, dtype=complex)
    original = spec.complex_values
    if model.shape != original.shape:
        raise GridMismatchError(
            "model spectrum must share the spectrum grid",
            {"expected": int(original.size), "got": int(model.size)},
        )
    w = trapezoid_weights(original.size, spec.step)
    norm = float(np.sqrt(np.sum(w * np.abs(original) ** 2)))
    if norm == 0.0:
        raise DegenerateSpectrumError("reference spectrum has zero norm")
    return float(np.sqrt(np.sum(w * np.abs(original - model) ** 2)) / norm)
