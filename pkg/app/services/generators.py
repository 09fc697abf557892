"""
Experiment signal generators.

Every generator is a band-limited amplitude/phase pair synthesized by
f(t) = 2 integral_0^W A(w) cos(w t - psi(w)) dw (psi odd), evaluated with
Gauss-Legendre quadrature, optionally corrupted by white Gaussian noise.

- academic:  A = (4 - w^2)^2 (1/2 + w^2) on |w| <= 2, zero phase
- lolo-cubic: A = (exp(-0.8|w|^3) - exp(-1.3|w|^3)) / 0.5, psi = w^3 / 50
- lolo-sin:  same amplitude, psi = pi (1 - exp(-w^2)) sin(2w)

The lolo signals use 512 samples t_n = -5.12 + 0.02 n (a uniform 0.02 grid).
That window cuts the lolo signals off at |t| = 5.12, so their spectrum taken
from the samples leaks; generate_spectrum gives the exact sampled spectrum.
"""

from typing import Callable, Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.models.errors import ChirpletError, ErrorCode
from app.config import settings
from app.models.signals import RealSignal, SampledSpectrum
from app.services.spectrum import spectrum_from_polar
from app.utils.logging import log_event

_QUAD_NODES = 512


class GeneratorError(ChirpletError):
    code = ErrorCode.INVALID_INPUT


def academic_amplitude(omega):
    w = np.abs(np.asarray(omega, dtype=float))
    return np.where(w <= 2.0, (4 - w ** 2) ** 2 * (0.5 + w ** 2), 0.0)


def lolo_amplitude(omega, a: float = 0.8, b: float = 1.3):
    x = np.abs(np.asarray(omega, dtype=float)) ** 3
    return (np.exp(-a * x) - np.exp(-b * x)) / (b - a)


def cubic_phase(omega):
    return np.asarray(omega, dtype=float) ** 3 / 50


def sinusoidal_phase(omega):
    w = np.asarray(omega, dtype=float)
    return np.pi * (1 - np.exp(-w ** 2)) * np.sin(2 * w)


def zero_phase(omega):
    return np.zeros(np.shape(omega))


class GeneratorSpec(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str
    amplitude: Callable
    phase: Callable
    omega_max: float = Field(gt=0)
    t_start: float
    dt: float = Field(gt=0)
    n_samples: int = Field(ge=2)

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_samples)


GENERATORS: Dict[str, GeneratorSpec] = {
    "academic": GeneratorSpec(
        name="academic", amplitude=academic_amplitude, phase=zero_phase,
        omega_max=2.0, t_start=-102.4, dt=0.05, n_samples=4096,
    ),
    "lolo-cubic": GeneratorSpec(
        name="lolo-cubic", amplitude=lolo_amplitude, phase=cubic_phase,
        omega_max=4.0, t_start=-5.12, dt=0.02, n_samples=512,
    ),
    "lolo-sin": GeneratorSpec(
        name="lolo-sin", amplitude=lolo_amplitude, phase=sinusoidal_phase,
        omega_max=4.0, t_start=-5.12, dt=0.02, n_samples=512,
    ),
}


def get_generator(name: str) -> GeneratorSpec:
    try:
        return GENERATORS[name]
    except KeyError:
        raise GeneratorError(f"unknown generator {name!r}", detail={"known": sorted(GENERATORS)}) from None


def synthesize_polar(
    amplitude: Callable,
    phase: Callable,
    omega_max: float,
    times: np.ndarray,
    nodes: int = _QUAD_NODES,
) -> np.ndarray:
    """f(t) = 2 integral_0^W A(w) cos(w t - psi(w)) dw by Gauss-Legendre quadrature."""
    x, weights = np.polynomial.legendre.leggauss(nodes)
    w = 0.5 * omega_max * (x + 1)
    weights = 0.5 * omega_max * weights * amplitude(w)
    t = np.asarray(times, dtype=float)
    return 2 * np.cos(np.outer(t, w) - phase(w)[None, :]) @ weights


def add_white_noise(samples: np.ndarray, noise_sigma: float, seed: int) -> np.ndarray:
    """Additive i.i.d. Gaussian noise with standard deviation noise_sigma * RMS(samples)."""
    rms = float(np.sqrt(np.mean(np.square(samples))))
    rng = np.random.default_rng(seed)
    return samples + rng.normal(0.0, noise_sigma * rms, size=samples.shape)


def generate(name: str, noise_sigma: float = 0.0, seed: Optional[int] = None) -> RealSignal:
    """
    Build a named experiment signal.

    Raises:
        GeneratorError: unknown name, negative noise level, or noise without a seed
    """
    spec = get_generator(name)
    if noise_sigma < 0:
        raise GeneratorError("noise_sigma must be >= 0")
    if noise_sigma > 0 and seed is None:
        raise GeneratorError("a seed is required for noisy generators")
    samples = synthesize_polar(spec.amplitude, spec.phase, spec.omega_max, spec.times)
    if noise_sigma > 0:
        samples = add_white_noise(samples, noise_sigma, seed)
    log_event("signal_generated", generator=name, samples=spec.n_samples, noise_sigma=noise_sigma, seed=seed)
    return RealSignal(samples=samples, t_start=spec.t_start, dt=spec.dt)


def generate_spectrum(name: str, n_freq: Optional[int] = None) -> SampledSpectrum:
    """Amplitude and phase of a named generator sampled on p * W / N, p = 0..N."""
    spec = get_generator(name)
    n_freq = settings.N_FREQ if n_freq is None else n_freq
    if n_freq < 2:
        raise GeneratorError("n_freq must be at least 2", detail={"n_freq": n_freq})
    spectrum = spectrum_from_polar(spec.omega_max, n_freq, spec.amplitude, spec.phase)
    log_event("spectrum_generated", generator=name, omega_max=spec.omega_max, n_freq=n_freq)
    return spectrum
