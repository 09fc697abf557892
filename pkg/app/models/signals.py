"""
Signal and spectrum value types.

RealSignal is a uniformly sampled real signal; SampledSpectrum holds the even and
odd spectral parts on the lattice omega_p = p * omega_max / n_freq, p = -N..N,
with the convention H = H_e - j H_o = A exp(-j psi).
"""

from typing import Annotated, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, BeforeValidator, PlainSerializer, Field, model_validator

from app.utils.grids import frequency_grid


def _as_float_array(value) -> np.ndarray:
    arr = np.array(value, dtype=float, copy=True)
    if arr.ndim != 1:
        raise ValueError("expected a one-dimensional array")
    arr.setflags(write=False)
    return arr


FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_as_float_array),
    PlainSerializer(lambda a: a.tolist(), return_type=list),
]


class RealSignal(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    samples: FloatArray
    t_start: float
    dt: float = Field(gt=0)

    @model_validator(mode="after")
    def check_samples(self):
        if self.samples.size == 0:
            raise ValueError("samples must be non-empty")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")
        if not np.isfinite(self.t_start):
            raise ValueError("t_start must be finite")
        return self

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.samples.size)

    @property
    def size(self) -> int:
        return int(self.samples.size)

    @classmethod
    def from_grid(cls, times: np.ndarray, samples: np.ndarray) -> "RealSignal":
        times = np.asarray(times, dtype=float)
        if times.size < 2:
            raise ValueError("a time grid needs at least 2 points")
        return cls(samples=samples, t_start=float(times[0]), dt=float(times[1] - times[0]))


class SampledSpectrum(BaseModel):
    """
    Even/odd spectrum parts on the symmetric lattice.

    `phase` holds the unwrapped psi; NaN marks samples below the phase-validity floor.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    omega_max: float = Field(gt=0)
    n_freq: int = Field(ge=2)
    h_even: FloatArray
    h_odd: FloatArray
    phase: Optional[FloatArray] = None
    phase_floor: float = 0.0
    boundary_ok: bool = True

    @model_validator(mode="after")
    def check_symmetry(self):
        size = 2 * self.n_freq + 1
        if self.h_even.size != size or self.h_odd.size != size:
            raise ValueError(f"h_even/h_odd must have 2N+1 = {size} samples")
        if self.phase is not None and self.phase.size != size:
            raise ValueError("phase must share the spectrum grid")
        scale = max(float(np.max(np.abs(self.h_even))), float(np.max(np.abs(self.h_odd))), 1e-300)
        if np.max(np.abs(self.h_even - self.h_even[::-1])) > 1e-12 * scale:
            raise ValueError("h_even must be even across p <-> -p")
        if np.max(np.abs(self.h_odd + self.h_odd[::-1])) > 1e-12 * scale:
            raise ValueError("h_odd must be odd across p <-> -p")
        return self

    @property
    def omega(self) -> np.ndarray:
        return frequency_grid(self.omega_max, self.n_freq)

    @property
    def step(self) -> float:
        return self.omega_max / self.n_freq

    @property
    def amplitude(self) -> np.ndarray:
        return np.hypot(self.h_even, self.h_odd)

    @property
    def complex_values(self) -> np.ndarray:
        return self.h_even - 1j * self.h_odd

    @property
    def phase_valid(self) -> np.ndarray:
        if self.phase is None:
            return np.zeros(self.h_even.size, dtype=bool)
        return np.isfinite(self.phase)
