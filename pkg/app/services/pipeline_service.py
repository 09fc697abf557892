"""
Pipeline Service Module

This module is responsible for:
- analyze: signal -> spectrum -> amplitude extrema
- decompose: (optional detrend) -> spectrum -> hierarchical Gaussian fit ->
  per-level chirplet models -> roundtrip report
- decompose_spectrum: the same fit from sampled spectrum data, checked against
  the standard synthesis of that data
- synthesize / roundtrip: chirplet models back to the time domain and
  comparison against a reference signal

Every run records StepInfo timings and logs one summary event.
"""

from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from app.config import settings
from app.models.atoms import ChirpletModel, ExtremaReport
from app.models.dtos import StepInfo
from app.models.ledger import Method, RefinementLedger
from app.models.signals import RealSignal, SampledSpectrum
from app.services.chirplet import PhaseInvalidError, build_model, model_spectrum, synthesize_levels
from app.services.detrend import TrendFit, polynomial_detrend
from app.services.extrema import find_extrema
from app.services.hierarchy import HierarchyConfig, refine_until
from app.services.spectrum import (
    GridMismatchError,
    compute_spectrum,
    lattice_times,
    roundtrip_error,
    synthesize_standard,
)
from app.utils.grids import half_grid
from app.utils.logging import log_event
from app.utils.timing import step_timer


class AnalysisResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    spectrum: SampledSpectrum
    extrema: ExtremaReport
    steps: List[StepInfo] = Field(default_factory=list)


class RoundtripResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    spectrum_error: float
    signal_error: float
    series: pd.DataFrame
    steps: List[StepInfo] = Field(default_factory=list)


class DecompositionResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    signal: RealSignal
    spectrum: SampledSpectrum
    ledger: RefinementLedger
    models: List[ChirpletModel]
    trend: Optional[TrendFit] = None
    roundtrip: RoundtripResult
    warnings: List[str] = Field(default_factory=list)
    steps: List[StepInfo] = Field(default_factory=list)

    @property
    def model(self) -> ChirpletModel:
        """The level-0 model, the canonical single-level artifact."""
        return self.models[0] if self.models else ChirpletModel()

    def report(self) -> dict:
        first = self.ledger.levels[0].q_max if self.ledger.levels else None
        return {
            "method": self.ledger.method,
            "levels": len(self.ledger.levels),
            "atoms": sum(lv.atom_count for lv in self.ledger.levels),
            "qFirstLevel": first,
            "originalSqNorm": self.ledger.original_sq_norm,
            "finalResidualSqNorm": self.ledger.residual_sq_norms[-1],
            "roundtripSpectrumError": self.roundtrip.spectrum_error,
            "roundtripSignalError": self.roundtrip.signal_error,
            "converged": self.ledger.converged,
        }


def _check_band(signal: RealSignal, omega_max: float) -> None:
    nyquist = np.pi / signal.dt
    if omega_max > nyquist:
        raise GridMismatchError(
            "time step too coarse for the requested band",
            detail={"omega_max": omega_max, "nyquist": nyquist, "dt": signal.dt},
        )


def error_series(reference: RealSignal, model: RealSignal) -> pd.DataFrame:
    """t, signal, model, abs_error, log10_abs_error for error plots."""
    abs_error = np.abs(reference.samples - model.samples)
    with np.errstate(divide="ignore"):
        log_error = np.log10(abs_error)
    return pd.DataFrame({
        "t": reference.times,
        "signal": reference.samples,
        "model": model.samples,
        "abs_error": abs_error,
        "log10_abs_error": log_error,
    })


def relative_l2(reference: np.ndarray, approx: np.ndarray) -> float:
    norm = float(np.linalg.norm(reference))
    if norm == 0.0:
        return float(np.linalg.norm(approx))
    return float(np.linalg.norm(np.asarray(reference) - np.asarray(approx)) / norm)


class DecompositionService:
    """Stateless orchestration over the numeric services; one instance is shared by CLI and HTTP."""

    def __init__(self, omega_max: Optional[float] = None, n_freq: Optional[int] = None):
        self.omega_max = omega_max or settings.OMEGA_MAX
        self.n_freq = n_freq or settings.N_FREQ

    def analyze(
        self,
        signal: RealSignal,
        omega_max: Optional[float] = None,
        n_freq: Optional[int] = None,
        prominence_ratio: Optional[float] = None,
    ) -> AnalysisResult:
        omega_max = omega_max or self.omega_max
        n_freq = n_freq or self.n_freq
        steps: List[StepInfo] = []
        _check_band(signal, omega_max)

        with step_timer("SPECTRUM", steps) as info:
            spectrum = compute_spectrum(signal, omega_max, n_freq)
            info.count = spectrum.h_even.size
        with step_timer("EXTREMA", steps) as info:
            amplitude = half_grid(spectrum.amplitude)
            prominence = None
            if prominence_ratio is not None:
                prominence = prominence_ratio * float(np.max(amplitude))
            report = find_extrema(amplitude, half_grid(spectrum.omega), min_prominence=prominence)
            info.count = len(report.extrema)

        log_event(
            "signal_analyzed",
            samples=signal.size,
            omega_max=omega_max,
            n_freq=n_freq,
            extrema=len(report.extrema),
            origin=report.origin,
            steps=[s.model_dump() for s in steps],
        )
        return AnalysisResult(spectrum=spectrum, extrema=report, steps=steps)

    def decompose(
        self,
        signal: RealSignal,
        method: Method = "l2",
        eps_stop: Optional[float] = None,
        max_levels: Optional[int] = None,
        omega_max: Optional[float] = None,
        n_freq: Optional[int] = None,
        detrend_degree: Optional[int] = None,
        config: Optional[HierarchyConfig] = None,
        noise_floor_ratio: Optional[float] = None,
    ) -> DecompositionResult:
        """
        End-to-end decomposition of one signal.

        Non-converged levels and levels whose phase data is unusable add warnings;
        only input, degenerate-spectrum and conditioning failures raise.
        """
        omega_max = omega_max or self.omega_max
        n_freq = n_freq or self.n_freq
        steps: List[StepInfo] = []
        _check_band(signal, omega_max)

        trend = None
        if detrend_degree is not None:
            with step_timer("DETREND", steps) as info:
                _, detrended, trend = polynomial_detrend(signal.times, signal.samples, detrend_degree)
                signal = RealSignal(samples=detrended, t_start=signal.t_start, dt=signal.dt)
                info.count = trend.degree + 1

        with step_timer("SPECTRUM", steps) as info:
            spectrum = compute_spectrum(signal, omega_max, n_freq)
            info.count = spectrum.h_even.size
        return self._fit(spectrum, signal, method, eps_stop, max_levels, noise_floor_ratio, config, steps, trend)

    def decompose_spectrum(
        self,
        spectrum: SampledSpectrum,
        times: Optional[np.ndarray] = None,
        method: Method = "l2",
        eps_stop: Optional[float] = None,
        max_levels: Optional[int] = None,
        config: Optional[HierarchyConfig] = None,
        noise_floor_ratio: Optional[float] = None,
    ) -> DecompositionResult:
        """
        Decompose sampled spectrum data directly, with no time-domain window.

        The reference signal for the roundtrip is the standard synthesis f_N on
        `times`, by default the lattice t_n = n pi / W.
        """
        steps: List[StepInfo] = []
        if times is None:
            times = lattice_times(spectrum.omega_max, spectrum.n_freq)
        with step_timer("SYNTHESIZE", steps) as info:
            reference = synthesize_standard(spectrum, times)
            info.count = reference.size
        return self._fit(spectrum, reference, method, eps_stop, max_levels, noise_floor_ratio, config, steps, None)

    def _fit(
        self,
        spectrum: SampledSpectrum,
        signal: RealSignal,
        method: Method,
        eps_stop: Optional[float],
        max_levels: Optional[int],
        noise_floor_ratio: Optional[float],
        config: Optional[HierarchyConfig],
        steps: List[StepInfo],
        trend: Optional[TrendFit],
    ) -> DecompositionResult:
        warnings: List[str] = []
        if not spectrum.boundary_ok:
            warnings.append("amplitude at the band edge exceeds the boundary tolerance")

        overrides = {"method": method}
        if eps_stop is not None:
            overrides["eps_stop"] = eps_stop
        if max_levels is not None:
            overrides["max_levels"] = max_levels
        if noise_floor_ratio is not None:
            overrides["noise_floor_ratio"] = noise_floor_ratio
        config = (config or HierarchyConfig()).model_copy(update=overrides)

        with step_timer("FIT", steps) as info:
            ledger, _, _ = refine_until(spectrum.amplitude, spectrum.omega, config, omega_max=spectrum.omega_max)
            info.count = sum(lv.atom_count for lv in ledger.levels)
        for lv in ledger.levels:
            if not lv.converged:
                warnings.append(f"level {lv.level} fit did not converge")
            if lv.below_floor:
                warnings.append(f"level {lv.level} left {lv.below_floor} extrema under the noise floor")

        models: List[ChirpletModel] = []
        with step_timer("CHIRPLET", steps) as info:
            for lv in ledger.levels:
                try:
                    models.append(build_model(lv.mixture, spectrum.phase, spectrum.omega))
                except PhaseInvalidError as e:
                    if lv.level == 0:
                        raise
                    warnings.append(f"level {lv.level} left out of the chirp model: {e}")
                    log_event("level_phase_invalid", level="warning", level_index=lv.level, reason=str(e))
            info.count = len(models)

        roundtrip = self.roundtrip(models, signal, spectrum=spectrum)
        steps.extend(roundtrip.steps)

        result = DecompositionResult(
            signal=signal,
            spectrum=spectrum,
            ledger=ledger,
            models=models,
            trend=trend,
            roundtrip=roundtrip,
            warnings=warnings,
            steps=steps,
        )
        log_event(
            "signal_decomposed",
            **result.report(),
            stop_reason=ledger.stop_reason,
            warnings=warnings,
            steps=[s.model_dump() for s in steps],
        )
        return result

    def synthesize(self, models: List[ChirpletModel], times: np.ndarray) -> RealSignal:
        return synthesize_levels(models, times)

    def roundtrip(
        self,
        models: List[ChirpletModel],
        signal: RealSignal,
        omega_max: Optional[float] = None,
        n_freq: Optional[int] = None,
        spectrum: Optional[SampledSpectrum] = None,
    ) -> RoundtripResult:
        """
        Compare chirp syntheses against a reference signal in both domains.

        Raises:
            GridMismatchError: the band exceeds the signal's Nyquist frequency
        """
        steps: List[StepInfo] = []
        if spectrum is None:
            omega_max = omega_max or self.omega_max
            n_freq = n_freq or self.n_freq
            _check_band(signal, omega_max)
            with step_timer("SPECTRUM", steps):
                spectrum = compute_spectrum(signal, omega_max, n_freq)
        with step_timer("ROUNDTRIP", steps) as info:
            h_model = np.zeros(spectrum.omega.size, dtype=complex)
            for model in models:
                h_model += model_spectrum(model, spectrum.omega)
            spectrum_error = roundtrip_error(spectrum, h_model)
            approx = synthesize_levels(models, signal.times)
            signal_error = relative_l2(signal.samples, approx.samples)
            series = error_series(signal, approx)
            info.count = approx.size
        log_event("roundtrip_checked", spectrum_error=spectrum_error, signal_error=signal_error, models=len(models))
        return RoundtripResult(spectrum_error=spectrum_error, signal_error=signal_error, series=series, steps=steps)
