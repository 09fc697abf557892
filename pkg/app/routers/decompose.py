import time
import uuid

import numpy as np
from fastapi import APIRouter, Request
from pydantic import ValidationError

from app.models.dtos import (
    AnalyzeRequest,
    AnalyzeResponse,
    DecomposeReport,
    DecomposeRequest,
    DecomposeResponseOk,
    ErrorResponse,
    SignalPayload,
    SpectrumPayload,
    SynthesizeRequest,
    SynthesizeResponse,
    TimingInfo,
)
from app.models.errors import ChirpletError, ErrorCode
from app.models.atoms import ChirpletModel
from app.models.signals import RealSignal, SampledSpectrum
from app.services.spectrum import spectrum_from_samples
from app.utils.grids import half_grid
from app.utils.logging import log_event
from app.utils.timing import elapsed_ms, step_timer

router = APIRouter(prefix="/chirplet/v1", tags=["decompose"])


def _signal(payload: SignalPayload) -> RealSignal:
    return RealSignal(samples=payload.samples, t_start=payload.tStart, dt=payload.dt)


def _spectrum(payload: SpectrumPayload) -> SampledSpectrum:
    return spectrum_from_samples(payload.omegaMax, np.asarray(payload.amplitude), np.asarray(payload.phase))


def _error(request_id, code: ErrorCode, message: str, detail=None, started=None) -> dict:
    timing = None
    if started is not None:
        timing = TimingInfo(totalMs=elapsed_ms(started), steps=[])
    return ErrorResponse(
        requestId=request_id,
        error={"code": code.value, "message": message, "detail": detail or {}},
        timing=timing,
    ).model_dump()


def _guarded(request_id, started, run):
    """Map domain, validation and unexpected failures onto the error envelope."""
    try:
        return run()
    except ChirpletError as e:
        log_event("request_failed", level="warning", requestId=request_id, code=e.code.value, message=str(e))
        return _error(request_id, e.code, str(e), e.detail, started)
    except ValidationError as e:
        return _error(request_id, ErrorCode.INVALID_INPUT, "invalid input", {"errors": e.errors(include_url=False, include_context=False)}, started)
    except Exception as e:
        log_event("request_failed", level="error", requestId=request_id, code="INTERNAL_ERROR", message=str(e))
        return _error(request_id, ErrorCode.INTERNAL_ERROR, "internal error", {"reason": str(e)}, started)


@router.post("/analyze")
def analyze(req: AnalyzeRequest, request: Request):
    """Signal -> amplitude / unwrapped phase on [0, W] and the amplitude extrema."""
    service = request.app.state.decomposition_service
    started = time.perf_counter()

    def run():
        result = service.analyze(
            _signal(req.signal),
            omega_max=req.grid.omegaMax,
            n_freq=req.grid.nFreq,
            prominence_ratio=req.prominenceRatio,
        )
        spec = result.spectrum
        phase = half_grid(spec.phase)
        extrema = [e.model_dump() for e in result.extrema.extrema]
        return AnalyzeResponse(
            omega=half_grid(spec.omega).tolist(),
            amplitude=half_grid(spec.amplitude).tolist(),
            phase=[float(v) if np.isfinite(v) else None for v in phase],
            boundaryOk=spec.boundary_ok,
            origin=result.extrema.origin,
            extrema=extrema,
            timing=TimingInfo(totalMs=elapsed_ms(started), steps=result.steps),
        ).model_dump()

    return _guarded(None, started, run)


@router.post("/decompose")
def decompose(req: DecomposeRequest, request: Request):
    """
    Full decomposition: spectrum, hierarchical fit, chirplet model, roundtrip report.

    A `spectrum` body skips the Fourier step and is checked against its own
    standard synthesis.

    The response carries the level-0 model under `model` and every level under
    `ledger.levels`; non-converged levels surface in `warnings` with ok=true.
    """
    service = request.app.state.decomposition_service
    request_id = req.requestId or f"req_{int(time.time())}_{uuid.uuid4().hex[:8]}"
    started = time.perf_counter()

    def run():
        opts = req.options
        fit_options = dict(
            method=opts.method,
            eps_stop=opts.epsStop,
            max_levels=opts.maxLevels,
            noise_floor_ratio=opts.noiseFloorRatio,
        )
        if req.spectrum is not None:
            result = service.decompose_spectrum(_spectrum(req.spectrum), **fit_options)
        else:
            result = service.decompose(
                _signal(req.signal),
                omega_max=req.grid.omegaMax,
                n_freq=req.grid.nFreq,
                detrend_degree=opts.detrendDegree,
                **fit_options,
            )
        return DecomposeResponseOk(
            requestId=request_id,
            model=result.model.to_json_dict(),
            ledger=result.ledger.to_json_dict(),
            report=DecomposeReport(**result.report()),
            warnings=result.warnings,
            timing=TimingInfo(totalMs=elapsed_ms(started), steps=result.steps),
        ).model_dump()

    return _guarded(request_id, started, run)


@router.post("/synthesize")
def synthesize(req: SynthesizeRequest, request: Request):
    """Chirplet model JSON + time grid -> real samples."""
    service = request.app.state.decomposition_service
    started = time.perf_counter()

    def run():
        steps = []
        with step_timer("SYNTHESIZE", steps) as info:
            model = ChirpletModel.from_json_dict(req.model)
            times = req.tStart + req.dt * np.arange(req.nSamples)
            signal = service.synthesize([model], times)
            info.count = signal.size
        samples = signal.samples.tolist()
        return SynthesizeResponse(
            signal=SignalPayload(samples=samples, tStart=req.tStart, dt=req.dt),
            timing=TimingInfo(totalMs=elapsed_ms(started), steps=steps),
        ).model_dump()

    return _guarded(None, started, run)
