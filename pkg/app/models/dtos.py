from pydantic import BaseModel, Field, model_validator
from typing import Any, Dict, List, Optional, Literal


StepName = Literal[
    "LOAD", "DETREND", "SPECTRUM", "EXTREMA", "FIT", "CHIRPLET", "SYNTHESIZE", "ROUNDTRIP", "STORE"
]


class StepInfo(BaseModel):
    """One timed processing step."""
    name: StepName
    ms: int
    count: Optional[int] = Field(None, description="items the step produced: samples, atoms or models")


class TimingInfo(BaseModel):
    totalMs: int = Field(..., description="total wall time (ms)")
    steps: List[StepInfo] = Field(default_factory=list)


class SignalPayload(BaseModel):
    """Uniformly sampled real signal as it travels over HTTP."""
    samples: List[float] = Field(..., min_length=1)
    tStart: float = 0.0
    dt: float = Field(..., gt=0)


class SpectrumPayload(BaseModel):
    """Sampled amplitude and unwrapped phase at omega_p = p * omegaMax / N, p = 0..N."""
    omegaMax: float = Field(..., gt=0)
    amplitude: List[float] = Field(..., min_length=3)
    phase: List[float] = Field(..., min_length=3)

    @model_validator(mode="after")
    def check_lengths(self):
        if len(self.amplitude) != len(self.phase):
            raise ValueError("amplitude and phase must have the same length")
        return self


class GridOptions(BaseModel):
    omegaMax: Optional[float] = Field(None, gt=0, description="band limit; defaults to settings.OMEGA_MAX")
    nFreq: Optional[int] = Field(None, ge=2, description="half-grid count; defaults to settings.N_FREQ")


class AnalyzeRequest(BaseModel):
    signal: SignalPayload
    grid: GridOptions = Field(default_factory=GridOptions)
    prominenceRatio: Optional[float] = Field(None, ge=0)


class AnalyzeResponse(BaseModel):
    ok: Literal[True] = True
    omega: List[float]
    amplitude: List[float]
    phase: List[Optional[float]]
    boundaryOk: bool
    origin: str
    extrema: List[Dict[str, Any]] = Field(default_factory=list)
    timing: TimingInfo


class DecomposeOptions(BaseModel):
    method: Literal["pointwise", "l2"] = "l2"
    epsStop: Optional[float] = Field(None, gt=0)
    maxLevels: Optional[int] = Field(None, ge=1, le=64)
    detrendDegree: Optional[int] = Field(None, ge=1, le=10)
    noiseFloorRatio: Optional[float] = Field(None, ge=0, lt=1, description="skip extrema below this fraction of the level peak")


class DecomposeRequest(BaseModel):
    """Either a time signal or sampled spectrum data; `grid` only applies to a signal."""
    requestId: Optional[str] = None
    signal: Optional[SignalPayload] = None
    spectrum: Optional[SpectrumPayload] = None
    grid: GridOptions = Field(default_factory=GridOptions)
    options: DecomposeOptions = Field(default_factory=DecomposeOptions)

    @model_validator(mode="after")
    def check_source(self):
        if (self.signal is None) == (self.spectrum is None):
            raise ValueError("give exactly one of signal or spectrum")
        if self.spectrum is not None and self.options.detrendDegree is not None:
            raise ValueError("detrending needs a time signal")
        return self


class DecomposeReport(BaseModel):
    """Numbers that summarize a decomposition run."""
    method: Literal["pointwise", "l2"]
    levels: int
    atoms: int
    qFirstLevel: Optional[float] = None
    originalSqNorm: float
    finalResidualSqNorm: float
    roundtripSpectrumError: float
    roundtripSignalError: float
    converged: bool


class DecomposeResponseOk(BaseModel):
    ok: Literal[True] = True
    requestId: Optional[str] = None
    model: Dict[str, Any]
    ledger: Dict[str, Any]
    report: DecomposeReport
    warnings: List[str] = Field(default_factory=list)
    timing: TimingInfo


class SynthesizeRequest(BaseModel):
    model: Dict[str, Any] = Field(..., description="chirplet model JSON")
    tStart: float
    dt: float = Field(..., gt=0)
    nSamples: int = Field(..., ge=2, le=1_000_000)


class SynthesizeResponse(BaseModel):
    ok: Literal[True] = True
    signal: SignalPayload
    timing: TimingInfo


class ErrorResponse(BaseModel):
    """
    Failure envelope shared by every endpoint.

    {"ok": false, "requestId": "...", "error": {"code": "DEGENERATE_SPECTRUM", "message": "...", "detail": {...}}}
    """
    ok: Literal[False] = False
    requestId: Optional[str] = None
    error: Dict[str, Any]
    timing: Optional[TimingInfo] = None

    @model_validator(mode="after")
    def check_error(self):
        if "code" not in self.error:
            raise ValueError("error must carry a code")
        return self
