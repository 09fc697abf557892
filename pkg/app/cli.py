"""
Command-line front end.

    python -m app.cli generate   --generator academic --output out/academic.csv
    python -m app.cli analyze    --input out/academic.csv --omega-max 2 --output-dir out/analysis
    python -m app.cli extrema    --input out/analysis/spectrum.csv --output out/extrema.csv
    python -m app.cli decompose  --input out/academic.csv --method l2 --max-levels 1 --omega-max 2
    python -m app.cli decompose  --spectrum out/lolo-cubic.spectrum.csv --max-levels 1
    python -m app.cli synthesize --model out/model.json --t-start -5.12 --dt 0.02 --n-samples 512
    python -m app.cli roundtrip  --model out/model.json --input out/academic.csv --omega-max 2
    python -m app.cli detrend    --input prices.csv --detrend-degree 5 --output out/detrended.csv

Logs go to stderr as JSON lines; stdout carries one JSON summary per run.
Exit codes: 0 ok (partial convergence included), 2 input / degenerate / grid,
3 ill-conditioned, 4 store failure, 1 internal error.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator

from app.config import settings
from app.models.errors import ChirpletError, ErrorCode, exit_code_for
from app.models.ledger import L2Diagnostics, PointwiseDiagnostics
from app.services.detrend import polynomial_detrend
from app.services.extrema import find_extrema
from app.services.generators import GENERATORS, generate, generate_spectrum
from app.services.pipeline_service import DecompositionService
from app.services.storage_manager import (
    StorageManager,
    load_amplitude,
    load_models,
    load_series,
    load_signal,
    load_spectrum,
)
from app.utils.logging import log_event, route_logs_to

Command = Literal["generate", "analyze", "decompose", "synthesize", "roundtrip", "detrend", "extrema"]


class UsageError(ChirpletError):
    code = ErrorCode.INVALID_INPUT


class RunConfig(BaseModel):
    command: Command
    input: Optional[Path] = None
    spectrum: Optional[Path] = None
    model: Optional[Path] = None
    output: Optional[Path] = None
    output_dir: Path = Field(default_factory=lambda: Path(settings.OUTPUT_DIR))
    method: Literal["pointwise", "l2"] = "l2"
    eps_stop: Optional[float] = Field(default=None, gt=0)
    max_levels: Optional[int] = Field(default=None, ge=1, le=64)
    omega_max: float = Field(default_factory=lambda: settings.OMEGA_MAX, gt=0)
    n_freq: int = Field(default_factory=lambda: settings.N_FREQ, ge=2)
    prominence_ratio: Optional[float] = Field(default=None, ge=0)
    noise_floor_ratio: Optional[float] = Field(default=None, ge=0, lt=1)
    generator: Optional[str] = None
    noise_sigma: float = Field(default=0.0, ge=0)
    seed: Optional[int] = None
    detrend_degree: Optional[int] = Field(default=None, ge=1, le=10)
    value_column: str = "f"
    levels_into_model: bool = False
    t_start: Optional[float] = None
    dt: Optional[float] = Field(default=None, gt=0)
    n_samples: Optional[int] = Field(default=None, ge=2)

    @field_validator("input", "spectrum", "model")
    @classmethod
    def must_exist(cls, value: Optional[Path]) -> Optional[Path]:
        if value is not None and not value.is_file():
            raise ValueError(f"no such file: {value}")
        return value


def _require(config: RunConfig, *names: str) -> None:
    missing = [n for n in names if getattr(config, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"{config.command} needs {flags}", detail={"missing": missing})


def _emit(summary: dict) -> None:
    print(json.dumps(summary, ensure_ascii=False, default=str), file=sys.stdout)


def _target(config: RunConfig, default_name: str) -> tuple:
    """(StorageManager, file name) for single-file outputs."""
    if config.output is not None:
        return StorageManager(config.output.parent), config.output.name
    return StorageManager(config.output_dir), default_name


# ----------------------------
# commands
# ----------------------------
def cmd_generate(config: RunConfig) -> dict:
    _require(config, "generator")
    signal = generate(config.generator, noise_sigma=config.noise_sigma, seed=config.seed)
    store, name = _target(config, f"{config.generator}.csv")
    path = store.store_signal(name, signal)
    summary = {"signal": str(path), "samples": signal.size, "dt": signal.dt}
    if config.noise_sigma == 0:
        spectrum = generate_spectrum(config.generator, config.n_freq)
        spectrum_name = str(Path(name).with_suffix(".spectrum.csv"))
        summary["spectrum"] = str(store.store_spectrum(spectrum_name, spectrum))
    return summary


def cmd_analyze(config: RunConfig, service: DecompositionService) -> dict:
    _require(config, "input")
    signal = load_signal(config.input, config.value_column)
    result = service.analyze(signal, config.omega_max, config.n_freq, config.prominence_ratio)
    store = StorageManager(config.output_dir)
    return {
        "spectrum": str(store.store_spectrum("spectrum.csv", result.spectrum)),
        "extrema": str(store.store_extrema("extrema.csv", result.extrema)),
        "origin": result.extrema.origin,
        "boundary_ok": result.spectrum.boundary_ok,
    }


def cmd_extrema(config: RunConfig) -> dict:
    _require(config, "input")
    frame = load_amplitude(config.input)
    amplitude = frame["amplitude"].to_numpy()
    ratio = config.prominence_ratio if config.prominence_ratio is not None else settings.PROMINENCE_RATIO
    report = find_extrema(amplitude, frame["omega"].to_numpy(), min_prominence=ratio * float(np.max(np.abs(amplitude))))
    store, name = _target(config, "extrema.csv")
    path = store.store_extrema(name, report)
    return {"extrema": str(path), "count": len(report.extrema), "origin": report.origin, "rejected": report.rejected}


def _store_traces(store: StorageManager, ledger) -> List[str]:
    paths = []
    for lv in ledger.levels:
        diag = lv.diagnostics
        if isinstance(diag, L2Diagnostics):
            paths.append(store.store_history(f"history_level{lv.level}.csv", diag.history))
        elif isinstance(diag, PointwiseDiagnostics):
            paths.append(store.store_pointwise_table(f"pointwise_level{lv.level}.csv", diag.table))
    return [str(p) for p in paths]


def cmd_decompose(config: RunConfig, service: DecompositionService) -> dict:
    if (config.input is None) == (config.spectrum is None):
        raise UsageError("decompose needs exactly one of --input or --spectrum")
    fit_options = dict(
        method=config.method,
        eps_stop=config.eps_stop,
        max_levels=config.max_levels,
        noise_floor_ratio=config.noise_floor_ratio,
    )
    if config.spectrum is not None:
        if config.detrend_degree is not None:
            raise UsageError("--detrend-degree needs a time signal (--input)")
        result = service.decompose_spectrum(load_spectrum(config.spectrum), **fit_options)
    else:
        result = service.decompose(
            load_signal(config.input, config.value_column),
            omega_max=config.omega_max,
            n_freq=config.n_freq,
            detrend_degree=config.detrend_degree,
            **fit_options,
        )
    store = StorageManager(config.output_dir)
    report = result.report()
    report["stopReason"] = result.ledger.stop_reason
    report["warnings"] = "; ".join(result.warnings)

    outputs = {
        "model": str(store.store_model("model.json", result.model)),
        "ledger": {k: str(v) for k, v in store.store_ledger("ledger.json", result.ledger).items()},
        "report": str(store.store_report("report.csv", report)),
        "spectrum": str(store.store_spectrum("spectrum.csv", result.spectrum)),
        "error_series": str(store.write_csv("roundtrip_error.csv", result.roundtrip.series)),
        "traces": _store_traces(store, result.ledger),
    }
    if config.levels_into_model:
        outputs["models"] = str(store.store_models("models.json", result.models))
    if result.trend is not None:
        outputs["trend"] = str(store.write_json("trend.json", result.trend.to_json_dict()))
    return {**outputs, "warnings": result.warnings, "converged": result.ledger.converged}


def cmd_synthesize(config: RunConfig, service: DecompositionService) -> dict:
    _require(config, "model", "t_start", "dt", "n_samples")
    models = load_models(config.model)
    times = config.t_start + config.dt * np.arange(config.n_samples)
    signal = service.synthesize(models, times)
    store, name = _target(config, "synthesized.csv")
    path = store.store_signal(name, signal)
    return {"signal": str(path), "samples": signal.size, "models": len(models)}


def cmd_roundtrip(config: RunConfig, service: DecompositionService) -> dict:
    _require(config, "model", "input")
    models = load_models(config.model)
    signal = load_signal(config.input, config.value_column)
    result = service.roundtrip(models, signal, config.omega_max, config.n_freq)
    store = StorageManager(config.output_dir)
    report = {"spectrum_error": result.spectrum_error, "signal_error": result.signal_error, "models": len(models)}
    return {
        **report,
        "report": str(store.store_report("roundtrip.csv", report)),
        "error_series": str(store.write_csv("roundtrip_error.csv", result.series)),
    }


def cmd_detrend(config: RunConfig) -> dict:
    _require(config, "input", "detrend_degree")
    column = config.value_column
    frame = load_series(config.input, column)
    trend, detrended, fit = polynomial_detrend(frame["t"], frame[column], config.detrend_degree)
    out = pd.DataFrame({"t": frame["t"], column: frame[column], "trend": trend, "detrended": detrended})
    store, name = _target(config, "detrended.csv")
    path = store.write_csv(name, out)
    sidecar = store.write_json(str(Path(name).with_suffix(".trend.json")), fit.to_json_dict())
    return {"detrended": str(path), "trend": str(sidecar), "residual_mean": float(np.mean(detrended))}


# ----------------------------
# argument parsing
# ----------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chirplet", description="Gaussian chirplet decomposition of band-limited signals")
    sub = parser.add_subparsers(dest="command", required=True)

    def grid(p):
        p.add_argument("--omega-max", type=float, default=None, help="band limit W (rad per unit time)")
        p.add_argument("--n-freq", type=int, default=None, help="half-grid count N")

    def signal_input(p):
        p.add_argument("--input", type=Path, required=True)
        p.add_argument("--value-column", default="f", help="signal column of the input CSV")

    p = sub.add_parser("generate", help="synthesize an experiment signal")
    p.add_argument("--generator", required=True, choices=sorted(GENERATORS),
                   help="lolo-* use 512 samples t_n = -5.12 + 0.02 n")
    p.add_argument("--n-freq", type=int, default=None, help="half-grid count N of the exact spectrum CSV")
    p.add_argument("--noise-sigma", type=float, default=0.0, help="white noise std relative to signal RMS")
    p.add_argument("--seed", type=int, default=None, help="required when --noise-sigma > 0")
    p.add_argument("--output", type=Path)
    p.add_argument("--output-dir", type=Path)

    p = sub.add_parser("analyze", help="spectrum, unwrapped phase and amplitude extrema")
    signal_input(p)
    grid(p)
    p.add_argument("--prominence-ratio", type=float)
    p.add_argument("--output-dir", type=Path)

    p = sub.add_parser("extrema", help="extrema report from a spectrum CSV")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--prominence-ratio", type=float)
    p.add_argument("--output", type=Path)
    p.add_argument("--output-dir", type=Path)

    p = sub.add_parser("decompose", help="hierarchical Gaussian fit and chirplet model")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--input", type=Path, help="time signal CSV (t,f)")
    source.add_argument("--spectrum", type=Path, help="sampled spectrum CSV (omega,h_even,h_odd,...); grid flags are ignored")
    p.add_argument("--value-column", default="f", help="signal column of the input CSV")
    grid(p)
    p.add_argument("--method", choices=["pointwise", "l2"], default="l2")
    p.add_argument("--eps-stop", type=float)
    p.add_argument("--max-levels", type=int)
    p.add_argument("--noise-floor-ratio", type=float, help="skip extrema below this fraction of the level peak")
    p.add_argument("--detrend-degree", type=int, help="subtract a global polynomial first (1..10)")
    p.add_argument("--levels-into-model", action="store_true", help="also write one model per level")
    p.add_argument("--output-dir", type=Path)

    p = sub.add_parser("synthesize", help="chirplet model(s) to time samples")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--t-start", type=float, required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--output", type=Path)
    p.add_argument("--output-dir", type=Path)

    p = sub.add_parser("roundtrip", help="compare a model against a signal in time and frequency")
    p.add_argument("--model", type=Path, required=True)
    signal_input(p)
    grid(p)
    p.add_argument("--output-dir", type=Path)

    p = sub.add_parser("detrend", help="subtract a global least-squares polynomial")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--value-column", default="price")
    p.add_argument("--detrend-degree", type=int, required=True)
    p.add_argument("--output", type=Path)
    p.add_argument("--output-dir", type=Path)
    return parser


def run(config: RunConfig) -> dict:
    service = DecompositionService(omega_max=config.omega_max, n_freq=config.n_freq)
    if config.command == "generate":
        return cmd_generate(config)
    if config.command == "analyze":
        return cmd_analyze(config, service)
    if config.command == "extrema":
        return cmd_extrema(config)
    if config.command == "decompose":
        return cmd_decompose(config, service)
    if config.command == "synthesize":
        return cmd_synthesize(config, service)
    if config.command == "roundtrip":
        return cmd_roundtrip(config, service)
    return cmd_detrend(config)


def main(argv: Optional[List[str]] = None) -> int:
    previous = route_logs_to(sys.stderr)
    try:
        return _main(argv)
    finally:
        route_logs_to(previous)


def _main(argv: Optional[List[str]]) -> int:
    args = build_parser().parse_args(argv)
    fields = {k: v for k, v in vars(args).items() if v is not None}
    try:
        config = RunConfig(**fields)
        summary = run(config)
    except ValidationError as e:
        log_event("cli_failed", level="error", code=ErrorCode.INVALID_INPUT.value,
                  errors=e.errors(include_url=False, include_context=False))
        _emit({"ok": False, "error": {"code": ErrorCode.INVALID_INPUT.value, "message": "invalid arguments"}})
        return exit_code_for(ErrorCode.INVALID_INPUT)
    except ChirpletError as e:
        log_event("cli_failed", level="error", code=e.code.value, message=str(e), detail=e.detail)
        _emit({"ok": False, "error": e.to_body().model_dump(mode="json")})
        return exit_code_for(e.code)
    except Exception as e:
        log_event("cli_failed", level="error", code=ErrorCode.INTERNAL_ERROR.value, message=str(e))
        _emit({"ok": False, "error": {"code": ErrorCode.INTERNAL_ERROR.value, "message": str(e)}})
        return exit_code_for(ErrorCode.INTERNAL_ERROR)
    _emit({"ok": True, "command": config.command, **summary})
    return 0


if __name__ == "__main__":
    sys.exit(main())
