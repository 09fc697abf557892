"""
Storage Manager Module

This module is responsible for:
- Reading signal / price / model inputs from CSV and JSON
- Writing every pipeline artifact (signals, spectra, extrema, models, ledgers,
  convergence tables, reports) under one output directory
- Atomic writes: each file is written to a temporary sibling and moved into place

Single Responsibility: artifact persistence.
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from app.config import settings
from app.models.atoms import ChirpletModel, ExtremaReport, SignedMixture
from app.models.errors import ChirpletError, ErrorCode
from app.models.ledger import AscentRecord, PointwiseRow, RefinementLedger
from app.models.signals import RealSignal, SampledSpectrum
from app.services.spectrum import spectrum_from_halves
from app.utils.grids import GridError, uniform_step
from app.utils.logging import log_event

PathLike = Union[str, Path]


class StorageError(ChirpletError):
    """Store failure; the message carries the target path."""

    code = ErrorCode.STORE_FAILED

    def __init__(self, message: str, target_path: Optional[Path] = None):
        if target_path is not None:
            message = f"{message} (target: {target_path})"
        super().__init__(message, detail={"target": str(target_path)} if target_path else None)
        self.target_path = target_path


class InputFileError(ChirpletError):
    """Unreadable or malformed input file."""

    code = ErrorCode.INVALID_INPUT


def _read_csv(path: PathLike, columns: List[str]) -> pd.DataFrame:
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputFileError(f"cannot read {path}: {e}", detail={"path": str(path)}) from e
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise InputFileError(
            f"{path} lacks columns {missing}",
            detail={"path": str(path), "columns": list(frame.columns)},
        )
    frame = frame[columns]
    try:
        frame = frame.astype(float)
    except ValueError as e:
        raise InputFileError(f"{path} holds non-numeric values", detail={"path": str(path)}) from e
    if frame.empty or not np.all(np.isfinite(frame.to_numpy())):
        raise InputFileError(f"{path} must hold finite numeric rows", detail={"path": str(path)})
    return frame


def load_signal(path: PathLike, value_column: str = "f") -> RealSignal:
    """Read a `t,<value_column>` CSV (default `t,f`) with strictly increasing uniform t."""
    frame = _read_csv(path, ["t", value_column])
    t = frame["t"].to_numpy()
    if t.size < 2:
        raise InputFileError("a signal needs at least 2 samples", detail={"path": str(path)})
    try:
        dt = uniform_step(t)
    except GridError as e:
        raise InputFileError(f"time column: {e}", detail={"path": str(path)}) from e
    return RealSignal(samples=frame[value_column].to_numpy(), t_start=float(t[0]), dt=dt)


def load_series(path: PathLike, value_column: str = "price") -> pd.DataFrame:
    """Read a `t,<value_column>` CSV; t need not be uniform."""
    return _read_csv(path, ["t", value_column])


def load_amplitude(path: PathLike) -> pd.DataFrame:
    """Read the `omega,amplitude` columns of a spectrum CSV, keeping omega >= 0 on a uniform grid."""
    frame = _read_csv(path, ["omega", "amplitude"])
    frame = frame[frame["omega"] >= 0].reset_index(drop=True)
    if len(frame) < 3:
        raise InputFileError("a spectrum needs at least 3 samples at omega >= 0", detail={"path": str(path)})
    try:
        uniform_step(frame["omega"].to_numpy())
    except GridError as e:
        raise InputFileError(f"omega column: {e}", detail={"path": str(path)}) from e
    if frame["omega"].iloc[0] != 0.0:
        raise InputFileError("the omega grid must start at 0", detail={"path": str(path)})
    return frame


def load_spectrum(path: PathLike) -> SampledSpectrum:
    """
    Rebuild a SampledSpectrum from the `omega,h_even,h_odd` columns of a spectrum CSV.

    Rows at omega < 0 are ignored; the rest must form the grid p * W / N, p = 0..N.
    """
    frame = _read_csv(path, ["omega", "h_even", "h_odd"])
    frame = frame[frame["omega"] >= 0].reset_index(drop=True)
    if len(frame) < 3:
        raise InputFileError("a spectrum needs at least 3 samples at omega >= 0", detail={"path": str(path)})
    omega = frame["omega"].to_numpy()
    try:
        uniform_step(omega)
    except GridError as e:
        raise InputFileError(f"omega column: {e}", detail={"path": str(path)}) from e
    if omega[0] != 0.0:
        raise InputFileError("the omega grid must start at 0", detail={"path": str(path)})
    return spectrum_from_halves(
        float(omega[-1]), omega.size - 1, frame["h_even"].to_numpy(), frame["h_odd"].to_numpy()
    )


def load_json(path: PathLike) -> Dict[str, Any]:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise InputFileError(f"cannot read {path}: {e}", detail={"path": str(path)}) from e


def load_model(path: PathLike) -> ChirpletModel:
    data = load_json(path)
    try:
        return ChirpletModel.from_json_dict(data)
    except (ValueError, KeyError, TypeError) as e:
        raise InputFileError(f"invalid chirplet model in {path}: {e}", detail={"path": str(path)}) from e


def load_models(path: PathLike) -> List[ChirpletModel]:
    """A model file may hold one model or {"levels": [model, ...]}."""
    data = load_json(path)
    try:
        if "levels" in data:
            return [ChirpletModel.from_json_dict(m) for m in data["levels"]]
        return [ChirpletModel.from_json_dict(data)]
    except (ValueError, KeyError, TypeError) as e:
        raise InputFileError(f"invalid chirplet model in {path}: {e}", detail={"path": str(path)}) from e


class StorageManager:
    """
    Writes artifacts below one base directory.

    Responsibilities:
    - Create the output directory on demand
    - Serialize domain objects to their CSV / JSON interchange formats
    - Replace target files atomically
    """

    def __init__(self, output_dir: Optional[PathLike] = None):
        """
        Args:
            output_dir: base directory (default: settings.OUTPUT_DIR)
        """
        self.output_dir = Path(output_dir or settings.OUTPUT_DIR).resolve()

    def path_for(self, name: str) -> Path:
        return self.output_dir / name

    def _atomic_write(self, name: str, write) -> Path:
        final_path = self.path_for(name)
        tmp_path = final_path.with_suffix(final_path.suffix + ".tmp")
        try:
            final_path.parent.mkdir(parents=True, exist_ok=True)
            write(tmp_path)
            os.replace(tmp_path, final_path)
        except Exception as e:
            if tmp_path.exists():
                try:
                    tmp_path.unlink()
                except OSError:
                    pass
            raise StorageError(f"Failed to store {name}: {e}", target_path=final_path) from e
        log_event("artifact_stored", path=str(final_path))
        return final_path

    # ------------------------
    # generic writers
    # ------------------------
    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        return self._atomic_write(name, lambda p: frame.to_csv(p, index=False, float_format="%.17g"))

    def write_json(self, name: str, data: Dict[str, Any]) -> Path:
        def write(p: Path):
            with open(p, "w", encoding="utf-8") as fh:
                json.dump(data, fh, indent=2, ensure_ascii=False, default=lambda v: v.tolist())
                fh.write("\n")

        return self._atomic_write(name, write)

    # ------------------------
    # domain artifacts
    # ------------------------
    def store_signal(self, name: str, signal: RealSignal) -> Path:
        return self.write_csv(name, pd.DataFrame({"t": signal.times, "f": signal.samples}))

    def store_spectrum(self, name: str, spec: SampledSpectrum) -> Path:
        phase = spec.phase if spec.phase is not None else np.full(spec.h_even.size, np.nan)
        return self.write_csv(name, pd.DataFrame({
            "omega": spec.omega,
            "h_even": spec.h_even,
            "h_odd": spec.h_odd,
            "amplitude": spec.amplitude,
            "phase": phase,
        }))

    def store_extrema(self, name: str, report: ExtremaReport) -> Path:
        rows = [e.model_dump() for e in report.extrema]
        if report.origin_point is not None:
            rows.insert(0, report.origin_point.model_dump())
        frame = pd.DataFrame(rows, columns=["location", "value", "second_deriv", "kind"])
        return self.write_csv(name, frame)

    def store_mixture(self, name: str, mixture: SignedMixture) -> Path:
        return self.write_json(name, mixture.to_json_dict())

    def store_model(self, name: str, model: ChirpletModel) -> Path:
        return self.write_json(name, model.to_json_dict())

    def store_models(self, name: str, models: List[ChirpletModel]) -> Path:
        return self.write_json(name, {"levels": [m.to_json_dict() for m in models]})

    def store_ledger(self, name: str, ledger: RefinementLedger) -> Dict[str, Path]:
        """Ledger JSON plus a per-level CSV summary next to it (`<stem>.csv`)."""
        json_path = self.write_json(name, ledger.to_json_dict())
        summary = pd.DataFrame(
            [
                {
                    "level": lv.level,
                    "atoms": lv.atom_count,
                    "p_n": lv.p_n,
                    "q_n": lv.q_n,
                    "center": lv.center,
                    "below_floor": lv.below_floor,
                    "q_max": lv.q_max,
                    "residual_sq_norm": lv.residual_sq_norm,
                }
                for lv in ledger.levels
            ],
            columns=["level", "atoms", "p_n", "q_n", "center", "below_floor", "q_max", "residual_sq_norm"],
        )
        csv_path = self.write_csv(str(Path(name).with_suffix(".csv")), summary)
        return {"json": json_path, "csv": csv_path}

    def store_history(self, name: str, history: List[AscentRecord]) -> Path:
        return self.write_csv(
            name, pd.DataFrame([r.model_dump() for r in history], columns=["iter", "q", "step", "grad_norm"])
        )

    def store_pointwise_table(self, name: str, rows: List[PointwiseRow]) -> Path:
        return self.write_csv(
            name,
            pd.DataFrame(
                [r.model_dump() for r in rows], columns=["iter", "index", "alpha", "omega", "sigma", "skipped"]
            ),
        )

    def store_report(self, name: str, report: Dict[str, Any]) -> Path:
        """One-row CSV of scalar report fields."""
        return self.write_csv(name, pd.DataFrame([report]))
