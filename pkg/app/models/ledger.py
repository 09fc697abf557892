"""
Fit diagnostics and the hierarchical refinement ledger.
"""

from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from app.models.atoms import SignedMixture

Method = Literal["pointwise", "l2"]


class PointwiseRow(BaseModel):
    """One row of the convergence table; index 0 is the center atom."""
    iter: int
    index: int
    alpha: float
    omega: float
    sigma: float
    skipped: bool


class PointwiseDiagnostics(BaseModel):
    converged: bool
    iterations: int
    last_change: float
    guard_failures: Dict[int, int] = Field(default_factory=dict)
    dropped: List[int] = Field(default_factory=list)
    clamped: List[int] = Field(default_factory=list)
    table: List[PointwiseRow] = Field(default_factory=list)


class AscentRecord(BaseModel):
    iter: int
    q: float
    step: float
    grad_norm: float


class L2Diagnostics(BaseModel):
    converged: bool
    iterations: int
    q_value: float
    rejections: int = 0
    clamped: bool = False
    history: List[AscentRecord] = Field(default_factory=list)


class LevelRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    level: int
    mixture: SignedMixture
    q_max: float
    residual_sq_norm_before: float
    residual_sq_norm: float
    p_n: int
    q_n: int
    center: bool
    converged: bool
    # extrema left unfitted under the noise floor
    below_floor: int = 0
    # per-level fit trace; kept in memory only, not part of the ledger JSON
    diagnostics: Optional[Union[PointwiseDiagnostics, L2Diagnostics]] = None

    @property
    def atom_count(self) -> int:
        return self.mixture.atom_count


class RefinementLedger(BaseModel):
    method: Method
    eps_stop: float
    original_sq_norm: float
    levels: List[LevelRecord] = Field(default_factory=list)
    stop_reason: Optional[str] = None

    @property
    def residual_sq_norms(self) -> List[float]:
        return [self.original_sq_norm] + [lv.residual_sq_norm for lv in self.levels]

    @property
    def mixtures(self) -> List[SignedMixture]:
        return [lv.mixture for lv in self.levels]

    @property
    def converged(self) -> bool:
        return all(lv.converged for lv in self.levels)

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "eps_stop": self.eps_stop,
            "original_sq_norm": self.original_sq_norm,
            "stop_reason": self.stop_reason,
            "levels": [
                {
                    "level": lv.level,
                    "mixture": lv.mixture.to_json_dict(),
                    "q_max": lv.q_max,
                    "residual_sq_norm_before": lv.residual_sq_norm_before,
                    "residual_sq_norm": lv.residual_sq_norm,
                    "p_n": lv.p_n,
                    "q_n": lv.q_n,
                    "center": lv.center,
                    "converged": lv.converged,
                    "below_floor": lv.below_floor,
                }
                for lv in self.levels
            ],
        }

    @classmethod
    def from_json_dict(cls, data: Dict[str, Any]) -> "RefinementLedger":
        levels = [
            LevelRecord(**{**lv, "mixture": SignedMixture.from_json_dict(lv["mixture"])})
            for lv in data.get("levels", [])
        ]
        return cls(
            method=data["method"],
            eps_stop=data["eps_stop"],
            original_sq_norm=data["original_sq_norm"],
            stop_reason=data.get("stop_reason"),
            levels=levels,
        )
