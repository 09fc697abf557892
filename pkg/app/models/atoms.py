"""
Gaussian and chirp atom types.

GaussianAtom / SignedMixture describe the even amplitude model
    A_p(w) = a0 exp(-w^2 / 2 s0) + sum alpha_k g(w; w_k, s_k) - sum beta_k g(w; w_k, s_k)
with g the even Gaussian pair. ChirpAtom / ChirpletModel add the local phase data
(gamma, t, kappa) that turn each pair into a real Gaussian chirp.
"""

from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class GaussianAtom(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    alpha: float
    omega_c: float = Field(default=0.0, ge=0, alias="omega")
    sigma: float = Field(gt=0)
    kind: Literal["center", "pair"] = "pair"

    @model_validator(mode="after")
    def check_center(self):
        if self.kind == "center" and self.omega_c != 0.0:
            raise ValueError("center atoms sit at omega = 0")
        return self

    def with_params(self, **changes) -> "GaussianAtom":
        return self.model_copy(update=changes)


def _check_increasing(atoms: List[GaussianAtom], label: str) -> None:
    for prev, nxt in zip(atoms, atoms[1:]):
        if not nxt.omega_c > prev.omega_c:
            raise ValueError(f"{label} centers must be strictly increasing")


class SignedMixture(BaseModel):
    model_config = ConfigDict(frozen=True)

    center: Optional[GaussianAtom] = None
    positive: List[GaussianAtom] = Field(default_factory=list)
    negative: List[GaussianAtom] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_atoms(self):
        if self.center is not None and self.center.kind != "center":
            raise ValueError("center slot requires a center-kind atom")
        for label, atoms in (("positive", self.positive), ("negative", self.negative)):
            for atom in atoms:
                if atom.kind != "pair":
                    raise ValueError(f"{label} list holds pair atoms only")
                if not atom.alpha > 0:
                    raise ValueError(f"{label} atoms store positive weights")
            _check_increasing(atoms, label)
        return self

    @property
    def atom_count(self) -> int:
        return len(self.positive) + len(self.negative) + (1 if self.center is not None else 0)

    @property
    def is_empty(self) -> bool:
        return self.atom_count == 0

    def signed_atoms(self) -> List[Tuple[GaussianAtom, float]]:
        """(atom, sign) pairs; the center carries its own signed alpha."""
        out: List[Tuple[GaussianAtom, float]] = []
        if self.center is not None:
            out.append((self.center, 1.0))
        out.extend((a, 1.0) for a in self.positive)
        out.extend((a, -1.0) for a in self.negative)
        return out

    @classmethod
    def from_signed(
        cls,
        center: Optional[GaussianAtom],
        pairs: List[Tuple[float, float, float]],
    ) -> "SignedMixture":
        """Build from signed (weight, omega, sigma) pair triples; zero weights are dropped."""
        positive, negative = [], []
        for weight, omega, sigma in pairs:
            if weight > 0:
                positive.append(GaussianAtom(alpha=weight, omega_c=omega, sigma=sigma))
            elif weight < 0:
                negative.append(GaussianAtom(alpha=-weight, omega_c=omega, sigma=sigma))
        positive.sort(key=lambda a: a.omega_c)
        negative.sort(key=lambda a: a.omega_c)
        if center is not None and center.alpha == 0:
            center = None
        return cls(center=center, positive=positive, negative=negative)

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "center": None if self.center is None else {"alpha": self.center.alpha, "sigma": self.center.sigma},
            "positive": [{"alpha": a.alpha, "omega": a.omega_c, "sigma": a.sigma} for a in self.positive],
            "negative": [{"alpha": a.alpha, "omega": a.omega_c, "sigma": a.sigma} for a in self.negative],
        }

    @classmethod
    def from_json_dict(cls, data: Dict[str, Any]) -> "SignedMixture":
        center = data.get("center")
        return cls(
            center=None if center is None else GaussianAtom(
                alpha=center["alpha"], sigma=center["sigma"], kind="center"
            ),
            positive=[GaussianAtom(**a) for a in data.get("positive", [])],
            negative=[GaussianAtom(**a) for a in data.get("negative", [])],
        )


class ExtremumPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    location: float = Field(ge=0)
    value: float
    second_deriv: float
    kind: Literal["max", "min"]

    @model_validator(mode="after")
    def check_curvature(self):
        if self.kind == "max" and not self.second_deriv < 0:
            raise ValueError("a non-degenerate maximum needs a negative second derivative")
        if self.kind == "min" and not self.second_deriv > 0:
            raise ValueError("a non-degenerate minimum needs a positive second derivative")
        return self

    def negated(self) -> "ExtremumPoint":
        """The same point seen on -A: a minimum becomes a maximum."""
        return ExtremumPoint(
            location=self.location,
            value=-self.value,
            second_deriv=-self.second_deriv,
            kind="max" if self.kind == "min" else "min",
        )


class ExtremaReport(BaseModel):
    """Interior extrema of an even sampled function plus the classification of w = 0."""

    model_config = ConfigDict(frozen=True)

    extrema: List[ExtremumPoint] = Field(default_factory=list)
    origin: Literal["max", "min", "degenerate"]
    origin_point: Optional[ExtremumPoint] = None
    rejected: int = 0

    def maxima(self, positive_only: bool = True) -> List[ExtremumPoint]:
        return [e for e in self.extrema if e.kind == "max" and (e.value > 0 or not positive_only)]

    def minima(self, negative_only: bool = True) -> List[ExtremumPoint]:
        return [e for e in self.extrema if e.kind == "min" and (e.value < 0 or not negative_only)]


class ChirpAtom(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    alpha: float = Field(gt=0)
    omega_c: float = Field(ge=0, alias="omega")
    sigma: float = Field(gt=0)
    gamma: float = 0.0
    t_c: float = Field(default=0.0, alias="t")
    kappa: float = 0.0


class ChirpCenter(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha0: float
    sigma0: float = Field(gt=0)
    t0: float = 0.0


class ChirpletModel(BaseModel):
    """
    Sum of p+1 real Gaussian chirps: an optional center chirp (alpha0, sigma0, t0)
    plus p atoms ordered by center frequency.
    """

    model_config = ConfigDict(frozen=True)

    center: Optional[ChirpCenter] = None
    atoms: List[ChirpAtom] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_order(self):
        # signed levels may place a beta atom on the same center as an alpha atom
        for prev, nxt in zip(self.atoms, self.atoms[1:]):
            if nxt.omega_c < prev.omega_c:
                raise ValueError("atoms must be ordered by omega_c")
        return self

    @property
    def parameter_count(self) -> int:
        return 6 * len(self.atoms) + (3 if self.center is not None else 0)

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "center": None if self.center is None else self.center.model_dump(),
            "atoms": [a.model_dump(by_alias=True) for a in self.atoms],
        }

    @classmethod
    def from_json_dict(cls, data: Dict[str, Any]) -> "ChirpletModel":
        center = data.get("center")
        return cls(
            center=None if center is None else ChirpCenter(**center),
            atoms=[ChirpAtom(**a) for a in data.get("atoms", [])],
        )
