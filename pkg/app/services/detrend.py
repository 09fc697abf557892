"""
Global least-squares polynomial detrending of price-like series.
"""

from typing import Any, Dict, Tuple, Union

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial
from pydantic import BaseModel

from app.models.errors import ChirpletError, ErrorCode
from app.utils.logging import log_event

MIN_DEGREE, MAX_DEGREE = 1, 10


class DetrendError(ChirpletError):
    code = ErrorCode.INVALID_INPUT


class TrendFit(BaseModel):
    """Fitted trend; `coefficients` are in the power basis of t, lowest order first."""
    degree: int
    coefficients: list
    domain: Tuple[float, float]
    window_coefficients: list

    def to_json_dict(self) -> Dict[str, Any]:
        return self.model_dump()

    def evaluate(self, t) -> np.ndarray:
        poly = Polynomial(self.window_coefficients, domain=list(self.domain), window=[-1, 1])
        return poly(np.asarray(t, dtype=float))


def polynomial_detrend(
    t: Union[np.ndarray, pd.Series],
    x: Union[np.ndarray, pd.Series],
    degree: int,
) -> Tuple[Union[np.ndarray, pd.Series], Union[np.ndarray, pd.Series], TrendFit]:
    """
    Subtract the least-squares polynomial of `degree` in t.

    The fit runs on t mapped to [-1, 1], which keeps degree 10 well conditioned.

    Returns:
        (trend, detrended, fit); pandas input gives pandas output with the same index

    Raises:
        DetrendError: degree outside [1, 10], mismatched inputs, or fewer than degree + 1 samples
    """
    if not MIN_DEGREE <= degree <= MAX_DEGREE:
        raise DetrendError(f"degree must lie in [{MIN_DEGREE}, {MAX_DEGREE}]", detail={"degree": degree})
    t_arr = np.asarray(t, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    if t_arr.shape != x_arr.shape or t_arr.ndim != 1:
        raise DetrendError("t and x must be one-dimensional and of equal length")
    if x_arr.size < degree + 1:
        raise DetrendError(
            "not enough samples for the requested degree",
            detail={"samples": int(x_arr.size), "degree": degree},
        )
    if not (np.all(np.isfinite(t_arr)) and np.all(np.isfinite(x_arr))):
        raise DetrendError("t and x must be finite")

    poly = Polynomial.fit(t_arr, x_arr, degree)
    trend = poly(t_arr)
    detrended = x_arr - trend
    fit = TrendFit(
        degree=degree,
        coefficients=poly.convert().coef.tolist(),
        domain=(float(poly.domain[0]), float(poly.domain[1])),
        window_coefficients=poly.coef.tolist(),
    )
    log_event(
        "series_detrended",
        degree=degree,
        samples=int(x_arr.size),
        residual_mean=float(detrended.mean()),
        residual_rms=float(np.sqrt(np.mean(detrended ** 2))),
    )
    if isinstance(x, pd.Series):
        name = x.name or "value"
        return (
            pd.Series(trend, index=x.index, name=f"trend_of_{name}"),
            pd.Series(detrended, index=x.index, name=f"detrended_{name}"),
            fit,
        )
    return trend, detrended, fit
