"""
Gaussian Model Module

Even Gaussian pairs g(w; w_k, s_k) = exp(-(w-w_k)^2 / 2s_k) + exp(-(w+w_k)^2 / 2s_k),
the single center Gaussian exp(-w^2 / 2s_0), signed mixtures of both, and their
closed-form and discrete L2 inner products.

A center atom is handled as half of a pair at w_k = 0, so one set of array kernels
serves every atom kind:  scale = 0.5 for center atoms, 1.0 for pairs.
"""

from typing import Iterable, List, Literal, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from app.config import settings
from app.models.atoms import GaussianAtom, SignedMixture
from app.models.errors import ChirpletError, ErrorCode
from app.utils.grids import uniform_step, GridError

Order = Literal[0, 1, 2]
ParamName = Literal["omega", "sigma"]

_SQRT_2PI = np.sqrt(2 * np.pi)


class GaussianModelError(ChirpletError):
    code = ErrorCode.INVALID_INPUT


# ----------------------------
# array kernels
# ----------------------------
def atom_arrays(atoms: Sequence[GaussianAtom]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    omegas = np.array([a.omega_c for a in atoms], dtype=float)
    sigmas = np.array([a.sigma for a in atoms], dtype=float)
    scales = np.array([0.5 if a.kind == "center" else 1.0 for a in atoms], dtype=float)
    return omegas, sigmas, scales


def pair_values(
    grid: np.ndarray,
    omegas: np.ndarray,
    sigmas: np.ndarray,
    scales: np.ndarray,
    order: Order = 0,
) -> np.ndarray:
    """Matrix (atoms x grid) of scale * g^(order)(w; w_k, s_k)."""
    w = np.asarray(grid, dtype=float)[None, :]
    om = np.asarray(omegas, dtype=float)[:, None]
    sg = np.asarray(sigmas, dtype=float)[:, None]
    sc = np.asarray(scales, dtype=float)[:, None]
    dm, dp = w - om, w + om
    em, ep = np.exp(-dm ** 2 / (2 * sg)), np.exp(-dp ** 2 / (2 * sg))
    if order == 0:
        out = em + ep
    elif order == 1:
        out = -(dm / sg) * em - (dp / sg) * ep
    elif order == 2:
        out = (-1 / sg + dm ** 2 / sg ** 2) * em + (-1 / sg + dp ** 2 / sg ** 2) * ep
    else:
        raise GaussianModelError(f"unsupported derivative order {order}")
    return sc * out


def pair_param_derivs(
    grid: np.ndarray,
    omegas: np.ndarray,
    sigmas: np.ndarray,
    scales: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """(dG/dw_k, dG/ds_k) matrices, atoms x grid."""
    w = np.asarray(grid, dtype=float)[None, :]
    om = np.asarray(omegas, dtype=float)[:, None]
    sg = np.asarray(sigmas, dtype=float)[:, None]
    sc = np.asarray(scales, dtype=float)[:, None]
    dm, dp = w - om, w + om
    em, ep = np.exp(-dm ** 2 / (2 * sg)), np.exp(-dp ** 2 / (2 * sg))
    d_omega = sc * ((dm / sg) * em - (dp / sg) * ep)
    d_sigma = sc * ((dm ** 2 * em + dp ** 2 * ep) / (2 * sg ** 2))
    return d_omega, d_sigma


def _overlap_terms(omegas, sigmas, scales):
    om_a, om_b = omegas[:, None], omegas[None, :]
    sg_a, sg_b = sigmas[:, None], sigmas[None, :]
    total = sg_a + sg_b
    dm, dp = om_a - om_b, om_a + om_b
    em, ep = np.exp(-dm ** 2 / (2 * total)), np.exp(-dp ** 2 / (2 * total))
    prefactor = 2 * _SQRT_2PI * np.sqrt(sg_a * sg_b / total) * (scales[:, None] * scales[None, :])
    return prefactor, total, dm, dp, em, ep, sg_a, sg_b


def gram_matrix(omegas: np.ndarray, sigmas: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """<G_i, G_j> = 2 (2 pi s_i s_j / (s_i + s_j))^(1/2) (e^{-(w_i-w_j)^2/2S} + e^{-(w_i+w_j)^2/2S})."""
    prefactor, _, _, _, em, ep, _, _ = _overlap_terms(
        np.asarray(omegas, float), np.asarray(sigmas, float), np.asarray(scales, float)
    )
    gram = prefactor * (em + ep)
    return 0.5 * (gram + gram.T)


def gram_partials(
    omegas: np.ndarray, sigmas: np.ndarray, scales: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Partial derivatives of <G_i, G_j> with respect to the parameters of atom i (rows).

    The total derivative of the self term <G_i, G_i> is twice the diagonal entry.
    """
    prefactor, total, dm, dp, em, ep, sg_a, sg_b = _overlap_terms(
        np.asarray(omegas, float), np.asarray(sigmas, float), np.asarray(scales, float)
    )
    d_omega = prefactor * (-(dm / total) * em - (dp / total) * ep)
    d_sigma = prefactor * (
        (sg_b / (2 * sg_a * total)) * (em + ep) + (dm ** 2 * em + dp ** 2 * ep) / (2 * total ** 2)
    )
    return d_omega, d_sigma


# ----------------------------
# scalar operations
# ----------------------------
def eval_pair(omega, atom: GaussianAtom, order: Order = 0):
    """
    g(w; w_k, s_k) or its first / second derivative in w; a center atom evaluates
    the single Gaussian exp(-w^2 / 2s_0). The weight alpha is not applied.
    """
    om, sg, sc = atom_arrays([atom])
    scalar = np.ndim(omega) == 0
    values = pair_values(np.atleast_1d(omega), om, sg, sc * (2.0 if atom.kind == "center" else 1.0), order)[0]
    return float(values[0]) if scalar else values


def mixture_eval(mix: SignedMixture, grid: np.ndarray, order: Order = 0) -> np.ndarray:
    """Center + positive - negative atoms at the requested derivative order."""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    signed = mix.signed_atoms()
    if not signed:
        return np.zeros(grid.size)
    atoms = [a for a, _ in signed]
    weights = np.array([sign * a.alpha for a, sign in signed])
    om, sg, sc = atom_arrays(atoms)
    return weights @ pair_values(grid, om, sg, sc, order)


def inner_product(a: GaussianAtom, b: GaussianAtom) -> float:
    om, sg, sc = atom_arrays([a, b])
    return float(gram_matrix(om, sg, sc)[0, 1])


def inner_product_grad(
    a: GaussianAtom,
    b: GaussianAtom,
    wrt: ParamName,
    self_term: bool = False,
) -> float:
    """
    d<G_a, G_b>/d(beta_a) for beta in {omega, sigma} of atom a.

    With self_term=True, b is ignored and the total derivative of <G_a, G_a> is returned.
    """
    if wrt == "omega" and a.kind == "center":
        raise GaussianModelError("center atoms have no omega parameter")
    other = a if self_term else b
    om, sg, sc = atom_arrays([a, other])
    d_omega, d_sigma = gram_partials(om, sg, sc)
    partial = d_omega if wrt == "omega" else d_sigma
    if self_term:
        return float(2 * partial[0, 1])
    return float(partial[0, 1])


def _interior_step(amplitude: np.ndarray, omega: np.ndarray) -> float:
    if amplitude.shape != omega.shape or amplitude.ndim != 1:
        raise GaussianModelError("amplitude and frequency grid must match")
    try:
        h = uniform_step(omega)
    except GridError as e:
        raise GaussianModelError(f"frequency grid: {e}") from e
    if omega.size % 2 != 1 or abs(omega[0] + omega[-1]) > 1e-9 * h * omega.size:
        raise GaussianModelError("frequency grid must be symmetric about 0")
    return h


def discrete_inner_products(
    amplitude: np.ndarray,
    omega: np.ndarray,
    omegas: np.ndarray,
    sigmas: np.ndarray,
    scales: np.ndarray,
    with_grads: bool = True,
):
    """
    f_i = (W/N) sum_p G_i(w_p) A(w_p) over the interior points p = -N+1..N-1,
    and optionally df_i/dw_i, df_i/ds_i.
    """
    amplitude = np.asarray(amplitude, dtype=float)
    omega = np.asarray(omega, dtype=float)
    h = _interior_step(amplitude, omega)
    inner, a_in = omega[1:-1], amplitude[1:-1]
    f = h * (pair_values(inner, omegas, sigmas, scales) @ a_in)
    if not with_grads:
        return f
    d_omega, d_sigma = pair_param_derivs(inner, omegas, sigmas, scales)
    return f, h * (d_omega @ a_in), h * (d_sigma @ a_in)


def discrete_inner_product(
    amplitude: np.ndarray,
    omega: np.ndarray,
    atom: GaussianAtom,
    order: Literal["value", "grad_omega", "grad_sigma"] = "value",
) -> float:
    om, sg, sc = atom_arrays([atom])
    f, f_om, f_sg = discrete_inner_products(amplitude, omega, om, sg, sc)
    return float({"value": f, "grad_omega": f_om, "grad_sigma": f_sg}[order][0])


def clamp_width(sigma: float, floor: float = None) -> Tuple[float, bool]:
    """Clamp sigma to the width floor; the flag reports whether clamping happened."""
    floor = settings.WIDTH_FLOOR if floor is None else floor
    if sigma < floor:
        return floor, True
    return sigma, False


def squared_norm(values: np.ndarray, omega: np.ndarray) -> float:
    """Trapezoid integral of values^2 over the grid."""
    values = np.asarray(values, dtype=float)
    h = uniform_step(np.asarray(omega, dtype=float))
    return float(trapezoid(values ** 2, dx=h))
