"""
Gaussian model tests

Cases:
1. eval_pair / mixture_eval values and derivatives
2. Closed-form Gram entries against numerical quadrature
3. Gram partial derivatives against finite differences
4. Discrete inner products, width clamping and the squared norm
"""

import numpy as np
import pytest
from scipy.integrate import trapezoid

from app.models.atoms import GaussianAtom, SignedMixture
from app.services.gaussian_model import (
    GaussianModelError,
    atom_arrays,
    clamp_width,
    discrete_inner_product,
    discrete_inner_products,
    eval_pair,
    gram_matrix,
    gram_partials,
    inner_product,
    inner_product_grad,
    mixture_eval,
    pair_values,
    squared_norm,
)
from app.utils.grids import frequency_grid


def _random_atoms(rng, n):
    atoms = []
    for _ in range(n):
        if rng.random() < 0.25:
            atoms.append(GaussianAtom(alpha=1.0, sigma=rng.uniform(0.05, 1.0), kind="center"))
        else:
            atoms.append(GaussianAtom(alpha=1.0, omega_c=rng.uniform(0.0, 3.0), sigma=rng.uniform(0.05, 1.0)))
    return atoms


def test_eval_pair_center_is_single_gaussian():
    atom = GaussianAtom(alpha=2.0, sigma=0.5, kind="center")
    w = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(eval_pair(w, atom), np.exp(-w ** 2 / 1.0))
    assert eval_pair(0.0, atom) == pytest.approx(1.0)


def test_eval_pair_is_even_pair():
    atom = GaussianAtom(alpha=1.0, omega_c=1.2, sigma=0.3)
    w = np.linspace(-3, 3, 13)
    expected = np.exp(-(w - 1.2) ** 2 / 0.6) + np.exp(-(w + 1.2) ** 2 / 0.6)
    np.testing.assert_allclose(eval_pair(w, atom), expected)
    np.testing.assert_allclose(eval_pair(w, atom), eval_pair(-w, atom))


@pytest.mark.parametrize("order", [1, 2])
def test_eval_pair_derivatives_match_finite_differences(order):
    atom = GaussianAtom(alpha=1.0, omega_c=0.9, sigma=0.2)
    w = np.linspace(-2, 2, 21)
    h = 1e-5
    lower = eval_pair(w - h, atom, order - 1)
    upper = eval_pair(w + h, atom, order - 1)
    np.testing.assert_allclose(eval_pair(w, atom, order), (upper - lower) / (2 * h), atol=1e-6)


def test_eval_pair_rejects_unknown_order():
    with pytest.raises(GaussianModelError):
        pair_values(np.zeros(3), np.zeros(1), np.ones(1), np.ones(1), order=3)


def test_mixture_eval_signs():
    mix = SignedMixture(
        center=GaussianAtom(alpha=-0.5, sigma=0.4, kind="center"),
        positive=[GaussianAtom(alpha=3.0, omega_c=1.0, sigma=0.2)],
        negative=[GaussianAtom(alpha=1.0, omega_c=2.0, sigma=0.1)],
    )
    w = np.linspace(-3, 3, 31)
    expected = (
        -0.5 * eval_pair(w, mix.center)
        + 3.0 * eval_pair(w, mix.positive[0])
        - 1.0 * eval_pair(w, mix.negative[0])
    )
    np.testing.assert_allclose(mixture_eval(mix, w), expected)
    np.testing.assert_allclose(mixture_eval(SignedMixture(), w), 0.0)


def test_gram_matches_quadrature(rng):
    w = np.linspace(-16.0, 16.0, 64001)
    for _ in range(100):
        atoms = _random_atoms(rng, 2)
        closed = inner_product(atoms[0], atoms[1])
        numeric = trapezoid(eval_pair(w, atoms[0]) * eval_pair(w, atoms[1]), w)
        assert closed == pytest.approx(numeric, rel=1e-8, abs=1e-14)


def test_gram_matrix_symmetric_positive_definite(rng):
    om, sg, sc = atom_arrays(_random_atoms(rng, 5))
    gram = gram_matrix(om, sg, sc)
    np.testing.assert_allclose(gram, gram.T)
    assert np.all(np.linalg.eigvalsh(gram) > 0)


def test_gram_partials_match_finite_differences(rng):
    h = 1e-6
    for _ in range(20):
        omegas = rng.uniform(0.2, 3.0, 3)
        sigmas = rng.uniform(0.05, 1.0, 3)
        scales = np.ones(3)
        d_omega, d_sigma = gram_partials(omegas, sigmas, scales)
        for i in range(3):
            up, down = omegas.copy(), omegas.copy()
            up[i] += h
            down[i] -= h
            fd = (gram_matrix(up, sigmas, scales) - gram_matrix(down, sigmas, scales)) / (2 * h)
            others = [j for j in range(3) if j != i]
            np.testing.assert_allclose(d_omega[i, others], fd[i, others], rtol=1e-6, atol=1e-9)
            assert 2 * d_omega[i, i] == pytest.approx(fd[i, i], rel=1e-6, abs=1e-9)

            up, down = sigmas.copy(), sigmas.copy()
            up[i] += h
            down[i] -= h
            fd = (gram_matrix(omegas, up, scales) - gram_matrix(omegas, down, scales)) / (2 * h)
            np.testing.assert_allclose(d_sigma[i, others], fd[i, others], rtol=1e-6, atol=1e-9)
            assert 2 * d_sigma[i, i] == pytest.approx(fd[i, i], rel=1e-6, abs=1e-9)


def test_inner_product_grad_self_term_and_center():
    a = GaussianAtom(alpha=1.0, omega_c=1.0, sigma=0.3)
    h = 1e-6
    up, down = a.with_params(sigma=0.3 + h), a.with_params(sigma=0.3 - h)
    fd = (inner_product(up, up) - inner_product(down, down)) / (2 * h)
    assert inner_product_grad(a, a, "sigma", self_term=True) == pytest.approx(fd, rel=1e-6)

    center = GaussianAtom(alpha=1.0, sigma=0.3, kind="center")
    with pytest.raises(GaussianModelError):
        inner_product_grad(center, a, "omega")


def test_discrete_inner_products_reproduce_gram():
    """A = G_j sampled on a wide fine grid: f_i equals <G_i, G_j>"""
    omega = frequency_grid(8.0, 4000)
    atoms = [
        GaussianAtom(alpha=1.0, omega_c=1.0, sigma=0.1),
        GaussianAtom(alpha=1.0, omega_c=1.7, sigma=0.25),
        GaussianAtom(alpha=1.0, sigma=0.2, kind="center"),
    ]
    om, sg, sc = atom_arrays(atoms)
    gram = gram_matrix(om, sg, sc)
    for j, atom in enumerate(atoms):
        f = discrete_inner_products(eval_pair(omega, atom), omega, om, sg, sc, with_grads=False)
        np.testing.assert_allclose(f, gram[:, j], rtol=1e-10)


def test_discrete_inner_product_gradients_match_finite_differences(academic_grid):
    omega, amplitude = academic_grid
    atom = GaussianAtom(alpha=1.0, omega_c=0.9, sigma=0.3)
    h = 1e-6
    fd_omega = (
        discrete_inner_product(amplitude, omega, atom.with_params(omega_c=0.9 + h))
        - discrete_inner_product(amplitude, omega, atom.with_params(omega_c=0.9 - h))
    ) / (2 * h)
    fd_sigma = (
        discrete_inner_product(amplitude, omega, atom.with_params(sigma=0.3 + h))
        - discrete_inner_product(amplitude, omega, atom.with_params(sigma=0.3 - h))
    ) / (2 * h)
    assert discrete_inner_product(amplitude, omega, atom, "grad_omega") == pytest.approx(fd_omega, rel=1e-6)
    assert discrete_inner_product(amplitude, omega, atom, "grad_sigma") == pytest.approx(fd_sigma, rel=1e-6)


def test_discrete_inner_products_need_symmetric_grid():
    omega = np.linspace(0, 2, 11)
    with pytest.raises(GaussianModelError):
        discrete_inner_products(np.ones(11), omega, np.ones(1), np.ones(1), np.ones(1))


def test_clamp_width():
    assert clamp_width(0.5, 1e-3) == (0.5, False)
    assert clamp_width(1e-9, 1e-3) == (1e-3, True)


def test_academic_squared_norm(academic_grid):
    omega, amplitude = academic_grid
    assert squared_norm(amplitude, omega) == pytest.approx(395.0055, rel=1e-6)
