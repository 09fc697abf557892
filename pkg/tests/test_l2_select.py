"""
L2 selection tests

Cases:
1. Academic single-atom ascent: maximal Q and the optimal atom
2. Analytic Q gradient against central finite differences
3. Planted mixtures recovered from a perturbed start
4. Gram assembly / Cholesky solve failures
5. Natural metric against quadrature; scaling the amplitude leaves the shapes alone
"""

import numpy as np
import pytest
from scipy.integrate import trapezoid

from app.services.gaussian_model import discrete_inner_products, gram_matrix, mixture_eval
from app.services.l2_select import (
    IllConditionedError,
    L2Config,
    L2InputError,
    L2State,
    assemble_gram,
    fit_l2,
    natural_metric,
    q_gradient,
    solve_weights,
)
from app.models.atoms import GaussianAtom, SignedMixture
from app.utils.grids import frequency_grid


def _q(amplitude, omega, omegas, sigmas, scales):
    f = discrete_inner_products(amplitude, omega, omegas, sigmas, scales, with_grads=False)
    return float(f @ solve_weights(gram_matrix(omegas, sigmas, scales), f))


def test_academic_l2_fit(academic_grid):
    omega, amplitude = academic_grid
    mixture, diag = fit_l2(amplitude, omega, [(1.0, 13.5 / 36)])

    assert diag.q_value == pytest.approx(390.9413, rel=5e-3)
    atom = mixture.positive[0]
    assert atom.alpha == pytest.approx(13.8189, rel=1e-2)
    assert atom.omega_c == pytest.approx(0.8974, rel=1e-2)
    assert atom.sigma == pytest.approx(0.2942, rel=1e-2)
    assert np.max(mixture_eval(mixture, omega)) == pytest.approx(13.8782, rel=5e-3)

    qs = [r.q for r in diag.history]
    assert all(b > a for a, b in zip(qs, qs[1:]))
    assert diag.q_value < 395.0055


def test_q_gradient_matches_finite_differences(academic_grid, rng):
    omega, amplitude = academic_grid
    for _ in range(100):
        n = int(rng.integers(1, 5))
        has_center = bool(rng.random() < 0.3)
        slots = rng.permutation(5)[:n]
        omegas = 0.2 + 0.4 * slots + rng.uniform(-0.05, 0.05, n)
        sigmas = rng.uniform(0.02, 0.12, n)
        if has_center:
            omegas[0] = 0.0
        scales = np.ones(n)
        if has_center:
            scales[0] = 0.5

        f = discrete_inner_products(amplitude, omega, omegas, sigmas, scales, with_grads=False)
        weights = solve_weights(gram_matrix(omegas, sigmas, scales), f)
        state = L2State(omegas=omegas, sigmas=sigmas, has_center=has_center, weights=weights, q_value=float(f @ weights))
        g_omega, g_sigma = q_gradient(state, amplitude, omega)

        h = 1e-6
        fd_omega, fd_sigma = np.zeros(n), np.zeros(n)
        for i in range(n):
            if not (has_center and i == 0):
                up, down = omegas.copy(), omegas.copy()
                up[i] += h
                down[i] -= h
                fd_omega[i] = (_q(amplitude, omega, up, sigmas, scales) - _q(amplitude, omega, down, sigmas, scales)) / (2 * h)
            up, down = sigmas.copy(), sigmas.copy()
            up[i] += h
            down[i] -= h
            fd_sigma[i] = (_q(amplitude, omega, omegas, up, scales) - _q(amplitude, omega, omegas, down, scales)) / (2 * h)

        scale = max(np.linalg.norm(fd_omega), np.linalg.norm(fd_sigma), 1.0)
        np.testing.assert_allclose(g_omega, fd_omega, atol=1e-5 * scale)
        np.testing.assert_allclose(g_sigma, fd_sigma, atol=1e-5 * scale)


def test_planted_mixture_recovered():
    omega = frequency_grid(4.0, 1024)
    planted = SignedMixture(positive=[
        GaussianAtom(alpha=5.0, omega_c=0.8, sigma=0.05),
        GaussianAtom(alpha=3.0, omega_c=1.6, sigma=0.08),
    ])
    amplitude = mixture_eval(planted, omega)
    config = L2Config(max_iter=20000, grad_tol=1e-9)
    mixture, diag = fit_l2(amplitude, omega, [(0.82, 0.055), (1.58, 0.075)], config=config)

    for atom, truth in zip(mixture.positive, planted.positive):
        assert atom.omega_c == pytest.approx(truth.omega_c, rel=1e-3)
        assert atom.sigma == pytest.approx(truth.sigma, rel=1e-3)
        assert atom.alpha == pytest.approx(truth.alpha, rel=1e-3)


def test_planted_signed_mixture_with_center():
    omega = frequency_grid(4.0, 1024)
    planted = SignedMixture(
        center=GaussianAtom(alpha=2.0, sigma=0.1, kind="center"),
        negative=[GaussianAtom(alpha=1.0, omega_c=1.5, sigma=0.06)],
    )
    amplitude = mixture_eval(planted, omega)
    mixture, diag = fit_l2(amplitude, omega, [(1.5, 0.06)], center_sigma=0.1)

    assert diag.converged
    assert diag.q_value == pytest.approx(float(np.sum(amplitude ** 2) * (omega[1] - omega[0])), rel=1e-8)
    assert mixture.center.alpha == pytest.approx(2.0, rel=1e-6)
    assert mixture.negative[0].alpha == pytest.approx(1.0, rel=1e-6)
    assert mixture.positive == []


def test_assemble_gram_rejects_duplicates_and_empty():
    with pytest.raises(IllConditionedError):
        assemble_gram([(1.0, 0.2), (1.0, 0.2)])
    with pytest.raises(L2InputError):
        assemble_gram([])
    with pytest.raises(L2InputError):
        assemble_gram([(1.0, -0.2)])


def test_solve_weights_detects_singular_gram():
    gram = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(IllConditionedError) as exc:
        solve_weights(gram, np.array([1.0, 2.0]))
    assert "condition" in exc.value.detail


def test_solve_weights_solves_spd_system():
    gram = np.array([[4.0, 1.0], [1.0, 3.0]])
    f = np.array([1.0, 2.0])
    np.testing.assert_allclose(gram @ solve_weights(gram, f), f)


def test_widths_are_clamped_into_bounds(academic_grid):
    omega, amplitude = academic_grid
    _, diag = fit_l2(amplitude, omega, [(1.0, 1e-12)], config=L2Config(max_iter=5))
    assert diag.clamped


def test_zero_iterations_returns_solved_weights(academic_grid):
    omega, amplitude = academic_grid
    mixture, diag = fit_l2(amplitude, omega, [(1.0, 0.375)], config=L2Config(max_iter=0))
    assert diag.iterations == 0
    assert not diag.converged
    assert mixture.positive[0].omega_c == 1.0
    assert len(diag.history) == 1


def test_natural_metric_matches_quadrature():
    """D = alpha^2 ||dG/dbeta||^2 for a pair and for a center atom"""
    w = np.linspace(-12.0, 12.0, 48001)
    cases = [(1.7, 2.0, 0.09, 1.0), (-0.4, 0.0, 0.2, 0.5)]
    weights = np.array([c[0] for c in cases])
    sigmas = np.array([c[2] for c in cases])
    scales = np.array([c[3] for c in cases])
    d_omega, d_sigma = natural_metric(weights, sigmas, scales)

    for i, (alpha, om, sg, sc) in enumerate(cases):
        minus, plus = w - om, w + om
        g_minus, g_plus = np.exp(-minus ** 2 / (2 * sg)), np.exp(-plus ** 2 / (2 * sg))
        dg_sigma = alpha * sc * (minus ** 2 * g_minus + plus ** 2 * g_plus) / (2 * sg ** 2)
        assert d_sigma[i] == pytest.approx(trapezoid(dg_sigma ** 2, w), rel=1e-6)
        if sc == 1.0:
            dg_omega = alpha * sc * (minus * g_minus - plus * g_plus) / sg
            assert d_omega[i] == pytest.approx(trapezoid(dg_omega ** 2, w), rel=1e-6)


def test_scaled_amplitude_scales_weights_not_shapes(academic_grid):
    omega, amplitude = academic_grid
    init = [(1.0, 13.5 / 36)]
    mixture, diag = fit_l2(amplitude, omega, init)
    doubled, doubled_diag = fit_l2(2.0 * amplitude, omega, init)

    assert doubled_diag.iterations == diag.iterations
    assert doubled_diag.q_value == pytest.approx(4.0 * diag.q_value, rel=1e-9)
    atom, twice = mixture.positive[0], doubled.positive[0]
    assert twice.omega_c == pytest.approx(atom.omega_c, rel=1e-9)
    assert twice.sigma == pytest.approx(atom.sigma, rel=1e-9)
    assert twice.alpha == pytest.approx(2.0 * atom.alpha, rel=1e-9)


def test_ascent_reaches_tolerance_on_a_signed_residual():
    """narrow signed atoms next to a dominant one still converge"""
    omega = frequency_grid(2.0, 512)
    planted = SignedMixture(
        positive=[GaussianAtom(alpha=3.0, omega_c=0.9, sigma=0.3)],
        negative=[GaussianAtom(alpha=0.02, omega_c=1.7, sigma=0.004)],
    )
    amplitude = mixture_eval(planted, omega)
    mixture, diag = fit_l2(amplitude, omega, [(0.85, 0.25), (1.69, 0.005)])

    assert diag.converged
    qs = [r.q for r in diag.history]
    assert all(b > a for a, b in zip(qs, qs[1:]))
    assert mixture.negative[0].omega_c == pytest.approx(1.7, rel=1e-3)
    assert mixture.negative[0].alpha == pytest.approx(0.02, rel=1e-2)
