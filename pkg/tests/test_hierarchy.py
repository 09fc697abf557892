"""
Hierarchy tests

Cases:
1. L2 energy ledger: ||A_n||^2 - Q_n = ||A_{n+1}||^2 and non-increasing residual norms
2. Stopping rules: eps_reached, no_extrema, max_levels
3. residual / captured_energy helpers
4. Grid validation
5. Academic four-level atom counts; signed center atoms; the noise floor
"""

import numpy as np
import pytest

from app.models.atoms import GaussianAtom, SignedMixture
from app.models.ledger import L2Diagnostics, PointwiseDiagnostics, RefinementLedger
from app.services.gaussian_model import mixture_eval, squared_norm
from app.services.hierarchy import (
    HierarchyConfig,
    HierarchyInputError,
    captured_energy,
    refine_once,
    refine_until,
    residual,
)
from app.utils.grids import frequency_grid

PLANTED = SignedMixture(positive=[GaussianAtom(alpha=2.0, omega_c=1.0, sigma=0.05)])


def _planted_grid():
    omega = frequency_grid(2.0, 256)
    return omega, mixture_eval(PLANTED, omega)


def test_l2_ledger_identity(academic_grid):
    omega, amplitude = academic_grid
    ledger, padded, final = refine_until(amplitude, omega, HierarchyConfig(method="l2", max_levels=3))

    assert len(ledger.levels) >= 2
    norm0 = ledger.original_sq_norm
    assert norm0 == pytest.approx(395.0055, rel=1e-6)

    first = ledger.levels[0]
    assert first.q_max == pytest.approx(390.9413, rel=5e-3)
    assert first.residual_sq_norm_before - first.q_max == pytest.approx(first.residual_sq_norm, abs=1e-6 * norm0)
    for lv in ledger.levels:
        assert lv.residual_sq_norm <= lv.residual_sq_norm_before - lv.q_max + 1e-6 * norm0

    norms = ledger.residual_sq_norms
    assert norms[1] < norms[0]
    assert all(b <= a for a, b in zip(norms, norms[1:]))
    assert squared_norm(final, padded) == pytest.approx(norms[-1])


def test_levels_keep_l2_diagnostics_out_of_json(academic_grid):
    omega, amplitude = academic_grid
    ledger, _, _ = refine_until(amplitude, omega, HierarchyConfig(method="l2", max_levels=1))

    assert ledger.stop_reason == "max_levels"
    assert isinstance(ledger.levels[0].diagnostics, L2Diagnostics)
    data = ledger.to_json_dict()
    assert "diagnostics" not in data["levels"][0]
    restored = RefinementLedger.from_json_dict(data)
    assert restored.levels[0].q_max == ledger.levels[0].q_max
    assert restored.levels[0].mixture == ledger.levels[0].mixture


def test_exact_pair_stops_after_one_l2_level():
    omega, amplitude = _planted_grid()
    ledger, _, _ = refine_until(amplitude, omega, HierarchyConfig(method="l2"))

    assert ledger.stop_reason == "eps_reached"
    assert len(ledger.levels) == 1
    atom = ledger.levels[0].mixture.positive[0]
    assert atom.omega_c == pytest.approx(1.0, rel=1e-3)
    assert ledger.levels[0].residual_sq_norm <= ledger.eps_stop


def test_exact_pair_stops_after_one_pointwise_level():
    omega, amplitude = _planted_grid()
    ledger, _, _ = refine_until(amplitude, omega, HierarchyConfig(method="pointwise"))

    assert ledger.stop_reason == "eps_reached"
    assert len(ledger.levels) == 1
    assert isinstance(ledger.levels[0].diagnostics, PointwiseDiagnostics)
    assert ledger.levels[0].p_n == 1
    assert ledger.levels[0].q_n == 0
    assert not ledger.levels[0].center


def test_zero_amplitude_has_nothing_to_refine():
    omega = frequency_grid(2.0, 64)
    fit = refine_once(np.zeros(129), omega, "l2")
    assert fit.empty
    assert fit.mixture.is_empty

    ledger, _, _ = refine_until(np.zeros(129), omega)
    assert ledger.levels == []
    assert ledger.stop_reason == "eps_reached"


def test_flat_residual_reports_no_extrema():
    omega = frequency_grid(2.0, 64)
    config = HierarchyConfig(method="pointwise", eps_stop=1e-12)
    ledger, _, _ = refine_until(np.full(129, 1.0), omega, config)
    assert ledger.stop_reason == "no_extrema"
    assert ledger.levels == []


def test_refine_once_uses_center_for_positive_origin_maximum():
    omega = frequency_grid(2.0, 256)
    mixture = SignedMixture(
        center=GaussianAtom(alpha=1.5, sigma=0.04, kind="center"),
        positive=[GaussianAtom(alpha=1.0, omega_c=1.2, sigma=0.03)],
    )
    fit = refine_once(mixture_eval(mixture, omega), omega, "pointwise")

    assert fit.center
    assert fit.mixture.center.alpha == pytest.approx(1.5, rel=1e-3)
    assert fit.mixture.positive[0].omega_c == pytest.approx(1.2, rel=1e-3)


def test_residual_and_captured_energy(academic_grid):
    omega, amplitude = academic_grid
    mix = SignedMixture(positive=[GaussianAtom(alpha=13.0, omega_c=0.9, sigma=0.3)])

    np.testing.assert_allclose(residual(amplitude, omega, [mix]), amplitude - mixture_eval(mix, omega))
    np.testing.assert_allclose(residual(amplitude, omega, []), amplitude)
    assert captured_energy(amplitude, amplitude, omega) == pytest.approx(squared_norm(amplitude, omega))
    assert captured_energy(amplitude, np.zeros_like(amplitude), omega) == pytest.approx(0.0, abs=1e-9)


def test_grid_validation():
    with pytest.raises(HierarchyInputError):
        refine_once(np.ones(10), np.linspace(-1, 1, 10), "l2")
    with pytest.raises(HierarchyInputError):
        refine_once(np.ones(11), np.linspace(0, 2, 11), "l2")
    with pytest.raises(HierarchyInputError):
        refine_until(np.ones(11), np.linspace(-1, 1, 12))


def test_academic_four_levels_grow_like_1_5_16_47(academic_grid):
    """running atom totals within 20% of 1, 5, 16, 47 with every level converged"""
    omega, amplitude = academic_grid
    config = HierarchyConfig(method="l2", eps_stop=1e-12, max_levels=4)
    ledger, _, _ = refine_until(amplitude, omega, config)

    assert len(ledger.levels) == 4
    assert ledger.stop_reason == "max_levels"
    totals = np.cumsum([lv.atom_count for lv in ledger.levels])
    for total, expected in zip(totals, (1, 5, 16, 47)):
        assert 0.8 * expected <= total <= 1.2 * expected
    for lv in ledger.levels:
        assert lv.converged
        assert lv.atom_count == lv.p_n + lv.q_n + int(lv.center)
        assert lv.residual_sq_norm_before - lv.q_max == pytest.approx(lv.residual_sq_norm, abs=1e-9 * ledger.original_sq_norm)
    norms = ledger.residual_sq_norms
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert ledger.levels[1].center
    assert ledger.levels[2].center


@pytest.mark.parametrize("method", ["pointwise", "l2"])
def test_refine_once_uses_negative_center_for_origin_dip(method):
    omega = frequency_grid(2.0, 256)
    mixture = SignedMixture(
        center=GaussianAtom(alpha=-0.5, sigma=0.02, kind="center"),
        positive=[GaussianAtom(alpha=1.0, omega_c=1.0, sigma=0.03)],
    )
    fit = refine_once(mixture_eval(mixture, omega), omega, method)

    assert fit.center
    assert fit.p_n == 1
    assert fit.q_n == 0
    assert fit.mixture.center.alpha == pytest.approx(-0.5, rel=1e-3)
    assert fit.mixture.center.sigma == pytest.approx(0.02, rel=1e-3)
    assert fit.mixture.positive[0].omega_c == pytest.approx(1.0, rel=1e-3)


def test_origin_minimum_above_zero_gets_no_center():
    omega, amplitude = _planted_grid()
    fit = refine_once(amplitude + 0.01, omega, "pointwise")
    assert not fit.center
    assert fit.mixture.center is None


def test_noise_floor_leaves_small_extrema_unfitted():
    omega = frequency_grid(2.0, 256)
    mixture = SignedMixture(
        positive=[
            GaussianAtom(alpha=1.0, omega_c=0.6, sigma=0.02),
            GaussianAtom(alpha=0.02, omega_c=1.4, sigma=0.02),
        ],
    )
    amplitude = mixture_eval(mixture, omega)

    kept = refine_once(amplitude, omega, "pointwise")
    assert kept.p_n == 2
    assert kept.below_floor == 0

    config = HierarchyConfig(method="pointwise", noise_floor_ratio=0.05)
    fit = refine_once(amplitude, omega, "pointwise", config)
    assert fit.p_n == 1
    assert fit.below_floor == 1
    assert fit.mixture.positive[0].omega_c == pytest.approx(0.6, rel=1e-3)

    ledger, _, _ = refine_until(amplitude, omega, config.model_copy(update={"max_levels": 1}))
    assert ledger.levels[0].below_floor == 1
    assert ledger.to_json_dict()["levels"][0]["below_floor"] == 1
