"""
DecompositionService tests

Cases:
1. analyze: spectrum + extrema of the academic signal
2. decompose: L2 and pointwise runs, detrending, report fields
3. decompose_spectrum: lolo chirp data against the analytic phase
4. Degenerate and out-of-band inputs
5. synthesize / roundtrip
"""

import numpy as np
import pytest

from app.models.atoms import ChirpCenter, ChirpletModel
from app.models.signals import RealSignal
from app.services.generators import cubic_phase, generate, generate_spectrum, sinusoidal_phase
from app.services.hierarchy import HierarchyConfig
from app.services.pipeline_service import DecompositionService, error_series, relative_l2
from app.services.spectrum import DegenerateSpectrumError, GridMismatchError


@pytest.fixture(scope="module")
def academic_signal():
    return generate("academic")


@pytest.fixture
def service():
    return DecompositionService(omega_max=2.0, n_freq=512)


def test_analyze_academic(service, academic_signal):
    result = service.analyze(academic_signal)

    assert result.extrema.origin == "min"
    peak = result.extrema.maxima()[0]
    assert peak.location == pytest.approx(1.0, abs=1e-3)
    assert peak.value == pytest.approx(13.5, rel=1e-2)
    assert [s.name for s in result.steps] == ["SPECTRUM", "EXTREMA"]
    assert result.steps[0].count == 2 * 512 + 1
    assert result.steps[1].count == len(result.extrema.extrema)
    assert all(s.ms >= 0 for s in result.steps)


def test_decompose_academic_first_level(service, academic_signal):
    result = service.decompose(academic_signal, method="l2", max_levels=1)
    report = result.report()

    assert report["method"] == "l2"
    assert report["levels"] == 1
    assert report["qFirstLevel"] == pytest.approx(390.9413, rel=1e-2)
    assert report["originalSqNorm"] == pytest.approx(395.0055, rel=1e-2)
    assert result.ledger.stop_reason == "max_levels"
    assert len(result.models) == 1
    atom = result.model.atoms[0]
    assert atom.omega_c == pytest.approx(0.8974, rel=1e-2)
    assert abs(atom.t_c) < 1e-2
    assert 0.0 <= report["roundtripSpectrumError"] < 0.2
    assert {"SPECTRUM", "FIT", "CHIRPLET", "ROUNDTRIP"} <= {s.name for s in result.steps}


def _central_taylor(phase, omega_c, e=1e-4):
    up, mid, down = phase(omega_c + e), phase(omega_c), phase(omega_c - e)
    return float(mid), float((up - down) / (2 * e)), float((up - 2 * mid + down) / e ** 2)


@pytest.mark.parametrize(
    "name, phase, tol",
    [("lolo-cubic", cubic_phase, 1e-4), ("lolo-sin", sinusoidal_phase, 2e-3)],
)
def test_decompose_lolo_spectrum_gives_one_chirp(name, phase, tol):
    spectrum = generate_spectrum(name, n_freq=512)
    result = DecompositionService().decompose_spectrum(spectrum, max_levels=1)

    level = result.ledger.levels[0]
    assert (level.p_n, level.q_n, level.center) == (1, 0, False)
    assert level.converged
    assert level.residual_sq_norm < 1e-3 * result.ledger.original_sq_norm
    assert result.model.center is None
    assert len(result.model.atoms) == 1

    atom = result.model.atoms[0]
    assert atom.omega_c == pytest.approx(0.9969, abs=2e-3)
    assert atom.sigma == pytest.approx(0.1048, rel=1e-2)
    assert atom.alpha == pytest.approx(0.3565, rel=1e-2)
    gamma, t_c, kappa = _central_taylor(phase, atom.omega_c)
    assert atom.gamma == pytest.approx(gamma, abs=tol)
    assert atom.t_c == pytest.approx(t_c, abs=tol)
    assert atom.kappa == pytest.approx(kappa, abs=tol)
    assert result.signal.size == 2 * 512
    assert "SYNTHESIZE" in [s.name for s in result.steps]


def test_decompose_lolo_cubic_spectrum_roundtrip():
    result = DecompositionService().decompose_spectrum(generate_spectrum("lolo-cubic", n_freq=512), max_levels=1)
    atom = result.model.atoms[0]
    assert atom.t_c == pytest.approx(3 * atom.omega_c ** 2 / 50, rel=1e-4)
    assert atom.kappa == pytest.approx(6 * atom.omega_c / 50, rel=1e-4)
    assert result.roundtrip.spectrum_error < 0.05
    fit = next(s for s in result.steps if s.name == "FIT")
    assert fit.count == 1


def test_windowed_lolo_signal_with_noise_floor_gives_one_chirp():
    """the 512-sample window leaks ripple into the spectrum; the floor keeps it out"""
    signal = generate("lolo-cubic")
    service = DecompositionService(omega_max=4.0, n_freq=256)
    result = service.decompose(signal, max_levels=1, noise_floor_ratio=0.25)

    level = result.ledger.levels[0]
    assert (level.p_n, level.q_n, level.center) == (1, 0, False)
    assert result.model.center is None
    atom = result.model.atoms[0]
    assert atom.omega_c == pytest.approx(1.0, abs=0.05)
    assert level.below_floor >= 1


def test_decompose_pointwise_lolo():
    signal = generate("lolo-cubic")
    result = DecompositionService(omega_max=4.0, n_freq=256).decompose(signal, method="pointwise", max_levels=1)

    assert result.ledger.method == "pointwise"
    assert len(result.ledger.levels) == 1
    assert result.model.atoms
    assert result.roundtrip.series.shape[0] == signal.size


def test_decompose_with_detrending():
    base = generate("lolo-cubic")
    ramp = RealSignal(samples=base.samples + 0.5 + 0.1 * base.times, t_start=base.t_start, dt=base.dt)
    result = DecompositionService(omega_max=4.0, n_freq=256).decompose(ramp, max_levels=1, detrend_degree=1)

    assert result.trend is not None
    assert result.trend.degree == 1
    assert result.trend.coefficients[1] == pytest.approx(0.1, abs=0.05)
    assert abs(float(np.mean(result.signal.samples))) < 1e-10
    assert "DETREND" in [s.name for s in result.steps]


def test_zero_signal_is_degenerate(service):
    with pytest.raises(DegenerateSpectrumError):
        service.decompose(RealSignal(samples=np.zeros(256), t_start=0.0, dt=0.05))


def test_band_beyond_nyquist_is_rejected(service):
    coarse = RealSignal(samples=np.ones(64), t_start=0.0, dt=2.0)
    with pytest.raises(GridMismatchError) as exc:
        service.analyze(coarse)
    assert exc.value.detail["nyquist"] == pytest.approx(np.pi / 2)


def test_synthesize_center_model(service):
    t = np.linspace(-4, 4, 81)
    model = ChirpletModel(center=ChirpCenter(alpha0=1.0, sigma0=1.0))
    signal = service.synthesize([model], t)
    np.testing.assert_allclose(signal.samples, np.sqrt(2 * np.pi) * np.exp(-t ** 2 / 2), atol=1e-12)


def test_empty_model_roundtrip_is_total_error(service):
    t = -20.0 + 0.05 * np.arange(801)
    signal = RealSignal(samples=np.sqrt(2 * np.pi) * np.exp(-t ** 2 / 2), t_start=-20.0, dt=0.05)
    result = service.roundtrip([], signal, omega_max=4.0, n_freq=64)

    assert result.spectrum_error == pytest.approx(1.0)
    assert result.signal_error == pytest.approx(1.0)
    assert list(result.series.columns) == ["t", "signal", "model", "abs_error", "log10_abs_error"]


def test_exact_center_model_roundtrip(service):
    """sqrt(2 pi) exp(-t^2/2) is the center chirp (1, 1, 0)"""
    t = -20.0 + 0.05 * np.arange(801)
    signal = RealSignal(samples=np.sqrt(2 * np.pi) * np.exp(-t ** 2 / 2), t_start=-20.0, dt=0.05)
    model = ChirpletModel(center=ChirpCenter(alpha0=1.0, sigma0=1.0))
    result = service.roundtrip([model], signal, omega_max=8.0, n_freq=256)

    assert result.spectrum_error < 1e-8
    assert result.signal_error < 1e-12


def test_error_helpers():
    assert relative_l2(np.zeros(3), np.zeros(3)) == 0.0
    assert relative_l2(np.array([3.0, 4.0]), np.array([3.0, 4.0])) == 0.0
    ref = RealSignal(samples=[1.0, 2.0], t_start=0.0, dt=1.0)
    frame = error_series(ref, RealSignal(samples=[1.0, 1.0], t_start=0.0, dt=1.0))
    assert list(frame["abs_error"]) == [0.0, 1.0]
    assert frame["log10_abs_error"].iloc[0] == -np.inf


def test_noise_increases_the_recovery_error():
    service = DecompositionService(omega_max=4.0, n_freq=256)
    config = HierarchyConfig(prominence_ratio=0.05)
    clean = service.decompose(generate("lolo-cubic"), max_levels=1, config=config)
    noisy = service.decompose(generate("lolo-cubic", noise_sigma=0.1, seed=1), max_levels=1, config=config)
    assert noisy.roundtrip.signal_error > clean.roundtrip.signal_error
