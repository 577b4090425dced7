import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tviskin.calib import (IsolineFit, IsolineSample, build_model_from_fits, calibrate_dataset,
                           estimate_c, extract_isolines, fit_isoline, read_fit_json,
                           write_fit_json)
from tviskin.errors import DegenerateFit, InsufficientCoverage
from tviskin.model import AttenuationModel, NoiseModel
from tviskin.synth import ScanProtocol, generate_scan, make_layout

UNIT = AttenuationModel(c=1.0, lam=1.0, alpha=2.0)
DEVICE = AttenuationModel(c=1.0, lam=0.025, alpha=2.0, s_min=0.01)


@pytest.fixture(scope="module")
def unit_scan():
    layout = make_layout("line", 2.0, 3)
    proto = ScanProtocol("line-1d", 6.0, 121, 30, 0.25)
    return generate_scan(UNIT, NoiseModel(), layout, proto)


def test_extract_noiseless_points_on_isoline(unit_scan):
    (sample,) = extract_isolines(unit_scan, 1, levels=[1.0])
    np.testing.assert_allclose(sample.force, 1.0 + sample.distance ** 2, atol=1e-9)
    assert len(sample.distance) >= 4


def test_extract_level_above_max(unit_scan):
    with pytest.raises(InsufficientCoverage):
        extract_isolines(unit_scan, 1, levels=[1e6])


def test_extract_level_at_threshold_gives_g_at_zero_distance():
    model = AttenuationModel(c=1.0, lam=1.0, alpha=2.0, s_min=0.05)
    layout = make_layout("line", 2.0, 3)
    proto = ScanProtocol("line-1d", 6.0, 121, 30, 0.25)
    ds = generate_scan(model, NoiseModel(), layout, proto)
    (sample,) = extract_isolines(ds, 1, levels=[0.05])
    at_zero = sample.force[sample.distance == 0]
    np.testing.assert_allclose(at_zero, [0.05], atol=1e-12)


def test_fit_recovers_three_parameters():
    d = np.linspace(0.0, 4.0, 30)
    fit = fit_isoline(IsolineSample(1.0, d, 1.0 + 2.0 * d ** 2.5))
    assert fit.g == pytest.approx(1.0, rel=1e-6)
    assert fit.lam == pytest.approx(2.0, rel=1e-6)
    assert fit.alpha == pytest.approx(2.5, rel=1e-6)
    assert fit.residual_rms < 1e-8


def test_fit_exact_parabola():
    d = np.array([0.0, 0.5, 1.0, 2.0, 3.0])
    fit = fit_isoline(IsolineSample(0.0, d, d ** 2))
    assert fit.g == pytest.approx(0.0, abs=1e-9)
    assert fit.lam == pytest.approx(1.0, rel=1e-8)
    assert fit.alpha == pytest.approx(2.0, rel=1e-8)


def test_fit_with_force_noise():
    # 95th percentile of the worst relative parameter error over 100 seeds
    d = np.linspace(0.5, 5.0, 50)
    worst = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        f = 1.0 + 2.0 * d ** 2.5 + 0.01 * rng.standard_normal(d.size)
        fit = fit_isoline(IsolineSample(1.0, d, f))
        worst.append(max(abs(fit.g - 1.0), abs(fit.lam / 2.0 - 1), abs(fit.alpha / 2.5 - 1)))
    assert np.percentile(worst, 95) < 0.02


def test_fit_degenerate_distances():
    with pytest.raises(DegenerateFit):
        fit_isoline(IsolineSample(1.0, np.full(6, 2.0), np.arange(6.0)))
    with pytest.raises(DegenerateFit):
        fit_isoline(IsolineSample(1.0, np.array([1.0, 1.0, 2.0, 2.0]), np.array([1, 1, 2, 2.0])))


def make_fit(level, g, lam=1.0, alpha=2.0, rms=1e-3):
    return IsolineFit(level, g, lam, alpha, rms)


def test_estimate_c_examples():
    est = estimate_c([make_fit(s, 1.0 * s) for s in (0.5, 1.0, 2.0)])
    assert est.c == pytest.approx(1.0)
    assert est.spread == pytest.approx(0.0, abs=1e-15)
    assert estimate_c([make_fit(1, 2), make_fit(2, 4), make_fit(3, 6)]).c == pytest.approx(2.0)
    with pytest.raises(ValueError):
        estimate_c([make_fit(1, 2)])


def test_build_single_fit_echoes():
    cal = build_model_from_fits([IsolineFit(2.0, 1.4, 0.3, 2.2, 0.01)])
    assert cal.model.c == pytest.approx(0.7)
    assert cal.model.lam == pytest.approx(0.3)
    assert cal.model.alpha == pytest.approx(2.2)


def test_build_keeps_varying_table():
    fits = [make_fit(s, s, lam=1.0, alpha=a) for s, a in [(1, 3.0), (2, 2.5), (3, 2.1)]]
    cal = build_model_from_fits(fits)
    assert [row["alpha"] for row in cal.table] == [3.0, 2.5, 2.1]
    assert 2.1 < cal.model.alpha < 3.0
    assert cal.level_table()["alpha"] == [3.0, 2.5, 2.1]


def test_end_to_end_noiseless_round_trip(tmp_path):
    model = AttenuationModel(c=0.7, lam=0.03, alpha=2.3, s_min=0.02)
    layout = make_layout("line", 6.5, 6)
    ds = generate_scan(model, NoiseModel(), layout, ScanProtocol("line-1d", 50.0, 251, 20, 0.2))
    device, per = calibrate_dataset(ds)
    for got in [device] + [p.model for p in per]:
        assert got.c == pytest.approx(0.7, rel=1e-4)
        assert got.lam == pytest.approx(0.03, rel=1e-4)
        assert got.alpha == pytest.approx(2.3, rel=1e-4)
    path = write_fit_json(tmp_path / "fit.json", device, per)
    back, taxels = read_fit_json(path)
    assert back == device
    assert len(taxels) == 6 and taxels[0]["levels"]


def test_recovered_model_reproduces_responses():
    layout = make_layout("line", 6.5, 6)
    noise = NoiseModel(sigma_s=0.01, seed=4)
    ds = generate_scan(DEVICE, noise, layout, ScanProtocol("line-1d", 50.0, 251, 20, 0.2))
    device, _ = calibrate_dataset(ds)
    mean = np.maximum(0, (ds.force[:, None] - DEVICE.lam * layout.distances(ds.positions) ** 2))
    pred = np.maximum(0, (ds.force[:, None] - device.lam * layout.distances(ds.positions)
                          ** device.alpha) / device.c)
    assert np.sqrt(np.mean((pred - mean) ** 2)) < noise.sigma_s


@given(g=st.floats(0.0, 2.0), lam=st.floats(0.1, 3.0), alpha=st.floats(1.0, 4.0),
       seed=st.integers(0, 2 ** 16))
@settings(max_examples=30, deadline=None)
def test_fit_is_local_optimum(g, lam, alpha, seed):
    d = np.linspace(0.2, 3.0, 25)
    f = g + lam * d ** alpha + 0.05 * np.random.default_rng(seed).standard_normal(d.size)
    fit = fit_isoline(IsolineSample(1.0, d, f))

    def rms(g_, lam_, a_):
        return np.sqrt(np.mean((f - g_ - lam_ * d ** a_) ** 2))

    base = rms(fit.g, fit.lam, fit.alpha)
    for k in range(3):
        for sign in (-1, 1):
            p = [fit.g, fit.lam, fit.alpha]
            p[k] *= 1 + sign * 0.01
            assert rms(*p) >= base - 1e-12


@given(k=st.floats(0.1, 10.0), alpha=st.floats(1.2, 3.5))
@settings(max_examples=30, deadline=None)
def test_fit_scale_covariance(k, alpha):
    d = np.linspace(0.0, 3.0, 20)
    f = 0.3 + 0.8 * d ** alpha + 0.02 * np.sin(7 * d)
    a = fit_isoline(IsolineSample(1.0, d, f))
    b = fit_isoline(IsolineSample(1.0, d, k * f))
    assert b.g == pytest.approx(k * a.g, rel=1e-6, abs=1e-9)
    assert b.lam == pytest.approx(k * a.lam, rel=1e-6)
    assert b.alpha == pytest.approx(a.alpha, rel=1e-6)
