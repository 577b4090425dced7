import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tviskin.model import (AttenuationModel, ContactEvent, NoiseModel, TaxelLayout,
                           forward_response, is_active, load_setup, mean_readings,
                           noisy_readings, save_setup, tvi_force)

UNIT = AttenuationModel(c=1.0, lam=1.0, alpha=2.0)

models = st.builds(
    AttenuationModel,
    c=st.floats(0.1, 5.0), lam=st.floats(0.05, 5.0),
    alpha=st.floats(0.3, 4.0), s_min=st.floats(0.0, 2.0),
)


@pytest.mark.parametrize("kwargs", [dict(c=0), dict(lam=-1), dict(alpha=0), dict(s_min=-0.1)])
def test_model_rejects_bad_parameters(kwargs):
    with pytest.raises(ValueError):
        AttenuationModel(**kwargs)


def test_forward_response_examples():
    assert forward_response(UNIT, 1.0, 0.0) == 1.0
    assert forward_response(UNIT, 1.0, 1.0) == 0.0
    assert forward_response(UNIT, 2.0, 1.0) == 1.0


def test_forward_response_rejects_negative_inputs():
    with pytest.raises(ValueError):
        forward_response(UNIT, -1.0, 0.0)
    with pytest.raises(ValueError):
        forward_response(UNIT, 1.0, -0.5)


def test_forward_response_is_vectorised():
    s = forward_response(UNIT, np.array([1.0, 2.0, 5.0]), np.array([0.0, 1.0, 1.0]))
    np.testing.assert_allclose(s, [1.0, 1.0, 4.0])


def test_tvi_force_examples():
    assert tvi_force(UNIT, 1.0, 0.0) == 1.0
    assert tvi_force(UNIT, 1.0, 2.0) == 5.0
    assert tvi_force(AttenuationModel(c=2.0, lam=0.5, alpha=1.0), 3.0, 4.0) == 8.0


def test_tvi_force_rejects_level_below_threshold():
    with pytest.raises(ValueError):
        tvi_force(AttenuationModel(s_min=0.5), 0.2, 1.0)


def test_noisy_readings_examples():
    layout = TaxelLayout(np.array([0.0, 1.0, 2.0]))
    r = noisy_readings(UNIT, NoiseModel(), layout, [ContactEvent(0.0, 1.0)])
    np.testing.assert_array_equal(r, [1.0, 0.0, 0.0])

    # two contacts each exactly on the zero isoline of taxel 1
    r = noisy_readings(UNIT, NoiseModel(), layout, [ContactEvent(0.0, 1.0), ContactEvent(2.0, 1.0)])
    assert r[1] == 0.0

    noise = NoiseModel(sigma_s=0.1, seed=7)
    a = noisy_readings(UNIT, noise, layout, [ContactEvent(0.4, 2.0)])
    b = noisy_readings(UNIT, noise, layout, [ContactEvent(0.4, 2.0)])
    np.testing.assert_array_equal(a, b)
    c = noisy_readings(UNIT, noise, layout, [ContactEvent(0.4, 2.0)], stream=1)
    assert not np.array_equal(a, c)


def test_noise_statistics():
    layout = TaxelLayout(np.array([0.0]))
    noise = NoiseModel(sigma_s=0.2, seed=3)
    draws = np.array([noisy_readings(UNIT, noise, layout, [ContactEvent(0.0, 5.0)], stream=k)[0]
                      for k in range(4000)])
    assert abs(draws.mean() - 5.0) < 4 * 0.2 / np.sqrt(4000)
    assert abs(draws.std() - 0.2) < 0.01


def test_layout_validation():
    with pytest.raises(ValueError):
        TaxelLayout(np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        TaxelLayout(np.array([0.0, 0.0]))
    with pytest.raises(ValueError):
        TaxelLayout(np.array([[0.0, 0.0], [0.0, 0.0]]))
    lay = TaxelLayout(np.array([0.0, 6.5, 13.0]))
    assert lay.dimensionality == 1
    assert lay.nominal_spacing == 6.5
    with pytest.raises(ValueError):
        lay.positions[0] = 3.0


def test_layout_2d_distances():
    lay = TaxelLayout(np.array([[0.0, 0.0], [3.0, 4.0]]))
    assert lay.dimensionality == 2
    np.testing.assert_allclose(lay.distances((0.0, 0.0)), [0.0, 5.0])
    assert lay.distances(np.zeros((7, 2))).shape == (7, 2)


def test_contact_validation():
    with pytest.raises(ValueError):
        ContactEvent(0.0, -1.0)
    with pytest.raises(ValueError):
        ContactEvent(0.0, 1.0, depth=-0.1)
    assert ContactEvent(np.array([1, 2]), 1.0).position == (1.0, 2.0)


def test_setup_json_round_trip(tmp_path):
    model = AttenuationModel(c=0.7, lam=1.3, alpha=2.2, s_min=0.05)
    noise = NoiseModel(sigma_s=0.01, sigma_sf=0.02, seed=11)
    layout = TaxelLayout(np.array([[0.0, 0.0], [6.5, 0.0], [0.0, 6.5]]))
    path = tmp_path / "setup.json"
    save_setup(path, model, noise, layout)
    doc = json.loads(path.read_text())
    assert set(doc) == {"c", "lambda", "alpha", "s_min", "sigma_s", "sigma_sf", "seed",
                        "dimensionality", "positions"}
    m2, n2, l2 = load_setup(path)
    assert (m2, n2, l2) == (model, noise, layout)


@given(models, st.floats(0.0, 10.0), st.floats(0.0, 5.0))
def test_round_trip_forward_of_isoline(model, extra, d):
    level = model.s_min + extra
    f = tvi_force(model, level, d)
    s = forward_response(model, f, d)
    assert s == pytest.approx(level, rel=1e-12, abs=1e-12 * max(1.0, f / model.c))


@given(models, st.floats(0.0, 5.0), st.floats(0.01, 5.0), st.floats(0.0, 5.0))
def test_isoline_ordering(model, extra, gap, d):
    s1 = model.s_min + extra
    assert tvi_force(model, s1, d) < tvi_force(model, s1 + gap, d)


@given(models.filter(lambda m: m.alpha >= 1), st.floats(0.0, 5.0))
def test_isoline_convex_for_alpha_at_least_one(model, level):
    d = np.linspace(0.0, 4.0, 81)
    f = tvi_force(model, model.s_min + level, d)
    second = f[2:] - 2 * f[1:-1] + f[:-2]
    assert np.all(second >= -1e-9 * np.abs(f[1:-1]).max())


@given(models, st.floats(-5.0, 5.0))
@settings(max_examples=50)
def test_active_set_grows_with_force(model, position):
    layout = TaxelLayout(np.linspace(-4.0, 4.0, 6))
    prev = np.zeros(6, dtype=bool)
    for force in np.linspace(0.0, 80.0, 41):
        act = is_active(model, mean_readings(model, layout, [ContactEvent(position, force)]))
        assert np.all(act >= prev)
        prev = act


@given(models, st.floats(0.0, 20.0), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_response_monotone(model, force, d1, d2):
    lo, hi = sorted((d1, d2))
    assert forward_response(model, force, hi) <= forward_response(model, force, lo)
    assert forward_response(model, force, lo) <= forward_response(model, force + 1.0, lo)
