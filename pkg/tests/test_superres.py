import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tviskin.errors import ComplexityLimit, InfiniteOmega
from tviskin.geometry import approx_sigma_p, corner_uncertainty, overlap_count
from tviskin.model import AttenuationModel, ContactEvent, TaxelLayout
from tviskin.superres import (OmegaReport, decode_contacts, device_omega,
                              discriminable_two_contacts_1d, discrimination_sweep,
                              localizable_2d, omega_analytic_1d, omega_area_2d,
                              omega_dual_noise, omega_pairwise, separation_summary,
                              spurious_intersections)

UNIT = AttenuationModel(c=1.0, lam=1.0, alpha=2.0)
DEVICE = AttenuationModel(c=1.0, lam=0.025, alpha=2.0, s_min=0.01)
LINE6 = TaxelLayout(np.arange(6) * 6.5)


def test_omega_pairwise_examples():
    assert omega_pairwise(1.0, 2, 0.05) == pytest.approx(5.0)
    assert omega_pairwise(6.5, 2, 6.5 / 4) == pytest.approx(1.0)
    sigma = corner_uncertainty(UNIT, (0.0, 2.0), (1.0, 1.0), 0.1).sigma_p
    assert omega_pairwise(2.0, 2, sigma) == pytest.approx(10.0, rel=1e-7)


def test_omega_pairwise_rejects_zero_error():
    with pytest.raises(InfiniteOmega):
        omega_pairwise(1.0, 2, 0.0)
    with pytest.raises(ValueError):
        omega_pairwise(0.0, 2, 0.1)


def test_omega_analytic_examples():
    assert omega_analytic_1d(UNIT, 1.0, 0.1) == pytest.approx(2.5)
    assert omega_analytic_1d(UNIT, 2.0, 0.1) == pytest.approx(10.0)
    assert omega_pairwise(2.0, 2, approx_sigma_p(UNIT, 2.0, 1.0, 0.1)) == pytest.approx(10.0)
    doubled = AttenuationModel(lam=2.0)
    assert omega_analytic_1d(doubled, 1.0, 0.1) == pytest.approx(2 * omega_analytic_1d(UNIT, 1.0, 0.1))


def test_omega_analytic_warns_below_quadratic():
    with pytest.warns(UserWarning):
        omega_analytic_1d(AttenuationModel(alpha=1.5), 1.0, 0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        omega_analytic_1d(UNIT, 1.0, 0.1)


def test_omega_dual_noise_examples():
    assert omega_dual_noise(1.0, 2.0, 1.0, 0.05, 0.05, 6.5) == pytest.approx(105.625)
    model = AttenuationModel(c=0.7, lam=0.3, alpha=2.4)
    assert omega_dual_noise(0.3, 2.4, 0.7, 0.0, 0.02, 3.0) == pytest.approx(
        omega_analytic_1d(model, 3.0, 0.02), rel=1e-12)
    assert omega_dual_noise(1.0, 2.0, 1.0, 0.1, 0.1, 6.5) == pytest.approx(105.625 / 2)


def test_omega_area_examples():
    assert omega_area_2d(26.0 ** 2, 0.085, 0.085, 25) == pytest.approx(1191.3, abs=0.1)
    s = math.sqrt(676 / (math.pi * 25))
    assert omega_area_2d(676, s, s, 25) == pytest.approx(1.0)
    assert omega_area_2d(676, 0.05, 0.05, 25) == pytest.approx(4 * omega_area_2d(676, 0.1, 0.1, 25))
    with pytest.raises(InfiniteOmega):
        omega_area_2d(676, 0.0, 0.1, 25)


def test_omega_report_validation():
    with pytest.raises(ValueError):
        OmegaReport(omega=0.0, method="pairwise")
    with pytest.raises(ValueError):
        OmegaReport(omega=1.0, method="made-up")
    d = OmegaReport(omega=3.0, method="analytic", force_range=(0.1, 1.0)).to_dict()
    assert d["force_range"] == [0.1, 1.0]


def test_device_omega_constant_table_matches_analytic():
    model = AttenuationModel(c=1.0, lam=0.025, alpha=2.0)
    tab = {"c": 1.0, "g": [0.1, 0.5, 1.0], "lambda": [0.025] * 3, "alpha": [2.0] * 3}
    rep = device_omega([tab] * 6, 0.0, 0.002, 6.5)
    assert rep.method == "dual-noise"
    assert rep.force_range == (0.02, 1.5)
    assert len(rep.per_force_curve) == 75
    assert rep.omega == pytest.approx(omega_analytic_1d(model, 6.5, 0.002), rel=1e-12)


def test_device_omega_rising_alpha_gives_rising_curve():
    tab = {"c": 1.0, "g": [0.1, 1.5], "lambda": [0.025, 0.025], "alpha": [2.0, 2.5]}
    curve = np.array(device_omega([tab], 0.01, 0.002, 6.5).per_force_curve)
    assert np.all(np.diff(curve[:, 1]) >= 0)


@given(c=st.floats(0.1, 5), lam=st.floats(0.01, 5), alpha=st.floats(2.0, 5.0),
       D=st.floats(0.1, 20), sigma=st.floats(1e-4, 1.0))
def test_consistency_chain(c, lam, alpha, D, sigma):
    model = AttenuationModel(c=c, lam=lam, alpha=alpha)
    chained = omega_pairwise(D, 2, approx_sigma_p(model, D, D / 2, sigma))
    assert chained == pytest.approx(omega_analytic_1d(model, D, sigma), rel=1e-12)


@given(lam=st.floats(0.01, 5), alpha=st.floats(2.0, 4.0), D=st.floats(2.0, 10),
       sigma=st.floats(1e-3, 1.0), bump=st.floats(1.01, 2.0))
def test_omega_monotone(lam, alpha, D, sigma, bump):
    base = omega_analytic_1d(AttenuationModel(lam=lam, alpha=alpha), D, sigma)
    assert omega_analytic_1d(AttenuationModel(lam=lam * bump, alpha=alpha), D, sigma) >= base
    assert omega_analytic_1d(AttenuationModel(lam=lam, alpha=alpha * bump), D, sigma) >= base
    assert omega_analytic_1d(AttenuationModel(lam=lam, alpha=alpha), D * bump, sigma) >= base
    assert omega_analytic_1d(AttenuationModel(lam=lam, alpha=alpha), D, sigma * bump) < base


# -- multiple contacts ----------------------------------------------------------------

def two(p1, p2, force=1.2):
    return [ContactEvent(p1, force), ContactEvent(p2, force)]


def test_far_contacts_discriminable():
    v = discriminable_two_contacts_1d(DEVICE, LINE6, two(3.0, 29.5))
    assert v.discriminable and v.oracle_discriminable
    assert v.rule_basis["n_shared"] == 0
    assert v.rule_basis["n_between"] == 4


def test_contacts_sharing_a_taxel_not_discriminable():
    v = discriminable_two_contacts_1d(DEVICE, LINE6, two(8.0, 16.0))
    assert v.n_shared == 1
    assert not v.discriminable
    assert v.spurious_points


def test_identical_contacts_not_discriminable():
    v = discriminable_two_contacts_1d(DEVICE, LINE6, two(10.0, 10.0))
    assert v.n_between == 0
    assert not v.discriminable


def test_discrimination_rejects_2d():
    with pytest.raises(ValueError):
        discriminable_two_contacts_1d(DEVICE, TaxelLayout(np.zeros((1, 2))), two(0, 1))


def test_spurious_examples():
    assert spurious_intersections(DEVICE, LINE6, [ContactEvent(10.0, 1.2)]) == []
    assert spurious_intersections(DEVICE, LINE6, two(3.0, 24.0)) == []
    spur = spurious_intersections(DEVICE, LINE6, two(9.0, 19.0))
    assert len(spur) >= 1
    assert all(min(abs(p - 9.0), abs(p - 19.0)) > 0.05 for p in spur)


def test_spurious_three_contacts_and_limit():
    contacts = [ContactEvent(1.0, 1.2), ContactEvent(16.0, 1.2), ContactEvent(31.0, 1.2)]
    assert spurious_intersections(DEVICE, LINE6, contacts) == []
    with pytest.raises(ComplexityLimit):
        spurious_intersections(DEVICE, LINE6, contacts + [ContactEvent(5.0, 1.0)])


def test_decoder_recovers_single_contact():
    r = np.maximum(0, 1.4 - DEVICE.lam * (LINE6.positions - 11.3) ** 2)
    pts, explained = decode_contacts(DEVICE, LINE6, r, 1)
    assert explained
    np.testing.assert_allclose(pts[:, 0], [11.3], atol=1e-7)
    np.testing.assert_allclose(pts[:, 1], [1.4], atol=1e-7)


def test_rule_matches_oracle_on_coarse_sweep():
    rows = discrimination_sweep(DEVICE, LINE6, [1.2, 2.0], step=1.0)
    agree = np.mean([r["rule"] == r["oracle"] for r in rows])
    assert agree >= 0.95
    summary = separation_summary(rows)
    assert summary[0]["fraction"] >= summary[1]["fraction"]
    assert summary[0]["min_separation"] <= summary[1]["min_separation"]


def test_localizable_2d_examples():
    model = AttenuationModel(c=1.0, lam=1.0, alpha=2.0)
    tri = TaxelLayout(np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]]))
    two_only = ContactEvent((0.5, -0.3), 0.5)
    assert overlap_count(model, tri, two_only) == 2
    assert not localizable_2d(model, tri, two_only)
    centroid = (0.5, np.sqrt(3) / 6)
    assert localizable_2d(model, tri, ContactEvent(centroid, 5.0))
    line = TaxelLayout(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))
    assert not localizable_2d(model, line, ContactEvent((1.0, 0.2), 10.0))
    grid = TaxelLayout(np.array([[x, y] for x in range(3) for y in range(3)], dtype=float))
    assert localizable_2d(model, grid, [ContactEvent((0.2, 0.2), 3.0), ContactEvent((1.8, 1.8), 3.0)])
    assert not localizable_2d(model, grid, [ContactEvent((0.0, 0.0), 0.5), ContactEvent((2.0, 2.0), 0.5)])
