import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from schrodinger_lab.errors import OverlapWarning, ValidationError
from schrodinger_lab.spectra import (BumpSumSpectrum, PhaseSpec, lens_volume, sobolev_norm,
                                     spectrum_l2_norm)


def single(n=2, rho=0.1, center=None, weight=1.0):
    center = np.zeros(n) if center is None else center
    return BumpSumSpectrum(n, [center], rho, [weight])


def chord_oracle(centers, r):
    """Area of a union of disjoint discs from quad of chord lengths (independent of ball_volume)."""
    total = 0.0
    for cx, _ in centers:
        val, _ = integrate.quad(lambda x: 2 * math.sqrt(max(r * r - (x - cx) ** 2, 0.0)), cx - r, cx + r,
                                epsabs=1e-15, epsrel=1e-13)
        total += val
    return total


def test_single_bump_norm_closed_form():
    assert spectrum_l2_norm(single()) == pytest.approx(math.sqrt(math.pi * 0.01) / (2 * math.pi), rel=1e-14)


def test_empty_spectrum_norm():
    assert spectrum_l2_norm(BumpSumSpectrum.from_bumps(3, [])) == 0.0


def test_two_disjoint_bumps_against_chord_quadrature():
    two = BumpSumSpectrum(2, [[0.0, 0.0], [0.0, 1.0]], 0.1, [1.0, 1.0])
    got = spectrum_l2_norm(two)
    assert got == pytest.approx(math.sqrt(2) * spectrum_l2_norm(single()), rel=1e-14)
    oracle = math.sqrt(chord_oracle([(0.0, 0.0), (0.0, 1.0)], 0.1)) / (2 * math.pi)
    assert abs(got - oracle) < 1e-10


@pytest.mark.parametrize("d", [0.05, 0.1, 0.19])
def test_overlapping_norm_uses_exact_lens(d):
    r = 0.1
    spec = BumpSumSpectrum(2, [[0.0, 0.0], [d, 0.0]], r, [1.0, 1.0])
    with pytest.warns(OverlapWarning):
        got = spectrum_l2_norm(spec)
    lens = 2 * r * r * math.acos(d / (2 * r)) - d / 2 * math.sqrt(4 * r * r - d * d)
    oracle = math.sqrt(2 * math.pi * r * r + 2 * lens) / (2 * math.pi)
    assert got == pytest.approx(oracle, rel=1e-12)


def test_lens_volume_three_dim_closed_form():
    r, d = 1.0, 0.6
    assert lens_volume(3, r, r, d) == pytest.approx(math.pi * (4 * r + d) * (2 * r - d) ** 2 / 12, rel=1e-12)
    assert lens_volume(3, 1.0, 0.2, 0.1) == pytest.approx(4 / 3 * math.pi * 0.008, rel=1e-12)
    assert lens_volume(1, 1.0, 1.0, 0.5) == pytest.approx(1.5, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(re=st.floats(-50, 50), im=st.floats(-50, 50), n=st.integers(1, 4))
def test_norm_absolutely_homogeneous(re, im, n):
    rng = np.random.default_rng(n)
    spec = BumpSumSpectrum(n, rng.normal(size=(3, n)) * 10, 0.05, rng.normal(size=3) + 1j)
    c = complex(re, im)
    assert spectrum_l2_norm(spec.scaled(c)) == pytest.approx(abs(c) * spectrum_l2_norm(spec), rel=1e-12, abs=1e-300)


def test_sobolev_zero_is_l2_exactly():
    spec = BumpSumSpectrum(3, [[1.0, 0.0, 0.5], [0.0, 2.0, 0.0]], 0.07, [1.0, 2j])
    assert sobolev_norm(spec, 0) == spectrum_l2_norm(spec)


@pytest.mark.parametrize("s", [-1.0, 0.5, 1.0, 2.0])
def test_sobolev_annulus_bound(s):
    R = 20.0
    spec = single(2, rho=0.01 * R, center=np.array([R, 0.0]))
    ratio = sobolev_norm(spec, s) / spectrum_l2_norm(spec)
    target = (1 + R * R) ** (s / 2)
    assert 0.9 * target <= ratio <= 1.1 * target


def test_sobolev_one_dim_refinement_oracle():
    spec = single(1, rho=0.1, center=np.array([10.0]))
    got = sobolev_norm(spec, 1.0)
    f = lambda xi: 1 + xi * xi
    a = integrate.fixed_quad(f, 9.9, 10.1, n=20)[0]
    b = integrate.fixed_quad(f, 9.9, 10.1, n=40)[0]
    assert abs(a - b) < 1e-12
    assert got == pytest.approx(math.sqrt(b / (2 * math.pi)), rel=1e-8)


def test_sobolev_three_dim_against_radial_integral():
    # centered ball: (1+|xi|^2)^s integrated in polar coordinates
    spec = single(3, rho=0.5)
    s = 1.5
    val, _ = integrate.quad(lambda r: 4 * math.pi * r * r * (1 + r * r) ** s, 0, 0.5, epsabs=1e-15)
    assert sobolev_norm(spec, s) == pytest.approx(math.sqrt(val) / (2 * math.pi) ** 1.5, rel=1e-10)


def test_sobolev_monotone_in_s_on_high_frequencies():
    rng = np.random.default_rng(3)
    d = rng.normal(size=(6, 2))
    centers = d / np.linalg.norm(d, axis=1, keepdims=True) * rng.uniform(1.2, 3, (6, 1))
    spec = BumpSumSpectrum(2, centers, 0.05, rng.normal(size=6) + 1j * rng.normal(size=6))
    vals = [sobolev_norm(spec, s) for s in np.linspace(-1, 3, 17)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_json_round_trip_and_unknown_keys():
    spec = BumpSumSpectrum(2, [[1.0, 1.0], [-1.5, 0.0]], [0.1, 0.2], [1 + 2j, -0.5], (1.0, 2.0))
    back = BumpSumSpectrum.from_json(spec.to_json())
    assert back.to_dict() == spec.to_dict()
    d = json.loads(spec.to_json())
    assert set(d) == {"dim", "bumps", "annulus"}
    assert d["bumps"][0]["weight"] == [1.0, 2.0]
    d["colour"] = "red"
    with pytest.raises(ValidationError) as exc:
        BumpSumSpectrum.from_dict(d)
    assert exc.value.reason == "unknown-field"


def test_invalid_spectra_rejected():
    with pytest.raises(ValidationError):
        BumpSumSpectrum(2, [[0.0, 0.0]], 0.0, [1.0])
    with pytest.raises(ValidationError):
        BumpSumSpectrum(2, [[1.0, 0.0]], 0.1, [1.0], annulus=(1.0, 2.0))
    BumpSumSpectrum(2, [[1.5, 0.0]], 0.1, [1.0], annulus=(1.0, 2.0))


def test_disjointness_predicates():
    spec = BumpSumSpectrum(2, [[0.0, 0.0], [0.3, 0.0]], 0.1, [1.0, 1.0])
    assert spec.is_disjoint()
    assert spec.min_center_distance() == pytest.approx(0.3)
    assert not BumpSumSpectrum(2, [[0.0, 0.0], [0.15, 0.0]], 0.1, [1.0, 1.0]).is_disjoint()


def test_phase_spec_constructors():
    p = PhaseSpec.scaled_paraboloid(2, 4.0)
    assert p.value(np.array([2.0, 0.0])) == pytest.approx(1.0)
    assert np.allclose(p.gradient(np.array([2.0, 0.0])), [1.0, 0.0])
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    g = PhaseSpec.general(lambda x: np.einsum("ij,jk,ik->i", x, A, x) + x[:, 0] ** 3,
                          lambda x: 2 * x @ A + np.stack([3 * x[:, 0] ** 2, 0 * x[:, 0]], 1), A)
    assert g.value(np.array([[1.0, 1.0]]))[0] == pytest.approx(5.0)
    with pytest.raises(ValidationError):
        PhaseSpec.general(lambda x: -np.sum(x**2, 1), lambda x: -2 * x, -np.eye(2))
    with pytest.raises(ValidationError):
        PhaseSpec.general(lambda x: np.sum(x**2, 1), lambda x: 2 * x, np.array([[1.0, 0.2], [0.0, 1.0]]))
    with pytest.raises(ValidationError):
        PhaseSpec.general(lambda x: 3 * np.sum(x**2, 1), lambda x: 6 * x, np.eye(2))
