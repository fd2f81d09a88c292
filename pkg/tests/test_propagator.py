import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from schrodinger_lab.counterexample import DirectionConfig, build_theorem2_instance
from schrodinger_lab.errors import OscillationGuardError, QuadratureError, ValidationError
from schrodinger_lab.propagator import (QuadratureConfig, SpaceTimePoint, bump_sum_eval,
                                        extension_eval)
from schrodinger_lab.quadrature import ball_grid, ball_rule, ball_volume
from schrodinger_lab.spectra import BumpSumSpectrum, PhaseSpec

PARA2 = PhaseSpec.paraboloid(2)


@pytest.fixture(scope="module")
def inst25():
    return build_theorem2_instance(2, 5, 0.02, 0, DirectionConfig(trials=20))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_ball_rule_moments(n):
    pts, w = ball_rule(n, 6)
    assert w.sum() == pytest.approx(ball_volume(n), rel=1e-13)
    # int x_1^2 over the unit ball = vol / (n + 2)
    assert np.sum(w * pts[:, 0] ** 2) == pytest.approx(ball_volume(n) / (n + 2), rel=1e-12)
    assert np.all(np.linalg.norm(pts, axis=1) <= 1)


def test_ball_grid_total_volume():
    pts, weight, h = ball_grid(3, 2.0, 20)
    assert weight * len(pts) == pytest.approx(ball_volume(3, 2.0), rel=1e-14)
    assert h == pytest.approx(0.2)


def test_constant_phase_integral():
    spec = BumpSumSpectrum(2, [[0.0, 0.0]], 0.1, [1.0])
    v = extension_eval(spec, PARA2, [SpaceTimePoint((0.0, 0.0), 0.0)])[0]
    assert v.real == pytest.approx(math.pi * 0.01, rel=1e-12) and abs(v.imag) < 1e-16


def test_origin_constructive_interference():
    spec = BumpSumSpectrum(2, [[1.0, 0.0], [0.0, 1.5], [-1.2, 0.3]], [0.05, 0.03, 0.02], [1.0, 2.0, 0.5])
    v = extension_eval(spec, PARA2, np.zeros((1, 3)))[0]
    assert v == pytest.approx(spec.l1_bound(), rel=1e-13)


def test_time_zero_bessel_oracle():
    # T f(x, 0) for a centered ball is the Fourier transform of its indicator
    rho, x = 0.3, 7.0
    spec = BumpSumSpectrum(2, [[0.0, 0.0]], rho, [1.0])
    v = extension_eval(spec, PARA2, [[x, 0.0, 0.0]], QuadratureConfig(12))[0]
    assert v.real == pytest.approx(2 * math.pi * rho * special.j1(rho * x) / x, rel=1e-9)


def test_one_dim_against_scipy_quad():
    c, rho, x, t = 1.3, 0.2, 3.0, 0.7
    spec = BumpSumSpectrum(1, [[c]], rho, [1.0])
    v = extension_eval(spec, PhaseSpec.paraboloid(1), [[x, t]], QuadratureConfig(12))[0]
    re = integrate.quad(lambda s: math.cos(x * s + t * s * s), c - rho, c + rho, epsabs=1e-14)[0]
    im = integrate.quad(lambda s: math.sin(x * s + t * s * s), c - rho, c + rho, epsabs=1e-14)[0]
    assert abs(v - complex(re, im)) < 1e-12


def test_galilean_identity():
    rng = np.random.default_rng(4)
    xi0 = np.array([1.4, -0.7])
    a = BumpSumSpectrum(2, [xi0], 0.05, [1.0])
    b = BumpSumSpectrum(2, [[0.0, 0.0]], 0.05, [1.0])
    for _ in range(10):
        x, t = rng.uniform(-5, 5, 2), rng.uniform(-2, 2)
        va = extension_eval(a, PARA2, [np.r_[x, t]])[0]
        vb = extension_eval(b, PARA2, [np.r_[x + 2 * t * xi0, t]])[0]
        assert abs(abs(va) - abs(vb)) < 1e-8 * abs(vb)


def test_general_phase_reduces_to_paraboloid():
    gen = PhaseSpec.general(lambda x: np.sum(x**2, 1), lambda x: 2 * x, np.eye(2))
    spec = BumpSumSpectrum(2, [[1.0, 0.5], [-0.3, 1.1]], 0.04, [1.0, 1j])
    pts = np.random.default_rng(0).uniform(-3, 3, (6, 3))
    assert np.allclose(extension_eval(spec, gen, pts), extension_eval(spec, PARA2, pts), rtol=0, atol=1e-15)


def test_scaled_paraboloid_is_time_rescaling():
    spec = BumpSumSpectrum(2, [[1.0, 0.5]], 0.04, [1.0])
    R = 16.0
    p = np.array([[0.4, -1.0, 8.0]])
    q = p.copy()
    q[0, -1] /= R
    assert extension_eval(spec, PhaseSpec.scaled_paraboloid(2, R), p)[0] == pytest.approx(
        extension_eval(spec, PARA2, q)[0], abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_conjugation_symmetry_and_modulus_bound(seed):
    rng = np.random.default_rng(seed)
    spec = BumpSumSpectrum(2, rng.uniform(-1.5, 1.5, (4, 2)), 0.04, rng.normal(size=4))
    p = rng.uniform(-4, 4, (3, 3))
    v = extension_eval(spec, PARA2, p)
    w = extension_eval(spec, PARA2, -p)
    assert np.allclose(w, np.conj(v), rtol=0, atol=1e-10 * spec.l1_bound())
    assert np.all(np.abs(v) <= spec.l1_bound() * (1 + 1e-12))


def test_refinement_change_reported_and_gate():
    spec = BumpSumSpectrum(2, [[1.0, 0.0]], 0.05, [1.0])
    v, change = extension_eval(spec, PARA2, [[3.0, 1.0, 0.5]], return_change=True)
    assert change[0] < 1e-6
    with pytest.raises(QuadratureError):
        extension_eval(spec, PARA2, [[30.0, 1.0, 0.5]], QuadratureConfig(2, rtol=1e-14, oscillation_guard=False))


def test_oscillation_guard_names_point():
    spec = BumpSumSpectrum(2, [[1.0, 0.0]], 0.05, [1.0])
    with pytest.raises(OscillationGuardError) as exc:
        extension_eval(spec, PARA2, [[0.0, 0.0, 0.0], [500.0, 0.0, 0.0]])
    assert "point 1" in str(exc.value)


def test_point_validation():
    spec = BumpSumSpectrum(2, [[1.0, 0.0]], 0.05, [1.0])
    with pytest.raises(ValidationError):
        extension_eval(spec, PARA2, [[0.0, 0.0]])
    with pytest.raises(ValidationError):
        extension_eval(spec, PARA2, [[0.0, np.nan, 0.0]])
    with pytest.raises(ValidationError):
        QuadratureConfig(1)


def test_threads_do_not_change_results():
    rng = np.random.default_rng(1)
    spec = BumpSumSpectrum(2, rng.uniform(-1.5, 1.5, (40, 2)), 0.01, rng.normal(size=40))
    p = rng.uniform(-3, 3, (300, 3))
    a = extension_eval(spec, PARA2, p, QuadratureConfig(threads=1))
    b = extension_eval(spec, PARA2, p, QuadratureConfig(threads=4))
    assert np.array_equal(a, b)


def test_bump_sum_matches_extension(inst25):
    rng = np.random.default_rng(9)
    p = np.concatenate([rng.uniform(-3, 3, (20, 2)), rng.uniform(0, 1, (20, 1))], axis=1)
    a = bump_sum_eval(inst25, p)
    b = extension_eval(inst25.spectrum, PhaseSpec.scaled_paraboloid(2, inst25.R), p)
    assert np.max(np.abs(a - b)) < 1e-8 * np.max(np.abs(b))


def test_bump_sum_at_origin(inst25):
    v = bump_sum_eval(inst25, np.zeros((1, 3)))[0]
    assert v == pytest.approx(len(inst25.E1) ** 0.5 * ball_volume(2, 0.02), rel=1e-12)


def test_single_point_modulus_independent_of_frequency():
    class One:
        rho, R = 0.02, 25.0

        def __init__(self, xi):
            self.E1 = np.array([xi])

    a = bump_sum_eval(One([20.0, 5.0]), np.zeros((1, 3)))[0]
    b = bump_sum_eval(One([3.0, 1.0]), np.zeros((1, 3)))[0]
    assert abs(a) == pytest.approx(abs(b), rel=1e-14)
