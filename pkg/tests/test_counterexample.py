import math

import numpy as np
import pytest
from scipy import integrate, special

from schrodinger_lab.counterexample import (DirectionConfig, build_mollifier, build_theorem2_instance,
                                            carrier_phase_residual, CounterexampleInstance,
                                            mollifier_coefficients, mollifier_profile,
                                            obstruction_exponent, segment_distance,
                                            sobolev_obstruction, verify_lower_bound)
from schrodinger_lab.errors import ValidationError
from schrodinger_lab.lattice import ScaledLattice, enumerate_shell, random_rotation
from schrodinger_lab.maximal import fit_exponent
from schrodinger_lab.propagator import bump_sum_eval
from schrodinger_lab.quadrature import ball_volume

FAST = DirectionConfig(trials=20)


@pytest.fixture(scope="module")
def inst25():
    return build_theorem2_instance(2, 5, 0.02, 0, FAST)


def test_small_instance_sizes(inst25):
    assert len(inst25.E1) == 12 and inst25.R == 25
    five = build_theorem2_instance(5, 2, 0.02, 0, DirectionConfig(trials=5))
    assert len(five.E1) == 90 and five.R == 32


@pytest.mark.parametrize("n,k", [(2, 5), (2, 13), (3, 3), (4, 2)])
def test_instance_invariants(n, k):
    inst = build_theorem2_instance(n, k, 0.02, 1, FAST)
    assert inst.sphere_residual() < 1e-9
    gap = 0.5 * k ** (n - 1) * inst.shell.min_gap()
    assert inst.min_separation() == pytest.approx(gap, rel=1e-9)
    assert inst.min_separation() > 2 * inst.rho and inst.spectrum.is_disjoint()
    assert np.allclose(inst.U.T @ np.eye(n)[0], inst.theta_cert.theta, atol=1e-13)
    assert np.abs(inst.U.T @ inst.U - np.eye(n)).max() < 1e-12
    assert inst.dual.spacing == pytest.approx(4 * math.pi * inst.R ** (-(n - 1) / n))
    assert np.linalg.norm(inst.hyperplane_normal) == pytest.approx(1.0)


def test_carrier_phases_trivial_on_dual_lattice(inst25):
    z = np.random.default_rng(0).integers(-4, 5, (30, 2))
    x = inst25.dual.point(z)
    assert carrier_phase_residual(inst25, x).max() < 1e-9


def test_builder_errors():
    with pytest.raises(ValidationError) as exc:
        build_theorem2_instance(2, 5, 10.0, 0, FAST)
    assert exc.value.reason == "rho-too-large"
    with pytest.raises(ValidationError):
        build_theorem2_instance(1, 5)


def test_instance_serialization_deterministic(inst25):
    again = build_theorem2_instance(2, 5, 0.02, 0, FAST)
    assert again.to_json() == inst25.to_json()
    back = CounterexampleInstance.from_json(inst25.to_json())
    assert back.to_json() == inst25.to_json()


def test_lower_bound_small_instance(inst25):
    rep = verify_lower_bound(inst25, sample_count=200, seed=3)
    assert 0.5 <= rep.min_ratio_on_good_set <= 1.5
    assert rep.max_ratio_on_good_set <= 1.5
    assert rep.max_refinement_change < 1e-6
    assert rep.oracle_not_above_sup
    assert rep.l2_maximal_estimate > 0 and rep.density_gap >= 0
    with pytest.raises(ValidationError):
        verify_lower_bound(inst25, sample_count=0)


def test_translation_along_normal(inst25):
    rng = np.random.default_rng(5)
    z = inst25.dual.point(rng.integers(-2, 3, (20, 2)))
    p = np.concatenate([z, np.zeros((20, 1))], axis=1)
    base = np.abs(bump_sum_eval(inst25, p))
    for s in (-1.0, -0.4, 0.3, 1.0):
        moved = np.abs(bump_sum_eval(inst25, p + s * inst25.hyperplane_normal))
        r = moved / base
        assert np.all((r >= 0.8) & (r <= 1.25))


def test_maximal_estimate_grows_with_shell_size():
    sizes, ests = [], []
    for k in (5, 25, 65):
        inst = build_theorem2_instance(2, k, 0.02, 0, FAST)
        rep = verify_lower_bound(inst, sample_count=20, maximal_samples=64)
        sizes.append(len(inst.E1))
        ests.append(rep.l2_maximal_estimate)
    assert sizes == sorted(sizes)
    for a, b in zip(ests, ests[1:]):
        assert b >= 0.8 * a


def test_segment_distance_against_dense_line():
    lat = ScaledLattice(1.3, random_rotation(2, 4))
    x = np.random.default_rng(2).uniform(-1, 1, (15, 2))
    d, u = segment_distance(lat, x, 0.7)
    for xi, di in zip(x, d):
        line = xi[None] - np.linspace(-0.7, 0.7, 4001)[:, None] * np.array([1.0, 0.0])
        z = np.round(lat.coordinates(line))
        cands = {tuple(v) for v in z.astype(int).tolist()}
        best = min(np.min(np.linalg.norm(line - lat.point(np.array(c)), axis=1)) for c in cands)
        assert di == pytest.approx(best, abs=1e-3)
        assert di <= best + 1e-12


def test_obstruction_exponents(inst25):
    assert obstruction_exponent(12, 25) == pytest.approx(math.log(12) / (2 * math.log(25)), rel=1e-15)
    assert obstruction_exponent(12, 25) == pytest.approx(0.3861, abs=2e-4)
    assert obstruction_exponent(1, 25) == 0.0
    rep = sobolev_obstruction(inst25)
    assert rep.s_required == pytest.approx(math.log(12) / (2 * math.log(25)))
    assert rep.l2_norm == pytest.approx(math.sqrt(ball_volume(2, 0.02)) / (2 * math.pi))
    assert rep.hs_norm(0) == rep.l2_norm
    # every frequency has |xi| <= R, so the H^s norm is at most (1+R^2)^(s/2) times L^2
    assert rep.l2_norm < rep.hs_norm_at_required <= (1 + 25.0**2) ** (rep.s_required / 2) * rep.l2_norm


def test_mollifier_profile_bounds():
    r = np.linspace(0, 2, 401)
    prof = mollifier_profile(r, 0.5, 1.0)
    assert np.all((prof >= 0) & (prof <= 1))
    assert np.all(prof[r <= 0.5] == 1) and np.all(prof[r >= 1.0] == 0)


@pytest.mark.parametrize("n,R", [(2, 25), (3, 27), (5, 32)])
def test_mollifier_zero_coefficient_between_volumes(n, R):
    m = build_mollifier(n, R)
    assert ball_volume(n, m.plateau) <= m.phi_hat_zero <= ball_volume(n, m.support)


def _oracle_coefficient(n, k, plateau, support):
    # radial Fourier transform by adaptive quad: 1-D cosine, 2-D J0
    w = 2 * math.pi * np.linalg.norm(k)
    if n == 1:
        f = lambda r: 2 * math.cos(w * r) * mollifier_profile(r, plateau, support)
    else:
        f = lambda r: 2 * math.pi * r * special.j0(w * r) * mollifier_profile(r, plateau, support)
    return integrate.quad(f, 0, support, points=[plateau], epsabs=1e-22, epsrel=1e-12, limit=200)[0]


def test_mollifier_decay_against_direct_quadrature():
    n, R = 2, 25
    m = build_mollifier(n, R)
    rng = np.random.default_rng(0)
    for k in [(0, 0), (1, 0), (3, 4), (50, 50), (17, 33)] + [tuple(v) for v in rng.integers(-50, 51, (10, 2))]:
        val = _oracle_coefficient(n, np.array(k, float), m.plateau, m.support)
        env = m.C1 / R * (1 + R ** (-1 / n) * np.linalg.norm(k)) ** (-n)
        assert abs(val) <= env * (1 + 1e-8)
        ours = mollifier_coefficients(n, np.array([np.linalg.norm(k)]), m.plateau, m.support)[0]
        assert ours == pytest.approx(val, rel=1e-9)


def test_mollifier_one_dim_against_direct_quadrature():
    plateau, support = 0.01, 0.03
    for k in (0, 1, 5, 20):
        ours = mollifier_coefficients(1, np.array([float(k)]), plateau, support)[0]
        assert ours == pytest.approx(_oracle_coefficient(1, np.array([k], float), plateau, support), rel=1e-9)


@pytest.mark.parametrize("n,R", [(2, 25), (3, 27)])
def test_mollifier_smoothing_width_scaling(n, R):
    support = R ** (-1 / n) / 1e4
    k = np.arange(40, 51, dtype=float)
    narrow = np.abs(mollifier_coefficients(n, k, support / 2, support)).max()
    wide = np.abs(mollifier_coefficients(n, k, 1e-12 * support, support)).max()
    assert 0.5 / 4 <= wide / narrow <= 0.5 * 4


def test_five_dim_obstruction_target_and_trend():
    # target exponent (n - 2) / (2n) for n = 5
    assert (5 - 2) / (2 * 5) == 0.3
    rows = [(k**5, len(enumerate_shell(5, k * k))) for k in (2, 3, 4, 5)]
    s = [obstruction_exponent(size, R) for R, size in rows]
    assert all(b < a for a, b in zip(s, s[1:]))
    assert abs(fit_exponent([(R, size**0.5) for R, size in rows]).alpha - 0.3) <= 0.08
    # the shell size grows like k^(n-2): r_5(k^2) / k^3 stays bounded
    ratios = [size / k**3 for (R, size), k in zip(rows, (2, 3, 4, 5))]
    assert max(ratios) / min(ratios) < 1.5
