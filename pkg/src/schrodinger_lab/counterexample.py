"""Lattice-point divergence construction for the Schroedinger maximal function.

For ``R = k**n`` the integer points ``E`` on the sphere of radius ``k``
are rotated, scaled by ``R**((n-1)/n) / 2`` and shifted by ``R/2 e1`` onto
the sphere ``(xi_1 - R/2)^2 + xi_2^2 + ... = R^2/4``.  Unit-height bumps
on the shifted points give initial data whose evolution
``exp(i t Delta / R) f`` reaches ``|E|^(1/2)`` times the bump volume on a
union of lines, so the maximal function is large on the whole unit ball
while ``||f||_2 = O(1)``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
import json
import math

import numpy as np
from scipy.special import gamma, jv

from . import direction as _direction
from .errors import ValidationError
from .lattice import LatticeShell, ScaledLattice, enumerate_shell, nearest_point, rotation_with_first_row
from .maximal import T_GUARD, l2_over_ball
from .propagator import QuadratureConfig, bump_sum_eval
from .quadrature import ball_samples, ball_volume
from .spectra import BumpSumSpectrum, SobolevReport, sobolev_norm, spectrum_l2_norm

DEFAULT_RHO = 0.02


# -- mollifier on the torus ----------------------------------------------------

def _smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.clip(u, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1 - u, 1.0)), 0.0)
    return a / (a + b)


def mollifier_profile(r, plateau, support):
    """Radial profile: 1 on ``[0, plateau]``, 0 beyond ``support``, smooth between."""
    return _smooth_step((support - np.asarray(r, dtype=float)) / (support - plateau))


def _spherical_mean(n, z):
    # average of exp(i z u) over the unit sphere in R^n, as a function of z = |omega| r
    z = np.asarray(z, dtype=float)
    nu = n / 2 - 1
    safe = np.where(z > 1e-8, z, 1.0)
    val = gamma(n / 2) * (2 / safe) ** nu * jv(nu, safe)
    return np.where(z > 1e-8, val, 1.0 - z**2 / (2 * n))


def mollifier_coefficients(n, kabs, plateau, support, nodes=None):
    """Fourier coefficients ``phi_hat(k)`` of the radial mollifier at ``|k| = kabs``.

    The support is far inside the fundamental domain, so the torus
    coefficient equals the continuous transform at ``2 pi k``; the radial
    integral is done by Gauss-Legendre on the plateau and on the transition.
    """
    kabs = np.atleast_1d(np.asarray(kabs, dtype=float))
    omega = 2 * np.pi * kabs
    if nodes is None:
        nodes = int(max(64, 4 * omega.max() * support))
    x, w = np.polynomial.legendre.leggauss(nodes)
    sphere = 2 * np.pi ** (n / 2) / gamma(n / 2)
    out = np.zeros(len(kabs))
    for lo, hi in ((0.0, plateau), (plateau, support)):
        r = lo + (hi - lo) * (x + 1) / 2
        wr = w * (hi - lo) / 2 * r ** (n - 1) * mollifier_profile(r, plateau, support)
        out += _spherical_mean(n, omega[:, None] * r[None]) @ wr
    return sphere * out


@dataclass
class MollifierReport:
    C1: float
    plateau: float
    support: float
    phi_hat_zero: float
    k_max: int
    samples: list = field(default_factory=list, repr=False)


def _cube_square_norms(n, k_max):
    """Distinct ``|k|^2`` over ``|k|_inf <= k_max`` (sumset of squares, no cube enumeration)."""
    squares = np.arange(k_max + 1) ** 2
    reach = np.zeros(1, dtype=bool)
    reach[0] = True
    for _ in range(n):
        nxt = np.zeros(len(reach) + k_max * k_max, dtype=bool)
        for q in squares:
            nxt[q:q + len(reach)] |= reach
        reach = nxt
    return np.flatnonzero(reach)


def build_mollifier(n, R, k_max=50, plateau=None, support=None):
    """Smooth bump on the torus and its measured Fourier-decay constant.

    Default radii follow the construction: plateau ``R^(-1/n) / (2 * 10^4)``,
    support ``R^(-1/n) / 10^4``.  ``C1`` is the smallest constant with
    ``|phi_hat(k)| <= C1 R^-1 (1 + R^(-1/n)|k|)^-n`` over ``|k|_inf <= k_max``.
    """
    if plateau is None:
        plateau = R ** (-1 / n) / 2e4
    if support is None:
        support = R ** (-1 / n) / 1e4
    if not 0 < plateau < support < 0.5:
        raise ValidationError("need 0 < plateau < support < 1/2")
    sq = _cube_square_norms(n, k_max)
    kabs = np.sqrt(sq.astype(float))
    phi = mollifier_coefficients(n, kabs, plateau, support)
    envelope = R * (1 + R ** (-1 / n) * kabs) ** n
    C1 = float(np.max(np.abs(phi) * envelope))
    return MollifierReport(C1, float(plateau), float(support), float(phi[0]), int(k_max),
                           list(zip(kabs.tolist(), phi.tolist())))


# -- instance ------------------------------------------------------------------

@dataclass(frozen=True)
class DirectionConfig:
    C3: float = 10.0
    trials: int = 100
    threshold_policy: object = "median"
    truncation: int | None = None
    mollifier_k_max: int = 50

    def resolved_truncation(self, n):
        if self.truncation is not None:
            return self.truncation
        t = 20
        while t > 1 and (2 * t + 1) ** n > 400_000:
            t -= 1
        return t


@dataclass(eq=False)
class CounterexampleInstance:
    dim: int
    k: int
    R: float
    shell: LatticeShell
    U: np.ndarray
    theta_cert: _direction.DirectionCertificate
    E1: np.ndarray
    rho: float
    spectrum: BumpSumSpectrum
    dual: ScaledLattice
    hyperplane_normal: np.ndarray
    seed: int = 0

    def sphere_residual(self):
        """Max relative deviation of ``E1`` from the sphere through the origin."""
        R = self.R
        lhs = (self.E1[:, 0] - R / 2) ** 2 + np.sum(self.E1[:, 1:] ** 2, axis=1)
        return float(np.max(np.abs(lhs - R**2 / 4)) / (R**2 / 4))

    def min_separation(self):
        return self.spectrum.min_center_distance()

    def to_dict(self):
        return {
            "dim": self.dim, "k": self.k, "R": self.R, "rho": self.rho, "seed": self.seed,
            "shell": self.shell.to_dict(),
            "U": self.U.tolist(),
            "theta_cert": self.theta_cert.to_dict(),
            "E1": self.E1.tolist(),
            "spectrum": self.spectrum.to_dict(),
            "dual": self.dual.to_dict(),
            "hyperplane_normal": self.hyperplane_normal.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            int(d["dim"]), int(d["k"]), float(d["R"]), LatticeShell.from_dict(d["shell"]),
            np.array(d["U"]), _direction.DirectionCertificate(**d["theta_cert"]), np.array(d["E1"]),
            float(d["rho"]), BumpSumSpectrum.from_dict(d["spectrum"]),
            ScaledLattice(d["dual"]["spacing"], np.array(d["dual"]["rotation"])),
            np.array(d["hyperplane_normal"]), int(d.get("seed", 0)),
        )

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def build_theorem2_instance(n, k, rho=DEFAULT_RHO, seed=0, direction_config=DirectionConfig()):
    """Assemble the lattice construction for ``R = k**n``.

    The dense direction ``theta`` is searched with the mollifier's ``C1``;
    ``U`` is orthogonal with ``U.T @ e1 = theta`` so that the dual lattice
    ``4 pi R^(-(n-1)/n) U(Z^n)`` swept along ``e1`` winds along ``theta``.
    """
    if n < 2 or k < 1:
        raise ValidationError("need n >= 2 and k >= 1")
    R = k**n
    shell = enumerate_shell(n, k * k)
    if len(shell) == 0:
        raise ValidationError(f"no integer points of norm {k} in dimension {n}", reason="empty-shell")
    scale = 0.5 * k ** (n - 1)  # R^((n-1)/n) / 2
    gap = scale * shell.min_gap()
    if not 0 < rho < gap / 2:
        raise ValidationError(f"rho={rho} must lie in (0, {gap / 2:.4g}) for disjoint bumps",
                              reason="rho-too-large")
    dc = direction_config
    moll = build_mollifier(n, R, dc.mollifier_k_max)
    cert = _direction.find_direction(n, R, moll.C1, dc.C3, dc.threshold_policy, dc.trials, seed,
                                     dc.resolved_truncation(n))
    U = rotation_with_first_row(cert.theta, seed)
    E1 = scale * (shell.points.astype(float) @ U.T)
    E1[:, 0] += R / 2
    spectrum = BumpSumSpectrum(n, E1, rho, len(E1) ** -0.5)
    dual = ScaledLattice(scale, U).dual()
    nu = np.zeros(n + 1)
    nu[0], nu[-1] = 1 / math.sqrt(2), -1 / math.sqrt(2)
    return CounterexampleInstance(n, k, float(R), shell, U, cert, E1, float(rho), spectrum, dual, nu, seed)


def carrier_phase_residual(inst, x):
    """Distance of ``x.xi - (R/2) x_1`` to ``2 pi Z``, maximized over ``xi`` in ``E1``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    ph = x @ inst.E1.T - inst.R / 2 * x[:, :1]
    return np.abs(ph - 2 * np.pi * np.round(ph / (2 * np.pi))).max(axis=1)


# -- verification --------------------------------------------------------------

@dataclass
class LowerBoundReport:
    min_ratio_on_good_set: float
    max_ratio_on_good_set: float
    max_refinement_change: float
    density_gap: float
    density_target: float
    l2_maximal_estimate: float
    l2_maximal_stderr: float
    oracle_not_above_sup: bool
    good_set_samples: int
    density_samples: int
    maximal_samples: int
    t_grid_points: int

    def to_dict(self):
        return asdict(self)


def _dual_points_near_origin(lat, radius):
    m = int(math.floor(radius / lat.spacing)) + 1
    axis = np.arange(-m, m + 1)
    z = np.stack(np.meshgrid(*([axis] * lat.dim), indexing="ij"), -1).reshape(-1, lat.dim)
    pts = lat.point(z)
    return pts[np.linalg.norm(pts, axis=1) <= radius]


def segment_distance(lat, x, half_length, steps=None):
    """Distance from each ``x`` to ``lattice + [-half_length, half_length] e1``.

    Candidate lattice points come from :func:`.lattice.nearest_point` along
    a grid on the segment; the exact point-to-segment distance is then
    minimized over the candidates.  Returns ``(distance, u)`` where
    ``x - u e1`` is closest to the lattice.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if steps is None:
        steps = int(math.ceil(4 * half_length / lat.spacing)) + 1
    us = np.linspace(-half_length, half_length, steps)
    best = np.full(len(x), np.inf)
    best_u = np.zeros(len(x))
    for u in us:
        shifted = x.copy()
        shifted[:, 0] -= u
        p, _ = nearest_point(lat, shifted)
        # closest point of the segment {x - s e1} to p
        s = np.clip(x[:, 0] - p[:, 0], -half_length, half_length)
        q = x.copy()
        q[:, 0] -= s
        d = np.linalg.norm(q - p, axis=1)
        better = d < best
        best[better], best_u[better] = d[better], s[better]
    return best, best_u


def verify_lower_bound(inst, sample_count=500, quad=QuadratureConfig(), seed=0, C=1.0,
                       density_samples=None, maximal_samples=32,
                       maximal_quad=QuadratureConfig(nodes_per_axis=4, check_refinement=False)):
    """Sampled verification of the construction.

    (a) ``|field| / (|E1|^(1/2) vol(B_rho))`` on the good set: dual-lattice
        points near the origin, moved by ``s nu`` with ``|s| <= C`` and
        perturbed within ``1/(100 R)``; evaluated with the refinement gate.
    (b) Worst distance from uniform ``x`` in ``B_1`` to the projected good
        set ``dual + [-C/sqrt 2, C/sqrt 2] e1``.
    (c) Monte-Carlo ``||sup_{|t|<C} |field| ||_{L^2(B_1)} / ||f||_2`` using
        a guarded t-grid plus the line parameter of (b) as an oracle time.
    """
    if sample_count < 1:
        raise ValidationError("empty sample")
    n, R = inst.dim, inst.R
    rng = np.random.default_rng(seed)
    bump_vol = ball_volume(n, inst.rho)
    peak = len(inst.E1) ** 0.5 * bump_vol

    anchors = _dual_points_near_origin(inst.dual, 1.0)
    z = anchors[rng.integers(len(anchors), size=sample_count)]
    s = rng.uniform(-C, C, sample_count)
    pts = np.concatenate([z, np.zeros((sample_count, 1))], axis=1) + s[:, None] * inst.hyperplane_normal
    pts += ball_samples(n + 1, 1 / (100 * R), sample_count, rng)
    vals, change = bump_sum_eval(inst, pts, quad, return_change=True)
    ratio = np.abs(vals) / peak

    dcount = sample_count if density_samples is None else density_samples
    xs = ball_samples(n, 1.0, dcount, rng)
    dist, u = segment_distance(inst.dual, xs, C / math.sqrt(2))

    msel = slice(0, min(maximal_samples, dcount))
    xm, t_oracle = xs[msel], -u[msel]
    max_phase = float(np.max(np.sum((np.abs(inst.E1) + inst.rho) ** 2, axis=1)) / R)
    steps = max(1, math.ceil(1.05 * 2 * C * max_phase / T_GUARD))
    tgrid = np.linspace(-C, C, steps + 1)
    sup = np.empty(len(xm))
    oracle_ok = True
    for i, x in enumerate(xm):
        times = np.append(tgrid, t_oracle[i])
        p = np.concatenate([np.repeat(x[None], len(times), 0), times[:, None]], axis=1)
        a = np.abs(bump_sum_eval(inst, p, maximal_quad))
        sup[i] = a.max()
        oracle_ok &= bool(a[-1] <= sup[i])
    est = l2_over_ball(sup, 1.0, n, "monte-carlo")
    norm = spectrum_l2_norm(inst.spectrum)
    return LowerBoundReport(
        float(ratio.min()), float(ratio.max()), float(change.max()),
        float(dist.max()), 1 / (100 * R),
        est.value / norm, est.stderr / norm, oracle_ok,
        sample_count, dcount, len(xm), len(tgrid) + 1,
    )


def obstruction_exponent(size, R):
    """``log(size^(1/2)) / log R``; zero for a single point."""
    if size <= 1:
        return 0.0
    return math.log(size) / (2 * math.log(R))


def sobolev_obstruction(inst, nodes=None):
    """Exponent ``s`` with ``R^s = |E1|^(1/2)`` and the norms of ``f`` at that ``s``."""
    s = obstruction_exponent(len(inst.E1), inst.R)
    if nodes is None:
        nodes = {1: 16, 2: 16, 3: 8}.get(inst.dim, 4)
    return SobolevReport(spectrum_l2_norm(inst.spectrum), s,
                         sobolev_norm(inst.spectrum, s, nodes=nodes), inst.spectrum)
