"""Maximal-in-time functionals, ball L^2 norms and scaling-exponent fits."""
from __future__ import annotations

from dataclasses import dataclass
import math
from typing import NamedTuple
import warnings

import numpy as np

from .errors import OscillationGuardError, OverlapWarning, ValidationError
from .propagator import QuadratureConfig, extension_eval
from .quadrature import ball_grid, ball_samples, ball_volume
from .spectra import BumpSumSpectrum, PhaseSpec, spectrum_l2_norm

# t-step times the largest phase value must stay below this
T_GUARD = np.pi / 4

WINDOW_KINDS = ("unit", "short", "rescaled", "symmetric")


@dataclass(frozen=True)
class TimeWindow:
    """Time interval of the maximal function and its grid resolution.

    ``unit``: 0 < t < 1, ``short``: 0 < t < 1/R, ``rescaled``: 0 < t < R,
    ``symmetric``: |t| < C.  The grid has ``resolution`` intervals, so
    doubling the resolution refines the grid in place.
    """

    kind: str
    resolution: int
    R: float | None = None
    C: float = 1.0

    def __post_init__(self):
        if self.kind not in WINDOW_KINDS:
            raise ValidationError(f"unknown window kind {self.kind!r}")
        if self.resolution < 1:
            raise ValidationError("window resolution must be >= 1")
        if self.kind in ("short", "rescaled") and not (self.R and self.R > 0):
            raise ValidationError(f"window {self.kind!r} needs R > 0")
        if self.kind == "symmetric" and self.C <= 0:
            raise ValidationError("window C must be positive")

    def bounds(self):
        return {
            "unit": (0.0, 1.0),
            "short": (0.0, 1.0 / (self.R or 1.0)),
            "rescaled": (0.0, float(self.R or 1.0)),
            "symmetric": (-self.C, self.C),
        }[self.kind]

    def grid(self):
        lo, hi = self.bounds()
        return np.linspace(lo, hi, self.resolution + 1)

    def step(self):
        lo, hi = self.bounds()
        return (hi - lo) / self.resolution

    def refined(self, factor=2):
        return TimeWindow(self.kind, self.resolution * factor, self.R, self.C)

    def check(self, max_phase):
        if self.step() * max_phase >= T_GUARD:
            raise OscillationGuardError(
                f"t-step {self.step():.3g} times max phase {max_phase:.3g} exceeds pi/4; "
                f"raise the window resolution", reason="t-grid-guard")

    def to_dict(self):
        return {"kind": self.kind, "resolution": self.resolution, "R": self.R, "C": self.C}


def guarded_window(kind, max_phase, R=None, C=1.0, margin=1.05):
    """Coarsest window of ``kind`` that passes the t-grid guard."""
    w = TimeWindow(kind, 1, R, C)
    lo, hi = w.bounds()
    res = max(1, math.ceil(margin * (hi - lo) * max_phase / T_GUARD))
    return TimeWindow(kind, res, R, C)


def sup_over_time(spec, phase, x_points, window, quad=QuadratureConfig()):
    """``max_t |T f(x, t)|`` over the window grid, for each ``x``."""
    window.check(phase.max_abs(spec))
    x = np.atleast_2d(np.asarray(x_points, dtype=float))
    t = window.grid()
    out = np.empty(len(x))
    per = max(1, 20000 // len(t))
    for i in range(0, len(x), per):
        xs = x[i:i + per]
        pts = np.concatenate([np.repeat(xs, len(t), axis=0), np.tile(t, len(xs))[:, None]], axis=1)
        vals = np.abs(extension_eval(spec, phase, pts, quad))
        out[i:i + per] = vals.reshape(len(xs), len(t)).max(axis=1)
    return out


class BallL2(NamedTuple):
    value: float
    stderr: float


def l2_over_ball(values, radius, dim, scheme="grid"):
    """``||v||_{L^2(B)}`` from samples of ``v`` on the ball of ``radius`` in ``R^dim``.

    ``grid``: ``values`` sit on a ball-masked grid with equal cells whose
    total is the exact ball volume (see :func:`.quadrature.ball_grid`).
    ``monte-carlo``: ``values`` sit at uniform samples; the estimate is
    ``vol^(1/2) * rms`` with a delta-method standard error.
    """
    v = np.abs(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValidationError("need at least one sample")
    vol = ball_volume(dim, radius)
    sq = v**2
    mean = float(np.mean(sq))
    value = math.sqrt(vol * mean)
    if scheme == "grid":
        return BallL2(value, 0.0)
    if scheme != "monte-carlo":
        raise ValidationError(f"unknown scheme {scheme!r}")
    if v.size < 2 or mean == 0:
        return BallL2(value, 0.0)
    se_mean = float(np.std(sq, ddof=1)) / math.sqrt(v.size)
    return BallL2(value, math.sqrt(vol) * se_mean / (2 * math.sqrt(mean)))


def random_spectrum(n, seed, bumps=64, rho=0.02, annulus=(1.0, 2.0)):
    """Unit-norm bump sum: uniform centers in the annulus, unit moduli, random phases.

    Bumps may overlap (always in low dimension); norms stay exact.
    """
    rng = np.random.default_rng(seed)
    lo, hi = annulus[0] + rho, annulus[1] - rho
    if n == 1:
        centers = rng.uniform(lo, hi, (bumps, 1))
    else:
        d = rng.standard_normal((bumps, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = (lo**n + rng.random(bumps) * (hi**n - lo**n)) ** (1 / n)
        centers = d * r[:, None]
    weights = np.exp(2j * np.pi * rng.random(bumps))
    spec = BumpSumSpectrum(n, centers, rho, weights, annulus)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OverlapWarning)
        return spec.scaled(1.0 / spectrum_l2_norm(spec))


def _ball_points(n, radius, scheme, count, seed):
    if scheme == "grid":
        per_axis = max(2, round(count ** (1 / n)))
        pts, _, _ = ball_grid(n, radius, per_axis)
        return pts
    return ball_samples(n, radius, count, np.random.default_rng(seed))


def maximal_ratio(spec, phase, window, radius, quad=QuadratureConfig(), scheme="monte-carlo",
                  x_count=256, seed=0):
    """``||sup_t |T f|||_{L^2(B_radius)} / ||f||_2`` for one spectrum."""
    x = _ball_points(spec.dim, radius, scheme, x_count, seed)
    sup = sup_over_time(spec, phase, x, window, quad)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OverlapWarning)
        norm = spectrum_l2_norm(spec)
    return l2_over_ball(sup, radius, spec.dim, scheme).value / norm


def operator_norm_estimate(n, R, window, trials, seed, quad=QuadratureConfig(), ball_radius=None,
                           phase=None, forced=(), scheme="monte-carlo", x_count=256, bumps=64,
                           rho=0.02, annulus=(1.0, 2.0), return_trials=False):
    """Lower estimate of the maximal operator norm ``B(R)``.

    Maximum of :func:`maximal_ratio` over ``trials`` random spectra (trial
    ``i`` seeded ``seed + i``) and any ``forced`` spectra.  The ball
    defaults to ``B_R`` and the phase to the paraboloid.
    """
    if trials < 1 and not forced:
        raise ValidationError("trials must be >= 1")
    radius = R if ball_radius is None else ball_radius
    phase = PhaseSpec.paraboloid(n) if phase is None else phase
    values = []
    for i in range(trials):
        spec = random_spectrum(n, seed + i, bumps, rho, annulus)
        values.append(maximal_ratio(spec, phase, window, radius, quad, scheme, x_count, seed))
    for spec in forced:
        values.append(maximal_ratio(spec, phase, window, radius, quad, scheme, x_count, seed))
    best = max(values)
    return (best, values) if return_trials else best


@dataclass
class ExponentFit:
    samples: list
    alpha: float
    intercept: float
    max_residual: float

    def to_dict(self):
        return {"samples": [list(s) for s in self.samples], "alpha": self.alpha,
                "intercept": self.intercept, "max_residual": self.max_residual}


def fit_exponent(samples):
    """Least-squares slope of ``log value`` against ``log R``."""
    samples = [(float(r), float(v)) for r, v in samples]
    if len({r for r, _ in samples}) < 2:
        raise ValidationError("need at least two distinct R")
    if any(v <= 0 or r <= 0 for r, v in samples):
        raise ValidationError("R and values must be positive", reason="nonpositive-value")
    lr = np.log([r for r, _ in samples])
    lv = np.log([v for _, v in samples])
    A = np.stack([lr, np.ones_like(lr)], axis=1)
    (alpha, intercept), *_ = np.linalg.lstsq(A, lv, rcond=None)
    resid = lv - (alpha * lr + intercept)
    return ExponentFit(samples, float(alpha), float(intercept), float(np.abs(resid).max()))
