"""Cap partitions of the frequency annulus and the broad/narrow dichotomy.

Caps are axis-aligned half-open cells ``[a, a + delta)^n`` of a grid
anchored at the origin.  For a ball in space-time, the significant caps
either contain a transversal ``(n+1)``-tuple (Case I) or lie close to an
affine hyperplane (Case II).
"""
from __future__ import annotations

from dataclasses import dataclass, field
import itertools
import math

import numpy as np

from .errors import DichotomyError, ValidationError
from .propagator import QuadratureConfig, extension_eval
from .quadrature import ball_grid
from .spectra import BumpSumSpectrum, PhaseSpec, annulus_contains, spectrum_l2_norm

# default exponent in the transversality threshold K**(-C)
DEFAULT_C = 2.0
# default constant in the Case II distance certificate c / K
DEFAULT_PLANE_CONSTANT = 4.0


@dataclass(eq=False)
class Cap:
    dim: int
    delta: float
    center: np.ndarray
    corner: np.ndarray  # lower corner of the cell

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.corner = np.asarray(self.corner, dtype=float)
        if not 0 < self.delta <= 1:
            raise ValidationError("delta must lie in (0, 1]")

    def contains(self, xi):
        xi = np.atleast_2d(xi)
        return np.all((xi >= self.corner) & (xi < self.corner + self.delta), axis=1)

    def corners(self):
        """The ``2**n`` vertices of the closed cell."""
        offs = np.array(list(itertools.product([0.0, 1.0], repeat=self.dim)))
        return self.corner + self.delta * offs

    def polar_box(self):
        """Axes and side lengths of the dual box of the cap's convex hull.

        The hull is ``delta x ... x delta`` along the tangent directions and
        ``delta**2`` along the normal; the polar box has the reciprocal sides.
        Columns of ``axes`` are orthonormal, the last one the unit normal.
        """
        nu = normal(self.center)
        q, _ = np.linalg.qr(np.concatenate([nu[:, None], np.eye(self.dim + 1)], axis=1))
        axes = np.concatenate([q[:, 1:self.dim + 1], nu[:, None]], axis=1)
        sides = np.array([1 / self.delta] * self.dim + [1 / self.delta**2])
        return axes, sides


def _cell_center(corner, delta, annulus, n):
    c = corner + delta / 2
    if annulus_contains(n, annulus, c)[0]:
        return c
    lo, hi = annulus
    if n == 1:
        return np.clip(c, lo, hi)
    r = np.linalg.norm(c)
    if r > hi:
        target, anchor = hi, np.clip(0.0, corner, corner + delta)
    else:
        far = np.where(np.abs(corner) > np.abs(corner + delta), corner, corner + delta)
        target, anchor = lo, far
    # point on the segment c -> anchor with radius == target (segment stays in the cell)
    d = anchor - c
    a, b, cc = d @ d, 2 * c @ d, c @ c - target**2
    s = (-b + math.sqrt(max(b * b - 4 * a * cc, 0.0))) / (2 * a) if r < lo else \
        (-b - math.sqrt(max(b * b - 4 * a * cc, 0.0))) / (2 * a)
    return c + min(max(s, 0.0), 1.0) * d


def partition_caps(n, annulus, delta):
    """Grid cells of side ``delta`` meeting the annulus in positive measure.

    Cells are ordered lexicographically by their lower corner; centers are
    moved into the annulus (staying inside the cell) when the cell midpoint
    falls outside.
    """
    lo, hi = annulus
    if not 0 < delta <= hi - lo:
        raise ValidationError("need 0 < delta <= annulus width")
    if n == 1:
        idx = np.arange(math.floor(lo / delta), math.ceil(hi / delta))
        corners = (idx * delta)[:, None]
        keep = (corners[:, 0] < hi) & (corners[:, 0] + delta > lo)
    else:
        m = math.ceil(hi / delta)
        idx = np.arange(-m, m)
        corners = np.stack(np.meshgrid(*([idx] * n), indexing="ij"), -1).reshape(-1, n) * delta
        near = np.linalg.norm(np.clip(0.0, corners, corners + delta), axis=1)
        far = np.linalg.norm(np.maximum(np.abs(corners), np.abs(corners + delta)), axis=1)
        keep = (near < hi) & (far > lo)
    return [Cap(n, delta, _cell_center(c, delta, annulus, n), c) for c in corners[keep]]


def normal(xi):
    """Unit normal ``(-2 xi, 1) / sqrt(1 + 4|xi|^2)`` of the paraboloid over ``xi``."""
    xi = np.asarray(xi, dtype=float)
    v = np.concatenate([-2 * xi, np.ones(xi.shape[:-1] + (1,))], axis=-1)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _corner_min_volume(caps):
    """``min`` over corner choices of the j-volume spanned by the normals."""
    normals = [normal(c.corners()) for c in caps]
    combos = itertools.product(*[range(len(v)) for v in normals])
    idx = np.array(list(combos))
    V = np.stack([normals[j][idx[:, j]] for j in range(len(caps))], axis=1)
    if len(caps) == V.shape[2]:
        vol = np.abs(np.linalg.det(V))
    else:
        vol = np.sqrt(np.clip(np.linalg.det(V @ V.transpose(0, 2, 1)), 0.0, None))
    return float(vol.min())


def transversality_wedge(caps):
    """``min`` over cell corners of ``|det(nu(xi'_1), ..., nu(xi'_{n+1}))|``."""
    caps = list(caps)
    if not caps:
        raise ValidationError("no caps given")
    n = caps[0].dim
    if len(caps) != n + 1 or any(c.dim != n for c in caps):
        raise ValidationError(f"need exactly {n + 1} caps of dimension {n}")
    if len({c.delta for c in caps}) != 1:
        raise ValidationError("caps must share delta")
    return _corner_min_volume(caps)


@dataclass
class CaseI:
    caps: tuple
    wedge: float


@dataclass
class CaseII:
    normal: np.ndarray
    offset: float
    active: tuple
    max_distance: float


@dataclass(eq=False)
class BallClassification:
    center: np.ndarray
    K: float
    verdict: CaseI | CaseII
    amplitudes: np.ndarray
    C: float = DEFAULT_C
    plane_constant: float = DEFAULT_PLANE_CONSTANT
    caps: list = field(default_factory=list, repr=False)

    def verify(self):
        """Recompute the certificate from the caps."""
        v = self.verdict
        if isinstance(v, CaseI):
            w = transversality_wedge([self.caps[i] for i in v.caps])
            return w > self.K ** (-self.C)
        if not v.active:
            return True
        centers = np.array([self.caps[i].center for i in v.active])
        dist = np.abs(centers @ v.normal - v.offset).max()
        return dist <= self.plane_constant / self.K + 1e-12

    def to_dict(self):
        v = self.verdict
        if isinstance(v, CaseI):
            verdict = {"case": "I", "caps": list(v.caps), "wedge": v.wedge}
        else:
            verdict = {"case": "II", "normal": v.normal.tolist(), "offset": v.offset,
                       "active": list(v.active), "max_distance": v.max_distance}
        return {"center": np.asarray(self.center).tolist(), "K": self.K, "verdict": verdict,
                "amplitudes": np.asarray(self.amplitudes).tolist()}


def _greedy_tuple(caps, active, start, n):
    chosen = [start]
    while len(chosen) < n + 1:
        best, best_w = None, -1.0
        for i in active:
            if i in chosen:
                continue
            w = _corner_min_volume([caps[j] for j in chosen + [i]])
            if w > best_w:
                best, best_w = i, w
        if best is None:
            return chosen, 0.0
        chosen.append(best)
    return chosen, _corner_min_volume([caps[j] for j in chosen])


def _fit_plane(centers):
    n = centers.shape[1]
    mean = centers.mean(axis=0)
    if len(centers) < n:
        # fewer points than the plane dimension + 1: any normal orthogonal to their span
        diffs = centers - mean
        q, _ = np.linalg.qr(np.concatenate([diffs.T, np.eye(n)], axis=1))
        nu = q[:, -1]
    else:
        _, _, vt = np.linalg.svd(centers - mean)
        nu = vt[-1]
    return nu, float(mean @ nu)


def classify_ball(ball, caps, amplitudes, K, C=DEFAULT_C, plane_constant=DEFAULT_PLANE_CONSTANT,
                  threshold_exponent=None, seeds=8, exhaustive_limit=24):
    """Broad/narrow verdict for one ball from the per-cap amplitudes at its center.

    Active caps have amplitude at least ``K**(-threshold_exponent)`` times the
    maximum (exponent ``n`` by default).  Case I is searched greedily from the
    ``seeds`` largest active caps; failing that, the active centers are fit
    by a hyperplane whose normal is their smallest principal direction.  If
    neither certificate holds, small active sets are searched exhaustively
    before :class:`DichotomyError` is raised.  A zero field yields Case II
    with no active caps.
    """
    amplitudes = np.asarray(amplitudes, dtype=float)
    if amplitudes.size == 0:
        raise ValidationError("empty amplitude table")
    if len(amplitudes) != len(caps):
        raise ValidationError("one amplitude per cap required")
    center, _radius = ball
    n = caps[0].dim
    expo = n if threshold_exponent is None else threshold_exponent
    cut = K ** (-C)

    def result(v):
        return BallClassification(np.asarray(center, float), K, v, amplitudes, C, plane_constant, list(caps))

    top = amplitudes.max()
    if top <= 0:
        return result(CaseII(np.eye(n)[-1], 0.0, (), 0.0))
    active = [int(i) for i in np.flatnonzero(amplitudes >= K ** (-expo) * top)]
    if len(active) >= n + 1:
        order = sorted(active, key=lambda i: (-amplitudes[i], i))
        for start in order[:seeds]:
            tup, w = _greedy_tuple(caps, active, start, n)
            if w > cut:
                return result(CaseI(tuple(tup), w))
    centers = np.array([caps[i].center for i in active])
    nu, off = _fit_plane(centers)
    dist = float(np.abs(centers @ nu - off).max())
    if dist <= plane_constant / K:
        return result(CaseII(nu, off, tuple(active), dist))
    if len(active) <= exhaustive_limit:
        for tup in itertools.combinations(active, n + 1):
            w = _corner_min_volume([caps[j] for j in tup])
            if w > cut:
                return result(CaseI(tuple(tup), w))
    raise DichotomyError(
        f"neither a transversal tuple (> {cut:.3g}) nor a plane within {plane_constant}/K was found; "
        f"plane distance {dist:.3g}", distance=dist)


def cap_amplitudes(spec, caps, points, quad=QuadratureConfig()):
    """``|T_alpha f|`` at each point for every cap (bumps assigned by center)."""
    phase = PhaseSpec.paraboloid(spec.dim)
    out = np.zeros((len(np.atleast_2d(points)), len(caps)))
    for j, cap in enumerate(caps):
        mask = cap.contains(spec.centers) if len(spec) else np.zeros(0, bool)
        if np.any(mask):
            out[:, j] = np.abs(extension_eval(spec.subset(mask), phase, points, quad))
    return out


class CoordinateMap:
    """``(x', t) -> (delta x' + 2 delta t xi0, delta^2 t)`` and its inverse."""

    def __init__(self, delta, xi0):
        self.delta = float(delta)
        self.xi0 = np.asarray(xi0, dtype=float)

    def __call__(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, t = pts[:, :-1], pts[:, -1:]
        d = self.delta
        return np.concatenate([d * x + 2 * d * t * self.xi0, d * d * t], axis=1)

    def inverse(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        y, s = pts[:, :-1], pts[:, -1:]
        d = self.delta
        t = s / (d * d)
        return np.concatenate([(y - 2 * d * t * self.xi0) / d, t], axis=1)


def parabolic_rescale(cap, spec):
    """Rescale a cap-supported spectrum to unit scale.

    With ``xi = xi0 + delta * zeta`` the rescaled spectrum ``g`` has unit
    norm and ``|T f(x)| = delta^(n/2) ||f|| |T g|(map(x))``.
    """
    if len(spec) == 0:
        raise ValidationError("empty spectrum")
    lo = cap.corner - 1e-12
    hi = cap.corner + cap.delta + 1e-12
    if np.any(spec.centers - spec.radii[:, None] < lo) or np.any(spec.centers + spec.radii[:, None] > hi):
        raise ValidationError("spectrum is not supported inside the cap")
    d, xi0 = cap.delta, cap.center
    norm = spectrum_l2_norm(spec)
    g = BumpSumSpectrum(spec.dim, (spec.centers - xi0) / d, spec.radii / d,
                        spec.weights * d ** (spec.dim / 2) / norm)
    return g, CoordinateMap(d, xi0)


def multilinear_norm(specs, R, points_per_axis=64, quad=QuadratureConfig(check_refinement=False),
                     return_parts=False):
    """``|| (prod_j |T f_j|)^(1/(n+1)) ||_{L^q(B_R)}`` with ``q = 2(n+1)/n``.

    ``B_R`` is the ball in ``R^(n+1)`` (space and time); the integral is a
    midpoint grid sum with ``points_per_axis`` cells across the diameter.
    The grid step must resolve the modulus: step times the diameter of the
    lifted support ``{(xi, |xi|^2)}`` stays below ``pi/2``.  With
    ``return_parts`` the individual ``||T f_j||_{L^q}`` are returned too.
    """
    from .errors import OscillationGuardError

    specs = list(specs)
    n = specs[0].dim
    if len(specs) != n + 1:
        raise ValidationError(f"need {n + 1} spectra")
    q = 2 * (n + 1) / n
    pts, weight, h = ball_grid(n + 1, R, points_per_axis)
    for s in specs:
        lifted = np.concatenate([s.centers, np.sum(s.centers**2, axis=1, keepdims=True)], axis=1)
        reach = 2 * np.max(s.radii) * (1 + 2 * np.max(np.linalg.norm(s.centers, axis=1) + s.radii))
        span = np.max(np.linalg.norm(lifted[:, None] - lifted[None], axis=2)) + reach
        if h * span > np.pi / 2:
            raise OscillationGuardError(f"grid step {h:.3g} too coarse for support diameter {span:.3g}")
    phase = PhaseSpec.paraboloid(n)
    mods = np.array([np.abs(extension_eval(s, phase, pts, quad)) for s in specs])
    prod = np.prod(mods, axis=0) ** (1 / (n + 1))
    value = float((weight * np.sum(prod**q)) ** (1 / q))
    if not return_parts:
        return value
    parts = [float((weight * np.sum(m**q)) ** (1 / q)) for m in mods]
    return value, parts
