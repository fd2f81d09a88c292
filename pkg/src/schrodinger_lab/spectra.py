"""Frequency-side data: bump-sum spectra, phase functions and their norms.

Normalization: physical-side norms are defined through Plancherel as
``(2*pi)**(-n/2) * ||f_hat||_2``.  The extension operator itself is left
unnormalized (no ``(2*pi)**-n`` in front of the integral); only constants,
never exponents, depend on this choice.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import math
import warnings

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import betainc

from .errors import OverlapWarning, QuadratureError, ValidationError
from .quadrature import ball_rule, ball_volume


def annulus_contains(n, annulus, xi, pad=0.0):
    """Membership in the frequency band ``annulus = (r_min, r_max)``.

    For ``n >= 2`` this is ``r_min <= |xi| <= r_max``.  For ``n == 1`` the
    band is the positive interval ``[r_min, r_max]``.  ``pad`` shrinks the
    band from both sides (used to test whole balls).
    """
    lo, hi = annulus
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    r = xi[:, 0] if n == 1 else np.linalg.norm(xi, axis=1)
    return (r - pad >= lo - 1e-12) & (r + pad <= hi + 1e-12)


@dataclass(eq=False)
class BumpSumSpectrum:
    """``f_hat = sum_b weight_b * 1_{B(center_b, radius_b)}``."""

    dim: int
    centers: np.ndarray
    radii: np.ndarray
    weights: np.ndarray
    annulus: tuple | None = None

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float).reshape(-1, self.dim)
        count = len(self.centers)
        self.radii = np.broadcast_to(np.asarray(self.radii, dtype=float), (count,)).copy()
        self.weights = np.broadcast_to(np.asarray(self.weights, dtype=complex), (count,)).copy()
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")
        if np.any(self.radii <= 0):
            raise ValidationError("bump radii must be positive")
        if not np.all(np.isfinite(self.centers)):
            raise ValidationError("bump centers must be finite")
        if self.annulus is not None:
            self.annulus = (float(self.annulus[0]), float(self.annulus[1]))
            if count:
                inside = [annulus_contains(self.dim, self.annulus, c, pad=r)[0]
                          for c, r in zip(self.centers, self.radii)]
                if not all(inside):
                    raise ValidationError("bump leaves the declared annulus")

    @classmethod
    def from_bumps(cls, dim, bumps, annulus=None):
        """Build from an iterable of ``(center, radius, weight)``."""
        bumps = list(bumps)
        if not bumps:
            return cls(dim, np.zeros((0, dim)), np.zeros(0), np.zeros(0, complex), annulus)
        centers, radii, weights = zip(*bumps)
        return cls(dim, np.array(centers, dtype=float), np.array(radii), np.array(weights), annulus)

    def __len__(self):
        return len(self.radii)

    @property
    def bumps(self):
        return list(zip(self.centers, self.radii, self.weights))

    def volumes(self):
        return ball_volume(self.dim) * self.radii**self.dim

    def l1_bound(self):
        """``sum |w_b| vol(B_b)``; bounds the extension modulus everywhere."""
        return float(np.sum(np.abs(self.weights) * self.volumes()))

    def overlapping_pairs(self):
        if len(self) < 2:
            return []
        tree = cKDTree(self.centers)
        pairs = tree.query_pairs(2 * float(self.radii.max()), output_type="ndarray")
        if len(pairs) == 0:
            return []
        d = np.linalg.norm(self.centers[pairs[:, 0]] - self.centers[pairs[:, 1]], axis=1)
        hit = d < self.radii[pairs[:, 0]] + self.radii[pairs[:, 1]]
        return [tuple(p) for p in pairs[hit]]

    def is_disjoint(self):
        return not self.overlapping_pairs()

    def min_center_distance(self):
        if len(self) < 2:
            return math.inf
        d, _ = cKDTree(self.centers).query(self.centers, k=2)
        return float(d[:, 1].min())

    def scaled(self, c):
        return BumpSumSpectrum(self.dim, self.centers, self.radii, self.weights * c, self.annulus)

    def subset(self, mask):
        mask = np.asarray(mask)
        return BumpSumSpectrum(self.dim, self.centers[mask], self.radii[mask], self.weights[mask])

    def to_dict(self):
        return {
            "dim": self.dim,
            "bumps": [
                {"center": [float(v) for v in c], "radius": float(r), "weight": [float(w.real), float(w.imag)]}
                for c, r, w in self.bumps
            ],
            "annulus": None if self.annulus is None else list(self.annulus),
        }

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {"dim", "bumps", "annulus"}
        if unknown:
            raise ValidationError(f"unknown spectrum keys {sorted(unknown)}", reason="unknown-field")
        dim = int(data["dim"])
        bumps = [(b["center"], b["radius"], complex(*b["weight"])) for b in data["bumps"]]
        return cls.from_bumps(dim, bumps, data.get("annulus"))

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


class PhaseSpec:
    """Phase ``phi`` of the dispersion relation; the propagator uses ``x.xi + t*phi(xi)``.

    Use the constructors :meth:`paraboloid`, :meth:`scaled_paraboloid` and
    :meth:`general`.
    """

    def __init__(self, kind, A, func=None, grad=None, scale=1.0):
        self.kind = kind
        self.A = np.asarray(A, dtype=float)
        self.scale = float(scale)
        self._func = func
        self._grad = grad

    @classmethod
    def paraboloid(cls, n):
        return cls("paraboloid", np.eye(n))

    @classmethod
    def scaled_paraboloid(cls, n, R):
        """``|xi|**2 / R``, the phase of ``exp(i t Delta / R)``."""
        if R <= 0:
            raise ValidationError("R must be positive")
        return cls("scaled-paraboloid", np.eye(n) / R, scale=1.0 / R)

    @classmethod
    def general(cls, func, grad, A, check_radius=1e-3):
        """Smooth phase with ``phi(xi) = <A xi, xi> + O(|xi|^3)``.

        ``func`` maps an ``(m, n)`` array to ``(m,)``, ``grad`` to ``(m, n)``.
        ``A`` must be symmetric positive definite; the second-order Taylor
        match at the origin is checked by finite differences.
        """
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n) or np.max(np.abs(A - A.T)) > 1e-12:
            raise ValidationError("A must be a symmetric square matrix")
        if np.linalg.eigvalsh(A).min() <= 1e-12:
            raise ValidationError("A must be positive definite")
        zero = np.zeros((1, n))
        tol = 1e-6 * max(1.0, np.abs(A).max())
        if abs(func(zero)[0]) > tol or np.abs(grad(zero)).max() > tol:
            raise ValidationError("phase must vanish to first order at the origin")
        h = check_radius
        hess = np.array([(grad(h * np.eye(n)[[j]])[0] - grad(-h * np.eye(n)[[j]])[0]) / (2 * h) for j in range(n)])
        if np.max(np.abs(hess - 2 * A)) > 1e-3 * max(1.0, np.abs(A).max()):
            raise ValidationError("phase Hessian at the origin does not match 2A")
        return cls("general", A, func, grad)

    @property
    def dim(self):
        return self.A.shape[0]

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.kind == "general":
            return self._func(xi.reshape(-1, self.dim)).reshape(xi.shape[:-1])
        return self.scale * np.einsum("...i,...i->...", xi, xi)

    def gradient(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.kind == "general":
            return self._grad(xi.reshape(-1, self.dim)).reshape(xi.shape)
        return 2 * self.scale * xi

    def max_abs(self, spec, nodes=8):
        """Largest ``|phi|`` over the support of ``spec``."""
        if len(spec) == 0:
            return 0.0
        if self.kind != "general":
            return float(self.scale * np.max((np.linalg.norm(spec.centers, axis=1) + spec.radii) ** 2))
        pts, _ = ball_rule(spec.dim, nodes)
        unit = np.concatenate([pts, np.eye(spec.dim), -np.eye(spec.dim)])
        xi = spec.centers[:, None, :] + spec.radii[:, None, None] * unit[None]
        return float(np.abs(self.value(xi)).max())

    def __repr__(self):
        return f"PhaseSpec({self.kind!r}, dim={self.dim})"


def _cap_volume(n, r, h):
    h = np.clip(h, 0.0, 2 * r)
    small = np.minimum(h, 2 * r - h)
    x = np.clip((2 * r * small - small**2) / r**2, 0.0, 1.0)
    cap = 0.5 * ball_volume(n) * r**n * betainc((n + 1) / 2, 0.5, x)
    return np.where(h <= r, cap, ball_volume(n) * r**n - cap)


def lens_volume(n, r1, r2, d):
    """Volume of the intersection of two n-balls with center distance ``d``."""
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return float(ball_volume(n) * min(r1, r2) ** n)
    c1 = (d**2 + r1**2 - r2**2) / (2 * d)
    return float(_cap_volume(n, r1, r1 - c1) + _cap_volume(n, r2, r2 - (d - c1)))


def _plancherel(n):
    return (2 * np.pi) ** (-n / 2)


def spectrum_l2_norm(spec):
    """``(2 pi)^(-n/2) ||f_hat||_2`` in closed form.

    Overlapping bumps are legal but flagged with :class:`OverlapWarning`;
    the squared norm then includes the exact pairwise lens volumes.
    """
    if len(spec) == 0:
        return 0.0
    # factor out the largest weight so tiny or huge weights neither under- nor overflow
    top = float(np.abs(spec.weights).max())
    if top == 0:
        return 0.0
    w = spec.weights / top
    sq = float(np.sum(np.abs(w) ** 2 * spec.volumes()))
    pairs = spec.overlapping_pairs()
    if pairs:
        warnings.warn(f"{len(pairs)} overlapping bump pairs", OverlapWarning, stacklevel=2)
        for i, j in pairs:
            d = float(np.linalg.norm(spec.centers[i] - spec.centers[j]))
            cross = w[i] * np.conj(w[j])
            sq += 2 * float(cross.real) * lens_volume(spec.dim, spec.radii[i], spec.radii[j], d)
    return _plancherel(spec.dim) * top * math.sqrt(max(sq, 0.0))


def _sobolev_square(spec, s, nodes):
    pts, w = ball_rule(spec.dim, nodes)
    total = 0.0
    pairs = spec.overlapping_pairs()
    for b, (c, r, wt) in enumerate(spec.bumps):
        xi = c + r * pts
        weight = (1 + np.einsum("ij,ij->i", xi, xi)) ** s
        if pairs:
            inside = np.linalg.norm(xi[:, None, :] - spec.centers[None], axis=2) < spec.radii[None]
            inside[:, b] = True
            amp = np.abs(inside @ spec.weights) ** 2 / inside.sum(axis=1)
        else:
            amp = abs(wt) ** 2
        total += r**spec.dim * float(np.sum(w * weight * amp))
    return total


def sobolev_norm(spec, s, nodes=16, rtol=1e-10):
    """``(2 pi)^(-n/2) (int (1+|xi|^2)^s |f_hat|^2)^(1/2)`` by per-bump Gauss quadrature.

    The result is checked against a rule with twice the nodes; a relative
    change above ``rtol`` raises :class:`QuadratureError`.
    """
    if not math.isfinite(s):
        raise ValidationError("s must be finite")
    if s == 0:
        return spectrum_l2_norm(spec)
    if len(spec) == 0:
        return 0.0
    if not spec.is_disjoint():
        warnings.warn("overlapping bumps: Sobolev quadrature is low order", OverlapWarning, stacklevel=2)
        rtol = max(rtol, 1e-2)
    coarse = _sobolev_square(spec, s, nodes)
    fine = _sobolev_square(spec, s, 2 * nodes)
    if abs(fine - coarse) > rtol * abs(fine):
        raise QuadratureError(f"Sobolev quadrature did not converge (s={s})", change=abs(fine - coarse) / abs(fine))
    return _plancherel(spec.dim) * math.sqrt(fine)


@dataclass
class SobolevReport:
    l2_norm: float
    s_required: float
    hs_norm_at_required: float
    spectrum: BumpSumSpectrum | None = field(default=None, repr=False)

    def hs_norm(self, s):
        if self.spectrum is None:
            raise ValidationError("report was created without its spectrum")
        return sobolev_norm(self.spectrum, s)

    def to_dict(self):
        return {"l2_norm": self.l2_norm, "s_required": self.s_required,
                "hs_norm_at_required": self.hs_norm_at_required}
