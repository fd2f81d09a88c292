"""Integer points on spheres, rotated cubic lattices and nearest-point queries."""
from __future__ import annotations

from dataclasses import dataclass
import csv
import io
import json
import math

import numpy as np

from .errors import EnumerationBudgetError, ValidationError

# cap on the number of partial vectors held during enumeration
ENUMERATION_BUDGET = 20_000_000


@dataclass(eq=False)
class LatticeShell:
    dim: int
    m: int
    points: np.ndarray

    def __len__(self):
        return len(self.points)

    def min_gap(self):
        """Smallest distance between two distinct shell points."""
        if len(self.points) < 2:
            return math.inf
        p = self.points.astype(np.int64)
        best = None
        for i in range(len(p) - 1):
            d = np.einsum("ij,ij->i", p[i + 1:] - p[i], p[i + 1:] - p[i]).min()
            best = d if best is None else min(best, d)
        return math.sqrt(best)

    def to_dict(self):
        return {"dim": self.dim, "m": self.m, "points": self.points.tolist()}

    @classmethod
    def from_dict(cls, data):
        pts = np.asarray(data["points"], dtype=np.int64).reshape(-1, int(data["dim"]))
        return cls(int(data["dim"]), int(data["m"]), pts)

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def _enumerate_ball(n, m, exact):
    """Integer vectors with ``|p|^2 <= m`` (or ``== m`` when ``exact``).

    Coordinates are appended one at a time; each extension keeps only the
    values whose square fits in the remaining budget ``m - partial``.
    """
    partial = np.zeros((1, 0), dtype=np.int64)
    sq = np.zeros(1, dtype=np.int64)
    for i in range(n):
        last = i == n - 1
        if last and exact:
            rest = m - sq
            root = np.array([math.isqrt(int(v)) for v in rest], dtype=np.int64)
            hit = root * root == rest
            pos = np.flatnonzero(hit)
            neg = pos[root[pos] > 0]
            idx = np.concatenate([pos, neg])
            col = np.concatenate([root[pos], -root[neg]])
            partial = np.concatenate([partial[idx], col[:, None]], axis=1)
            sq = np.full(len(idx), m, dtype=np.int64)
            break
        # each row may take |v| <= isqrt(m - partial); count before allocating
        bound = np.array([math.isqrt(int(v)) for v in m - sq], dtype=np.int64)
        per_row = 2 * bound + 1
        total = int(per_row.sum())
        if total > ENUMERATION_BUDGET:
            raise EnumerationBudgetError(
                f"enumeration of |p|^2 <= {m} in dimension {n} exceeds budget", m=m, dim=n)
        rows = np.repeat(np.arange(len(sq)), per_row)
        starts = np.cumsum(per_row) - per_row
        col = np.arange(total, dtype=np.int64) - np.repeat(starts, per_row) - np.repeat(bound, per_row)
        partial = np.concatenate([partial[rows], col[:, None]], axis=1)
        sq = sq[rows] + col * col
    if len(partial):
        order = np.lexsort(partial.T[::-1])
        partial, sq = partial[order], sq[order]
    return partial, sq


def enumerate_shell(n, m):
    """All integer points with ``|p|^2 == m`` in lexicographic order."""
    if n < 1 or m < 0:
        raise ValidationError("need n >= 1 and m >= 0")
    pts, _ = _enumerate_ball(int(n), int(m), exact=True)
    return LatticeShell(int(n), int(m), pts)


def shell_count_table(n, m_max):
    """``[(m, #{p in Z^n : |p|^2 = m}) for m in 0..m_max]``."""
    if n < 2:
        raise ValidationError("shell_count_table needs n >= 2")
    _, sq = _enumerate_ball(int(n), int(m_max), exact=False)
    counts = np.bincount(sq, minlength=m_max + 1)
    return [(m, int(c)) for m, c in enumerate(counts)]


def count_table_csv(table):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["m", "count"])
    w.writerows(table)
    return buf.getvalue()


def best_shell(n, candidates):
    """Among candidate squared radii, the one with the most lattice points."""
    counts = [(len(enumerate_shell(n, m)), -m) for m in candidates]
    c, neg_m = max(counts)
    return -neg_m, c


@dataclass(eq=False)
class ScaledLattice:
    """The lattice ``spacing * U(Z^n)``."""

    spacing: float
    rotation: np.ndarray

    def __post_init__(self):
        self.rotation = np.atleast_2d(np.asarray(self.rotation, dtype=float))
        if self.spacing <= 0:
            raise ValidationError("spacing must be positive")
        n = self.rotation.shape[0]
        if np.abs(self.rotation.T @ self.rotation - np.eye(n)).max() > 1e-12:
            raise ValidationError("rotation is not orthogonal")

    @property
    def dim(self):
        return self.rotation.shape[0]

    def dual(self):
        """Vectors pairing into ``2 pi Z`` with this lattice."""
        return ScaledLattice(2 * np.pi / self.spacing, self.rotation)

    def point(self, z):
        return self.spacing * (np.asarray(z, dtype=float) @ self.rotation.T)

    def coordinates(self, x):
        return np.asarray(x, dtype=float) @ self.rotation / self.spacing

    def to_dict(self):
        return {"spacing": self.spacing, "rotation": self.rotation.tolist()}


def nearest_point(lat, x):
    """Closest lattice point to ``x`` and its distance.

    Exact for rotated cubic lattices: round in the lattice frame.  Ties go
    to the smaller coordinate.  Accepts a single vector or a stack.
    """
    x = np.asarray(x, dtype=float)
    z = np.ceil(lat.coordinates(x) - 0.5)
    p = lat.point(z)
    return p, np.linalg.norm(p - x, axis=-1)


def random_rotation(n, seed):
    """Haar-distributed orthogonal matrix from a seeded Gaussian QR."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    # one Newton step for polar orthonormality; keeps ||Q^T Q - I|| at round-off
    q = 1.5 * q - 0.5 * q @ q.T @ q
    return q


def rotation_with_first_row(theta, seed):
    """Orthogonal ``U`` with ``U.T @ e1 = theta`` (first row equal to ``theta``)."""
    theta = np.asarray(theta, dtype=float)
    n = len(theta)
    rng = np.random.default_rng(seed)
    basis = np.concatenate([theta[:, None], rng.standard_normal((n, n - 1))], axis=1)
    q, r = np.linalg.qr(basis)
    q = q * np.sign(np.diag(r))
    q[:, 0] = theta / np.linalg.norm(theta)
    q = 1.5 * q - 0.5 * q @ q.T @ q
    q[:, 0] = theta / np.linalg.norm(theta)
    return q.T
