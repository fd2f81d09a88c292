"""Product Gauss rules on the unit ball in hyperspherical coordinates.

The radial factor uses Gauss-Jacobi nodes for the weight ``r**(n-1)``, each
polar angle uses Gauss-Jacobi nodes in ``cos(phi)`` for the weight
``sin(phi)**m``, and the azimuth uses the periodic trapezoid rule.  The
ball boundary is therefore integrated exactly and smooth integrands
converge spectrally in the node count.
"""
from functools import lru_cache
import math

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


def ball_volume(n, radius=1.0):
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * radius**n


@lru_cache(maxsize=64)
def _sphere_rule(d, nodes):
    # rule on S^{d-1} in R^d, d >= 2
    if d == 2:
        ang = 2 * np.pi * (np.arange(nodes) + 0.5) / nodes
        pts = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        return pts, np.full(nodes, 2 * np.pi / nodes)
    a = (d - 3) / 2
    u, wu = roots_jacobi(nodes, a, a)
    sub_pts, sub_w = _sphere_rule(d - 1, nodes)
    s = np.sqrt(1 - u**2)
    pts = np.concatenate(
        [u[:, None, None] * np.ones((1, len(sub_w), 1)), s[:, None, None] * sub_pts[None]],
        axis=2,
    ).reshape(-1, d)
    w = (wu[:, None] * sub_w[None]).reshape(-1)
    return pts, w


@lru_cache(maxsize=64)
def _ball_rule(n, nodes):
    if n == 1:
        x, w = roots_legendre(nodes)
        return x[:, None], w
    u, wu = roots_jacobi(nodes, 0.0, n - 1)
    r = (1 + u) / 2
    wr = wu / 2**n
    sph, wsph = _sphere_rule(n, nodes)
    pts = (r[:, None, None] * sph[None]).reshape(-1, n)
    w = (wr[:, None] * wsph[None]).reshape(-1)
    return pts, w


def ball_rule(n, nodes):
    """Nodes and weights integrating over the unit ball of R^n.

    ``nodes`` is the count per coordinate axis, so the rule has
    ``nodes**n`` points.  Returned arrays are read-only and cached.
    """
    if n < 1 or nodes < 2:
        raise ValueError("need n >= 1 and nodes >= 2")
    pts, w = _ball_rule(int(n), int(nodes))
    pts.setflags(write=False)
    w.setflags(write=False)
    return pts, w


def ball_grid(dim, radius, points_per_axis):
    """Midpoints of a cubic grid masked to the ball, with equal weights.

    The weights sum to the exact ball volume, so constant fields integrate
    exactly.
    """
    h = 2 * radius / points_per_axis
    axis = -radius + h * (np.arange(points_per_axis) + 0.5)
    mesh = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    pts = mesh[np.einsum("ij,ij->i", mesh, mesh) <= radius**2]
    return pts, ball_volume(dim, radius) / len(pts), h


def ball_samples(dim, radius, count, rng):
    """Uniform samples in the ball."""
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / dim)
    return g * r[:, None]
