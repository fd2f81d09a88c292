"""Dense directions: unit vectors whose lines wind densely around the torus.

A direction ``theta`` is certified by the Fourier criterion

    sum_{0 < |k|_inf <= T} (1 + R^(-1/n) |k|)^(-n) (1 + C3 R^((n-1)/n) |k.theta|)^(-2)

being small, and checked empirically by measuring how far random torus
points are from the segment ``{lambda * theta : |lambda| <= L}``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache
import math

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

from .errors import EnumerationBudgetError, SearchExhaustedError, ValidationError

CRITERION_BUDGET = 10_000_000
# relaxed density target: gap < GAP_CONSTANT * R**(-1/n)
GAP_CONSTANT = 1e-2
# constant of the strict target (impractical grid resolution); kept for reference
STRICT_GAP_CONSTANT = 1e-4


@dataclass
class DirectionCertificate:
    theta: list
    R: float
    C1: float
    C3: float
    criterion_value: float
    threshold: float
    truncation_radius: int
    trial_index: int
    empirical_max_gap: float | None = None

    def to_dict(self):
        return asdict(self)


@lru_cache(maxsize=16)
def _kgrid(n, truncation):
    count = (2 * truncation + 1) ** n - 1
    if count > CRITERION_BUDGET:
        raise EnumerationBudgetError(
            f"criterion truncation {truncation} in dimension {n} needs {count} terms", terms=count)
    axis = np.arange(-truncation, truncation + 1)
    k = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    k = k[np.any(k != 0, axis=1)].astype(float)
    k.setflags(write=False)
    return k


def _radial_factor(n, R, truncation):
    k = _kgrid(n, truncation)
    return (1 + R ** (-1 / n) * np.linalg.norm(k, axis=1)) ** (-n)


def criterion_sum(theta, n, R, C3, truncation):
    """Truncated Fourier criterion for the direction ``theta``."""
    if truncation < 0:
        raise ValidationError("truncation must be >= 0")
    if truncation == 0:
        return 0.0
    theta = np.asarray(theta, dtype=float)
    k = _kgrid(n, truncation)
    second = (1 + C3 * R ** ((n - 1) / n) * np.abs(k @ theta)) ** (-2)
    return float(np.sum(_radial_factor(n, R, truncation) * second))


def criterion_theta_average(n, R, C3, truncation):
    """The criterion with its second factor replaced by its average over uniform ``theta``.

    For a fixed ``k`` the cosine ``u = k.theta / |k|`` has density
    proportional to ``(1 - u^2)^((n-3)/2)`` on ``[-1, 1]``.
    """
    if truncation == 0:
        return 0.0
    k = _kgrid(n, truncation)
    norms = np.linalg.norm(k, axis=1)
    a = C3 * R ** ((n - 1) / n)
    uniq, inv = np.unique(np.round(norms**2).astype(np.int64), return_inverse=True)
    if n == 1:
        avg = (1 + a * np.sqrt(uniq)) ** (-2.0)
    else:
        alpha = (n - 3) / 2
        mass = integrate.quad(lambda u: (1 + u) ** alpha, 0, 1, weight="alg", wvar=(0, alpha))[0]
        avg = np.array([
            integrate.quad(lambda u, b=a * math.sqrt(q): (1 + b * u) ** -2 * (1 + u) ** alpha,
                           0, 1, weight="alg", wvar=(0, alpha), limit=200)[0] / mass
            for q in uniq
        ])
    return float(np.sum(_radial_factor(n, R, truncation) * avg[inv.reshape(-1)]))


def random_unit_vector(n, seed):
    g = np.random.default_rng(seed).standard_normal(n)
    return g / np.linalg.norm(g)


def find_direction(n, R, C1, C3, threshold_policy=1.0, trials=100, seed=0, truncation=20):
    """First sampled direction whose criterion falls below the threshold.

    ``threshold_policy`` is either the constant ``c(n)`` (threshold
    ``c(n) / C1``) or ``"median"`` (threshold = median criterion value of
    all ``trials`` candidates).  Trial ``i`` uses seed ``seed + i``.
    Raises :class:`SearchExhaustedError` carrying the best candidate when
    nothing passes.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    thetas = [random_unit_vector(n, seed + i) for i in range(trials)]
    if threshold_policy == "median":
        values = [criterion_sum(th, n, R, C3, truncation) for th in thetas]
        threshold = float(np.median(values))
    elif isinstance(threshold_policy, (int, float)):
        if threshold_policy < 0:
            raise ValidationError("c(n) must be nonnegative")
        threshold = math.inf if math.isinf(threshold_policy) else threshold_policy / C1
        values = None
    else:
        raise ValidationError(f"unknown threshold policy {threshold_policy!r}")

    best = None
    for i, th in enumerate(thetas):
        v = values[i] if values is not None else criterion_sum(th, n, R, C3, truncation)
        cert = DirectionCertificate([float(c) for c in th], float(R), float(C1), float(C3),
                                    v, threshold, int(truncation), i)
        if v < threshold:
            return cert
        if best is None or v < best.criterion_value:
            best = cert
    raise SearchExhaustedError(
        f"no direction below threshold {threshold:.3g} in {trials} trials "
        f"(best {best.criterion_value:.3g})", best=best)


def default_gap_target(n, R):
    return GAP_CONSTANT * R ** (-1 / n)


def empirical_density_gap(theta, n, R, lambda_range, sample_count=200, seed=0, resolution=None,
                          chunk=1_000_000):
    """Worst sampled torus distance to the segment ``{lambda * theta}``.

    For each of ``sample_count`` uniform points ``x`` in ``[0, 1)^n`` take
    ``min_lambda max_j ||x_j - lambda theta_j||`` (distance to the nearest
    integer) over a lambda grid on ``[-lambda_range, lambda_range]`` with
    step ``resolution`` (default: a tenth of the relaxed gap target), and
    return the maximum over samples.
    """
    if lambda_range <= 0:
        raise ValidationError("lambda_range must be positive")
    theta = np.asarray(theta, dtype=float)
    if resolution is None:
        resolution = default_gap_target(n, R) / 10
    x = np.random.default_rng(seed).random((sample_count, n))
    steps = int(math.ceil(2 * lambda_range / resolution))
    best = np.full(sample_count, np.inf)
    for start in range(0, steps + 1, chunk):
        lam = -lambda_range + resolution * np.arange(start, min(start + chunk, steps + 1))
        line = np.mod(lam[:, None] * theta[None], 1.0)
        line[line >= 1.0] = 0.0
        d, _ = cKDTree(line, boxsize=1.0).query(x, p=np.inf)
        np.minimum(best, d, out=best)
    return float(best.max())
