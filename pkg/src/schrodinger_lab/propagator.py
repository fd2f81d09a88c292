"""Extension (propagator) integrals for bump-sum spectra.

Evaluates ``sum_b w_b int_{B(c_b, r_b)} exp(i (x.xi + t phi(xi))) dxi`` at
space-time points ``(x, t)``.  Each ball is integrated with the product
Gauss rule of :mod:`.quadrature`; every reported value is checked against
a rule with twice the nodes per axis.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import OscillationGuardError, QuadratureError, ValidationError
from .quadrature import ball_rule, ball_volume

# entries of the (points x nodes) phase matrix handled per chunk
CHUNK_ENTRIES = 1 << 21


class SpaceTimePoint(NamedTuple):
    x: tuple
    t: float


@dataclass(frozen=True)
class QuadratureConfig:
    """``nodes_per_axis`` Gauss nodes per hyperspherical coordinate.

    ``rtol`` is the refinement gate: the change between ``nodes_per_axis``
    and twice that, measured relative to the spectrum's modulus bound
    ``sum |w_b| vol(B_b)``.
    """

    nodes_per_axis: int = 8
    rtol: float = 1e-6
    check_refinement: bool = True
    oscillation_guard: bool = True
    threads: int = 1

    def __post_init__(self):
        if self.nodes_per_axis < 2:
            raise ValidationError("nodes_per_axis must be >= 2")


def as_points(pts, n):
    """Stack points into an ``(P, n+1)`` float array, time last."""
    if isinstance(pts, SpaceTimePoint):
        pts = [pts]
    if isinstance(pts, np.ndarray):
        arr = np.atleast_2d(pts).astype(float)
    else:
        rows = []
        for p in pts:
            if isinstance(p, SpaceTimePoint):
                rows.append(list(np.atleast_1d(p.x)) + [p.t])
            else:
                rows.append(list(p))
        arr = np.asarray(rows, dtype=float)
        if arr.size == 0:
            arr = arr.reshape(0, n + 1)
        elif arr.ndim != 2:
            raise ValidationError("points must all have the same length")
    if arr.shape[1] != n + 1:
        raise ValidationError(f"points need {n + 1} coordinates, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("points must be finite")
    return arr


def _chunks(total, per_row):
    step = max(1, CHUNK_ENTRIES // max(per_row, 1))
    return [slice(i, min(i + step, total)) for i in range(0, total, step)]


def _map(fn, slices, threads):
    if threads > 1 and len(slices) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, slices))
    return [fn(s) for s in slices]


def _guard(grad_bound, radii, nodes, pts_index_offset=0):
    """Phase change across one quadrature cell must stay below pi/2."""
    cell = 2 * radii / nodes
    excess = grad_bound * cell[None, :] > np.pi / 2
    if np.any(excess):
        p, b = np.argwhere(excess)[0]
        raise OscillationGuardError(
            f"phase varies by {grad_bound[p, b] * cell[b]:.3g} rad across a quadrature cell at point "
            f"{p + pts_index_offset} (bump {b}); increase nodes_per_axis",
            point=int(p + pts_index_offset), bump=int(b))


def _gradient_bound(spec, phase, arr, nodes):
    x, t = arr[:, :-1], arr[:, -1]
    if phase.kind == "general":
        unit, _ = ball_rule(spec.dim, nodes)
        bound = np.empty((len(arr), len(spec)))
        for b, (c, r, _) in enumerate(spec.bumps):
            g = phase.gradient(c + r * unit)
            v = x[:, None, :] + t[:, None, None] * g[None]
            bound[:, b] = np.linalg.norm(v, axis=2).max(axis=1)
        return bound
    s = 2 * phase.scale
    centre = np.linalg.norm(x[:, None, :] + s * t[:, None, None] * spec.centers[None], axis=2)
    return centre + s * np.abs(t)[:, None] * spec.radii[None]


def _direct(spec, phase, arr, nodes, threads):
    unit, w = ball_rule(spec.dim, nodes)
    xi = (spec.centers[:, None, :] + spec.radii[:, None, None] * unit[None]).reshape(-1, spec.dim)
    phi = phase.value(xi)
    coef = ((spec.radii**spec.dim * spec.weights)[:, None] * w[None]).reshape(-1)

    def run(sl):
        ph = arr[sl, :-1] @ xi.T + arr[sl, -1:] * phi[None]
        return np.exp(1j * ph) @ coef

    out = _map(run, _chunks(len(arr), len(coef)), threads)
    return np.concatenate(out) if out else np.zeros(0, complex)


def _refined(evaluate, arr, scale, quad):
    coarse = evaluate(quad.nodes_per_axis)
    if not quad.check_refinement:
        return coarse, np.zeros(len(arr))
    fine = evaluate(2 * quad.nodes_per_axis)
    change = np.abs(fine - coarse) / scale if scale > 0 else np.zeros(len(arr))
    bad = np.flatnonzero(change > quad.rtol)
    if len(bad):
        p = int(bad[0])
        raise QuadratureError(
            f"refinement gate failed at point {p} {arr[p].tolist()}: relative change {change[p]:.3g}",
            point=p, change=float(change[p]))
    return fine, change


def extension_eval(spec, phase, pts, quad=QuadratureConfig(), return_change=False):
    """Extension integral of ``spec`` under ``phase`` at each space-time point.

    Returns a complex array (and the per-point refinement change when
    ``return_change``).  Raises :class:`OscillationGuardError` when the
    rule cannot resolve the phase and :class:`QuadratureError` when the
    refinement gate fails.
    """
    if phase.dim != spec.dim:
        raise ValidationError("phase and spectrum dimensions differ")
    arr = as_points(pts, spec.dim)
    if len(spec) == 0:
        z = np.zeros(len(arr), complex)
        return (z, np.zeros(len(arr))) if return_change else z
    if quad.oscillation_guard:
        _guard(_gradient_bound(spec, phase, arr, quad.nodes_per_axis), spec.radii, quad.nodes_per_axis)
    vals, change = _refined(lambda nodes: _direct(spec, phase, arr, nodes, quad.threads),
                            arr, spec.l1_bound(), quad)
    return (vals, change) if return_change else vals


def _carrier(centers, rho, R, arr, nodes, threads):
    n = centers.shape[1]
    unit, w = ball_rule(n, nodes)
    zeta = rho * unit
    wz = w * rho**n
    zsq = np.einsum("ij,ij->i", zeta, zeta)
    csq = np.einsum("ij,ij->i", centers, centers)
    M, Q = len(centers), len(zeta)

    def run(sl):
        x, tau = arr[sl, :-1], arr[sl, -1] / R
        a = x[:, None, :] + 2 * tau[:, None, None] * centers[None]
        ph = a @ zeta.T + tau[:, None, None] * zsq[None, None, :]
        inner = np.exp(1j * ph) @ wz
        carrier = np.exp(1j * (x @ centers.T + tau[:, None] * csq[None]))
        return np.sum(carrier * inner, axis=1)

    out = _map(run, _chunks(len(arr), M * Q), threads)
    return np.concatenate(out) if out else np.zeros(0, complex)


def bump_sum_eval(inst, pts, quad=QuadratureConfig(), return_change=False):
    """Field ``exp(i t Delta / R) f`` of a counterexample instance, carrier-factored.

    Each lattice frequency ``xi`` contributes
    ``exp(i (x.xi + t|xi|^2/R)) * int_{B(0,rho)} exp(i (x.z + t|xi+z|^2/R - t|xi|^2/R)) dz``
    with the ball nodes shared by every ``xi``; the sum is normalized by
    ``|E1|^(-1/2)``.  Mathematically identical to :func:`extension_eval` on
    ``inst.spectrum`` with the scaled paraboloid phase.
    """
    centers = np.asarray(inst.E1, dtype=float)
    n = centers.shape[1]
    arr = as_points(pts, n)
    norm = len(centers) ** -0.5
    rho, R = float(inst.rho), float(inst.R)
    if quad.oscillation_guard:
        x, tau = arr[:, :-1], arr[:, -1] / R
        g = np.linalg.norm(x[:, None, :] + 2 * tau[:, None, None] * centers[None], axis=2)
        g = g + 2 * np.abs(tau)[:, None] * rho
        _guard(g, np.full(len(centers), rho), quad.nodes_per_axis)
    scale = len(centers) * norm * ball_volume(n, rho)
    vals, change = _refined(lambda nodes: norm * _carrier(centers, rho, R, arr, nodes, quad.threads),
                            arr, scale, quad)
    return (vals, change) if return_change else vals
