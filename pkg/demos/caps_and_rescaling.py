"""Caps, transversality and parabolic rescaling.

Partition the annulus 1 <= |xi| <= 2 into delta-cells, compute the wedge of
cap normals, classify a few balls as broad (Case I) or narrow (Case II),
and check the rescaling identity that maps a delta-cap to unit scale.
"""
import warnings

import numpy as np

from schrodinger_lab.caps import (cap_amplitudes, classify_ball, multilinear_norm, parabolic_rescale,
                                  partition_caps, transversality_wedge)
from schrodinger_lab.propagator import QuadratureConfig, extension_eval
from schrodinger_lab.spectra import BumpSumSpectrum, PhaseSpec, spectrum_l2_norm
from schrodinger_lab.errors import OverlapWarning
from schrodinger_lab.maximal import fit_exponent

# random test bumps may overlap; norms stay exact, so the warning is noise here
warnings.simplefilter("ignore", OverlapWarning)

caps = partition_caps(2, (1.0, 2.0), 0.25)
print(f"{len(caps)} caps of side 1/4; polar box sides {caps[0].polar_box()[1]}")
print("wedge of three spread caps:", round(transversality_wedge([caps[0], caps[60], caps[-1]]), 4))

rng = np.random.default_rng(0)
d = rng.normal(size=(40, 2))
centers = d / np.linalg.norm(d, axis=1, keepdims=True) * rng.uniform(1.1, 1.9, (40, 1))
spec = BumpSumSpectrum(2, centers, 0.02, np.exp(2j * np.pi * rng.random(40)), (1.0, 2.0))
balls = np.concatenate([rng.uniform(-20, 20, (5, 2)), rng.uniform(0, 5, (5, 1))], axis=1)
amps = cap_amplitudes(spec, caps, balls)
for c, a in zip(balls, amps):
    res = classify_ball((c, 4.0), caps, a, K=4.0)
    print(np.round(c, 1), type(res.verdict).__name__, "verified" if res.verify() else "NOT verified")

# rescaling: |T f(x)| = delta^(n/2) ||f|| |T g|(map(x))
cap = caps[10]
local = BumpSumSpectrum(2, cap.corner + 0.05 + rng.random((3, 2)) * 0.15, 0.03, [1.0, 1j, -1.0])
g, cmap = parabolic_rescale(cap, local)
p = np.array([[3.0, -2.0, 0.7]])
para = PhaseSpec.paraboloid(2)
lhs = abs(extension_eval(local, para, p)[0])
rhs = 0.25 * spectrum_l2_norm(local) * abs(extension_eval(g, para, cmap(p))[0])
print(f"\nrescaling identity: {lhs:.12e} vs {rhs:.12e}")

# multilinear norm of two transversal caps in one dimension barely grows with R
a = BumpSumSpectrum(1, [[-1.5]], 0.25, [1.0])
b = BumpSumSpectrum(1, [[1.5]], 0.25, [1.0])
ladder = [(R, multilinear_norm([a, b], R, 4 * R, QuadratureConfig(48, check_refinement=False))) for R in (8, 16, 32)]
print("multilinear ladder:", [(R, round(v, 4)) for R, v in ladder], "exponent", round(fit_exponent(ladder).alpha, 4))
