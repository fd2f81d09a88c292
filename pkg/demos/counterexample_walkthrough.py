"""The lattice divergence construction, end to end.

Build the instance for R = k^n, check that the shifted shell sits on the
sphere through the origin, sample the good set where the field keeps its
full size |E1|^(1/2) vol(B_rho), and read off the Sobolev exponent the
construction forces.
"""
import numpy as np

from schrodinger_lab.counterexample import (DirectionConfig, build_theorem2_instance, obstruction_exponent,
                                            sobolev_obstruction, verify_lower_bound)
from schrodinger_lab.lattice import enumerate_shell
from schrodinger_lab.maximal import fit_exponent

inst = build_theorem2_instance(2, 13, rho=0.02, seed=0)
print(f"n=2 k=13: R={inst.R:.0f}, |E1|={len(inst.E1)}, theta={np.round(inst.theta_cert.theta, 4)}")
print(f"sphere residual {inst.sphere_residual():.1e}, min separation {inst.min_separation():.2f}")

rep = verify_lower_bound(inst, sample_count=300, seed=1)
print(f"good-set ratio in [{rep.min_ratio_on_good_set:.5f}, {rep.max_ratio_on_good_set:.5f}]")
print(f"refinement change {rep.max_refinement_change:.1e}")
print(f"maximal L2 estimate {rep.l2_maximal_estimate:.3f} +- {rep.l2_maximal_stderr:.3f}")

sob = sobolev_obstruction(inst)
print(f"s_required = {sob.s_required:.4f}, ||f||_2 = {sob.l2_norm:.3e}, ||f||_H^s = {sob.hs_norm_at_required:.3e}")

# the exponent ladder in dimension 5, where the target is (n-2)/(2n) = 0.3
print("\nn=5 ladder (shell sizes only)")
rows = []
for k in range(2, 11):
    size = len(enumerate_shell(5, k * k))
    rows.append((k**5, size**0.5))
    print(f"k={k:2d} R={k**5:6d} |E1|={size:5d} s={obstruction_exponent(size, k**5):.3f}")
print(f"fitted slope of |E1|^(1/2) against R: {fit_exponent(rows).alpha:.3f}")
