"""Integer points on spheres.

Counts r_n(m) of integer vectors with |p|^2 = m, the four-square check
r_4(m) = 8 sigma(m) for odd m, and the growth |Z^n on the sphere of radius k| ~ k^(n-2)
that drives the divergence construction.
"""
import numpy as np

from schrodinger_lab.lattice import enumerate_shell, nearest_point, random_rotation, shell_count_table, ScaledLattice

# a few shells
for n, m in [(2, 25), (3, 9), (4, 3), (5, 4)]:
    shell = enumerate_shell(n, m)
    print(f"n={n} m={m:3d}: {len(shell):4d} points, minimal gap {shell.min_gap():.3f}")

# four squares: odd m
table = dict(shell_count_table(4, 30))
sigma = lambda m: sum(d for d in range(1, m + 1) if m % d == 0)
print("\nm   r_4(m)  8*sigma(m)")
for m in range(1, 30, 4):
    print(f"{m:2d}  {table[m]:6d}  {8 * sigma(m):9d}")

# growth on the sphere of radius k in dimension 5
print("\nk   |shell|   |shell| / k^3")
for k in range(2, 11):
    size = len(enumerate_shell(5, k * k))
    print(f"{k:2d}  {size:7d}   {size / k**3:.2f}")

# nearest points of a rotated lattice
lat = ScaledLattice(0.5, random_rotation(3, seed=1))
x = np.random.default_rng(0).normal(size=(4, 3))
p, d = nearest_point(lat, x)
print("\nnearest-point distances:", np.round(d, 4), "bound", round(0.5 * np.sqrt(3) / 2, 4))
