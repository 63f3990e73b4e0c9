"""Unit square, euclidean p = 2: FE rigidity and maximum against a 5-point FD solve."""

import numpy as np
from scipy.fft import dstn, idstn

from aniso_torsion import EuclideanNorm, make_square, refine, solve_torsion, triangulate


def fd_square(n):
    h = 1.0 / (n + 1)
    lam = (2.0 - 2.0 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1))) / h**2
    u = idstn(dstn(np.ones((n, n)), type=1) / (lam[:, None] + lam[None, :]), type=1)
    return u.sum() * h * h, u.max()


T_fd, M_fd = fd_square(1023)
print(f"FD 1023^2:  T = {T_fd:.8f}  M = {M_fd:.8f}")

mesh = triangulate(make_square(0.5), 0.08)
prev = None
for level in range(4):
    sol = solve_torsion(mesh, EuclideanNorm(), 2.0)
    line = f"FE h={mesh.h:.4f} nodes={mesh.n_nodes:>6}  T = {sol.T:.8f}  M = {sol.M:.8f}"
    if prev is not None:
        line += f"  Richardson T = {(4 * sol.T - prev) / 3:.8f}"
    print(line)
    prev = sol.T
    mesh = refine(mesh)
