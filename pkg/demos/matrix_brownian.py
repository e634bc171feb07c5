"""
The matrix version
==================

For an SPD matrix A, the discrete Lipschitz constant
G_A = max |A_ii - A_ij| / |i - j| plays the role of L, and complete pivoting
gives ||A - A_n||_max <= 4 (m - 1) G_A / (n - 1).  The discretized Brownian
covariance A_ij = min(i, j) / m has G_A = 1/m.
"""

from pivchol import discrete_lipschitz, fit_rate
from pivchol.experiments import matrix_trace
from pivchol.matrix import brownian_matrix

A = brownian_matrix(200)
G, rows = matrix_trace(A)
print(f"m = {A.order}, G_A = {G:.4f}")
for n, r, b in rows[1:60:8]:
    print(f"n={n:>3}  ||A - A_n||_max = {r:.4e}   bound {b:.4e}")
print("fitted slope:", round(fit_rate([(n, r) for n, r, _ in rows], 10, 190).slope, 3))
print("G_A again, directly:", discrete_lipschitz(A))
