"""Jacobi eigenvalues against Hodge eigenvalues on the critical catenoid.

Prints the comparison table ``lambda_j(J) <= lambda_{3(j-1)+1}(Delta_1)``
for j = 1..5 and the Morse index on two successive levels.
"""

from fbmlab import SurfaceSpec, check_eigenvalue_inequality, check_index_bounds

spec = SurfaceSpec("catenoid")
rep = check_eigenvalue_inequality(spec, level=2, j_max=5, slack=0.05)
print(f"beta = {rep.details['beta']}")
print(" j   lambda_j(J)   lambda_3(j-1)+1(Delta_1)   holds")
for row in rep.details["table"]:
    print(f"{row['j']:2d}   {row['lambda_J']:+11.4f}   {row['lambda_hodge']:+24.4f}   {row['holds']}")

ib = check_index_bounds(spec, (1, 2))
print(f"index on L1, L2: {ib.details['indices']}  stable: {ib.details['stable']}")
