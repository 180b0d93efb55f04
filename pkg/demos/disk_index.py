"""Stability of the equatorial disk.

Assembles the Jacobi operator on the flat unit disk, where ``|A|^2 = 0`` and
the only contribution besides the Dirichlet energy is the Robin boundary
term ``h(N, N) = -1``. The constant function already has ``Q(1) = -2 pi``
and the disk turns out to have exactly one negative direction.
"""

import math

from fbmlab import SurfaceSpec, assemble_jacobi, constant_quotient, eigen_jacobi, index_report, shape_field

spec = SurfaceSpec("disk")
for level in range(4):
    mesh, surf = spec.build(level)
    J = assemble_jacobi(mesh, shape_field(mesh, surf))
    rep = index_report(J)
    lam = eigen_jacobi(J, 4).eigenvalues
    print(
        f"L{level}  V={mesh.n_vertices:5d}  index={rep.index}  nullity={rep.nullity}  "
        f"Q(1)={constant_quotient(J):+.5f} (-2pi={-2 * math.pi:+.5f})  "
        f"lambda_1..4 = {', '.join(f'{x:+.4f}' for x in lam)}"
    )

# the two near-zero modes are the tangential rotations of the disk inside the
# ball; lambda_1 converges to -kappa^2 with kappa I_1(kappa) = I_0(kappa)
