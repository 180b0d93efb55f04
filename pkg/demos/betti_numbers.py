"""Kernel dimension of the 1-form Laplacian on synthetic surfaces.

For a genus ``g`` surface with ``k`` boundary circles both the absolute and
the relative harmonic spaces have dimension ``2g + k - 1``.
"""

from fbmlab import SurfaceSpec, betti_one

print(" g  k   absolute  relative  2g+k-1")
for g, k in [(0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (2, 1)]:
    mesh = SurfaceSpec("synthetic", g, k).build(0)[0]
    a, r = int(betti_one(mesh, "absolute")), int(betti_one(mesh, "relative"))
    print(f"{g:2d} {k:2d}   {a:8d}  {r:8d}  {2 * g + k - 1:6d}")
