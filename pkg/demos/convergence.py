"""Observed orders of convergence against closed-form references."""

from fbmlab.cli import QUANTITIES, RunConfig, convergence_study
from fbmlab.surfaces import SurfaceSpec

for name, (kind, _, _) in QUANTITIES.items():
    cfg = RunConfig(surface=SurfaceSpec(kind), levels=(0, 1, 2, 3))
    table = convergence_study(cfg, name)
    print(f"# {name}")
    print(table.to_csv())
