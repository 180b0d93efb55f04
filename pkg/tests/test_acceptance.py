"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a single ``CRITERION n: PASS|FAIL ...`` line. The lines
are printed as they are produced and repeated in the pytest terminal
summary. Running this file directly prints them without pytest.
"""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import JP11_SQ, KAPPA_STAR
from fbmlab.geometry import shape_field
from fbmlab.hodge import assemble_one_form_laplacian, betti_one, eigen_one_form, spectrum_via_scalar_reduction
from fbmlab.jacobi import assemble_jacobi, constant_quotient, eigen_jacobi, morse_index
from fbmlab.surfaces import SurfaceSpec
from fbmlab.verify import (
    check_eigenvalue_inequality,
    check_index_bounds,
    index_lower_bound,
    integral_identity_matrix,
    run_identity_check,
    sphere_quadrature,
)

RESULTS = []

DISK = SurfaceSpec("disk")
CATENOID = SurfaceSpec("catenoid")


def record(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _jacobi(spec, level):
    mesh, surf = spec.build(level)
    return assemble_jacobi(mesh, shape_field(mesh, surf))


def test_criterion_1_disk_index():
    rows, ok = [], True
    for level in (2, 3):
        t = time.perf_counter()
        idx = morse_index(_jacobi(DISK, level))
        dt = time.perf_counter() - t
        ok &= idx == 1 and dt < 60.0
        rows.append(f"L{level}: index {idx} in {dt:.1f}s")
    record(1, ok, "disk Morse index == 1; " + ", ".join(rows))


def test_criterion_2_disk_jacobi_spectrum():
    res = eigen_jacobi(_jacobi(DISK, 2), 4)
    lam = res.eigenvalues
    oracle = -KAPPA_STAR**2
    rel = abs(lam[0] - oracle) / abs(oracle)
    zeros = abs(lam[1]) <= res.kernel_tol and abs(lam[2]) <= res.kernel_tol
    ok = rel <= 0.02 and zeros
    record(2, ok, f"lambda_1 = {lam[0]:.5f} vs -kappa*^2 = {oracle:.5f} (rel {rel:.2e} <= 2e-2); "
                  f"lambda_2,3 = {lam[1]:.2e}, {lam[2]:.2e} within kernel_tol {res.kernel_tol:.2e}")


def test_criterion_3_instability():
    parts, ok = [], True
    for spec in (DISK, CATENOID):
        for level in (0, 1, 2):
            q = constant_quotient(_jacobi(spec, level))
            ok &= q < 0
            if spec is DISK:
                rel = abs(q + 2 * math.pi) / (2 * math.pi)
                ok &= rel <= 0.02
                parts.append(f"disk L{level} Q(1)={q:.4f} (rel {rel:.1e})")
            else:
                parts.append(f"catenoid L{level} Q(1)={q:.3f}")
    record(3, ok, "; ".join(parts))


def test_criterion_4_betti_formula():
    t = time.perf_counter()
    parts, ok = [], True
    for g, k in [(0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (2, 1)]:
        mesh = SurfaceSpec("synthetic", g, k).build(0)[0]
        a, r = int(betti_one(mesh, "absolute")), int(betti_one(mesh, "relative"))
        ok &= a == r == 2 * g + k - 1
        parts.append(f"({g},{k}): abs {a} rel {r}")
    dt = time.perf_counter() - t
    ok &= dt < 120.0
    record(4, ok, "; ".join(parts) + f"; {dt:.1f}s total")


def test_criterion_5_eigenvalue_inequality():
    parts, ok = [], True
    for spec in (DISK, CATENOID):
        rep = check_eigenvalue_inequality(spec, level=2, j_max=5, slack=0.05)
        rows = rep.details["table"]
        ok &= rep.passed and all(r["holds"] for r in rows)
        parts.append(f"{spec.label}: " + ", ".join(f"j{r['j']} {r['lambda_J']:.3f}<={r['lambda_hodge']:.3f}" for r in rows))
        if spec is CATENOID:
            first = rows[0]
            strict = first["m"] == 1 <= rep.details["beta"] == 1 and first["lambda_J"] < 0 and first["strict_holds"]
            ok &= strict
            parts.append(f"strict lambda_1(J) = {first['lambda_J']:.3f} < 0 with beta = {rep.details['beta']}")
    record(5, ok, "; ".join(parts))


def test_criterion_6_index_bound():
    parts, ok = [], True
    for spec in (DISK, CATENOID):
        rep = check_index_bounds(spec, (1, 2))
        idx = rep.details["indices"]
        bound = index_lower_bound(spec.genus, spec.holes)
        ok &= rep.passed and rep.details["stable"] and idx[-1] >= bound
        if spec is CATENOID:
            ok &= idx[-1] >= 3 and idx[0] == idx[1]
        parts.append(f"{spec.label}: index {idx} >= bound {bound}")
    record(6, ok, "; ".join(parts) + " (catenoid >= 3, stable over L1-L2)")


def test_criterion_7_identity_suite():
    parts, ok = [], True
    M = integral_identity_matrix(sphere_quadrature(2))
    ic = float(np.abs(M - np.eye(3)).max())
    ok &= ic <= 1e-12
    parts.append(f"IC {ic:.1e} over 9 pairs")
    for cid in ("PPC_A", "PPC_B", "LAPIP", "JC"):
        rep = run_identity_check(cid, CATENOID, (0, 1, 2), tolerance=0.05)
        r = rep.residuals
        mono = all(b < a for a, b in zip(r, r[1:]))
        ok &= mono and r[-1] < 0.05
        parts.append(f"{cid} " + ">".join(f"{x:.2e}" for x in r))
    for cid in ("BC", "ROS"):
        rep = run_identity_check(cid, CATENOID, (0, 1, 2), tolerance=0.10)
        ok &= rep.residual_max < 0.10
        msg = f"{cid} {rep.residual_max:.2e}"
        if cid == "ROS":
            neg = rep.details["level_2"]["negative"]
            ok &= neg
            msg += f" (Q {'<' if neg else '>='} 0)"
        parts.append(msg)
    record(7, ok, "; ".join(parts))


def _nonzero(values, count=10):
    lam = np.sort(np.asarray(values))
    return lam[lam > 1e-8 * lam.max()][:count]


def test_criterion_8_oracle_equivalence():
    parts, ok = [], True
    for spec in (DISK, CATENOID, SurfaceSpec("synthetic", 1, 1)):
        mesh = spec.build(2)[0]
        beta = spec.betti
        edge = _nonzero(eigen_one_form(assemble_one_form_laplacian(mesh), beta + 12).eigenvalues)
        scalar = _nonzero(spectrum_via_scalar_reduction(mesh, beta + 12).eigenvalues)
        rel = float(np.max(np.abs(edge - scalar) / scalar))
        ok &= len(edge) == len(scalar) == 10 and rel <= 0.01
        parts.append(f"{spec.label} max rel {rel:.2e}")
        if spec is DISK:
            d = abs(edge[0] - JP11_SQ) / JP11_SQ
            ok &= d <= 0.02
            parts.append(f"disk lambda_1 {edge[0]:.4f} vs (j'11)^2 {JP11_SQ:.4f} (rel {d:.1e})")
    record(8, ok, "; ".join(parts))


CONFIG = """\
[surface]
kind = catenoid

[run]
levels = 0, 1
checks = IC, PPC_B, ROS, ER
quadrature = monte_carlo
jacobi_count = 6
hodge_count = 8
"""


def test_criterion_9_determinism(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(CONFIG)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        proc = subprocess.run(
            [sys.executable, "-m", "fbmlab.cli", "verify", "--config", str(cfg), "--out", str(out),
             "--deterministic", "--seed", "7"],
            capture_output=True, text=True,
        )
        assert proc.returncode in (0, 1), proc.stderr
        outs.append(out)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.suffix in (".csv", ".json"))
    same = [(outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files]
    listing_b = sorted(p.relative_to(outs[1]) for p in outs[1].rglob("*") if p.suffix in (".csv", ".json"))
    ok = bool(files) and all(same) and files == listing_b
    record(9, ok, f"{sum(same)}/{len(files)} CSV/JSON artifacts byte-identical across two --deterministic --seed 7 runs")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
