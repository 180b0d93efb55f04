"""Command-line front end.

A run is described by an INI file::

    [surface]
    kind = disk            ; disk | catenoid | synthetic
    genus = 0              ; synthetic only
    holes = 1              ; synthetic only
    resolution = 8         ; base mesh resolution (optional)

    [run]
    levels = 0, 1, 2
    checks = ER, IB
    jacobi_count = 8
    hodge_count = 16
    quadrature = gauss     ; gauss | monte_carlo (for IC)
    seed = 0
    deterministic = true
    out = runs/disk

    [tolerances]
    JC = 0.05

Every run directory holds ``meshes/``, ``spectra/``, ``reports/``, a
``summary.csv`` and a ``manifest.json`` listing all artifacts with their
SHA-256 and the hash of the normalized configuration.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .geometry import assemble_scalar_operators, export_matrix_market, shape_field
from .hodge import assemble_one_form_laplacian, betti_one, eigen_one_form, spectrum_via_scalar_reduction
from .jacobi import assemble_jacobi, eigen_jacobi, index_report
from .mesh import _atomic_write, write_off
from .spectral import solve_smallest
from .surfaces import SURFACE_KINDS, SurfaceSpec, critical_catenoid_parameters, write_sidecar
from .verify import (
    CHECK_IDS,
    CheckReport,
    check_eigenvalue_inequality,
    check_index_bounds,
    check_integral_identity,
    monte_carlo_sphere,
    run_identity_check,
    sphere_quadrature,
)

logger = logging.getLogger("fbmlab")

THEOREM_CHECKS = ("ER", "IB")
ALL_CHECKS = CHECK_IDS + THEOREM_CHECKS
ANALYTIC_CHECKS = ("PPC_A", "PPC_B", "PC1", "LAPIP", "JC", "BC", "ROS", "ER", "IB")
STAGES = ("generate", "spectrum", "hodge", "verify")
SUMMARY_HEADER = "check_id,surface,resolution,residual_max,tolerance,pass,status,rate"
RATE_HEADER = "level,h,value,reference,error,ratio,order"


class ConfigError(ValueError):
    """Invalid configuration; ``lineno`` points into the file when known."""

    def __init__(self, message, lineno: Optional[int] = None, path=None):
        where = f"{path or '<config>'}:{lineno}: " if lineno else ""
        super().__init__(where + message)
        self.lineno = lineno


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class RunConfig:
    surface: SurfaceSpec
    levels: tuple = (0, 1, 2)
    checks: tuple = ()
    jacobi_count: int = 8
    hodge_count: int = 16
    tolerances: dict = field(default_factory=dict)
    out: str = "fbmlab-run"
    deterministic: bool = False
    seed: int = 0
    quadrature: str = "gauss"
    dump_matrices: bool = False

    def __post_init__(self):
        levels = tuple(int(x) for x in self.levels)
        if not levels:
            raise ConfigError("resolution ladder is empty")
        if any(b <= a for a, b in zip(levels, levels[1:])) or levels[0] < 0:
            raise ConfigError(f"resolution ladder must be nonnegative and strictly increasing, got {list(levels)}")
        object.__setattr__(self, "levels", levels)
        for name in ("jacobi_count", "hodge_count"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        checks = tuple(c.upper() for c in self.checks)
        bad = [c for c in checks if c not in ALL_CHECKS]
        if bad:
            raise ConfigError(f"unknown checks {bad}; expected a subset of {list(ALL_CHECKS)}")
        if not self.surface.minimal:
            need = [c for c in checks if c in ANALYTIC_CHECKS]
            if need:
                raise ConfigError(f"checks {need} need an analytic minimal surface, not {self.surface.label}")
        object.__setattr__(self, "checks", checks)
        if self.quadrature not in ("gauss", "monte_carlo"):
            raise ConfigError(f"quadrature must be 'gauss' or 'monte_carlo', got {self.quadrature!r}")

    def tolerance(self, check_id: str) -> Optional[float]:
        return self.tolerances.get(check_id)

    def normalized(self) -> dict:
        """Configuration as plain data, independent of the output location."""
        s = self.surface
        return {
            "surface": {"kind": s.kind, "genus": s.genus, "holes": s.holes, "resolution": s.resolution},
            "levels": list(self.levels),
            "checks": list(self.checks),
            "jacobi_count": int(self.jacobi_count),
            "hodge_count": int(self.hodge_count),
            "tolerances": {k: float(v) for k, v in sorted(self.tolerances.items())},
            "seed": int(self.seed),
            "quadrature": self.quadrature,
            "dump_matrices": bool(self.dump_matrices),
        }

    @property
    def config_hash(self) -> str:
        text = json.dumps(self.normalized(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


# -- parsing ---------------------------------------------------------------------


def _key_lines(text: str) -> dict:
    """Map ``(section, key)`` to its 1-based line number."""
    out, section = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            out[(section, None)] = i
            continue
        for sep in ("=", ":"):
            if sep in line:
                out[(section, line.split(sep, 1)[0].strip().lower())] = i
                break
    return out


def _int_list(value: str) -> list:
    return [int(x) for x in value.replace(";", ",").split(",") if x.strip()]


def parse_config(text: str, path=None) -> RunConfig:
    """Parse INI text into a :class:`RunConfig`; errors carry line numbers."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text, source=str(path or "<config>"))
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        msg = str(exc).splitlines()[0]
        if getattr(exc, "errors", None):
            lineno, line = exc.errors[0]
            msg = f"cannot parse line {line}"
        raise ConfigError(msg, lineno, path) from exc
    lines = _key_lines(text)
    known = {
        "surface": {"kind", "genus", "holes", "resolution"},
        "run": {"levels", "checks", "jacobi_count", "hodge_count", "out", "deterministic", "seed", "quadrature", "dump_matrices"},
    }
    for sec in cp.sections():
        if sec == "tolerances":
            continue
        if sec not in known:
            raise ConfigError(f"unknown section [{sec}]", lines.get((sec, None)), path)
        for key in cp[sec]:
            if key not in known[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", lines.get((sec, key)), path)

    def get(sec, key, conv, default):
        if not cp.has_option(sec, key):
            return default
        try:
            return conv(cp.get(sec, key))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lines.get((sec, key)), path) from exc

    def boolean(v):
        try:
            return cp.BOOLEAN_STATES[v.strip().lower()]
        except KeyError:
            raise ValueError(f"not a boolean: {v!r}") from None

    if not cp.has_section("surface") or not cp.has_option("surface", "kind"):
        raise ConfigError("missing [surface] kind", None, path)
    kind = cp.get("surface", "kind").strip()
    if kind not in SURFACE_KINDS:
        raise ConfigError(f"unknown surface kind {kind!r}", lines.get(("surface", "kind")), path)
    genus = get("surface", "genus", int, 0)
    holes = get("surface", "holes", int, 1)
    resolution = get("surface", "resolution", int, None)
    try:
        surface = SurfaceSpec(kind, genus, holes, resolution)
    except ValueError as exc:
        raise ConfigError(str(exc), lines.get(("surface", "holes")), path) from exc

    tol = {}
    if cp.has_section("tolerances"):
        for key, val in cp["tolerances"].items():
            try:
                tol[key.upper()] = float(val)
            except ValueError as exc:
                raise ConfigError(f"bad tolerance {val!r}", lines.get(("tolerances", key)), path) from exc
    kwargs = dict(
        surface=surface,
        levels=tuple(get("run", "levels", _int_list, [0, 1, 2])),
        checks=tuple(c.strip() for c in get("run", "checks", str, "").split(",") if c.strip()),
        jacobi_count=get("run", "jacobi_count", int, 8),
        hodge_count=get("run", "hodge_count", int, 16),
        tolerances=tol,
        out=get("run", "out", str, "fbmlab-run"),
        deterministic=get("run", "deterministic", boolean, False),
        seed=get("run", "seed", int, 0),
        quadrature=get("run", "quadrature", str, "gauss").strip(),
        dump_matrices=get("run", "dump_matrices", boolean, False),
    )
    try:
        return RunConfig(**kwargs)
    except ConfigError as exc:
        # point at the offending key where we can tell which one it is
        msg = str(exc)
        for sec, key in (("run", "levels"), ("run", "checks"), ("run", "jacobi_count"), ("run", "hodge_count"), ("run", "quadrature")):
            if key in msg or (key == "levels" and "ladder" in msg):
                raise ConfigError(msg, lines.get((sec, key)), path) from exc
        raise ConfigError(msg, None, path) from exc


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", None, path) from exc
    return parse_config(text, path)


# -- pipeline --------------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Run:
    """Bookkeeping for one output directory."""

    def __init__(self, config: RunConfig, out: Path):
        self.config = config
        self.out = out
        self.artifacts = []
        self.reports = []
        self.leading = {}  # finest-level smallest eigenvalues for the summary

    def path(self, *parts) -> Path:
        p = self.out.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        self.artifacts.append(p)
        return p

    def write_text(self, text: str, *parts) -> Path:
        p = self.path(*parts)
        _atomic_write(p, text)
        return p

    def manifest(self, stages, status: int, failed: Optional[str] = None) -> Path:
        entries = sorted(
            {str(p.relative_to(self.out)): _sha256(p) for p in self.artifacts if p.exists()}.items()
        )
        doc = {
            "config": self.config.normalized(),
            "config_hash": self.config.config_hash,
            "stages": list(stages),
            "exit_status": status,
            "partial": failed is not None,
            "failed_stage": failed,
            "artifacts": [{"path": k, "sha256": v} for k, v in entries],
        }
        p = self.out / "manifest.json"
        _atomic_write(p, json.dumps(doc, sort_keys=True, indent=2) + "\n")
        return p


def _stage_generate(run: _Run):
    spec = run.config.surface
    for level in run.config.levels:
        mesh, surf = spec.build(level)
        write_off(mesh, run.path("meshes", f"{spec.label}_L{level}.off"))
        meta = {"kind": spec.kind, "genus": spec.genus, "holes": spec.holes, "level": level,
                "vertices": mesh.n_vertices, "faces": mesh.n_faces, "max_edge_length": mesh.max_edge_length}
        if surf is not None:
            meta.update(surf.metadata())
        write_sidecar(run.path("meshes", f"{spec.label}_L{level}.meta"), meta)


def _stage_spectrum(run: _Run):
    cfg = run.config
    spec = cfg.surface
    rows = []
    for level in cfg.levels:
        mesh, surf = spec.build(level)
        if not spec.minimal:
            # the stability operator is only meaningful on minimal surfaces;
            # report the Neumann Laplacian spectrum instead
            ops = assemble_scalar_operators(mesh)
            res = solve_smallest(ops.K, ops.M, min(cfg.jacobi_count, mesh.n_vertices))
            _atomic_write(run.path("spectra", f"laplacian_L{level}.csv"), res.to_csv())
            continue
        J = assemble_jacobi(mesh, shape_field(mesh, surf))
        res = eigen_jacobi(J, min(cfg.jacobi_count, J.operators.size))
        _atomic_write(run.path("spectra", f"jacobi_L{level}.csv"), res.to_csv())
        run.leading["lambda_1(J)"] = float(res.eigenvalues[0])
        rep = index_report(J)
        rows.append(f"{level},{rep.index},{rep.nullity},{rep.kernel_tol:.17g},{str(rep.ambiguous).lower()},"
                    f"{float(J.Q(np.ones(J.operators.size))):.17g}")
        if cfg.dump_matrices:
            export_matrix_market(run.path("operators", f"jacobi_A_L{level}.mtx"), J.A, "stability form")
            export_matrix_market(run.path("operators", f"jacobi_M_L{level}.mtx"), J.B, "mass")
    if rows:
        run.write_text("level,index,nullity,kernel_tol,ambiguous,Q_one\n" + "\n".join(rows) + "\n", "spectra", "index.csv")


def _stage_hodge(run: _Run):
    cfg = run.config
    spec = cfg.surface
    rows = []
    for level in cfg.levels:
        mesh, _ = spec.build(level)
        prob = assemble_one_form_laplacian(mesh, "absolute")
        res = eigen_one_form(prob, min(cfg.hodge_count, prob.size))
        _atomic_write(run.path("spectra", f"hodge_absolute_L{level}.csv"), res.to_csv())
        run.leading["lambda_1(Delta_1)"] = float(res.eigenvalues[0])
        red = spectrum_via_scalar_reduction(mesh, cfg.hodge_count, "absolute")
        lines = ["index,eigenvalue"] + [f"{i},{v:.17g}" for i, v in enumerate(red.eigenvalues)]
        run.write_text("\n".join(lines) + "\n", "spectra", f"hodge_scalar_L{level}.csv")
        b_abs = betti_one(mesh, "absolute")
        b_rel = betti_one(mesh, "relative")
        rows.append(f"{level},{int(b_abs)},{int(b_rel)},{spec.betti},{b_abs.gap_ratio:.6g}")
        if cfg.dump_matrices:
            export_matrix_market(run.path("operators", f"hodge_A_L{level}.mtx"), prob.A, "absolute 1-form Laplacian")
            export_matrix_market(run.path("operators", f"hodge_M_L{level}.mtx"), prob.B, "Whitney mass")
    run.write_text("level,betti_absolute,betti_relative,betti_formula,gap_ratio\n" + "\n".join(rows) + "\n",
                   "spectra", "betti.csv")


def _run_check(cfg: RunConfig, check_id: str) -> CheckReport:
    spec = cfg.surface
    levels = cfg.levels
    if check_id == "IC":
        quad = sphere_quadrature(2) if cfg.quadrature == "gauss" else monte_carlo_sphere(seed=cfg.seed)
        return check_integral_identity(quad, cfg.tolerance("IC"))
    if check_id == "ER":
        return check_eigenvalue_inequality(spec, levels[-1])
    if check_id == "IB":
        return check_index_bounds(spec, levels[-2:] if len(levels) > 1 else levels)
    return run_identity_check(check_id, spec, levels, tolerance=cfg.tolerance(check_id))


def _stage_verify(run: _Run):
    cfg = run.config
    if cfg.deterministic or len(cfg.checks) < 2:
        reports = [_run_check(cfg, c) for c in cfg.checks]
    else:
        # checks share no mutable state; results are collected in config order
        with ThreadPoolExecutor(max_workers=min(4, len(cfg.checks))) as pool:
            reports = list(pool.map(lambda c: _run_check(cfg, c), cfg.checks))
    for check_id, rep in zip(cfg.checks, reports):
        run.reports.append(rep)
        run.write_text(rep.to_json() + "\n", "reports", f"{check_id}.json")
    rows = [SUMMARY_HEADER]
    for r in run.reports:
        rate = "" if r.rate is None else f"{r.rate:.6g}"
        res = " ".join(str(x) for x in r.resolution)
        rows.append(f"{r.check_id},{r.surface},{res},{r.residual_max:.6e},{r.tolerance:.6g},"
                    f"{str(r.passed).lower()},{r.status},{rate}")
    run.write_text("\n".join(rows) + "\n", "summary.csv")


_STAGE_FUNCS = {"generate": _stage_generate, "spectrum": _stage_spectrum, "hodge": _stage_hodge, "verify": _stage_verify}


def summary_table(reports: Sequence[CheckReport], leading: Optional[dict] = None) -> str:
    lines = []
    for name, val in (leading or {}).items():
        lines.append(f"{name:<20}{val:>14.6g}")
    if reports:
        lines.append(f"{'check':<7}{'surface':<22}{'residual':>12}{'tol':>10}  result")
    for r in reports:
        lines.append(f"{r.check_id:<7}{r.surface:<22}{r.residual_max:>12.3e}{r.tolerance:>10.3g}  {r.status}")
    return "\n".join(lines)


def run_config(config: RunConfig, stages: Sequence[str] = STAGES, out=None) -> int:
    """Execute ``stages`` for ``config``; return 0 iff all checks pass.

    Failures are re-raised as :class:`PipelineError` naming the stage,
    after a manifest flagged ``partial`` has been written.
    """
    out = Path(out or config.out)
    out.mkdir(parents=True, exist_ok=True)
    run = _Run(config, out)
    np.random.seed(config.seed)
    for stage in stages:
        logger.info("stage %s -> %s", stage, out)
        try:
            _STAGE_FUNCS[stage](run)
        except Exception as exc:
            run.manifest(stages, 2, stage)
            raise PipelineError(stage, exc) from exc
    status = 0 if all(r.passed for r in run.reports) else 1
    table = summary_table(run.reports, run.leading)
    if table:
        run.write_text(table + "\n", "summary.txt")
        print(table)
    run.manifest(stages, status)
    return status


# -- convergence studies ---------------------------------------------------------


def _disk_neumann_lambda1(spec, level):
    mesh, _ = spec.build(level)
    ops = assemble_scalar_operators(mesh)
    return float(solve_smallest(ops.K, ops.M, 2).eigenvalues[1])


def _disk_area(spec, level):
    return float(spec.build(level)[0].face_areas.sum())


def _catenoid_a2_max(spec, level):
    # discrete estimate from the mesh alone, not the sampled exact field
    return float(shape_field(spec.build(level)[0]).A2.max())


def _disk_jacobi_lambda1(spec, level):
    mesh, surf = spec.build(level)
    return float(eigen_jacobi(assemble_jacobi(mesh, shape_field(mesh, surf)), 2).eigenvalues[0])


def _kappa_star() -> float:
    from scipy.optimize import brentq

    return brentq(lambda k: k * special.i1(k) - special.i0(k), 1.5, 1.7, xtol=1e-15)


QUANTITIES = {
    "disk_neumann_lambda1": ("disk", _disk_neumann_lambda1, lambda: float(special.jnp_zeros(1, 1)[0] ** 2)),
    "disk_area": ("disk", _disk_area, lambda: math.pi),
    "catenoid_a2_max": ("catenoid", _catenoid_a2_max, lambda: 2.0 / critical_catenoid_parameters()[1] ** 2),
    "disk_jacobi_lambda1": ("disk", _disk_jacobi_lambda1, lambda: -_kappa_star() ** 2),
}


@dataclass(frozen=True)
class RateTable:
    quantity: str
    levels: tuple
    h: tuple
    values: tuple
    reference: float
    errors: tuple
    orders: tuple  # None where the error did not decrease
    oracle: bool

    def to_csv(self) -> str:
        lines = [RATE_HEADER]
        for i, lev in enumerate(self.levels):
            ratio = order = ""
            if i > 0:
                a, b = self.errors[i - 1], self.errors[i]
                ratio = f"{a / b:.6g}" if b > 0 else "n/a"
                order = "n/a" if self.orders[i - 1] is None else f"{self.orders[i - 1]:.6g}"
            lines.append(f"{lev},{self.h[i]:.17g},{self.values[i]:.17g},{self.reference:.17g},"
                         f"{self.errors[i]:.17g},{ratio},{order}")
        return "\n".join(lines) + "\n"

    @property
    def observed_order(self) -> Optional[float]:
        return self.orders[-1] if self.orders else None


def convergence_study(config: RunConfig, quantity: str) -> RateTable:
    """Value, error and observed order of a named scalar over the ladder.

    Errors are measured against an analytic oracle when the quantity has
    one for the configured surface, otherwise against the finest level.
    A step whose error does not shrink gets order ``None`` ("n/a").
    """
    if quantity not in QUANTITIES:
        raise ConfigError(f"unknown quantity {quantity!r}; expected one of {sorted(QUANTITIES)}")
    if len(config.levels) < 3:
        raise ConfigError("a convergence study needs a ladder of at least 3 levels")
    kind, fn, oracle = QUANTITIES[quantity]
    spec = config.surface if config.surface.kind == kind else SurfaceSpec(kind, resolution=config.surface.resolution)
    levels = config.levels
    values = [fn(spec, lev) for lev in levels]
    h = [spec.build(lev)[0].max_edge_length for lev in levels]
    has_oracle = oracle is not None
    ref = oracle() if has_oracle else values[-1]
    errs = [abs(v - ref) for v in values]
    orders = []
    pairs = list(zip(errs, errs[1:], h, h[1:]))
    if not has_oracle:
        pairs = pairs[:-1]
    for a, b, ha, hb in pairs:
        orders.append(math.log(a / b) / math.log(ha / hb) if a > b > 0 else None)
    return RateTable(quantity, levels, tuple(h), tuple(values), ref, tuple(errs), tuple(orders), has_oracle)


# -- entry point -----------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fbmlab", description="Spectra and index of free boundary minimal surfaces.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="INI run configuration")
        sp.add_argument("--out", type=Path, help="output directory (overrides the config)")
        sp.add_argument("--deterministic", action="store_true", help="sequential, order-stable execution")
        sp.add_argument("--seed", type=int, help="seed for Monte Carlo quadrature")
        sp.add_argument("--levels", type=str, help="refinement ladder, e.g. 0,1,2")
        sp.add_argument("--surface", choices=SURFACE_KINDS, help="surface kind when no config is given")
        sp.add_argument("--genus", type=int, default=0)
        sp.add_argument("--holes", type=int, default=1)
        sp.add_argument("--resolution", type=int)
        return sp

    common(sub.add_parser("generate", help="write refined meshes (OFF) with metadata"))
    common(sub.add_parser("spectrum", help="Jacobi spectra and Morse index per level"))
    common(sub.add_parser("hodge", help="1-form Laplacian spectra and Betti numbers"))
    v = common(sub.add_parser("verify", help="run the configured checks; exit 0 iff all pass"))
    v.add_argument("--checks", type=str, help="comma separated check ids")
    s = common(sub.add_parser("study", help="convergence study of a named quantity"))
    s.add_argument("--quantity", choices=sorted(QUANTITIES), required=True)
    return p


def _config_from_args(args) -> RunConfig:
    if args.config is not None:
        cfg = load_config(args.config)
    elif args.surface is not None:
        cfg = RunConfig(SurfaceSpec(args.surface, args.genus, args.holes, args.resolution))
    elif getattr(args, "quantity", None):
        # every study quantity is tied to one surface
        cfg = RunConfig(SurfaceSpec(QUANTITIES[args.quantity][0], resolution=args.resolution))
    else:
        raise ConfigError("either --config or --surface is required")
    updates = {}
    if args.levels:
        try:
            updates["levels"] = tuple(_int_list(args.levels))
        except ValueError as exc:
            raise ConfigError(f"bad --levels {args.levels!r}") from exc
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.deterministic:
        updates["deterministic"] = True
    if args.out is not None:
        updates["out"] = str(args.out)
    if getattr(args, "checks", None):
        updates["checks"] = tuple(c.strip() for c in args.checks.split(",") if c.strip())
    return replace(cfg, **updates) if updates else cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _config_from_args(args)
        if args.command == "study":
            table = convergence_study(cfg, args.quantity)
            out = Path(cfg.out)
            out.mkdir(parents=True, exist_ok=True)
            _atomic_write(out / f"rate_{args.quantity}.csv", table.to_csv())
            sys.stdout.write(table.to_csv())
            return 0
        stages = {"generate": ("generate",), "spectrum": ("spectrum",), "hodge": ("hodge",), "verify": STAGES}[args.command]
        return run_config(cfg, stages)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
