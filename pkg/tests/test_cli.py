import json
import math

import pytest

from fbmlab import cli
from fbmlab.cli import ConfigError, PipelineError, RateTable, RunConfig, convergence_study, main, parse_config, run_config
from fbmlab.surfaces import SurfaceSpec

BASIC = """\
[surface]
kind = disk

[run]
levels = 0, 1
checks = IC, PPC_A
jacobi_count = 4
hodge_count = 4
"""


def test_parse_basic():
    cfg = parse_config(BASIC)
    assert cfg.surface.kind == "disk" and cfg.levels == (0, 1) and cfg.checks == ("IC", "PPC_A")
    assert not cfg.deterministic and cfg.seed == 0


def test_parse_full():
    text = BASIC + "seed = 7\ndeterministic = yes\nquadrature = monte_carlo\n[tolerances]\nppc_a = 0.01\n"
    cfg = parse_config(text)
    assert cfg.seed == 7 and cfg.deterministic and cfg.tolerance("PPC_A") == 0.01


@pytest.mark.parametrize(
    "text,line,match",
    [
        ("[surface]\nkind = synthetic\ngenus = 1\nholes = 0\n", 4, "holes"),
        ("[surface]\nkind = disk\n[run]\nlevels = 0, 2, 1\n", 4, "strictly increasing"),
        ("[surface]\nkind = disk\n[run]\njacobi_count = 0\n", 4, ">= 1"),
        ("[surface]\nkind = disk\n[run]\nlevels 0\n", 4, "cannot parse"),
        ("[surface]\nkind = cube\n", 2, "unknown surface"),
        ("[surface]\nkind = disk\ncolor = red\n", 3, "unknown key"),
        ("[surface]\nkind = disk\n[run]\ndeterministic = maybe\n", 4, "boolean"),
        ("[surface]\nkind = disk\n[run]\nchecks = PPC_A, FOO\n", 4, "unknown checks"),
        ("[surface]\nkind = synthetic\ngenus = 1\n[run]\nchecks = JC\n", 5, "analytic"),
        ("[surface]\nkind = disk\n[extra]\na = 1\n", 3, "unknown section"),
    ],
)
def test_config_errors_carry_line_numbers(text, line, match):
    with pytest.raises(ConfigError, match=match) as info:
        parse_config(text, "run.ini")
    assert info.value.lineno == line
    if line:
        assert f"run.ini:{line}:" in str(info.value)


def test_missing_kind():
    with pytest.raises(ConfigError, match="kind"):
        parse_config("[run]\nlevels = 0\n")


def test_config_hash_ignores_output_location():
    a = parse_config(BASIC)
    b = parse_config(BASIC + "out = elsewhere\n")
    assert a.config_hash == b.config_hash
    c = parse_config(BASIC.replace("0, 1", "0, 2"))
    assert a.config_hash != c.config_hash


def test_run_config_writes_artifacts(tmp_path, capsys):
    cfg = parse_config(BASIC)
    status = run_config(cfg, out=tmp_path)
    assert status == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    paths = {a["path"] for a in man["artifacts"]}
    assert {"meshes/disk_L0.off", "spectra/jacobi_L1.csv", "spectra/hodge_absolute_L0.csv",
            "reports/IC.json", "reports/PPC_A.json", "summary.csv", "summary.txt"} <= paths
    assert man["config_hash"] == cfg.config_hash and not man["partial"] and man["exit_status"] == 0
    assert (tmp_path / "summary.csv").read_text().splitlines()[0] == cli.SUMMARY_HEADER
    out = capsys.readouterr().out
    assert "lambda_1(J)" in out and "PPC_A" in out
    assert not list(tmp_path.rglob("*.tmp*"))


def test_disk_summary_signs(tmp_path):
    cfg = parse_config(BASIC.replace("checks = IC, PPC_A", "checks = IC"))
    run_config(cfg, out=tmp_path)
    lines = dict(l.split()[:2] for l in (tmp_path / "summary.txt").read_text().splitlines() if l.startswith("lambda"))
    assert float(lines["lambda_1(J)"]) < 0 < float(lines["lambda_1(Delta_1)"])


def test_failing_check_sets_exit_status(tmp_path):
    cfg = RunConfig(SurfaceSpec("catenoid"), levels=(0,), checks=("PPC_A",), tolerances={"PPC_A": 1e-9})
    assert run_config(cfg, stages=("verify",), out=tmp_path) == 1
    assert json.loads((tmp_path / "manifest.json").read_text())["exit_status"] == 1


def test_pipeline_failure_is_flagged(tmp_path, monkeypatch):
    def boom(run):
        raise RuntimeError("solver exploded")

    monkeypatch.setitem(cli._STAGE_FUNCS, "hodge", boom)
    with pytest.raises(PipelineError, match="hodge") as info:
        run_config(parse_config(BASIC), out=tmp_path)
    assert info.value.stage == "hodge"
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["partial"] and man["failed_stage"] == "hodge"


def test_synthetic_runs_laplacian_spectrum(tmp_path):
    cfg = RunConfig(SurfaceSpec("synthetic", 1, 1), levels=(0,), jacobi_count=4, hodge_count=4)
    assert run_config(cfg, stages=("generate", "spectrum", "hodge"), out=tmp_path) == 0
    betti = (tmp_path / "spectra" / "betti.csv").read_text().splitlines()
    assert betti[1].split(",")[1:4] == ["2", "2", "2"]
    assert (tmp_path / "spectra" / "laplacian_L0.csv").exists()


def test_matrix_market_dumps(tmp_path):
    cfg = RunConfig(SurfaceSpec("disk"), levels=(0,), jacobi_count=2, hodge_count=2, dump_matrices=True)
    run_config(cfg, stages=("spectrum", "hodge"), out=tmp_path)
    assert (tmp_path / "operators" / "jacobi_A_L0.mtx").exists()
    assert (tmp_path / "operators" / "hodge_M_L0.mtx").exists()


def test_convergence_study_area():
    cfg = RunConfig(SurfaceSpec("disk"), levels=(0, 1, 2))
    table = convergence_study(cfg, "disk_area")
    assert table.reference == math.pi and table.oracle
    assert abs(table.observed_order - 2) < 0.2
    lines = table.to_csv().splitlines()
    assert lines[0] == cli.RATE_HEADER and len(lines) == 4


def test_convergence_study_errors():
    with pytest.raises(ConfigError, match="3 levels"):
        convergence_study(RunConfig(SurfaceSpec("disk"), levels=(0, 1)), "disk_area")
    with pytest.raises(ConfigError, match="unknown quantity"):
        convergence_study(RunConfig(SurfaceSpec("disk")), "volume")


def test_rate_table_non_monotone_is_na():
    t = RateTable("q", (0, 1, 2), (0.4, 0.2, 0.1), (1.0, 1.1, 1.05), 1.0, (0.0, 0.1, 0.05), (None, 1.0), True)
    rows = t.to_csv().splitlines()
    assert rows[2].split(",")[-1] == "n/a"  # error grew from level 0 to 1
    assert rows[3].split(",")[-1] == "1"


def test_main_generate_and_study(tmp_path, capsys):
    assert main(["generate", "--surface", "catenoid", "--levels", "0,1", "--out", str(tmp_path / "g")]) == 0
    assert (tmp_path / "g" / "meshes" / "catenoid_L1.off").exists()
    assert main(["study", "--surface", "disk", "--levels", "0,1,2", "--quantity", "disk_neumann_lambda1",
                 "--out", str(tmp_path / "s")]) == 0
    text = (tmp_path / "s" / "rate_disk_neumann_lambda1.csv").read_text()
    order = float(text.splitlines()[-1].split(",")[-1])
    assert 1.7 < order < 2.3


def test_main_study_infers_surface(tmp_path, capsys):
    assert main(["study", "--quantity", "catenoid_a2_max", "--levels", "0,1,2", "--out", str(tmp_path)]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == cli.RATE_HEADER and len(rows) == 4


def test_main_reports_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[surface]\nkind = synthetic\nholes = 0\n")
    assert main(["verify", "--config", str(bad)]) == 2
    assert "bad.ini:3" in capsys.readouterr().err
    assert main(["verify"]) == 2
    assert main(["spectrum", "--surface", "disk", "--levels", "1,0"]) == 2


def test_main_verify_with_checks(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(BASIC)
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "o"), "--checks", "IC",
                 "--deterministic", "--seed", "3"]) == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["config"]["checks"] == ["IC"] and man["config"]["seed"] == 3
