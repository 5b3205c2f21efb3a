"""CLI behavior: subcommands, config files, determinism, exit codes."""

import json
from pathlib import Path

import pytest

from carlat.cli import main, parse_number


def run(args):
    return main(args)


def data_files(out_dir):
    """Report data files (excluding the .meta.json sidecars), sorted."""
    return sorted(p for p in Path(out_dir).iterdir()
                  if not p.name.endswith(".meta.json"))


class TestParsing:
    def test_rational_spacings(self):
        assert parse_number("1/64") == 1.0 / 64.0
        assert parse_number("0.125") == 0.125
        assert parse_number(" 3/4 ") == 0.75

    def test_help_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["symbol-scan", "--help"])
        assert exc.value.code == 0
        assert "symbol-scan" in capsys.readouterr().out

    def test_unknown_flag_exits_two(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run(["caccioppoli", "--no-such-flag", "1"])
        assert exc.value.code == 2

    def test_unknown_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            run(["frobnicate"])
        assert exc.value.code == 2


class TestConfigFile:
    def test_config_seeds_flags_and_flags_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("""
# caccioppoli sweep setup
h = 1/16,1/32
input = mixed_jk
r1 = 1.0
r2 = 2.0
out = {}
""".format(tmp_path / "out_a"))
        assert run(["caccioppoli", "--config", str(cfg)]) == 0
        files_a = data_files(tmp_path / "out_a")
        assert len(files_a) == 2
        # flag overrides the config value: different config hash
        assert run(["caccioppoli", "--config", str(cfg),
                    "--out", str(tmp_path / "out_b"), "--r1", "0.9"]) == 0
        ja = json.loads([p for p in files_a if p.suffix == ".json"][0].read_text())
        jb = json.loads([p for p in data_files(tmp_path / "out_b")
                         if p.suffix == ".json"][0].read_text())
        assert ja["config"]["r1"] == 1.0
        assert jb["config"]["r1"] == 0.9

    def test_unknown_config_field_exits_two(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("no_such_key = 7\n")
        assert run(["caccioppoli", "--config", str(cfg)]) == 2
        assert "no_such_key" in capsys.readouterr().err

    def test_bad_config_value_exits_two(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("r1 = not-a-number\n")
        assert run(["caccioppoli", "--config", str(cfg)]) == 2
        assert "r1" in capsys.readouterr().err


class TestDeterminism:
    def test_identical_manifests_identical_bytes(self, tmp_path):
        argv = ["three-balls", "--d", "2", "--h", "1/16,1/32", "--c-ps", "0.01",
                "--seed", "7", "--input", "deg3"]
        assert run(argv + ["--out", str(tmp_path / "a")]) == 0
        assert run(argv + ["--out", str(tmp_path / "b")]) == 0
        files_a = data_files(tmp_path / "a")
        files_b = data_files(tmp_path / "b")
        assert [p.name for p in files_a] == [p.name for p in files_b]
        for pa, pb in zip(files_a, files_b):
            assert pa.read_bytes() == pb.read_bytes()

    def test_carleman_sweep_deterministic_across_jobs(self, tmp_path):
        argv = ["carleman-sweep", "--h", "1/16,1/32", "--tau-fraction", "0.5",
                "--tau0", "1.0", "--samples", "3", "--seed", "3"]
        assert run(argv + ["--out", str(tmp_path / "a"), "--jobs", "1"]) == 0
        assert run(argv + ["--out", str(tmp_path / "b"), "--jobs", "4"]) == 0
        for pa, pb in zip(data_files(tmp_path / "a"), data_files(tmp_path / "b")):
            if pa.suffix == ".csv":
                assert pa.read_bytes() == pb.read_bytes()


class TestWindowAndStrict:
    def test_out_of_window_tau_warns_but_succeeds(self, tmp_path):
        argv = ["carleman-sweep", "--h", "0.5", "--tau", "1000", "--samples", "2",
                "--out", str(tmp_path)]
        assert run(argv) == 0
        report = json.loads([p for p in data_files(tmp_path)
                             if p.suffix == ".json"][0].read_text())
        assert report["warnings"]

    def test_strict_turns_warning_into_failure(self, tmp_path):
        argv = ["carleman-sweep", "--h", "0.5", "--tau", "1000", "--samples", "2",
                "--out", str(tmp_path), "--strict", "1"]
        assert run(argv) == 1


class TestSubcommands:
    def test_symbol_scan_emits_grid_csv_and_summary(self, tmp_path):
        assert run(["symbol-scan", "--h", "1/64", "--tau", "10", "--c0", "0.0025",
                    "--resolution", "64,128", "--out", str(tmp_path)]) == 0
        names = [p.name for p in data_files(tmp_path)]
        assert any(n.endswith("_grid.csv") for n in names)
        grid = [p for p in data_files(tmp_path) if p.name.endswith("_grid.csv")][0]
        header = grid.read_text().splitlines()[0]
        assert header == "xi_1,xi_2,p_r,p_i,q,margin"
        assert len(grid.read_text().splitlines()) == 1 + 64 * 64
        summary = json.loads([p for p in data_files(tmp_path)
                              if p.suffix == ".json"][0].read_text())
        assert "min_margin" in summary["fitted"]

    def test_log_convexity_runs(self, tmp_path):
        assert run(["log-convexity", "--h", "1/32", "--d", "2",
                    "--tau0", "1.0", "--out", str(tmp_path)]) == 0

    def test_localize_runs(self, tmp_path):
        assert run(["localize", "--h", "1/24", "--tau", "4.0", "--eps0", "0.0625",
                    "--out", str(tmp_path)]) == 0

    def test_coarsen_check_runs(self, tmp_path):
        assert run(["coarsen-check", "--h", "1/32", "--m", "2,3", "--out",
                    str(tmp_path)]) == 0

    def test_commutator_check_runs(self, tmp_path):
        assert run(["commutator-check", "--h", "1/16", "--tau", "1.5",
                    "--samples", "2", "--coeff-sites", "50",
                    "--out", str(tmp_path)]) == 0

    def test_singular_potential_runs(self, tmp_path):
        assert run(["singular-potential", "--h", "1/8,1/16", "--mu0", "0.02",
                    "--tau0", "0.2", "--delta0", "0.5", "--out", str(tmp_path)]) == 0

    def test_inadmissible_weight_exits_one(self, tmp_path, capsys):
        # c_ps large enough to break monotonicity fails the startup check
        assert run(["log-convexity", "--h", "1/32", "--c-ps", "10.0",
                    "--out", str(tmp_path)]) == 1
        assert "inadmissible" in capsys.readouterr().err
