import json
import math

import numpy as np
import pytest

from nsmlimit.cli import main
from nsmlimit.diagnostics import LEDGER_COLUMNS
from nsmlimit.errors import ConfigError
from nsmlimit.harness import (
    RunConfig,
    default_config_text,
    fit_rate,
    load_snapshots,
    parse_config_text,
    run_single,
    run_sweep,
    summarize_sweep,
    write_record,
)

SHORT_CONFIG = """\
[grid]
dims_active = 1
points_per_dim = 64

[step]
dt = 2e-4
t_end = 0.01

[sweep]
kappa_list = 0.4, 0.2, 0.1

[diagnostics]
snapshot_stride = 10
"""


class TestConfigParsing:
    def test_default_roundtrip(self):
        cfg = parse_config_text(default_config_text())
        assert cfg.grid.points_per_dim == 64
        assert cfg.params.epsilon == 0.1
        assert cfg.kappa_list == (0.4, 0.2, 0.1, 0.05)
        assert cfg.l == 4.0
        assert cfg.config_hash == parse_config_text(default_config_text()).config_hash

    def test_minimal_config_uses_defaults(self):
        cfg = parse_config_text(SHORT_CONFIG)
        assert cfg.step.t_end == 0.01
        assert cfg.params.mu == 0.1
        assert cfg.initial.c0 == 1.0

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config_text("[grid]\npoints = 64\n")

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="unknown config section"):
            parse_config_text("[grids]\ndims_active = 1\n")

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError, match="bad value"):
            parse_config_text("[grid]\npoints_per_dim = many\n")

    def test_kappa_list_must_decrease(self):
        with pytest.raises(ConfigError, match="strictly decreasing"):
            parse_config_text("[sweep]\nkappa_list = 0.1, 0.2\n")

    def test_kappa_list_bounds(self):
        with pytest.raises(ConfigError):
            parse_config_text("[sweep]\nkappa_list = 1.5, 0.2, 0.1\n")


class TestFitRate:
    def test_exact_slope_one(self):
        fit = fit_rate([(1.0, 1.0), (0.5, 0.5), (0.25, 0.25)])
        assert fit.slope == pytest.approx(1.0, abs=1e-12)
        assert fit.r2 == pytest.approx(1.0, abs=1e-12)

    def test_exact_slope_two(self):
        fit = fit_rate([(1.0, 1.0), (0.5, 0.25)])
        assert fit.slope == pytest.approx(2.0, abs=1e-12)

    def test_noisy_slope_within_band(self):
        rng = np.random.default_rng(17)
        kappas = np.array([0.8, 0.4, 0.2, 0.1, 0.05, 0.025])
        errors = 0.3 * kappas * (1.0 + 0.05 * rng.standard_normal(6))
        fit = fit_rate(zip(kappas, errors))
        assert 0.9 <= fit.slope <= 1.1

    def test_nonpositive_excluded_with_warning(self):
        with pytest.warns(UserWarning, match="excluding"):
            fit = fit_rate([(1.0, 1.0), (0.5, 0.5), (0.25, 0.0)])
        assert fit.n_used == 2
        assert fit.excluded == ((0.25, 0.0),)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_rate([(1.0, 1.0)])


class TestSummarizeSweep:
    def test_synthetic_injection_linear(self):
        kappas = [0.4, 0.2, 0.1, 0.05]
        summary = summarize_sweep(kappas, [0.3 * k for k in kappas], "hash")
        assert summary["slope"] == pytest.approx(1.0, abs=1e-12)
        assert summary["r2"] == pytest.approx(1.0, abs=1e-12)
        assert summary["intercept"] == pytest.approx(math.log(0.3), abs=1e-12)

    def test_synthetic_injection_quadratic(self):
        kappas = [0.4, 0.2, 0.1, 0.05]
        summary = summarize_sweep(kappas, [0.3 * k**2 for k in kappas], "hash")
        assert summary["slope"] == pytest.approx(2.0, abs=1e-12)

    def test_schema_keys(self):
        summary = summarize_sweep([1.0, 0.5, 0.25], [1.0, 0.5, 0.25], "abc")
        assert list(summary.keys()) == [
            "kappa", "sup_error", "slope", "intercept", "r2", "config_hash",
        ]


class TestRunSingle:
    def test_zero_perturbation_gamma_floor(self):
        # with c0 = 0 both solvers march the same solution; Gamma stays at
        # the paired-splitting roundoff floor
        text = SHORT_CONFIG + "\n[initial]\nseed = 7\nc0 = 0.0\n"
        cfg = parse_config_text(text)
        rec = run_single(cfg, kappa=0.2)
        assert rec.status == "completed"
        assert rec.gammas().max() <= 1e-10

    def test_t_end_zero_initial_row_only(self):
        cfg = parse_config_text(SHORT_CONFIG.replace("t_end = 0.01", "t_end = 0.0"))
        rec = run_single(cfg, kappa=0.2)
        assert len(rec.rows) == 1
        assert rec.rows[0].t == 0.0
        assert rec.n_steps == 0

    def test_rerun_is_bit_identical(self):
        cfg = parse_config_text(SHORT_CONFIG)
        a = run_single(cfg, kappa=0.2)
        b = run_single(cfg, kappa=0.2)
        assert a.rows == b.rows
        assert a.certificates == b.certificates

    def test_certificates_recorded(self):
        cfg = parse_config_text(SHORT_CONFIG)
        rec = run_single(cfg, kappa=0.1)
        assert rec.certificates["satisfied"]
        assert rec.certificates["hypothesis_norm"] <= 0.1


class TestPersistence:
    def test_written_files_and_header(self, tmp_path):
        cfg = parse_config_text(SHORT_CONFIG)
        rec = run_single(cfg, kappa=0.2)
        paths = write_record(rec, tmp_path)
        csv_text = paths["csv"].read_text()
        header = csv_text.splitlines()[0]
        assert header == ",".join(LEDGER_COLUMNS)
        assert header == (
            "t,gamma,norm_N,norm_U,norm_J,norm_E,norm_B,enthalpy_fn,"
            "weighted_high,diss_U,diss_J,divE,divB,mass_err"
        )
        assert paths["json"].exists() and paths["npz"].exists()
        assert not list(tmp_path.glob("*.tmp"))
        payload = json.loads(paths["json"].read_text())
        assert payload["kappa"] == 0.2
        assert payload["status"] == "completed"
        assert "wall" not in json.dumps(payload)  # timings live in the sidecar
        assert paths["time"].read_text().startswith("wall_seconds")

    def test_snapshot_roundtrip(self, tmp_path):
        cfg = parse_config_text(SHORT_CONFIG)
        rec = run_single(cfg, kappa=0.2)
        paths = write_record(rec, tmp_path)
        kappa, snaps = load_snapshots(paths["npz"])
        assert kappa == 0.2
        assert len(snaps) == len(rec.snapshots)
        t0, full0, limit0 = snaps[0]
        assert np.array_equal(full0.n.values, rec.snapshots[0][1].n.values)
        assert np.array_equal(limit0.u.values, rec.snapshots[0][2].u.values)


class TestRunSweep:
    def test_needs_three_kappas(self, tmp_path):
        cfg = parse_config_text(SHORT_CONFIG.replace(
            "kappa_list = 0.4, 0.2, 0.1", "kappa_list = 0.4, 0.2"))
        with pytest.raises(ConfigError, match="at least 3"):
            run_sweep(cfg, out_dir=tmp_path)

    def test_summary_written_and_sane(self, tmp_path):
        cfg = parse_config_text(SHORT_CONFIG)
        result = run_sweep(cfg, out_dir=tmp_path)
        summary = json.loads((tmp_path / "sweep_summary.json").read_text())
        assert summary == result.summary
        assert len(summary["kappa"]) == 3
        assert 0.8 <= summary["slope"] <= 1.3

    def test_byte_identical_outputs(self, tmp_path):
        cfg = parse_config_text(SHORT_CONFIG)
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        run_sweep(cfg, out_dir=out1)
        run_sweep(cfg, out_dir=out2)
        for name in sorted(p.name for p in out1.glob("*.csv")):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        for name in sorted(p.name for p in out1.glob("*.json")):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


class TestCli:
    def test_run_exit_zero(self, tmp_path):
        cfg_path = tmp_path / "cfg.ini"
        cfg_path.write_text(SHORT_CONFIG)
        rc = main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "out"),
                   "--kappa", "0.2"])
        assert rc == 0
        assert (tmp_path / "out" / "run_kappa0.2.csv").exists()

    def test_config_error_exit_two(self, tmp_path):
        cfg_path = tmp_path / "cfg.ini"
        cfg_path.write_text("[grid]\nbogus = 1\n")
        assert main(["run", "--config", str(cfg_path)]) == 2

    def test_missing_config_exit_two(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.ini")]) == 2

    def test_sweep_exit_zero(self, tmp_path):
        cfg_path = tmp_path / "cfg.ini"
        cfg_path.write_text(SHORT_CONFIG)
        rc = main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / "out")])
        assert rc == 0
        assert (tmp_path / "out" / "sweep_summary.json").exists()

    def test_reform_check_exit_zero(self, tmp_path):
        rc = main(["reform-check", "--states", "3"])
        assert rc == 0

    def test_moser_exit_zero(self, tmp_path):
        rc = main(["moser", "--pairs", "5"])
        assert rc == 0

    def test_audit_subcommand(self, tmp_path):
        cfg_path = tmp_path / "cfg.ini"
        text = SHORT_CONFIG.replace("snapshot_stride = 10", "snapshot_stride = 5")
        cfg_path.write_text(text)
        out = tmp_path / "out"
        assert main(["run", "--config", str(cfg_path), "--out", str(out),
                     "--kappa", "0.1"]) == 0
        rc = main(["audit", "--config", str(cfg_path),
                   "--record", str(out / "run_kappa0.1_snapshots.npz")])
        assert rc == 0

    def test_seed_override_changes_outputs(self, tmp_path):
        cfg_path = tmp_path / "cfg.ini"
        cfg_path.write_text(SHORT_CONFIG)
        outs = []
        for seed, sub in ((1, "o1"), (2, "o2")):
            out = tmp_path / sub
            main(["run", "--config", str(cfg_path), "--out", str(out),
                  "--seed", str(seed), "--kappa", "0.2"])
            outs.append((out / "run_kappa0.2.csv").read_text())
        assert outs[0] != outs[1]


class TestParallelSweep:
    def test_jobs_two_matches_sequential(self, tmp_path):
        cfg = parse_config_text(SHORT_CONFIG)
        seq = tmp_path / "seq"
        par = tmp_path / "par"
        run_sweep(cfg, out_dir=seq, jobs=1)
        run_sweep(cfg, out_dir=par, jobs=2)
        for name in sorted(p.name for p in seq.glob("*.csv")):
            assert (seq / name).read_bytes() == (par / name).read_bytes()
        s1 = json.loads((seq / "sweep_summary.json").read_text())
        s2 = json.loads((par / "sweep_summary.json").read_text())
        assert s1 == s2
