import json
import math

import numpy as np
import pytest

from hhquery.harness import cli, selftest
from hhquery.harness.config import ConfigError, ExperimentConfig, Sweep, read_config_file, validate
from hhquery.harness.runner import CSV_HEADER, compare_bounds, run_experiment, trial_seed, write_csv

SMALL = ExperimentConfig(trials=3, workers=1, reproducible=True)


class TestConfig:
    def test_defaults_validate(self):
        assert validate(ExperimentConfig()) is not None

    @pytest.mark.parametrize(
        "kw, path",
        [
            ({"gamma": 1.5}, "gamma"),
            ({"delta": 0.0}, "delta"),
            ({"pe": 0.6, "model": "qm2n"}, "pe"),
            ({"pe": 0.1}, "pe"),
            ({"model": "qm3"}, "model"),
            ({"bound_kind": "chernoff"}, "bound_kind"),
            ({"trials": 0}, "trials"),
            ({"gamma": 0.2}, "gamma"),
            ({"sweep": Sweep("p3", 0.1, 0.2, 0)}, "sweep.steps"),
            ({"sweep": Sweep("mass", 0.1, 0.2, 3)}, "sweep.axis"),
            # second point of the grid lands on p = 0.2
            ({"sweep": Sweep("gamma", 0.1, 0.3, 5)}, "sweep[0]"),
        ],
    )
    def test_field_paths(self, kw, path):
        with pytest.raises(ConfigError) as err:
            validate(ExperimentConfig(**kw))
        assert err.value.path == path

    def test_sweep_points(self):
        cfg = ExperimentConfig(sweep=Sweep.parse("p3:0.13:0.19:7"))
        pts = cfg.points()
        assert len(pts) == 7 and pts[0][1].probs[2] == pytest.approx(0.13)
        cfg = ExperimentConfig(dist_spec="zipf:1:12", sweep=Sweep.parse("zipf-beta:0.5:1.5:3"))
        assert [d.k for _, d, _ in cfg.points()] == [12, 12, 12]
        assert str(Sweep.parse("gamma:0.025:0.405:20")) == "gamma:0.025:0.405:20"
        with pytest.raises(ConfigError):
            Sweep.parse("gamma:0.1:0.2")

    def test_file_and_overrides(self, tmp_path):
        f = tmp_path / "exp.cfg"
        f.write_text("# comment\nmodel = qm2\nalgo-bound = hoeffding\ngamma = 0.12  # inline\ntrials = 4\n")
        vals = read_config_file(str(f))
        assert vals == {"model": "qm2", "bound_kind": "hoeffding", "gamma": 0.12, "trials": 4}
        ns = cli._parser().parse_args(["run", "--config", str(f), "--trials", "2", "--workers", "1"])
        cfg = cli.build_config(ns)
        assert cfg.model == "qm2" and cfg.trials == 2 and cfg.bound_kind == "hoeffding"

    def test_file_errors(self, tmp_path):
        f = tmp_path / "bad.cfg"
        f.write_text("model qm1\n")
        with pytest.raises(ConfigError, match="bad.cfg:1"):
            read_config_file(str(f))
        f.write_text("colour = red\n")
        with pytest.raises(ConfigError) as err:
            read_config_file(str(f))
        assert err.value.path == "colour"
        f.write_text("trials = many\n")
        with pytest.raises(ConfigError):
            read_config_file(str(f))


class TestRunner:
    def test_seeds(self):
        assert trial_seed(0, 0, 0) != trial_seed(0, 0, 1) != trial_seed(0, 1, 0)
        assert trial_seed(3, 2, 1) == trial_seed(3, 2, 1)

    def test_records_and_summary(self):
        recs, summary = run_experiment(SMALL.with_(sweep=Sweep.parse("p3:0.13:0.19:2")))
        assert len(recs) == 6 and len(summary["points"]) == 2
        pt = summary["points"][0]
        assert pt["trials"] == 3 and 0 <= pt["success_rate"] <= 1
        assert pt["thm_upper"] > pt["thm_lower"] > 0
        assert all(r.wall_ms == 0 for r in recs)

    def test_csv_header_and_reproducibility(self, tmp_path):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for p in paths:
            recs, _ = run_experiment(SMALL.with_(model="qm2"))
            write_csv(str(p), recs)
        a, b = (p.read_bytes() for p in paths)
        assert a == b
        assert a.decode().splitlines()[0] == ",".join(CSV_HEADER)
        assert CSV_HEADER == ["sweep_value", "trial", "seed", "success", "queries", "rounds", "thm_lower", "thm_upper", "wall_ms"]

    def test_parallel_matches_serial(self):
        a, _ = run_experiment(SMALL.with_(trials=4))
        b, _ = run_experiment(SMALL.with_(trials=4, workers=2))
        key = lambda rs: [(r.trial, r.seed, r.success, r.queries, r.rounds) for r in rs]
        assert key(a) == key(b)

    def test_compare_bounds_shares_seeds(self):
        out = compare_bounds(SMALL.with_(trials=2))
        assert set(out) == {"kl", "hoeffding", "bernstein"}
        with pytest.raises(ConfigError):
            compare_bounds(SMALL.with_(model="qm2"))

    def test_qm2n_skips_infeasible_points(self):
        cfg = SMALL.with_(model="qm2n", dist_spec="explicit:0.7,0.3", gamma=0.4, delta=0.25, pe=0.1, t0_cap=100)
        recs, summary = run_experiment(cfg)
        assert recs == [] and len(summary["skipped"]) == 1
        recs, summary = run_experiment(cfg.with_(t0=20))
        assert len(recs) == 3
        assert math.isnan(summary["points"][0]["thm_lower"])


class TestCli:
    def test_run_writes_outputs(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        code = cli.main(["run", "--trials", "2", "--workers", "1", "--reproducible", "--out", str(out)])
        assert code == cli.EXIT_OK
        summary = json.loads(out.with_suffix(".json").read_text())
        assert summary["config"]["trials"] == 2
        assert len(out.read_text().splitlines()) == 3

    def test_config_error_exit(self, capsys):
        assert cli.main(["run", "--gamma", "1.5"]) == cli.EXIT_CONFIG
        assert "gamma" in capsys.readouterr().err
        assert cli.main(["run", "--config", "/nonexistent.cfg"]) == cli.EXIT_CONFIG

    def test_abort_exit(self, capsys):
        code = cli.main([
            "run", "--model", "qm2n", "--dist", "explicit:0.7,0.3", "--gamma", "0.4", "--delta", "0.25",
            "--pe", "0.1", "--t0-cap", "100", "--trials", "1", "--workers", "1",
        ])
        assert code == cli.EXIT_ABORT

    def test_bounds_json(self, capsys):
        assert cli.main(["bounds", "--dist", "explicit:0.3,0.25,0.2,0.15,0.1", "--gamma", "0.12", "--delta", "0.1"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["thm1_upper"]["argmax"] == 5
        assert out["thm1_upper"]["value"] == pytest.approx(65351.4864342724)
        assert out["t_prime"] == 37

    def test_selftest(self, capsys):
        assert cli.main(["selftest"]) == cli.EXIT_OK
        assert all(ok for _, ok in selftest.run())
        assert "FAIL" not in capsys.readouterr().out


def test_gamma_sweep_values():
    np.testing.assert_allclose(Sweep.parse("gamma:0.025:0.405:20").values()[:3], [0.025, 0.045, 0.065])
