"""Command-line contract: config grammar, exit codes, experiment registry.

Frozen behaviors:
  * config files are `key = JSON` lines; blank lines and # comments are
    skipped, anything else is a hard parse error naming the offending line.
  * exit codes follow the shell contract: 0 all checks pass, 1 a check
    fails, 2 unknown experiment or malformed input.
  * the registry always carries the nine named experiments, each with a
    one-line formula anchor; unknown names get close-match suggestions.
  * `report run` is byte-deterministic: identical config + seed produce an
    identical report JSON, and every CSV series gets a PNG next to it.
  * `rumin naive-demo --alpha 0.25` writes a (t, norm) CSV whose log-log
    slope sits at 2*alpha = 0.5.
"""

import json
from fractions import Fraction

import numpy as np
import pytest
from click.testing import CliRunner

from st2 import cli
from st2.cli import experiment_config, list_experiments, parse_config, run
from st2.report import loglog_fit
from st2.tropical import BoundingMatrix

REQUIRED_EXPERIMENTS = {
    "heisenberg-weights",
    "carnot-dilation",
    "shear-torus",
    "nctorus",
    "mobius",
    "nilflow",
    "interp-region",
    "g2-cone",
    "rumin-symbols",
}

RUMIN_ROWS = [[0, 0], [1, Fraction(1, 2)]]
SWAP_ROWS = [[0, 2], [2, 0]]


def invoke(args, **kw):
    return CliRunner().invoke(cli.main, args, catch_exceptions=False, **kw)


def all_output(result):
    # click >= 8.2 keeps stderr separate; older versions merge it
    out = result.output
    try:
        out += result.stderr
    except (ValueError, AttributeError):
        pass
    return out


def write_matrix(tmp_path, rows, name="m.json"):
    p = tmp_path / name
    p.write_text(json.dumps(BoundingMatrix(rows).to_json()))
    return str(p)


class TestParseConfig:
    def test_basic(self):
        text = '# demo\nexperiment = "g2-cone"\n\nseed = 7\nladder = [2, 4, 8]\ntag = {"a": 1}\n'
        assert parse_config(text) == {
            "experiment": "g2-cone",
            "seed": 7,
            "ladder": [2, 4, 8],
            "tag": {"a": 1},
        }

    def test_missing_equals_names_line(self):
        with pytest.raises(ValueError, match="line 2"):
            parse_config('seed = 1\nexperiment "g2-cone"\n')

    def test_bad_json_value(self):
        with pytest.raises(ValueError, match="JSON"):
            parse_config("seed = {nope\n")

    def test_empty_key(self):
        with pytest.raises(ValueError, match="key"):
            parse_config("= 3\n")

    def test_last_duplicate_wins(self):
        assert parse_config("seed = 1\nseed = 2\n")["seed"] == 2


class TestExperimentConfig:
    def test_defaults(self):
        cfg = experiment_config({"experiment": "g2-cone"})
        assert cfg.experiment == "g2-cone"
        assert cfg.seed == 20260814
        assert cfg.outdir == "."
        assert cfg.ladder is None
        assert cfg.inputs == {}
        assert cfg.anticommute_tol is None
        assert cfg.slope_tol is None
        assert cfg.psd_tol is None

    def test_extra_keys_become_inputs(self):
        cfg = experiment_config(
            {"experiment": "rumin-symbols", "n": 16, "matrix_file": "m.json"}
        )
        assert cfg.inputs == {"n": 16, "matrix_file": "m.json"}

    def test_ladder_becomes_tuple(self):
        cfg = experiment_config({"experiment": "x", "ladder": [2, 4, 8]})
        assert cfg.ladder == (2, 4, 8)

    def test_ladder_must_increase(self):
        with pytest.raises(ValueError, match="increasing"):
            experiment_config({"experiment": "x", "ladder": [2, 2, 8]})

    def test_ladder_must_be_numeric(self):
        with pytest.raises(ValueError, match="ladder"):
            experiment_config({"experiment": "x", "ladder": ["a", "b"]})

    def test_requires_experiment(self):
        with pytest.raises(ValueError, match="experiment"):
            experiment_config({"seed": 1})

    def test_seed_override(self):
        assert experiment_config({"experiment": "x", "seed": 5}, seed=9).seed == 9

    def test_outdir_override(self):
        assert experiment_config({"experiment": "x", "out": "a"}, outdir="b").outdir == "b"

    def test_seed_must_be_integer(self):
        with pytest.raises(ValueError, match="integer"):
            experiment_config({"experiment": "x", "seed": 1.5})

    def test_tolerances(self):
        cfg = experiment_config(
            {
                "experiment": "x",
                "slope_tol": 0.1,
                "psd_tol": 1e-9,
                "anticommute_tol": 1e-11,
            }
        )
        assert cfg.slope_tol == 0.1
        assert cfg.psd_tol == 1e-9
        assert cfg.anticommute_tol == 1e-11

    def test_tolerances_must_be_positive(self):
        with pytest.raises(ValueError, match="positive"):
            experiment_config({"experiment": "x", "slope_tol": 0})


class TestRegistry:
    def test_required_names_present(self):
        assert REQUIRED_EXPERIMENTS <= set(list_experiments())

    def test_anchors_are_one_line(self):
        for name, anchor in list_experiments().items():
            assert isinstance(anchor, str) and anchor.strip(), name
            assert "\n" not in anchor

    def test_unknown_name_suggests_close_match(self):
        with pytest.raises(ValueError, match="nctorus"):
            run(experiment_config({"experiment": "nctoru"}))

    def test_run_writes_report_and_returns_code(self, tmp_path):
        cfg = experiment_config({"experiment": "g2-cone"}, outdir=str(tmp_path))
        assert run(cfg) == 0
        assert (tmp_path / "g2-cone-report.json").exists()


class TestConeCommands:
    def test_check_pass(self, tmp_path):
        res = invoke(["cone", "check", "--matrix", write_matrix(tmp_path, RUMIN_ROWS)])
        assert res.exit_code == 0, all_output(res)
        assert "PASS" in res.output and "decreasing-cycle" in res.output

    def test_check_fail(self, tmp_path):
        res = invoke(["cone", "check", "--matrix", write_matrix(tmp_path, SWAP_ROWS)])
        assert res.exit_code == 1
        assert "FAIL" in res.output

    def test_check_missing_file(self, tmp_path):
        res = invoke(["cone", "check", "--matrix", str(tmp_path / "nope.json")])
        assert res.exit_code == 2

    def test_check_bad_json(self, tmp_path):
        p = tmp_path / "junk.json"
        p.write_text("{not json")
        res = invoke(["cone", "check", "--matrix", str(p)])
        assert res.exit_code == 2

    def test_point_inside(self, tmp_path):
        m = write_matrix(tmp_path, RUMIN_ROWS)
        res = invoke(["cone", "check", "--matrix", m, "--point", '["1", "1/2"]'])
        assert res.exit_code == 0, all_output(res)
        assert "point-membership" in res.output

    def test_point_outside(self, tmp_path):
        m = write_matrix(tmp_path, RUMIN_ROWS)
        res = invoke(["cone", "check", "--matrix", m, "--point", "[1, 2]"])
        assert res.exit_code == 1

    def test_sample(self, tmp_path):
        m = write_matrix(tmp_path, RUMIN_ROWS)
        res = invoke(["cone", "sample", "--matrix", m])
        assert res.exit_code == 0, all_output(res)
        assert "sample" in res.output


class TestNaiveDemo:
    def test_csv_png_and_slope(self, tmp_path):
        res = invoke(["rumin", "naive-demo", "--alpha", "0.25", "--out", str(tmp_path)])
        assert res.exit_code == 0, all_output(res)
        csv = tmp_path / "naive-demo-alpha0.25.csv"
        assert csv.exists()
        assert csv.read_text().splitlines()[0] == "t,norm"
        data = np.loadtxt(csv, delimiter=",", skiprows=1)
        slope, _, _ = loglog_fit(data[:, 0], data[:, 1])
        assert abs(slope - 0.5) < 0.05
        assert (tmp_path / "naive-demo-alpha0.25.png").exists()

    def test_ladder_mode_alpha_zero(self, tmp_path):
        res = invoke(
            ["rumin", "naive-demo", "--alpha", "0", "--ladder", "32,64,128",
             "--out", str(tmp_path)]
        )
        assert res.exit_code == 0, all_output(res)
        assert "bounded" in res.output

    def test_alpha_required(self):
        res = invoke(["rumin", "naive-demo"])
        assert res.exit_code == 2


class TestReportRun:
    def _config(self, tmp_path, text, name="exp.cfg"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    def test_g2_cone_outputs(self, tmp_path):
        cfgp = self._config(tmp_path, 'experiment = "g2-cone"\n')
        out = tmp_path / "out"
        res = invoke(["report", "run", "--config", cfgp, "--out", str(out)])
        assert res.exit_code == 0, all_output(res)
        blob = json.loads((out / "g2-cone-report.json").read_text())
        assert blob["schema"] == "st2.report.v1"
        assert blob["report"]["passed"] is True
        assert blob["report"]["anchor"]
        names = {c["name"] for c in blob["report"]["checks"]}
        assert "decreasing-cycle" in names and "ray-membership" in names
        csvs = list(out.glob("*.csv"))
        assert csvs
        for c in csvs:
            assert c.with_suffix(".png").exists()

    def test_deterministic_bytes(self, tmp_path):
        cfgp = self._config(
            tmp_path, 'experiment = "carnot-dilation"\nsamples = 25\nseed = 11\n'
        )
        payloads = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            res = invoke(["report", "run", "--config", cfgp, "--out", str(out)])
            assert res.exit_code == 0, all_output(res)
            payloads.append((out / "carnot-dilation-report.json").read_bytes())
        assert payloads[0] == payloads[1]

    def test_seed_flag_overrides_config(self, tmp_path):
        cfgp = self._config(
            tmp_path, 'experiment = "carnot-dilation"\nsamples = 25\nseed = 11\n'
        )
        out = tmp_path / "s"
        res = invoke(["report", "run", "--config", cfgp, "--out", str(out), "--seed", "12"])
        assert res.exit_code == 0, all_output(res)
        blob = json.loads((out / "carnot-dilation-report.json").read_text())
        assert blob["config"]["seed"] == 12

    def test_heisenberg_sampling_inputs(self, tmp_path):
        cfgp = self._config(
            tmp_path,
            'experiment = "heisenberg-weights"\nsamples_per_radius = 300\n'
            "g_samples = [[1, 0, 0], [0, 1, 0], [2, 1, 3]]\n",
        )
        out = tmp_path / "h"
        res = invoke(["report", "run", "--config", cfgp, "--out", str(out)])
        assert res.exit_code == 0, all_output(res)
        blob = json.loads((out / "heisenberg-weights-report.json").read_text())
        assert blob["report"]["data"]["g_samples"] == [[1, 0, 0], [0, 1, 0], [2, 1, 3]]

    def test_heisenberg_rejects_scalar_g_samples(self, tmp_path):
        # a count here is a config mistake: the knob for that is samples_per_radius
        cfgp = self._config(tmp_path, 'experiment = "heisenberg-weights"\ng_samples = 2000\n')
        res = invoke(["report", "run", "--config", cfgp])
        assert res.exit_code == 2
        assert "g_samples" in all_output(res)

    def test_unknown_experiment_suggests(self, tmp_path):
        cfgp = self._config(tmp_path, 'experiment = "g2cone"\n')
        res = invoke(["report", "run", "--config", cfgp])
        assert res.exit_code == 2
        assert "g2-cone" in all_output(res)

    def test_empty_config(self, tmp_path):
        cfgp = self._config(tmp_path, "")
        res = invoke(["report", "run", "--config", cfgp])
        assert res.exit_code == 2
        assert "experiment" in all_output(res)

    def test_malformed_config(self, tmp_path):
        cfgp = self._config(tmp_path, "seed = {x\n")
        res = invoke(["report", "run", "--config", cfgp])
        assert res.exit_code == 2
        assert "line" in all_output(res)

    def test_check_failure_exits_one(self, tmp_path):
        m = write_matrix(tmp_path, SWAP_ROWS, name="swap.json")
        cfgp = self._config(
            tmp_path, f'experiment = "g2-cone"\nmatrix_file = "{m}"\n'
        )
        out = tmp_path / "out"
        res = invoke(["report", "run", "--config", cfgp, "--out", str(out)])
        assert res.exit_code == 1
        blob = json.loads((out / "g2-cone-report.json").read_text())
        assert blob["report"]["passed"] is False

    def test_report_list(self):
        res = invoke(["report", "list"])
        assert res.exit_code == 0
        for name in REQUIRED_EXPERIMENTS:
            assert name in res.output

    def test_rumin_symbols_series(self, tmp_path):
        cfgp = self._config(
            tmp_path,
            'experiment = "rumin-symbols"\nladder = [1, 2]\nn = 16\nalphas = [0.0, 0.25]\n',
        )
        out = tmp_path / "out"
        res = invoke(["report", "run", "--config", cfgp, "--out", str(out)])
        assert res.exit_code == 0, all_output(res)
        blob = json.loads((out / "rumin-symbols-report.json").read_text())
        assert blob["report"]["passed"] is True
        names = {c["name"] for c in blob["report"]["checks"]}
        assert any("cohomology" in n for n in names)
        csvs = list(out.glob("*.csv"))
        assert len(csvs) >= 2
        for c in csvs:
            assert c.with_suffix(".png").exists()

    def test_nilflow_runs(self, tmp_path):
        cfgp = self._config(tmp_path, 'experiment = "nilflow"\n')
        out = tmp_path / "out"
        res = invoke(["report", "run", "--config", cfgp, "--out", str(out)])
        assert res.exit_code == 0, all_output(res)
        blob = json.loads((out / "nilflow-report.json").read_text())
        assert blob["report"]["fits"]


class TestSubcommandSmoke:
    def test_assemble_identity(self):
        res = invoke(
            ["assemble", "identity", "--n-ops", "4", "--qubits", "3",
             "--seed", "5", "--samples", "3"]
        )
        assert res.exit_code == 0, all_output(res)
        assert "assembly-identity" in res.output

    def test_verify_bounded(self):
        res = invoke(["verify", "bounded", "--dim", "20", "--seed", "1"])
        assert res.exit_code == 0, all_output(res)
        assert "bounded-transform" in res.output

    def test_verify_sww(self):
        res = invoke(["verify", "sww", "--dim", "12", "--power", "2", "--seed", "3"])
        assert res.exit_code == 0, all_output(res)
        assert "psd-upper" in res.output

    def test_complex_check_random(self):
        res = invoke(
            ["complex", "check", "--dims", "4,6,3", "--orders", "1,2", "--seed", "7"]
        )
        assert res.exit_code == 0, all_output(res)
        assert "composition" in res.output

    def test_complex_check_file(self, tmp_path):
        from st2.complexes import complex_to_json, random_complex

        c = random_complex(np.random.default_rng(0), (3, 5, 2), (1, 2))
        p = tmp_path / "c.json"
        p.write_text(json.dumps(complex_to_json(c)))
        res = invoke(["complex", "check", "--file", str(p)])
        assert res.exit_code == 0, all_output(res)

    def test_nilpotent_weights(self):
        res = invoke(["nilpotent", "weights", "--radii", "2,4,8,12", "--seed", "3"])
        assert res.exit_code == 0, all_output(res)
        assert "bounded" in res.output

    def test_nilpotent_dilation(self):
        res = invoke(["nilpotent", "dilation", "--samples", "10", "--seed", "2"])
        assert res.exit_code == 0, all_output(res)
        assert "layer-scaling" in res.output

    def test_dynamics_shear(self):
        res = invoke(["dynamics", "shear", "--sizes", "8,16,32"])
        assert res.exit_code == 0, all_output(res)
        assert "divergence-order" in res.output
        assert "dense-agreement" in res.output

    def test_dynamics_mobius(self):
        res = invoke(["dynamics", "mobius"])
        assert res.exit_code == 0, all_output(res)
        assert "parabolic-unit" in res.output

    def test_dynamics_nctorus(self):
        res = invoke(["dynamics", "nctorus", "--cutoff", "12", "--orders", "1,2,4"])
        assert res.exit_code == 0, all_output(res)
        assert "closed-form-match" in res.output

    def test_interp_region(self):
        res = invoke(["interp", "region", "--dim", "12", "--grid", "6", "--seed", "4"])
        assert res.exit_code == 0, all_output(res)
        assert "hadamard-triples" in res.output

    def test_rumin_oscillator(self):
        res = invoke(["rumin", "oscillator", "--n", "16", "--lam", "2"])
        assert res.exit_code == 0, all_output(res)
        assert "cohomology-vanishing" in res.output

    def test_rumin_characters(self):
        res = invoke(["rumin", "characters", "--samples", "25", "--seed", "0"])
        assert res.exit_code == 0, all_output(res)
        assert "partition" in res.output

    def test_help_lists_groups(self):
        res = invoke(["--help"])
        assert res.exit_code == 0
        for group in ("cone", "assemble", "verify", "complex", "nilpotent",
                      "dynamics", "rumin", "interp", "report"):
            assert group in res.output
