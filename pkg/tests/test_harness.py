"""Experiment runners, result serialization, and the CLI.

Runner tests use scaled-down specs (small d, few trials) so the whole
file stays inside a couple of minutes; statistical checks at the sizes
used in practice live in test_acceptance.py.
"""

import csv
import io
import json
import math

import numpy as np
import pytest

from convlin import cli, harness
from convlin.errors import ConfigError, NumericalError
from convlin.harness import (
    CSV_HEADER,
    DEFAULT_N_GRID,
    DEFAULT_TRIALS,
    ExperimentSpec,
    ResultRow,
    derive_seed,
    load_weights,
    rows_to_csv,
    rows_to_json,
    run,
    summarize,
    write_result,
)
from convlin.models import TrainConfig, classification_error, train
from convlin.tasks import sample_training_set, whole_dataset


def tiny_gen_spec(**overrides):
    kw = dict(experiment="gen-curve", d=30, k=3, n=(5, 10), trials=3, seed=1)
    kw.update(overrides)
    return ExperimentSpec(**kw)


class TestSpecValidation:
    def test_defaults_filled(self):
        spec = ExperimentSpec(experiment="gen-curve")
        assert spec.n == DEFAULT_N_GRID
        assert spec.trials == DEFAULT_TRIALS["gen-curve"]
        assert spec.task == "cls"

    def test_single_n_experiments_get_single_default(self):
        assert ExperimentSpec(experiment="init-study").n == (30,)
        assert ExperimentSpec(experiment="prop1-check").n == (9,)
        with pytest.raises(ConfigError):
            ExperimentSpec(experiment="init-study", n=(10, 20))

    def test_parity_curve_forces_task(self):
        spec = ExperimentSpec(experiment="parity-curve", task="cls")
        assert spec.task == "parity"

    def test_rejections(self):
        with pytest.raises(ConfigError):
            ExperimentSpec(experiment="nope")
        with pytest.raises(ConfigError):
            ExperimentSpec(experiment="gen-curve", task="xor")
        with pytest.raises(ConfigError):
            ExperimentSpec(experiment="gen-curve", d=10, k=50)
        with pytest.raises(ConfigError):
            ExperimentSpec(experiment="gen-curve", trials=0)
        with pytest.raises(ConfigError):
            ExperimentSpec(experiment="gen-curve", n=(0,))
        with pytest.raises(ConfigError):
            ExperimentSpec(experiment="gen-curve", format="xml")
        with pytest.raises(ConfigError):
            ExperimentSpec(experiment="gen-curve", models=("conv", "gru"))
        with pytest.raises(ConfigError):
            ExperimentSpec(experiment="gen-curve", xhinge_steps=0)


class TestSeeds:
    def test_frozen_values(self):
        assert derive_seed(0, "gen-curve", 10, 0) == 9017669149816576724
        assert derive_seed(0, "gen-curve", 10, 1) == 16675973924953202282
        assert derive_seed(7, "init-study", 30, 100) == 6105593821606233182

    def test_coordinates_all_matter(self):
        base = derive_seed(3, "gen-curve", 50, 2)
        assert base != derive_seed(4, "gen-curve", 50, 2)
        assert base != derive_seed(3, "asym-vs-losses", 50, 2)
        assert base != derive_seed(3, "gen-curve", 51, 2)
        assert base != derive_seed(3, "gen-curve", 50, 3)

    def test_rerun_is_bit_identical(self):
        a = rows_to_csv(run(tiny_gen_spec()).rows)
        b = rows_to_csv(run(tiny_gen_spec()).rows)
        assert a == b


class TestGenCurve:
    def test_row_grid(self):
        result = run(tiny_gen_spec())
        assert len(result.rows) == 2 * 3 * 2
        assert {r.model for r in result.rows} == {"1layer", "conv"}
        assert {r.n for r in result.rows} == {5, 10}
        for r in result.rows:
            assert r.loss == "hinge"
            assert r.stop_reason == "loss-zero"
            assert r.train_error == 0.0
            assert 0.0 <= r.test_error <= 1.0
            assert r.seed == derive_seed(1, "gen-curve", r.n, r.trial)

    def test_rows_reproducible_from_stored_seed(self):
        """Any single row can be regenerated from its own seed column."""
        spec = tiny_gen_spec()
        result = run(spec)
        row = result.rows[-1]
        whole = whole_dataset(spec.task, spec.d)
        rng = np.random.default_rng(row.seed)
        tr = sample_training_set(whole, row.n, rng)
        trace = train("1layer", tr, TrainConfig(loss="hinge"), rng)
        redo = classification_error(trace.weights, whole)
        onelayer = [r for r in result.rows
                    if (r.n, r.trial, r.model) == (row.n, row.trial, "1layer")]
        assert redo == onelayer[0].test_error


@pytest.fixture(scope="module")
def asym_losses_result():
    spec = ExperimentSpec(experiment="asym-vs-losses", d=30, k=3, n=(8,),
                          trials=30, xhinge_steps=50, seed=1)
    return run(spec)


class TestAsymVsLosses:
    def test_three_rows_per_trial(self, asym_losses_result):
        result = asym_losses_result
        assert len(result.rows) == 3 * 30
        by_loss = {}
        for r in result.rows:
            by_loss.setdefault(r.loss, []).append(r)
        assert set(by_loss) == {"asym", "xhinge", "hinge"}
        for r in by_loss["asym"]:
            assert r.stop_reason == "estimate"
            assert r.train_error is None
            assert r.aux_key == "m_degenerate"
            assert r.aux_value in ("0", "1")
        for r in by_loss["xhinge"]:
            assert r.steps_run == 50
            assert r.stop_reason == "fixed-steps"

    def test_limit_at_least_as_good_as_hinge(self, asym_losses_result):
        am, ase = summarize(asym_losses_result.rows, loss="asym")
        hm, hse = summarize(asym_losses_result.rows, loss="hinge")
        assert am <= hm + 3.0 * math.hypot(ase, hse)


class TestInitStudy:
    def test_snapshot_past_run_rejected(self):
        spec = ExperimentSpec(experiment="init-study", d=30, k=3, n=(10,),
                              trials=3, xhinge_steps=50, snapshot_t=60)
        with pytest.raises(ConfigError):
            run(spec)

    def test_structure(self):
        spec = ExperimentSpec(experiment="init-study", d=30, k=3, n=(10,),
                              trials=5, xhinge_steps=60, snapshot_t=30, seed=2)
        result = run(spec)
        assert isinstance(result.extras["pearson_r"], float)
        assert result.extras["pairs"].shape == (5, 2)
        assert len(result.traces) == 10
        summary = [r for r in result.rows if r.loss == "summary"]
        assert len(summary) == 1
        assert summary[0].aux_key == "pearson_r"
        assert float(summary[0].aux_value) == result.extras["pearson_r"]
        snaps = [r for r in result.rows if r.aux_key == "snapshot_acc_t30"]
        assert len(snaps) == 5


class TestAnalysisCurves:
    def test_keys_and_consistency(self):
        spec = ExperimentSpec(experiment="analysis-curves", d=30, k=3,
                              n=(5, 15), trials=200, seed=3)
        result = run(spec)
        for n in (5, 15):
            vals = {r.aux_key: float(r.aux_value)
                    for r in result.rows if r.n == n}
            assert set(vals) == {"err1", "err1_se", "err2", "ratio",
                                 "coverage_exact", "sum_exact", "sum_approx",
                                 "onelayer"}
            assert 0.0 <= vals["err1"] <= 1.0
            assert vals["ratio"] == pytest.approx(vals["err1"] / vals["err2"])
            assert vals["sum_exact"] == \
                pytest.approx(vals["err1"] + vals["coverage_exact"])
            report = result.extras[n]
            assert report.prob_no_adjacent_pair == vals["err1"]


@pytest.fixture(scope="module")
def prop1_result():
    spec = ExperimentSpec(experiment="prop1-check", d=30, k=3, n=(4,),
                          trials=200, seed=4)
    return run(spec)


class TestProp1Check:
    def test_gram_residual_is_tiny(self, prop1_result):
        assert prop1_result.extras["gram_residual"] <= 1e-12

    def test_every_draw_is_fully_degenerate(self, prop1_result):
        for r in prop1_result.rows:
            if r.aux_key == "m":
                assert r.aux_value == "3"

    def test_conv_limit_matches_onelayer(self, prop1_result):
        extras = prop1_result.extras
        gap = abs(extras["conv_mean"] - extras["onelayer_mean"])
        se = math.hypot(extras["conv_se"], extras["onelayer_se"])
        assert gap <= 3.0 * se


class TestParityCurve:
    def test_filters_alternate(self):
        spec = ExperimentSpec(experiment="parity-curve", d=100, k=5, n=(300,),
                              trials=10, models=("conv",), seed=0)
        result = run(spec)
        signs = [r.aux_value for r in result.rows
                 if r.aux_key == "filter_signs"]
        assert len(signs) == 10

        def alternating(s):
            return all(a != b and "0" not in (a, b)
                       for a, b in zip(s, s[1:]))

        assert sum(alternating(s) for s in signs) >= 8


class TestXhingePostFitBehaviour:
    def test_weights_keep_moving_after_interpolation(self):
        """The extreme hinge has no finish line: after the training set
        is fit (around step 245 for this seed) the direction keeps
        rotating and the norms keep growing."""
        whole = whole_dataset("cls", 100)
        rng = np.random.default_rng(9)
        tr = sample_training_set(whole, 40, rng)
        cfg = TrainConfig(loss="xhinge", max_steps=1000)
        trace = train("conv", tr, cfg, rng, k=5, record_weights=True)
        terr = np.asarray(trace.train_error)
        fit = np.nonzero(terr == 0.0)[0]
        assert fit.size > 0 and fit[0] < 500
        t_fit = int(fit[0])
        assert np.all(terr[t_fit:] == 0.0)
        wa = trace.weights_per_step[t_fit].w2
        wb = trace.weights_per_step[t_fit + 200].w2
        cos = (wa @ wb) / (np.linalg.norm(wa) * np.linalg.norm(wb))
        assert cos < 0.99
        assert np.linalg.norm(wb) > 10.0 * np.linalg.norm(wa)


class TestSerialization:
    def test_csv_header_is_stable(self):
        assert CSV_HEADER == (
            "experiment,task,d,k,n,trial,seed,model,loss,steps_run,"
            "stop_reason,train_error,test_error,aux_key,aux_value")

    def test_csv_round_trip(self):
        result = run(tiny_gen_spec())
        text = rows_to_csv(result.rows)
        reader = csv.DictReader(io.StringIO(text))
        assert reader.fieldnames == CSV_HEADER.split(",")
        parsed = list(reader)
        assert len(parsed) == len(result.rows)
        for rec, row in zip(parsed, result.rows):
            assert int(rec["seed"]) == row.seed
            assert float(rec["test_error"]) == row.test_error

    def test_json_echoes_spec(self):
        result = run(tiny_gen_spec(format="json"))
        payload = json.loads(rows_to_json(result))
        assert payload["spec"]["experiment"] == "gen-curve"
        assert payload["spec"]["n"] == [5, 10]
        assert len(payload["rows"]) == len(result.rows)
        assert payload["rows"][0]["loss"] == "hinge"

    def test_write_result_without_path_returns_text(self):
        result = run(tiny_gen_spec())
        assert write_result(result).startswith(CSV_HEADER)

    def test_weights_dump_round_trip(self, tmp_path):
        """Weights written under --dump-weights reproduce the row's
        recorded test error exactly."""
        spec = tiny_gen_spec(n=(5,), trials=2, dump_weights=True)
        result = run(spec)
        out = tmp_path / "res.csv"
        write_result(result, str(out))
        sidecar = json.loads((tmp_path / "res.csv.weights.json").read_text())
        assert len(sidecar) == 2 * 2
        whole = whole_dataset(spec.task, spec.d)
        for row in result.rows:
            key = f"n={row.n}/trial={row.trial}/model={row.model}/loss=hinge"
            w = load_weights(sidecar[key])
            assert classification_error(w, whole) == row.test_error

    def test_traces_sidecar(self, tmp_path):
        spec = ExperimentSpec(experiment="init-study", d=30, k=3, n=(10,),
                              trials=2, xhinge_steps=20, snapshot_t=10, seed=5)
        result = run(spec)
        out = tmp_path / "study.csv"
        write_result(result, str(out))
        lines = (tmp_path / "study.csv.traces.csv").read_text().splitlines()
        assert lines[0] == "trial,loss,t,train_loss,train_err,test_err"
        # Two fixed-step runs contribute 21 rows each, the hinge runs
        # at least one row.
        assert len(lines) >= 1 + 2 * 21 + 2


class TestSummarize:
    def _rows(self):
        def row(model, loss, n, err):
            return ResultRow(experiment="gen-curve", task="cls", d=10, k=2,
                             n=n, trial=0, seed=0, model=model, loss=loss,
                             steps_run=1, stop_reason="loss-zero",
                             train_error=0.0, test_error=err)

        return [row("conv", "hinge", 5, 0.1), row("conv", "hinge", 5, 0.3),
                row("conv", "hinge", 9, 0.5), row("1layer", "hinge", 5, 0.9),
                row("conv", "asym", 5, None)]

    def test_filters(self):
        rows = self._rows()
        mean, se = summarize(rows, model="conv", loss="hinge", n=5)
        assert mean == pytest.approx(0.2)
        assert se == pytest.approx(np.std([0.1, 0.3], ddof=1) / math.sqrt(2))
        mean_all, _ = summarize(rows, model="conv", loss="hinge")
        assert mean_all == pytest.approx(0.3)

    def test_none_errors_are_skipped(self):
        with pytest.raises(ValueError):
            summarize(self._rows(), loss="asym")

    def test_single_row_zero_se(self):
        mean, se = summarize(self._rows(), model="1layer")
        assert (mean, se) == (0.9, 0.0)


class TestParseN:
    def test_forms(self):
        assert cli.parse_n("25") == (25,)
        assert cli.parse_n("10:30:10") == (10, 20, 30)
        assert cli.parse_n(" 7 ") == (7,)

    def test_rejections(self):
        for bad in ("10:30", "a:b:c", "5:1:2", "1:9:0", "x", "2.5"):
            with pytest.raises(ConfigError):
                cli.parse_n(bad)


class TestConfigFile:
    def test_parse_with_comments(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# small smoke run\n"
            "\n"
            "d = 20\n"
            "trials=3\n"
            "n = 5:15:5\n")
        values = cli.load_config_file(str(path))
        assert values == {"d": "20", "trials": "3", "n": "5:15:5"}

    def test_unknown_key_reports_line(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("d = 20\nwidth = 3\n")
        with pytest.raises(ConfigError, match=r"run\.cfg:2"):
            cli.load_config_file(str(path))

    def test_not_key_value(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("just words\n")
        with pytest.raises(ConfigError, match=r"run\.cfg:1"):
            cli.load_config_file(str(path))

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            cli.load_config_file("/no/such/file.cfg")

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("d = 20\ntrials = 3\nk = 2\n")
        args = cli.build_parser().parse_args(
            ["gen-curve", "--config", str(path), "--trials", "7"])
        spec = cli.build_spec(args)
        assert spec.d == 20
        assert spec.k == 2
        assert spec.trials == 7


class TestMain:
    def test_success_writes_file(self, tmp_path, capsys):
        out = tmp_path / "rows.csv"
        code = cli.main(["gen-curve", "--d", "20", "--k", "2", "--n", "4",
                         "--trials", "2", "--seed", "6", "--out", str(out)])
        assert code == 0
        assert f"wrote 4 rows to {out}" in capsys.readouterr().out
        assert out.read_text().splitlines()[0] == CSV_HEADER

    def test_stdout_when_no_out(self, capsys):
        code = cli.main(["gen-curve", "--d", "20", "--k", "2", "--n", "4",
                         "--trials", "1", "--seed", "6"])
        assert code == 0
        captured = capsys.readouterr()
        assert captured.out.startswith(CSV_HEADER)

    def test_config_error_is_exit_one(self, capsys):
        assert cli.main(["gen-curve", "--d", "10", "--k", "50"]) == 1
        assert "configuration error" in capsys.readouterr().err
        assert cli.main(["no-such-experiment"]) == 1
        assert cli.main(["gen-curve", "--n", "5:1:2"]) == 1

    def test_numerical_error_is_exit_two(self, monkeypatch, capsys):
        def boom(spec):
            raise NumericalError("synthetic failure")

        monkeypatch.setattr(cli, "run", boom)
        assert cli.main(["gen-curve", "--n", "4", "--trials", "1"]) == 2
        assert "numerical failure" in capsys.readouterr().err

    def test_pearson_reported_for_init_study(self, tmp_path, capsys):
        out = tmp_path / "study.csv"
        code = cli.main(["init-study", "--d", "30", "--k", "3", "--n", "10",
                        "--trials", "3", "--xhinge-steps", "30",
                        "--snapshot-t", "15", "--seed", "8",
                        "--out", str(out)])
        assert code == 0
        assert "pearson_r = " in capsys.readouterr().out
