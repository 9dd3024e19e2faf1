"""Campaign runner, aggregation, result files and the command line."""

import csv
import io
import json
import math

import numpy as np
import pytest

from scoutpf.filters import FilterConfig
from scoutpf.harness import (
    RUN_FIELDS,
    SCHEMA_VERSION,
    SELECTION_FIELDS,
    CampaignSpec,
    RunRecord,
    StepRecord,
    aggregate,
    default_workers,
    emit_results,
    load_results,
    main,
    results_dict,
    run_campaign,
    run_single,
    step_fields,
)
from scoutpf.scenarios import get_scenario, save_scenario

SMALL = FilterConfig(n_predict=200, n_update=200, n_scout=20)


def record(errors, covs, kinds=None, name="f", run=0, status="ok"):
    steps = []
    for i, (e, c) in enumerate(zip(errors, covs)):
        kind = kinds[i] if kinds else "scout"
        steps.append(StepRecord(i + 1, float(i), np.zeros(len(e)), np.asarray(c, float),
                                np.asarray(e, float), 10.0, 50.0, kind))
    return RunRecord(name, run, 0, steps, status)


# -- aggregation --------------------------------------------------------------

def test_single_run_rmse_is_the_error_norm():
    r = record([[3.0, 4.0]], [[1.0, 1.0]])
    s = aggregate([r], "f", SMALL, [0.0], 2)
    assert s.steps[0].rmse == pytest.approx(5.0)
    np.testing.assert_allclose(s.steps[0].sigma_eff, [3.0, 4.0])


def test_sigma_est_of_unit_covariance():
    recs = [record([[0.1 * k, -0.2]], [[1.0, 1.0]], run=k) for k in range(7)]
    s = aggregate(recs, "f", SMALL, [0.0], 2)
    np.testing.assert_allclose(s.steps[0].sigma_est, [1.0, 1.0])


def test_sigma_eff_uses_mean_square_over_runs():
    recs = [record([[e]], [[1.0]], run=k) for k, e in enumerate([1.0, -1.0, 3.0])]
    s = aggregate(recs, "f", SMALL, [0.0], 1)
    assert s.steps[0].sigma_eff[0] == pytest.approx(math.sqrt(11 / 3))
    assert s.steps[0].mean_error[0] == pytest.approx(1.0)


def test_aggregation_is_permutation_invariant():
    rng = np.random.default_rng(0)
    recs = [record(rng.normal(size=(4, 3)), rng.uniform(0.5, 2, size=(4, 3)),
                   ["scout", "gpf", "gpf", "scout"], run=k) for k in range(25)]
    a = aggregate(recs, "f", SMALL, range(4), 3)
    b = aggregate(recs[::-1], "f", SMALL, range(4), 3)
    for x, y in zip(a.steps, b.steps):
        assert x.rmse == pytest.approx(y.rmse, rel=1e-14)
        np.testing.assert_allclose(x.sigma_eff, y.sigma_eff, rtol=1e-14)
        assert (x.scout_count, x.gpf_count) == (y.scout_count, y.gpf_count)


def test_failures_are_counted_not_raised():
    ok = record([[1.0], [1.0]], [[1.0], [1.0]], ["scout", "gpf"])
    bad = record([[1.0]], [[1.0]], ["scout"], run=1, status="DegeneracyError: collapsed")
    s = aggregate([ok, bad], "f", SMALL, [0.0, 1.0], 1)
    assert (s.n_runs, s.n_ok, s.n_failed) == (2, 1, 1)
    assert s.failures == {"DegeneracyError": 1}
    assert s.steps[0].scout_count == 2 and s.steps[1].gpf_count == 1
    assert s.steps[1].n_runs == 1


def test_divergence_needs_five_consecutive_steps():
    far = [[10.0]] * 5
    assert record(far, [[1.0]] * 5).diverged
    assert not record(far[:4] + [[0.0]] + far[:4], [[1.0]] * 9).diverged


def test_campaign_validation():
    spec = get_scenario("range_angle")
    with pytest.raises(ValueError):
        CampaignSpec(spec, (("spf2", SMALL),), n_mc=0)
    with pytest.raises(ValueError):
        CampaignSpec(spec, ())


def test_run_single_records_failures():
    rec = run_single(get_scenario("orbit"), "apf", SMALL, 0, 0)
    assert rec.status.startswith("FilterError")
    assert rec.failed_step == 1 and not rec.ok


def test_runs_share_truth_but_not_filter_streams():
    spec = get_scenario("range_angle")
    a = run_single(spec, "spf1", SMALL, 3, 2)
    b = run_single(spec, "spf2", SMALL, 3, 2)
    assert a.seed != b.seed
    np.testing.assert_allclose(a.steps[0].error - a.steps[0].mean,
                               b.steps[0].error - b.steps[0].mean)


# -- result files -------------------------------------------------------------

@pytest.fixture(scope="module")
def small_result():
    campaign = CampaignSpec(get_scenario("bimodal"), (("spf2", SMALL), ("gpf", SMALL)), 4, 9)
    return run_campaign(campaign, workers=1)


def test_csv_headers_match_schema(small_result, tmp_path):
    files = emit_results(small_result, tmp_path, "csv")
    assert [f.name for f in files] == ["steps.csv", "runs.csv", "selection.csv", "summary.json"]
    heads = {f.name: next(csv.reader(f.open())) for f in files if f.suffix == ".csv"}
    assert heads["steps.csv"] == ["filter", "step", "time", "n_runs", "rmse", "mean_psi",
                                  "scout_count", "gpf_count", "mean_error_0", "sigma_eff_0",
                                  "sigma_est_0"]
    assert heads["steps.csv"] == step_fields(1)
    assert heads["runs.csv"] == list(RUN_FIELDS)
    assert heads["selection.csv"] == list(SELECTION_FIELDS) == ["filter", "step", "scout", "gpf"]
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["schema_version"] == SCHEMA_VERSION == 1


def test_selection_histogram_counts_runs(small_result, tmp_path):
    emit_results(small_result, tmp_path, "csv")
    rows = list(csv.DictReader((tmp_path / "selection.csv").open()))
    assert len(rows) == 2 * 25
    for row in rows:
        assert int(row["scout"]) + int(row["gpf"]) == 4
    assert all(int(r["scout"]) == 0 for r in rows if r["filter"] == "gpf")


def test_json_round_trip(small_result, tmp_path):
    (path,) = emit_results(small_result, tmp_path, "json")
    assert load_results(path) == results_dict(small_result)


def test_numbers_are_written_at_full_precision(small_result, tmp_path):
    emit_results(small_result, tmp_path, "csv")
    rows = list(csv.DictReader((tmp_path / "steps.csv").open()))
    want = small_result.summaries[0].steps[3].rmse
    assert float(rows[3]["rmse"]) == want


def test_unknown_format(small_result, tmp_path):
    with pytest.raises(ValueError):
        emit_results(small_result, tmp_path, "xml")


# -- command line -------------------------------------------------------------

def run_cli(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_list():
    code, text = run_cli("list")
    assert code == 0
    assert "range_angle" in text and "sis-ukf" in text


def test_unknown_scenario_is_a_usage_error(capsys):
    code, _ = run_cli("mc", "--scenario", "nope")
    assert code != 0
    err = capsys.readouterr().err
    assert "nope" in err and "range_angle" in err and "orbit" in err


def test_bad_arguments(capsys):
    assert run_cli("mc", "--scenario", "range_angle", "--filter", "kalman")[0] != 0
    assert "spf2" in capsys.readouterr().err
    assert run_cli("mc", "--scenario", "range_angle", "--option", "colour=red")[0] != 0
    assert run_cli("mc", "--scenario", "range_angle", "--variant", "cubic")[0] != 0
    assert run_cli("frobnicate")[0] != 0
    assert run_cli("mc", "--scenario", "range_angle", "--n-mc", "0")[0] != 0


def test_invert_demo_residual(tmp_path):
    code, text = run_cli("invert-demo", "--scenario", "range_angle", "--order", "3",
                         "--out", str(tmp_path))
    assert code == 0
    assert float((tmp_path / "residual.txt").read_text()) <= 1e-9
    assert "# inverse map" in text
    code, _ = run_cli("invert-demo", "--scenario", "range_only", "--order", "4")
    assert code == 0


def test_run_is_verbose(tmp_path):
    code, text = run_cli("run", "--scenario", "projectile", "--filter", "spf2,sis-ukf",
                         "--particles", "200", "--scouts", "30", "--out", str(tmp_path),
                         "--format", "json")
    assert code == 0
    assert text.count("status: ok") == 2
    data = load_results(tmp_path / "results.json")
    assert [r["filter"] for r in data["runs"]] == ["spf2", "sis-ukf"]
    assert all(len(r["steps"]) == 12 for r in data["runs"])


def test_scenario_file_and_export(tmp_path):
    path = tmp_path / "ra.yaml"
    code, _ = run_cli("export", "--scenario", "range_angle", "--out", str(path))
    assert code == 0
    code, text = run_cli("mc", "--scenario-file", str(path), "--n-mc", "3", "--particles", "100")
    assert code == 0 and "range_angle" in text
    save_scenario(get_scenario("bimodal"), tmp_path / "b.yaml")
    assert run_cli("mc", "--scenario-file", str(tmp_path / "missing.yaml"))[0] != 0


def _outputs(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_mc_is_byte_identical_serial_and_parallel(tmp_path, fmt):
    base = ["mc", "--scenario", "range_angle", "--filter", "spf2", "--n-mc", "40",
            "--seed", "7", "--format", fmt]
    assert run_cli(*base, "--out", str(tmp_path / "a"))[0] == 0
    assert run_cli(*base, "--out", str(tmp_path / "b"))[0] == 0
    assert run_cli(*base, "--out", str(tmp_path / "c"), "--workers", "2")[0] == 0
    a = _outputs(tmp_path / "a")
    assert a == _outputs(tmp_path / "b") == _outputs(tmp_path / "c")


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.setenv("SCOUTPF_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("SCOUTPF_WORKERS", "junk")
    assert default_workers() == 1
