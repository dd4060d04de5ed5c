import json
import random

import numpy as np
import pytest

from massmed.errors import EngineError, InvalidArgumentError
from massmed.simgen import get_scenario
from massmed.studies import (
    ExperimentMetrics,
    parse_method,
    run_ci_study,
    run_test_study,
    run_timing,
    summarize_ci,
    summarize_tests,
)


@pytest.fixture(scope="module")
def ci_small():
    return run_ci_study("ci/linear/case1", n=800, replicates=60, reps=6, seed=3, baseline=True)


@pytest.fixture(scope="module")
def test_small():
    return run_test_study("test/linear/case1", n=1500, blocks=(1, 3), reps=8, seed=4)


def test_single_repetition_coverage_is_binary():
    m = run_ci_study("ci/linear/case1", n=500, replicates=30, reps=1, seed=1)
    assert set(m.ci["sdb"].coverage.tolist()) <= {0.0, 1.0}
    assert m.ci["sdb"].simultaneous_coverage_adjusted in (0.0, 1.0)


def test_ci_study_shape(ci_small):
    assert list(ci_small.ci) == ["sdb", "bootstrap"]
    s = ci_small.ci["sdb"]
    assert s.reps == 6 and s.coverage.shape == (5,)
    assert np.all((0 <= s.coverage) & (s.coverage <= 1))
    assert np.all(s.coverage_adjusted >= s.coverage)
    assert np.all(s.mean_length_adjusted >= s.mean_length) and np.all(s.mean_length > 0)
    assert ci_small.config["b"] == 107 and ci_small.config["seed"] == 3
    assert len(ci_small.records) == 12


def _rebuild(m, records):
    return ExperimentMetrics.from_records(m.study, m.scenario, m.config, m.truth, records)


@pytest.mark.parametrize("which", ["ci_small", "test_small"])
def test_summary_recomputes_from_persisted_records(request, which):
    m = request.getfixturevalue(which)
    persisted = json.loads(json.dumps(m.to_dict(include_records=True)))
    again = ExperimentMetrics.from_records(m.study, persisted["scenario"], persisted["config"],
                                           persisted["truth"], persisted["records"])
    assert again.to_dict() == m.to_dict()


@pytest.mark.parametrize("which", ["ci_small", "test_small"])
def test_summary_invariant_to_record_order(request, which):
    m = request.getfixturevalue(which)
    recs = list(m.records)
    random.Random(0).shuffle(recs)
    assert _rebuild(m, recs).to_dict() == m.to_dict()


def test_test_study_metrics(test_small):
    assert list(test_small.tests) == [1, 3]
    s = test_small.tests[1]
    assert s.omega == (3, 4)
    assert 0 <= s.power <= 1 and 0 <= s.fwer <= 1
    assert np.all(s.mse >= 0) and np.all(s.mc_se > 0)
    est = np.array([r["estimate"] for r in test_small.records if r["blocks"] == 1])
    assert np.allclose(s.bias, est.mean(axis=0) - test_small.truth, rtol=0, atol=1e-15)


def test_power_and_fwer_hand_example():
    truth = [0.0, 0.0, 0.1]
    recs = [
        {"blocks": 1, "estimate": [0, 0, 0.1], "p_value": [0.01, 0.5, 0.01]},
        {"blocks": 1, "estimate": [0, 0, 0.1], "p_value": [0.5, 0.5, 0.2]},
        {"blocks": 1, "estimate": [0, 0, 0.1], "p_value": [0.5, 0.04, 0.03]},
        {"blocks": 1, "estimate": [0, 0, 0.1], "p_value": [0.5, 0.5, 0.04]},
    ]
    s = summarize_tests(recs, truth, 1)
    assert s.power == 0.75 and s.fwer == 0.5 and s.omega == (2,)
    with pytest.raises(InvalidArgumentError):
        summarize_tests(recs, truth, 5)


def test_coverage_hand_example():
    truth = [0.0, 1.0]
    recs = [
        {"method": "sdb", "ci_single": [[-1, 1], [0, 0.5]], "ci_adjusted": [[-2, 2], [0, 2]]},
        {"method": "sdb", "ci_single": [[0.1, 1], [0.5, 1.5]], "ci_adjusted": [[-2, 2], [0, 0.9]]},
    ]
    s = summarize_ci(recs, truth, "sdb")
    assert s.coverage.tolist() == [0.5, 0.5]
    assert s.coverage_adjusted.tolist() == [1.0, 0.5]
    assert s.simultaneous_coverage_adjusted == 0.5
    assert s.mean_length.tolist() == [1.45, 0.75]


def test_studies_deterministic_across_threads():
    a = run_test_study("test/logistic/case2", n=1200, blocks=(1, 2), reps=4, seed=9, threads=1)
    b = run_test_study("test/logistic/case2", n=1200, blocks=(1, 2), reps=4, seed=9, threads=4)
    assert a.to_dict(include_records=True) == b.to_dict(include_records=True)
    c = run_ci_study("ci/logistic/case3", n=900, replicates=20, reps=3, seed=2, threads=1)
    d = run_ci_study("ci/logistic/case3", n=900, replicates=20, reps=3, seed=2, threads=3)
    assert c.to_dict(include_records=True) == d.to_dict(include_records=True)


def test_engine_errors_carry_repetition():
    with pytest.raises(EngineError, match="repetition 0"):
        run_test_study("test/linear/case1", n=60, blocks=(10,), reps=2)
    with pytest.raises(InvalidArgumentError):
        run_ci_study("ci/linear/case1", reps=0)
    with pytest.raises(InvalidArgumentError):
        run_test_study("nope/linear/case1", reps=1)


def test_custom_scenario_object():
    sc = get_scenario("ci/linear/case2", n=400)
    m = run_ci_study(sc, n=None, replicates=20, reps=2)
    assert m.config["n"] == 400 and m.scenario == "ci/linear/case2"


def test_parse_method():
    assert parse_method("sdb") == ("sdb", None)
    assert parse_method("DC:5") == ("dc", 5)
    assert parse_method("dc-block:100") == ("dc-block", 100)
    for bad in ("dc", "dc:x", "dc:0", "jackknife", "sdb:3"):
        with pytest.raises(InvalidArgumentError):
            parse_method(bad)


def test_timing_excludes_generation():
    m = run_timing("timing/linear/d5", n=1000, methods=(), repetitions=2)
    assert m.records == [] and m.total_method_seconds == 0.0


def test_timing_summary_fields():
    m = run_timing("timing/linear/d5", n=2000, methods=("sdb", "bootstrap", "dc:4"),
                   repetitions=2, replicates=20)
    assert list(m.timing) == ["sdb", "bootstrap", "dc:4"]
    for s in m.timing.values():
        assert s.runs == 2 and s.mean["total_seconds"] >= s.mean["loop_seconds"] > 0


def test_dc_block_time_decreases_with_blocks():
    m = run_timing("timing/linear/d5", n=100_000, methods=("dc-block:1", "dc-block:100"),
                   repetitions=3)
    assert m.timing["dc-block:100"].median["loop_seconds"] < m.timing["dc-block:1"].median["loop_seconds"]
