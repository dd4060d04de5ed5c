"""Monte Carlo studies: interval coverage, DC testing and timing.

Each runner produces per-repetition records (plain JSON-able dicts) and then
reduces them with pure functions, so an :class:`ExperimentMetrics` rebuilt
from persisted records is identical to the one returned by the run. Means
use ``math.fsum``, which is exactly rounded and therefore independent of
record order.
"""
from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .dc import DcConfig, run_dc_sobel, sobel_test
from .errors import EngineError, InvalidArgumentError, MassmedError
from .parallel import ordered_map
from .sdb import SdbConfig, run_full_bootstrap, run_sdb
from .simgen import SimScenario, generate, get_scenario
from .stochastics import RngStream, derive_seed, subset_size

__all__ = [
    "CiSummary",
    "TestSummary",
    "TimingSummary",
    "ExperimentMetrics",
    "summarize_ci",
    "summarize_tests",
    "summarize_timing",
    "run_ci_study",
    "run_test_study",
    "run_timing",
    "parse_method",
]

# sub-stream keys below a repetition's seed
_DATA, _SDB, _BOOT, _DC = 0, 1, 2, 3


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values) if values else float("nan")


def _column_means(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    return np.array([_mean(arr[:, k]) for k in range(arr.shape[1])])


@dataclass(frozen=True, eq=False)
class CiSummary:
    method: str
    reps: int
    coverage: np.ndarray
    coverage_adjusted: np.ndarray
    simultaneous_coverage_adjusted: float
    mean_length: np.ndarray
    mean_length_adjusted: np.ndarray
    failures: int

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "reps": self.reps,
            "coverage": self.coverage.tolist(),
            "coverage_adjusted": self.coverage_adjusted.tolist(),
            "simultaneous_coverage_adjusted": self.simultaneous_coverage_adjusted,
            "mean_length": self.mean_length.tolist(),
            "mean_length_adjusted": self.mean_length_adjusted.tolist(),
            "failures": self.failures,
        }


@dataclass(frozen=True, eq=False)
class TestSummary:
    __test__ = False  # not a pytest class

    blocks: int
    reps: int
    mean_estimate: np.ndarray
    bias: np.ndarray
    mse: np.ndarray
    mc_se: np.ndarray
    rejection_rate: np.ndarray
    power: float
    fwer: float
    omega: tuple

    def to_dict(self) -> dict:
        return {
            "blocks": self.blocks,
            "reps": self.reps,
            "mean_estimate": self.mean_estimate.tolist(),
            "bias": self.bias.tolist(),
            "mse": self.mse.tolist(),
            "mc_se": self.mc_se.tolist(),
            "rejection_rate": self.rejection_rate.tolist(),
            "power": self.power,
            "fwer": self.fwer,
            "omega": [k + 1 for k in self.omega],
        }


_TIMING_KEYS = ("loop_seconds", "full_fit_seconds", "total_seconds")


@dataclass(frozen=True)
class TimingSummary:
    method: str
    runs: int
    mean: dict
    median: dict

    def to_dict(self) -> dict:
        return {"method": self.method, "runs": self.runs, "mean": dict(self.mean),
                "median": dict(self.median)}


def summarize_ci(records, truth, method: str) -> CiSummary:
    """Coverage and mean length over the repetitions of one interval method."""
    rows = [r for r in records if r["method"] == method]
    if not rows:
        raise InvalidArgumentError(f"no records for method {method!r}")
    truth = np.asarray(truth, dtype=float)
    single = np.array([r["ci_single"] for r in rows], dtype=float)
    adjusted = np.array([r["ci_adjusted"] for r in rows], dtype=float)

    def covered(ci):
        return (ci[:, :, 0] <= truth) & (truth <= ci[:, :, 1])

    cov, cov_adj = covered(single), covered(adjusted)
    reps = len(rows)
    return CiSummary(
        method=method,
        reps=reps,
        coverage=cov.sum(axis=0) / reps,
        coverage_adjusted=cov_adj.sum(axis=0) / reps,
        simultaneous_coverage_adjusted=int(cov_adj.all(axis=1).sum()) / reps,
        mean_length=_column_means(single[:, :, 1] - single[:, :, 0]),
        mean_length_adjusted=_column_means(adjusted[:, :, 1] - adjusted[:, :, 0]),
        failures=int(sum(r.get("failures", 0) for r in rows)),
    )


def summarize_tests(records, truth, blocks: int, significance: float = 0.05) -> TestSummary:
    """Bias, MSE, Power and FWER of the DC test with ``blocks`` blocks.

    Omega, the set of true signals, is every mediator whose true product is
    nonzero. Power averages the rejection rate over Omega; FWER is the share
    of repetitions rejecting at least one mediator outside Omega.
    """
    rows = [r for r in records if r["blocks"] == blocks]
    if not rows:
        raise InvalidArgumentError(f"no records for J={blocks}")
    truth = np.asarray(truth, dtype=float)
    est = np.array([r["estimate"] for r in rows], dtype=float)
    rejected = np.array([r["p_value"] for r in rows], dtype=float) < significance
    reps, d = est.shape
    err = est - truth
    mean_est = _column_means(est)
    if reps > 1:
        var = np.array([math.fsum((est[:, k] - mean_est[k]) ** 2) / (reps - 1) for k in range(d)])
        mc_se = np.sqrt(var / reps)
    else:
        mc_se = np.full(d, np.nan)
    omega = np.flatnonzero(truth != 0.0)
    null = np.flatnonzero(truth == 0.0)
    rate = rejected.sum(axis=0) / reps
    power = _mean(rate[omega]) if omega.size else float("nan")
    fwer = int(rejected[:, null].any(axis=1).sum()) / reps if null.size else 0.0
    return TestSummary(
        blocks=blocks,
        reps=reps,
        mean_estimate=mean_est,
        bias=_column_means(err),
        mse=_column_means(err**2),
        mc_se=mc_se,
        rejection_rate=rate,
        power=power,
        fwer=fwer,
        omega=tuple(int(k) for k in omega),
    )


def summarize_timing(records, method: str) -> TimingSummary:
    rows = [r for r in records if r["method"] == method]
    if not rows:
        raise InvalidArgumentError(f"no timing records for {method!r}")
    return TimingSummary(
        method=method,
        runs=len(rows),
        mean={k: _mean(r[k] for r in rows) for k in _TIMING_KEYS},
        median={k: float(statistics.median(r[k] for r in rows)) for k in _TIMING_KEYS},
    )


@dataclass(eq=False)
class ExperimentMetrics:
    """Summary of one study plus the records it was reduced from."""

    study: str
    scenario: str
    config: dict
    truth: np.ndarray
    records: list = field(default_factory=list)
    ci: dict = field(default_factory=dict)
    tests: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    @classmethod
    def from_records(cls, study: str, scenario: str, config: dict, truth, records) -> "ExperimentMetrics":
        truth = np.asarray(truth, dtype=float)
        records = list(records)
        out = cls(study=study, scenario=scenario, config=dict(config), truth=truth, records=records)
        if study == "ci":
            methods = sorted({r["method"] for r in records}, key=lambda m: (m != "sdb", m))
            out.ci = {m: summarize_ci(records, truth, m) for m in methods}
        elif study == "test":
            sig = config.get("significance", 0.05)
            blocks = sorted({int(r["blocks"]) for r in records})
            out.tests = {J: summarize_tests(records, truth, J, sig) for J in blocks}
        elif study == "timing":
            methods = list(dict.fromkeys(r["method"] for r in records))
            out.timing = {m: summarize_timing(records, m) for m in methods}
        else:
            raise InvalidArgumentError(f"unknown study {study!r}")
        return out

    @property
    def total_method_seconds(self) -> float:
        return math.fsum(t.mean["total_seconds"] * t.runs for t in self.timing.values())

    def to_dict(self, include_records: bool = False) -> dict:
        out = {
            "study": self.study,
            "scenario": self.scenario,
            "config": dict(self.config),
            "truth": self.truth.tolist(),
        }
        if self.ci:
            out["ci"] = {m: s.to_dict() for m, s in self.ci.items()}
        if self.tests:
            out["tests"] = {str(J): s.to_dict() for J, s in self.tests.items()}
        if self.timing:
            out["timing"] = {m: s.to_dict() for m, s in self.timing.items()}
        if include_records:
            out["records"] = list(self.records)
        return out


def _scenario(key, n, reading) -> tuple[SimScenario, str]:
    if isinstance(key, SimScenario):
        sc = key if n is None else key.with_n(n)
        return sc, sc.name or "custom"
    sc = get_scenario(key, n, reading)
    return sc, sc.name


def _data_for(sc: SimScenario, seed: int, rep: int):
    return generate(sc, RngStream(derive_seed(seed, rep, _DATA)))


def _guarded(fn, rep):
    try:
        return fn(rep)
    except MassmedError as exc:
        raise EngineError(f"repetition {rep}: {exc}") from exc


def _ci_record(rep, report) -> dict:
    return {
        "rep": rep,
        "method": report.method,
        "estimate": report.estimate.tolist(),
        "ci_single": report.ci_single.tolist(),
        "ci_adjusted": report.ci_adjusted.tolist(),
        "failures": report.failures,
        "retries": report.retries,
    }


def run_ci_study(
    key,
    n: int | None = 10_000,
    replicates: int = 500,
    reps: int = 200,
    subset_exponent: float = 0.7,
    delta: float = 0.05,
    seed: int = 0,
    baseline: bool = False,
    threads: int = 1,
    reading: str = "variance",
    centering: str = "subset",
) -> ExperimentMetrics:
    """Repeat generate -> SDB (-> full bootstrap) and summarise coverage and length."""
    if reps < 1:
        raise InvalidArgumentError("reps must be at least 1")
    sc, name = _scenario(key, n, reading)
    cfg = SdbConfig(subset_exponent=subset_exponent, replicates=replicates, delta=delta,
                    centering=centering)

    def one(rep):
        data = _data_for(sc, seed, rep)
        rep_cfg = replace(cfg, seed=derive_seed(seed, rep, _SDB))
        out = [_ci_record(rep, run_sdb(data, cfg=rep_cfg))]
        if baseline:
            boot = run_full_bootstrap(data, replicates=replicates, delta=delta,
                                      seed=derive_seed(seed, rep, _BOOT))
            out.append(_ci_record(rep, boot))
        return out

    nested = ordered_map(lambda rep: _guarded(one, rep), range(reps), threads)
    records = [r for group in nested for r in group]
    config = {
        "scenario": name, "n": sc.n, "replicates": replicates, "reps": reps,
        "subset_exponent": subset_exponent, "b": subset_size(sc.n, subset_exponent),
        "delta": delta, "seed": seed, "baseline_bootstrap": baseline,
        "reading": reading, "centering": centering, "kind": sc.outcome_kind,
    }
    return ExperimentMetrics.from_records("ci", name, config, sc.params.products, records)


def run_test_study(
    key,
    n: int | None = 10_000,
    blocks=(1, 5, 50),
    reps: int = 200,
    seed: int = 0,
    significance: float = 0.05,
    threads: int = 1,
    reading: str = "variance",
) -> ExperimentMetrics:
    """Repeat generate -> DC Sobel test for each J and summarise bias, MSE, Power and FWER."""
    if reps < 1:
        raise InvalidArgumentError("reps must be at least 1")
    blocks = [int(J) for J in blocks]
    if not blocks:
        raise InvalidArgumentError("need at least one block count")
    sc, name = _scenario(key, n, reading)

    def one(rep):
        data = _data_for(sc, seed, rep)
        shuffle_seed = derive_seed(seed, rep, _DC)
        out = []
        for J in blocks:
            rpt = run_dc_sobel(data, cfg=DcConfig(blocks=J, shuffle_seed=shuffle_seed,
                                                  significance=significance))
            out.append({
                "rep": rep,
                "blocks": J,
                "estimate": rpt.estimate.tolist(),
                "se": rpt.se.tolist(),
                "p_value": rpt.p_value.tolist(),
            })
        return out

    nested = ordered_map(lambda rep: _guarded(one, rep), range(reps), threads)
    records = [r for group in nested for r in group]
    config = {
        "scenario": name, "n": sc.n, "blocks": blocks, "reps": reps, "seed": seed,
        "significance": significance, "reading": reading, "kind": sc.outcome_kind,
    }
    return ExperimentMetrics.from_records("test", name, config, sc.params.products, records)


def parse_method(method: str) -> tuple[str, int | None]:
    """``"sdb"``, ``"bootstrap"``, ``"dc:J"`` or ``"dc-block:J"`` -> (name, J)."""
    name, _, arg = method.strip().lower().partition(":")
    if name in ("sdb", "bootstrap") and not arg:
        return name, None
    if name in ("dc", "dc-block") and arg:
        try:
            J = int(arg)
        except ValueError:
            raise InvalidArgumentError(f"bad block count in method {method!r}") from None
        if J < 1:
            raise InvalidArgumentError(f"bad block count in method {method!r}")
        return name, J
    raise InvalidArgumentError(f"unknown timing method {method!r}; use sdb, bootstrap, dc:J or dc-block:J")


def _time_method(method, data, replicates, subset_exponent, delta, seed, threads) -> dict:
    name, J = parse_method(method)
    if name == "sdb":
        rpt = run_sdb(data, cfg=SdbConfig(subset_exponent=subset_exponent, replicates=replicates,
                                          delta=delta, seed=seed), threads=threads)
        t = rpt.timing
        return {"loop_seconds": t["replicate_seconds"], "full_fit_seconds": t["full_fit_seconds"],
                "total_seconds": t["total_seconds"]}
    if name == "bootstrap":
        rpt = run_full_bootstrap(data, replicates=replicates, delta=delta, seed=seed, threads=threads)
        t = rpt.timing
        return {"loop_seconds": t["replicate_seconds"], "full_fit_seconds": t["full_fit_seconds"],
                "total_seconds": t["total_seconds"]}
    if name == "dc":
        t0 = time.perf_counter()
        run_dc_sobel(data, cfg=DcConfig(blocks=J, shuffle_seed=seed), threads=threads)
        el = time.perf_counter() - t0
        return {"loop_seconds": el, "full_fit_seconds": 0.0, "total_seconds": el}
    # one block of n / J rows: the work a single machine does when blocks run in parallel
    block = data.take(np.arange(data.n // J))
    t0 = time.perf_counter()
    sobel_test(block)
    el = time.perf_counter() - t0
    return {"loop_seconds": el, "full_fit_seconds": 0.0, "total_seconds": el}


def run_timing(
    key,
    n: int | None = None,
    methods=("sdb", "bootstrap"),
    repetitions: int = 10,
    replicates: int = 200,
    subset_exponent: float = 0.7,
    delta: float = 0.05,
    seed: int = 0,
    threads: int = 1,
    reading: str = "variance",
) -> ExperimentMetrics:
    """Wall-clock time per method, data generation excluded.

    Repetitions run one after another so that methods never compete for
    cores; ``threads`` is handed to the engines.
    """
    if repetitions < 1:
        raise InvalidArgumentError("repetitions must be at least 1")
    methods = [m.strip() for m in methods]
    for m in methods:
        parse_method(m)
    sc, name = _scenario(key, n, reading)
    records = []
    for rep in range(repetitions):
        data = _data_for(sc, seed, rep)
        for m in methods:
            try:
                t = _time_method(m, data, replicates, subset_exponent, delta,
                                 derive_seed(seed, rep, _SDB), threads)
            except MassmedError as exc:
                raise EngineError(f"repetition {rep}, method {m}: {exc}") from exc
            records.append({"rep": rep, "method": m, **t})
    config = {
        "scenario": name, "n": sc.n, "methods": methods, "repetitions": repetitions,
        "replicates": replicates, "subset_exponent": subset_exponent, "delta": delta,
        "seed": seed, "threads": threads, "reading": reading, "kind": sc.outcome_kind,
    }
    return ExperimentMetrics.from_records("timing", name, config, sc.params.products, records)
