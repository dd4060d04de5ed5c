"""End-to-end analysis of one dataset: fit, effects, SDB intervals, DC tests."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .data_io import ColumnMapping, load_csv
from .dc import DcConfig, DcTestReport, run_dc_sobel
from .errors import InvalidArgumentError
from .mediation import (
    ASSUMPTIONS,
    Dataset,
    EffectQuery,
    MediationFit,
    effects_linear,
    effects_logistic_or,
    fit_mediation,
    rare_outcome_check,
)
from .report import Table, p_display
from .sdb import IntervalReport, SdbConfig, run_full_bootstrap, run_sdb

__all__ = ["AnalysisReport", "analyze", "analyze_csv"]

METHODS = ("sdb", "dc", "both")


@dataclass(eq=False)
class AnalysisReport:
    config: dict
    data_info: dict
    fit: MediationFit
    effects: dict
    rare_outcome: dict | None
    sdb: IntervalReport | None = None
    bootstrap: IntervalReport | None = None
    dc: list = field(default_factory=list)
    names: dict = field(default_factory=dict)

    def coefficient_records(self) -> list[dict]:
        f, nm = self.fit, self.names
        med, cov, expo = nm["mediators"], nm["covariates"], nm["exposure"]
        oc, ose = f.outcome.coefficients, f.outcome.std_errors
        params = ["c", "gamma"] + [f"beta_{k + 1}" for k in range(f.d)] + [f"theta_{j + 1}" for j in range(len(cov))]
        terms = ["(intercept)", expo, *med, *cov]
        out = [{
            "model": "outcome",
            "response": nm["outcome"],
            "kind": f.kind,
            "terms": [{"term": t, "parameter": p, "estimate": float(e), "se": float(s)}
                      for t, p, e, s in zip(terms, params, oc, ose)],
        }]
        for k, mf in enumerate(f.mediators):
            params = [f"c_{k + 1}", f"alpha_{k + 1}"] + [f"eta_{k + 1}{j + 1}" for j in range(len(cov))]
            out.append({
                "model": f"mediator_{k + 1}",
                "response": med[k],
                "kind": "continuous",
                "terms": [{"term": t, "parameter": p, "estimate": float(e), "se": float(s)}
                          for t, p, e, s in zip(["(intercept)", expo, *cov], params,
                                                mf.coefficients, mf.std_errors)],
            })
        return out

    def paths(self) -> dict:
        f = self.fit
        return {
            "gamma": f.gamma, "se_gamma": f.se_gamma,
            "alpha": f.alpha.tolist(), "se_alpha": f.se_alpha.tolist(),
            "beta": f.beta.tolist(), "se_beta": f.se_beta.tolist(),
            "product": f.product.tolist(), "sobel_se": f.sobel_se.tolist(),
            "mediators": list(self.names["mediators"]),
        }

    def to_records(self, include_timing: bool = True) -> list[dict]:
        """One dict per report block; every block embeds the resolved config."""
        cfg = dict(self.config)
        recs = [{"record": "config", "config": cfg, "data": dict(self.data_info)}]
        recs.append({"record": "paths", "config": cfg, **self.paths()})
        recs += [{"record": "coefficients", "config": cfg, **c} for c in self.coefficient_records()]
        eff = {"record": "effects", "config": cfg, **self.effects}
        if self.rare_outcome is not None:
            eff["rare_outcome"] = dict(self.rare_outcome)
        eff["assumptions"] = list(ASSUMPTIONS)
        recs.append(eff)
        for rpt in (self.sdb, self.bootstrap):
            if rpt is not None:
                body = rpt.to_dict(include_timing=include_timing)
                body["engine_config"] = body.pop("config")
                recs.append({"record": rpt.method, "config": cfg, **body})
        for rpt in self.dc:
            body = rpt.to_dict(include_timing=include_timing)
            body["engine_config"] = body.pop("config")
            for m in body["mediators"]:
                m["p_value_display"] = p_display(m["p_value_capped"])
            recs.append({"record": "dc", "config": cfg, **body})
        return recs

    def tables(self) -> list[Table]:
        med = self.names["mediators"]
        out = []
        for c in self.coefficient_records():
            t = Table(f"coef_{c['model']}", f"{c['model']} model for {c['response']}",
                      ["term", "parameter", "estimate", "se"])
            for r in c["terms"]:
                t.add(r["term"], r["parameter"], r["estimate"], r["se"])
            out.append(t)
        eff = Table("effects", "Effects of a unit exposure contrast", ["effect", "value"])
        for k, v in self.effects.items():
            if isinstance(v, (int, float)):
                eff.add(k, float(v))
        if self.rare_outcome is not None:
            eff.add("outcome_prevalence", self.rare_outcome["prevalence"])
        out.append(eff)
        for rpt in (self.sdb, self.bootstrap):
            if rpt is None:
                continue
            t = Table(f"ci_{rpt.method}", f"{rpt.method} intervals for alpha_k * beta_k",
                      ["mediator", "estimate", "lower", "upper", "lower_adj", "upper_adj"])
            for k in range(rpt.d):
                t.add(med[k], rpt.estimate[k], *rpt.ci_single[k], *rpt.ci_adjusted[k])
            out.append(t)
        for rpt in self.dc:
            t = Table(f"dc_J{rpt.blocks}", f"DC Sobel test, J = {rpt.blocks}",
                      ["mediator", "estimate", "se", "statistic", "p_value", "p_display", "significant"])
            for k in range(rpt.d):
                t.add(med[k], rpt.estimate[k], rpt.se[k], rpt.statistic[k], rpt.p_value[k],
                      p_display(rpt.p_value_capped[k]), bool(rpt.rejected[k]))
            out.append(t)
        return out


def _effects(fit: MediationFit, data: Dataset, query: EffectQuery):
    params = fit.to_params()
    if fit.kind == "continuous":
        e = effects_linear(params, query)
        return {"scale": "difference", "nde": e.nde, "nie": e.nie, "te": e.te,
                "per_mediator_nie": list(e.per_mediator_nie)}, None
    e = effects_logistic_or(params, query)
    rare = rare_outcome_check(data)
    return asdict(e) | {"scale": "odds_ratio"}, asdict(rare)


def analyze(
    data: Dataset,
    method: str = "both",
    subset_exponent: float = 0.7,
    replicates: int = 500,
    blocks=(1,),
    delta: float = 0.05,
    seed: int = 0,
    threads: int = 1,
    baseline: bool = False,
    centering: str = "subset",
    query: EffectQuery = EffectQuery(),
) -> AnalysisReport:
    if method not in METHODS:
        raise InvalidArgumentError(f"method must be one of {METHODS}, got {method!r}")
    blocks = [int(J) for J in blocks]
    fit = fit_mediation(data)
    effects, rare = _effects(fit, data, query)
    sdb_cfg = SdbConfig(subset_exponent=subset_exponent, replicates=replicates, delta=delta,
                        seed=seed, centering=centering)
    config = {
        "method": method, "kind": data.kind, "n": data.n, "d": data.d, "q": data.q,
        "delta": delta, "seed": seed, "effect_contrast": [query.x, query.x_star],
    }
    if method in ("sdb", "both"):
        config |= {"subset_exponent": subset_exponent, "b": sdb_cfg.resolve_b(data.n),
                   "replicates": replicates, "centering": centering,
                   "baseline_bootstrap": baseline}
    if method in ("dc", "both"):
        config |= {"blocks": blocks, "significance": delta}

    sdb = boot = None
    if method in ("sdb", "both"):
        sdb = run_sdb(data, cfg=sdb_cfg, threads=threads)
        if baseline:
            boot = run_full_bootstrap(data, replicates=replicates, delta=delta, seed=seed, threads=threads)
    dc: list[DcTestReport] = []
    if method in ("dc", "both"):
        dc = [run_dc_sobel(data, cfg=DcConfig(blocks=J, shuffle_seed=seed, significance=delta),
                           threads=threads) for J in blocks]
    meta = data.meta
    names = {
        "exposure": meta.get("exposure", "x"),
        "outcome": meta.get("outcome", "y"),
        "mediators": data.mediator_names(),
        "covariates": list(meta.get("covariates") or [f"Z{j + 1}" for j in range(data.q)]),
    }
    info = {k: meta[k] for k in ("source", "rows_read", "dropped_rows") if k in meta}
    info["rows_used"] = data.n
    return AnalysisReport(config=config, data_info=info, fit=fit, effects=effects, rare_outcome=rare,
                          sdb=sdb, bootstrap=boot, dc=dc, names=names)


def analyze_csv(path, mapping: ColumnMapping, **kwargs) -> AnalysisReport:
    return analyze(load_csv(path, mapping), **kwargs)
