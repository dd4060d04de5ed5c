"""Simulation scenarios: exposure laws, parameter catalogue and data generation.

Generated data follow

    M_k = c_k + alpha_k X + eta_k' Z + e_k,   e ~ N(0, Sigma_e)
    Y   = c + gamma X + beta' M + theta' Z + eps          (continuous)
    P(Y = 1) = expit(c + gamma X + beta' M + theta' Z)     (binary)

with Z_j i.i.d. normal. The catalogue's nominal noise and covariate scales
are 4 and 2; ``reading="variance"`` (the default) treats them as variances,
``reading="sd"`` as standard deviations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .errors import InvalidArgumentError, UnknownScenarioError
from .mediation import Dataset, ModelParams, OutcomeKind
from .stochastics import RngLike, ar1_covariance, as_generator, sample_mvn

__all__ = [
    "SimScenario",
    "generate",
    "scenario_catalog",
    "get_scenario",
    "catalog_scales",
    "exposure_moments",
]

Reading = Literal["variance", "sd"]
NOMINAL_NOISE = 4.0
NOMINAL_COVARIATE = 2.0


def catalog_scales(reading: Reading = "variance") -> tuple[float, float]:
    """``(covariate_sd, noise_sd)`` under the chosen reading of N(0, s)."""
    if reading == "variance":
        return math.sqrt(NOMINAL_COVARIATE), math.sqrt(NOMINAL_NOISE)
    if reading == "sd":
        return NOMINAL_COVARIATE, NOMINAL_NOISE
    raise InvalidArgumentError(f"reading must be 'variance' or 'sd', got {reading!r}")


def exposure_moments(case: int) -> tuple[float, float]:
    """Analytic (mean, variance) of the exposure law for ``case``."""
    return {1: (0.0, 1.0), 2: (0.0, 5.0 / 3.0), 3: (1.0, 1.0)}[case]


@dataclass(frozen=True, eq=False)
class SimScenario:
    n: int
    params: ModelParams
    exposure_case: int = 1
    covariate_sd: float = math.sqrt(2.0)
    name: str = ""

    def __post_init__(self):
        if self.exposure_case not in (1, 2, 3):
            raise InvalidArgumentError(f"exposure case must be 1, 2 or 3, got {self.exposure_case}")
        if self.n < 1:
            raise InvalidArgumentError("n must be positive")

    @property
    def outcome_kind(self) -> OutcomeKind:
        return self.params.outcome_kind

    @property
    def sigma_eps(self) -> float:
        return self.params.sigma_eps

    def with_n(self, n: int) -> "SimScenario":
        return replace(self, n=int(n))

    def to_config(self) -> dict:
        """Flat key/value form; vectors comma-separated, matrix rows ';'-separated."""
        p = self.params

        def vec(a):
            return ",".join(repr(float(v)) for v in np.ravel(a))

        def mat(a):
            return ";".join(vec(row) for row in np.atleast_2d(a))

        return {
            "name": self.name,
            "n": str(self.n),
            "exposure_case": str(self.exposure_case),
            "covariate_sd": repr(self.covariate_sd),
            "outcome_kind": p.outcome_kind,
            "c": repr(float(p.c)),
            "gamma": repr(float(p.gamma)),
            "alpha": vec(p.alpha),
            "beta": vec(p.beta),
            "theta": vec(p.theta),
            "c_k": vec(p.c_k),
            "eta": mat(p.eta),
            "sigma_e": mat(p.sigma_e),
            "sigma_eps": repr(float(p.sigma_eps)),
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "SimScenario":
        def vec(s):
            s = str(s).strip()
            return np.array([float(v) for v in s.split(",")]) if s else np.empty(0)

        def mat(s):
            rows = [vec(r) for r in str(s).split(";")]
            return np.array(rows)

        try:
            params = ModelParams(
                c=float(cfg["c"]),
                gamma=float(cfg["gamma"]),
                beta=vec(cfg["beta"]),
                theta=vec(cfg["theta"]),
                c_k=vec(cfg["c_k"]),
                alpha=vec(cfg["alpha"]),
                eta=mat(cfg["eta"]),
                sigma_e=mat(cfg["sigma_e"]),
                sigma_eps=float(cfg.get("sigma_eps", 2.0)),
                outcome_kind=cfg.get("outcome_kind", "continuous"),
            )
            return cls(
                n=int(cfg["n"]),
                params=params,
                exposure_case=int(cfg.get("exposure_case", 1)),
                covariate_sd=float(cfg.get("covariate_sd", math.sqrt(2.0))),
                name=cfg.get("name", ""),
            )
        except KeyError as exc:
            raise InvalidArgumentError(f"scenario config is missing key {exc}") from None


def _exposure(case: int, n: int, gen: np.random.Generator) -> np.ndarray:
    if case == 1:
        return gen.standard_normal(n)
    if case == 2:
        return gen.standard_t(5, size=n)
    return gen.exponential(1.0, size=n)


def generate(scenario: SimScenario, rng: RngLike) -> Dataset:
    """Draw one dataset of ``scenario.n`` rows. Deterministic given ``rng``."""
    gen = as_generator(rng)
    p = scenario.params
    n, d, q = scenario.n, p.d, p.q
    x = _exposure(scenario.exposure_case, n, gen)
    z = gen.standard_normal((n, q)) * scenario.covariate_sd
    e = sample_mvn(n, p.sigma_e, gen)
    m = p.c_k + np.outer(x, p.alpha) + z @ p.eta.T + e
    lin = p.c + p.gamma * x + m @ p.beta + z @ p.theta
    if p.outcome_kind == "continuous":
        y = lin + gen.standard_normal(n) * p.sigma_eps
    else:
        prob = 0.5 * (1.0 + np.tanh(0.5 * lin))
        y = (gen.random(n) < prob).astype(float)
    meta = {
        "exposure": "x",
        "outcome": "y",
        "mediators": [f"m{k + 1}" for k in range(d)],
        "covariates": [f"z{j + 1}" for j in range(q)],
    }
    return Dataset(x=x, m=m, y=y, z=z, kind=p.outcome_kind, meta=meta)


def _params(alpha, beta, kind: OutcomeKind, reading: Reading) -> ModelParams:
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    d = alpha.shape[0]
    _, noise_sd = catalog_scales(reading)
    return ModelParams(
        c=0.5 if kind == "continuous" else 0.0,
        gamma=0.5,
        beta=beta,
        theta=np.ones(2),
        c_k=np.full(d, 0.5),
        alpha=alpha,
        eta=np.ones((d, 2)),
        sigma_e=ar1_covariance(d, 0.5),
        sigma_eps=noise_sd,
        outcome_kind=kind,
    )


_DESIGNS = {
    ("ci", "linear"): ([0, 0.2, 0, 0.1, 0.15], [0, 0, 0.2, 0.1, 0.15]),
    ("ci", "logistic"): ([0, 0.2, 0, 0.1, 0.15], [0, 0, 0.2, 0.1, 0.15]),
    ("test", "linear"): ([0, 0.1, 0, 0.025, 0.035], [0, 0, 0.15, 0.025, 0.035]),
    ("test", "logistic"): ([0, 0.15, 0, 0.025, 0.035], [0, 0, 0.15, 0.035, 0.05]),
}
_TIMING_DIMS = (5, 10, 20, 50, 100)
DEFAULT_N = 100_000


def scenario_catalog(n: int = DEFAULT_N, reading: Reading = "variance") -> dict[str, SimScenario]:
    """Every named parameterisation, keyed ``study/model/caseC`` for the
    interval and testing studies and ``timing/model/dD`` for timing runs."""
    covariate_sd, _ = catalog_scales(reading)
    out = {}
    for (study, model), (alpha, beta) in _DESIGNS.items():
        kind = "continuous" if model == "linear" else "binary"
        for case in (1, 2, 3):
            key = f"{study}/{model}/case{case}"
            out[key] = SimScenario(n, _params(alpha, beta, kind, reading), case, covariate_sd, key)
    for model in ("linear", "logistic"):
        kind = "continuous" if model == "linear" else "binary"
        for d in _TIMING_DIMS:
            key = f"timing/{model}/d{d}"
            half = np.full(d, 0.5)
            out[key] = SimScenario(n, _params(half, half, kind, reading), 1, covariate_sd, key)
    return out


def _normalise_key(key) -> str:
    if isinstance(key, str):
        return key.strip().lower()
    parts = [str(p).lower() for p in key]
    study, model, rest = parts[0], parts[1], parts[2:]
    if study == "timing":
        tag = rest[-1] if rest else "5"
        tag = tag if tag.startswith("d") else f"d{tag.split('=')[-1]}"
        return f"timing/{model}/{tag}"
    tag = rest[0] if rest else "1"
    tag = tag if tag.startswith("case") else f"case{tag}"
    return f"{study}/{model}/{tag}"


def get_scenario(key, n: int | None = None, reading: Reading = "variance") -> SimScenario:
    """Look up a catalogue entry by ``"ci/linear/case1"`` or ``("ci", "linear", 1)``."""
    catalog = scenario_catalog(DEFAULT_N if n is None else n, reading)
    norm = _normalise_key(key)
    try:
        return catalog[norm]
    except KeyError:
        raise UnknownScenarioError(f"unknown scenario {key!r}; known: {', '.join(sorted(catalog))}") from None
