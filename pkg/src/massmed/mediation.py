"""Multi-mediator model: data container, system fit and closed-form effects.

The outcome regression is ``Y ~ 1 + X + M_1..M_d + Z`` (least squares or
logistic); each mediator regression is ``M_k ~ 1 + X + Z``. Because the d
mediator regressions share one design, they are solved with a single QR.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np

from .errors import (
    EffectRangeError,
    FitError,
    InvalidArgumentError,
    NumericalError,
    ValidationError,
)
from .regression import FitResult, fit_linear_many, fit_logistic, fit_logistic_weighted

__all__ = [
    "OutcomeKind",
    "Dataset",
    "ModelParams",
    "MediationFit",
    "EffectQuery",
    "LinearEffects",
    "OddsRatioEffects",
    "RareOutcomeCheck",
    "ASSUMPTIONS",
    "fit_mediation",
    "sobel_se",
    "effects_linear",
    "effects_logistic_or",
    "rare_outcome_check",
]

OutcomeKind = Literal["continuous", "binary"]
KINDS = ("continuous", "binary")

# Identification conditions the effect formulas rely on. Reported, never checked.
ASSUMPTIONS = (
    "C.1 consistency/SUTVA: one version of each exposure level and no interference between units",
    "C.2 mediators and outcome are measured without error",
    "C.3 sequential ignorability: no unmeasured exposure-outcome, mediator-outcome or "
    "exposure-mediator confounding given Z, and no exposure-induced mediator-outcome confounder",
    "C.4 mediators do not cause one another",
)

OR_EXPONENT_LIMIT = 700.0
RARE_OUTCOME_THRESHOLD = 0.1


def _check_kind(kind):
    if kind not in KINDS:
        raise InvalidArgumentError(f"outcome kind must be one of {KINDS}, got {kind!r}")
    return kind


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-major table: exposure ``x`` (n), mediators ``m`` (n, d),
    outcome ``y`` (n) and covariates ``z`` (n, q; q may be 0)."""

    x: np.ndarray
    m: np.ndarray
    y: np.ndarray
    z: np.ndarray = None
    kind: OutcomeKind = "continuous"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        m = np.asarray(self.m, dtype=float)
        if m.ndim == 1:
            m = m[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        n = x.shape[0]
        z = np.empty((n, 0)) if self.z is None else np.asarray(self.z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if m.shape[0] != n or y.shape[0] != n or z.shape[0] != n:
            raise InvalidArgumentError(
                f"column lengths differ: x={n}, m={m.shape[0]}, y={y.shape[0]}, z={z.shape[0]}"
            )
        if m.shape[1] < 1:
            raise InvalidArgumentError("at least one mediator is required")
        _check_kind(self.kind)
        if self.kind == "binary" and not np.all((y == 0.0) | (y == 1.0)):
            bad = np.flatnonzero((y != 0.0) & (y != 1.0))[:10]
            raise ValidationError(f"binary outcome has values outside {{0, 1}} at rows {bad.tolist()}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.m.shape[1]

    @property
    def q(self) -> int:
        return self.z.shape[1]

    @cached_property
    def outcome_design(self) -> np.ndarray:
        return np.column_stack([np.ones(self.n), self.x, self.m, self.z])

    @cached_property
    def mediator_design(self) -> np.ndarray:
        return np.column_stack([np.ones(self.n), self.x, self.z])

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.x[rows], self.m[rows], self.y[rows], self.z[rows], self.kind, dict(self.meta))

    def mediator_names(self) -> list[str]:
        return list(self.meta.get("mediators") or [f"M{k + 1}" for k in range(self.d)])


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Coefficients of the outcome and mediator equations plus error structure."""

    c: float
    gamma: float
    beta: np.ndarray
    theta: np.ndarray
    c_k: np.ndarray
    alpha: np.ndarray
    eta: np.ndarray
    sigma_e: np.ndarray
    sigma_eps: float = 2.0
    outcome_kind: OutcomeKind = "continuous"

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        d = beta.shape[0]
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if alpha.shape != (d,):
            raise InvalidArgumentError(f"alpha has length {alpha.shape[0]}, beta has {d}")
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        q = theta.shape[0]
        eta = np.asarray(self.eta, dtype=float)
        try:
            c_k = np.broadcast_to(np.asarray(self.c_k, dtype=float), (d,)).copy()
            eta = np.broadcast_to(eta, (d, q)).copy() if eta.size else np.zeros((d, q))
        except ValueError:
            raise InvalidArgumentError(f"c_k must have length {d} and eta shape ({d}, {q})") from None
        sigma_e = np.atleast_2d(np.asarray(self.sigma_e, dtype=float))
        if sigma_e.shape != (d, d):
            raise InvalidArgumentError(f"sigma_e must be {d}x{d}")
        if not np.allclose(sigma_e, sigma_e.T):
            raise InvalidArgumentError("sigma_e must be symmetric")
        if np.linalg.eigvalsh(sigma_e).min() < -1e-10:
            raise InvalidArgumentError("sigma_e must be positive semi-definite")
        _check_kind(self.outcome_kind)
        for name, val in [("beta", beta), ("alpha", alpha), ("c_k", c_k), ("theta", theta),
                          ("eta", eta), ("sigma_e", sigma_e)]:
            object.__setattr__(self, name, val)

    @property
    def d(self) -> int:
        return self.beta.shape[0]

    @property
    def q(self) -> int:
        return self.theta.shape[0]

    @property
    def products(self) -> np.ndarray:
        return self.alpha * self.beta


@dataclass(frozen=True)
class MediationFit:
    alpha: np.ndarray
    beta: np.ndarray
    se_alpha: np.ndarray
    se_beta: np.ndarray
    product: np.ndarray
    sobel_se: np.ndarray
    gamma: float
    se_gamma: float
    kind: OutcomeKind
    outcome: FitResult
    mediators: tuple
    n_obs: float

    @property
    def d(self) -> int:
        return self.alpha.shape[0]

    def to_params(self) -> ModelParams:
        """Estimated coefficients packed as :class:`ModelParams` (error terms left unit)."""
        d = self.d
        oc = self.outcome.coefficients
        med = np.array([f.coefficients for f in self.mediators])
        return ModelParams(
            c=float(oc[0]),
            gamma=float(oc[1]),
            beta=oc[2 : 2 + d],
            theta=oc[2 + d :],
            c_k=med[:, 0],
            alpha=med[:, 1],
            eta=med[:, 2:],
            sigma_e=np.eye(d),
            sigma_eps=float(np.sqrt(self.outcome.residual_variance))
            if self.kind == "continuous"
            else float("nan"),
            outcome_kind=self.kind,
        )


def sobel_se(alpha_hat, se_alpha, beta_hat, se_beta):
    """Delta-method standard error of ``alpha_hat * beta_hat``:
    ``sqrt(alpha^2 se_beta^2 + beta^2 se_alpha^2)``. Vectorised."""
    se_alpha = np.asarray(se_alpha, dtype=float)
    se_beta = np.asarray(se_beta, dtype=float)
    if np.any(se_alpha < 0) or np.any(se_beta < 0):
        raise InvalidArgumentError("standard errors must be non-negative")
    out = np.hypot(np.asarray(alpha_hat, dtype=float) * se_beta,
                   np.asarray(beta_hat, dtype=float) * se_alpha)
    return float(out) if out.ndim == 0 else out


def fit_mediation(
    data: Dataset,
    kind: OutcomeKind | None = None,
    weights=None,
    rows=None,
    start=None,
) -> MediationFit:
    """Fit the outcome regression and all d mediator regressions.

    ``rows`` restricts the fit to a subset of rows and ``weights`` (aligned
    with ``rows`` when both are given) are integer frequencies. ``start``
    warm-starts the logistic outcome fit.
    """
    kind = _check_kind(kind or data.kind)
    d = data.d
    Xo, Xm, y, M = data.outcome_design, data.mediator_design, data.y, data.m
    if rows is not None:
        Xo, Xm, y, M = Xo[rows], Xm[rows], y[rows], M[rows]

    try:
        if kind == "continuous":
            outcome = fit_linear_many(Xo, y[:, None], weights)[0]
        elif weights is None:
            outcome = fit_logistic(Xo, y, start=start)
        else:
            outcome = fit_logistic_weighted(Xo, y, weights, start=start)
    except (NumericalError, InvalidArgumentError) as exc:
        raise FitError("outcome", exc) from exc

    try:
        mediators = tuple(fit_linear_many(Xm, M, weights))
    except (NumericalError, InvalidArgumentError) as exc:
        raise FitError("mediator", exc) from exc

    alpha = np.array([f.coefficients[1] for f in mediators])
    se_alpha = np.array([f.std_errors[1] for f in mediators])
    beta = outcome.coefficients[2 : 2 + d].copy()
    se_beta = outcome.std_errors[2 : 2 + d].copy()
    return MediationFit(
        alpha=alpha,
        beta=beta,
        se_alpha=se_alpha,
        se_beta=se_beta,
        product=alpha * beta,
        sobel_se=np.hypot(alpha * se_beta, beta * se_alpha),
        gamma=float(outcome.coefficients[1]),
        se_gamma=float(outcome.std_errors[1]),
        kind=kind,
        outcome=outcome,
        mediators=mediators,
        n_obs=outcome.n_obs,
    )


@dataclass(frozen=True)
class EffectQuery:
    x: float = 1.0
    x_star: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.x_star)):
            raise InvalidArgumentError("exposure levels must be finite")

    @property
    def contrast(self) -> float:
        return self.x - self.x_star


@dataclass(frozen=True)
class LinearEffects:
    nde: float
    nie: float
    te: float
    per_mediator_nie: tuple


@dataclass(frozen=True)
class OddsRatioEffects:
    nde_or: float
    nie_or: float
    te_or: float
    log_nde: float
    log_nie: float
    log_te: float


def effects_linear(params: ModelParams, query: EffectQuery = EffectQuery()) -> LinearEffects:
    """Natural direct, indirect and total effects for a continuous outcome."""
    if params.outcome_kind != "continuous":
        raise InvalidArgumentError("effects_linear needs a continuous-outcome model")
    delta = query.contrast
    per = tuple(float(a * b * delta) for a, b in zip(params.alpha, params.beta))
    nde = float(params.gamma * delta)
    nie = 0.0
    for v in per:
        nie += v
    return LinearEffects(nde=nde, nie=nie, te=nde + nie, per_mediator_nie=per)


def effects_logistic_or(params: ModelParams, query: EffectQuery = EffectQuery()) -> OddsRatioEffects:
    """Odds-ratio scale effects for a binary outcome (valid when the outcome is rare)."""
    if params.outcome_kind != "binary":
        raise InvalidArgumentError("effects_logistic_or needs a binary-outcome model")
    delta = query.contrast
    log_nde = float(params.gamma * delta)
    log_nie = 0.0
    for a, b in zip(params.alpha, params.beta):
        log_nie += float(a * b * delta)
    log_te = log_nde + log_nie
    for name, val in (("NDE", log_nde), ("NIE", log_nie), ("TE", log_te)):
        if abs(val) > OR_EXPONENT_LIMIT:
            raise EffectRangeError(f"log {name} odds ratio {val:g} overflows")
    nde_or = math.exp(log_nde)
    nie_or = math.exp(log_nie)
    return OddsRatioEffects(
        nde_or=nde_or,
        nie_or=nie_or,
        te_or=nde_or * nie_or,
        log_nde=log_nde,
        log_nie=log_nie,
        log_te=log_te,
    )


@dataclass(frozen=True)
class RareOutcomeCheck:
    prevalence: float
    warning: bool
    threshold: float = RARE_OUTCOME_THRESHOLD
    note: str = "threshold is a diagnostic convention, not an estimated quantity"


def rare_outcome_check(data: Dataset, params: ModelParams | None = None,
                       threshold: float = RARE_OUTCOME_THRESHOLD) -> RareOutcomeCheck:
    """Outcome prevalence and whether it is too common for the odds-ratio
    approximation to be trusted."""
    kind = params.outcome_kind if params is not None else data.kind
    if kind != "binary":
        raise InvalidArgumentError("rare-outcome check applies to binary outcomes only")
    prevalence = float(data.y.mean()) if data.n else 0.0
    return RareOutcomeCheck(prevalence=prevalence, warning=prevalence > threshold, threshold=threshold)

