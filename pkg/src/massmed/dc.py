"""Divide-and-conquer Sobel test.

The rows are split into J disjoint blocks; each block gets a full
mediation fit, the block products are averaged and the block Sobel
variances pooled as ``se = sqrt(sum_j se_j^2) / J``. Each product is then
tested with ``P_k = 2 d (1 - Phi(|T_k|))``, a Bonferroni-adjusted p-value
that may exceed 1 (a capped copy is reported alongside).
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import DegenerateVarianceError, EngineError, FitError, InvalidArgumentError
from .mediation import Dataset, OutcomeKind, fit_mediation
from .parallel import ordered_map

__all__ = [
    "DcConfig",
    "BlockEstimates",
    "DcTestReport",
    "partition",
    "aggregate",
    "sobel_test",
    "run_dc_sobel",
]


@dataclass(frozen=True)
class DcConfig:
    blocks: int = 1
    shuffle_seed: int = 0
    significance: float = 0.05
    shuffle: bool = True

    def __post_init__(self):
        if self.blocks < 1:
            raise InvalidArgumentError(f"need at least one block, got {self.blocks}")
        if not 0.0 < self.significance < 1.0:
            raise InvalidArgumentError("significance must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class BlockEstimates:
    """Per-block, per-mediator estimates; every array is ``(J, d)``."""

    alpha: np.ndarray
    beta: np.ndarray
    se_alpha: np.ndarray
    se_beta: np.ndarray
    product: np.ndarray
    sobel_se: np.ndarray
    block_sizes: tuple = ()

    @property
    def J(self) -> int:
        return self.product.shape[0]

    @property
    def d(self) -> int:
        return self.product.shape[1]

    @classmethod
    def from_fits(cls, fits, block_sizes=()) -> "BlockEstimates":
        return cls(
            alpha=np.array([f.alpha for f in fits]),
            beta=np.array([f.beta for f in fits]),
            se_alpha=np.array([f.se_alpha for f in fits]),
            se_beta=np.array([f.se_beta for f in fits]),
            product=np.array([f.product for f in fits]),
            sobel_se=np.array([f.sobel_se for f in fits]),
            block_sizes=tuple(block_sizes),
        )


@dataclass(frozen=True, eq=False)
class DcTestReport:
    estimate: np.ndarray
    se: np.ndarray
    statistic: np.ndarray
    p_value: np.ndarray
    p_value_capped: np.ndarray
    rejected: np.ndarray
    significant: tuple
    zero_over_zero: np.ndarray
    blocks: int
    significance: float
    config: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict, compare=False)

    @property
    def d(self) -> int:
        return self.estimate.shape[0]

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "blocks": self.blocks,
            "significance": self.significance,
            "config": dict(self.config),
            "significant": [k + 1 for k in self.significant],
            "mediators": [
                {
                    "index": k + 1,
                    "estimate": float(self.estimate[k]),
                    "se": float(self.se[k]),
                    "statistic": float(self.statistic[k]),
                    "p_value": float(self.p_value[k]),
                    "p_value_capped": float(self.p_value_capped[k]),
                    "rejected": bool(self.rejected[k]),
                    "zero_over_zero": bool(self.zero_over_zero[k]),
                }
                for k in range(self.d)
            ],
        }
        if include_timing:
            out["timing"] = dict(self.timing)
        return out


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(z):
    # splitmix64 finaliser; uint64 arithmetic wraps by design
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _row_keys(data: Dataset, seed: int) -> np.ndarray:
    """Pseudo-random sort key per row computed from the row's contents.

    Keys depend on the values in a row and the seed, never on its position,
    so reordering the input file leaves the partition unchanged.
    """
    cols = [data.x, data.y, *data.m.T, *data.z.T]
    with np.errstate(over="ignore"):
        h = np.full(data.n, _mix64(np.uint64(seed & ((1 << 64) - 1))), dtype=np.uint64)
        for col in cols:
            bits = np.ascontiguousarray(col, dtype=np.float64).view(np.uint64)
            h = _mix64(h ^ bits)
    return h


def partition(data: Dataset, cfg: DcConfig) -> list[np.ndarray]:
    """Row indices of J disjoint blocks covering all rows.

    Rows are ordered by a seeded content hash (or kept in file order when
    ``cfg.shuffle`` is False) and cut into contiguous runs; the first
    ``n mod J`` blocks hold one extra row. J = 1 returns the rows untouched.
    """
    n, J = data.n, cfg.blocks
    if J > n:
        raise InvalidArgumentError(f"{J} blocks for {n} rows")
    if J == 1:
        return [np.arange(n)]
    if cfg.shuffle:
        order = np.lexsort((np.arange(n), _row_keys(data, cfg.shuffle_seed)))
    else:
        order = np.arange(n)
    return np.array_split(order, J)


def _sobel_decisions(estimate, se, d, significance):
    estimate = np.asarray(estimate, dtype=float)
    se = np.asarray(se, dtype=float)
    zero_se = se == 0.0
    if np.any(zero_se & (estimate != 0.0)):
        bad = np.flatnonzero(zero_se & (estimate != 0.0)) + 1
        raise DegenerateVarianceError(f"zero standard error with nonzero estimate for mediators {bad.tolist()}")
    with np.errstate(invalid="ignore", divide="ignore"):
        stat = np.where(zero_se, 0.0, estimate / np.where(zero_se, 1.0, se))
    p = 2.0 * d * ndtr(-np.abs(stat))
    rejected = p < significance
    return stat, p, np.minimum(p, 1.0), rejected, zero_se


def _report(estimate, se, d, J, significance, config, timing):
    stat, p, p_cap, rejected, zz = _sobel_decisions(estimate, se, d, significance)
    return DcTestReport(
        estimate=np.asarray(estimate, dtype=float),
        se=np.asarray(se, dtype=float),
        statistic=stat,
        p_value=p,
        p_value_capped=p_cap,
        rejected=rejected,
        significant=tuple(int(k) for k in np.flatnonzero(rejected)),
        zero_over_zero=zz,
        blocks=J,
        significance=significance,
        config=config,
        timing=timing,
    )


def aggregate(blocks: BlockEstimates, significance: float = 0.05,
              config: dict | None = None, timing: dict | None = None) -> DcTestReport:
    """Average block products, pool block Sobel variances and test each mediator."""
    J, d = blocks.J, blocks.d
    if J < 1 or not np.all(np.isfinite(blocks.product)) or not np.all(np.isfinite(blocks.sobel_se)):
        raise EngineError("incomplete block grid: every block must have finite estimates")
    estimate = blocks.product.sum(axis=0) / J
    se = np.sqrt((blocks.sobel_se**2).sum(axis=0)) / J
    return _report(estimate, se, d, J, significance, config or {}, timing or {})


def sobel_test(data: Dataset, kind: OutcomeKind | None = None, significance: float = 0.05) -> DcTestReport:
    """Ordinary full-data Sobel test with Bonferroni-adjusted p-values."""
    t0 = time.perf_counter()
    fit = fit_mediation(data, kind)
    timing = {"fit_seconds": time.perf_counter() - t0}
    return _report(fit.product, fit.sobel_se, fit.d, 1, significance,
                   {"blocks": 1, "significance": significance, "n": data.n}, timing)


def run_dc_sobel(
    data: Dataset,
    kind: OutcomeKind | None = None,
    cfg: DcConfig = DcConfig(),
    threads: int = 1,
) -> DcTestReport:
    """Partition, fit each block, aggregate. Any failed block aborts the run."""
    kind = kind or data.kind
    t0 = time.perf_counter()
    blocks = partition(data, cfg)
    p = 2 + data.d + data.q
    if min(len(b) for b in blocks) < p + 2:
        raise InvalidArgumentError(
            f"{cfg.blocks} blocks leave {min(len(b) for b in blocks)} rows per block; "
            f"each block needs at least {p + 2} for {p} outcome regressors"
        )

    def fit_block(j):
        rows = None if cfg.blocks == 1 else blocks[j]
        try:
            return fit_mediation(data, kind, rows=rows)
        except FitError as exc:
            raise EngineError(f"block {j}: {exc}") from exc

    fits = ordered_map(fit_block, range(len(blocks)), threads)
    t_fit = time.perf_counter() - t0
    est = BlockEstimates.from_fits(fits, [len(b) for b in blocks])
    config = asdict(cfg)
    config.update(n=data.n, kind=kind, block_sizes=list(est.block_sizes))
    return aggregate(est, cfg.significance, config, {"fit_seconds": t_fit})
