"""Seeded random streams and the sampling primitives used by the engines.

Streams are addressed by ``(master_seed, stream_id, *path)`` and map onto
numpy ``SeedSequence`` spawn keys, so a replicate's draws depend only on its
address and never on which worker ran it or in what order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidArgumentError, NumericalError

__all__ = [
    "RngStream",
    "as_generator",
    "derive_seed",
    "sample_without_replacement",
    "multinomial_uniform",
    "empirical_quantile",
    "sample_mvn",
    "sample_mvn_ar1",
    "ar1_covariance",
    "subset_size",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_id: int = 0
    path: tuple = ()

    def __post_init__(self):
        if not (0 <= self.master_seed <= _MASK64 and 0 <= self.stream_id <= _MASK64):
            raise InvalidArgumentError("seed and stream id must be 64-bit unsigned")

    def substream(self, *keys: int) -> "RngStream":
        """A child stream; children with different keys are independent."""
        return RngStream(self.master_seed, self.stream_id, self.path + tuple(int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(
            entropy=self.master_seed, spawn_key=(self.stream_id, *self.path)
        )
        return np.random.Generator(np.random.PCG64(seq))


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def derive_seed(master_seed: int, *keys: int) -> int:
    """Deterministic 64-bit seed for a nested experiment unit (e.g. one repetition)."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def sample_without_replacement(n: int, b: int, rng: RngLike) -> np.ndarray:
    """Uniformly random ``b`` distinct indices from ``range(n)``.

    For ``b`` small relative to ``n`` the draw keeps the first ``b`` distinct
    values of an i.i.d. uniform stream, which costs O(b log b) instead of the
    O(n) of a full permutation.
    """
    n, b = int(n), int(b)
    if b < 1 or b > n:
        raise InvalidArgumentError(f"subset size b={b} must satisfy 1 <= b <= n={n}")
    gen = as_generator(rng)
    if 4 * b > n:
        return gen.permutation(n)[:b]
    out = np.empty(0, dtype=np.int64)
    while out.size < b:
        need = b - out.size
        cand = np.concatenate([out, gen.integers(0, n, size=need + need // 8 + 8)])
        _, first = np.unique(cand, return_index=True)
        first.sort()
        out = cand[first][:b]
    return out


def multinomial_uniform(n: int, b: int, rng: RngLike) -> np.ndarray:
    """Counts of ``n`` trials spread uniformly over ``b`` categories.

    numpy draws these by sequential conditional binomials, so the cost is
    O(b) regardless of ``n``. The counts sum to ``n`` exactly.
    """
    n, b = int(n), int(b)
    if n < 1 or b < 1:
        raise InvalidArgumentError(f"need n >= 1 and b >= 1, got n={n}, b={b}")
    if b == 1:
        return np.array([n], dtype=np.int64)
    gen = as_generator(rng)
    return gen.multinomial(n, np.full(b, 1.0 / b)).astype(np.int64)


def _order_index(v: float, size: int) -> int:
    # ceil(v * S) with float noise removed, e.g. 0.07 * 100 -> 7, not 8
    k = math.ceil(round(v * size, 9))
    return min(max(k, 1), size)


def empirical_quantile(values, v: float) -> float:
    """The ``ceil(v * S)``-th order statistic of ``values`` (inverse ECDF)."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise InvalidArgumentError("empirical_quantile of an empty sample")
    if not 0.0 < v < 1.0:
        raise InvalidArgumentError(f"probability must lie in (0, 1), got {v}")
    k = _order_index(v, arr.size)
    return float(np.partition(arr, k - 1)[k - 1])


def ar1_covariance(dim: int, rho: float) -> np.ndarray:
    idx = np.arange(dim)
    return rho ** np.abs(np.subtract.outer(idx, idx)).astype(float)


def sample_mvn(count: int, cov, rng: RngLike) -> np.ndarray:
    """``count`` mean-zero rows with covariance ``cov`` via its Cholesky factor."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"covariance is not positive definite: {exc}") from None
    gen = as_generator(rng)
    return gen.standard_normal((int(count), cov.shape[0])) @ chol.T


def sample_mvn_ar1(count: int, dim: int, rho: float, rng: RngLike) -> np.ndarray:
    if dim < 1:
        raise InvalidArgumentError("dim must be >= 1")
    if not abs(rho) < 1:
        raise InvalidArgumentError(f"|rho| must be < 1, got {rho}")
    return sample_mvn(count, ar1_covariance(dim, rho), rng)


def subset_size(n: int, exponent: float | None = None, b: int | None = None) -> int:
    """Resolve the SDB subset size: an explicit ``b`` or ``floor(n ** exponent)``."""
    if b is None:
        if exponent is None or not 0.0 < exponent < 1.0:
            raise InvalidArgumentError(f"subset exponent must lie in (0, 1), got {exponent}")
        # floor(n ** r) with a guard against 10**5 ** 0.6 = 999.9999...
        b = math.floor(n**exponent + 1e-9)
    b = int(b)
    if not 1 < b <= n:
        raise InvalidArgumentError(f"subset size b={b} must satisfy 1 < b <= n={n}")
    return b
