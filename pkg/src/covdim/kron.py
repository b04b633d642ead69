"""Kronecker-sum approximation of block covariance matrices.

A ``(pq) x (pq)`` matrix made of ``q x q`` blocks of size ``p`` is rearranged
into a ``q^2 x p^2`` matrix whose rank equals the number of Kronecker terms
``A_l (q x q) ⊗ B_l (p x p)`` needed to represent it. Truncated SVD of the
rearrangement gives the best Frobenius-norm approximation by ``d`` terms.

Conventions: ``vec`` is column-major, and block ``(i, j)`` lands in row
``j * q + i`` (0-based), i.e. the block grid is itself vectorized
column-major. With this ordering ``reshape(kron(A, B)) == outer(vec(A), vec(B))``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import DimensionError, DomainError, NumericalError

__all__ = [
    "RssSummary",
    "vec",
    "reshape",
    "inverse_reshape",
    "rank_d_approx",
    "block_covariance",
    "rss_experiment",
]


def vec(A) -> np.ndarray:
    """Column-major vectorization."""
    return np.asarray(A, dtype=np.float64).ravel(order="F")


def reshape(M, p: int, q: int) -> np.ndarray:
    """Rearrange a ``(pq) x (pq)`` block matrix into ``q^2 x p^2``."""
    M = np.asarray(M, dtype=np.float64)
    if p < 1 or q < 1 or M.shape != (p * q, p * q):
        raise DimensionError(f"matrix of shape {M.shape} does not factor as ({p}*{q})^2")
    blocks = M.reshape(q, p, q, p)  # [i, r, j, s] = M[i*p + r, j*p + s]
    return blocks.transpose(2, 0, 3, 1).reshape(q * q, p * p)


def inverse_reshape(R, p: int, q: int) -> np.ndarray:
    """Inverse of :func:`reshape`."""
    R = np.asarray(R, dtype=np.float64)
    if p < 1 or q < 1 or R.shape != (q * q, p * p):
        raise DimensionError(f"rearranged matrix of shape {R.shape} does not match p={p}, q={q}")
    return R.reshape(q, q, p, p).transpose(1, 3, 0, 2).reshape(p * q, p * q)


def rank_d_approx(R, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Best rank-``d`` approximation of ``R`` and the full singular value list."""
    R = np.asarray(R, dtype=np.float64)
    if R.ndim != 2 or not 1 <= d <= min(R.shape):
        raise DomainError(f"rank d={d} outside [1, {min(R.shape) if R.ndim == 2 else 0}]")
    try:
        U, s, Vt = np.linalg.svd(R, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    return (U[:, :d] * s[:d]) @ Vt[:d], s


def block_covariance(observations, center: bool = True) -> np.ndarray:
    """Covariance (divisor n) of ``vec`` of matrix observations; raw second moment if not ``center``."""
    return _cov_rows(np.stack([vec(X) for X in observations]), center)


@dataclass
class RssSummary:
    """Train/test residuals of rank-limited Kronecker-sum fits.

    ``rss_by_rank[s, k]`` is the residual for split ``s`` and ``ranks[k]``.
    ``diff_mean``/``diff_sd``/``frac_higher_rank_better`` compare the
    largest against the smallest requested rank; ``pairwise`` has the same
    statistics for every pair of ranks.
    """

    splits: int
    ranks: list[int]
    rss_by_rank: np.ndarray
    diff_mean: float
    diff_sd: float
    frac_higher_rank_better: float
    seed: int
    pairwise: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "splits": self.splits,
            "ranks": list(self.ranks),
            "diff_mean": self.diff_mean,
            "diff_sd": self.diff_sd,
            "frac_higher_rank_better": self.frac_higher_rank_better,
            "seed": self.seed,
            "pairwise": self.pairwise,
        }

    def rows(self) -> list[dict]:
        return [
            {"split": s, **{f"rss_{r}": float(v) for r, v in zip(self.ranks, row)}}
            for s, row in enumerate(self.rss_by_rank)
        ]


def _compare(rss: np.ndarray, low: int, high: int, ranks: Sequence[int]) -> dict:
    diff = rss[:, high] - rss[:, low]
    return {
        "low_rank": int(ranks[low]),
        "high_rank": int(ranks[high]),
        "diff_mean": float(diff.mean()),
        "diff_sd": float(diff.std(ddof=1)) if diff.size > 1 else 0.0,
        "frac_higher_rank_better": float(np.mean(diff < 0)),
    }


def rss_experiment(
    observations, ranks: Sequence[int], splits: int, seed: int = 0, center: bool = True
) -> RssSummary:
    """Random half/half splits scoring train rank-d fits against the test covariance.

    Each split uses its own stream ``SeedSequence(seed, spawn_key=(split,))``.
    With ``center=False`` covariances are raw second moments.
    """
    obs = [np.asarray(X, dtype=np.float64) for X in observations]
    n = len(obs)
    if n < 4 or n % 2:
        raise DomainError(f"need an even number (>= 4) of observations, got {n}")
    if not ranks:
        raise DomainError("ranks must be nonempty")
    if splits < 1:
        raise DomainError("splits must be at least 1")
    p, q = obs[0].shape
    if any(X.shape != (p, q) for X in obs):
        raise DimensionError("observations differ in shape")
    ranks = [int(r) for r in ranks]
    V = np.stack([vec(X) for X in obs])
    rss = np.empty((splits, len(ranks)))
    for s in range(splits):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(s,)))
        perm = rng.permutation(n)
        train, test = V[perm[: n // 2]], V[perm[n // 2 :]]
        R1 = reshape(_cov_rows(train, center), p, q)
        R2 = reshape(_cov_rows(test, center), p, q)
        try:
            U, sv, Vt = np.linalg.svd(R1, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"SVD did not converge: {exc}") from exc
        for k, d in enumerate(ranks):
            if not 1 <= d <= sv.size:
                raise DomainError(f"rank {d} outside [1, {sv.size}]")
            approx = (U[:, :d] * sv[:d]) @ Vt[:d]
            rss[s, k] = np.linalg.norm(approx - R2)
    order = np.argsort(ranks, kind="stable")
    low, high = int(order[0]), int(order[-1])
    main = _compare(rss, low, high, ranks)
    pairwise = [_compare(rss, a, b, ranks) for a, b in itertools.combinations(order, 2)] if len(ranks) > 2 else []
    return RssSummary(
        splits, ranks, rss, main["diff_mean"], main["diff_sd"], main["frac_higher_rank_better"], seed, pairwise
    )


def _cov_rows(V: np.ndarray, center: bool = True) -> np.ndarray:
    S = V.T @ V / V.shape[0]
    if center:
        mean = V.mean(axis=0)
        S -= np.outer(mean, mean)
    return S
