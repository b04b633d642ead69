"""The many-sample dimensionality test and sequential dimension estimation.

Under ``H0: dim span{Sigma_i} = d0`` the standardized statistic

    T = sqrt(q) * p * M_hat(d0 + 1) / sigma_hat

is asymptotically standard normal; ``H0`` is rejected when ``T > z_alpha``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .core import GramMatrix, Strategy, principal_minor_sum
from .estimators import GroupSample, gram_hat
from .exceptions import DegenerateVarianceError, DimensionError, DomainError
from .validation import check_probability

__all__ = [
    "TestReport",
    "SequentialReport",
    "m_hat",
    "beta_hat",
    "sigma_hat",
    "normal_sf",
    "normal_cdf",
    "normal_isf",
    "dim_test",
    "dim_test_from_gram",
    "sequential_dim",
]


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # keep pytest from collecting this class

    d0: int
    m_hat_d0: float
    m_hat_d0p1: float
    beta_hat: float
    sigma_hat: float
    statistic: float
    p_value: float
    alpha: float
    reject: bool
    q: int
    p: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SequentialReport:
    """Outcome of testing d = 1, 2, ... until the first acceptance.

    ``estimated_d`` is None when every tested ``d`` was rejected. No
    multiplicity correction is applied: each step uses the raw ``alpha``.
    """

    estimated_d: int | None
    per_d: list[tuple[int, TestReport]] = field(default_factory=list)
    alpha: float = 0.05
    d_max: int = 1
    multiplicity_note: str = "no multiplicity correction; each step tested at the raw alpha"

    def to_dict(self) -> dict:
        return {
            "estimated_d": self.estimated_d,
            "alpha": self.alpha,
            "d_max": self.d_max,
            "multiplicity_note": self.multiplicity_note,
            "per_d": [{"d": d, **rep.to_dict()} for d, rep in self.per_d],
        }


def m_hat(G_hat, k: int, strategy=Strategy.AUTO) -> float:
    """Average of all k x k principal minors of an (estimated) Gram matrix."""
    q = G_hat.q if isinstance(G_hat, GramMatrix) else np.asarray(G_hat).shape[0]
    if not 1 <= k <= q:
        raise DomainError(f"k must satisfy 1 <= k <= {q}, got {k}")
    return principal_minor_sum(G_hat, k, strategy) / math.comb(q, k)


def beta_hat(G_hat, c_list: Sequence[float]) -> float:
    diag = np.diag(np.asarray(G_hat, dtype=np.float64))
    c = np.asarray(c_list, dtype=np.float64)
    if c.shape != diag.shape:
        raise DimensionError(f"c_list has length {c.size}, expected {diag.size}")
    if np.any(c <= 0):
        raise DomainError("c_list entries must be positive")
    return float(np.mean(c**2 * diag**2))


def sigma_hat(m_hat_d0: float, beta_hat: float, d0: int) -> float:
    if beta_hat < 0:
        raise DomainError("beta_hat must be nonnegative")
    return 2.0 * (d0 + 1) * abs(m_hat_d0) * math.sqrt(beta_hat)


def normal_sf(z: float) -> float:
    """Standard normal upper tail ``1 - Phi(z)``."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_isf(alpha: float, tol: float = 1e-12) -> float:
    """Upper ``alpha`` quantile ``z_alpha`` by bisection on :func:`normal_sf`."""
    alpha = check_probability(alpha)
    lo, hi = -40.0, 40.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if normal_sf(mid) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def dim_test_from_gram(
    G_hat,
    c_list: Sequence[float],
    d0: int,
    alpha: float = 0.05,
    p: int | None = None,
    strategy=Strategy.AUTO,
) -> TestReport:
    """Run the test on a precomputed sample Gram matrix."""
    alpha = check_probability(alpha)
    if p is None:
        if not isinstance(G_hat, GramMatrix) or G_hat.dim_p is None:
            raise DomainError("p must be given when G_hat carries no dimension")
        p = G_hat.dim_p
    q = G_hat.q if isinstance(G_hat, GramMatrix) else np.asarray(G_hat).shape[0]
    if d0 < 1 or q < d0 + 2:
        raise DomainError(f"need 1 <= d0 and q >= d0 + 2, got d0={d0}, q={q}")
    md0 = m_hat(G_hat, d0, strategy)
    md1 = m_hat(G_hat, d0 + 1, strategy)
    b = beta_hat(G_hat, c_list)
    s = sigma_hat(md0, b, d0)
    if s == 0.0 or not math.isfinite(s):
        raise DegenerateVarianceError(
            f"estimated standard deviation is {s} (M_hat at d0={d0} is {md0}, beta_hat {b})"
        )
    stat = math.sqrt(q) * p * md1 / s
    pval = normal_sf(stat)
    return TestReport(
        d0=d0,
        m_hat_d0=md0,
        m_hat_d0p1=md1,
        beta_hat=b,
        sigma_hat=s,
        statistic=stat,
        p_value=pval,
        alpha=alpha,
        reject=bool(stat > normal_isf(alpha)),
        q=q,
        p=int(p),
    )


def dim_test(groups: Sequence[GroupSample], d0: int, alpha: float = 0.05, strategy=Strategy.AUTO) -> TestReport:
    """Test ``H0: dim span{Sigma_i} = d0`` against ``> d0`` (one-sided)."""
    groups = list(groups)
    check_probability(alpha)
    if d0 < 1 or len(groups) < d0 + 2:
        raise DomainError(f"need 1 <= d0 and q >= d0 + 2, got d0={d0}, q={len(groups)}")
    G = gram_hat(groups)
    return dim_test_from_gram(G, [g.c_ip for g in groups], d0, alpha, G.dim_p, strategy)


def sequential_dim(
    groups: Sequence[GroupSample], alpha: float = 0.05, d_max: int | None = None, strategy=Strategy.AUTO
) -> SequentialReport:
    """Test d = 1, 2, ... and stop at the first accepted hypothesis."""
    groups = list(groups)
    alpha = check_probability(alpha)
    q = len(groups)
    if d_max is None:
        d_max = q - 2
    if d_max < 1 or d_max > q - 2:
        raise DomainError(f"d_max must lie in [1, {q - 2}], got {d_max}")
    G = gram_hat(groups)
    c_list = [g.c_ip for g in groups]
    per_d = []
    for d in range(1, d_max + 1):
        report = dim_test_from_gram(G, c_list, d, alpha, G.dim_p, strategy)
        per_d.append((d, report))
        if not report.reject:
            return SequentialReport(d, per_d, alpha, d_max)
    return SequentialReport(None, per_d, alpha, d_max)
