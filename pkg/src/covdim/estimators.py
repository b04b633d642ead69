"""Per-group sample statistics and the bias-corrected sample Gram matrix."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import GramKind, GramMatrix, psd_sqrt
from .exceptions import DimensionError, SampleTooSmallError
from .validation import check_same_dim, check_symmetric

__all__ = [
    "GroupSample",
    "MomentOracle",
    "sample_cov",
    "eta4_hat",
    "gram_hat",
    "mu_functional",
    "analytic_moments",
]

MIN_SAMPLES = 5


@dataclass(frozen=True)
class GroupSample:
    """One population's observations stored column-wise as a ``(p, n)`` array.

    Set ``validate=False`` to skip the sample-size floor (useful for
    inspecting tiny samples; the fourth-moment estimator still refuses them).
    """

    data: np.ndarray
    group_id: int = 0
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2:
            raise DimensionError(f"group data must be 2-d (p, n), got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DimensionError(f"group {self.group_id} contains non-finite values")
        if self.validate and data.shape[1] < MIN_SAMPLES:
            raise SampleTooSmallError(
                f"group {self.group_id} has {data.shape[1]} observations, need at least {MIN_SAMPLES}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_rows(cls, rows, group_id: int = 0, center: bool = False, validate: bool = True) -> "GroupSample":
        """Build from an ``(n, p)`` array with one observation per row."""
        rows = np.asarray(rows, dtype=np.float64)
        if center:
            rows = rows - rows.mean(axis=0, keepdims=True)
        return cls(rows.T, group_id, validate)

    @property
    def dim_p(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def c_ip(self) -> float:
        return self.dim_p / self.n

    def scaled(self, w: float) -> "GroupSample":
        return GroupSample(w * self.data, self.group_id, self.validate)


@dataclass(frozen=True)
class MomentOracle:
    e_tr_s2: float
    e_cross: float
    var_corrected: float


def sample_cov(g: GroupSample) -> np.ndarray:
    """Uncentered sample covariance ``X X^T / n``."""
    X = g.data
    S = X @ X.T / g.n
    return 0.5 * (S + S.T)


def eta4_hat(g: GroupSample) -> float:
    """Unbiased estimator of ``eta_4 + 4 tr(Sigma^2)/p`` from one group.

    Evaluates the ordered quadruple U-statistic over pairwise squared
    distances ``d_jk = |x_j - x_k|^2`` in O(n^2) via

        2(n-2)(n-3) T2 - 2 (T1^2 + 2 T2 - 4 sum_j r_j^2)

    with ``T1 = sum d``, ``T2 = sum d^2`` and row sums ``r``. The statistic
    is unchanged by a common shift of the off-diagonal distances, so they are
    centered first to limit cancellation.
    """
    n, p = g.n, g.dim_p
    if n < MIN_SAMPLES:
        raise SampleTooSmallError(f"eta4_hat needs at least {MIN_SAMPLES} observations, got {n}")
    X = g.data - g.data.mean(axis=1, keepdims=True)
    gram_obs = X.T @ X
    sq = np.diag(gram_obs)
    d = sq[:, None] + sq[None, :] - 2.0 * gram_obs
    off = ~np.eye(n, dtype=bool)
    d = np.where(off, d - d[off].mean(), 0.0)
    d = 0.5 * (d + d.T)
    r = d.sum(axis=1)
    T1 = r.sum()
    T2 = np.sum(d * d)
    total = 2.0 * (n - 2) * (n - 3) * T2 - 2.0 * (T1 * T1 + 2.0 * T2 - 4.0 * np.dot(r, r))
    return float(total / (4.0 * p * n * (n - 1) * (n - 2) * (n - 3)))


def gram_hat(groups: Sequence[GroupSample]) -> GramMatrix:
    """Sample Gram matrix with unbiased, bias-corrected diagonal."""
    groups = list(groups)
    if len(groups) < 2:
        raise DimensionError("gram_hat needs at least two groups")
    p = groups[0].dim_p
    ids = set()
    for g in groups:
        if g.dim_p != p:
            raise DimensionError(f"group {g.group_id} has dimension {g.dim_p}, expected {p}")
        if g.group_id in ids:
            raise DimensionError(f"duplicate group id {g.group_id}")
        ids.add(g.group_id)
    q = len(groups)
    flat = np.empty((q, p * p))
    for i, g in enumerate(groups):
        flat[i] = sample_cov(g).ravel()
    G = flat @ flat.T / p
    G = 0.5 * (G + G.T)
    for i, g in enumerate(groups):
        c = g.c_ip
        tr_s = flat[i, :: p + 1].sum() / p
        num = G[i, i] - c * tr_s**2 - (c / p - c * c / p**2) * eta4_hat(g)
        G[i, i] = num / ((1.0 - 2.0 * c / p) * (1.0 - c / p))
    return GramMatrix(G, GramKind.ESTIMATED, p)


def mu_functional(A, B, Lambda, nu4: float) -> float:
    """Bilinear form ``(2/p) tr(L A L B) + ((nu4-3)/p) tr(D(L^½ A L^½) D(L^½ B L^½))``."""
    A = check_symmetric(A, "A")
    B = check_symmetric(B, "B")
    Lambda = check_symmetric(Lambda, "Lambda")
    check_same_dim(A, B)
    check_same_dim(A, Lambda)
    p = A.shape[0]
    root = psd_sqrt(Lambda)
    value = 2.0 * np.sum((Lambda @ A) * (Lambda @ B).T) / p
    if nu4 != 3.0:
        da = np.einsum("ij,ji->i", root, A @ root)
        db = np.einsum("ij,ji->i", root, B @ root)
        value += (nu4 - 3.0) * float(np.dot(da, db)) / p
    return float(value)


def analytic_moments(Sigma, A, B, n: int, nu4: float) -> MomentOracle:
    """Moments of sample-covariance traces for a ``Sigma^½ z`` model.

    ``e_tr_s2`` and ``e_cross`` are exact finite-sample means; ``var_corrected``
    is the leading-order variance of ``tr(S^2) - c tr(S)^2 / p``.
    """
    Sigma = check_symmetric(Sigma, "Sigma")
    if n < 1:
        raise DimensionError("n must be positive")
    p = Sigma.shape[0]
    c = p / n
    tr1 = np.trace(Sigma) / p
    tr2 = np.sum(Sigma * Sigma) / p
    diag2 = np.sum(np.diag(Sigma) ** 2) / p
    e_tr_s2 = tr2 + c * tr1**2 + (tr2 + (nu4 - 3.0) * diag2) / n
    A = check_symmetric(A, "A")
    B = check_symmetric(B, "B")
    ta = np.sum(Sigma * A) / p
    tb = np.sum(Sigma * B) / p
    e_cross = ta * tb + mu_functional(A, B, Sigma, nu4) / (p * n)
    var_corrected = 4.0 * c * c * tr2**2 + 4.0 * c * mu_functional(Sigma, Sigma, Sigma, nu4)
    return MomentOracle(float(e_tr_s2), float(e_cross), float(var_corrected))
