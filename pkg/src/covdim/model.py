"""scikit-learn style estimators wrapping the functional API.

Grouped inputs follow the sklearn row convention: ``X`` is a sequence of
``(n_i, p)`` arrays, one per group. Matrix-valued inputs for
:class:`KroneckerSumApproximation` are an ``(n, p, q)`` array or a list of
``p x q`` matrices.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .dimtest import dim_test_from_gram, sequential_dim
from .estimators import GroupSample, gram_hat
from .exceptions import DimensionError, DomainError
from .kron import block_covariance, inverse_reshape, reshape
from .validation import check_group_arrays, check_probability

__all__ = ["DimensionalityTest", "SequentialDimension", "KroneckerSumApproximation"]


def _to_groups(X, center: bool) -> list[GroupSample]:
    arrays = check_group_arrays(X)
    return [GroupSample.from_rows(a, i, center=center) for i, a in enumerate(arrays)]


class DimensionalityTest(BaseEstimator):
    """One-sided test of ``dim span{Sigma_1, ..., Sigma_q} = d0`` against ``> d0``.

    Parameters
    ----------
    d0 : int
        Null dimension.
    alpha : float
        Significance level.
    center : bool
        Subtract each group's sample mean first. The test theory assumes
        zero-mean data, so this is off by default.
    strategy : {"auto", "enumerate", "spectral"}
        How principal-minor sums are evaluated.

    Attributes
    ----------
    gram_ : GramMatrix
        Bias-corrected sample Gram matrix.
    report_ : TestReport
    statistic_, p_value_ : float
    reject_ : bool
    """

    def __init__(self, d0=1, alpha=0.05, center=False, strategy="auto"):
        self.d0 = d0
        self.alpha = alpha
        self.center = center
        self.strategy = strategy

    def fit(self, X, y=None):
        check_probability(self.alpha)
        groups = _to_groups(X, self.center)
        if len(groups) < self.d0 + 2:
            raise DomainError(f"need at least d0 + 2 = {self.d0 + 2} groups, got {len(groups)}")
        self.gram_ = gram_hat(groups)
        self.c_ = np.array([g.c_ip for g in groups])
        self.report_ = dim_test_from_gram(self.gram_, self.c_, self.d0, self.alpha, self.gram_.dim_p, self.strategy)
        self.statistic_ = self.report_.statistic
        self.p_value_ = self.report_.p_value
        self.reject_ = self.report_.reject
        self.n_groups_ = len(groups)
        self.n_features_in_ = groups[0].dim_p
        return self


class SequentialDimension(BaseEstimator):
    """Estimate the span dimension by testing d = 1, 2, ... until acceptance.

    ``dimension_`` is None when all tested dimensions up to ``d_max``
    (default ``q - 2``) are rejected.
    """

    def __init__(self, alpha=0.05, d_max=None, center=False, strategy="auto"):
        self.alpha = alpha
        self.d_max = d_max
        self.center = center
        self.strategy = strategy

    def fit(self, X, y=None):
        groups = _to_groups(X, self.center)
        self.report_ = sequential_dim(groups, self.alpha, self.d_max, self.strategy)
        self.dimension_ = self.report_.estimated_d
        self.p_values_ = np.array([rep.p_value for _, rep in self.report_.per_d])
        self.n_features_in_ = groups[0].dim_p
        return self

    def predict(self, X=None):
        check_is_fitted(self, "report_")
        return self.dimension_


def _check_matrix_obs(X) -> np.ndarray:
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 3:
        raise DimensionError(f"expected (n, p, q) matrix observations, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise DomainError("need at least two observations")
    if not np.all(np.isfinite(arr)):
        raise DimensionError("observations contain non-finite values")
    return arr


class KroneckerSumApproximation(BaseEstimator):
    """Best approximation of the covariance of ``vec(X)`` by ``n_terms`` Kronecker products.

    Fitted factors satisfy ``covariance_approx_ ≈ sum_l kron(A_l, B_l)`` with
    ``A_l`` of size ``q x q`` and ``B_l`` of size ``p x p``.

    ``score`` returns the negated Frobenius distance between the fitted
    rearranged approximation and the rearranged covariance of new data, so
    larger is better.
    """

    def __init__(self, n_terms=1, center=True):
        self.n_terms = n_terms
        self.center = center

    def _covariance(self, arr):
        return block_covariance(arr, center=self.center)

    def fit(self, X, y=None):
        arr = _check_matrix_obs(X)
        n, p, q = arr.shape
        self.p_, self.q_ = p, q
        self.covariance_ = self._covariance(arr)
        self.rearranged_ = reshape(self.covariance_, p, q)
        d = self.n_terms
        if not 1 <= d <= min(q * q, p * p):
            raise DomainError(f"n_terms={d} outside [1, {min(q * q, p * p)}]")
        U, sv, Vt = np.linalg.svd(self.rearranged_, full_matrices=False)
        self.singular_values_ = sv
        self.rearranged_approx_ = (U[:, :d] * sv[:d]) @ Vt[:d]
        self.covariance_approx_ = inverse_reshape(self.rearranged_approx_, p, q)
        root = np.sqrt(sv[: self.n_terms])
        self.left_factors_ = [(U[:, l] * root[l]).reshape(q, q, order="F") for l in range(self.n_terms)]
        self.right_factors_ = [(Vt[l] * root[l]).reshape(p, p, order="F") for l in range(self.n_terms)]
        self.n_features_in_ = p * q
        return self

    def transform(self, X=None):
        """Return the fitted ``(pq) x (pq)`` Kronecker-sum covariance."""
        check_is_fitted(self, "covariance_approx_")
        return self.covariance_approx_

    def score(self, X, y=None):
        check_is_fitted(self, "rearranged_approx_")
        arr = _check_matrix_obs(X)
        if arr.shape[1:] != (self.p_, self.q_):
            raise DimensionError(f"expected ({self.p_}, {self.q_}) observations, got {arr.shape[1:]}")
        target = reshape(self._covariance(arr), self.p_, self.q_)
        return -float(np.linalg.norm(self.rearranged_approx_ - target))
