"""Population-level power analysis under the outlier alternative.

The majority of groups spans a ``d0``-dimensional subspace; a few outlier
groups stick out of it. Power is driven by the squared norms of the outliers'
components orthogonal to the majority span.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import gram, m_pop, orth_decompose
from .dimtest import normal_cdf, normal_isf
from .estimators import mu_functional
from .exceptions import DimensionError, DomainError
from .validation import check_matrix_list, check_probability

__all__ = [
    "AlternativeSpec",
    "beta_pop",
    "mu_functional",
    "r_i_matrix",
    "r_pop",
    "gamma_outlier",
    "theoretical_power",
    "mixture_outlier_power",
    "band_outlier_power",
    "PowerCurve",
    "power_curve",
]

SPAN_RTOL = 1e-10
# Above this many groups the subset average in R_i is estimated by sampling.
EXACT_Q_LIMIT = 60
SUBSET_DRAWS = 100_000


@dataclass(frozen=True)
class AlternativeSpec:
    """Majority covariances spanning ``d0`` dimensions plus ``K >= 1`` outliers.

    ``c_list`` holds ``p / n_i`` for all groups, majority first.
    """

    majority: np.ndarray
    outliers: np.ndarray
    d0: int
    c_list: np.ndarray
    nu4: float = 3.0

    def __post_init__(self):
        majority = check_matrix_list(self.majority, "majority")
        outliers = check_matrix_list(self.outliers, "outliers")
        if majority.shape[1:] != outliers.shape[1:]:
            raise DimensionError("majority and outliers differ in dimension")
        c = np.asarray(self.c_list, dtype=np.float64)
        q = majority.shape[0] + outliers.shape[0]
        if c.shape != (q,):
            raise DimensionError(f"c_list must have length {q}, got {c.size}")
        if not 1 <= self.d0 <= majority.shape[0]:
            raise DomainError(f"d0={self.d0} incompatible with {majority.shape[0]} majority groups")
        object.__setattr__(self, "majority", majority)
        object.__setattr__(self, "outliers", outliers)
        object.__setattr__(self, "c_list", c)
        check_span_dimension(majority, self.d0)

    @property
    def all_matrices(self) -> np.ndarray:
        return np.concatenate([self.majority, self.outliers])

    @property
    def q(self) -> int:
        return self.majority.shape[0] + self.outliers.shape[0]

    def scaled(self, w: float) -> "AlternativeSpec":
        return AlternativeSpec(w * self.majority, w * self.outliers, self.d0, self.c_list, self.nu4)


def check_span_dimension(mats: np.ndarray, d: int, rtol: float = SPAN_RTOL) -> None:
    """Raise DomainError unless ``mats`` span exactly ``d`` dimensions (Gram-minor test)."""
    G = gram(mats).values
    scale = float(np.max(np.diag(G)))
    if m_pop(mats, d) <= rtol * scale**d:
        raise DomainError(f"matrices span fewer than {d} dimensions")
    if d + 1 <= len(mats) and abs(m_pop(mats, d + 1)) >= rtol * scale ** (d + 1):
        raise DomainError(f"matrices span more than {d} dimensions")


def beta_pop(mats, c_list: Sequence[float]) -> float:
    """Weighted mean ``(1/q) sum c_i^2 G_ii^2`` of squared Gram diagonals."""
    G = gram(mats).values
    c = np.asarray(c_list, dtype=np.float64)
    if c.shape != (G.shape[0],):
        raise DimensionError(f"c_list must have length {G.shape[0]}, got {c.size}")
    return float(np.mean(c**2 * np.diag(G) ** 2))


def _subset_coefficients(G: np.ndarray, i: int, subsets: np.ndarray) -> np.ndarray:
    """Accumulated first-row cofactor weights over ``subsets`` (each excluding ``i``)."""
    q = G.shape[0]
    n_sub, d0 = subsets.shape
    cols = np.concatenate([np.full((n_sub, 1), i), subsets], axis=1)
    # scalar block: row l is (G[j_l, i], G[j_l, j_1], ..., G[j_l, j_d0])
    block = G[subsets[:, :, None], cols[:, None, :]]
    coef = np.zeros(q)
    for col in range(d0 + 1):
        minor = np.delete(block, col, axis=2)
        w = (1.0 if col % 2 == 0 else -1.0) * np.linalg.det(minor)
        np.add.at(coef, cols[:, col], w)
    return coef


def r_i_matrix(
    spec: AlternativeSpec,
    i: int,
    *,
    seed: int = 0,
    n_draws: int = SUBSET_DRAWS,
    return_info: bool = False,
):
    """Averaged matrix determinant measuring how group ``i`` (0-based) breaks the null.

    Exact over all ``d0``-subsets of the other groups when ``q <= 60``;
    otherwise averaged over ``n_draws`` uniformly sampled subsets. With
    ``return_info=True`` a ``(R_i, sampled)`` pair is returned.
    """
    mats = spec.all_matrices
    q, d0 = spec.q, spec.d0
    if not 0 <= i < q:
        raise DomainError(f"group index must lie in [0, {q}), got {i}")
    if q - 1 < d0:
        raise DomainError(f"need at least d0={d0} other groups")
    G = gram(mats).values
    others = np.array([j for j in range(q) if j != i], dtype=np.intp)
    sampled = q > EXACT_Q_LIMIT
    if sampled:
        rng = np.random.default_rng(seed)
        keys = rng.random((n_draws, q - 1))
        subsets = np.sort(others[np.argsort(keys, axis=1)[:, :d0]], axis=1)
        coef = _subset_coefficients(G, i, subsets) / n_draws
    else:
        coef = np.zeros(q)
        combos = itertools.combinations(others, d0)
        while True:
            chunk = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, 50_000)), dtype=np.intp)
            if chunk.size == 0:
                break
            coef += _subset_coefficients(G, i, chunk.reshape(-1, d0))
        coef /= math.comb(q - 1, d0)
    R = np.tensordot(coef, mats, axes=1)
    R = 0.5 * (R + R.T)
    return (R, sampled) if return_info else R


def r_pop(spec: AlternativeSpec, *, seed: int = 0) -> float:
    """Extra variance term ``(1/q) sum c_i mu(R_i, R_i | Sigma_i)``; zero under the null."""
    mats = spec.all_matrices
    total = 0.0
    for i in range(spec.q):
        R = r_i_matrix(spec, i, seed=seed)
        total += spec.c_list[i] * mu_functional(R, R, mats[i], spec.nu4)
    return total / spec.q


def gamma_outlier(spec: AlternativeSpec) -> float:
    """Standardized orthogonal mass ``sum_j tr(Sigma_perp_j^2) / (2 sqrt(q) sqrt(beta_p))``."""
    beta = beta_pop(spec.all_matrices, spec.c_list)
    mass = 0.0
    for outlier in spec.outliers:
        dec = orth_decompose(outlier, spec.majority)
        mass += float(np.sum(dec.perp_part * dec.perp_part))
    return mass / (2.0 * math.sqrt(spec.q) * math.sqrt(beta))


def theoretical_power(spec: AlternativeSpec, alpha: float = 0.05) -> float:
    """Asymptotic lower bound ``Phi(gamma - z_alpha)`` on the rejection probability."""
    alpha = check_probability(alpha)
    gamma = gamma_outlier(spec)
    if gamma == 0.0:
        return alpha
    # gamma >= 0, so anything below alpha is bisection error in z_alpha
    return max(alpha, normal_cdf(gamma - normal_isf(alpha)))


def mixture_outlier_power(w: float, perp_tr2_over_p: float, p: int, q: int, beta: float, alpha: float = 0.05) -> float:
    """Closed-form power for the two-matrix majority family with one mixed outlier.

    ``perp_tr2_over_p`` is ``tr(Lambda_perp^2)/p`` of the third generator's
    component orthogonal to the first two.
    """
    z = normal_isf(check_probability(alpha))
    return normal_cdf(p / math.sqrt(q) * w**2 * perp_tr2_over_p / (2.0 * math.sqrt(beta)) - z)


def band_outlier_power(w: float, A0: float, p: int, q: int, beta: float, alpha: float = 0.05) -> float:
    """Closed-form power for the banded (MA-type) family with a lag-3 outlier."""
    z = normal_isf(check_probability(alpha))
    return normal_cdf(p / math.sqrt(q) * w**2 * A0**2 / math.sqrt(beta) - z)


@dataclass
class PowerCurve:
    """Theoretical power over a grid of outlier weights for one scenario family."""

    w_grid: list[float]
    gamma: list[float]
    theoretical: list[float]
    alpha: float
    seed: int
    label: str = "asymptotic lower bound"

    def to_dict(self) -> dict:
        return {
            "w_grid": list(self.w_grid),
            "gamma": list(self.gamma),
            "theoretical": list(self.theoretical),
            "alpha": self.alpha,
            "seed": self.seed,
            "label": self.label,
        }

    def rows(self) -> list[dict]:
        return [{"w": w, "gamma": g, "theoretical": t} for w, g, t in zip(self.w_grid, self.gamma, self.theoretical)]


def power_curve(factory, w_grid: Sequence[float], alpha: float = 0.05, seed: int = 0) -> PowerCurve:
    """Evaluate :func:`theoretical_power` for ``factory(w, seed).alternative()`` on each ``w``."""
    gammas, powers = [], []
    for w in w_grid:
        spec = factory(float(w), seed).alternative()
        gammas.append(gamma_outlier(spec))
        powers.append(theoretical_power(spec, alpha))
    return PowerCurve([float(w) for w in w_grid], gammas, powers, alpha, seed)
