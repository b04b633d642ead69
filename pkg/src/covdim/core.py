"""Geometry of the space of symmetric p x p matrices.

The inner product is ``<A, B> = tr(A B^T) / p``. Gram matrices built from it
encode the dimension of the span of a family of covariance matrices: the
averaged k x k principal minors are positive up to the span dimension and
vanish beyond it.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, DomainError, NotPSDError, NumericalError
from .validation import check_matrix_list, check_same_dim, check_square, check_symmetric

__all__ = [
    "GramKind",
    "GramMatrix",
    "OrthoDecomposition",
    "Strategy",
    "inner",
    "gram",
    "principal_minor_sum",
    "elementary_symmetric",
    "m_pop",
    "psd_sqrt",
    "matrix_row_det",
    "orth_decompose",
]

PSD_RTOL = 1e-10
PINV_RTOL = 1e-10
# Enumeration is used while C(q, k) * k**3 stays below this budget.
ENUMERATION_BUDGET = 10**7
_CHUNK = 200_000


class GramKind(str, enum.Enum):
    POPULATION = "population"
    ESTIMATED = "estimated"


class Strategy(str, enum.Enum):
    ENUMERATE = "enumerate"
    SPECTRAL = "spectral"
    AUTO = "auto"


@dataclass(frozen=True)
class GramMatrix:
    """A q x q Gram matrix tagged with its provenance.

    Population Gram matrices are positive semi-definite; estimated ones have
    bias-corrected diagonals and may be indefinite.
    """

    values: np.ndarray
    kind: GramKind = GramKind.POPULATION
    dim_p: int | None = None

    def __post_init__(self):
        vals = check_symmetric(self.values, "Gram matrix")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "kind", GramKind(self.kind))
        if self.kind is GramKind.POPULATION and vals.shape[0] > 1:
            eig = np.linalg.eigvalsh(vals)
            top = max(float(eig[-1]), 0.0)
            if eig[0] < -PSD_RTOL * top:
                raise NotPSDError(f"population Gram matrix has eigenvalue {eig[0]:.3e}")

    @property
    def q(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True)
class OrthoDecomposition:
    """Split of a matrix into its projection on a span and the orthogonal rest."""

    parallel_part: np.ndarray
    perp_part: np.ndarray
    perp_norm_sq: float
    coefficients: np.ndarray


def inner(A, B) -> float:
    """Normalized Frobenius inner product ``tr(A B^T) / p``."""
    A = check_square(A, "A")
    B = check_square(B, "B")
    check_same_dim(A, B)
    return float(np.vdot(A, B)) / A.shape[0]


def gram(mats) -> GramMatrix:
    """Population Gram matrix of a list of symmetric matrices."""
    stack = check_matrix_list(mats)
    q, p, _ = stack.shape
    flat = stack.reshape(q, p * p)
    G = flat @ flat.T / p
    return GramMatrix(0.5 * (G + G.T), GramKind.POPULATION, p)


def _as_gram_values(G) -> np.ndarray:
    if isinstance(G, GramMatrix):
        return G.values
    return check_symmetric(G, "G")


def _closed_form_dets(G: np.ndarray, idx: np.ndarray) -> np.ndarray:
    k = idx.shape[1]
    if k == 1:
        return G[idx[:, 0], idx[:, 0]]
    a, b = idx[:, 0], idx[:, 1]
    if k == 2:
        return G[a, a] * G[b, b] - G[a, b] * G[a, b]
    c = idx[:, 2]
    gaa, gbb, gcc = G[a, a], G[b, b], G[c, c]
    gab, gac, gbc = G[a, b], G[a, c], G[b, c]
    return (
        gaa * (gbb * gcc - gbc * gbc)
        - gab * (gab * gcc - gbc * gac)
        + gac * (gab * gbc - gbb * gac)
    )


def _enumerate_minor_sum(G: np.ndarray, k: int) -> float:
    q = G.shape[0]
    combos = itertools.combinations(range(q), k)
    partials = []
    while True:
        chunk = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(combos, _CHUNK)), dtype=np.intp
        ).reshape(-1, k)
        if chunk.shape[0] == 0:
            break
        if k <= 3:
            dets = _closed_form_dets(G, chunk)
        else:
            dets = np.linalg.det(G[chunk[:, :, None], chunk[:, None, :]])
        partials.append(dets)
    return math.fsum(np.concatenate(partials)) if partials else 0.0


def elementary_symmetric(values, k: int) -> float:
    """k-th elementary symmetric polynomial of ``values``.

    Uses the coefficient recurrence of ``prod (x + v_i)`` with one Kahan
    compensation term per coefficient.
    """
    vals = [float(v) for v in np.sort(np.asarray(values, dtype=np.float64).ravel())]
    if k < 0:
        raise DomainError("k must be nonnegative")
    if k == 0:
        return 1.0
    if k > len(vals):
        return 0.0
    e = [1.0] + [0.0] * k
    comp = [0.0] * (k + 1)
    for i, lam in enumerate(vals, start=1):
        for j in range(min(i, k), 0, -1):
            y = lam * e[j - 1] - comp[j]
            t = e[j] + y
            comp[j] = (t - e[j]) - y
            e[j] = t
    return e[k]


def _spectral_minor_sum(G: np.ndarray, k: int) -> float:
    try:
        eig = np.linalg.eigvalsh(G)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"eigenvalue solver failed: {exc}") from exc
    return elementary_symmetric(eig, k)


def resolve_strategy(q: int, k: int, strategy=Strategy.AUTO) -> Strategy:
    strategy = Strategy(strategy)
    if strategy is Strategy.AUTO:
        return Strategy.ENUMERATE if math.comb(q, k) * k**3 <= ENUMERATION_BUDGET else Strategy.SPECTRAL
    return strategy


def principal_minor_sum(G, k: int, strategy=Strategy.AUTO) -> float:
    """Sum of the determinants of all k x k principal submatrices of ``G``.

    ``strategy`` selects explicit enumeration, the elementary symmetric
    polynomial of the eigenvalues, or an automatic choice by problem size.
    """
    vals = _as_gram_values(G)
    q = vals.shape[0]
    if not 1 <= k <= q:
        raise DomainError(f"k must satisfy 1 <= k <= {q}, got {k}")
    if resolve_strategy(q, k, strategy) is Strategy.ENUMERATE:
        return _enumerate_minor_sum(vals, k)
    return _spectral_minor_sum(vals, k)


def m_pop(mats, k: int, strategy=Strategy.AUTO) -> float:
    """Average k x k principal minor of the population Gram matrix of ``mats``."""
    G = gram(mats)
    if not 1 <= k <= G.q:
        raise DomainError(f"k must satisfy 1 <= k <= {G.q}, got {k}")
    return principal_minor_sum(G, k, strategy) / math.comb(G.q, k)


def psd_sqrt(S) -> np.ndarray:
    """Symmetric positive semi-definite square root via the spectral decomposition."""
    S = check_symmetric(S, "S")
    eig, vec = np.linalg.eigh(S)
    top = max(float(eig[-1]), 0.0)
    if eig[0] < -PSD_RTOL * top:
        raise NotPSDError(f"matrix has eigenvalue {eig[0]:.3e} < 0")
    root = (vec * np.sqrt(np.clip(eig, 0.0, None))) @ vec.T
    return 0.5 * (root + root.T)


def matrix_row_det(top_row, scalar_rows) -> np.ndarray:
    """Laplace expansion along a first row of matrices.

    Returns ``sum_k (-1)**(1+k) * A_1k * top_row[k]`` (1-based ``k``), where
    ``A_1k`` is the determinant of ``scalar_rows`` with column ``k`` removed.
    """
    top = [np.asarray(t, dtype=np.float64) for t in top_row]
    m = len(top)
    if m == 0:
        raise DimensionError("top row is empty")
    rows = np.asarray(scalar_rows, dtype=np.float64)
    if m == 1 and rows.size == 0:
        rows = np.zeros((0, 1))
    if rows.shape != (m - 1, m):
        raise DimensionError(f"scalar rows must have shape {(m - 1, m)}, got {rows.shape}")
    shape = top[0].shape
    for t in top:
        if t.shape != shape:
            raise DimensionError("top-row matrices differ in shape")
    return np.tensordot(cofactor_weights(rows), np.stack(top), axes=1)


def cofactor_weights(rows: np.ndarray) -> np.ndarray:
    """Signed first-row cofactors of an ``(m-1, m)`` scalar block."""
    m = rows.shape[1]
    if m == 1:
        return np.ones(1)
    minors = np.stack([np.delete(rows, col, axis=1) for col in range(m)])
    signs = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
    return signs * np.linalg.det(minors)


def orth_decompose(target, basis) -> OrthoDecomposition:
    """Project ``target`` on span(basis) under the normalized inner product.

    The normal equations are solved with an eigenvalue-thresholded
    pseudo-inverse so dependent bases are handled.
    """
    target = check_square(target, "target")
    stack = check_matrix_list(basis, "basis")
    if stack.shape[1] != target.shape[0]:
        raise DimensionError("target and basis dimensions differ")
    p = target.shape[0]
    G = gram(stack).values
    flat = stack.reshape(stack.shape[0], -1)
    rhs = flat @ target.ravel() / p
    eig, vec = np.linalg.eigh(G)
    keep = eig > PINV_RTOL * max(float(eig[-1]), 0.0)
    inv = np.zeros_like(eig)
    inv[keep] = 1.0 / eig[keep]
    coef = vec @ (inv * (vec.T @ rhs))
    parallel = np.tensordot(coef, stack, axes=1)
    perp = target - parallel
    return OrthoDecomposition(parallel, perp, float(np.vdot(perp, perp)) / p, coef)
