import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import band, brute_minor_sum, random_psd, random_sym, span_family
from covdim.core import (
    GramKind,
    GramMatrix,
    Strategy,
    cofactor_weights,
    elementary_symmetric,
    gram,
    inner,
    m_pop,
    matrix_row_det,
    orth_decompose,
    principal_minor_sum,
    psd_sqrt,
    resolve_strategy,
)
from covdim.exceptions import DimensionError, DomainError, EmptyInputError, NotPSDError

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
# zero or comfortably above underflow once squared
resolvable = st.one_of(st.just(0.0), st.floats(1e-6, 10), st.floats(-10, -1e-6))


def sym_arrays(p, elements=finite):
    return arrays(np.float64, (p, p), elements=elements).map(lambda A: (A + A.T) / 2)


class TestInner:
    def test_identity(self):
        assert inner(np.eye(7), np.eye(7)) == pytest.approx(1.0)

    @pytest.mark.parametrize("p", [5, 20, 101])
    def test_first_band(self, p):
        L1 = band(p, 1)
        assert inner(L1, L1) == pytest.approx(2 - 2 / p, rel=1e-14)

    def test_double_loop(self, rng):
        A, B = random_sym(5, rng), random_sym(5, rng)
        expected = sum(A[r, s] * B[r, s] for r in range(5) for s in range(5)) / 5
        assert inner(A, B) == pytest.approx(expected, rel=1e-13)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            inner(np.eye(3), np.eye(4))

    @given(sym_arrays(4), sym_arrays(4), sym_arrays(4), finite)
    def test_bilinear_symmetric(self, A, B, C, a):
        assert inner(A, B) == pytest.approx(inner(B, A), rel=1e-12, abs=1e-12)
        lhs = inner(a * A + B, C)
        assert lhs == pytest.approx(a * inner(A, C) + inner(B, C), rel=1e-9, abs=1e-9)

    @given(sym_arrays(3, resolvable))
    def test_positive_definite(self, A):
        v = inner(A, A)
        assert v >= 0
        assert (v == 0) == (not np.any(A))


class TestGram:
    def test_single_identity(self):
        np.testing.assert_allclose(gram([np.eye(4)]).values, [[1.0]])

    @pytest.mark.parametrize("p", [7, 20, 100])
    def test_band_indicators_exact(self, p):
        G = gram([band(p, k) for k in range(4)]).values
        expected = np.diag([1, 2 - 2 / p, 2 - 4 / p, 2 - 6 / p])
        np.testing.assert_allclose(G, expected, rtol=1e-14, atol=1e-15)

    def test_proportional(self, rng):
        S = random_psd(6, rng)
        g = inner(S, S)
        np.testing.assert_allclose(gram([S, 2 * S]).values, [[g, 2 * g], [2 * g, 4 * g]], rtol=1e-13)

    def test_errors(self):
        with pytest.raises(EmptyInputError):
            gram([])
        with pytest.raises(DimensionError):
            gram([np.eye(3), np.eye(4)])

    def test_gram_matrix_validation(self):
        with pytest.raises(NotPSDError):
            GramMatrix(np.array([[1.0, 2.0], [2.0, 1.0]]), GramKind.POPULATION, 3)
        G = GramMatrix(np.array([[1.0, 2.0], [2.0, 1.0]]), GramKind.ESTIMATED, 3)
        assert G.q == 2

    @given(st.integers(1, 6), st.integers(2, 5), st.integers(0, 2**32 - 1))
    def test_population_gram_psd(self, q, p, seed):
        r = np.random.default_rng(seed)
        G = gram([random_sym(p, r) for _ in range(q)]).values
        eig = np.linalg.eigvalsh(G)
        assert eig[0] >= -1e-10 * max(eig[-1], 0.0)


class TestPrincipalMinorSum:
    def test_diagonal(self):
        G = np.diag([2.0, 3.0, 5.0])
        assert principal_minor_sum(G, 2) == pytest.approx(2 * 3 + 2 * 5 + 3 * 5)

    @pytest.mark.parametrize("strategy", list(Strategy))
    def test_rank_one_vanishes(self, strategy, rng):
        S = random_psd(5, rng)
        G = gram([S] * 6)
        assert abs(principal_minor_sum(G, 2, strategy)) < 1e-10 * G.values[0, 0] ** 2

    def test_enumerate_vs_spectral(self, rng):
        G = random_sym(8, rng)
        a = principal_minor_sum(G, 3, Strategy.ENUMERATE)
        b = principal_minor_sum(G, 3, Strategy.SPECTRAL)
        assert a == pytest.approx(brute_minor_sum(G, 3), rel=1e-11)
        assert b == pytest.approx(a, rel=1e-9)

    @pytest.mark.parametrize("k", [0, 5])
    def test_out_of_range(self, k):
        with pytest.raises(DomainError):
            principal_minor_sum(np.eye(4), k)

    @given(st.integers(1, 9), st.integers(0, 2**32 - 1))
    def test_characteristic_polynomial(self, q, seed):
        r = np.random.default_rng(seed)
        G = random_sym(q, r)
        coef = [1.0] + [principal_minor_sum(G, k, Strategy.ENUMERATE) for k in range(1, q + 1)]
        for x in r.uniform(-3, 3, size=5):
            direct = np.linalg.det(G - x * np.eye(q))
            series = sum(coef[k] * (-x) ** (q - k) for k in range(q + 1))
            scale = sum(abs(coef[k] * x ** (q - k)) for k in range(q + 1))
            assert abs(direct - series) <= 1e-9 * scale

    def test_large_enumeration_uses_batched_dets(self, rng):
        G = random_sym(9, rng)
        assert principal_minor_sum(G, 5, Strategy.ENUMERATE) == pytest.approx(brute_minor_sum(G, 5), rel=1e-10)

    def test_auto_strategy(self):
        assert resolve_strategy(10, 3) is Strategy.ENUMERATE
        assert resolve_strategy(100, 5) is Strategy.SPECTRAL

    def test_elementary_symmetric(self):
        v = [1.0, 2.0, 3.0, 4.0]
        assert elementary_symmetric(v, 0) == 1.0
        assert elementary_symmetric(v, 2) == pytest.approx(sum(a * b for a, b in itertools.combinations(v, 2)))
        assert elementary_symmetric(v, 4) == pytest.approx(24.0)
        assert elementary_symmetric(v, 5) == 0.0


class TestMPop:
    def test_copies(self, rng):
        S = random_psd(5, rng)
        assert abs(m_pop([S] * 4, 2)) < 1e-12 * inner(S, S) ** 2

    @pytest.mark.parametrize("p", [7, 30])
    def test_orthogonal_pair(self, p):
        assert m_pop([np.eye(p), band(p, 1)], 2) == pytest.approx(2 - 2 / p, rel=1e-13)

    def test_span_three(self, rng):
        mats, _ = span_family(6, 3, 6, rng)
        scale = np.max(np.diag(gram(mats).values))
        assert m_pop(mats, 3) > 0
        assert abs(m_pop(mats, 4)) < 1e-10 * scale**4


class TestPsdSqrt:
    def test_diagonal(self):
        np.testing.assert_allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)

    def test_identity(self):
        np.testing.assert_allclose(psd_sqrt(np.eye(5)), np.eye(5), atol=1e-14)

    def test_reconstruction(self, rng):
        A = random_psd(10, rng)
        R = psd_sqrt(A)
        np.testing.assert_allclose(R @ R, A, atol=1e-12)
        np.testing.assert_allclose(R, R.T)

    def test_rank_deficient(self, rng):
        A = random_psd(6, rng, rank=2)
        R = psd_sqrt(A)
        np.testing.assert_allclose(R @ R, A, atol=1e-12)

    def test_not_psd(self):
        with pytest.raises(NotPSDError):
            psd_sqrt(np.diag([1.0, -0.5]))


class TestMatrixRowDet:
    def test_two_by_two(self, rng):
        A, B = random_sym(4, rng), random_sym(4, rng)
        a, b = 0.7, -1.3
        np.testing.assert_allclose(matrix_row_det([A, B], [[a, b]]), b * A - a * B, atol=1e-14)

    def test_proportional_columns(self, rng):
        S = random_psd(5, rng)
        t = np.trace(S) / 5
        np.testing.assert_allclose(matrix_row_det([S, S], [[t, t]]), 0.0, atol=1e-14)

    def test_three_by_three_cofactors(self, rng):
        A, B, C = (random_sym(3, rng) for _ in range(3))
        (a1, a2, a3), (b1, b2, b3) = rng.standard_normal((2, 3))
        expected = A * (a2 * b3 - a3 * b2) - B * (a1 * b3 - a3 * b1) + C * (a1 * b2 - a2 * b1)
        np.testing.assert_allclose(matrix_row_det([A, B, C], [[a1, a2, a3], [b1, b2, b3]]), expected, atol=1e-13)

    @given(st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_scalar_reduction(self, m, seed):
        rows = np.random.default_rng(seed).standard_normal((m - 1, m))
        value = matrix_row_det([np.ones((1, 1))] * m, rows)[0, 0]
        full = np.vstack([np.ones(m), rows])
        assert value == pytest.approx(np.linalg.det(full), rel=1e-9, abs=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            matrix_row_det([np.eye(2), np.eye(2)], [[1.0, 2.0, 3.0]])
        with pytest.raises(DimensionError):
            matrix_row_det([np.eye(2), np.eye(3)], [[1.0, 2.0]])

    def test_cofactor_weights_single(self):
        np.testing.assert_allclose(cofactor_weights(np.zeros((0, 1))), [1.0])


class TestOrthDecompose:
    def test_band_against_identity(self):
        p = 9
        dec = orth_decompose(np.eye(p) + band(p, 1), [np.eye(p)])
        np.testing.assert_allclose(dec.parallel_part, np.eye(p), atol=1e-14)
        np.testing.assert_allclose(dec.perp_part, band(p, 1), atol=1e-14)
        assert dec.perp_norm_sq == pytest.approx(2 - 2 / p)

    def test_target_in_span(self, rng):
        mats, gens = span_family(5, 2, 3, rng)
        dec = orth_decompose(0.3 * gens[0] - 2 * gens[1], mats)
        assert dec.perp_norm_sq < 1e-20
        np.testing.assert_allclose(dec.perp_part, 0.0, atol=1e-10)

    def test_dependent_basis(self, rng):
        S = random_psd(5, rng)
        T = random_psd(5, rng)
        dec = orth_decompose(T, [S, 2 * S, S])
        assert abs(inner(dec.perp_part, S)) < 1e-12

    @given(st.integers(1, 3), st.integers(0, 2**32 - 1))
    def test_orthogonality_and_idempotence(self, d, seed):
        r = np.random.default_rng(seed)
        basis = [random_sym(5, r) for _ in range(d)]
        dec = orth_decompose(random_sym(5, r), basis)
        for b in basis:
            assert abs(inner(dec.perp_part, b)) < 1e-10
        again = orth_decompose(dec.parallel_part, basis)
        assert again.perp_norm_sq < 1e-18

    def test_decomposition_identity_by_enumeration(self, rng):
        basis = [random_psd(6, rng) for _ in range(3)]
        target = random_psd(6, rng)
        dec = orth_decompose(target, basis)
        both = m_pop(basis + [target], 4, Strategy.ENUMERATE)
        assert both == pytest.approx(m_pop(basis, 3, Strategy.ENUMERATE) * dec.perp_norm_sq, rel=1e-8)
