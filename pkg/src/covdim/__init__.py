"""Many-sample tests for the dimension of the span of group covariance matrices."""

__version__ = "0.1.0"

from .core import GramKind, GramMatrix, Strategy, gram, inner, m_pop, orth_decompose, principal_minor_sum, psd_sqrt
from .dimtest import SequentialReport, TestReport, dim_test, sequential_dim
from .estimators import GroupSample, eta4_hat, gram_hat, sample_cov
from .exceptions import *  # noqa: F401,F403
from .model import DimensionalityTest, KroneckerSumApproximation, SequentialDimension

__all__ = [
    "__version__",
    "GramKind",
    "GramMatrix",
    "Strategy",
    "GroupSample",
    "TestReport",
    "SequentialReport",
    "inner",
    "gram",
    "principal_minor_sum",
    "m_pop",
    "psd_sqrt",
    "orth_decompose",
    "sample_cov",
    "eta4_hat",
    "gram_hat",
    "dim_test",
    "sequential_dim",
    "DimensionalityTest",
    "SequentialDimension",
    "KroneckerSumApproximation",
]
