"""Scenario construction, sampling and the Monte-Carlo size/power harness."""

from __future__ import annotations

import enum
import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import gram, m_pop, psd_sqrt
from .dimtest import dim_test
from .estimators import GroupSample
from .exceptions import DegenerateVarianceError, DomainError
from .power import AlternativeSpec, theoretical_power

__all__ = [
    "Noise",
    "ScenarioKind",
    "Scenario",
    "McResult",
    "haar_orthogonal",
    "band_indicator",
    "scenario_a",
    "scenario_b",
    "draw_group",
    "derive_seed",
    "run_mc",
    "NOISE_NU4",
]

SCENARIO_RTOL = 1e-9
A0_DEFAULT = 2.5
DEFAULT_N_BOUNDS = (200, 600)


class Noise(str, enum.Enum):
    NORMAL = "normal"
    GAMMA = "gamma"


# Fourth moments of the standardized noise: Gamma(4, rate 2) - 2 has excess kurtosis 6/4.
NOISE_NU4 = {Noise.NORMAL: 3.0, Noise.GAMMA: 4.5}


class ScenarioKind(str, enum.Enum):
    EXAMPLE_A = "a"
    EXAMPLE_B = "b"
    CUSTOM = "custom"


def derive_seed(master_seed: int, *key: int) -> int:
    """Counter-based 64-bit seed for ``(master_seed, *key)``; independent of call order."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class Scenario:
    """A fully specified data-generating configuration for ``q`` groups."""

    kind: ScenarioKind
    p: int
    q: int
    w: float
    sigma_list: np.ndarray
    n_list: np.ndarray
    noise: Noise = Noise.NORMAL
    d0_true: int = 1
    seed: int = 0
    validate: bool = field(default=True, repr=False, compare=False)
    _roots: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        sig = np.asarray(self.sigma_list, dtype=np.float64)
        n_list = np.asarray(self.n_list, dtype=np.int64)
        if sig.shape != (self.q, self.p, self.p) or n_list.shape != (self.q,):
            raise DomainError("sigma_list / n_list do not match (q, p)")
        if np.any(n_list < 5):
            raise DomainError("every sample size must be at least 5")
        object.__setattr__(self, "sigma_list", sig)
        object.__setattr__(self, "n_list", n_list)
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        object.__setattr__(self, "noise", Noise(self.noise))
        if self.validate:
            self._check_span()

    def _check_span(self) -> None:
        d = self.d0_true + (1 if self.w > 0 else 0)
        scale = float(np.max(np.diag(gram(self.sigma_list).values)))
        if m_pop(self.sigma_list, d) <= SCENARIO_RTOL * scale**d:
            raise DomainError(f"scenario spans fewer than {d} dimensions")
        if d + 1 <= self.q and abs(m_pop(self.sigma_list, d + 1)) >= SCENARIO_RTOL * scale ** (d + 1):
            raise DomainError(f"scenario spans more than {d} dimensions")

    @property
    def c_list(self) -> np.ndarray:
        return self.p / self.n_list

    @property
    def sqrt_list(self) -> list[np.ndarray]:
        """PSD square roots, computed once per distinct covariance matrix."""
        roots = []
        for sigma in self.sigma_list:
            key = hash(sigma.tobytes())
            if key not in self._roots:
                self._roots[key] = psd_sqrt(sigma)
            roots.append(self._roots[key])
        return roots

    def draw(self, seed: int) -> list[GroupSample]:
        """Sample all groups; group ``j`` uses the stream ``derive_seed(seed, j)``."""
        return [
            draw_group(root, int(n), self.noise, derive_seed(seed, j), group_id=j)
            for j, (root, n) in enumerate(zip(self.sqrt_list, self.n_list))
        ]

    def alternative(self) -> AlternativeSpec:
        """The last group as single outlier against the first ``q - 1``."""
        return AlternativeSpec(
            self.sigma_list[:-1], self.sigma_list[-1:], self.d0_true, self.c_list, NOISE_NU4[self.noise]
        )


@dataclass
class McResult:
    w_grid: list[float]
    rejection_rate: list[float]
    reps: int
    alpha: float
    theoretical: list[float]
    seed: int
    excluded: list[int]

    def to_dict(self) -> dict:
        return {
            "w_grid": list(self.w_grid),
            "rejection_rate": list(self.rejection_rate),
            "theoretical": list(self.theoretical),
            "reps": self.reps,
            "alpha": self.alpha,
            "seed": self.seed,
            "excluded": list(self.excluded),
        }

    def rows(self) -> list[dict]:
        return [
            {"w": w, "empirical_rate": r, "theoretical": t, "reps": self.reps, "excluded": e}
            for w, r, t, e in zip(self.w_grid, self.rejection_rate, self.theoretical, self.excluded)
        ]


def haar_orthogonal(p: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix: QR of a Gaussian matrix with sign-fixed R."""
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def band_indicator(p: int, lag: int) -> np.ndarray:
    """Indicator matrix of ``|r - s| == lag``."""
    idx = np.arange(p)
    return (np.abs(idx[:, None] - idx[None, :]) == lag).astype(np.float64)


def _sample_sizes(rng: np.random.Generator, q: int, n_bounds) -> np.ndarray:
    lo, hi = int(n_bounds[0]), int(n_bounds[1])
    if not 5 <= lo <= hi:
        raise DomainError(f"invalid n_bounds {n_bounds}")
    return rng.integers(lo, hi + 1, size=q)


def scenario_a(
    p: int,
    q: int,
    w: float,
    seed: int,
    n_bounds=DEFAULT_N_BOUNDS,
    noise=Noise.NORMAL,
) -> Scenario:
    """Majority drawn from two random PSD generators; the last group mixes in a third.

    ``Sigma_q = (1 - w) Lambda_{I_q} + w Lambda_3`` so ``w = 0`` is the null
    with span dimension 2.
    """
    if q < 4 or p < 2 or not 0.0 <= w <= 1.0:
        raise DomainError("scenario_a needs q >= 4, p >= 2, 0 <= w <= 1")
    rng = np.random.default_rng(seed)
    lambdas = []
    for _ in range(3):
        U = haar_orthogonal(p, rng)
        D = rng.uniform(0.0, 1.0, size=p)
        L = (U.T * D) @ U
        lambdas.append(0.5 * (L + L.T))
    while True:
        labels = rng.integers(0, 2, size=q)
        if set(labels[:-1].tolist()) == {0, 1}:
            break
    sigma = np.empty((q, p, p))
    for j in range(q - 1):
        sigma[j] = lambdas[labels[j]]
    sigma[-1] = (1.0 - w) * lambdas[labels[-1]] + w * lambdas[2]
    return Scenario(ScenarioKind.EXAMPLE_A, p, q, w, sigma, _sample_sizes(rng, q, n_bounds), noise, 2, int(seed))


def _band_sigma(p: int, diag: float, lag1: float, lag2: float, lag3: float = 0.0) -> np.ndarray:
    idx = np.arange(p)
    dist = np.abs(idx[:, None] - idx[None, :])
    out = np.zeros((p, p))
    for lag, value in enumerate((diag, lag1, lag2, lag3)):
        out[dist == lag] = value
    return out


def scenario_b(
    p: int,
    q: int,
    w: float,
    seed: int,
    n_bounds=DEFAULT_N_BOUNDS,
    noise=Noise.NORMAL,
    A0: float = A0_DEFAULT,
) -> Scenario:
    """Banded moving-average covariances; the last group gains a lag-3 term of size ``w * A0``.

    Majority groups lie in span{I, Lambda_1, Lambda_2}, so the null dimension is 3.
    """
    if p < 7 or q < 4 or w < 0.0:
        raise DomainError("scenario_b needs p >= 7, q >= 4, w >= 0")
    rng = np.random.default_rng(seed)
    a = rng.uniform(-2.0, 2.0, size=q)
    b = rng.uniform(-2.0, 2.0, size=q)
    sigma = np.empty((q, p, p))
    for j in range(q - 1):
        sigma[j] = _band_sigma(p, 1 + a[j] ** 2 + b[j] ** 2, a[j] * (1 + b[j]), b[j])
    aq, bq, t = a[-1], b[-1], w * A0
    sigma[-1] = _band_sigma(p, 1 + aq**2 + bq**2 + t**2, aq + aq * bq + bq * t, bq + aq * t, t)
    return Scenario(ScenarioKind.EXAMPLE_B, p, q, w, sigma, _sample_sizes(rng, q, n_bounds), noise, 3, int(seed))


def draw_group(sqrt_sigma, n: int, noise=Noise.NORMAL, stream_seed: int = 0, group_id: int = 0) -> GroupSample:
    """Draw ``n`` observations ``Sigma^½ z`` with i.i.d. standardized noise ``z``.

    Normal noise uses numpy's ziggurat sampler; gamma noise is
    Gamma(shape 4, rate 2) - 2, drawn with Marsaglia-Tsang.
    """
    root = np.asarray(sqrt_sigma, dtype=np.float64)
    rng = np.random.default_rng(stream_seed)
    shape = (root.shape[0], int(n))
    if Noise(noise) is Noise.NORMAL:
        Z = rng.standard_normal(shape)
    else:
        Z = rng.standard_gamma(4.0, size=shape) / 2.0 - 2.0
    return GroupSample(root @ Z, group_id)


def _theory(scenario: Scenario, alpha: float) -> float:
    try:
        return theoretical_power(scenario.alternative(), alpha)
    except DomainError:  # custom scenario without a valid majority/outlier split
        return math.nan


def _one_rep(factory, w: float, w_index: int, rep: int, master_seed: int, d0: int, alpha: float):
    scenario = factory(w, derive_seed(master_seed, w_index, rep, 0))
    groups = scenario.draw(derive_seed(master_seed, w_index, rep, 1))
    try:
        reject = dim_test(groups, d0, alpha).reject
    except DegenerateVarianceError:
        reject = None
    return reject, _theory(scenario, alpha)


def _run_task(args):
    return args[:2], _one_rep(*args[2:])


def run_mc(
    scenario_family: Callable[[float, int], Scenario],
    w_grid: Sequence[float],
    reps: int,
    alpha: float = 0.05,
    d0: int = 1,
    master_seed: int = 0,
    n_jobs: int = 1,
) -> McResult:
    """Empirical rejection rates of :func:`dim_test` over a grid of deviations ``w``.

    Every (grid point, replication) pair gets a fresh scenario and sample from
    seeds derived from ``master_seed``, so results do not depend on ``n_jobs``.
    ``theoretical`` averages the asymptotic power bound over the same scenarios.
    Replications whose variance estimate degenerates are excluded and counted.
    """
    if reps < 1:
        raise DomainError("reps must be at least 1")
    grid = [float(w) for w in w_grid]
    if any(not 0.0 <= w <= 1.0 for w in grid):
        raise DomainError("grid values must lie in [0, 1]")
    tasks = [
        (wi, rep, scenario_family, w, wi, rep, master_seed, d0, alpha)
        for wi, w in enumerate(grid)
        for rep in range(reps)
    ]
    if n_jobs == 1:
        results = dict(map(_run_task, tasks))
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = dict(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * n_jobs))))
    rates, theory, excluded = [], [], []
    for wi in range(len(grid)):
        outcomes = [results[(wi, rep)] for rep in range(reps)]
        decided = [r for r, _ in outcomes if r is not None]
        excluded.append(reps - len(decided))
        rates.append(float(np.mean(decided)) if decided else math.nan)
        theory.append(float(np.mean([t for _, t in outcomes])))
    return McResult(grid, rates, reps, alpha, theory, master_seed, excluded)


def family(kind, p: int, q: int, n_bounds=DEFAULT_N_BOUNDS, noise=Noise.NORMAL) -> Callable[[float, int], Scenario]:
    """Picklable ``(w, seed) -> Scenario`` factory for :func:`run_mc`."""
    builder = {ScenarioKind.EXAMPLE_A: scenario_a, ScenarioKind.EXAMPLE_B: scenario_b}[ScenarioKind(kind)]
    return functools.partial(_build, builder, p, q, tuple(n_bounds), Noise(noise))


def _build(builder, p, q, n_bounds, noise, w, seed):
    return builder(p, q, w, seed, n_bounds, noise)
