"""Seeded Monte Carlo oracle for the Bayes risk of every estimator.

Replicates are grouped in fixed-size blocks. Each block draws from Philox
streams keyed by ``(seed, role)`` whose 256-bit counter starts at the block
index in its top word, so a block's numbers depend only on
``(seed, role, block)``. Blocks may run on any number of threads; per-block
moment summaries are merged in a fixed pairwise tree, so results are
bit-identical for any thread count.

All estimators in one run see the same draws (common random numbers).
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DivisionByZero, InvalidInput
from .estimators import EstimatorKind, Kind, ProblemSpec, estimate
from .risk_analysis import exact_risk

__all__ = [
    "Role",
    "SMALL_DOF_MAX",
    "McConfig",
    "McEstimate",
    "McResult",
    "SimulationDraw",
    "stream",
    "block_size_for",
    "draw",
    "sample_chi2",
    "empirical_risk",
    "run",
    "stein_identity_check",
]

SMALL_DOF_MAX = 64
_BLOCK_ELEMENTS = 1 << 21
_MAX_BLOCK = 1 << 15
_MAX_RESAMPLE_ROUNDS = 100


class Role(enum.IntEnum):
    THETA = 0
    NOISE = 1
    SCALE = 2
    RESAMPLE = 3
    STEIN = 4


def stream(seed: int, role: Role, block: int, subcounter: int = 0) -> np.random.Generator:
    """Counter-based generator for ``(seed, role, block)``."""
    if not 0 <= seed < 2**64:
        raise InvalidInput(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    counter = np.array([0, 0, subcounter, block], dtype=np.uint64)
    key = np.array([seed, int(role)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def block_size_for(p: int, n: int) -> int:
    """Replicates per block; depends only on the problem size."""
    per_replicate = 2 * p + min(n, SMALL_DOF_MAX)
    return max(1, min(_MAX_BLOCK, _BLOCK_ELEMENTS // per_replicate))


@dataclass(frozen=True)
class SimulationDraw:
    theta: np.ndarray
    x: np.ndarray
    s2: np.ndarray | float


def sample_chi2(rng: np.random.Generator, n: int, size) -> np.ndarray:
    """``chi2_n`` variates: sums of squared normals for small ``n``, gamma above."""
    if n <= SMALL_DOF_MAX:
        z = rng.standard_normal((*np.atleast_1d(size), n))
        return np.einsum("...i,...i->...", z, z)
    return 2.0 * rng.standard_gamma(0.5 * n, size)


def draw(spec: ProblemSpec, rngs, size: int | None = None) -> SimulationDraw:
    """One draw (or ``size`` draws) from the hierarchical model.

    ``rngs`` is a triple of generators used for ``theta``, the observation
    noise and ``S2`` respectively.
    """
    tau2 = spec.require_tau2()
    theta_rng, noise_rng, scale_rng = rngs
    shape = (spec.p,) if size is None else (size, spec.p)
    theta = spec.nu + math.sqrt(tau2) * theta_rng.standard_normal(shape)
    x = theta + math.sqrt(spec.sigma2) * noise_rng.standard_normal(shape)
    s2 = spec.sigma2 * sample_chi2(scale_rng, spec.n, 1 if size is None else size)
    if size is None:
        s2 = float(s2[0])
    return SimulationDraw(theta, x, s2)


@dataclass(frozen=True)
class McConfig:
    spec: ProblemSpec
    estimators: tuple[EstimatorKind, ...]
    replicates: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.replicates < 1:
            raise InvalidInput(f"replicates must be >= 1, got {self.replicates!r}")
        if not 0 <= self.seed < 2**64:
            raise InvalidInput(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not self.estimators:
            raise InvalidInput("at least one estimator is required")
        object.__setattr__(self, "estimators", tuple(self.estimators))
        self.spec.require_tau2()
        for kind in self.estimators:
            if kind.tag is Kind.EMPIRICAL_MODIFIED_BAYES and self.spec.p < 3:
                raise InvalidInput("empirical-modified-bayes needs p >= 3")


@dataclass(frozen=True)
class McEstimate:
    estimator: EstimatorKind
    mse_mean: float
    std_error: float
    replicates: int
    seed: int
    exact_risk: float | None = None

    @property
    def z_score(self) -> float | None:
        if self.exact_risk is None:
            return None
        if self.std_error == 0:
            return 0.0 if self.mse_mean == self.exact_risk else math.copysign(
                math.inf, self.mse_mean - self.exact_risk)
        return (self.mse_mean - self.exact_risk) / self.std_error


@dataclass(frozen=True)
class McResult:
    """Losses' sample mean vector and covariance across estimators."""

    config: McConfig
    mean: np.ndarray
    cov: np.ndarray
    resamples: int

    @property
    def estimates(self) -> list[McEstimate]:
        n = self.config.replicates
        out = []
        for i, kind in enumerate(self.config.estimators):
            report = exact_risk(kind, self.config.spec)
            out.append(
                McEstimate(
                    kind,
                    float(self.mean[i]),
                    math.sqrt(max(self.cov[i, i], 0.0) / n),
                    n,
                    self.config.seed,
                    None if report is None else report.risk,
                )
            )
        return out

    def difference(self, a: EstimatorKind, b: EstimatorKind) -> tuple[float, float]:
        """Mean and standard error of ``loss(a) - loss(b)`` on the shared draws."""
        i = self.config.estimators.index(a)
        j = self.config.estimators.index(b)
        var = self.cov[i, i] + self.cov[j, j] - 2.0 * self.cov[i, j]
        return float(self.mean[i] - self.mean[j]), math.sqrt(max(var, 0.0) / self.config.replicates)


def _needs_norm(kinds: Sequence[EstimatorKind]) -> tuple[bool, bool]:
    centred = any(k.tag in (Kind.EMPIRICAL_MODIFIED_BAYES, Kind.GENERAL_C) for k in kinds)
    origin = any(k.tag in (Kind.JAMES_STEIN, Kind.JAMES_STEIN_PLUS) for k in kinds)
    return centred, origin


def _degenerate_rows(spec: ProblemSpec, x: np.ndarray, centred: bool, origin: bool) -> np.ndarray:
    bad = np.zeros(x.shape[0], dtype=bool)
    if centred:
        d = x - spec.nu
        bad |= np.einsum("ij,ij->i", d, d) == 0
    if origin:
        bad |= np.einsum("ij,ij->i", x, x) == 0
    return bad


def _resample_degenerate(spec, sim: SimulationDraw, seed: int, block: int, centred, origin):
    """Redraw replicates whose shrinkage factor is undefined; return the count."""
    bad = _degenerate_rows(spec, sim.x, centred, origin)
    count = 0
    rounds = 0
    while bad.any():
        rounds += 1
        if rounds > _MAX_RESAMPLE_ROUNDS:
            raise DivisionByZero("could not draw a replicate with non-zero norm")
        idx = np.flatnonzero(bad)
        rng = stream(seed, Role.RESAMPLE, block, subcounter=rounds)
        fresh = draw(spec, (rng, rng, rng), size=idx.size)
        sim.theta[idx], sim.x[idx], sim.s2[idx] = fresh.theta, fresh.x, fresh.s2
        count += idx.size
        bad = _degenerate_rows(spec, sim.x, centred, origin)
    return count


def _block_summary(config: McConfig, block: int, size: int):
    spec, seed = config.spec, config.seed
    rngs = tuple(stream(seed, role, block) for role in (Role.THETA, Role.NOISE, Role.SCALE))
    sim = draw(spec, rngs, size=size)
    resamples = _resample_degenerate(spec, sim, seed, block, *_needs_norm(config.estimators))
    losses = np.empty((size, len(config.estimators)))
    for j, kind in enumerate(config.estimators):
        err = estimate(kind, spec, sim.x, sim.s2) - sim.theta
        losses[:, j] = np.einsum("ij,ij->i", err, err)
    mean = losses.mean(axis=0)
    centred = losses - mean
    return size, mean, centred.T @ centred, resamples


def _merge(a, b):
    na, ma, ca, ra = a
    nb, mb, cb, rb = b
    n = na + nb
    delta = mb - ma
    mean = ma + delta * (nb / n)
    comoment = ca + cb + np.outer(delta, delta) * (na * nb / n)
    return n, mean, comoment, ra + rb


def _tree_reduce(items: list):
    while len(items) > 1:
        merged = [_merge(items[i], items[i + 1]) for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            merged.append(items[-1])
        items = merged
    return items[0]


def run(config: McConfig, threads: int = 1) -> McResult:
    """Simulate ``config.replicates`` replicates and summarise every estimator's loss."""
    if threads < 1:
        raise InvalidInput(f"threads must be >= 1, got {threads!r}")
    bsize = block_size_for(config.spec.p, config.spec.n)
    sizes = [bsize] * (config.replicates // bsize)
    if config.replicates % bsize:
        sizes.append(config.replicates % bsize)

    def work(item):
        block, size = item
        return _block_summary(config, block, size)

    if threads == 1:
        summaries = [work(item) for item in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            summaries = list(pool.map(work, enumerate(sizes)))
    n, mean, comoment, resamples = _tree_reduce(summaries)
    cov = comoment / (n - 1) if n > 1 else np.zeros_like(comoment)
    return McResult(config, mean, cov, resamples)


def empirical_risk(config: McConfig, threads: int = 1) -> list[McEstimate]:
    """Monte Carlo Bayes-risk estimate, with standard error, for each estimator."""
    return run(config, threads).estimates


def stein_identity_check(
    g: Callable[[np.ndarray], np.ndarray],
    g_prime: Callable[[np.ndarray], np.ndarray],
    replicates: int = 1_000_000,
    seed: int = 0,
) -> tuple[float, float, float]:
    """Monte Carlo check of ``E[Y g(Y)] = E[g'(Y)]`` for ``Y ~ N(0, 1)``.

    Returns ``(lhs, rhs, z)`` where ``z`` is the paired z-score of
    ``lhs - rhs`` on common draws.
    """
    if replicates < 2:
        raise InvalidInput("need at least two replicates")
    y = stream(seed, Role.STEIN, 0).standard_normal(replicates)
    left = y * g(y)
    right = np.broadcast_to(np.asarray(g_prime(y), dtype=float), y.shape)
    d = left - right
    sd = d.std(ddof=1)
    diff = float(d.mean())
    z = 0.0 if sd == 0 else float(diff / (sd / math.sqrt(replicates)))
    return float(left.mean()), float(right.mean()), z
