"""Figure-data grids and the numerical verification suite behind the CLI."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import chi2_kernel as kernel
from .errors import InvalidInput
from .estimators import ProblemSpec
from .monte_carlo import stein_identity_check
from .risk_analysis import risk_modified_bayes, upper_bound_curve

__all__ = [
    "GridRequest",
    "ratio_curve",
    "risk_difference_surface",
    "bound_curve",
    "Check",
    "LemmaReport",
    "LemmaGrid",
    "verify_lemmas",
]

RATIO_COLUMNS = ("rho", "exact_ratio", "lower_bound", "upper_bound")
SURFACE_COLUMNS = ("tau2", "sigma2", "delta_r")
BOUND_COLUMNS = ("rho", "upper_bound_minus_one")


@dataclass(frozen=True)
class GridRequest:
    """A 1-d sweep ``[lo, hi]`` with ``points`` nodes, log- or linearly spaced."""

    lo: float
    hi: float
    points: int
    spacing: str = "log"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidInput(f"grid needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.points < 2:
            raise InvalidInput(f"grid needs at least 2 points, got {self.points}")
        if self.spacing not in ("log", "linear"):
            raise InvalidInput(f"spacing must be 'log' or 'linear', got {self.spacing!r}")
        if self.spacing == "log" and self.lo <= 0:
            raise InvalidInput("a log-spaced grid needs lo > 0")

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.lo, self.hi, self.points)
        return np.linspace(self.lo, self.hi, self.points)


def _parallel_map(func, items: Sequence, threads: int) -> list:
    if threads <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def ratio_curve(n: int, rhos: Iterable[float], threads: int = 1) -> list[dict]:
    """Exact modified Bayes risk ratio and its bounds along ``rho``."""

    def row(rho):
        report = risk_modified_bayes(ProblemSpec(1, n, 1.0, float(rho)))
        return {
            "rho": float(rho),
            "exact_ratio": report.ratio,
            "lower_bound": report.lower_bound,
            "upper_bound": report.upper_bound,
        }

    return _parallel_map(row, list(rhos), threads)


def risk_difference_surface(
    n: int, tau2s: Iterable[float], sigma2s: Iterable[float], p: int = 10, threads: int = 1
) -> list[dict]:
    """``R(modified Bayes) - R(X)`` on a ``tau2 x sigma2`` grid."""
    cells = [(float(t), float(s)) for t in tau2s for s in sigma2s]

    def row(cell):
        tau2, sigma2 = cell
        report = risk_modified_bayes(ProblemSpec(p, n, sigma2, tau2))
        return {"tau2": tau2, "sigma2": sigma2, "delta_r": report.risk - report.mle_risk}

    return _parallel_map(row, cells, threads)


def bound_curve(n: int, rhos: Iterable[float]) -> list[dict]:
    return [
        {"rho": float(rho), "upper_bound_minus_one": upper_bound_curve(n, float(rho))}
        for rho in rhos
    ]


@dataclass(frozen=True)
class Check:
    name: str
    point: str
    lhs: float
    rhs: float
    margin: float
    passed: bool

    def as_row(self) -> dict:
        return {
            "check": self.name,
            "point": self.point,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "passed": self.passed,
        }


@dataclass
class LemmaReport:
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def summary(self) -> dict[str, tuple[int, int]]:
        """``name -> (passed, total)`` in first-seen order."""
        out: dict[str, list[int]] = {}
        for c in self.checks:
            tally = out.setdefault(c.name, [0, 0])
            tally[0] += c.passed
            tally[1] += 1
        return {k: (v[0], v[1]) for k, v in out.items()}


def _one(u):
    return np.ones_like(u)


@dataclass(frozen=True)
class LemmaGrid:
    """Grids and tolerances for :func:`verify_lemmas`."""

    dofs: tuple[int, ...] = tuple(range(1, 61))
    noncentralities: tuple[float, ...] = (0.0, 1.0, 5.0, 20.0)
    monotone_shifts: tuple[float, ...] = (0.1, 1.0, 10.0)
    bracket_shifts: tuple[float, ...] = (0.01, 0.1, 1.0, 10.0, 100.0)
    recurrence_functions: tuple[tuple[str, Callable], ...] = (
        ("1", _one),
        ("1/(u+1)", lambda u: 1.0 / (u + 1.0)),
        ("1/(u+2)", lambda u: 1.0 / (u + 2.0)),
    )
    stein_functions: tuple[tuple[str, Callable, Callable], ...] = (
        ("y", lambda y: y, _one),
        ("y^3", lambda y: y**3, lambda y: 3.0 * y**2),
        ("y/(1+y^2)", lambda y: y / (1.0 + y * y), lambda y: (1.0 - y * y) / (1.0 + y * y) ** 2),
    )
    rel_tol: float = kernel.DEFAULT_REL_TOL
    series_tail_mass: float = kernel.DEFAULT_TAIL_MASS
    recurrence_tol: float = 1e-8
    # inequality checks tolerate quadrature error of this relative size
    inequality_slack: float = 0.0
    stein_replicates: int = 1_000_000
    stein_z_max: float = 4.0
    seed: int = 0


def _leq(name: str, point: str, small: float, big: float, slack: float) -> Check:
    """Check ``small <= big``; margin is relative to ``|big|``."""
    margin = (big - small) / abs(big) if big != 0 else big - small
    return Check(name, point, float(small), float(big), float(margin), bool(margin >= -slack))


def _monotone_checks(grid: LemmaGrid) -> list[Check]:
    checks = []
    for c in grid.monotone_shifts:
        f = lambda u, c=c: 1.0 / (u + c)  # noqa: E731
        cache: dict[int, float] = {}
        for lam in grid.noncentralities:
            for q in grid.dofs:
                lower_dof = kernel.noncentral_expectation(
                    f, kernel.ChiSquareLaw(q, lam), grid.rel_tol, grid.series_tail_mass, cache
                )
                higher_dof = kernel.noncentral_expectation(
                    f, kernel.ChiSquareLaw(q + 2, lam), grid.rel_tol, grid.series_tail_mass, cache
                )
                checks.append(
                    _leq(
                        "monotone-in-dof",
                        f"q={q} lam={lam:g} c={c:g}",
                        higher_dof,
                        lower_dof,
                        grid.inequality_slack,
                    )
                )
    return checks


def _bracket_checks(grid: LemmaGrid) -> list[Check]:
    checks = []
    slack = grid.inequality_slack
    for c in grid.bracket_shifts:
        for n in grid.dofs:
            point = f"n={n} c={c:g}"
            first = kernel.expect_inv_shift(n + 2, c, grid.rel_tol)
            checks.append(_leq("inv-shift-lower", point, 1.0 / (n + 2 + c), first, slack))
            checks.append(_leq("inv-shift-upper", point, first, 1.0 / (n + c), slack))
            second = kernel.expect_inv_shift_sq(n + 4, c, grid.rel_tol)
            checks.append(_leq("inv-shift-sq-lower", point, 1.0 / (n + 4 + c) ** 2, second, slack))
            checks.append(_leq("inv-shift-sq-upper", point, second, 1.0 / (n + c) ** 2, slack))
    return checks


def _recurrence_checks(grid: LemmaGrid) -> list[Check]:
    checks = []
    for label, h in grid.recurrence_functions:
        caches = ({}, {})
        for lam in grid.noncentralities:
            for q in grid.dofs:
                lhs, rhs = kernel.recurrence_sides(
                    h, q, lam, grid.rel_tol, grid.series_tail_mass, caches
                )
                rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs))
                checks.append(
                    Check(
                        "chi2-recurrence",
                        f"h={label} q={q} lam={lam:g}",
                        lhs,
                        rhs,
                        float(rel),
                        bool(rel < grid.recurrence_tol),
                    )
                )
    return checks


def _stein_checks(grid: LemmaGrid) -> list[Check]:
    checks = []
    for i, (label, g, g_prime) in enumerate(grid.stein_functions):
        lhs, rhs, z = stein_identity_check(g, g_prime, grid.stein_replicates, grid.seed + i)
        checks.append(
            Check("stein-identity", f"g={label}", lhs, rhs, z, bool(abs(z) < grid.stein_z_max))
        )
    return checks


def verify_lemmas(grid: LemmaGrid | None = None, suites: Sequence[str] | None = None) -> LemmaReport:
    """Run the kernel inequality/identity suites and the Stein-identity MC check.

    ``suites`` selects a subset of ``"monotone"``, ``"bracket"``,
    ``"recurrence"`` and ``"stein"``.
    """
    grid = grid or LemmaGrid()
    runners = {
        "monotone": _monotone_checks,
        "bracket": _bracket_checks,
        "recurrence": _recurrence_checks,
        "stein": _stein_checks,
    }
    selected = list(runners) if suites is None else list(suites)
    unknown = set(selected) - set(runners)
    if unknown:
        raise InvalidInput(f"unknown suites: {sorted(unknown)}")
    report = LemmaReport()
    for name in selected:
        report.checks.extend(runners[name](grid))
    return report

