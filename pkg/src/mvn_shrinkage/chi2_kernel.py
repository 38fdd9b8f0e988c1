"""Expectations of functions of central and noncentral chi-square variables.

The noncentral law is parameterised the way the shrinkage risk formulas use
it: ``U ~ chi2_q(lam)`` with ``lam = ||theta||^2 / (2 sigma^2)``, so that
``U`` is a Poisson mixture of central laws ``chi2_{q+2K}`` with
``K ~ Poisson(lam)`` and ``E[U] = q + 2 lam``.  (The usual noncentrality
parameter, e.g. ``scipy.stats.ncx2``'s ``nc``, equals ``2 lam``.)

Central expectations are computed by adaptive quadrature in the variable
``t = log(u / q)``.  In that variable the integrand decays exponentially at
both ends, including the ``u -> 0`` end where ``f`` or the density may be
singular, and the log-density is evaluated in a centred form that stays
accurate for ``q`` in the tens of thousands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, MutableMapping

import numpy as np
from scipy import integrate, special, stats

from .errors import InvalidInput, NonConvergence

__all__ = [
    "ChiSquareLaw",
    "ExpectationQuery",
    "DEFAULT_REL_TOL",
    "DEFAULT_TAIL_MASS",
    "central_expectation",
    "noncentral_expectation",
    "poisson_window",
    "expect_inv_shift",
    "expect_inv_shift_sq",
    "recurrence_sides",
    "chi2_recurrence_check",
]

DEFAULT_REL_TOL = 1e-10
DEFAULT_TAIL_MASS = 1e-12

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# Integrand values below max * exp(-_DYNAMIC_RANGE) are treated as zero.
_DYNAMIC_RANGE = 75.0
_T_MIN, _T_MAX = -700.0, 12.0
_COARSE_T = np.arange(_T_MIN, _T_MAX + 0.125, 0.125)
_FINE_UNIT = np.linspace(-40.0, 40.0, 641)

RealFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ChiSquareLaw:
    """A chi-square law with ``dof`` degrees of freedom.

    ``noncentrality`` is ``lam = ||theta||^2 / (2 sigma^2)``; zero means central.
    """

    dof: int
    noncentrality: float = 0.0

    def __post_init__(self):
        if int(self.dof) != self.dof or self.dof < 1:
            raise InvalidInput(f"dof must be a positive integer, got {self.dof!r}")
        if not math.isfinite(self.noncentrality) or self.noncentrality < 0:
            raise InvalidInput(
                f"noncentrality must be finite and >= 0, got {self.noncentrality!r}"
            )

    @property
    def is_central(self) -> bool:
        return self.noncentrality == 0.0

    @property
    def mean(self) -> float:
        return self.dof + 2.0 * self.noncentrality


@dataclass(frozen=True)
class ExpectationQuery:
    """Request for ``E[1 / (U + shift)^power]`` under ``law``."""

    law: ChiSquareLaw
    shift: float
    power: int = 1
    rel_tol: float = DEFAULT_REL_TOL
    series_tail_mass: float = DEFAULT_TAIL_MASS

    def __post_init__(self):
        if self.power not in (1, 2):
            raise InvalidInput(f"power must be 1 or 2, got {self.power!r}")
        if not 0 < self.rel_tol < 1:
            raise InvalidInput(f"rel_tol must lie in (0, 1), got {self.rel_tol!r}")
        if not 0 < self.series_tail_mass < 1:
            raise InvalidInput(
                f"series_tail_mass must lie in (0, 1), got {self.series_tail_mass!r}"
            )
        if not math.isfinite(self.shift) or self.shift < 0:
            raise InvalidInput(f"shift must be finite and >= 0, got {self.shift!r}")
        if self.shift == 0 and self.law.dof < 1 + 2 * self.power:
            raise InvalidInput(
                f"E[1/U^{self.power}] does not exist for dof={self.law.dof}"
            )

    def evaluate(self) -> float:
        c, k = self.shift, self.power
        return noncentral_expectation(
            lambda u: 1.0 / (u + c) ** k,
            self.law,
            rel_tol=self.rel_tol,
            series_tail_mass=self.series_tail_mass,
        )


def _stirling_remainder(a: float) -> float:
    """``lgamma(a) - ((a - 1/2) log a - a + log sqrt(2 pi))``."""
    if a >= 15.0:
        r = 1.0 / (a * a)
        return (
            1.0
            / a
            * (1 / 12 - r * (1 / 360 - r * (1 / 1260 - r * (1 / 1680 - r / 1188))))
        )
    return math.lgamma(a) - ((a - 0.5) * math.log(a) - a + _LOG_SQRT_2PI)


def _log_weight(t, q: int):
    """Log of ``u * chi2_q density(u)`` at ``u = q * exp(t)``.

    Written as ``-a (expm1(t) - t) + log(a)/2 - log sqrt(2 pi) - stirling(a)``
    with ``a = q/2``, which avoids the cancellation between ``a log a`` and
    ``lgamma(a)`` for large ``q``.
    """
    a = 0.5 * q
    const = 0.5 * math.log(a) - _LOG_SQRT_2PI - _stirling_remainder(a)
    return -a * (np.expm1(t) - t) + const


def _integration_range(f: RealFunction, q: int) -> tuple[float, float, float]:
    width = math.sqrt(2.0 / q)
    t = np.union1d(_COARSE_T, width * _FINE_UNIT)
    with np.errstate(all="ignore"):
        fu = np.broadcast_to(np.asarray(f(q * np.exp(t)), dtype=float), t.shape)
        logg = np.log(np.abs(fu)) + _log_weight(t, q)
    logg = np.where(np.isfinite(logg), logg, -np.inf)
    peak = int(np.argmax(logg))
    if not np.isfinite(logg[peak]):
        return 0.0, 0.0, 0.0
    keep = np.flatnonzero(logg > logg[peak] - _DYNAMIC_RANGE)
    lo = t[max(keep[0] - 1, 0)]
    hi = t[min(keep[-1] + 1, t.size - 1)]
    return float(lo), float(hi), float(t[peak])


def central_expectation(
    f: RealFunction, q: int, rel_tol: float = DEFAULT_REL_TOL
) -> float:
    """Return ``E[f(U)]`` for ``U ~ chi2_q`` (central).

    Args:
        f: Function of ``u > 0``. It must accept numpy arrays and scalars.
        q: Degrees of freedom, ``q >= 1``.
        rel_tol: Target relative accuracy of the quadrature.

    Raises:
        InvalidInput: if ``q < 1`` or ``rel_tol`` is outside ``(0, 1)``.
        NonConvergence: if the adaptive quadrature cannot meet ``rel_tol``.
    """
    if int(q) != q or q < 1:
        raise InvalidInput(f"degrees of freedom must be a positive integer, got {q!r}")
    if not 0 < rel_tol < 1:
        raise InvalidInput(f"rel_tol must lie in (0, 1), got {rel_tol!r}")
    q = int(q)
    lo, hi, peak = _integration_range(f, q)
    if lo == hi:
        return 0.0

    def integrand(t: float) -> float:
        return float(f(q * math.exp(t))) * math.exp(_log_weight(t, q))

    width = math.sqrt(2.0 / q)
    points = [p for p in (peak - 4 * width, peak, peak + 4 * width) if lo < p < hi]
    value, abserr, info, *message = integrate.quad(
        integrand,
        lo,
        hi,
        points=points or None,
        epsabs=0.0,
        epsrel=rel_tol,
        limit=1000,
        full_output=1,
    )
    if message or not math.isfinite(value):
        detail = message[0] if message else "non-finite result"
        raise NonConvergence(f"quadrature for dof={q} failed: {detail}")
    if abserr > 10.0 * rel_tol * abs(value) and abserr > 1e-300:
        raise NonConvergence(
            f"quadrature for dof={q} reached only {abserr / abs(value):.2e} relative accuracy"
        )
    return value


def poisson_window(mean: float, tail_mass: float = DEFAULT_TAIL_MASS):
    """Smallest symmetric-ish window of Poisson indices holding ``1 - tail_mass``.

    Returns ``(ks, weights, omitted)`` where ``omitted`` is the exact Poisson
    mass outside ``ks`` and is always ``< tail_mass``.
    """
    if mean < 0 or not math.isfinite(mean):
        raise InvalidInput(f"Poisson mean must be finite and >= 0, got {mean!r}")
    if not 0 < tail_mass < 1:
        raise InvalidInput(f"tail_mass must lie in (0, 1), got {tail_mass!r}")
    if mean == 0:
        return np.array([0]), np.array([1.0]), 0.0
    law = stats.poisson(mean)
    lo = int(law.ppf(tail_mass / 4))
    hi = int(law.isf(tail_mass / 4))
    lo = max(lo - 1, 0)
    hi += 1

    def omitted_mass(lo, hi):
        left = law.cdf(lo - 1) if lo > 0 else 0.0
        return float(left + law.sf(hi))

    omitted = omitted_mass(lo, hi)
    while omitted >= tail_mass:
        lo, hi = max(lo - 1, 0), hi + 1
        omitted = omitted_mass(lo, hi)
    ks = np.arange(lo, hi + 1)
    weights = law.pmf(ks)
    # scipy's pmf drifts by ~1e-13 relative at large means; pin the total
    weights *= (1.0 - omitted) / math.fsum(weights)
    return ks, weights, omitted


def noncentral_expectation(
    f: RealFunction,
    law: ChiSquareLaw,
    rel_tol: float = DEFAULT_REL_TOL,
    series_tail_mass: float = DEFAULT_TAIL_MASS,
    cache: MutableMapping[int, float] | None = None,
) -> float:
    """Return ``E[f(U)]`` for ``U ~ law`` as a Poisson mixture of central terms.

    ``cache`` maps degrees of freedom to central expectations of this same
    ``f`` at this same ``rel_tol``; pass one dict per function to share work
    across calls.
    """
    if not 0 < series_tail_mass < 1:
        raise InvalidInput(
            f"series_tail_mass must lie in (0, 1), got {series_tail_mass!r}"
        )

    def central(dof: int) -> float:
        if cache is None:
            return central_expectation(f, dof, rel_tol)
        if dof not in cache:
            cache[dof] = central_expectation(f, dof, rel_tol)
        return cache[dof]

    if law.is_central:
        return central(law.dof)
    ks, weights, _ = poisson_window(law.noncentrality, series_tail_mass)
    order = np.argsort(-weights, kind="stable")
    return math.fsum(
        float(weights[i]) * central(law.dof + 2 * int(ks[i])) for i in order
    )


def _check_shift(q: int, c: float, min_dof: int) -> None:
    if int(q) != q or q < 1:
        raise InvalidInput(f"degrees of freedom must be a positive integer, got {q!r}")
    if not math.isfinite(c) or c < 0:
        raise InvalidInput(f"shift c must be finite and >= 0, got {c!r}")
    if c == 0 and q < min_dof:
        raise InvalidInput(f"moment is infinite at c=0 for dof={q} (< {min_dof})")


def expect_inv_shift(q: int, c: float, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """``E[1 / (U + c)]`` for ``U ~ chi2_q``; ``c = 0`` needs ``q >= 3``."""
    _check_shift(q, c, 3)
    if c == 0:
        return 1.0 / (q - 2)
    return central_expectation(lambda u: 1.0 / (u + c), q, rel_tol)


def expect_inv_shift_sq(q: int, c: float, rel_tol: float = DEFAULT_REL_TOL) -> float:
    """``E[1 / (U + c)^2]`` for ``U ~ chi2_q``; ``c = 0`` needs ``q >= 5``."""
    _check_shift(q, c, 5)
    if c == 0:
        return 1.0 / ((q - 2) * (q - 4))
    return central_expectation(lambda u: 1.0 / (u + c) ** 2, q, rel_tol)


def recurrence_sides(
    h: RealFunction,
    q: int,
    lam: float,
    rel_tol: float = DEFAULT_REL_TOL,
    series_tail_mass: float = DEFAULT_TAIL_MASS,
    caches: tuple[dict, dict] | None = None,
) -> tuple[float, float]:
    """Both sides of ``E[h(U) U] = q E_{q+2}[h] + 2 lam E_{q+4}[h]``.

    ``caches`` is an optional pair of central-value memos for ``u*h(u)`` and
    ``h`` respectively.
    """
    hu_cache, h_cache = caches if caches is not None else (None, None)
    lhs = noncentral_expectation(
        lambda u: h(u) * u,
        ChiSquareLaw(q, lam),
        rel_tol,
        series_tail_mass,
        cache=hu_cache,
    )
    rhs = q * noncentral_expectation(
        h, ChiSquareLaw(q + 2, lam), rel_tol, series_tail_mass, cache=h_cache
    )
    if lam > 0:
        rhs += (
            2.0
            * lam
            * noncentral_expectation(
                h, ChiSquareLaw(q + 4, lam), rel_tol, series_tail_mass, cache=h_cache
            )
        )
    return lhs, rhs


def chi2_recurrence_check(
    h: RealFunction,
    q: int,
    lam: float,
    rel_tol: float = DEFAULT_REL_TOL,
    series_tail_mass: float = DEFAULT_TAIL_MASS,
) -> float:
    """Residual ``E[h(U) U] - q E_{q+2}[h] - 2 lam E_{q+4}[h]`` (should be ~0)."""
    lhs, rhs = recurrence_sides(h, q, lam, rel_tol, series_tail_mass)
    return lhs - rhs
