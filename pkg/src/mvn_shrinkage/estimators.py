"""Shrinkage estimators of a normal mean under a normal prior.

Model: ``X | theta ~ N_p(theta, sigma2 I)``, ``theta ~ N_p(nu, tau2 I)`` and,
independently, ``S2 ~ sigma2 * chi2_n``.  Every estimator here maps an
observation ``(x, s2)`` to a point in ``R^p``.

All estimators broadcast: ``x`` may be a single vector of length ``p`` or a
batch of shape ``(N, p)`` with ``s2`` of shape ``(N,)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivisionByZero, InvalidDimension, InvalidInput, MissingHyperparameter

__all__ = [
    "Kind",
    "EstimatorKind",
    "MLE",
    "BAYES",
    "MODIFIED_BAYES",
    "EMPIRICAL_MODIFIED_BAYES",
    "JAMES_STEIN",
    "JAMES_STEIN_PLUS",
    "general_c",
    "ProblemSpec",
    "Observation",
    "shrink_factor",
    "estimate",
]


class Kind(str, enum.Enum):
    MLE = "mle"
    BAYES = "bayes"
    MODIFIED_BAYES = "modified-bayes"
    EMPIRICAL_MODIFIED_BAYES = "empirical-modified-bayes"
    GENERAL_C = "general-c"
    JAMES_STEIN = "james-stein"
    JAMES_STEIN_PLUS = "james-stein-plus"


@dataclass(frozen=True)
class EstimatorKind:
    """Which estimator to use; ``c`` is set only for ``Kind.GENERAL_C``."""

    tag: Kind
    c: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "tag", Kind(self.tag))
        if self.tag is Kind.GENERAL_C:
            if self.c is None or not math.isfinite(self.c):
                raise InvalidInput("general-c needs a finite shrinkage constant c")
            object.__setattr__(self, "c", float(self.c))
        elif self.c is not None:
            raise InvalidInput(f"{self.tag.value} takes no shrinkage constant")

    def __str__(self) -> str:
        if self.tag is Kind.GENERAL_C:
            return f"general-c:{self.c!r}"
        return self.tag.value

    @classmethod
    def parse(cls, text: str) -> "EstimatorKind":
        """Parse ``"mle"``, ``"modified-bayes"``, ``"general-c:0.25"`` and so on."""
        name, _, arg = text.strip().lower().partition(":")
        try:
            tag = Kind(name)
        except ValueError:
            choices = ", ".join(k.value for k in Kind)
            raise InvalidInput(f"unknown estimator {text!r}; choose from {choices}") from None
        if tag is Kind.GENERAL_C:
            if not arg:
                raise InvalidInput("general-c needs a constant, e.g. general-c:0.25")
            try:
                return cls(tag, float(arg))
            except ValueError:
                raise InvalidInput(f"bad shrinkage constant in {text!r}") from None
        if arg:
            raise InvalidInput(f"{name} takes no argument")
        return cls(tag)


MLE = EstimatorKind(Kind.MLE)
BAYES = EstimatorKind(Kind.BAYES)
MODIFIED_BAYES = EstimatorKind(Kind.MODIFIED_BAYES)
EMPIRICAL_MODIFIED_BAYES = EstimatorKind(Kind.EMPIRICAL_MODIFIED_BAYES)
JAMES_STEIN = EstimatorKind(Kind.JAMES_STEIN)
JAMES_STEIN_PLUS = EstimatorKind(Kind.JAMES_STEIN_PLUS)


def general_c(c: float) -> EstimatorKind:
    return EstimatorKind(Kind.GENERAL_C, c)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Full parameterisation of the hierarchical model.

    ``tau2=None`` marks the prior variance as unknown; only the empirical
    estimators, the MLE and James-Stein can then be evaluated.
    ``nu=None`` means a zero prior mean; a scalar is broadcast to length ``p``.
    """

    p: int
    n: int
    sigma2: float = 1.0
    tau2: float | None = 1.0
    nu: np.ndarray | float | None = field(default=None)

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise InvalidDimension(f"p must be a positive integer, got {self.p!r}")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidInput(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "n", int(self.n))
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0):
            raise InvalidInput(f"sigma2 must be finite and > 0, got {self.sigma2!r}")
        if self.tau2 is not None and not (math.isfinite(self.tau2) and self.tau2 >= 0):
            raise InvalidInput(f"tau2 must be finite and >= 0, got {self.tau2!r}")
        nu = 0.0 if self.nu is None else self.nu
        nu = np.asarray(nu, dtype=float)
        if nu.ndim == 0:
            nu = np.full(self.p, float(nu))
        if nu.shape != (self.p,):
            raise InvalidDimension(f"nu must have length p={self.p}, got shape {nu.shape}")
        if not np.all(np.isfinite(nu)):
            raise InvalidInput("nu must be finite")
        nu.setflags(write=False)
        object.__setattr__(self, "nu", nu)

    @property
    def tau2_known(self) -> bool:
        return self.tau2 is not None

    def require_tau2(self) -> float:
        if self.tau2 is None:
            raise MissingHyperparameter("this operation needs a known tau2")
        return self.tau2

    @property
    def rho(self) -> float:
        """Signal-to-noise ratio ``tau2 / sigma2``."""
        return self.require_tau2() / self.sigma2

    @property
    def shrink_target(self) -> float:
        """Prior-posterior weight ``sigma2 / (tau2 + sigma2)`` (``1 - B``)."""
        return self.sigma2 / (self.require_tau2() + self.sigma2)

    def with_tau2(self, tau2: float | None) -> "ProblemSpec":
        return ProblemSpec(self.p, self.n, self.sigma2, tau2, self.nu)


@dataclass(frozen=True, eq=False)
class Observation:
    x: np.ndarray
    s2: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1:
            raise InvalidDimension("x must be a 1-d vector")
        if not (math.isfinite(self.s2) and self.s2 > 0):
            raise InvalidInput(f"s2 must be finite and > 0, got {self.s2!r}")
        object.__setattr__(self, "x", x)


def _sqnorm(v: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", v, v)


def _checked_inverse(sq: np.ndarray, what: str) -> np.ndarray:
    if np.any(sq == 0):
        raise DivisionByZero(f"{what} is zero (or underflows); the shrinkage factor is undefined")
    return 1.0 / sq


def shrink_factor(kind: EstimatorKind, spec: ProblemSpec, x, s2) -> np.ndarray:
    """Multiplier applied to ``x - nu`` (or to ``x`` for James-Stein)."""
    tag = kind.tag
    p, n = spec.p, spec.n
    if tag is Kind.MLE:
        return np.ones(np.shape(s2))
    if tag is Kind.BAYES:
        return np.full(np.shape(s2), 1.0 - spec.shrink_target)
    if tag is Kind.MODIFIED_BAYES:
        tau2 = spec.require_tau2()
        # s2 / (s2 + n tau2) is the plug-in for sigma2 / (sigma2 + tau2)
        return 1.0 - s2 / (s2 + n * tau2)
    if tag is Kind.EMPIRICAL_MODIFIED_BAYES or tag is Kind.GENERAL_C:
        if tag is Kind.EMPIRICAL_MODIFIED_BAYES:
            if p < 3:
                raise InvalidDimension("the empirical modified Bayes estimator needs p >= 3")
            c = (p - 2) / (n + 2)
        else:
            c = kind.c
        inv = _checked_inverse(_sqnorm(x - spec.nu), "||x - nu||^2")
        return 1.0 - c * s2 * inv
    if tag is Kind.JAMES_STEIN or tag is Kind.JAMES_STEIN_PLUS:
        inv = _checked_inverse(_sqnorm(x), "||x||^2")
        factor = 1.0 - (p - 2) / (n + 2) * s2 * inv
        if tag is Kind.JAMES_STEIN_PLUS:
            factor = np.maximum(factor, 0.0)
        return factor
    raise InvalidInput(f"unsupported estimator {kind}")


def estimate(kind: EstimatorKind, spec: ProblemSpec, x, s2=None) -> np.ndarray:
    """Apply the estimator ``kind`` to ``(x, s2)``.

    ``x`` may be an :class:`Observation` (then ``s2`` is taken from it), a
    vector of length ``p`` or a batch ``(N, p)``. James-Stein shrinks toward
    the origin; all other estimators shrink toward ``spec.nu``.

    Raises:
        InvalidDimension: if the trailing dimension of ``x`` is not ``p``.
        DivisionByZero: if a norm in a shrinkage factor is zero.
        MissingHyperparameter: if the estimator needs ``tau2`` but it is unknown.
    """
    if isinstance(x, Observation):
        x, s2 = x.x, x.s2
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != spec.p:
        raise InvalidDimension(f"x must have trailing dimension p={spec.p}, got {x.shape}")
    if kind.tag is Kind.MLE:
        return x.copy()
    if s2 is None:
        if kind.tag is not Kind.BAYES:
            raise InvalidInput(f"{kind} needs s2")
        s2 = np.ones(x.shape[:-1])
    s2 = np.asarray(s2, dtype=float)
    if np.any(~(s2 > 0)):
        raise InvalidInput("s2 must be > 0")
    factor = shrink_factor(kind, spec, x, s2)[..., np.newaxis]
    if kind.tag in (Kind.JAMES_STEIN, Kind.JAMES_STEIN_PLUS):
        return factor * x
    return spec.nu + factor * (x - spec.nu)
