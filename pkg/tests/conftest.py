"""Independent high-precision oracles shared by the test modules.

None of these touch the package's quadrature: inverse-shift moments use the
Laplace-transform representation ``E[1/(U+c)] = int_0^inf e^{-ct}(1+2t)^{-q/2} dt``,
evaluated with mpmath at 40 digits.
"""

import mpmath as mp
import pytest

mp.mp.dps = 40


def laplace_inv_shift(q, c):
    c, q = mp.mpf(c), mp.mpf(q)
    return float(mp.quad(lambda t: mp.exp(-c * t) * (1 + 2 * t) ** (-q / 2), [0, 1 / (c + q), 1, mp.inf]))


def laplace_inv_shift_sq(q, c):
    c, q = mp.mpf(c), mp.mpf(q)
    return float(
        mp.quad(lambda t: t * mp.exp(-c * t) * (1 + 2 * t) ** (-q / 2), [0, 1 / (c + q), 1, mp.inf])
    )


def poisson_series(term, lam):
    """``sum_k P(K=k) term(k)`` for ``K ~ Poisson(lam)``, summed to machine tail."""
    lam = mp.mpf(lam)
    return float(mp.nsum(lambda k: mp.exp(-lam) * lam**k / mp.factorial(k) * term(k), [0, mp.inf]))


def modified_bayes_ratio_oracle(n, rho):
    c = n * rho
    return 1 + n * (n + 2) * (1 + rho) * laplace_inv_shift_sq(n + 4, c) - 2 * n * laplace_inv_shift(n + 2, c)


@pytest.fixture(scope="session")
def oracles():
    return {
        "inv_shift": laplace_inv_shift,
        "inv_shift_sq": laplace_inv_shift_sq,
        "poisson_series": poisson_series,
        "modified_bayes_ratio": modified_bayes_ratio_oracle,
    }
