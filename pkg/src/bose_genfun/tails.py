"""Tail bounds and a non-concentration witness for the depletion number.

The upper tail P[N_+ >= n] is bounded by exp(-sup_{0<lambda<lambda0}
[lambda n - Lambda(lambda)]); the supremum is located by golden-section
search on the strictly concave objective.  A cruder closed-form bound from
the quadratic expansion of Lambda is provided for comparison, and a
Paley-Zygmund-style witness certifies that the distribution genuinely
spreads over a window of width ~ sigma around the mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .genfun import log_mgf_closed
from .spectrum import SpectrumKernel, depletion_mean, depletion_variance

_LAMBDA_TOL = 1e-10
_EDGE = 1e-12
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class TailBound:
    n: float
    lambda_star: float
    exponent: float
    bound: float
    note: str = ""


@dataclass(frozen=True)
class NonConcentrationWitness:
    n: float
    m: float
    epsilon: float
    second_moment: float
    fourth_moment: float


def _golden_max(f, lo: float, hi: float, tol: float = _LAMBDA_TOL):
    """Golden-section maximum of a unimodal f on [lo, hi]."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def chernoff_bound(k: SpectrumKernel, n: float,
                   search_cap: float | None = None) -> TailBound:
    """Optimized exponential-moment bound on P[N_+ >= n].

    Returns bound 1 (exponent 0) for n at or below the mean.  If every
    nu_p vanishes the depletion is deterministically zero, so any n > 0
    gets bound 0 (flagged in the note).
    """
    mu = depletion_mean(k)
    if not np.any(k.nu != 0.0):
        if n > 0.0:
            return TailBound(n=n, lambda_star=math.inf, exponent=math.inf,
                             bound=0.0, note="all nu vanish: depletion is exactly 0")
        return TailBound(n=n, lambda_star=0.0, exponent=0.0, bound=1.0,
                         note="all nu vanish: depletion is exactly 0")
    if n <= mu:
        return TailBound(n=n, lambda_star=0.0, exponent=0.0, bound=1.0,
                         note="n does not exceed the mean; trivial bound")
    hi = k.lambda0 - _EDGE
    if search_cap is not None:
        hi = min(hi, search_cap)
    lo = _EDGE
    if hi <= lo:
        raise ValueError("empty search interval for the tail exponent")

    def objective(lam: float) -> float:
        return lam * n - log_mgf_closed(k, lam).value

    lam_star, exponent = _golden_max(objective, lo, hi)
    exponent = max(exponent, 0.0)
    return TailBound(n=n, lambda_star=lam_star, exponent=exponent,
                     bound=math.exp(-exponent))


def quadratic_bound(k: SpectrumKernel, n: float) -> TailBound:
    """Closed-form tail bound from the quadratic model lambda*mu +
    lambda^2 sigma^2/2 of the exponent, optimized over (0, lambda0]."""
    mu = depletion_mean(k)
    if n <= mu:
        return TailBound(n=n, lambda_star=0.0, exponent=0.0, bound=1.0,
                         note="n does not exceed the mean; trivial bound")
    var = depletion_variance(k)
    if var == 0.0:
        return TailBound(n=n, lambda_star=math.inf, exponent=math.inf,
                         bound=0.0, note="zero variance: depletion is exactly 0")
    lam_star = (n - mu) / var
    if lam_star <= k.lambda0:
        exponent = (n - mu) ** 2 / (2.0 * var)
        return TailBound(n=n, lambda_star=lam_star, exponent=exponent,
                         bound=math.exp(-exponent))
    lam0 = k.lambda0
    exponent = (n - mu) * lam0 - 0.5 * lam0 * lam0 * var
    return TailBound(n=n, lambda_star=lam0, exponent=exponent,
                     bound=math.exp(-exponent), note="optimum clipped to lambda0")


def nonconcentration_witness(k: SpectrumKernel,
                             fourth_central: float) -> NonConcentrationWitness:
    """Paley-Zygmund witness: with probability at least epsilon =
    sigma^4 / (8 E4), the depletion deviates from its mean by at least
    n = sigma/2 while staying within n + m, where (n+m)^2 = 4 E4/sigma^2.

    fourth_central is the fourth central moment E[(N - mu)^4] (compute it
    with genfun.cumulants; it is passed in rather than recomputed so the
    caller controls which moment route feeds the witness).
    """
    var = depletion_variance(k)
    if var <= 0.0:
        raise ValueError("witness undefined for zero-variance depletion")
    if fourth_central < var * var:
        raise ValueError("fourth central moment below sigma^4 is impossible")
    n = 0.5 * math.sqrt(var)
    m = math.sqrt(4.0 * fourth_central / var) - n
    eps = var * var / (8.0 * fourth_central)
    return NonConcentrationWitness(n=n, m=m, epsilon=eps,
                                   second_moment=var,
                                   fourth_moment=fourth_central)
