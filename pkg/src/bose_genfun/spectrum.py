"""Pairing amplitudes nu_p and the limiting depletion statistics mu, sigma^2, lambda0.

nu_p = (1/4) log(p^2 / (p^2 + a16pi)) with a16pi = 16*pi*(scattering quantity).
For a16pi >= 0 every nu_p is <= 0 and |nu_p| decreases with |p|^2, so the
hyperbolic arrays s = sinh(nu), c = cosh(nu), t = tanh(nu) are well behaved
and s is square-summable on any cube truncation.

lambda0 is the half-width of the moment-generating-function domain: the
smallest lambda > 0 at which a per-mode denominator c_p^2 - e^{2 lambda} s_p^2
reaches zero, i.e. min_p -log|t_p| (infinite when all nu vanish).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import Lattice, p_squared_array


@dataclass(frozen=True, eq=False)
class SpectrumKernel:
    lattice: Lattice
    a16pi: float
    nu: np.ndarray
    s: np.ndarray
    c: np.ndarray
    t: np.ndarray
    lambda0: float

    @property
    def size(self) -> int:
        return self.nu.shape[0]


def nu_of(p_squared: float, a16pi: float) -> float:
    """Pairing amplitude for one momentum: (1/4) log(p^2/(p^2 + a16pi))."""
    if p_squared <= 0:
        raise ValueError("p_squared must be positive")
    if a16pi < 0:
        raise ValueError("a16pi must be nonnegative")
    # log1p form: the argument ratio is 1 + a16pi/p^2 to high relative accuracy
    return -0.25 * math.log1p(a16pi / p_squared)


def _lambda0_from_tanh(t: np.ndarray) -> float:
    tmax = float(np.max(np.abs(t))) if t.size else 0.0
    if tmax == 0.0:
        return math.inf
    return -math.log(tmax)


def build_kernel(lattice: Lattice, a16pi: float) -> SpectrumKernel:
    """Populate nu and the hyperbolic arrays for every lattice mode."""
    p2 = p_squared_array(lattice)
    if a16pi < 0:
        raise ValueError("a16pi must be nonnegative")
    nu = -0.25 * np.log1p(a16pi / p2)
    s, c, t = np.sinh(nu), np.cosh(nu), np.tanh(nu)
    return SpectrumKernel(lattice=lattice, a16pi=float(a16pi), nu=nu,
                          s=s, c=c, t=t, lambda0=_lambda0_from_tanh(t))


def kernel_from_nu(lattice: Lattice, nu) -> SpectrumKernel:
    """Desk-scale constructor with explicit nu values (one per mode).

    nu must be even under p -> -p.  a16pi is recorded as NaN since the
    amplitudes were not derived from a coupling.
    """
    nu = np.asarray(nu, dtype=float)
    if nu.shape != (lattice.size,):
        raise ValueError("nu must have one entry per lattice mode")
    if not np.allclose(nu, nu[lattice.neg_index], rtol=0, atol=0):
        raise ValueError("nu must be even: nu[p] == nu[-p]")
    s, c, t = np.sinh(nu), np.cosh(nu), np.tanh(nu)
    return SpectrumKernel(lattice=lattice, a16pi=math.nan, nu=nu,
                          s=s, c=c, t=t, lambda0=_lambda0_from_tanh(t))


def depletion_mean(k: SpectrumKernel) -> float:
    """mu = sum_p sinh^2(nu_p), accumulated in compensated precision."""
    return math.fsum(float(x) * float(x) for x in k.s)


def depletion_variance(k: SpectrumKernel) -> float:
    """sigma^2 = 2 sum_p sinh^2(nu_p) cosh^2(nu_p)."""
    return 2.0 * math.fsum((float(a) * float(b)) ** 2 for a, b in zip(k.s, k.c))


def lambda0_of(k: SpectrumKernel) -> float:
    """Domain half-width min_p -log|tanh(nu_p)|; +inf when nu == 0.

    This is the first zero of any per-mode denominator
    1 - 2 c^2 s^2 (cosh(2 lambda) - 1), by the factorization
    t - c^2 s^2 (t-1)^2 = (c^2 t - s^2)(c^2 - t s^2) with t = e^{2 lambda}.
    """
    return _lambda0_from_tanh(k.t)
