"""The limiting log-MGF of the depletion number and its cumulants.

Two equivalent evaluations of Lambda(lambda) are kept side by side:

* the integral form, integrating the per-mode expression
  c^2 s^2 [2 c^2 (cosh 2k - 1) - e^{-2k} + 1] / [1 - 2 c^2 s^2 (cosh 2k - 1)]
  plus lambda * mu, by adaptive quadrature;

* the closed product form Lambda = -1/2 sum_p log(c_p^2 - e^{2 lambda} s_p^2),
  which follows per mode from the factorization
  t - c^2 s^2 (t - 1)^2 = (c^2 t - s^2)(c^2 - t s^2), t = e^{2 kappa}.

The closed form is the oracle of record; the integral form is tested
against it.  Cumulants come from differentiating the closed form
analytically: per mode, g(lambda) = e^{2l} s^2 / (c^2 - e^{2l} s^2)
satisfies g' = 2g + 2g^2, so every derivative of Lambda at 0 is an exact
integer polynomial in s_p^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate

from .spectrum import SpectrumKernel, depletion_mean


@dataclass(frozen=True)
class QuadratureSpec:
    tol: float = 1e-10
    max_panels: int = 200


@dataclass(frozen=True)
class GenFunSample:
    lam: float
    value: float
    integrand_value: float
    method: str


@dataclass(frozen=True, eq=False)
class CumulantSet:
    """Cumulants/moments of the limiting law; index j holds order j (entry 0 unused)."""

    order: int
    kappa: np.ndarray
    moments: np.ndarray
    central: np.ndarray


_ORDER_CAP = 12


def _check_domain(k: SpectrumKernel, lam: float) -> None:
    if not abs(lam) < k.lambda0:
        raise ValueError(f"lambda {lam} outside domain (-{k.lambda0}, {k.lambda0})")


def integrand_diagonal(k: SpectrumKernel, kappa: float) -> float:
    """Sum over modes of the printed integrand at kappa."""
    _check_domain(k, kappa)
    s2 = k.s * k.s
    c2 = k.c * k.c
    ch = math.cosh(2.0 * kappa) - 1.0
    num = c2 * s2 * (2.0 * c2 * ch - math.expm1(-2.0 * kappa))
    den = 1.0 - 2.0 * c2 * s2 * ch
    return float(np.sum(num / den))


def log_mgf(k: SpectrumKernel, lam: float, quad: QuadratureSpec | None = None) -> GenFunSample:
    """Lambda(lambda) by adaptive quadrature of the diagonal integrand."""
    quad = quad or QuadratureSpec()
    _check_domain(k, lam)
    if lam == 0.0:
        return GenFunSample(lam=0.0, value=0.0, integrand_value=0.0, method="quadrature")
    mu = depletion_mean(k)
    val, abserr, info, *tail = scipy.integrate.quad(
        lambda x: integrand_diagonal(k, x), 0.0, lam,
        epsabs=quad.tol, epsrel=quad.tol, limit=quad.max_panels, full_output=1)
    if tail:  # QUADPACK appended a warning message
        raise ValueError(f"quadrature did not converge: {tail[0]}")
    return GenFunSample(lam=lam, value=float(val + lam * mu),
                        integrand_value=integrand_diagonal(k, lam), method="quadrature")


def log_mgf_closed(k: SpectrumKernel, lam: float) -> GenFunSample:
    """Closed product form -1/2 sum log(c^2 - e^{2 lambda} s^2)."""
    _check_domain(k, lam)
    t = math.exp(2.0 * lam)
    args = k.c * k.c - t * (k.s * k.s)
    if np.any(args <= 0.0):
        raise ValueError("log argument nonpositive: lambda outside domain")
    value = -0.5 * math.fsum(math.log(a) for a in args)
    return GenFunSample(lam=lam, value=value,
                        integrand_value=integrand_diagonal(k, lam), method="closed_form")


def log_mgf_grid(k: SpectrumKernel, lams: np.ndarray,
                 quad: QuadratureSpec | None = None) -> np.ndarray:
    """Quadrature Lambda on a sorted grid, integrating each gap only once."""
    quad = quad or QuadratureSpec()
    lams = np.asarray(lams, dtype=float)
    if lams.size == 0:
        return np.zeros(0)
    if np.any(np.abs(lams) >= k.lambda0):
        raise ValueError("grid extends outside the MGF domain")
    order = np.argsort(lams)
    pts = lams[order]
    mu = depletion_mean(k)
    vals = np.empty(pts.size)

    def cumulate(indices):
        # walk outward from 0 so each inter-point gap is integrated once
        prev_x, prev_v = 0.0, 0.0
        for i in indices:
            seg, _ = scipy.integrate.quad(
                lambda x: integrand_diagonal(k, x), prev_x, pts[i],
                epsabs=quad.tol, epsrel=quad.tol, limit=quad.max_panels)
            prev_v += seg
            prev_x = pts[i]
            vals[i] = prev_v

    cumulate([i for i in range(pts.size) if pts[i] >= 0.0])
    cumulate([i for i in reversed(range(pts.size)) if pts[i] < 0.0])
    out = np.empty(lams.size)
    out[order] = vals + pts * mu
    return out


def _derivative_polynomials(order: int) -> list[list[int]]:
    """Integer coefficients of d^n g / d lambda^n as polynomials in g.

    g' = 2g + 2g^2; polys[n][j] is the coefficient of g^{j+1} in g^{(n)}.
    """
    polys = [[1]]  # g itself
    for _ in range(order - 1):
        cur = polys[-1]
        # differentiate sum_j a_j g^{j+1}:  sum_j a_j (j+1) g^j * (2g + 2g^2)
        nxt = [0] * (len(cur) + 1)
        for j, a in enumerate(cur):
            nxt[j] += 2 * a * (j + 1)
            nxt[j + 1] += 2 * a * (j + 1)
        polys.append(nxt)
    return polys


def cumulants(k: SpectrumKernel, order: int) -> CumulantSet:
    """kappa[j] = Lambda^{(j)}(0) for j = 1..order, plus raw/central moments."""
    if order < 1:
        raise ValueError("order must be >= 1")
    if order > _ORDER_CAP:
        raise ValueError(f"order > {_ORDER_CAP} refused: coefficient growth")
    g0 = (k.s * k.s).astype(float)
    polys = _derivative_polynomials(order)
    kap = np.zeros(order + 1)
    for j in range(1, order + 1):
        coeffs = polys[j - 1]
        per_mode = np.zeros_like(g0)
        for power in range(len(coeffs), 0, -1):
            per_mode = per_mode * g0 + coeffs[power - 1]
        per_mode = per_mode * g0  # lowest power is g^1
        kap[j] = math.fsum(per_mode.tolist())

    moments = _moments_from_cumulants(kap, order)
    central_kap = kap.copy()
    central_kap[1] = 0.0
    central = _moments_from_cumulants(central_kap, order)
    return CumulantSet(order=order, kappa=kap, moments=moments, central=central)


def _moments_from_cumulants(kap: np.ndarray, order: int) -> np.ndarray:
    m = np.zeros(order + 1)
    m[0] = 1.0
    for n in range(1, order + 1):
        m[n] = math.fsum(math.comb(n - 1, i) * kap[i + 1] * m[n - 1 - i]
                         for i in range(n))
    return m


def mgf_derivative_check(k: SpectrumKernel, lam: float, j: int) -> float:
    """d^j/dlambda^j of e^{Lambda} by central finite differences (cross-check only)."""
    if not 1 <= j <= 4:
        raise ValueError("derivative order must be in 1..4")
    _check_domain(k, lam)
    h = 2.5e-3
    if math.isfinite(k.lambda0):
        h = min(h, 0.1 * (k.lambda0 - abs(lam)))
        if abs(lam) + 2 * h >= k.lambda0:
            raise ValueError("finite-difference stencil exits the MGF domain")

    def f(x: float) -> float:
        return math.exp(log_mgf_closed(k, x).value)

    if j == 1:
        return (f(lam + h) - f(lam - h)) / (2 * h)
    if j == 2:
        return (f(lam + h) - 2 * f(lam) + f(lam - h)) / (h * h)
    if j == 3:
        return (f(lam + 2 * h) - 2 * f(lam + h) + 2 * f(lam - h) - f(lam - 2 * h)) / (2 * h ** 3)
    return (f(lam + 2 * h) - 4 * f(lam + h) + 6 * f(lam) - 4 * f(lam - h) + f(lam - 2 * h)) / h ** 4


def fourth_central_printed_combination(k: SpectrumKernel) -> float:
    """The alternative printed fourth-moment combination 12 sigma^4 + 8 sigma^2
    + 48 sum c^4 s^4, reported for comparison and never asserted."""
    sig2 = 2.0 * math.fsum(((k.s * k.c) ** 2).tolist())
    quart = math.fsum(((k.c * k.s) ** 4).tolist())
    return 12.0 * sig2 ** 2 + 8.0 * sig2 + 48.0 * quart
