"""Exact analytic solutions for one and two servers, used as oracles.

Single server, persistent orbit (ab = 0): with r0 = lam*at_0/mu,
sigma = p_a + pt_a and

    u(z) = thb + pb*tht - r0*(z - pb),
    lam_bar = lt*(sigma - pb*pt_a)*(1 + tht/r0),
    g = lt*pt_a/r0,

the generating functions are

    p_0(z) = c * u(z)^(-lam_bar) * exp(-g*u(z)),
    p_1(z) = (lt/mt)*(sigma - pb*pt_a) * p_0(z)/u(z),

with c fixed by p_0(1) + p_1(1) = 1. u vanishes at the dominant
singularity z_r, and u(1) = 1 - xi. Taylor coefficients come from the
product of a binomial-type series with an exponential series, so the pmf is
exact rather than numerically differentiated. Specializations: pt_a = 0
gives a negative binomial pair; additionally pb = 0, at_0 = 1 and no
feedback gives the classic single-server retrial pmf.

Two servers without impatience, balking, or feedback-to-orbit (p = p_a = 1,
pt_a = tht = 0, ab = 0): p_0(z) is a Gauss hypergeometric series in
x = rho*z with parameter sums a+b = 2*lt + mb, ab = lt^2 and lower
parameter c* = 1 + lt + mb + lt_ob/2, where rho = lt_ob/(2*mb).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotApplicable, SeriesDivergence
from .model import ModelParams, derive, require_valid

_SERIES_EPS = 1e-18
_SERIES_CAP = 200_000


def _log_pochhammer(a: float, j) -> np.ndarray:
    """log of the ascending factorial a^(j) = Gamma(a+j)/Gamma(a)."""
    j = np.asarray(j, dtype=float)
    la = math.lgamma(a)
    return np.vectorize(math.lgamma)(a + j) - la


@dataclass(frozen=True)
class S1Solution:
    """Closed-form generating-function pair for s = 1, ab = 0."""

    params: ModelParams
    lam_bar: float
    g: float
    u_const: float   # u(z) = u_const - u_slope*z
    u_slope: float
    coef2: float     # p_1 = coef2 * p_0 / u
    c: float
    xi: float
    z_r: float

    def u(self, z):
        return self.u_const - self.u_slope * z

    def eval(self, z: float) -> tuple[float, float]:
        """(p_0(z), p_1(z)) for z in [0, 1]."""
        if not 0.0 <= z <= 1.0:
            raise NotApplicable("evaluation restricted to [0, 1]", z=z)
        u = self.u(z)
        q = self.c * u ** (-self.lam_bar) * math.exp(-self.g * u)
        return q, self.coef2 * q / u

    def eval_deriv(self, z: float) -> tuple[float, float]:
        """(p_0'(z), p_1'(z)); u' = -u_slope throughout."""
        u = self.u(z)
        q, p1 = self.eval(z)
        dq = q * self.u_slope * (self.lam_bar / u + self.g)
        dp1 = self.coef2 * (dq / u + q * self.u_slope / u ** 2)
        return dq, dp1

    def pmf(self, jmax: int) -> np.ndarray:
        """Exact Taylor coefficients, shape (jmax+1, 2).

        Builds u^(-a) e^(-g u) as the Cauchy product of the binomial series
        of (1 - wz)^(-a), w = u_slope/u_const, with exp(g*u_slope*z).
        """
        n = jmax + 1
        w = self.u_slope / self.u_const
        ex = np.zeros(n)
        ex[0] = 1.0
        for j in range(n - 1):
            ex[j + 1] = ex[j] * (self.g * self.u_slope) / (j + 1)
        out = np.zeros((n, 2))
        for col, a in ((0, self.lam_bar), (1, self.lam_bar + 1.0)):
            binom = np.zeros(n)
            binom[0] = 1.0
            for j in range(n - 1):
                binom[j + 1] = binom[j] * w * (a + j) / (j + 1)
            pre = self.u_const ** (-a) * math.exp(-self.g * self.u_const)
            out[:, col] = pre * np.convolve(binom, ex)[:n]
        out[:, 0] *= self.c
        out[:, 1] *= self.c * self.coef2
        return out

    def asymptotic(self, j, form: str = "pochhammer") -> np.ndarray:
        """Leading-order (pi_0j, pi_1j) from the branch point at z_r.

        form="pochhammer" keeps the exact ratio Gamma(j+lam_bar)/Gamma(j+1)
        (exact in the classic case); form="power" uses the limit j^(lam_bar-1).
        """
        j = np.asarray(j, dtype=float)
        log_geo = -j * math.log(self.z_r)
        if form == "pochhammer":
            log_pow = _log_pochhammer(self.lam_bar, j) \
                - np.vectorize(math.lgamma)(j + 1.0)
        elif form == "power":
            log_pow = (self.lam_bar - 1.0) * np.log(np.maximum(j, 1.0))
        else:
            raise ValueError(f"unknown form {form!r}")
        log_base = math.log(self.c) - self.lam_bar * math.log(self.u_const) \
            - math.lgamma(self.lam_bar)
        p0 = np.exp(log_base + log_pow + log_geo)
        ratio = self.coef2 / self.u_const * (j + self.lam_bar) / self.lam_bar
        return np.stack([p0, p0 * ratio], axis=-1)


def s1_closed_form(params: ModelParams) -> S1Solution:
    """Build the s = 1 solution object.

    Raises:
        NotApplicable: unless s = 1, ab = 0 and xi < 1.
    """
    require_valid(params)
    if params.s != 1 or params.ab != 0:
        raise NotApplicable("closed form needs s = 1 and ab = 0",
                            s=params.s, ab=params.ab)
    d = derive(params)
    if d.xi >= 1.0:
        raise NotApplicable("not ergodic", xi=d.xi)
    sigma = params.p_a + params.pt_a
    amp = sigma - params.pb * params.pt_a
    lam_bar = d.lt * amp * (1.0 + params.tht / d.r0)
    g = d.lt * params.pt_a / d.r0
    u_const = params.thb + params.pb * params.tht + d.r0 * params.pb
    u_slope = d.r0
    coef2 = (d.lt / d.mt) * amp
    u1 = u_const - u_slope
    q1_raw = u1 ** (-lam_bar) * math.exp(-g * u1)
    c = 1.0 / (q1_raw * (1.0 + coef2 / u1))
    return S1Solution(params=params, lam_bar=lam_bar, g=g, u_const=u_const,
                      u_slope=u_slope, coef2=coef2, c=c, xi=d.xi, z_r=d.z_r)


def s1_solution(params: ModelParams, z: float) -> tuple[float, float]:
    """(p_0(z), p_1(z)) of the s = 1 closed form."""
    return s1_closed_form(params).eval(z)


def _is_classic(params: ModelParams) -> bool:
    return (params.s == 1 and params.p == 1.0 and params.p_a == 1.0
            and params.thb == 1.0 and params.ab == 0.0 and params.at_0 == 1.0
            and params.pt_a == 0.0)


def s1_classic_pmf(params: ModelParams, j) -> np.ndarray:
    """Exact pmf of the classic single-server retrial queue.

    pi_0j = (1-rho)^(lt+1) rho^j lt^(j) / j!  and
    pi_1j = (1-rho)^(lt+1) rho^(j+1) (lt+1)^(j) / j!, rho = lam/mu.

    Args:
        params: classic parameters (p = p_a = thb = at_0 = 1, ab = 0).
        j: orbit size, scalar or array.

    Returns:
        Array (..., 2) of (pi_0j, pi_1j).

    Raises:
        NotApplicable: outside the classic family or when rho >= 1.
    """
    require_valid(params)
    if not _is_classic(params):
        raise NotApplicable("classic pmf needs p = p_a = thb = at_0 = 1, "
                            "ab = pt_a = 0, s = 1")
    rho = params.lam / params.mu
    if rho >= 1.0:
        raise NotApplicable("not ergodic", rho=rho)
    lt = params.lam / params.nu
    j = np.asarray(j)
    jmax = int(j.max())
    t0 = np.zeros(jmax + 1)
    t1 = np.zeros(jmax + 1)
    pref = (1.0 - rho) ** (lt + 1.0)
    t0[0] = pref
    t1[0] = pref * rho
    for k in range(jmax):
        t0[k + 1] = t0[k] * rho * (lt + k) / (k + 1)
        t1[k + 1] = t1[k] * rho * (lt + 1 + k) / (k + 1)
    return np.stack([t0[j], t1[j]], axis=-1)


def s1_asymptotic(params: ModelParams, j,
                  form: str = "pochhammer") -> np.ndarray:
    """Leading-order tail of the s = 1 distribution; see S1Solution.asymptotic."""
    return s1_closed_form(params).asymptotic(j, form=form)


@dataclass(frozen=True)
class S2Solution:
    """Gauss-series solution for s = 2 pure retrials (no impatience/balking)."""

    params: ModelParams
    a: float
    b: float
    c_star: float
    rho: float
    lt: float
    mb: float
    lt_ob: float
    c: float  # normalization

    def _terms(self, nmax: int) -> np.ndarray:
        t = np.zeros(nmax + 1)
        t[0] = 1.0
        for n in range(nmax):
            t[n + 1] = t[n] * (self.a + n) * (self.b + n) \
                / ((self.c_star + n) * (n + 1))
        return t

    def eval(self, z: float) -> float:
        """p_0(z) by direct series summation in x = rho*z.

        Raises:
            SeriesDivergence: when |rho*z| >= 1.
        """
        x = self.rho * z
        if abs(x) >= 1.0:
            raise SeriesDivergence("outside the disk of convergence",
                                   x=x)
        total, term, n = 0.0, 1.0, 0
        while abs(term) > _SERIES_EPS * max(1.0, abs(total)):
            total += term
            term *= (self.a + n) * (self.b + n) * x \
                / ((self.c_star + n) * (n + 1))
            n += 1
            if n > _SERIES_CAP:
                raise SeriesDivergence("series failed to converge", x=x)
        return self.c * total

    def eval_all(self, z: float) -> tuple[float, float, float]:
        """(p_0, p_1, p_2)(z) via the recovery relations."""
        q, dq, ddq = self._derivs(z)
        p1 = (z * dq + self.lt * q) / self.mb
        dp1 = ((1.0 + self.lt) * dq + z * ddq) / self.mb
        p2 = (dq + dp1) / self.lt_ob
        return q, p1, p2

    def _derivs(self, z: float) -> tuple[float, float, float]:
        x = self.rho * z
        if abs(x) >= 1.0:
            raise SeriesDivergence("outside the disk of convergence", x=x)
        s0 = s1 = s2 = 0.0
        term, n = 1.0, 0
        while True:
            s0 += term
            s1 += n * term
            s2 += n * (n - 1) * term
            nxt = term * (self.a + n) * (self.b + n) * x \
                / ((self.c_star + n) * (n + 1))
            if abs(nxt) <= _SERIES_EPS * max(1.0, abs(s0)) and n > 4:
                break
            term = nxt
            n += 1
            if n > _SERIES_CAP:
                raise SeriesDivergence("series failed to converge", x=x)
        q = self.c * s0
        dq = self.c * s1 / z if z != 0 else self.c * self._terms(1)[1] * self.rho
        ddq = self.c * s2 / z ** 2 if z != 0 else self.c * 2 * self._terms(2)[2] * self.rho ** 2
        return q, dq, ddq

    def pmf(self, jmax: int) -> np.ndarray:
        """Exact Taylor coefficients, shape (jmax+1, 3)."""
        t = self._terms(jmax + 1)
        powers = self.rho ** np.arange(jmax + 2)
        q = self.c * t * powers
        j = np.arange(jmax + 2, dtype=float)
        p1 = q * (j + self.lt) / self.mb
        p2 = (j[:-1] + 1.0) * (q[1:] + p1[1:]) / self.lt_ob
        return np.stack([q[: jmax + 1], p1[: jmax + 1], p2], axis=-1)


def s2_closed_form(params: ModelParams) -> S2Solution:
    """Build the s = 2 hypergeometric solution.

    Allows re-serve feedback (theta > 0) and blocked balking (at_0 < 1);
    requires p = p_a = 1, pt_a = tht = 0, ab = 0 and ergodicity.

    Raises:
        NotApplicable: when the structure or ergodicity fails.
    """
    require_valid(params)
    if (params.s != 2 or params.ab != 0 or params.tht != 0
            or params.pt_a != 0 or params.p_a != 1 or params.p != 1):
        raise NotApplicable(
            "hypergeometric form needs s = 2, p = p_a = 1, pt_a = tht = 0, "
            "ab = 0")
    d = derive(params)
    if d.xi >= 1.0:
        raise NotApplicable("not ergodic", xi=d.xi)
    lt, mb = d.lt, d.mb
    lt_ob = d.lambda_ob / params.nu
    rho = lt_ob / (2.0 * mb)
    # hypergeometric parameters: a+b and a*b from the indicial data
    psum = 2.0 * lt + mb
    disc = math.sqrt(psum * psum - 4.0 * lt * lt)
    a, b = (psum - disc) / 2.0, (psum + disc) / 2.0
    c_star = 1.0 + lt + mb + lt_ob / 2.0
    sol = S2Solution(params=params, a=a, b=b, c_star=c_star, rho=rho,
                     lt=lt, mb=mb, lt_ob=lt_ob, c=1.0)
    q1, dq1, ddq1 = sol._derivs(1.0)
    p11 = (dq1 + lt * q1) / mb
    dp11 = ((1.0 + lt) * dq1 + ddq1) / mb
    p21 = (dq1 + dp11) / lt_ob
    return S2Solution(params=params, a=a, b=b, c_star=c_star, rho=rho,
                      lt=lt, mb=mb, lt_ob=lt_ob,
                      c=1.0 / (q1 + p11 + p21))


def s2_hypergeometric(params: ModelParams, z: float) -> float:
    """p_0(z) of the s = 2 pure-retrial solution."""
    return s2_closed_form(params).eval(z)
