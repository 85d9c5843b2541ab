"""Persistent-case dimension reduction, Okubo canonical form, resolvent.

When blocked retrials never abandon (ab = 0) the last generating function
p_s(z) can be eliminated through the orbit-level cut equation, leaving an
s-dimensional system p'(z) V(z) = p(z) U(z) whose matrices carry the
elimination factor kappa(z) = s*mu*(thb + tht*z)/(lambda*at_0 + s*mu*tht)
in their last column. All matrices here are stored nu-scaled (dimensionless
rates lt = lam/nu, mt = mu/nu).

Without feedback-to-orbit, direct-to-orbit arrivals, or balking (tht = 0,
pt_a = 0, p_a = 1) the reduced system has constant coefficient matrices
apart from the zI term: p'(z)(zI - T) = p(z) U with T upper triangular and
U the generator of an Erlang loss system killed at the blocking epoch. The
affine change y = (z - pb)/p standardizes T to superdiagonal ones plus a
rho_bar last column, where T^s = rho_bar * T^(s-1); the resolvent
U (yI - T)^(-1) then splits into a simple pole at rho_bar plus a finite
principal part at 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (NoOrbitInflow, NotApplicable, NotOkubo, NotPersistent,
                     PureOrbit, WrongDimension)
from .model import ModelParams, derive, require_valid


def _ones_last_column(s: int) -> np.ndarray:
    m = np.zeros((s, s))
    m[:, s - 1] = 1.0
    return m


def _index_last_column(s: int) -> np.ndarray:
    m = np.zeros((s, s))
    m[:, s - 1] = np.arange(s)
    return m


@dataclass(frozen=True)
class ReducedSystem:
    """The s-dimensional eliminated system plus the p_s recovery row.

    V(z) = v0 + z v1 and U(z) = u0 + z u1 act on the row vector
    (p_0, ..., p_{s-1}); the eliminated component is recovered as

        p_s(z) = (sum_i p_i'(z) - sum_i g_i p_i(z)) / den

    with g_i = lt*pt_a + i*tht*mt and den = lt*at_0 + s*tht*mt.
    """

    s: int
    v0: np.ndarray
    v1: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    kappa0: float
    kappa1: float
    recovery_g: np.ndarray
    recovery_den: float
    params: ModelParams

    def v_at(self, z) -> np.ndarray:
        return self.v0 + z * self.v1

    def u_at(self, z) -> np.ndarray:
        return self.u0 + z * self.u1

    def kappa(self, z):
        return self.kappa0 + self.kappa1 * z

    def recover_ps(self, p: np.ndarray, dp: np.ndarray) -> float:
        """Eliminated component from the first s values of p and p'."""
        return (float(np.sum(dp[: self.s]))
                - float(self.recovery_g @ p[: self.s])) / self.recovery_den


def reduce_persistent(params: ModelParams) -> ReducedSystem:
    """Eliminate p_s(z) in the persistent case.

    Raises:
        NotPersistent: if blocked retrials can abandon (ab > 0).
        NoOrbitInflow: if lambda*at_0 + s*mu*tht = 0 (nothing ever enters
            the orbit from a blocked state, so the cut equation degenerates).
    """
    require_valid(params)
    if params.ab > 0:
        raise NotPersistent("reduction needs ab = 0", ab=params.ab)
    if params.nu <= 0:
        raise NotApplicable("scaled system needs nu > 0")
    s = params.s
    lt, mt = params.lam / params.nu, params.mu / params.nu
    den = lt * params.at_0 + s * params.tht * mt
    if den <= 0:
        raise NoOrbitInflow("cut equation degenerates", denominator=den)
    kden = den
    kappa0 = s * mt * params.thb / kden
    kappa1 = s * mt * params.tht / kden
    ell = _ones_last_column(s)
    ell1 = _index_last_column(s)
    t_plus = np.diag(np.ones(s - 1), 1)
    v0 = -params.pb * np.eye(s) - params.p * t_plus - kappa0 * ell
    v1 = np.eye(s) - kappa1 * ell
    sigma = params.p_a + params.pt_a
    i = np.arange(s, dtype=float)
    u0 = np.diag(-lt * sigma - i * mt * (params.thb + params.tht)) \
        + lt * params.p_a * t_plus \
        + np.diag(i[1:] * mt * params.thb, -1)
    u1 = np.diag(np.full(s, lt * params.pt_a)) \
        + np.diag(i[1:] * mt * params.tht, -1)
    corr = lt * params.pt_a * ell + params.tht * mt * ell1
    u0 = u0 - kappa0 * corr
    u1 = u1 - kappa1 * corr
    return ReducedSystem(
        s=s, v0=v0, v1=v1, u0=u0, u1=u1, kappa0=kappa0, kappa1=kappa1,
        recovery_g=lt * params.pt_a + i * params.tht * mt,
        recovery_den=den, params=params)


@dataclass(frozen=True)
class OkuboSystem:
    """Constant-coefficient system p'(z)(zI - T) = p(z) U of dimension s.

    ``xi`` is the standardized load p*rho = 1/rho_bar; it coincides with the
    ergodicity parameter when there is no feedback (theta = 0).
    """

    s: int
    t: np.ndarray
    u: np.ndarray
    pbar: float
    p: float
    rho_tilde: float
    rho_bar: float
    lt: float
    xi: float
    standardized: bool
    params: ModelParams

    def v_at(self, z) -> np.ndarray:
        return z * np.eye(self.s) - self.t

    def u_at(self, z) -> np.ndarray:
        return self.u

    def standard_variable(self, z):
        """Affine map y = (z - pbar)/p carrying this system to standard form."""
        if self.p == 0:
            raise PureOrbit("retrials never enter service")
        return (z - self.pbar) / self.p

    def spectrum(self) -> tuple[tuple[float, int], ...]:
        """Exact eigenvalues with multiplicities (T is upper triangular)."""
        rt = self.rho_bar if self.standardized else self.rho_tilde
        return ((self.pbar, self.s - 1), (self.pbar + rt, 1))

    def power_identity_residual(self) -> float:
        """Relative size of T^s - rho_eff T^(s-1).

        The identity holds verbatim for the standardized system; the
        unstandardized T satisfies the shifted version
        (T - pbar I)^s = rho_tilde (T - pbar I)^(s-1).
        """
        if self.standardized:
            base = np.linalg.matrix_power(self.t, self.s - 1)
            diff = self.t @ base - self.rho_bar * base
            scale = max(1.0, float(np.max(np.abs(self.rho_bar * base))))
        else:
            shifted = self.t - self.pbar * np.eye(self.s)
            base = np.linalg.matrix_power(shifted, self.s - 1)
            diff = shifted @ base - self.rho_tilde * base
            scale = max(1.0, float(np.max(np.abs(self.rho_tilde * base))))
        return float(np.max(np.abs(diff))) / scale

    def erlang_rowsum_residual(self) -> float:
        """Row sums of U + lt*E (E = corner unit), zero for the loss chain."""
        killed = self.u.copy()
        killed[self.s - 1, self.s - 1] += self.lt
        return float(np.max(np.abs(killed.sum(axis=1))))

    def jordan_blocks(self, tol: float = 1e-10) -> dict:
        """Jordan block sizes per eigenvalue via rank tests of (T - w I)^k."""
        out = {}
        for w, mult in self.spectrum():
            shifted = self.t - w * np.eye(self.s)
            ranks = [self.s]
            power = np.eye(self.s)
            for _ in range(mult):
                power = power @ shifted
                scale = float(np.max(np.abs(power)))
                if scale == 0.0:
                    ranks.append(0)
                    continue
                ranks.append(int(np.linalg.matrix_rank(power, tol=tol * scale)))
            sizes = []
            # blocks of size >= k: rank((T-wI)^(k-1)) - rank((T-wI)^k)
            ge = [ranks[k - 1] - ranks[k] for k in range(1, len(ranks))]
            for k, (count, nxt) in enumerate(zip(ge, ge[1:] + [0]), start=1):
                sizes.extend([k] * (count - nxt))
            out[w] = sorted(sizes, reverse=True)
        return out


def okubo_form(params: ModelParams) -> OkuboSystem:
    """Constant-coefficient form of the reduced system.

    Requires ab = 0, tht = 0, pt_a = 0 and p_a = 1, which make kappa
    constant (= rho_tilde) and U independent of z. theta > 0 (re-serve
    feedback) is allowed: it only rescales the effective service rate in
    mb = mt*thb.

    Raises:
        NotOkubo: when the structural preconditions fail.
    """
    require_valid(params)
    if params.ab > 0 or params.tht != 0 or params.pt_a != 0 \
            or params.p_a != 1:
        raise NotOkubo(
            "needs ab = 0, tht = 0, pt_a = 0, p_a = 1",
            ab=params.ab, tht=params.tht, pt_a=params.pt_a, p_a=params.p_a)
    d = derive(params)  # raises undefined-rho for thb = 0 / lambda_ob = 0
    s = params.s
    t = params.pb * np.eye(s) + params.p * np.diag(np.ones(s - 1), 1)
    t[:, s - 1] += d.rho_tilde
    i = np.arange(s, dtype=float)
    u = np.diag(-d.lt - i * d.mb) + np.diag(np.full(s - 1, d.lt), 1) \
        + np.diag(i[1:] * d.mb, -1)
    return OkuboSystem(
        s=s, t=t, u=u, pbar=params.pb, p=params.p,
        rho_tilde=d.rho_tilde, rho_bar=d.rho_bar, lt=d.lt,
        xi=params.p * d.rho, standardized=False, params=params)


def standardize(sys: OkuboSystem) -> OkuboSystem:
    """Affine change y = (z - pbar)/p: T becomes superdiagonal ones plus a
    rho_bar = rho_tilde/p last column; U is unchanged.

    Raises:
        PureOrbit: when p = 0 (the change of variable collapses).
    """
    if sys.standardized:
        return sys
    if sys.p == 0:
        raise PureOrbit("retrials never enter service")
    s = sys.s
    t = np.diag(np.ones(s - 1), 1)
    t[:, s - 1] += sys.rho_bar
    return OkuboSystem(
        s=s, t=t, u=sys.u.copy(), pbar=0.0, p=1.0,
        rho_tilde=sys.rho_bar, rho_bar=sys.rho_bar, lt=sys.lt,
        xi=sys.xi, standardized=True, params=sys.params)


@dataclass(frozen=True)
class ResolventDecomposition:
    """Partial fractions of R(y) = U (yI - T)^(-1) for the standardized form.

    R(y) = D/(y - rho_bar) + sum_{m=1}^{s-1} D_m / y^m, with
    D = rho_bar^(1-s) U T^(s-1) (rank one, last column only) and
    D_m = U T^(m-1) - rho_bar^(m-s) U T^(s-1). ``d1`` and ``d2`` are the
    m = 1, 2 terms; ``higher`` collects m >= 3, which vanish for s = 3 but
    are genuinely nonzero from s = 4 on (the pole at 0 has order s - 1).
    """

    d: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    higher: tuple[np.ndarray, ...]
    rho_bar: float
    t: np.ndarray
    u: np.ndarray
    poincare_rank_at_zero: int
    poincare_rank_at_pole: int

    def terms(self) -> list[np.ndarray]:
        return [self.d1, self.d2, *self.higher]

    def evaluate(self, y) -> np.ndarray:
        out = self.d / (y - self.rho_bar)
        for m, dm in enumerate(self.terms(), start=1):
            out = out + dm / y ** m
        return out

    def identity_residual(self, y) -> float:
        """Relative gap between the partial fractions and the dense inverse."""
        s = self.t.shape[0]
        direct = self.u @ np.linalg.inv(y * np.eye(s) - self.t)
        scale = max(1.0, float(np.max(np.abs(direct))))
        return float(np.max(np.abs(self.evaluate(y) - direct))) / scale


def resolvent_decomposition(sys: OkuboSystem,
                            tol: float = 1e-12) -> ResolventDecomposition:
    """Expand U (yI - T)^(-1) using T^s = rho_bar T^(s-1).

    Raises:
        NotApplicable: for an unstandardized system.
        WrongDimension: for s < 3 (no principal part to split off).
    """
    if not sys.standardized:
        raise NotApplicable("standardize the system first")
    if sys.s < 3:
        raise WrongDimension("decomposition defined for s >= 3", s=sys.s)
    s, rb = sys.s, sys.rho_bar
    ut_top = sys.u @ np.linalg.matrix_power(sys.t, s - 1)
    d = rb ** (1 - s) * ut_top
    terms = []
    power = np.eye(s)
    for m in range(1, s):
        terms.append(sys.u @ power - rb ** (m - s) * ut_top)
        power = power @ sys.t
    scale = max(1.0, float(np.max(np.abs(sys.u))))
    nonzero = [m for m, dm in enumerate(terms, start=1)
               if float(np.max(np.abs(dm))) > tol * scale]
    rank0 = max(nonzero) - 1 if nonzero else 0
    return ResolventDecomposition(
        d=d, d1=terms[0], d2=terms[1], higher=tuple(terms[2:]),
        rho_bar=rb, t=sys.t, u=sys.u,
        poincare_rank_at_zero=rank0, poincare_rank_at_pole=0)
