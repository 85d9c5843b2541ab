"""Generating-function differential systems and residual checks.

With p(z) = (p_0(z), ..., p_s(z)), p_i(z) = sum_j pi_{i,j} z^j, a stationary
distribution satisfies the linear ODE system

    p'(z) V(z) = p(z) U(z) + pi_0 (C0t - C0/z),

where V(z) = z*Ct - C and U(z) = B + z*A - At + C0/z - C0t (the full
variant, stored with the raw block entries). The simplified variant replaces
the last column of each matrix by the orbit-level cut equation (the column
sum with the common factor z-1 cancelled) and is stored nu-scaled, so its
last V column is (1, ..., 1, ab).

The module also evaluates the bivariate identity satisfied by
phi(y, z) = sum_i y^i p_i(z), the determinant factorizations of V, and the
factorial-moment recursion of Markov-modulated infinite-server queues.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (DivergenceRisk, NotApplicable, SingularShift,
                     UndefinedRho, UnsupportedVariant)
from .model import ModelParams, build_blocks, derive, require_valid
from .qbd import StationaryDistribution, left_null_vector

RESIDUAL_GRID = tuple(np.round(np.arange(0.1, 1.0, 0.1), 10))


@dataclass(frozen=True)
class PolyMatrixSystem:
    """Matrix polynomial pair V(z) = v0 + z v1, U(z) = u0 + z u1 + u_zinv/z.

    ``inhom_c0``/``inhom_c0t`` carry the constant-retrial inhomogeneity
    pi_0 (C0t - C0/z); they are zero unless variant="full" with C0 != 0.
    """

    variant: str
    dim: int
    v0: np.ndarray
    v1: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    u_zinv: np.ndarray
    inhom_c0: np.ndarray
    inhom_c0t: np.ndarray
    params: ModelParams

    def v_at(self, z) -> np.ndarray:
        return self.v0 + z * self.v1

    def u_at(self, z) -> np.ndarray:
        u = self.u0 + z * self.u1
        if np.any(self.u_zinv):
            u = u + self.u_zinv / z
        return u

    def inhom_at(self, z, pi0: np.ndarray) -> np.ndarray:
        return pi0 @ (self.inhom_c0t - self.inhom_c0 / z)


def build_system(params: ModelParams, variant: str,
                 c0: np.ndarray | None = None) -> PolyMatrixSystem:
    """Construct the full or simplified variant.

    Args:
        params: valid model parameters (nu > 0 for the simplified variant).
        variant: "full" or "simplified"; the reduced and okubo variants are
            built by the reduction module.
        c0: optional constant-retrial matrix (full variant only).

    Raises:
        UnsupportedVariant: for variant names this module does not build.
        NotApplicable: simplified variant with c0 != 0 or nu = 0.
    """
    require_valid(params)
    blocks = build_blocks(params, c0=c0)
    n = blocks.dim
    s = params.s
    zero = np.zeros((n, n))
    if variant == "full":
        return PolyMatrixSystem(
            variant=variant, dim=n,
            v0=-blocks.c, v1=blocks.ct,
            u0=blocks.b - blocks.at - blocks.c0t, u1=blocks.a,
            u_zinv=blocks.c0.copy(),
            inhom_c0=blocks.c0.copy(), inhom_c0t=blocks.c0t,
            params=params)
    if variant == "simplified":
        if blocks.has_c0():
            raise NotApplicable("constant retrial requires the full variant")
        if params.nu <= 0:
            raise NotApplicable("simplified variant needs nu > 0")
        nu = params.nu
        v0 = -blocks.c / nu
        v1 = blocks.ct / nu
        u0 = (blocks.b - blocks.at) / nu
        u1 = blocks.a / nu
        # orbit-level cut equation in place of the summed last column
        v0[:, s] = 1.0
        v0[s, s] = params.ab
        v1[:, s] = 0.0
        u0[:, s] = blocks.a.sum(axis=1) / nu
        u1[:, s] = 0.0
        return PolyMatrixSystem(
            variant=variant, dim=n, v0=v0, v1=v1, u0=u0, u1=u1,
            u_zinv=zero, inhom_c0=zero, inhom_c0t=zero, params=params)
    if variant in ("reduced", "okubo"):
        raise UnsupportedVariant(
            f"variant {variant!r} is built by the reduction module")
    raise UnsupportedVariant(f"unknown variant {variant!r}")


@dataclass(frozen=True)
class GfValue:
    z: complex
    p: np.ndarray
    dp: np.ndarray
    tail_bound: float


def _series(dist: StationaryDistribution, z):
    j = np.arange(dist.j_max + 1)
    zj = np.power(complex(z) if isinstance(z, complex) else float(z), j)
    p = zj @ dist.pi
    dzj = np.zeros_like(zj)
    dzj[1:] = j[1:] * zj[:-1]
    dp = dzj @ dist.pi
    return p, dp


def eval_gf(dist: StationaryDistribution, z) -> GfValue:
    """Evaluate p(z) and p'(z) by truncated series.

    The reported tail bound is tail_mass * max(1, |z|)**J with the tail mass
    extrapolated geometrically from the last two computed levels.

    Raises:
        DivergenceRisk: when |z| >= z_r (radius of convergence).
    """
    if dist.params is not None:
        try:
            z_r = derive(dist.params).z_r
            if abs(z) >= z_r:
                raise DivergenceRisk("outside the certified disk",
                                     z=z, z_r=z_r)
        except UndefinedRho:
            pass
    p, dp = _series(dist, z)
    bound = dist.tail_mass() * max(1.0, abs(z)) ** dist.j_max
    return GfValue(z=z, p=p, dp=dp, tail_bound=bound)


def ode_residual(dist: StationaryDistribution, params: ModelParams,
                 variant: str, z: float,
                 c0: np.ndarray | None = None) -> float:
    """Sup-norm of p'(z)V(z) - p(z)U(z) - inhomogeneity for one variant.

    For the reduced and okubo variants only the first s components enter and
    the system matrices come from the reduction module.
    """
    p, dp = _series(dist, z)
    if variant in ("full", "simplified"):
        sys = build_system(params, variant, c0=c0)
        res = dp @ sys.v_at(z) - p @ sys.u_at(z) - sys.inhom_at(z, dist.pi[0])
        return float(np.max(np.abs(res)))
    if variant == "reduced":
        from .reduction import reduce_persistent
        red = reduce_persistent(params)
        s = params.s
        res = dp[:s] @ red.v_at(z) - p[:s] @ red.u_at(z)
        return float(np.max(np.abs(res)))
    if variant == "okubo":
        from .reduction import okubo_form
        sys = okubo_form(params)
        s = params.s
        res = dp[:s] @ (z * np.eye(s) - sys.t) - p[:s] @ sys.u
        return float(np.max(np.abs(res)))
    raise UnsupportedVariant(f"unknown variant {variant!r}")


def bivariate_residual(dist: StationaryDistribution, params: ModelParams,
                       y: float, z: float) -> float:
    """Absolute residual of the bivariate identity at (y, z).

    Both sides vanish identically at (y, z) = (1, 1) by conservation.
    """
    lam, mu, nu, s = params.lam, params.mu, params.nu, params.s
    pv, dpv = _series(dist, z)
    ys = np.power(float(y), np.arange(s + 1))
    dys = np.zeros_like(ys)
    dys[1:] = np.arange(1, s + 1) * ys[:-1]
    phi = float(ys @ pv)
    phi_z = float(ys @ dpv)
    phi_y = float(dys @ pv)
    ps, ps_z = float(pv[s]), float(dpv[s])
    sigma = params.p_a + params.pt_a
    lam_ob = lam * params.at_0
    lhs = nu * (z - params.pb - params.p * y) * phi_z \
        + nu * y**s * (params.pb - params.ab + z * (params.ab - 1.0)
                       + params.p * y) * ps_z
    rhs = lam * phi * (params.pt_a * z - sigma + params.p_a * y) \
        + mu * phi_y * (params.thb + params.tht * z
                        - y * (params.thb + params.tht)) \
        + y**s * (z * (lam_ob - lam * params.pt_a)
                  - (lam_ob - lam * sigma) - lam * params.p_a * y) * ps
    return abs(lhs - rhs)


def det_v(params: ModelParams, variant: str, z,
          c0: np.ndarray | None = None):
    """Numeric determinant of V(z), reported in the nu-scaled convention.

    The full and simplified variants are stored unscaled, so their numeric
    determinant is divided by nu**(s+1) to match the dimensionless closed
    factorizations; the reduced variant is stored scaled already.
    """
    if variant in ("full", "simplified"):
        sys = build_system(params, variant, c0=c0)
        if params.nu <= 0:
            raise NotApplicable("determinant convention needs nu > 0")
        scale = params.nu ** sys.dim if variant == "full" else 1.0
        return complex(np.linalg.det(sys.v_at(z).astype(complex))) / scale
    if variant == "reduced":
        from .reduction import reduce_persistent
        red = reduce_persistent(params)
        return complex(np.linalg.det(red.v_at(z).astype(complex)))
    raise UnsupportedVariant(f"no determinant for variant {variant!r}")


def det_v_formula(params: ModelParams, variant: str, z):
    """Closed-form factorization of the nu-scaled det V(z).

    full:       ab * (z - pb)**s * (z - 1)
    simplified: ab * (z - pb)**s
    reduced:    (z - pb)**(s-1) * r0/(r0 + tht) * (z - z_r)

    Raises:
        UndefinedRho: reduced variant with thb = 0 or lambda_ob = 0.
    """
    s = params.s
    if variant == "full":
        return params.ab * (z - params.pb) ** s * (z - 1.0)
    if variant == "simplified":
        return params.ab * (z - params.pb) ** s
    if variant == "reduced":
        d = derive(params)
        return (z - params.pb) ** (s - 1) * d.r0 / (d.r0 + params.tht) \
            * (z - d.z_r)
    raise UnsupportedVariant(f"no determinant for variant {variant!r}")


@dataclass(frozen=True)
class SingularPoint:
    location: float
    multiplicity: int
    kind: str  # "regular" or "irregular"


@dataclass(frozen=True)
class SingularityReport:
    points: tuple[SingularPoint, ...]

    def dominant(self) -> SingularPoint:
        return max(self.points, key=lambda pt: pt.location)


def singularities(params: ModelParams) -> SingularityReport:
    """Singular points of the reduced system: pb (order s-1) and z_r.

    pb is an irregular singular point for s >= 3 and a regular one for
    s = 2; it is absent for s = 1.
    """
    d = derive(params)
    pts = []
    if params.s >= 2:
        kind = "irregular" if params.s >= 3 else "regular"
        pts.append(SingularPoint(params.pb, params.s - 1, kind))
    pts.append(SingularPoint(d.z_r, 1, "regular"))
    return SingularityReport(tuple(pts))


def _as_diag(m, n: int) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim == 0:
        return np.eye(n) * float(m)
    if m.ndim == 1:
        return np.diag(m)
    return m


def mmoo_moments(a, b, c, kmax: int) -> np.ndarray:
    """Conditional factorial moments of a Markov-modulated M/M/inf queue.

    Phase process with generator ``b``, phase-dependent arrival rates
    ``a`` (diagonal) and per-customer service rates ``c`` (diagonal). The
    row vectors m_k = (E[Q(Q-1)...(Q-k+1); phase=i])_i satisfy

        m_0 B = 0,   sum m_0 = 1,   m_k (k C - B) = k m_{k-1} A.

    Args:
        a: arrival-rate diagonal (scalar, vector, or diagonal matrix).
        b: conservative irreducible phase generator (scalar 0 for one phase).
        c: service-rate diagonal, same conventions as ``a``.
        kmax: highest factorial moment order.

    Returns:
        Array of shape (kmax+1, n) with rows m_0..m_kmax.

    Raises:
        SingularShift: when some k C - B is singular.
    """
    b = np.atleast_2d(np.asarray(b, dtype=float))
    n = b.shape[0]
    a = _as_diag(a, n)
    c = _as_diag(c, n)
    if n == 1:
        m0 = np.ones(1)
    else:
        m0 = left_null_vector(b)
        m0 = m0 / m0.sum()
    out = np.zeros((kmax + 1, n))
    out[0] = m0
    for k in range(1, kmax + 1):
        shift = k * c - b
        try:
            out[k] = np.linalg.solve(shift.T, k * (out[k - 1] @ a))
        except np.linalg.LinAlgError as exc:
            raise SingularShift("moment shift matrix is singular", k=k) from exc
        if not np.all(np.isfinite(out[k])):
            raise SingularShift("moment recursion overflowed", k=k)
    return out
