"""Model parameters, derived rates, ergodicity classification, QBD blocks.

The chain lives on states (i, j): i in 0..s busy servers, j >= 0 customers in
orbit. Transitions:

* arrivals (rate lam): with a free server the customer joins service w.p.
  ``p_a``, joins the orbit w.p. ``pt_a``, or balks w.p. ``pb_a``; with all
  servers busy it joins the orbit w.p. ``at_0`` and balks otherwise;
* service completions (rate i*mu): the customer is re-served w.p. ``theta``,
  leaves w.p. ``thb``, or moves to the orbit w.p. ``tht``;
* orbit attempts (rate j*nu): with a free server the customer enters service
  w.p. ``p`` or abandons w.p. ``pb``; with all servers busy it stays w.p.
  ``alpha`` or abandons w.p. ``ab``.

Level j >= 1 of the generator decomposes into blocks A (up), B_j (local) and
C_j (down) with affine level dependence: C_j = j*C + C0, B_j derived from
conservativity. C0 is an optional constant-retrial term, zero by default.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import UndefinedRho, UnsupportedK

PROB_TOL = 1e-12  # splits must sum to 1 within this


@dataclass(frozen=True)
class ModelParams:
    """All rates and routing probabilities of the retrial model.

    Defaults give the classic single-server retrial queue: every arrival that
    finds the server free joins it, blocked arrivals always enter orbit,
    retrials always succeed when the server is free, and served customers
    always leave.
    """

    lam: float
    mu: float
    nu: float
    s: int = 1
    K: int = 0
    p_a: float = 1.0
    pt_a: float = 0.0
    pb_a: float = 0.0
    at_0: float = 1.0
    p: float = 1.0
    pb: float = 0.0
    alpha: float = 1.0
    ab: float = 0.0
    theta: float = 0.0
    thb: float = 1.0
    tht: float = 0.0

    def asdict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def require_valid(self) -> None:
        require_valid(self)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(params: ModelParams) -> ValidationReport:
    """Check rate signs and the three routing splits.

    Returns:
        A report listing every violated invariant; empty means valid.
    """
    v: list[str] = []
    for name in ("lam", "mu", "nu"):
        x = getattr(params, name)
        if not math.isfinite(x):
            v.append(f"non-finite rate {name}={x}")
        elif x < 0:
            v.append(f"negative rate {name}={x}")
    if params.s < 1 or params.s != int(params.s):
        v.append(f"server count must be a positive integer, got s={params.s}")
    if params.K != int(params.K) or params.K < 0:
        v.append(f"waiting spaces must be a nonnegative integer, got K={params.K}")
    probs = ("p_a", "pt_a", "pb_a", "at_0", "p", "pb", "alpha", "ab",
             "theta", "thb", "tht")
    for name in probs:
        x = getattr(params, name)
        if not (math.isfinite(x) and -PROB_TOL <= x <= 1 + PROB_TOL):
            v.append(f"probability out of range {name}={x}")
    splits = (
        ("acceptance split", params.p_a + params.pt_a + params.pb_a),
        ("retrial split", params.p + params.pb),
        ("blocked-retrial split", params.alpha + params.ab),
        ("feedback split", params.theta + params.thb + params.tht),
    )
    for name, total in splits:
        if abs(total - 1.0) > PROB_TOL:
            v.append(f"{name} not stochastic (sums to {total!r})")
    return ValidationReport(tuple(v))


def require_valid(params: ModelParams) -> None:
    report = validate(params)
    if not report.ok:
        raise ValueError("invalid parameters: " + "; ".join(report.violations))


@dataclass(frozen=True)
class DerivedRates:
    """Dimensionless rates and the singularity/ergodicity quantities.

    ``rho`` is the offered orbit load lambda_ob/(s*mu*thb); ``r0`` = rho*thb
    is the raw blocking load lambda_ob/(s*mu); ``z_r`` is the dominant
    regular singularity of the generating-function system and ``xi`` the
    ergodicity parameter, linked by z_r = 1 + (1-xi)/r0 so that xi < 1 iff
    z_r > 1. ``kappa0 + kappa1*z`` is the column-elimination factor
    s*mu*(thb + tht*z)/(lambda_ob + s*mu*tht) used by the persistent
    reduction.
    """

    lambda_ob: float
    lambda_o: float
    lt: float
    mt: float
    mb: float
    r0: float
    rho: float
    rho_tilde: float
    rho_bar: float
    xi: float
    z_r: float
    kappa0: float
    kappa1: float

    def kappa(self, z):
        return self.kappa0 + self.kappa1 * z

    def theta_k(self, k: int, z):
        """Diagonal entry of the scaled local matrix for phase k < s.

        Equals lt*(z*pt_a - 1) - k*mt*(thb + tht) when arrivals never balk;
        the general form subtracts lt*(p_a + pt_a) instead of lt.
        """
        return (self._lt_pt_a * z - self._lt_sigma
                - k * self.mt * self._thb_tht)

    # stashed by derive() for theta_k
    _lt_pt_a: float = 0.0
    _lt_sigma: float = 0.0
    _thb_tht: float = 0.0


def derive(params: ModelParams) -> DerivedRates:
    """Compute the derived rates.

    Raises:
        UndefinedRho: when thb = 0, lambda*at_0 = 0 or nu <= 0, since the
            load rho and the singularity z_r are then undefined.
    """
    require_valid(params)
    lam, mu, nu, s = params.lam, params.mu, params.nu, params.s
    lambda_ob = lam * params.at_0
    if params.thb == 0.0:
        raise UndefinedRho("load undefined: no departures after service", thb=0)
    if lambda_ob == 0.0:
        raise UndefinedRho("load undefined: blocked arrivals never join orbit",
                           lam=lam, at_0=params.at_0)
    if nu <= 0.0:
        raise UndefinedRho("load undefined: orbit is frozen", nu=nu)
    lt, mt = lam / nu, mu / nu
    mb = mt * params.thb
    r0 = lambda_ob / (s * mu)
    rho = r0 / params.thb
    rho_tilde = 1.0 / rho
    rho_bar = rho_tilde / params.p if params.p > 0 else math.inf
    xi = params.p * (r0 + params.tht) + params.theta
    z_r = params.pb + (1.0 + (params.tht / params.thb) * params.pb) / rho
    kden = lambda_ob / nu + s * params.tht * mt
    kappa0 = s * mt * params.thb / kden
    kappa1 = s * mt * params.tht / kden
    return DerivedRates(
        lambda_ob=lambda_ob, lambda_o=lam * params.pt_a, lt=lt, mt=mt, mb=mb,
        r0=r0, rho=rho, rho_tilde=rho_tilde, rho_bar=rho_bar, xi=xi, z_r=z_r,
        kappa0=kappa0, kappa1=kappa1,
        _lt_pt_a=lt * params.pt_a,
        _lt_sigma=lt * (params.p_a + params.pt_a),
        _thb_tht=params.thb + params.tht,
    )


@dataclass(frozen=True)
class HanschkeCheck:
    """The pure-retrial ergodicity inequality (lambda_ob/(s*mu))*nu*p < nu."""

    applies: bool
    satisfied: bool | None = None
    agrees_with_xi: bool | None = None


@dataclass(frozen=True)
class ErgodicityVerdict:
    verdict: str  # ergodic-certain | ergodic-conjectural | not-ergodic
    reason: str
    xi: float | None = None
    z_r: float | None = None
    hanschke: HanschkeCheck = HanschkeCheck(applies=False)

    @property
    def ergodic(self) -> bool:
        return self.verdict.startswith("ergodic")


def _orbit_inflow(params: ModelParams) -> bool:
    # any nonzero entry of A: direct-to-orbit arrivals, blocked arrivals,
    # or feedback-to-orbit
    return (params.lam * params.pt_a > 0 and params.s >= 1) \
        or params.lam * params.at_0 > 0 \
        or params.mu * params.tht > 0


def _hanschke(params: ModelParams) -> HanschkeCheck:
    if params.theta != 0.0 or params.tht != 0.0:
        return HanschkeCheck(applies=False)
    if params.nu <= 0 or params.mu <= 0 or params.lam * params.at_0 <= 0:
        return HanschkeCheck(applies=False)
    lhs = (params.lam * params.at_0 / (params.s * params.mu)) * params.nu * params.p
    satisfied = lhs < params.nu  # nu*p + nu*pb = nu
    try:
        xi = derive(params).xi
        agrees = satisfied == (xi < 1.0)
    except UndefinedRho:
        agrees = None
    return HanschkeCheck(applies=True, satisfied=satisfied, agrees_with_xi=agrees)


def ergodicity(params: ModelParams) -> ErgodicityVerdict:
    """Classify the model.

    The verdict is certain when the orbit never grows or when blocked
    retrials may abandon (ab > 0); it rests on the dominant-singularity
    criterion z_r > 1 (equivalently xi < 1) in the persistent case ab = 0,
    where ergodicity is conjectural.

    Raises:
        UndefinedRho: persistent case with thb = 0 or lambda_ob = 0, where
            z_r is undefined.
    """
    require_valid(params)
    han = _hanschke(params)
    if not _orbit_inflow(params):
        return ErgodicityVerdict("ergodic-certain", "orbit never grows",
                                 hanschke=han)
    if params.nu == 0.0:
        return ErgodicityVerdict("not-ergodic",
                                 "orbit receives customers but never drains (nu=0)",
                                 hanschke=han)
    if params.ab > 0.0:
        verdict = ErgodicityVerdict("ergodic-certain",
                                    "blocked retrials abandon at rate j*nu*ab",
                                    hanschke=han)
        try:
            d = derive(params)
            verdict = dataclasses.replace(verdict, xi=d.xi, z_r=d.z_r)
        except UndefinedRho:
            pass
        return verdict
    d = derive(params)  # may raise undefined-rho
    if d.z_r > 1.0:
        return ErgodicityVerdict(
            "ergodic-conjectural",
            f"dominant singularity z_r={d.z_r:.6g} lies outside the unit disk",
            xi=d.xi, z_r=d.z_r, hanschke=han)
    return ErgodicityVerdict(
        "not-ergodic",
        f"dominant singularity z_r={d.z_r:.6g} <= 1 (xi={d.xi:.6g} >= 1)",
        xi=d.xi, z_r=d.z_r, hanschke=han)


@dataclass(frozen=True)
class QbdBlocks:
    """Generator blocks with affine level dependence.

    For j >= 1 the level blocks are A_j = A, C_j = j*C + C0 and
    B_j = B - At - j*Ct - C0t, where At, Ct, C0t are the diagonal row-sum
    matrices of A, C, C0; at the boundary B_0 = B - At and C_0 = 0. B is
    itself conservative (zero row sums), so [C_j | B_j | A_j] has exactly
    zero row sums at every level.
    """

    params: ModelParams
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    c0: np.ndarray

    @property
    def dim(self) -> int:
        return self.params.s + 1

    @property
    def at(self) -> np.ndarray:
        return np.diag(self.a.sum(axis=1))

    @property
    def ct(self) -> np.ndarray:
        return np.diag(self.c.sum(axis=1))

    @property
    def c0t(self) -> np.ndarray:
        return np.diag(self.c0.sum(axis=1))

    def a_j(self, j: int) -> np.ndarray:
        return self.a

    def b_j(self, j: int) -> np.ndarray:
        out = self.b - self.at
        if j >= 1:
            out = out - j * self.ct - self.c0t
        return out

    def c_j(self, j: int) -> np.ndarray:
        if j == 0:
            return np.zeros_like(self.c)
        return j * self.c + self.c0

    def has_c0(self) -> bool:
        return bool(np.any(self.c0))


def build_blocks(params: ModelParams, c0: np.ndarray | None = None) -> QbdBlocks:
    """Construct the blocks A, B, C (and optional constant-retrial C0).

    Args:
        params: validated model parameters with K = 0.
        c0: optional nonnegative constant-retrial matrix, same shape and
            sparsity role as C; defaults to zero.

    Raises:
        UnsupportedK: if params.K != 0.
        ValueError: if params are invalid or c0 is malformed.
    """
    require_valid(params)
    if params.K != 0:
        raise UnsupportedK("only K = 0 is supported", K=params.K)
    lam, mu, nu, s = params.lam, params.mu, params.nu, params.s
    n = s + 1
    a = np.zeros((n, n))
    b = np.zeros((n, n))
    c = np.zeros((n, n))
    for i in range(s):
        a[i, i] = lam * params.pt_a
        b[i, i + 1] = lam * params.p_a
        c[i, i] = nu * params.pb
        c[i, i + 1] = nu * params.p
    a[s, s] = lam * params.at_0
    for i in range(1, n):
        a[i, i - 1] = i * mu * params.tht
        b[i, i - 1] = i * mu * params.thb
    c[s, s] = nu * params.ab
    np.fill_diagonal(b, np.diag(b) - b.sum(axis=1))
    if c0 is None:
        c0 = np.zeros((n, n))
    else:
        c0 = np.asarray(c0, dtype=float)
        if c0.shape != (n, n) or np.any(c0 < 0):
            raise ValueError("c0 must be a nonnegative matrix of shape "
                             f"({n}, {n})")
    return QbdBlocks(params=params, a=a, b=b, c=c, c0=c0)
