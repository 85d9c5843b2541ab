"""Stationary distribution of the level-dependent QBD by backward recursion.

The balance equations pi_{j-1} A + pi_j B_j + pi_{j+1} C_{j+1} = 0 (j >= 1)
and pi_0 B_0 + pi_1 C_1 = 0 are solved by the matrix-continued-fraction
scheme: seed R_{J+1} = 0, recurse R_j = A (-(B_j + R_{j+1} C_{j+1}))^{-1}
downward, take pi_0 as the left null vector of B_0 + R_1 C_1 and propagate
pi_j = pi_{j-1} R_j. The truncation level J doubles until the normalized
distribution stabilizes and the mass at level J is negligible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (NoNullVector, NotErgodic, SingularBlock, TruncationLimit,
                     UndefinedRho)
from .model import (ErgodicityVerdict, ModelParams, QbdBlocks, build_blocks,
                    ergodicity)

SLOW_MIXING_MARGIN = 1e-3  # z_r - 1 below this earns a warning
CLAMP_TOL = 1e-14          # entries in (-CLAMP_TOL, 0) are set to zero


def left_null_vector(m: np.ndarray) -> np.ndarray:
    """Left null vector of a singular matrix, scaled to sum to 1.

    Replaces the column with the weakest QR pivot by all-ones, which turns
    the rank-deficient system x m = 0 into the full-rank system
    x m' = e_k expressing both the null property and normalization.

    Raises:
        NoNullVector: if the patched system is still numerically singular.
    """
    m = np.asarray(m, dtype=float)
    _, r = np.linalg.qr(m)
    k = int(np.argmin(np.abs(np.diag(r))))
    patched = m.copy()
    patched[:, k] = 1.0
    e = np.zeros(m.shape[0])
    e[k] = 1.0
    try:
        x = np.linalg.solve(patched.T, e)
    except np.linalg.LinAlgError as exc:
        raise NoNullVector("boundary system is rank deficient") from exc
    if not np.all(np.isfinite(x)):
        raise NoNullVector("boundary null vector is not finite")
    resid = float(np.max(np.abs(x @ m)))
    scale = float(np.max(np.abs(m))) * float(np.max(np.abs(x))) + 1e-300
    if resid > 1e-8 * scale:
        raise NoNullVector("matrix has no left null vector",
                           residual=resid)
    return x


@dataclass(frozen=True)
class SolverOptions:
    j0: int = 64
    jmax: int = 2 ** 20
    eps: float = 1e-12
    tail_eps: float = 1e-12
    jmin: int | None = None
    check_ergodicity: bool = True


@dataclass(frozen=True)
class RLadder:
    """Level-entry matrices R_1..R_J with pi_j = pi_{j-1} R_j."""

    rs: list  # rs[j] is R_j for j = 1..J; rs[0] unused (None)
    j: int

    def spectral_radii(self) -> np.ndarray:
        out = np.empty(self.j)
        for j in range(1, self.j + 1):
            out[j - 1] = max(abs(np.linalg.eigvals(self.rs[j])))
        return out

    def contraction_index(self) -> int:
        """First level beyond which every R_j has spectral radius < 1."""
        radii = self.spectral_radii()
        above = np.nonzero(radii >= 1.0)[0]
        return int(above[-1]) + 2 if above.size else 1


@dataclass
class StationaryDistribution:
    """Truncated stationary vectors pi_0..pi_J, normalized to total mass 1."""

    pi: np.ndarray          # shape (J+1, s+1)
    j_max: int
    captured_mass: float    # total mass before normalization (pi_0 sums to 1)
    residual: float         # sup-norm of interior balance rows
    boundary_residual: float
    clamped: int            # count of tiny negative entries zeroed
    normalized: bool
    params: ModelParams | None = None
    warnings: list = field(default_factory=list)

    def level_sums(self) -> np.ndarray:
        return self.pi.sum(axis=1)

    def phase_marginals(self) -> np.ndarray:
        return self.pi.sum(axis=0)

    def mean_orbit(self) -> float:
        return float(np.arange(self.j_max + 1) @ self.level_sums())

    def blocking_probability(self) -> float:
        return float(self.pi[:, -1].sum())

    def tail_mass(self) -> float:
        """Geometric extrapolation of the truncated-away mass."""
        sums = self.level_sums()
        if self.j_max < 2 or sums[-1] <= 0 or sums[-2] <= 0:
            return float(sums[-1])
        ratio = min(sums[-1] / sums[-2], 0.999)
        return float(sums[-1] * ratio / (1.0 - ratio))


def r_ladder(blocks: QbdBlocks, j_top: int,
             check_ergodicity: bool = True) -> RLadder:
    """Backward matrix-continued-fraction recursion with zero seed.

    Raises:
        NotErgodic: when the model is classified not-ergodic.
        SingularBlock: if a local block fails to invert.
    """
    if check_ergodicity:
        _require_ergodic(blocks.params)
    a = blocks.a
    n = blocks.dim
    rs: list = [None] * (j_top + 1)
    r_next = np.zeros((n, n))
    for j in range(j_top, 0, -1):
        m = -(blocks.b_j(j) + r_next @ blocks.c_j(j + 1))
        try:
            # solve R m = A by transposed LU rather than forming m^{-1}
            r = np.linalg.solve(m.T, a.T).T
        except np.linalg.LinAlgError as exc:
            raise SingularBlock("local block is singular", level=j) from exc
        if not np.all(np.isfinite(r)):
            raise SingularBlock("local block solve overflowed", level=j)
        rs[j] = r
        r_next = r
    return RLadder(rs=rs, j=j_top)


def _require_ergodic(params: ModelParams) -> ErgodicityVerdict | None:
    try:
        verdict = ergodicity(params)
    except UndefinedRho:
        return None  # unclassifiable; proceed and let diagnostics speak
    if not verdict.ergodic:
        raise NotErgodic(verdict.reason, xi=verdict.xi, z_r=verdict.z_r)
    return verdict


def _propagate(blocks: QbdBlocks, ladder: RLadder) -> tuple[np.ndarray, float]:
    """pi_0 from the boundary null space, then pi_j = pi_{j-1} R_j."""
    m0 = blocks.b_j(0) + ladder.rs[1] @ blocks.c_j(1)
    pi0 = left_null_vector(m0)
    pi = np.zeros((ladder.j + 1, blocks.dim))
    pi[0] = pi0
    for j in range(1, ladder.j + 1):
        pi[j] = pi[j - 1] @ ladder.rs[j]
    return pi, float(pi.sum())


def solve(blocks: QbdBlocks | ModelParams,
          opts: SolverOptions | None = None) -> StationaryDistribution:
    """Compute the normalized stationary distribution adaptively.

    Accepts either prebuilt QBD blocks or bare model parameters. The
    truncation level starts at opts.j0 (or opts.jmin) and doubles until
    the normalized distribution moves by less than opts.eps in sup norm and
    the mass at the top level drops below opts.tail_eps.

    Raises:
        NotErgodic: model classified not-ergodic (when check_ergodicity).
        TruncationLimit: no convergence by opts.jmax.
    """
    if isinstance(blocks, ModelParams):
        blocks.require_valid()
        blocks = build_blocks(blocks)
    opts = opts or SolverOptions()
    warnings: list[str] = []
    if opts.check_ergodicity:
        verdict = _require_ergodic(blocks.params)
        if verdict is not None and verdict.z_r is not None \
                and verdict.z_r - 1.0 < SLOW_MIXING_MARGIN:
            warnings.append(
                f"slow-mixing: z_r - 1 = {verdict.z_r - 1.0:.3g}; "
                "truncation level grows like 1/(z_r - 1)")
    j = max(opts.j0, opts.jmin or 0)
    prev = None
    while True:
        ladder = r_ladder(blocks, j, check_ergodicity=False)
        pi, captured = _propagate(blocks, ladder)
        norm = pi / captured
        tail = norm[-1].sum()
        if prev is not None:
            k = prev.shape[0]
            delta = float(np.max(np.abs(norm[:k] - prev)))
            if delta < opts.eps and tail < opts.tail_eps:
                break
        prev = norm
        if 2 * j > opts.jmax:
            raise TruncationLimit("no convergence within level budget",
                                  jmax=opts.jmax, last_tail=tail)
        j *= 2
    clamped = int(np.sum((norm < 0) & (norm > -CLAMP_TOL)))
    norm = np.where((norm < 0) & (norm > -CLAMP_TOL), 0.0, norm)
    if np.any(norm < 0):
        worst = float(norm.min())
        warnings.append(f"negative probability below clamp tolerance: {worst:.3g}")
    norm = norm / norm.sum()
    dist = StationaryDistribution(
        pi=norm, j_max=j, captured_mass=captured, residual=0.0,
        boundary_residual=0.0, clamped=clamped, normalized=True,
        params=blocks.params, warnings=warnings)
    res = balance_residual(blocks, dist)
    dist.residual = res.interior
    dist.boundary_residual = res.boundary
    return dist


@dataclass(frozen=True)
class BalanceResidual:
    interior: float   # max over rows j = 0..J-1
    boundary: float   # the truncated level-J row, reported separately


def balance_residual(blocks: QbdBlocks,
                     dist: StationaryDistribution) -> BalanceResidual:
    """Sup-norm of the balance rows for a computed distribution."""
    pi = dist.pi
    j_top = dist.j_max
    worst = 0.0
    row = pi[0] @ blocks.b_j(0) + pi[1] @ blocks.c_j(1)
    worst = max(worst, float(np.max(np.abs(row))))
    for j in range(1, j_top):
        row = pi[j - 1] @ blocks.a + pi[j] @ blocks.b_j(j) \
            + pi[j + 1] @ blocks.c_j(j + 1)
        worst = max(worst, float(np.max(np.abs(row))))
    boundary = pi[j_top - 1] @ blocks.a + pi[j_top] @ blocks.b_j(j_top)
    return BalanceResidual(interior=worst,
                           boundary=float(np.max(np.abs(boundary))))
