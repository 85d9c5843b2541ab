"""Geometric tail decay: analytic singularity versus empirical fit.

The stationary orbit distribution decays like C * j^beta * eta^j with
eta = 1/z_r, where z_r is the dominant regular singularity of the
generating-function system. The link is exact where closed forms exist
(one and two servers); for s >= 3 the fit is reported diagnostically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TailUnderflow, WindowTooSmall
from .model import ModelParams, derive
from .qbd import StationaryDistribution

MIN_WINDOW = 16
UNDERFLOW_FLOOR = 1e-300


@dataclass(frozen=True)
class AnalyticSingularity:
    z_r: float
    regime: str  # subcritical | critical | supercritical

    @property
    def decay_rate(self) -> float:
        return 1.0 / self.z_r


def analytic_singularity(params: ModelParams) -> AnalyticSingularity:
    """Dominant singularity z_r = pb + (1 + (tht/thb) pb)/rho with its regime.

    Subcritical means z_r > 1 (geometric tail, conjecturally ergodic).

    Raises:
        UndefinedRho: when thb = 0, lambda*at_0 = 0 or nu <= 0.
    """
    d = derive(params)
    if d.z_r > 1.0:
        regime = "subcritical"
    elif d.z_r == 1.0:
        regime = "critical"
    else:
        regime = "supercritical"
    return AnalyticSingularity(z_r=d.z_r, regime=regime)


@dataclass(frozen=True)
class PhaseFit:
    phase: int
    eta: float
    beta: float
    log_c: float


@dataclass(frozen=True)
class TailEstimate:
    z_r: float | None
    eta: float
    beta: float
    log_c: float
    window: tuple[int, int]
    fit_residual: float
    per_phase: tuple[PhaseFit, ...]
    ratios: np.ndarray

    @property
    def eta_gap(self) -> float | None:
        if self.z_r is None:
            return None
        return abs(self.eta - 1.0 / self.z_r)


def _log_fit(j: np.ndarray, mass: np.ndarray) -> tuple[float, float, float, float]:
    """Least squares of log mass against [1, j, log j]."""
    design = np.column_stack([np.ones_like(j), j, np.log(j)])
    target = np.log(mass)
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = design @ coef - target
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return float(coef[0]), float(np.exp(coef[1])), float(coef[2]), rms


def fit_tail(dist: StationaryDistribution,
             window: tuple[int, int] | None = None) -> TailEstimate:
    """Fit C * j^beta * eta^j to the level sums over a window.

    Args:
        dist: solved distribution; its truncation level should comfortably
            exceed the window (a factor of four of the window width is a
            sound default, which the default window respects).
        window: inclusive level range (j_lo, j_hi); default is the last
            third of the computed levels excluding the final tenth.

    Returns:
        The fitted decay rate eta and exponent beta for the level sums,
        per-phase fits for phases with positive mass on the window, and the
        raw ratio sequence.

    Raises:
        WindowTooSmall: fewer than 16 levels or beyond the truncation.
        TailUnderflow: level mass below 1e-300 inside the window.
    """
    j_top = dist.j_max
    if window is None:
        window = (int(2 * j_top / 3), int(0.9 * j_top))
    lo, hi = int(window[0]), int(window[1])
    if lo < 1 or hi > j_top or hi - lo + 1 < MIN_WINDOW:
        raise WindowTooSmall("need >= 16 levels inside the computed range",
                             window=(lo, hi), j_max=j_top)
    sums = dist.level_sums()[lo:hi + 1]
    if np.any(sums < UNDERFLOW_FLOOR):
        raise TailUnderflow("level mass underflows inside the window",
                            window=(lo, hi))
    j = np.arange(lo, hi + 1, dtype=float)
    log_c, eta, beta, rms = _log_fit(j, sums)
    phase_fits = []
    for i in range(dist.pi.shape[1]):
        col = dist.pi[lo:hi + 1, i]
        if np.all(col > UNDERFLOW_FLOOR):
            lc, e_i, b_i, _ = _log_fit(j, col)
            phase_fits.append(PhaseFit(phase=i, eta=e_i, beta=b_i, log_c=lc))
    ratios = dist.level_sums()[lo + 1:hi + 1] / dist.level_sums()[lo:hi]
    z_r = None
    if dist.params is not None:
        try:
            z_r = derive(dist.params).z_r
        except Exception:
            z_r = None
    return TailEstimate(z_r=z_r, eta=eta, beta=beta, log_c=log_c,
                        window=(lo, hi), fit_residual=rms,
                        per_phase=tuple(phase_fits), ratios=ratios)
