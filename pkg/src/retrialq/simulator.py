"""Discrete-event simulation of the retrial queue as a validation oracle.

The kernel simulates the continuous-time chain (busy servers, orbit size)
by competing exponential clocks and accumulates time-weighted occupancy in
equal-event batches. All randomness comes from an explicit xoshiro256**
stream seeded through splitmix64, so runs are reproducible bit for bit
from the seed alone, independent of numpy's global state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import CapExceeded
from .model import ModelParams
from .qbd import StationaryDistribution

SPILL_BUDGET = 1e-3
Z975 = 1.959963984540054

# event type indices in the count vector
EVENT_NAMES = (
    "arrival_accept",
    "arrival_orbit",
    "arrival_balk",
    "arrival_orbit_blocked",
    "arrival_balk_blocked",
    "service_reserve",
    "service_leave",
    "service_orbit",
    "retrial_success",
    "retrial_abandon",
    "retrial_stay_blocked",
    "retrial_abandon_blocked",
)


@njit(cache=True)
def _kernel(lam, mu, nu, s, p_a, pt_a, at_0, p, alpha, theta, thb, tht,
            seed, n_events, warmup_events, n_batches, jcap):
    # splitmix64 expansion of the seed into the xoshiro256** state
    mask = np.uint64(0xFFFFFFFFFFFFFFFF)
    gamma = np.uint64(0x9E3779B97F4A7C15)
    state = np.empty(4, dtype=np.uint64)
    x = np.uint64(seed)
    for k in range(4):
        x = (x + gamma) & mask
        z = x
        z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & mask
        z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & mask
        state[k] = z ^ (z >> np.uint64(31))
    s0, s1, s2, s3 = state[0], state[1], state[2], state[3]

    width = (jcap + 1) * (s + 1)
    occ = np.zeros((n_batches, width))
    batch_time = np.zeros(n_batches)
    spill = np.zeros(n_batches)
    counts = np.zeros(12, dtype=np.int64)

    i = 0
    j = 0
    absorbed = False
    meas_events = n_events - warmup_events
    for e in range(n_events):
        total = lam + i * mu + j * nu
        if total <= 0.0:
            absorbed = True
            break

        # xoshiro256** draw for the holding time, open at zero
        r = (((s1 * np.uint64(5)) << np.uint64(7)) |
             ((s1 * np.uint64(5)) >> np.uint64(57))) & mask
        r = (r * np.uint64(9)) & mask
        t = (s1 << np.uint64(17)) & mask
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << np.uint64(45)) | (s3 >> np.uint64(19))) & mask
        u = (np.float64(r >> np.uint64(11)) + 1.0) * (2.0 ** -53)
        dt = -math.log(u) / total

        if e >= warmup_events:
            b = ((e - warmup_events) * n_batches) // meas_events
            batch_time[b] += dt
            if j <= jcap:
                occ[b, j * (s + 1) + i] += dt
            else:
                spill[b] += dt

        # second draw selects the event
        r = (((s1 * np.uint64(5)) << np.uint64(7)) |
             ((s1 * np.uint64(5)) >> np.uint64(57))) & mask
        r = (r * np.uint64(9)) & mask
        t = (s1 << np.uint64(17)) & mask
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << np.uint64(45)) | (s3 >> np.uint64(19))) & mask
        v = np.float64(r >> np.uint64(11)) * (2.0 ** -53) * total

        record = e >= warmup_events
        if v < lam:
            if i < s:
                if v < lam * p_a:
                    i += 1
                    if record:
                        counts[0] += 1
                elif v < lam * (p_a + pt_a):
                    j += 1
                    if record:
                        counts[1] += 1
                else:
                    if record:
                        counts[2] += 1
            else:
                if v < lam * at_0:
                    j += 1
                    if record:
                        counts[3] += 1
                else:
                    if record:
                        counts[4] += 1
        elif v < lam + i * mu:
            w = v - lam
            if w < i * mu * theta:
                if record:
                    counts[5] += 1
            elif w < i * mu * (theta + thb):
                i -= 1
                if record:
                    counts[6] += 1
            else:
                i -= 1
                j += 1
                if record:
                    counts[7] += 1
        else:
            w = v - lam - i * mu
            if i < s:
                if w < j * nu * p:
                    i += 1
                    j -= 1
                    if record:
                        counts[8] += 1
                else:
                    j -= 1
                    if record:
                        counts[9] += 1
            else:
                if w < j * nu * alpha:
                    if record:
                        counts[10] += 1
                else:
                    j -= 1
                    if record:
                        counts[11] += 1

    return occ, batch_time, spill, counts, absorbed, i, j


@dataclass(frozen=True)
class SimConfig:
    """Run-length and bookkeeping knobs for one simulation run.

    Attributes:
        n_events: total simulated events including warmup.
        warmup_frac: leading fraction of events discarded before measuring.
        n_batches: equal-event batches for the confidence intervals.
        jcap: largest orbit size tracked individually; time above it is
            pooled as spill and must stay under 0.1% of measured time.
        seed: 64-bit stream seed.
    """

    n_events: int = 2_000_000
    warmup_frac: float = 0.1
    n_batches: int = 20
    jcap: int = 2000
    seed: int = 20240817

    def __post_init__(self):
        if self.n_events <= 0:
            raise ValueError("n_events must be positive")
        if not 0.0 <= self.warmup_frac < 1.0:
            raise ValueError("warmup_frac must lie in [0, 1)")
        if self.n_batches < 2:
            raise ValueError("need at least 2 batches")
        if self.jcap < 1:
            raise ValueError("jcap must be positive")


@dataclass
class SimResult:
    estimate: np.ndarray            # (jcap+1, s+1) time-average occupancy
    half_width: np.ndarray          # same shape, batch-means 95% intervals
    sim_time: float
    spill_frac: float
    event_counts: dict = field(default_factory=dict)
    absorbed: bool = False
    final_state: tuple[int, int] = (0, 0)
    config: SimConfig | None = None
    params: ModelParams | None = None

    def phase_marginals(self) -> np.ndarray:
        return self.estimate.sum(axis=0)

    def mean_orbit(self) -> float:
        j = np.arange(self.estimate.shape[0])
        return float(j @ self.estimate.sum(axis=1))


def _t_critical(dof: int) -> float:
    """Two-sided 97.5% Student t quantile, Cornish-Fisher expansion."""
    z = Z975
    g1 = (z ** 3 + z) / 4.0
    g2 = (5 * z ** 5 + 16 * z ** 3 + 3 * z) / 96.0
    return z + g1 / dof + g2 / dof ** 2


def simulate(params: ModelParams, config: SimConfig | None = None) -> SimResult:
    """Simulate the chain and return batch-means occupancy estimates.

    Args:
        params: validated model parameters (K = 0).
        config: run configuration; defaults to 2e6 events, 10% warmup,
            20 batches.

    Returns:
        Time-average occupancy per (orbit, busy) cell with 95% half-widths.

    Raises:
        CapExceeded: more than 0.1% of measured time above the orbit cap.
    """
    if config is None:
        config = SimConfig()
    params.require_valid()
    warmup = int(config.n_events * config.warmup_frac)
    if config.n_events - warmup < config.n_batches:
        raise ValueError("too few measured events for the batch count")
    occ, batch_time, spill, counts, absorbed, fi, fj = _kernel(
        params.lam, params.mu, params.nu, params.s,
        params.p_a, params.pt_a, params.at_0,
        params.p, params.alpha, params.theta, params.thb, params.tht,
        np.uint64(config.seed & 0xFFFFFFFFFFFFFFFF),
        config.n_events, warmup, config.n_batches, config.jcap)

    shape = (config.jcap + 1, params.s + 1)
    if absorbed:
        # chain hit a state with no outgoing rate; the time average is a
        # point mass there regardless of the finite history
        est = np.zeros(shape)
        hw = np.zeros(shape)
        if fj <= config.jcap:
            est[fj, fi] = 1.0
        return SimResult(estimate=est, half_width=hw, sim_time=float(batch_time.sum()),
                         spill_frac=0.0, event_counts=_count_dict(counts),
                         absorbed=True, final_state=(fi, fj),
                         config=config, params=params)

    total_time = float(batch_time.sum())
    est = (occ.sum(axis=0) / total_time).reshape(shape)
    means = occ / batch_time[:, None]
    sd = means.std(axis=0, ddof=1)
    t = _t_critical(config.n_batches - 1)
    hw = (t * sd / math.sqrt(config.n_batches)).reshape(shape)
    spill_frac = float(spill.sum() / total_time)
    if spill_frac > SPILL_BUDGET:
        raise CapExceeded("orbit cap too small for this load",
                          spill_frac=spill_frac, jcap=config.jcap)
    return SimResult(estimate=est, half_width=hw, sim_time=total_time,
                     spill_frac=spill_frac, event_counts=_count_dict(counts),
                     absorbed=False, final_state=(fi, fj),
                     config=config, params=params)


def _count_dict(counts: np.ndarray) -> dict:
    return {name: int(counts[k]) for k, name in enumerate(EVENT_NAMES)}


@dataclass(frozen=True)
class ComparisonReport:
    n_checked: int
    n_within: int
    frac_within: float
    tv_distance: float
    worst_z: float
    passed: bool


def compare(sim: SimResult, dist: StationaryDistribution,
            mass_floor: float = 1e-6,
            coverage: float = 0.95,
            tv_budget: float = 0.01) -> ComparisonReport:
    """Check a simulation against a solver distribution.

    Cells where the solver puts more than `mass_floor` must match within
    three half-widths at the stated coverage, and the total variation
    distance over the common support must stay within `tv_budget`.
    """
    j_common = min(sim.estimate.shape[0] - 1, dist.j_max)
    pi = dist.pi[:j_common + 1]
    est = sim.estimate[:j_common + 1]
    hw = sim.half_width[:j_common + 1]

    mask = pi > mass_floor
    diffs = np.abs(pi - est)
    n_checked = int(mask.sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(hw > 0, diffs / hw, np.where(diffs == 0, 0.0, np.inf))
    within = diffs <= 3.0 * hw
    n_within = int((within & mask).sum())
    frac = n_within / n_checked if n_checked else 1.0
    worst_z = float(z[mask].max()) if n_checked else 0.0

    tv = 0.5 * float(diffs.sum())
    tv += 0.5 * float(dist.pi[j_common + 1:].sum())
    tv += 0.5 * float(sim.estimate[j_common + 1:].sum()) + 0.5 * sim.spill_frac
    passed = frac >= coverage and tv <= tv_budget
    return ComparisonReport(n_checked=n_checked, n_within=n_within,
                            frac_within=frac, tv_distance=tv,
                            worst_z=worst_z, passed=passed)


def merge_results(results: list[SimResult]) -> SimResult:
    """Pool independent runs by inverse-variance weighting per cell.

    Cells where every run reports zero half-width fall back to a plain
    average. Event counts and times add; configs are dropped.
    """
    if not results:
        raise ValueError("nothing to merge")
    shape = results[0].estimate.shape
    est = np.zeros(shape)
    wsum = np.zeros(shape)
    for r in results:
        if r.estimate.shape != shape:
            raise ValueError("mismatched shapes")
        w = np.where(r.half_width > 0, 1.0 / r.half_width ** 2, 0.0)
        est += w * r.estimate
        wsum += w
    plain = np.mean([r.estimate for r in results], axis=0)
    merged = np.where(wsum > 0, est / np.where(wsum > 0, wsum, 1.0), plain)
    hw = np.where(wsum > 0, 1.0 / np.sqrt(np.where(wsum > 0, wsum, 1.0)), 0.0)
    counts: dict = {}
    for r in results:
        for k, v in r.event_counts.items():
            counts[k] = counts.get(k, 0) + v
    return SimResult(estimate=merged, half_width=hw,
                     sim_time=sum(r.sim_time for r in results),
                     spill_frac=max(r.spill_frac for r in results),
                     event_counts=counts, absorbed=False,
                     final_state=results[-1].final_state,
                     params=results[0].params)
