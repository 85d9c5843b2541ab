#!/usr/bin/env python
"""Cross-validate the solver against the event simulator on a parameter
file: usage `python scripts/sim_vs_solver.py params/classic.params [events]`.
"""

import sys
import time

from retrialq import SimConfig, compare, simulate, solve
from retrialq.cli import load_params

paramfile = sys.argv[1] if len(sys.argv) > 1 else "params/classic.params"
events = int(sys.argv[2]) if len(sys.argv) > 2 else 2_000_000

params = load_params(paramfile)
dist = solve(params)

t0 = time.perf_counter()
result = simulate(params, SimConfig(n_events=events, seed=1234))
elapsed = time.perf_counter() - t0
rate = events / elapsed / 1e6
print(f"{events} events in {elapsed:.2f} s ({rate:.1f} M events/s), "
      f"spill {result.spill_frac:.2e}")

report = compare(result, dist)
print(f"cells checked {report.n_checked}, within 3 half-widths "
      f"{report.n_within} ({100 * report.frac_within:.1f}%)")
print(f"TV distance {report.tv_distance:.5f}, worst z {report.worst_z:.2f}")
print("PASS" if report.passed else "FAIL")
