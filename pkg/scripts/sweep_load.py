#!/usr/bin/env python
"""Sweep the offered load of the classic family and print how the mean
orbit size and blocking probability grow toward the ergodicity frontier.
"""

from retrialq import ModelParams, derive, solve

print(f"{'rho':>6} {'xi':>8} {'z_r':>8} {'mean orbit':>12} {'P(block)':>10} {'J':>6}")
for k in range(1, 10):
    rho = k / 10
    params = ModelParams(lam=rho, mu=1.0, nu=1.0)
    d = derive(params)
    dist = solve(params)
    print(f"{rho:6.2f} {d.xi:8.4f} {d.z_r:8.4f} "
          f"{dist.mean_orbit():12.6f} {dist.blocking_probability():10.6f} "
          f"{dist.j_max:6d}")
