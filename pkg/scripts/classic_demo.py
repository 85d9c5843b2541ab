#!/usr/bin/env python
"""Solve the classic half-load retrial queue and check it against the
known closed form: pi_{0,0} = (1 - rho)^(1 + lam/nu), mean orbit size
rho (lam + rho) / (1 - rho) at mu = nu = 1.
"""

import numpy as np

from retrialq import ModelParams, ergodicity, s1_classic_pmf, solve

params = ModelParams(lam=0.5, mu=1.0, nu=1.0)

verdict = ergodicity(params)
print(f"ergodicity: {verdict.verdict} ({verdict.reason})")
print(f"xi = {verdict.xi:.6f}, z_r = {verdict.z_r:.6f}")

dist = solve(params)
print(f"truncation level {dist.j_max}, interior residual {dist.residual:.3e}")

exact00 = 0.5 ** 1.5
exact10 = 0.5 ** 2.5
print(f"pi(0,0) = {dist.pi[0, 0]:.12f}   exact {exact00:.12f}")
print(f"pi(1,0) = {dist.pi[0, 1]:.12f}   exact {exact10:.12f}")
print(f"mean orbit = {dist.mean_orbit():.12f}   exact 1.0")

worst = max(
    max(abs(dist.pi[j, i] - s1_classic_pmf(params, j)[i]) for i in (0, 1))
    for j in range(201)
)
print(f"max |solver - closed form| over j <= 200: {worst:.3e}")

regime_ratio = dist.level_sums()[40:60] / dist.level_sums()[39:59]
print(f"tail ratio ~ {np.mean(regime_ratio):.6f} (1/z_r = 0.5)")
