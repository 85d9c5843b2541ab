"""Shared fixtures: canonical instances, random-instance generators, and
the acceptance-criteria summary printed after the test run.
"""

from __future__ import annotations

import numpy as np
from hypothesis import HealthCheck, assume, settings
from hypothesis import strategies as st

from retrialq import ModelParams, derive, validate
from retrialq.errors import UndefinedRho

settings.register_profile(
    "suite", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])
settings.load_profile("suite")

# mirror params/*.params; test_cli asserts the files stay in sync
CANONICAL = {
    "classic": ModelParams(lam=0.5, mu=1.0, nu=1.0),
    "general_s1": ModelParams(lam=0.7, mu=1.1, nu=0.9, s=1, p_a=0.55,
                              pt_a=0.30, pb_a=0.15, at_0=0.8, p=0.75,
                              pb=0.25, theta=0.15, thb=0.70, tht=0.15),
    "feedback_s2": ModelParams(lam=0.9, mu=1.2, nu=0.7, s=2, at_0=0.75,
                               theta=0.2, thb=0.8),
    "okubo_s3": ModelParams(lam=1.2, mu=1.0, nu=0.8, s=3, at_0=0.9,
                            p=0.85, pb=0.15, theta=0.1, thb=0.9),
    "abandon_s2": ModelParams(lam=1.4, mu=1.0, nu=1.2, s=2, p_a=0.8,
                              pt_a=0.1, pb_a=0.1, at_0=0.85, p=0.7, pb=0.3,
                              alpha=0.6, ab=0.4, theta=0.05, thb=0.85,
                              tht=0.1),
}

PERSISTENT = ("classic", "general_s1", "feedback_s2", "okubo_s3")


def random_instance(rng: np.random.Generator, s: int,
                    persistent: bool = True,
                    xi_cap: float = 0.9,
                    okubo: bool = False,
                    pure_retrial: bool = False) -> ModelParams:
    """Draw a valid ergodic instance by rejection.

    ``okubo`` restricts to the constant-coefficient family (no arrival
    splitting, no orbit feedback); ``pure_retrial`` additionally forces
    p = 1 (the two-server hypergeometric family).
    """
    while True:
        lam = rng.uniform(0.1, 2.0)
        mu = rng.uniform(0.3, 2.0)
        nu = rng.uniform(0.2, 2.0)
        at_0 = rng.uniform(0.3, 1.0)
        if okubo:
            p_a, pt_a = 1.0, 0.0
            theta = rng.uniform(0.0, 0.4)
            thb, tht = 1.0 - theta, 0.0
        else:
            p_a = rng.uniform(0.3, 1.0)
            pt_a = (1.0 - p_a) * rng.uniform(0.0, 1.0)
            theta = rng.uniform(0.0, 0.3)
            tht = (1.0 - theta) * rng.uniform(0.0, 0.4)
            thb = 1.0 - theta - tht
        if pure_retrial:
            p = 1.0
        else:
            p = rng.uniform(0.4, 1.0)
        if persistent:
            alpha, ab = 1.0, 0.0
        else:
            alpha = rng.uniform(0.0, 0.9)
            ab = 1.0 - alpha
        params = ModelParams(
            lam=lam, mu=mu, nu=nu, s=s,
            p_a=p_a, pt_a=pt_a, pb_a=1.0 - p_a - pt_a,
            at_0=at_0, p=p, pb=1.0 - p, alpha=alpha, ab=ab,
            theta=theta, thb=thb, tht=tht)
        if not validate(params).ok:
            continue
        try:
            if derive(params).xi < xi_cap:
                return params
        except UndefinedRho:
            continue


@st.composite
def model_params_strategy(draw, max_s: int = 4, persistent: bool = False,
                          ergodic: bool = False):
    s = draw(st.integers(1, max_s))
    unit = st.floats(0.0, 1.0, allow_nan=False)
    rate = st.floats(0.05, 3.0, allow_nan=False)
    lam, mu, nu = draw(rate), draw(rate), draw(rate)
    p_a = draw(unit)
    pt_a = (1.0 - p_a) * draw(unit)
    theta = draw(unit) * 0.5
    tht = (1.0 - theta) * draw(unit)
    p = draw(unit)
    alpha = 1.0 if persistent else draw(unit)
    params = ModelParams(
        lam=lam, mu=mu, nu=nu, s=s,
        p_a=p_a, pt_a=pt_a, pb_a=1.0 - p_a - pt_a,
        at_0=draw(unit), p=p, pb=1.0 - p,
        alpha=alpha, ab=1.0 - alpha,
        theta=theta, thb=1.0 - theta - tht, tht=tht)
    assume(validate(params).ok)
    if ergodic:
        try:
            assume(derive(params).xi < 0.9)
        except UndefinedRho:
            assume(False)
    return params


# --- acceptance-criteria reporting -----------------------------------------

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def record(n: int, desc: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (desc, bool(ok), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        desc, ok, detail = ACCEPTANCE[n]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(
            f"criterion {n:2d}: {status} - {desc} ({detail})")
