"""Generating-function systems: residuals, determinants, moments."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import CANONICAL, PERSISTENT, model_params_strategy
from oracles import mmoo_dense_mean
from retrialq import (ModelParams, bivariate_residual, build_blocks,
                      build_system, det_v, det_v_formula, eval_gf,
                      mmoo_moments, ode_residual, singularities, solve)
from retrialq.errors import (DivergenceRisk, NotApplicable, SingularShift,
                             UnsupportedVariant)
from retrialq.genfun import RESIDUAL_GRID


def test_full_system_is_the_raw_blocks():
    params = CANONICAL["feedback_s2"]
    blocks = build_blocks(params)
    sys = build_system(params, "full")
    assert np.array_equal(sys.u1, blocks.a)
    assert np.array_equal(sys.v1, blocks.ct)
    assert np.array_equal(sys.v0, -blocks.c)
    assert np.array_equal(sys.u0, blocks.b - blocks.at)
    assert not np.any(sys.u_zinv)


def test_simplified_last_column_is_the_cut_equation():
    params = CANONICAL["okubo_s3"]
    s = params.s
    sys = build_system(params, "simplified")
    assert np.allclose(sys.v0[:s, s], 1.0)
    assert sys.v0[s, s] == params.ab
    assert np.all(sys.v1[:, s] == 0.0)
    assert np.all(sys.u1[:, s] == 0.0)


def test_variant_gating():
    params = CANONICAL["classic"]
    with pytest.raises(UnsupportedVariant):
        build_system(params, "reduced")
    with pytest.raises(UnsupportedVariant):
        build_system(params, "nonsense")
    c0 = np.array([[0.0, 0.1], [0.0, 0.0]])
    with pytest.raises(NotApplicable):
        build_system(params, "simplified", c0=c0)


@given(model_params_strategy(max_s=4), st.integers(1, 12))
def test_series_coefficients_match_balance_blocks(params, j):
    """Coefficient of z^j in the full ODE is the level-j balance row."""
    blocks = build_blocks(params)
    sys = build_system(params, "full")
    up = sys.u1
    local = sys.u0 - j * sys.v1
    down = -(j + 1) * sys.v0
    assert np.allclose(up, blocks.a, atol=0, rtol=0)
    assert np.allclose(local, blocks.b_j(j), atol=1e-12)
    assert np.allclose(down, blocks.c_j(j + 1), atol=1e-12)


@pytest.mark.parametrize("name", sorted(CANONICAL))
def test_ode_residuals_full_simplified(name):
    params = CANONICAL[name]
    dist = solve(params)
    for variant in ("full", "simplified"):
        worst = max(ode_residual(dist, params, variant, z)
                    for z in RESIDUAL_GRID)
        assert worst < 1e-8, f"{name}/{variant}: {worst:.2e}"


@pytest.mark.parametrize("name", PERSISTENT)
def test_ode_residual_reduced(name):
    params = CANONICAL[name]
    dist = solve(params)
    worst = max(ode_residual(dist, params, "reduced", z)
                for z in RESIDUAL_GRID)
    assert worst < 1e-8


def test_ode_residual_with_constant_retrial():
    params = CANONICAL["classic"]
    c0 = np.array([[0.0, 0.15], [0.0, 0.0]])
    blocks = build_blocks(params, c0=c0)
    dist = solve(blocks)
    worst = max(ode_residual(dist, params, "full", z, c0=c0)
                for z in RESIDUAL_GRID)
    assert worst < 1e-8


def test_bivariate_identity():
    params = CANONICAL["general_s1"]
    dist = solve(params)
    assert bivariate_residual(dist, params, 1.0, 1.0) < 1e-14
    for y, z in ((0.5, 0.5), (0.3, 0.8), (0.9, 0.2)):
        assert bivariate_residual(dist, params, y, z) < 1e-10


def test_eval_gf():
    params = CANONICAL["classic"]
    dist = solve(params)
    val = eval_gf(dist, 1.0)
    assert np.allclose(val.p, dist.phase_marginals(), atol=1e-12)
    assert val.tail_bound < 1e-10
    with pytest.raises(DivergenceRisk):
        eval_gf(dist, 2.0)  # z_r = 2 for the classic instance


def test_det_formulas_on_random_z():
    rng = np.random.default_rng(11)
    for name in ("general_s1", "abandon_s2"):
        params = CANONICAL[name]
        variants = ["full", "simplified"]
        if params.ab == 0:
            variants.append("reduced")
        for variant in variants:
            for z in rng.uniform(0.05, 1.8, size=10):
                want = det_v_formula(params, variant, z)
                got = det_v(params, variant, z)
                assert abs(got - want) <= 1e-12 * max(abs(want), 1.0)


def test_singularities():
    rep1 = singularities(CANONICAL["classic"])
    assert len(rep1.points) == 1
    assert rep1.dominant().location == pytest.approx(2.0)

    rep2 = singularities(CANONICAL["feedback_s2"])
    kinds = {p.multiplicity: p.kind for p in rep2.points}
    assert kinds[1] == "regular"  # z_r
    assert rep2.points[0].kind == "regular"  # pb at s = 2

    rep3 = singularities(CANONICAL["okubo_s3"])
    pb_point = [p for p in rep3.points if p.multiplicity == 2][0]
    assert pb_point.kind == "irregular"


def test_mmoo_single_phase_powers():
    m = mmoo_moments(np.array([[2.0]]), np.array([[0.0]]),
                     np.array([[1.0]]), kmax=4)
    assert np.allclose(m[:, 0], [1.0, 2.0, 4.0, 8.0, 16.0], rtol=1e-14)


def test_mmoo_three_phase_against_dense():
    a = np.diag([2.0, 1.0, 3.0])
    b = np.array([[-1.0, 1.0, 0.0], [0.5, -1.0, 0.5], [1.0, 0.0, -1.0]])
    c = np.diag([1.0, 2.0, 1.5])
    m = mmoo_moments(a, b, c, kmax=1)
    dense = mmoo_dense_mean(a, b, c, ncap=120)
    assert np.max(np.abs(m[1] - dense)) < 1e-8
    assert m[0].sum() == pytest.approx(1.0, abs=1e-12)


def test_mmoo_singular_shift():
    b = np.array([[-1.0, 1.0], [1.0, -1.0]])
    with pytest.raises(SingularShift):
        mmoo_moments(np.eye(2), b, np.zeros((2, 2)), kmax=1)
