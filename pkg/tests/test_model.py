"""Parameter validation, derived rates, ergodicity tree, QBD blocks."""

import math

import numpy as np
import pytest
from hypothesis import given

from conftest import CANONICAL, model_params_strategy
from retrialq import (ModelParams, build_blocks, derive, ergodicity,
                      require_valid, validate)
from retrialq.errors import UndefinedRho, UnsupportedK


def test_defaults_give_classic_model():
    params = ModelParams(lam=0.5, mu=1.0, nu=1.0)
    assert validate(params).ok
    assert params.p_a == 1.0 and params.at_0 == 1.0
    assert params.thb == 1.0 and params.ab == 0.0


def test_classic_derived_rates():
    d = derive(ModelParams(lam=0.5, mu=1.0, nu=1.0))
    assert d.lambda_ob == 0.5
    assert d.rho == pytest.approx(0.5, rel=1e-15)
    assert d.z_r == pytest.approx(2.0, rel=1e-15)
    assert d.xi == pytest.approx(0.5, rel=1e-15)
    assert d.r0 == pytest.approx(0.5, rel=1e-15)
    # without orbit feedback kappa is the constant rho_tilde
    assert d.kappa(0.3) == pytest.approx(d.rho_tilde, rel=1e-15)
    assert d.kappa1 == 0.0


def test_xi_below_one_iff_zr_above_one():
    rng = np.random.default_rng(3)
    for _ in range(200):
        lam = rng.uniform(0.05, 4.0)
        params = ModelParams(lam=lam, mu=rng.uniform(0.2, 2.0),
                             nu=rng.uniform(0.2, 2.0),
                             s=int(rng.integers(1, 4)),
                             theta=0.1, thb=0.8, tht=0.1,
                             p=0.7, pb=0.3, at_0=0.9)
        d = derive(params)
        assert (d.xi < 1.0) == (d.z_r > 1.0)


def test_validation_messages():
    bad = ModelParams(lam=-1.0, mu=1.0, nu=1.0)
    report = validate(bad)
    assert not report.ok
    assert any("negative rate" in v for v in report.violations)

    bad = ModelParams(lam=1.0, mu=1.0, nu=1.0, p_a=0.5, pt_a=0.0, pb_a=0.0)
    assert any("acceptance split not stochastic" in v
               for v in validate(bad).violations)

    bad = ModelParams(lam=1.0, mu=float("nan"), nu=1.0)
    assert any("non-finite rate" in v for v in validate(bad).violations)

    bad = ModelParams(lam=1.0, mu=1.0, nu=1.0, p=1.5, pb=-0.5)
    assert any("probability out of range" in v
               for v in validate(bad).violations)


def test_require_valid_raises():
    with pytest.raises(ValueError, match="negative rate"):
        require_valid(ModelParams(lam=-1.0, mu=1.0, nu=1.0))
    ModelParams(lam=1.0, mu=1.0, nu=1.0).require_valid()


def test_replace_returns_new_instance():
    params = CANONICAL["classic"]
    bumped = params.replace(lam=0.6)
    assert bumped.lam == 0.6 and params.lam == 0.5


@given(model_params_strategy())
def test_random_constructions_validate(params):
    assert validate(params).ok


def test_derive_undefined_cases():
    with pytest.raises(UndefinedRho):
        derive(ModelParams(lam=1.0, mu=1.0, nu=1.0,
                           theta=0.5, thb=0.0, tht=0.5))
    with pytest.raises(UndefinedRho):
        derive(ModelParams(lam=0.0, mu=1.0, nu=1.0))
    with pytest.raises(UndefinedRho):
        derive(ModelParams(lam=1.0, mu=1.0, nu=0.0))
    with pytest.raises(UndefinedRho):
        derive(ModelParams(lam=1.0, mu=1.0, nu=1.0, at_0=0.0))


def test_ergodicity_tree():
    # no orbit inflow: always ergodic no matter the load
    v = ergodicity(ModelParams(lam=9.0, mu=1.0, nu=1.0, at_0=0.0))
    assert v.verdict == "ergodic-certain" and v.ergodic

    # inflow but no retrial outflow
    v = ergodicity(ModelParams(lam=1.0, mu=1.0, nu=0.0))
    assert v.verdict == "not-ergodic" and not v.ergodic

    # abandonment from the blocked state empties the orbit
    v = ergodicity(ModelParams(lam=9.0, mu=1.0, nu=1.0, alpha=0.5, ab=0.5))
    assert v.verdict == "ergodic-certain"

    # persistent subcritical / supercritical
    v = ergodicity(ModelParams(lam=0.5, mu=1.0, nu=1.0))
    assert v.verdict == "ergodic-conjectural" and v.xi == pytest.approx(0.5)
    v = ergodicity(ModelParams(lam=1.5, mu=1.0, nu=1.0))
    assert v.verdict == "not-ergodic" and v.xi == pytest.approx(1.5)


def test_hanschke_attached_without_feedback():
    v = ergodicity(ModelParams(lam=0.5, mu=1.0, nu=1.0, p=0.7, pb=0.3))
    assert v.hanschke is not None and v.hanschke.applies
    assert v.hanschke.satisfied and v.hanschke.agrees_with_xi

    # feedback present: the two-term condition no longer applies
    v = ergodicity(CANONICAL["general_s1"])
    assert v.hanschke is None or not v.hanschke.applies


def test_blocks_shapes_and_signs():
    params = CANONICAL["okubo_s3"]
    blocks = build_blocks(params)
    n = params.s + 1
    assert blocks.a.shape == (n, n)
    assert np.all(blocks.a >= 0) and np.all(blocks.c >= 0)
    off = blocks.b - np.diag(np.diag(blocks.b))
    assert np.all(off >= 0)
    # B itself is conservative; the level diagonal is charged via At, Ct
    assert np.max(np.abs(blocks.b.sum(axis=1))) < 1e-12


@given(model_params_strategy(max_s=4))
def test_blocks_levels_conservative(params):
    blocks = build_blocks(params)
    ones = np.ones(blocks.dim)
    # level 0 has no down-block and b_j(0) omits the retrial charge
    out0 = blocks.a @ ones + blocks.b_j(0) @ ones
    assert np.max(np.abs(out0)) < 1e-10
    for j in (1, 2, 7):
        out = blocks.a @ ones + blocks.b_j(j) @ ones + blocks.c_j(j) @ ones
        assert np.max(np.abs(out)) < 1e-10


def test_classic_block_entries():
    blocks = build_blocks(ModelParams(lam=0.5, mu=1.0, nu=1.0))
    assert np.allclose(blocks.a, [[0.0, 0.0], [0.0, 0.5]])
    assert np.allclose(blocks.b, [[-0.5, 0.5], [1.0, -1.0]])
    assert np.allclose(blocks.c, [[0.0, 1.0], [0.0, 0.0]])
    assert not blocks.has_c0()


def test_constant_retrial_term():
    params = CANONICAL["classic"]
    c0 = np.array([[0.0, 0.2], [0.0, 0.0]])
    blocks = build_blocks(params, c0=c0)
    assert blocks.has_c0()
    assert np.allclose(blocks.c_j(3), 3 * blocks.c + c0)
    assert np.allclose(blocks.c_j(0), 0.0)


def test_waiting_room_unsupported():
    with pytest.raises(UnsupportedK):
        build_blocks(ModelParams(lam=1.0, mu=1.0, nu=1.0, K=2))
