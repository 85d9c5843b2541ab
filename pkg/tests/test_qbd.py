"""Solver against the dense-truncation oracle, plus its failure modes."""

import numpy as np
import pytest

from conftest import CANONICAL
from oracles import dense_solve
from retrialq import (ModelParams, SolverOptions, balance_residual,
                      build_blocks, left_null_vector, r_ladder, solve)
from retrialq.errors import NoNullVector, NotErgodic, TruncationLimit


def test_classic_closed_values():
    dist = solve(CANONICAL["classic"])
    assert dist.pi[0, 0] == pytest.approx(0.5 ** 1.5, abs=1e-12)
    assert dist.pi[0, 1] == pytest.approx(0.5 ** 2.5, abs=1e-12)
    assert dist.mean_orbit() == pytest.approx(1.0, abs=1e-10)
    assert dist.blocking_probability() == pytest.approx(0.5, abs=1e-10)


@pytest.mark.parametrize("name", sorted(CANONICAL))
def test_solver_matches_dense_oracle(name):
    params = CANONICAL[name]
    dist = solve(params)
    jcap = 120
    oracle = dense_solve(params, jcap)
    take = 50
    err = np.max(np.abs(dist.pi[:take + 1] - oracle[:take + 1]))
    assert err < 1e-10, f"{name}: {err:.3e}"


@pytest.mark.parametrize("name", sorted(CANONICAL))
def test_mass_and_residuals(name):
    dist = solve(CANONICAL[name])
    assert abs(dist.pi.sum() - 1.0) < 1e-12
    assert np.all(dist.pi >= 0.0)
    assert dist.residual < 1e-10
    assert dist.level_sums().shape == (dist.j_max + 1,)
    marg = dist.phase_marginals()
    assert marg.sum() == pytest.approx(1.0, abs=1e-12)


def test_not_ergodic_raises():
    with pytest.raises(NotErgodic):
        solve(ModelParams(lam=1.5, mu=1.0, nu=1.0))


def test_ergodicity_check_can_be_disabled():
    params = ModelParams(lam=1.5, mu=1.0, nu=1.0)
    opts = SolverOptions(check_ergodicity=False, j0=16, jmax=32,
                         eps=1e-12, tail_eps=1e-12)
    with pytest.raises(TruncationLimit):
        solve(params, opts)


def test_truncation_limit():
    opts = SolverOptions(j0=4, jmax=8)
    with pytest.raises(TruncationLimit):
        solve(CANONICAL["classic"], opts)


def test_jmin_forces_truncation_level():
    dist = solve(CANONICAL["classic"], SolverOptions(jmin=700))
    assert dist.j_max >= 700


def test_adaptive_growth_under_load():
    light = solve(ModelParams(lam=0.2, mu=1.0, nu=1.0))
    heavy = solve(ModelParams(lam=0.9, mu=1.0, nu=1.0))
    assert heavy.j_max > light.j_max


def test_slow_mixing_warning():
    params = ModelParams(lam=0.9995, mu=1.0, nu=1.0)
    dist = solve(params, SolverOptions(eps=1e-4, tail_eps=1e-4,
                                       jmax=2 ** 18))
    assert any("slow-mixing" in w for w in dist.warnings)


def test_boundary_residual_reported_separately():
    blocks = build_blocks(CANONICAL["classic"])
    dist = solve(blocks)
    res = balance_residual(blocks, dist)
    assert res.interior < 1e-10
    assert res.boundary < 1e-8  # truncated row, larger by construction


def test_r_ladder_structure():
    blocks = build_blocks(CANONICAL["feedback_s2"])
    ladder = r_ladder(blocks, 64)
    assert len(ladder.rs) == 65  # 1-indexed storage, index 0 unused
    assert np.all(ladder.rs[1] >= -1e-15)
    radii = ladder.spectral_radii()
    assert radii[-1] < radii[0] or radii[-1] < 1e-6


def test_left_null_vector():
    gen = np.array([[-1.0, 1.0], [2.0, -2.0]])
    v = left_null_vector(gen)
    assert np.max(np.abs(v @ gen)) < 1e-12
    assert v.sum() == pytest.approx(1.0)
    with pytest.raises(NoNullVector):
        left_null_vector(np.eye(3))


def test_tail_mass_extrapolation():
    dist = solve(CANONICAL["classic"])
    tm = dist.tail_mass()
    assert 0.0 <= tm < 1e-10
