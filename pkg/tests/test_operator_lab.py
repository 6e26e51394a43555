import numpy as np
import pytest

from banachlab.core_model import Measure, PLFunction, integrate, lin_comb
from banachlab.d_norm import d_norm, dirac_dual_norm
from banachlab.errors import ConstructionError, DomainError
from banachlab.operator_lab import (
    OperatorExpr,
    Rank1Projection,
    c0_model_control,
    daugavet_slice_test,
    identity_minus,
    identity_op,
    ld2p_plus_projection_check,
    operator_norm_lower,
)
from banachlab.slice_lab import SliceSpec, norming_bump

from conftest import random_pl


@pytest.fixture(scope="module")
def proj(ctx8):
    u = norming_bump(ctx8, 0.0)
    m = Measure.dirac(0.0, 1.0 / u.eval(0.0))
    return Rank1Projection(u, m)


class TestProjection:
    def test_fixes_direction(self, ctx8, proj):
        diff = lin_comb(1.0, proj.apply(proj.direction), -1.0, proj.direction)
        assert d_norm(ctx8, diff).hi < 1e-12

    def test_kernel_maps_to_zero(self, ctx8, proj):
        # a function vanishing at the atom integrates to zero
        x = PLFunction.tent()
        assert integrate(x, proj.functional) == 0.0
        assert proj.apply(x).is_zero()

    def test_idempotence(self, ctx8, proj):
        rng = np.random.default_rng(30)
        for _ in range(10):
            x = random_pl(rng)
            once = proj.apply(x)
            twice = proj.apply(once)
            assert d_norm(ctx8, lin_comb(1.0, twice, -1.0, once)).hi < 1e-10

    def test_bad_normalization_rejected(self, ctx8, proj):
        with pytest.raises(ConstructionError):
            Rank1Projection(proj.direction, Measure.dirac(0.0, 7.0))

    def test_norm_bracket_factorizes(self, ctx8, proj):
        enc = proj.norm_bracket(ctx8)
        ue = d_norm(ctx8, proj.direction)
        t, w = proj.functional.atoms[0]
        de = dirac_dual_norm(ctx8, t)
        assert enc.lo == pytest.approx(ue.lo * abs(w) * de.lo)
        assert enc.hi == pytest.approx(ue.hi * abs(w) * de.hi)


class TestOperatorNorm:
    def test_identity(self, ctx8):
        rep = operator_norm_lower(ctx8, identity_op(), budget=200, seed=3)
        assert rep["lower"] == pytest.approx(1.0, abs=1e-6)

    def test_scaled_identity(self, ctx8):
        rep = operator_norm_lower(ctx8, OperatorExpr(2.0), budget=200, seed=3)
        assert rep["lower"] == pytest.approx(2.0, abs=1e-6)

    def test_monotone_in_budget(self, ctx8, proj):
        t = identity_minus(proj)
        small = operator_norm_lower(ctx8, t, budget=150, seed=4)
        big = operator_norm_lower(ctx8, t, budget=600, seed=4)
        assert max(big["trajectory"]) >= max(small["trajectory"]) - 1e-12

    def test_rank1_norm_within_bracket(self, ctx8, proj):
        # with the direction itself as a start, the ascent pins the rank-1
        # norm inside its factorized bracket from both sides
        rep = operator_norm_lower(
            ctx8, OperatorExpr(0.0, 1.0, proj), budget=400, seed=5,
            extra_inits=(proj.direction,),
        )
        enc = proj.norm_bracket(ctx8)
        assert rep["lower"] <= enc.hi + 1e-9
        assert rep["lower"] >= enc.lo - 1e-6


class TestProjectionEquation:
    def test_norm_one_rank_one_approaches_two(self, ctx8, proj):
        rep = ld2p_plus_projection_check(ctx8, proj, budget=4000, seed=11)
        assert rep["flip_seeded"]
        assert rep["lower"] >= 1.9
        assert rep["upper"] == pytest.approx(1.0 + rep["projection_norm"].hi)
        assert rep["lower"] <= rep["upper"] + 1e-9

    def test_trajectory_monotone(self, ctx8, proj):
        rep = ld2p_plus_projection_check(ctx8, proj, budget=2000, seed=12)
        traj = rep["trajectory"]
        assert all(b >= a - 1e-12 for a, b in zip(traj, traj[1:]))


class TestC0Control:
    def test_dim_two(self):
        rep = c0_model_control(2, 0.5)
        assert rep["max_distance"] == 1.0
        assert rep["i_minus_p_norm"] == 1.0
        assert rep["p_norm"] == 1.0
        assert rep["equation_gap"] == 1.0

    def test_eps_one(self):
        assert c0_model_control(4, 1.0)["max_distance"] == 1.0

    def test_degenerate_dimension(self):
        # single coordinate: every slice member is within eps, sup unattained
        rep = c0_model_control(1, 0.3)
        assert rep["max_distance"] <= 0.3 and not rep["attained"]

    def test_domain(self):
        with pytest.raises(DomainError):
            c0_model_control(2, 1.5)


class TestDaugavet:
    def test_member_of_slice_reaches_two(self, ctx8):
        S = SliceSpec(Measure.dirac(0.5), dirac_dual_norm(ctx8, 0.5), 0.3)
        one = PLFunction.constant(1.0)
        rep = daugavet_slice_test(ctx8, one, S, budget=800, seed=13)
        assert rep["best"] > 2.0 - S.epsilon

    def test_adversarial_recorded_only(self, ctx8):
        # x concentrated far from the slice functional: value recorded
        S = SliceSpec(Measure.dirac(0.0), dirac_dual_norm(ctx8, 0.0), 0.1)
        x = norming_bump(ctx8, 1.0)
        rep = daugavet_slice_test(ctx8, x, S, budget=800, seed=14)
        assert 0.0 < rep["best"] <= 2.0 + 1e-9
