"""Rank-1 projections and the norm equation ‖I − P‖ = 1 + ‖P‖.

A rank-1 projection P = m ⊗ u (with ∫u dm = 1) has ‖P‖ = ‖u‖·‖m‖*, and
the flip machinery supplies near-optimal witnesses for ‖I − P‖: a slice
member y far from u makes ‖y − m(y)u‖ approach 2.  The finite sup-norm
sequence model provides the exact control where the equation fails.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core_model import Enclosure, Measure, PLFunction, integrate, lin_comb
from .d_norm import DNormContext, d_norm, dirac_dual_norm, dual_norm
from .errors import ConstructionError, DomainError
from .gridsearch import GridContext
from .slice_lab import (
    SliceSpec,
    _slice_member_matrix,
    norming_bump,
    tent_flip_witness,
)


@dataclass(frozen=True, eq=False)
class Rank1Projection:
    """P x = (∫x dm)·u with the normalization ∫u dm = 1."""

    direction: PLFunction
    functional: Measure

    def __post_init__(self):
        pairing = integrate(self.direction, self.functional)
        if abs(pairing - 1.0) > 1e-10:
            raise ConstructionError(
                f"∫u dm = {pairing} must equal 1 for a projection"
            )

    def apply(self, x: PLFunction) -> PLFunction:
        return self.direction.scaled(integrate(x, self.functional))

    def norm_bracket(self, ctx: DNormContext, budget: int = 1500, seed: int = 0) -> Enclosure:
        """[‖u‖.lo·‖m‖*.lower, ‖u‖.hi·‖m‖*.upper]; rank-1 norms factor."""
        ue = d_norm(ctx, self.direction)
        mb = _functional_bracket(ctx, self.functional, budget, seed)
        return Enclosure(ue.lo * mb.lo, ue.hi * mb.hi)


def _functional_bracket(ctx, m: Measure, budget: int, seed: int) -> Enclosure:
    if len(m.atoms) == 1 and m.density is None:
        t, w = m.atoms[0]
        try:
            enc = dirac_dual_norm(ctx, t)
            return Enclosure(abs(w) * enc.lo, abs(w) * enc.hi)
        except Exception:
            pass
    br = dual_norm(ctx, m, budget=budget, seed=seed)
    return br.as_enclosure()


@dataclass(frozen=True)
class OperatorExpr:
    """A linear combination a·I + b·P applied to PL functions."""

    a: float = 1.0
    b: float = 0.0
    projection: Rank1Projection | None = None

    def apply(self, x: PLFunction) -> PLFunction:
        out = x.scaled(self.a)
        if self.b != 0.0 and self.projection is not None:
            out = lin_comb(1.0, out, self.b, self.projection.apply(x))
        return out

    def apply_grid(self, gc: GridContext, rows: np.ndarray, coeffs, vu) -> np.ndarray:
        out = self.a * rows
        if self.b != 0.0 and self.projection is not None:
            out = out + self.b * (rows @ coeffs)[:, None] * vu[None, :]
        return out


def identity_op() -> OperatorExpr:
    return OperatorExpr(1.0, 0.0, None)


def identity_minus(P: Rank1Projection) -> OperatorExpr:
    return OperatorExpr(1.0, -1.0, P)


def operator_norm_lower(
    ctx: DNormContext,
    T: OperatorExpr,
    budget: int,
    seed: int,
    grid_cells: int = 512,
    extra_inits: tuple[PLFunction, ...] = (),
) -> dict:
    """Certified lower bound on ‖T‖ from a seeded multistart ascent.

    Maximizes ‖Tx‖.lo/‖x‖.hi over grid candidates; the best witness is
    re-evaluated through the exact norm path before being reported.
    """
    extra_nodes = []
    if T.projection is not None:
        extra_nodes.extend(T.projection.direction.breakpoints.tolist())
        extra_nodes.extend(t for t, _ in T.projection.functional.atoms)
    for f in extra_inits:
        extra_nodes.extend(f.breakpoints.tolist())
    gc = GridContext(ctx, grid_cells=grid_cells, extra_nodes=np.asarray(extra_nodes))
    coeffs = (
        gc.functional_coeffs(T.projection.functional)
        if T.projection is not None
        else np.zeros(gc.size)
    )
    vu = (
        gc.sample_function(T.projection.direction)
        if T.projection is not None
        else np.zeros(gc.size)
    )
    rng = np.random.default_rng(seed)
    best_ratio = -np.inf
    best_x = None
    evals = 0
    trajectory = []
    chunk = 64
    pending = [gc.sample_function(f) for f in extra_inits]
    pending.append(np.ones(gc.size))
    while evals < budget:
        m = min(chunk, max(1, budget - evals))
        cands = gc.random_smooth(rng, m // 2 + 1)
        cands = np.vstack([cands, gc.random_bumps(rng, m - cands.shape[0])])[:m]
        if pending:
            cands = np.vstack([np.asarray(pending), cands])
            pending = []
        if best_x is not None:
            jitter = best_x[None, :] + 0.05 * gc.random_smooth(rng, 4)
            cands = np.vstack([cands, jitter])
        _, hx = gc.enclosures(cands)
        keep = hx > 1e-12
        cands, hx = cands[keep], hx[keep]
        timg = T.apply_grid(gc, cands, coeffs, vu)
        lt, _ = gc.enclosures(timg)
        evals += 2 * cands.shape[0]
        ratios = lt / hx
        k = int(np.argmax(ratios))
        if float(ratios[k]) > best_ratio:
            best_ratio = float(ratios[k])
            best_x = cands[k].copy()
        trajectory.append(best_ratio)
    x_pl = gc.to_plfunction(best_x)
    exact = d_norm(ctx, T.apply(x_pl)).lo / d_norm(ctx, x_pl).hi
    return {
        "lower": float(exact),
        "witness": x_pl,
        "evaluations": evals,
        "trajectory": trajectory,
    }


def ld2p_plus_projection_check(
    ctx: DNormContext,
    P: Rank1Projection,
    budget: int,
    seed: int,
    seed_epsilon: float = 0.04,
) -> dict:
    """Probe the projection equation ‖I − P‖ = 1 + ‖P‖.

    The triangle inequality pins the upper side at 1 + ‖P‖.hi; the lower
    estimate comes from the ascent seeded with a flip witness of the
    direction u inside the slice of the projection's functional.  The gap
    (1 + ‖P‖.lo) − lower should shrink with budget on spaces where every
    slice reaches diameter 2.
    """
    pe = P.norm_bracket(ctx, seed=seed)
    seeds: list[PLFunction] = []
    mb = _functional_bracket(ctx, P.functional, 1000, seed)
    S = SliceSpec(P.functional, mb, seed_epsilon)
    try:
        u = P.direction
        ue = d_norm(ctx, u)
        anchor = u if ue.hi <= 1.0 + 1e-9 else u.scaled(1.0 / (ue.hi * (1.0 + 1e-12)))
        margin = S.value(anchor) - (1.0 - seed_epsilon)
        if margin > 0.0:
            cert = tent_flip_witness(
                ctx, S, anchor, delta_target=seed_epsilon / 2.0, eta=margin / 2.0
            )
            seeds.append(cert.y)
    except Exception:
        pass
    res = operator_norm_lower(
        ctx, identity_minus(P), budget, seed, extra_inits=tuple(seeds)
    )
    upper = 1.0 + pe.hi
    lower = res["lower"]
    return {
        "projection_norm": pe,
        "upper": upper,
        "lower": lower,
        "gap": (1.0 + pe.lo) - lower,
        "trajectory": res["trajectory"],
        "flip_seeded": bool(seeds),
    }


def daugavet_slice_test(
    ctx: DNormContext,
    x: PLFunction,
    S: SliceSpec,
    budget: int,
    seed: int,
    grid_cells: int = 512,
) -> dict:
    """Best ‖x + y‖.lo over certified slice members y found in budget.

    Purely empirical: on this space some (x, S) pairs plateau below
    2 − ε, which is the expected behavior away from the slice.
    """
    xe = d_norm(ctx, x)
    if max(xe.lo - 1.0, 1.0 - xe.hi, 0.0) > 0.05:
        raise DomainError("x must sit near the unit sphere")
    extra = list(x.breakpoints)
    extra.extend(t for t, _ in S.functional.atoms)
    if S.functional.density is not None:
        extra.extend(S.functional.density.breakpoints.tolist())
    gc = GridContext(ctx, grid_cells=grid_cells, extra_nodes=np.asarray(extra))
    anchor = None
    if len(S.functional.atoms) == 1 and S.functional.density is None:
        t0, w0 = S.functional.atoms[0]
        try:
            anchor = gc.sample_function(
                norming_bump(ctx, t0).scaled(math.copysign(1.0, w0))
            )
        except DomainError:
            anchor = None
    count = max(16, min(128, budget // 8))
    rows, evals = _slice_member_matrix(ctx, gc, S, count, seed, anchor_v=anchor)
    vx = gc.sample_function(x)
    if S.value(x) > 1.0 - S.epsilon and xe.hi <= 1.0 + 1e-9:
        rows = np.vstack([rows, vx[None, :]])
    lo, _ = gc.enclosures(vx[None, :] + rows)
    evals += rows.shape[0]
    k = int(np.argmax(lo))
    y_pl = gc.to_plfunction(rows[k])
    exact = d_norm(ctx, lin_comb(1.0, x, 1.0, y_pl)).lo
    return {
        "best": float(exact),
        "witness": y_pl,
        "members": int(rows.shape[0]),
        "evaluations": evals,
    }


# ---------------------------------------------------------------------------
# finite sup-norm sequence model (exact control experiment)
# ---------------------------------------------------------------------------


def c0_model_control(dim: int = 2, eps: float = 0.5) -> dict:
    """Exact slice geometry of the coordinate projection in (R^d, ‖·‖_∞).

    In the slice {y : y_1 > 1 − eps} every point is within distance 1 of
    e_1 (first coordinate pinched, others bounded by 1), so the equation
    ‖I − P‖ = 1 + ‖P‖ fails by gap 1 for P = e_1* ⊗ e_1.
    """
    if dim < 1:
        raise DomainError("dimension must be positive")
    if not 0.0 < eps <= 1.0:
        raise DomainError("eps must lie in (0, 1]")
    if dim == 1:
        return {
            "dim": 1,
            "max_distance": eps,
            "attained": False,
            "i_minus_p_norm": 0.0,
            "p_norm": 1.0,
            "equation_gap": 2.0,
            "note": "degenerate: I = P in one dimension",
        }
    # brute-force oracle over the vertices of the feasible box
    best = 0.0
    first_choices = (1.0 - eps + 1e-12, 1.0)
    for y1 in first_choices:
        for rest in itertools.product((-1.0, 1.0), repeat=dim - 1):
            y = np.array((y1,) + rest)
            best = max(best, float(np.max(np.abs(_e1(dim) - y))))
    # ‖I-P‖ exactly: sup over the ball of max_{j>=2} |y_j| = 1
    i_minus_p = 1.0
    p_norm = 1.0
    return {
        "dim": dim,
        "max_distance": best,
        "attained": True,
        "i_minus_p_norm": i_minus_p,
        "p_norm": p_norm,
        "equation_gap": (1.0 + p_norm) - i_minus_p,
    }


def _e1(dim: int) -> np.ndarray:
    out = np.zeros(dim)
    out[0] = 1.0
    return out
