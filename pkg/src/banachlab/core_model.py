"""Exact piecewise-linear functions and atom+density measures on [0,1].

Everything in this module is closed-form arithmetic over machine floats:
suprema of a PL function are attained at breakpoints, a product of two PL
functions integrates exactly by Simpson's rule per merged piece, and |PL|
splits pieces at zero crossings.  No grids and no tolerances enter here;
downstream certificates rely on that.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import DomainError


def pl_eval(bx: np.ndarray, by: np.ndarray, t):
    """PL interpolation on breakpoint arrays; exact at breakpoints."""
    return _kernels.interp_np(bx, by, t)


@dataclass(frozen=True)
class Enclosure:
    """A certified two-sided bracket [lo, hi] for a truncated quantity."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo <= self.hi):
            raise DomainError(f"invalid enclosure [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, v: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= v <= self.hi + slack


@dataclass(frozen=True, eq=False)
class PLFunction:
    """A continuous piecewise-linear function on [0,1].

    ``breakpoints`` is strictly increasing, starts at 0 and ends at 1;
    ``values`` has the same length.  Instances are immutable.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bx = np.ascontiguousarray(self.breakpoints, dtype=np.float64)
        by = np.ascontiguousarray(self.values, dtype=np.float64)
        if bx.ndim != 1 or by.ndim != 1 or bx.shape != by.shape or bx.size < 2:
            raise DomainError("breakpoints/values must be 1-d arrays of equal length >= 2")
        if bx[0] != 0.0 or bx[-1] != 1.0:
            raise DomainError("breakpoints must start at 0 and end at 1")
        if not np.all(np.diff(bx) > 0):
            raise DomainError("breakpoints must be strictly increasing")
        if not (np.all(np.isfinite(bx)) and np.all(np.isfinite(by))):
            raise DomainError("breakpoints/values must be finite")
        bx.setflags(write=False)
        by.setflags(write=False)
        object.__setattr__(self, "breakpoints", bx)
        object.__setattr__(self, "values", by)

    # -- constructors -------------------------------------------------

    @staticmethod
    def constant(c: float) -> "PLFunction":
        return PLFunction(np.array([0.0, 1.0]), np.array([float(c), float(c)]))

    @staticmethod
    def from_points(points: Sequence[tuple[float, float]]) -> "PLFunction":
        pts = sorted(points)
        return PLFunction(np.array([p[0] for p in pts]), np.array([p[1] for p in pts]))

    @staticmethod
    def tent(peak: float = 0.5, height: float = 1.0) -> "PLFunction":
        """Zero at 0 and 1, linear up to ``height`` at ``peak``."""
        if not 0.0 < peak < 1.0:
            raise DomainError("tent peak must be interior")
        return PLFunction(np.array([0.0, peak, 1.0]), np.array([0.0, float(height), 0.0]))

    # -- evaluation ---------------------------------------------------

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        ta = np.asarray(t, dtype=np.float64)
        if np.any(ta < 0.0) or np.any(ta > 1.0):
            raise DomainError("evaluation point outside [0,1]")
        out = pl_eval(self.breakpoints, self.values, ta)
        return float(out) if np.isscalar(t) or ta.ndim == 0 else out

    def sup_abs(self) -> float:
        """Max-norm; exact, attained at a breakpoint."""
        return float(np.max(np.abs(self.values)))

    def lipschitz_bound(self) -> float:
        slopes = np.diff(self.values) / np.diff(self.breakpoints)
        return float(np.max(np.abs(slopes)))

    def scaled(self, a: float) -> "PLFunction":
        return PLFunction(self.breakpoints, a * self.values)

    def is_zero(self) -> bool:
        return bool(np.all(self.values == 0.0))


@dataclass(frozen=True)
class Interval:
    """An interval in [0,1]; openness flags matter only for membership."""

    left: float
    right: float
    left_open: bool = True
    right_open: bool = True

    def __post_init__(self):
        if not self.left < self.right:
            raise DomainError(f"degenerate interval [{self.left}, {self.right}]")

    @property
    def length(self) -> float:
        return self.right - self.left

    def contains(self, t: float) -> bool:
        left_ok = self.left < t or (not self.left_open and t == self.left)
        right_ok = t < self.right or (not self.right_open and t == self.right)
        return left_ok and right_ok

    def closure_contains(self, t: float) -> bool:
        return self.left <= t <= self.right

    def clamped(self) -> tuple[float, float]:
        return max(self.left, 0.0), min(self.right, 1.0)


def lipschitz_bound(f: PLFunction) -> float:
    return f.lipschitz_bound()


def sup_abs_on(f: PLFunction, interval: Interval) -> float:
    """Exact supremum of |f| over interval ∩ [0,1].

    Open endpoints use the limit value: for a continuous function the sup
    over an open interval equals the sup over its closure.
    """
    a, b = interval.clamped()
    if a > b:
        raise DomainError("interval does not meet [0,1]")
    if a == b:
        return abs(f.eval(a))
    out = _kernels.sup_abs_many(
        f.breakpoints, f.values, np.array([a]), np.array([b])
    )
    return float(out[0])


def lin_comb(a: float, f: PLFunction, b: float, g: PLFunction) -> PLFunction:
    """a·f + b·g on the merged breakpoint set; exact at every breakpoint."""
    bx = np.union1d(f.breakpoints, g.breakpoints)
    by = a * pl_eval(f.breakpoints, f.values, bx) + b * pl_eval(
        g.breakpoints, g.values, bx
    )
    return PLFunction(bx, by)


def _abs_piece_integral(x0, x1, y0, y1):
    """Exact integral of |linear| over [x0, x1]."""
    if y0 * y1 >= 0.0:
        return abs(y0 + y1) * (x1 - x0) / 2.0
    # one interior sign change
    xc = x0 + (x1 - x0) * y0 / (y0 - y1)
    return (abs(y0) * (xc - x0) + abs(y1) * (x1 - xc)) / 2.0


def abs_integral(f: PLFunction, lo: float = 0.0, hi: float = 1.0) -> float:
    """Exact ∫|f| over [lo, hi] ⊆ [0,1]."""
    if not (0.0 <= lo <= hi <= 1.0):
        raise DomainError("integration range must sit inside [0,1]")
    if lo == hi:
        return 0.0
    cuts = np.union1d(f.breakpoints, np.array([lo, hi]))
    cuts = cuts[(cuts >= lo) & (cuts <= hi)]
    vals = pl_eval(f.breakpoints, f.values, cuts)
    total = 0.0
    for k in range(cuts.size - 1):
        total += _abs_piece_integral(cuts[k], cuts[k + 1], vals[k], vals[k + 1])
    return total


@dataclass(frozen=True, eq=False)
class Measure:
    """Finitely many atoms plus a signed piecewise-linear density.

    This family is closed under the constructions used downstream: dirac
    functionals, Lebesgue measure, and finite combinations all live here,
    and the Lebesgue decomposition is immediate (atoms vs density).
    """

    atoms: tuple[tuple[float, float], ...] = ()
    density: PLFunction | None = None

    def __post_init__(self):
        atoms = tuple((float(t), float(w)) for t, w in self.atoms)
        locs = [t for t, _ in atoms]
        if len(set(locs)) != len(locs):
            raise DomainError("atom locations must be pairwise distinct")
        for t, _ in atoms:
            if not 0.0 <= t <= 1.0:
                raise DomainError("atom location outside [0,1]")
        object.__setattr__(self, "atoms", atoms)

    # -- constructors -------------------------------------------------

    @staticmethod
    def dirac(t: float, w: float = 1.0) -> "Measure":
        return Measure(atoms=((t, w),))

    @staticmethod
    def lebesgue() -> "Measure":
        return Measure(density=PLFunction.constant(1.0))

    # -- exact quantities ----------------------------------------------

    def total_variation(self) -> float:
        tv = sum(abs(w) for _, w in self.atoms)
        if self.density is not None:
            tv += abs_integral(self.density)
        return tv

    def abs_mass_on(self, lo: float, hi: float, open_ends: bool = True) -> float:
        """|m| of the interval (lo, hi); atoms at the endpoints excluded."""
        mass = 0.0
        for t, w in self.atoms:
            inside = lo < t < hi if open_ends else lo <= t <= hi
            if inside:
                mass += abs(w)
        if self.density is not None:
            mass += abs_integral(self.density, max(lo, 0.0), min(hi, 1.0))
        return mass

    def scaled(self, a: float) -> "Measure":
        d = None if self.density is None else self.density.scaled(a)
        return Measure(tuple((t, a * w) for t, w in self.atoms), d)

    def is_zero(self) -> bool:
        dens_zero = self.density is None or self.density.is_zero()
        return dens_zero and all(w == 0.0 for _, w in self.atoms)


def measure_combine(a: float, m1: Measure, b: float, m2: Measure) -> Measure:
    """a·m1 + b·m2: atom weights merge at shared locations, densities add."""
    atoms: dict[float, float] = {}
    for t, w in m1.atoms:
        atoms[t] = atoms.get(t, 0.0) + a * w
    for t, w in m2.atoms:
        atoms[t] = atoms.get(t, 0.0) + b * w
    if m1.density is None and m2.density is None:
        dens = None
    elif m1.density is None:
        dens = m2.density.scaled(b)
    elif m2.density is None:
        dens = m1.density.scaled(a)
    else:
        dens = lin_comb(a, m1.density, b, m2.density)
    return Measure(tuple(sorted(atoms.items())), dens)


def integrate(f: PLFunction, m: Measure, lo: float = 0.0, hi: float = 1.0) -> float:
    """Exact ∫ f dm over [lo, hi]: atom sum plus a piecewise-quadratic part.

    On each merged linear piece f·density is quadratic, so Simpson's rule
    is exact.  Atoms exactly at ``lo``/``hi`` count only when the range is
    the full interval.
    """
    if not (0.0 <= lo <= hi <= 1.0):
        raise DomainError("integration range must sit inside [0,1]")
    full = lo == 0.0 and hi == 1.0
    total = 0.0
    for t, w in m.atoms:
        inside = (lo <= t <= hi) if full else (lo < t < hi)
        if inside:
            total += w * f.eval(t)
    rho = m.density
    if rho is not None and lo < hi:
        cuts = np.union1d(np.union1d(f.breakpoints, rho.breakpoints), np.array([lo, hi]))
        cuts = cuts[(cuts >= lo) & (cuts <= hi)]
        fv = pl_eval(f.breakpoints, f.values, cuts)
        rv = pl_eval(rho.breakpoints, rho.values, cuts)
        for k in range(cuts.size - 1):
            x0, x1 = cuts[k], cuts[k + 1]
            xm = 0.5 * (x0 + x1)
            pm = f.eval(xm) * rho.eval(xm)
            total += (x1 - x0) / 6.0 * (fv[k] * rv[k] + 4.0 * pm + fv[k + 1] * rv[k + 1])
    return total


# ---------------------------------------------------------------------------
# JSON round trip (file formats used by the CLI)
# ---------------------------------------------------------------------------


def function_to_dict(f: PLFunction) -> dict:
    return {"breakpoints": f.breakpoints.tolist(), "values": f.values.tolist()}


def function_from_dict(d: dict) -> PLFunction:
    return PLFunction(np.asarray(d["breakpoints"]), np.asarray(d["values"]))


def measure_to_dict(m: Measure) -> dict:
    out: dict = {"atoms": [{"t": t, "w": w} for t, w in m.atoms]}
    out["density"] = None if m.density is None else function_to_dict(m.density)
    return out


def measure_from_dict(d: dict) -> Measure:
    atoms = tuple((a["t"], a["w"]) for a in d.get("atoms", ()))
    dens = d.get("density")
    return Measure(atoms, None if dens is None else function_from_dict(dens))


def load_function(path: str) -> PLFunction:
    with open(path, encoding="utf-8") as fh:
        return function_from_dict(json.load(fh))


def load_measure(path: str) -> Measure:
    with open(path, encoding="utf-8") as fh:
        return measure_from_dict(json.load(fh))


def dump_function(f: PLFunction, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(function_to_dict(f), fh)


def dump_measure(m: Measure, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(measure_to_dict(m), fh)
