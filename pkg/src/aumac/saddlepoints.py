"""Root finding and 1-D minimization for the saddlepoint conditions.

The admissible interval for the auxiliary variable is
(0, min{1, 1/(4t)}); every solver clamps a relative offset delta inside
it so all logarithms stay defined.  Roots that do not exist are returned
as ``None`` (the bound engine then charges probability 1 for the term).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from . import kernels
from .config import SystemConfig, _check_variant

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

ROOT_GRID = 256
ARGINF_GRID = 512
MIN_GRID = 64
_EDGE_FRACTION = 1e-9


@dataclass
class SaddleBrackets:
    """All saddlepoints needed for one (s, s1, t) evaluation.

    Both bracket roots are required for a mismatch cell: T_under fixes
    the exponent evaluation point and T_over certifies that the bracket
    pair encloses the tilted saddle.  ``feasible`` is False when either
    root is absent or the brackets come out inverted; the bound engine
    then charges probability 1 at that t.
    """

    t_upper_limit: float
    T_s: Optional[float]
    T_under: Optional[float]
    T_over: Optional[float]
    T_tilde: float
    T_star: Optional[float]
    feasible: bool


def t_upper_limit(t: float) -> float:
    return min(1.0, 0.25 / t)


def find_root_bracketed(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-12,
    last: bool = False,
) -> Optional[float]:
    """Locate a root of ``fn`` on [lo, hi]; ``None`` if no sign change.

    A 256-point grid is scanned for sign changes (``fn`` may be
    vectorized; non-finite values are treated as infeasible points); the
    first crossing is refined, or the last one when ``last`` is set.  The
    bracket is narrowed by bisection with secant acceleration.

    When the grid shows no sign change, the interior extremum working
    against the bulk sign is sharpened by golden section: functions of
    the bracket-root kind develop a narrow hump that pokes through zero
    over a sub-grid width, and missing it would misreport the root as
    absent.  If the sharpened extremum crosses zero, the two flanking
    crossings are recovered and the requested one is refined.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    grid = np.linspace(lo, hi, ROOT_GRID)
    vals = _vector(fn, grid)
    ok = np.isfinite(vals)
    sign = np.sign(vals)
    change = ok[:-1] & ok[1:] & (sign[:-1] * sign[1:] <= 0.0)
    idx = np.flatnonzero(change)
    if idx.size == 0:
        return _hump_root(fn, grid, vals, ok, tol, last)
    i = int(idx[-1] if last else idx[0])
    return _refine(fn, float(grid[i]), float(grid[i + 1]), float(vals[i]), float(vals[i + 1]), tol)


def _hump_root(fn, grid, vals, ok, tol, last) -> Optional[float]:
    """Recover a sub-grid zero crossing hidden inside a one-signed scan."""
    if not ok.any():
        return None
    masked_max = np.where(ok, vals, -math.inf)
    masked_min = np.where(ok, vals, math.inf)
    if float(np.max(masked_max)) < 0.0:
        i = int(np.argmax(masked_max))
        flip = 1.0
    elif float(np.min(masked_min)) > 0.0:
        i = int(np.argmin(masked_min))
        flip = -1.0
    else:
        return None
    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, len(grid) - 1)])
    if not a < b:
        return None
    # locating the extremum only needs enough precision to establish its
    # sign and a crossing bracket; the crossing itself is re-refined below
    x, neg_fx = _golden(
        lambda u: -flip * _scalar(fn, u), a, b, tol=max(tol, 1e-3 * (b - a))
    )
    if not math.isfinite(neg_fx):
        return None
    fx = -neg_fx / flip
    if flip * fx <= 0.0:
        # the sharpened extremum still does not reach zero: no root
        return None
    fa = _scalar(fn, a)
    fb = _scalar(fn, b)
    if last:
        if math.isfinite(fb) and fx * fb <= 0.0:
            return _refine(fn, x, b, fx, fb, tol)
        if math.isfinite(fa) and fa * fx <= 0.0:
            return _refine(fn, a, x, fa, fx, tol)
        return None
    if math.isfinite(fa) and fa * fx <= 0.0:
        return _refine(fn, a, x, fa, fx, tol)
    if math.isfinite(fb) and fx * fb <= 0.0:
        return _refine(fn, x, b, fx, fb, tol)
    return None


def _scalar(fn, x: float) -> float:
    try:
        v = float(fn(x))
    except ValueError:
        return math.nan
    return v


def _vector(fn, grid: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(fn(grid), dtype=float)
        if vals.shape == grid.shape:
            return vals
    except (ValueError, TypeError):
        pass
    return np.array([_scalar(fn, float(x)) for x in grid])


def _refine(fn, lo, hi, flo, fhi, tol) -> float:
    """Bisection with a secant step whenever it lands inside the bracket."""
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    for _ in range(200):
        if hi - lo <= tol:
            break
        x = 0.5 * (lo + hi)
        if fhi != flo:
            xs = lo - flo * (hi - lo) / (fhi - flo)
            if lo + 0.1 * (hi - lo) < xs < hi - 0.1 * (hi - lo):
                x = xs
        fx = _scalar(fn, x)
        if not math.isfinite(fx):
            x = 0.5 * (lo + hi)
            fx = _scalar(fn, x)
            if not math.isfinite(fx):
                break
        if fx == 0.0:
            return x
        if flo * fx < 0.0:
            hi, fhi = x, fx
        else:
            lo, flo = x, fx
    return 0.5 * (lo + hi)


def _interval(t: float) -> Tuple[float, float]:
    upper = t_upper_limit(t)
    delta = _EDGE_FRACTION * upper
    return delta, upper - delta


def solve_T_s(cfg: SystemConfig, s: int, t: float, variant: str = "thm1") -> Optional[float]:
    """Stationary point of the variant exponent, or None if absent."""
    d1 = kernels.variant_d1(variant)
    lo, hi = _interval(t)
    return find_root_bracketed(lambda ts: d1(cfg, s, t, ts), lo, hi, tol=1e-11)


def solve_T_under(
    cfg: SystemConfig, s: int, s1: int, t: float, variant: str = "thm1"
) -> Optional[float]:
    """Root of d1(t_s) - gamma_underline(t_s), or None."""
    d1 = kernels.variant_d1(variant)
    lo, hi = _interval(t)
    return find_root_bracketed(
        lambda ts: d1(cfg, s, t, ts) - kernels.gamma_underline(cfg, s, s1, t, ts),
        lo,
        hi,
        tol=1e-11,
    )


def solve_T_over(
    cfg: SystemConfig, s: int, s1: int, t: float, variant: str = "thm1"
) -> Optional[float]:
    """Root of d1(t_s) - gamma_bar(t_s), or None.

    The last crossing on the interval is used so the bracket pair always
    encloses the tilted saddle.
    """
    d1 = kernels.variant_d1(variant)
    lo, hi = _interval(t)
    return find_root_bracketed(
        lambda ts: d1(cfg, s, t, ts) - kernels.gamma_bar(cfg, s, s1, t, ts),
        lo,
        hi,
        tol=1e-11,
        last=True,
    )


def solve_T_tilde(cfg: SystemConfig, s: int, t: float, variant: str = "thm1") -> float:
    """Minimizer of the second derivative over the admissible interval.

    Grid scan plus golden-section refinement; for a constant second
    derivative (P = 0) the interval midpoint is returned (tie rule).
    """
    _check_variant(variant)
    lo, hi = _interval(t)
    grid = np.linspace(lo, hi, ARGINF_GRID)
    vals = np.asarray(kernels.g_exponent_d2(cfg, s, t, grid), dtype=float)
    finite = np.isfinite(vals)
    if not finite.any():
        return 0.5 * (lo + hi)
    vmin = np.nanmin(vals)
    vmax = np.nanmax(vals)
    if vmax - vmin <= 1e-15 * max(1.0, abs(vmax)):
        return 0.5 * (lo + hi)
    i = int(np.nanargmin(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, ARGINF_GRID - 1)]
    fn = lambda ts: kernels.g_exponent_d2(cfg, s, t, ts)
    x, _ = _golden(fn, float(a), float(b), tol=1e-9)
    return x


def _golden(fn, a: float, b: float, tol: float) -> Tuple[float, float]:
    """Golden-section descent returning the best feasible point seen.

    The minimum often sits on a feasibility edge (the value drops toward
    the boundary of the feasible t-window and is undefined beyond it), so
    the final midpoint may land infeasible; remembering the best visited
    evaluation keeps the result meaningful there.
    """
    best_x, best_f = math.nan, math.inf

    def visit(x: float) -> float:
        nonlocal best_x, best_f
        f = _scalar(fn, x)
        if math.isfinite(f) and f < best_f:
            best_x, best_f = x, f
        return f

    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = visit(c)
    fd = visit(d)
    while b - a > tol:
        if not math.isfinite(fc):
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = visit(d)
            continue
        if not math.isfinite(fd):
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = visit(c)
            continue
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = visit(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = visit(d)
    visit(0.5 * (a + b))
    return best_x, best_f


ORDER_SLACK = 1e-8


def assemble_brackets(
    cfg: SystemConfig, s: int, s1: int, t: float, variant: str = "thm1"
) -> SaddleBrackets:
    """Solve every saddlepoint needed for the (s, s1, t) cell.

    With s1 = 0 only T_s and T_tilde are relevant.  The Lemma-1 ordering
    T_under <= T_s <= T_over is enforced up to slack; violations flag
    the cell infeasible rather than being silently accepted.
    """
    upper = t_upper_limit(t)
    T_s = solve_T_s(cfg, s, t, variant)
    T_tilde = solve_T_tilde(cfg, s, t, variant)
    if s1 == 0:
        return SaddleBrackets(upper, T_s, None, None, T_tilde, None, T_s is not None)
    T_under = solve_T_under(cfg, s, s1, t, variant)
    T_over = solve_T_over(cfg, s, s1, t, variant)
    feasible = T_under is not None and T_over is not None
    T_star = None
    if feasible:
        T_star = min(T_over * (1.0 - T_over), T_under * (1.0 - T_under))
        if T_under > T_over + ORDER_SLACK:
            feasible = False
        if T_star <= 0.0:
            feasible = False
    return SaddleBrackets(upper, T_s, T_under, T_over, T_tilde, T_star, feasible)


def minimize_scalar(
    fn: Callable[[float], float],
    lo: float,
    hi: float,
    log_spaced: bool = False,
    tol: float = 1e-6,
    grid_points: int = MIN_GRID,
) -> Tuple[Optional[float], float]:
    """Coarse grid scan plus golden-section refinement.

    Infeasible evaluations (exceptions, NaN, +inf) are skipped; if every
    grid point is infeasible the result is (None, inf).  Ties resolve to
    the lowest grid point so runs are deterministic.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    if log_spaced:
        if lo <= 0.0:
            raise ValueError("log-spaced grid needs lo > 0")
        grid = np.exp(np.linspace(math.log(lo), math.log(hi), grid_points))
    else:
        grid = np.linspace(lo, hi, grid_points)
    vals = np.array([_scalar(fn, float(x)) for x in grid])
    vals[~np.isfinite(vals)] = math.inf
    i = int(np.argmin(vals))
    if not math.isfinite(vals[i]):
        return None, math.inf
    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, grid_points - 1)])
    x, fx = _golden(fn, a, b, tol=tol)
    if not math.isfinite(fx) or fx > vals[i]:
        return float(grid[i]), float(vals[i])
    return x, fx
