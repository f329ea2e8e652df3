"""Desk-scale verification of the matrix machinery behind the bounds.

The production bound never touches eigenvalues — that is the whole point
of the bracket lemma.  This module rebuilds the avoided objects on small
explicit matrices (delay-mismatch covariances, Gaussian quadratic-form
MGFs, Gershgorin bounds, the q1/q2 bracket functions) and checks the
analytical claims directly, with a hand-rolled cyclic Jacobi eigensolver
cross-checked against numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

SYM_TOL = 1e-12


@dataclass
class SymMatrix:
    """Dense symmetric matrix wrapper with an asserted-symmetry invariant."""

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("need a square matrix")
        scale = max(1.0, float(np.abs(a).max()))
        if float(np.abs(a - a.T).max()) > SYM_TOL * scale:
            raise ValueError("matrix is not symmetric")
        self.entries = 0.5 * (a + a.T)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def sym_eigenvalues(m: SymMatrix, tol: float = 1e-14, max_sweeps: int = 64) -> np.ndarray:
    """All eigenvalues by cyclic Jacobi rotations, ascending.

    Each sweep annihilates every off-diagonal entry once; convergence is
    declared when the off-diagonal Frobenius mass falls below tol times
    the matrix scale.
    """
    a = m.entries.copy()
    n = a.shape[0]
    scale = max(1.0, float(np.abs(a).max()))
    for _ in range(max_sweeps):
        off = math.sqrt(max(float((a * a).sum() - (np.diag(a) ** 2).sum()), 0.0))
        if off <= tol * scale * n:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= tol * scale:
                    continue
                theta = 0.5 * (a[q, q] - a[p, p]) / apq
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.sqrt(theta * theta + 1.0)
                )
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    return np.sort(np.diag(a))


def quadratic_form_mgf(sigma: SymMatrix, a_diag: Sequence[float]) -> float:
    """E[exp(-B' A B)] for B ~ N(0, Sigma) and diagonal PSD A.

    Equals the product of (1 + 2 lambda_i)^(-1/2) over the eigenvalues of
    A^(1/2) Sigma A^(1/2), which shares its nonzero spectrum with the
    G' A G form for any factor G G' = Sigma.
    """
    a = np.asarray(a_diag, dtype=float)
    if (a < 0.0).any():
        raise ValueError("A must be PSD (nonnegative diagonal)")
    root = np.sqrt(a)
    core = SymMatrix(root[:, None] * sigma.entries * root[None, :])
    lam = sym_eigenvalues(core)
    if (1.0 + 2.0 * lam <= 0.0).any():
        raise ValueError("MGF diverges: 1 + 2*lambda <= 0")
    return float(np.prod((1.0 + 2.0 * lam) ** -0.5))


def _shift_matrix(n: int, d: int) -> np.ndarray:
    return np.eye(n)[:, np.arange(-d % n, n + (-d % n)) % n].T


def delay_mismatch_covariance(
    n: int, p: float, d_true: Sequence[int], d_hat: Sequence[int]
) -> SymMatrix:
    """Covariance of the summed shift-mismatch residual of s1 users.

    Each user with a wrong delay contributes the covariance of
    S^d X - S^d_hat X for X ~ N(0, p I), which is p (2I - S^a - S^-a)
    with a the delay offset; matched users contribute nothing.
    """
    if len(d_true) != len(d_hat):
        raise ValueError("delay lists must have equal length")
    sigma = np.zeros((n, n))
    for d, dh in zip(d_true, d_hat):
        a = (d - dh) % n
        if a == 0:
            continue
        sigma += p * (2.0 * np.eye(n) - _shift_matrix(n, a) - _shift_matrix(n, -a))
    return SymMatrix(sigma)


@dataclass
class GershgorinReport:
    max_eigenvalue: float
    bound: float
    passed: bool


def gershgorin_check(
    sigma: SymMatrix, a_diag: Sequence[float], s1: int, p: float, f1: float
) -> GershgorinReport:
    """Check max eig of A^(1/2) Sigma A^(1/2) against the 4*s1*f1*p cap.

    The cap follows from Gershgorin circles: each mismatched user adds at
    most 4p to any row 1-norm of Sigma, and the diagonal weights are at
    most f1.
    """
    a = np.asarray(a_diag, dtype=float)
    root = np.sqrt(a)
    core = SymMatrix(root[:, None] * sigma.entries * root[None, :])
    lam_max = float(sym_eigenvalues(core)[-1])
    cap = 4.0 * s1 * f1 * p
    return GershgorinReport(lam_max, cap, lam_max <= cap + 1e-9)


# ---------------------------------------------------------------------------
# bracket functions q1/q2 and the saddle-bracket experiment


def _lambda_cap(k: SymMatrix, a_diag: np.ndarray) -> float:
    """Row-sum cap: max 1-norm over rows of K A(t_s)."""
    prod = k.entries * a_diag[None, :]
    return float(np.abs(prod).sum(axis=1).max())


def q1_bracket(k: SymMatrix, da_diag: np.ndarray, a_diag: np.ndarray) -> float:
    """Upper bracket on the tilted trace derivative (three sign cases)."""
    rho_lo = float(da_diag.min())
    rho_hi = float(da_diag.max())
    tr_kda = float((np.diag(k.entries) * da_diag).sum())
    if rho_lo >= 0.0:
        return tr_kda
    if rho_hi > 0.0:
        return rho_hi * float(np.trace(k.entries))
    cap = _lambda_cap(k, a_diag)
    return tr_kda / (1.0 + 2.0 * cap)


def q2_bracket(k: SymMatrix, da_diag: np.ndarray, a_diag: np.ndarray) -> float:
    """Lower bracket, mirroring q1 with the cases swapped."""
    rho_lo = float(da_diag.min())
    rho_hi = float(da_diag.max())
    tr_kda = float((np.diag(k.entries) * da_diag).sum())
    cap = _lambda_cap(k, a_diag)
    if rho_lo >= 0.0:
        return tr_kda / (1.0 + 2.0 * cap)
    if rho_hi > 0.0:
        return rho_lo * float(np.trace(k.entries))
    return tr_kda


def _matched_eigen_derivative(
    k: SymMatrix, a_fn: Callable[[float], np.ndarray], ts: float, h: float
) -> Tuple[np.ndarray, np.ndarray]:
    """(eigenvalues, d/dt_s eigenvalues) of K^(1/2) A K^(1/2), matched by order.

    Central differences on the sorted spectra; valid only away from
    eigenvalue crossings (the caller rejects close-gap instances).
    """
    root = _psd_sqrt(k)

    def spec(x: float) -> np.ndarray:
        core = SymMatrix(root @ np.diag(a_fn(x)) @ root)
        return sym_eigenvalues(core)

    lam = spec(ts)
    dlam = (spec(ts + h) - spec(ts - h)) / (2.0 * h)
    return lam, dlam


def _psd_sqrt(k: SymMatrix) -> np.ndarray:
    vals, vecs = np.linalg.eigh(k.entries)
    vals = np.clip(vals, 0.0, None)
    return vecs @ np.diag(np.sqrt(vals)) @ vecs.T


@dataclass
class BracketInstanceReport:
    T_exact: Optional[float]
    T_under: Optional[float]
    T_over: Optional[float]
    branch: str
    passed: bool
    rejected: bool
    reason: str = ""


def lemma1_bracket_check(
    k: SymMatrix,
    a_fn: Callable[[float], np.ndarray],
    da_fn: Callable[[float], np.ndarray],
    target: float,
    lo: float,
    hi: float,
    grid: int = 400,
    h: float = 1e-6,
    min_gap: float = 1e-6,
) -> BracketInstanceReport:
    """Compare the exact tilted saddle against its eigenvalue-free brackets.

    The exact stationarity condition sum_i dlam_i / (1 + 2 lam_i) =
    target is solved on a dense grid via eigen-decomposition; the bracket
    roots replace the sum with q1 (upper) and q2 (lower).  Instances with
    eigenvalue gaps below min_gap are rejected (derivative matching is
    ambiguous across crossings) rather than risked.
    """
    ts_grid = np.linspace(lo, hi, grid)

    def exact_fn(ts: float) -> float:
        lam, dlam = _matched_eigen_derivative(k, a_fn, ts, h)
        if lam.size > 1 and float(np.diff(lam).min()) < min_gap:
            raise ValueError("eigenvalue crossing")
        return float((dlam / (1.0 + 2.0 * lam)).sum()) - target

    def q1_fn(ts: float) -> float:
        return q1_bracket(k, da_fn(ts), a_fn(ts)) - target

    def q2_fn(ts: float) -> float:
        return q2_bracket(k, da_fn(ts), a_fn(ts)) - target

    da0 = da_fn(0.5 * (lo + hi))
    if float(da0.min()) >= 0.0:
        branch = "nonnegative"
    elif float(da0.max()) > 0.0:
        branch = "mixed"
    else:
        branch = "nonpositive"
    try:
        T_exact = _grid_root(exact_fn, ts_grid)
    except ValueError as err:
        return BracketInstanceReport(None, None, None, branch, False, True, str(err))
    T_over = _grid_root(q1_fn, ts_grid)
    T_under = _grid_root(q2_fn, ts_grid)
    if T_exact is None or T_over is None or T_under is None:
        return BracketInstanceReport(T_exact, T_under, T_over, branch, False,
                                     True, "missing root")
    slack = 1e-6 * (hi - lo)
    passed = T_under <= T_exact + slack and T_exact <= T_over + slack
    return BracketInstanceReport(T_exact, T_under, T_over, branch, passed, False)


def _grid_root(fn: Callable[[float], float], grid: np.ndarray) -> Optional[float]:
    vals = np.array([fn(float(x)) for x in grid])
    sgn = np.sign(vals)
    idx = np.flatnonzero(np.isfinite(vals[:-1]) & np.isfinite(vals[1:])
                         & (sgn[:-1] * sgn[1:] <= 0.0))
    if idx.size == 0:
        return None
    i = int(idx[0])
    lo, hi = float(grid[i]), float(grid[i + 1])
    flo = float(vals[i])
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if flo * fm <= 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def trace_inequality_gap(x: np.ndarray) -> np.ndarray:
    """sqrt(1 + x + x^2/12) * log(1+x) - x, nonnegative for x >= 0."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + x + x * x / 12.0) * np.log1p(x) - x
