"""Closed-form scalar kernels of the two PUPE upper bounds.

Every exponent, derivative, combinatorial log-factor, and tail term used
by the bound assembly lives here as a pure function.  All t_s-dependent
functions broadcast over numpy arrays so grid scans stay vectorized;
scalar inputs that hit a non-positive log argument or denominator raise
:class:`InfeasiblePointError` instead of returning NaN.

Combinatorial quantities are carried in the natural-log domain
throughout; the codebook size M = 2**payload_bits is handled as a float
(exact enough at ~1e-28 relative error for 100-bit payloads) so the hot
path never touches big integers.
"""

from __future__ import annotations

import math

import numpy as np

from .config import InfeasiblePointError, SystemConfig, _check_variant

_LOG_2PI = math.log(2.0 * math.pi)


def _finalize(value, scalar_input: bool):
    """Return a python float for scalar inputs, raising on NaN."""
    if scalar_input:
        value = float(value)
        if math.isnan(value):
            raise InfeasiblePointError("non-positive log argument or denominator")
    return value


def _safe_log(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(x > 0.0, np.log(np.where(x > 0.0, x, 1.0)), np.nan)


def log_factorial(k: int) -> float:
    """ln k! via log-gamma."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return math.lgamma(k + 1.0)


def log_binomial(n_items: float, k: int) -> float:
    """ln C(n_items, k) for possibly astronomically large n_items.

    ``n_items`` is accepted as a float (e.g. 2.0**100); the product form
    sum(ln(n - i)) keeps full relative precision without big integers.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if n_items < k:
        raise ValueError(f"need n_items >= k, got {n_items} < {k}")
    if k == 0 or n_items == k:
        return 0.0
    total = 0.0
    for i in range(k):
        total += math.log(n_items - i)
    return total - log_factorial(k)


def log_theta(cfg: SystemConfig, s: int) -> float:
    """ln of the codeword/delay enumeration factor C(M-Ka, s)*(1+Dm)**s."""
    if not 1 <= s <= cfg.ka:
        raise ValueError("need 1 <= s <= ka")
    return log_binomial(cfg.m - cfg.ka, s) + s * math.log1p(cfg.dm)


def log_theta2(cfg: SystemConfig, s: int) -> float:
    """ln of the delay-informed enumeration factor C(M-Ka, s)*s!."""
    if not 1 <= s <= cfg.ka:
        raise ValueError("need 1 <= s <= ka")
    return log_binomial(cfg.m - cfg.ka, s) + log_factorial(s)


def f_kernel(iota: int, s: int, p: float, t: float, t_s):
    """Chernoff tilt kernel f_iota; f_2 uses the doubled-variance band."""
    if iota not in (1, 2):
        raise ValueError("iota must be 1 or 2")
    scalar = np.isscalar(t_s)
    ts = np.asarray(t_s, dtype=float)
    shrink = 1.0 - 2.0 * iota * t * ts
    num = shrink * t * ts
    den = 1.0 + 2.0 * s * p * t * (1.0 + ts) * shrink
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), np.nan)
    return _finalize(out, scalar)


def f_kernel_dts(iota: int, s: int, p: float, t: float, t_s):
    """Analytic d f_iota / d t_s (quotient rule on the kernel)."""
    if iota not in (1, 2):
        raise ValueError("iota must be 1 or 2")
    scalar = np.isscalar(t_s)
    ts = np.asarray(t_s, dtype=float)
    c = 2.0 * iota * t
    num = t * ts - c * t * ts * ts
    dnum = t - 2.0 * c * t * ts
    a = 2.0 * s * p * t
    den = 1.0 + a * (1.0 + ts) * (1.0 - c * ts)
    dden = a * (1.0 - c * (1.0 + 2.0 * ts))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(
            den > 0.0,
            (dnum * den - num * dden) / np.where(den > 0.0, den * den, 1.0),
            np.nan,
        )
    return _finalize(out, scalar)


def _g_pieces(cfg: SystemConfig, s: int, t: float, t_s):
    """Shared sub-expressions of the exponent and its derivatives."""
    ts = np.asarray(t_s, dtype=float)
    a = 2.0 * s * cfg.p * t
    u1 = 1.0 + a * (1.0 + ts) * (1.0 - 2.0 * t * ts)
    u2 = 1.0 + a * (1.0 + ts) * (1.0 - 4.0 * t * ts)
    du1 = a * (1.0 - 2.0 * t * (1.0 + 2.0 * ts))
    du2 = a * (1.0 - 4.0 * t * (1.0 + 2.0 * ts))
    ddu1 = -4.0 * a * t
    ddu2 = -8.0 * a * t
    return ts, a, u1, u2, du1, du2, ddu1, ddu2


def g_exponent(cfg: SystemConfig, s: int, t: float, t_s):
    """Saddlepoint exponent of the no-delay-information bound."""
    scalar = np.isscalar(t_s)
    ts, a, u1, u2, _, _, _, _ = _g_pieces(cfg, s, t, t_s)
    dm = cfg.dm
    out = (
        ts * log_theta(cfg, s)
        - 0.5 * cfg.n * (ts - 1.0) * math.log1p(a)
        - 0.5 * dm * _safe_log(u2)
        - 0.5 * (cfg.n - dm) * _safe_log(u1)
    )
    return _finalize(out, scalar)


def g_exponent_d1(cfg: SystemConfig, s: int, t: float, t_s):
    """First partial derivative of the exponent in t_s."""
    scalar = np.isscalar(t_s)
    ts, a, u1, u2, du1, du2, _, _ = _g_pieces(cfg, s, t, t_s)
    dm = cfg.dm
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(
            (u1 > 0.0) & (u2 > 0.0),
            log_theta(cfg, s)
            - 0.5 * cfg.n * math.log1p(a)
            - 0.5 * dm * du2 / np.where(u2 > 0.0, u2, 1.0)
            - 0.5 * (cfg.n - dm) * du1 / np.where(u1 > 0.0, u1, 1.0),
            np.nan,
        )
    return _finalize(out, scalar)


def g_exponent_d2(cfg: SystemConfig, s: int, t: float, t_s):
    """Second partial derivative of the exponent in t_s."""
    scalar = np.isscalar(t_s)
    ts, a, u1, u2, du1, du2, ddu1, ddu2 = _g_pieces(cfg, s, t, t_s)
    dm = cfg.dm
    with np.errstate(invalid="ignore", divide="ignore"):
        r1 = du1 / np.where(u1 > 0.0, u1, 1.0)
        r2 = du2 / np.where(u2 > 0.0, u2, 1.0)
        out = np.where(
            (u1 > 0.0) & (u2 > 0.0),
            -0.5 * dm * (ddu2 / np.where(u2 > 0.0, u2, 1.0) - r2 * r2)
            - 0.5 * (cfg.n - dm) * (ddu1 / np.where(u1 > 0.0, u1, 1.0) - r1 * r1),
            np.nan,
        )
    return _finalize(out, scalar)


def _theta_shift(cfg: SystemConfig, s: int) -> float:
    """Linear t_s coefficient separating the two variants' exponents."""
    return s * math.log1p(cfg.dm) - log_factorial(s)


def g2_exponent(cfg: SystemConfig, s: int, t: float, t_s):
    """Delay-informed exponent: g minus t_s*(s*ln(1+Dm) - ln s!)."""
    scalar = np.isscalar(t_s)
    ts = np.asarray(t_s, dtype=float)
    out = g_exponent(cfg, s, t, ts) - ts * _theta_shift(cfg, s)
    return _finalize(out, scalar)


def g2_exponent_d1(cfg: SystemConfig, s: int, t: float, t_s):
    return g_exponent_d1(cfg, s, t, t_s) - _theta_shift(cfg, s)


def g2_exponent_d2(cfg: SystemConfig, s: int, t: float, t_s):
    """Identical to g_exponent_d2; the correction is linear in t_s."""
    return g_exponent_d2(cfg, s, t, t_s)


def variant_exponent(variant: str):
    _check_variant(variant)
    return g_exponent if variant == "thm1" else g2_exponent


def variant_d1(variant: str):
    _check_variant(variant)
    return g_exponent_d1 if variant == "thm1" else g2_exponent_d1


def variant_d2(variant: str):
    _check_variant(variant)
    return g_exponent_d2


def lambda_bar(s1: int, p: float, f1) -> float:
    """Gershgorin eigenvalue cap 4*s1*f1*P of the mismatch quadratic form."""
    return 4.0 * s1 * f1 * p


def _penalty(cfg: SystemConfig, s: int, s1: int, t: float, t_s):
    f1 = f_kernel(1, s, cfg.p, t, t_s)
    f2 = f_kernel(2, s, cfg.p, t, t_s)
    lb = lambda_bar(s1, cfg.p, f1)
    af = cfg.dm / cfg.n
    return (
        2.0 * cfg.n * s1 * cfg.p * (af * f2 + (1.0 - af) * f1)
        / np.sqrt(1.0 + 2.0 * lb + lb * lb / 3.0)
    )


def _check_s1(s1) -> None:
    if np.any(np.asarray(s1) < 1):
        raise ValueError("mismatch kernels need s1 >= 1")


def g_bar_exponent(cfg: SystemConfig, s: int, s1, t: float, t_s, variant: str = "thm1"):
    """Variant exponent minus the delay-mismatch trace penalty.

    ``s1`` may be an array broadcast against ``t_s``.
    """
    _check_s1(s1)
    scalar = np.isscalar(t_s)
    base = variant_exponent(variant)(cfg, s, t, np.asarray(t_s, dtype=float))
    out = base - _penalty(cfg, s, s1, t, np.asarray(t_s, dtype=float))
    return _finalize(out, scalar)


def gamma_bar(cfg: SystemConfig, s: int, s1, t: float, t_s):
    """Upper bracket slope; branch on the sign of df2/dt_s (>= 0 inclusive)."""
    _check_s1(s1)
    scalar = np.isscalar(t_s)
    ts = np.asarray(t_s, dtype=float)
    df1 = f_kernel_dts(1, s, cfg.p, t, ts)
    df2 = f_kernel_dts(2, s, cfg.p, t, ts)
    af = cfg.dm / cfg.n
    nsp = cfg.n * s1 * cfg.p
    mixed = 2.0 * nsp * (af * df2 + (1.0 - af) * df1)
    out = np.where(df2 >= 0.0, mixed, 4.0 * nsp * df1)
    return _finalize(out, scalar)


def gamma_underline(cfg: SystemConfig, s: int, s1, t: float, t_s):
    """Lower bracket slope; same branch rule, damped by 1 + 2*lambda_bar."""
    _check_s1(s1)
    scalar = np.isscalar(t_s)
    ts = np.asarray(t_s, dtype=float)
    df1 = f_kernel_dts(1, s, cfg.p, t, ts)
    df2 = f_kernel_dts(2, s, cfg.p, t, ts)
    f1 = f_kernel(1, s, cfg.p, t, ts)
    lb = lambda_bar(s1, cfg.p, f1)
    af = cfg.dm / cfg.n
    nsp = cfg.n * s1 * cfg.p
    mixed = 2.0 * nsp * (af * df2 + (1.0 - af) * df1) / (1.0 + 2.0 * lb)
    out = np.where(df2 >= 0.0, mixed, 4.0 * nsp * df2)
    return _finalize(out, scalar)


def reg_upper_incomplete_gamma(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = Gamma(a, x)/Gamma(a).

    Series for x < a + 1, Lentz continued fraction otherwise; absolute
    error well below 1e-12 over the chi-square-tail range used here.
    """
    if a <= 0.0:
        raise ValueError("a must be positive")
    if x < 0.0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 1.0
    log_pre = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1.0:
        # P(a, x) by series, then complement.
        term = 1.0 / a
        total = term
        k = 1
        while True:
            term *= x / (a + k)
            total += term
            if abs(term) < 1e-17 * abs(total) or k > 10_000:
                break
            k += 1
        p = math.exp(log_pre) * total if log_pre > -745.0 else 0.0
        return min(1.0, max(0.0, 1.0 - p))
    # Modified Lentz for the continued fraction of Q(a, x).
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0.0 else 1.0 / tiny
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    q = math.exp(log_pre) * h if log_pre > -745.0 else 0.0
    return min(1.0, max(0.0, q))


def power_violation_prob(cfg: SystemConfig) -> float:
    """Pr(||X||^2 > n*P') for one codeword; ||X||^2/P is chi-square(n)."""
    return reg_upper_incomplete_gamma(0.5 * cfg.n, 0.5 * cfg.n * cfg.p_prime / cfg.p)


def p0_term(cfg: SystemConfig) -> float:
    """Additive collision + power-violation floor of both bounds."""
    collision = cfg.ka * (cfg.ka - 1) / (2.0 * cfg.m)
    return collision + cfg.ka * power_violation_prob(cfg)
