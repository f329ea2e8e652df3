import math

import mpmath as mp
import numpy as np
import pytest

import oracles
from aumac import kernels
from aumac.config import InfeasiblePointError, SystemConfig


def _cfg(**kw):
    base = dict(n=100, payload_bits=12, ka=4, alpha=0.2, epsilon=0.05,
                p=0.5, p_prime=0.5)
    base.update(kw)
    return SystemConfig(**base)


def _random_admissible(rng, cfg):
    """(t, t_s) drawn inside the admissible open region, away from edges."""
    t = float(np.exp(rng.uniform(math.log(1e-3), math.log(50.0))))
    upper = min(1.0, 0.25 / t)
    ts = float(rng.uniform(0.05, 0.95)) * upper
    return t, ts


# ---------------------------------------------------------------------------
# combinatorial log factors


def test_log_factorial_exact_small():
    for k in range(10):
        assert kernels.log_factorial(k) == pytest.approx(math.log(math.factorial(k)))


def test_log_binomial_matches_exact_integers():
    for n in range(1, 25):
        for k in range(n + 1):
            assert kernels.log_binomial(float(n), k) == pytest.approx(
                math.log(math.comb(n, k)), abs=1e-10
            )


def test_log_binomial_astronomical_argument():
    # C(2^100 - 50, 3) ~ (2^100)^3 / 6: relative agreement with mpmath
    got = kernels.log_binomial(2.0 ** 100 - 50, 3)
    want = float(mp.log(mp.binomial(mp.mpf(2) ** 100 - 50, 3)))
    assert got == pytest.approx(want, rel=1e-12)


def test_log_theta_against_high_precision():
    cfg = _cfg()
    for s in (1, 2, 4):
        assert kernels.log_theta(cfg, s) == pytest.approx(
            float(oracles.log_theta_mp(cfg, s)), rel=1e-12
        )


def test_log_theta2_uses_factorial_instead_of_delays():
    cfg = _cfg()
    for s in (1, 2, 3):
        diff = kernels.log_theta(cfg, s) - kernels.log_theta2(cfg, s)
        assert diff == pytest.approx(
            s * math.log1p(cfg.dm) - math.log(math.factorial(s))
        )


# ---------------------------------------------------------------------------
# exponent and kernels against the high-precision oracle


def test_g_exponent_matches_high_precision_oracle():
    rng = np.random.default_rng(7)
    cfg = _cfg()
    for _ in range(50):
        t, ts = _random_admissible(rng, cfg)
        got = kernels.g_exponent(cfg, 2, t, ts)
        want = float(oracles.g_exponent_mp(cfg, 2, t, ts))
        assert got == pytest.approx(want, rel=1e-9, abs=1e-9)


def test_g_exponent_cancels_exactly_at_ts_zero():
    # at t_s = 0 both band factors equal 1 + 2sPt, so their weighted logs
    # cancel the +(n/2) log(1 + 2sPt) offset exactly
    cfg = _cfg()
    for t in (0.01, 0.3, 2.0):
        assert abs(kernels.g_exponent(cfg, 2, t, 0.0)) < 1e-12


def test_f_kernels_match_high_precision():
    rng = np.random.default_rng(11)
    cfg = _cfg()
    for _ in range(50):
        t, ts = _random_admissible(rng, cfg)
        for iota in (1, 2):
            got = kernels.f_kernel(iota, 2, cfg.p, t, ts)
            want = float(oracles.f_kernel_mp(iota, 2, cfg.p, t, ts))
            assert got == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_f2_below_f1_and_nonnegative_on_admissible_range():
    rng = np.random.default_rng(13)
    cfg = _cfg()
    for _ in range(200):
        t, ts = _random_admissible(rng, cfg)
        f1 = kernels.f_kernel(1, 3, cfg.p, t, ts)
        f2 = kernels.f_kernel(2, 3, cfg.p, t, ts)
        assert 0.0 <= f2 <= f1 + 1e-15


# ---------------------------------------------------------------------------
# derivative suite (acceptance criterion: rel err < 1e-6 on 1e3 points)


def _rel_err(got, want):
    return abs(got - want) / max(1.0, abs(want))


def test_derivative_suite_thousand_points():
    rng = np.random.default_rng(2024)
    cfgs = [
        _cfg(),
        _cfg(n=400, payload_bits=30, ka=8, alpha=0.4, p=0.2, p_prime=0.2),
        _cfg(n=60, payload_bits=8, ka=2, alpha=0.1, p=1.5, p_prime=1.5),
    ]
    checked = 0
    while checked < 1000:
        cfg = cfgs[checked % len(cfgs)]
        s = int(rng.integers(1, cfg.ka + 1))
        t, ts = _random_admissible(rng, cfg)
        h = 1e-6 * min(1.0, 0.25 / t)
        if not (0.0 < ts - 2 * h and ts + 2 * h < min(1.0, 0.25 / t)):
            continue
        try:
            fd1 = oracles.central_difference(
                lambda x: kernels.g_exponent(cfg, s, t, x), ts, h
            )
            # second derivative as a first difference of the (already
            # verified) analytic first derivative: the direct second
            # difference of g loses too many digits to cancellation
            fd2 = oracles.central_difference(
                lambda x: kernels.g_exponent_d1(cfg, s, t, x), ts, h
            )
            fd1_g2 = oracles.central_difference(
                lambda x: kernels.g2_exponent(cfg, s, t, x), ts, h
            )
            fdf1 = oracles.central_difference(
                lambda x: kernels.f_kernel(1, s, cfg.p, t, x), ts, h
            )
            fdf2 = oracles.central_difference(
                lambda x: kernels.f_kernel(2, s, cfg.p, t, x), ts, h
            )
        except InfeasiblePointError:
            continue
        assert _rel_err(kernels.g_exponent_d1(cfg, s, t, ts), fd1) < 1e-6
        assert _rel_err(kernels.g_exponent_d2(cfg, s, t, ts), fd2) < 1e-6
        assert _rel_err(kernels.g2_exponent_d1(cfg, s, t, ts), fd1_g2) < 1e-6
        assert _rel_err(kernels.f_kernel_dts(1, s, cfg.p, t, ts), fdf1) < 1e-6
        assert _rel_err(kernels.f_kernel_dts(2, s, cfg.p, t, ts), fdf2) < 1e-6
        checked += 1


# ---------------------------------------------------------------------------
# penalty, brackets, branch rules


def test_gbar_never_exceeds_g():
    rng = np.random.default_rng(3)
    cfg = _cfg()
    for _ in range(200):
        t, ts = _random_admissible(rng, cfg)
        s1 = int(rng.integers(1, cfg.ka))
        g = kernels.g_exponent(cfg, 1, t, ts)
        gbar = kernels.g_bar_exponent(cfg, 1, s1, t, ts)
        assert gbar <= g + 1e-12


def test_gamma_branch_rule_both_cases():
    cfg = _cfg()
    rng = np.random.default_rng(5)
    seen = {True: 0, False: 0}
    for _ in range(500):
        t, ts = _random_admissible(rng, cfg)
        s, s1 = 2, 1
        df1 = kernels.f_kernel_dts(1, s, cfg.p, t, ts)
        df2 = kernels.f_kernel_dts(2, s, cfg.p, t, ts)
        f1 = kernels.f_kernel(1, s, cfg.p, t, ts)
        af = cfg.dm / cfg.n
        nsp = cfg.n * s1 * cfg.p
        lam = 4.0 * s1 * f1 * cfg.p
        if df2 >= 0.0:
            want_bar = 2.0 * nsp * (af * df2 + (1 - af) * df1)
            want_und = want_bar / (1.0 + 2.0 * lam)
        else:
            want_bar = 4.0 * nsp * df1
            want_und = 4.0 * nsp * df2
        assert kernels.gamma_bar(cfg, s, s1, t, ts) == pytest.approx(want_bar, rel=1e-12)
        assert kernels.gamma_underline(cfg, s, s1, t, ts) == pytest.approx(want_und, rel=1e-12)
        seen[df2 >= 0.0] += 1
    assert seen[True] > 0 and seen[False] > 0


def test_scalar_infeasible_raises_vector_returns_nan():
    cfg = _cfg()
    t = 5.0  # upper limit 0.05; ts = 0.5 is far outside
    with pytest.raises(InfeasiblePointError):
        kernels.g_exponent(cfg, 1, t, 0.5)
    out = kernels.g_exponent(cfg, 1, t, np.array([0.01, 0.5]))
    assert math.isfinite(out[0]) and math.isnan(out[1])


# ---------------------------------------------------------------------------
# incomplete gamma and p0


def test_reg_upper_gamma_closed_forms():
    assert kernels.reg_upper_incomplete_gamma(1.0, 1.0) == pytest.approx(
        math.exp(-1.0), rel=1e-12
    )
    assert kernels.reg_upper_incomplete_gamma(1.0, 2.5) == pytest.approx(
        math.exp(-2.5), rel=1e-12
    )
    assert kernels.reg_upper_incomplete_gamma(3.0, 0.0) == 1.0


def test_reg_upper_gamma_against_quadrature():
    for a, x in [(2000.0, 2400.0), (2000.0, 2000.0), (0.5, 0.2), (7.0, 3.0),
                 (2000.0, 2150.5)]:
        got = kernels.reg_upper_incomplete_gamma(a, x)
        want = oracles.reg_upper_gamma_quadrature(a, x)
        assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_reg_upper_gamma_domain_errors():
    with pytest.raises(ValueError):
        kernels.reg_upper_incomplete_gamma(0.0, 1.0)
    with pytest.raises(ValueError):
        kernels.reg_upper_incomplete_gamma(1.0, -1.0)


def test_p0_collision_only_when_tail_vanishes():
    cfg = SystemConfig(n=50, payload_bits=2, ka=2, alpha=0.0, epsilon=0.1,
                       p=1e-6, p_prime=1.0)
    # P'/P = 1e6: the chi-square tail is numerically zero
    assert kernels.p0_term(cfg) == pytest.approx(2 * 1 / (2 * 4.0), abs=1e-12)


def test_p0_tail_closed_form_two_dims():
    # n=2, p=p': tail per codeword is Q(1, 1) = e^{-1}
    cfg = SystemConfig(n=2, payload_bits=30, ka=1, alpha=0.0, epsilon=0.1,
                       p=1.0, p_prime=1.0)
    assert kernels.p0_term(cfg) == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_p0_full_scale_backoff_against_quadrature():
    cfg = SystemConfig(n=4000, payload_bits=100, ka=50, alpha=0.2,
                       epsilon=0.05, p=0.9 * 0.26, p_prime=0.26)
    collision = 50 * 49 / (2.0 * 2.0 ** 100)
    tail = oracles.reg_upper_gamma_quadrature(2000.0, 2000.0 / 0.9)
    assert kernels.p0_term(cfg) == pytest.approx(collision + 50 * tail, rel=1e-9)
