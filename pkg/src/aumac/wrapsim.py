"""Toy-scale Monte Carlo simulator for the wrap-decoded asynchronous channel.

Each of ka users sends one codeword from a shared Gaussian codebook with
an integer delay in [0, dm].  The receiver folds the last dm samples
onto the first dm, which turns linear delays into cyclic shifts (and
doubles the noise variance on the folded coordinates), then decodes by
exhaustive least-squares over codeword subsets and delay assignments.
Exhaustive decoding is exponential, so everything here is desk scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import BudgetError, SystemConfig

DEFAULT_BUDGET = 10 ** 6


@dataclass(frozen=True)
class Codebook:
    """Shared codebook with i.i.d. N(0, p) entries, regenerable from seed."""

    m: int
    n: int
    p: float
    seed: int

    @property
    def entries(self) -> np.ndarray:
        rng = np.random.Generator(np.random.Philox(key=self.seed))
        return rng.normal(0.0, math.sqrt(self.p), size=(self.m, self.n))


@dataclass(frozen=True)
class DelayVector:
    """Per-user integer delays, each in [0, dm]."""

    d: Tuple[int, ...]
    dm: int

    def __post_init__(self):
        for di in self.d:
            if not 0 <= di <= self.dm:
                raise ValueError("delays must lie in [0, dm]")


@dataclass
class FoldedObservation:
    """Raw receive vector of length n + dm and its wrap-folded version."""

    y_raw: np.ndarray
    y_folded: np.ndarray
    dm: int


def cyclic_shift(x: np.ndarray, d: int) -> np.ndarray:
    """Apply the circular shift matrix d times: [x_n, x_1, ..., x_{n-1}]."""
    if d < 0:
        raise ValueError("shift must be nonnegative")
    return np.roll(x, d % len(x))


def fold(y_raw: np.ndarray, n: int, dm: int) -> np.ndarray:
    """Superimpose the last dm received samples onto the first dm."""
    y = y_raw[:n].copy()
    if dm > 0:
        y[:dm] += y_raw[n:n + dm]
    return y


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    # counter-based streams: (seed, trial) keys are independent and
    # order-free, so trials parallelize with bit-identical results
    return np.random.Generator(np.random.Philox(key=(seed << 20) + trial))


def transmit(
    codebook: Codebook,
    messages: Sequence[int],
    delays: DelayVector,
    noise_rng: Optional[np.random.Generator] = None,
) -> FoldedObservation:
    """Superimpose delayed codewords (zero-padded placement) plus noise."""
    n, dm = codebook.n, delays.dm
    entries = codebook.entries
    y_raw = np.zeros(n + dm)
    for msg, d in zip(messages, delays.d):
        y_raw[d:d + n] += entries[msg]
    if noise_rng is not None:
        y_raw += noise_rng.normal(0.0, 1.0, size=n + dm)
    return FoldedObservation(y_raw=y_raw, y_folded=fold(y_raw, n, dm), dm=dm)


def _search_size_no_info(m: int, ka: int, dm: int) -> float:
    return math.comb(m, ka) * float((dm + 1) ** ka)


def decode_no_delay_info(
    codebook: Codebook,
    y_folded: np.ndarray,
    ka: int,
    dm: int,
    budget: int = DEFAULT_BUDGET,
) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """Exhaustive least-squares over ka-subsets and all delay assignments.

    Ties (measure zero in exact arithmetic) break lexicographically on
    (sorted message tuple, delay tuple) so decoding is deterministic.
    """
    if _search_size_no_info(codebook.m, ka, dm) > budget:
        raise BudgetError("exhaustive no-delay-info search exceeds the budget")
    entries = codebook.entries
    shifted = np.stack([
        [cyclic_shift(entries[i], d) for d in range(dm + 1)]
        for i in range(codebook.m)
    ])
    best = (math.inf, None, None)
    for subset in itertools.combinations(range(codebook.m), ka):
        for delays in itertools.product(range(dm + 1), repeat=ka):
            resid = y_folded - sum(shifted[i, d] for i, d in zip(subset, delays))
            metric = float(resid @ resid)
            cand = (metric, subset, delays)
            if cand[0] < best[0] or (cand[0] == best[0] and cand[1:] < best[1:]):
                best = cand
    return best[1], best[2]


def decode_with_delay_info(
    codebook: Codebook,
    y_folded: np.ndarray,
    ka: int,
    true_delays: DelayVector,
    budget: int = DEFAULT_BUDGET,
) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """Same search restricted to permutations of the true delay multiset."""
    perms = sorted(set(itertools.permutations(true_delays.d)))
    if math.comb(codebook.m, ka) * len(perms) > budget:
        raise BudgetError("exhaustive with-delay-info search exceeds the budget")
    entries = codebook.entries
    dm = true_delays.dm
    shifted = np.stack([
        [cyclic_shift(entries[i], d) for d in range(dm + 1)]
        for i in range(codebook.m)
    ])
    best = (math.inf, None, None)
    for subset in itertools.combinations(range(codebook.m), ka):
        for delays in perms:
            resid = y_folded - sum(shifted[i, d] for i, d in zip(subset, delays))
            metric = float(resid @ resid)
            cand = (metric, subset, delays)
            if cand[0] < best[0] or (cand[0] == best[0] and cand[1:] < best[1:]):
                best = cand
    return best[1], best[2]


@dataclass
class TrialRecord:
    trial: int
    messages: Tuple[int, ...]
    delays: Tuple[int, ...]
    decoded: Tuple[int, ...]
    user_errors: int


@dataclass
class PupeEstimate:
    pupe_hat: float
    ci_halfwidth: float
    trials: int
    records: List[TrialRecord]


def run_trial(
    cfg: SystemConfig,
    codebook: Codebook,
    delays: DelayVector,
    variant: str,
    seed: int,
    trial: int,
    budget: int = DEFAULT_BUDGET,
) -> TrialRecord:
    """One seeded trial: draw messages, transmit, decode, count errors.

    A user is in error when its message collides with another user's,
    when its codeword violates the maximal power n*p_prime, or when its
    message is missing from the decoded set.
    """
    rng = _trial_rng(seed, trial)
    messages = tuple(int(x) for x in rng.integers(0, codebook.m, size=cfg.ka))
    obs = transmit(codebook, messages, delays, noise_rng=rng)
    if variant == "with":
        decoded, _ = decode_with_delay_info(codebook, obs.y_folded, cfg.ka,
                                            delays, budget)
    else:
        decoded, _ = decode_no_delay_info(codebook, obs.y_folded, cfg.ka,
                                          delays.dm, budget)
    decoded_set = set(decoded)
    entries = codebook.entries
    power_cap = cfg.n * cfg.p_prime
    errors = 0
    for i, msg in enumerate(messages):
        collided = messages.count(msg) > 1
        over_power = float(entries[msg] @ entries[msg]) > power_cap
        missing = msg not in decoded_set
        if collided or over_power or missing:
            errors += 1
    return TrialRecord(trial, messages, delays.d, decoded, errors)


def estimate_pupe(
    cfg: SystemConfig,
    delays: DelayVector,
    trials: int,
    seed: int,
    variant: str = "without",
    m: Optional[int] = None,
    budget: int = DEFAULT_BUDGET,
    keep_records: bool = False,
) -> PupeEstimate:
    """Empirical per-user error fraction with a 95% normal-approx CI."""
    if trials < 1:
        raise ValueError("need at least one trial")
    m = int(cfg.m) if m is None else m
    codebook = Codebook(m=m, n=cfg.n, p=cfg.p, seed=seed)
    delays = DelayVector(delays.d, delays.dm)
    total_err = 0
    records: List[TrialRecord] = []
    for trial in range(trials):
        rec = run_trial(cfg, codebook, delays, variant, seed, trial, budget)
        total_err += rec.user_errors
        if keep_records:
            records.append(rec)
    pupe = total_err / (trials * cfg.ka)
    ci = 1.96 * math.sqrt(max(pupe * (1.0 - pupe), 1e-12) / (trials * cfg.ka))
    return PupeEstimate(pupe_hat=pupe, ci_halfwidth=ci, trials=trials,
                        records=records)


@dataclass
class InvarianceReport:
    pupe_a: float
    pupe_b: float
    difference: float
    threshold: float
    passed: bool


def delay_invariance_test(
    cfg: SystemConfig,
    delays_a: DelayVector,
    delays_b: DelayVector,
    trials: int,
    seed: int,
    budget: int = DEFAULT_BUDGET,
) -> InvarianceReport:
    """Check that the empirical PUPE does not depend on the delay vector.

    The folded observation has the same distribution for every delay
    realization, so two independent estimates must agree within pooled
    3-sigma noise.
    """
    est_a = estimate_pupe(cfg, delays_a, trials, seed, budget=budget)
    est_b = estimate_pupe(cfg, delays_b, trials, seed + 1, budget=budget)
    pooled = math.sqrt(
        (est_a.ci_halfwidth / 1.96) ** 2 + (est_b.ci_halfwidth / 1.96) ** 2
    )
    diff = abs(est_a.pupe_hat - est_b.pupe_hat)
    threshold = 3.0 * max(pooled, 1e-9)
    return InvarianceReport(est_a.pupe_hat, est_b.pupe_hat, diff, threshold,
                            diff <= threshold)
