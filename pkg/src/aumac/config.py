"""Channel and code configuration shared by all analysis modules."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


class InfeasiblePointError(ValueError):
    """A kernel was evaluated where a denominator or log argument is non-positive."""


class BudgetError(RuntimeError):
    """An exhaustive search would exceed the configured evaluation budget."""


VARIANTS = ("thm1", "thm2")


def _check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return variant


@dataclass(frozen=True)
class SystemConfig:
    """Parameters of one asynchronous unsourced-access operating point.

    The codebook has M = 2**payload_bits codewords with i.i.d. N(0, p)
    entries, subject to the maximal per-codeword power ``p_prime``
    (p <= p_prime; the back-off reduces the power-violation probability).
    Delays are integers in [0, dm] with dm = round(alpha * n).
    """

    n: int
    payload_bits: float
    ka: int
    alpha: float
    epsilon: float
    p: float
    p_prime: float

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("blocklength n must be positive")
        if self.payload_bits <= 0:
            raise ValueError("payload_bits must be positive")
        if self.payload_bits >= 1023:
            # M = 2**payload_bits is carried as a float; keep it representable.
            raise ValueError("payload_bits must stay below 1023")
        if self.ka < 1:
            raise ValueError("ka must be at least 1")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0.0 < self.p <= self.p_prime:
            raise ValueError("need 0 < p <= p_prime")
        if self.ka * (self.ka - 1) / (2.0 * self.m) >= 1.0:
            raise ValueError("collision term ka(ka-1)/(2M) must stay below 1")
        if self.dm > self.n:
            raise ValueError("dm = round(alpha*n) must not exceed n")

    @property
    def m(self) -> float:
        """Codebook size M = 2**payload_bits (float; exact for integer payloads)."""
        return 2.0 ** self.payload_bits

    @property
    def dm(self) -> int:
        """Maximal integer delay, round(alpha * n)."""
        return round(self.alpha * self.n)

    def with_power(self, p: float = None, p_prime: float = None) -> "SystemConfig":
        """Copy with replaced power values (used by the trade-off search)."""
        kw = {}
        if p is not None:
            kw["p"] = p
        if p_prime is not None:
            kw["p_prime"] = p_prime
        return replace(self, **kw)

    @property
    def eb_n0(self) -> float:
        """Energy per bit over noise density, n*p_prime / (2*payload_bits)."""
        return self.n * self.p_prime / (2.0 * self.payload_bits)

    @property
    def eb_n0_db(self) -> float:
        return 10.0 * math.log10(self.eb_n0)
