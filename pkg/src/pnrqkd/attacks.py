"""Eavesdropper information under individual and coherent multiphoton attacks."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateCrossover, DomainError, NoRootError
from .photon_stats import poisson_tail


def binary_entropy(x: float) -> float:
    """h(x) in bits, with h(0) = h(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def _check_qber(e):
    if not 0.0 <= e <= 0.5:
        raise DomainError(f"QBER must lie in [0, 0.5], got {e}")


def si_information(e: float) -> float:
    """Eve's information per photon from a symmetric individual attack at QBER e."""
    _check_qber(e)
    arg = 0.5 * (1.0 + 2.0 * math.sqrt(e - e * e))
    return 1.0 - binary_entropy(min(arg, 1.0))


def cmp_information(n: int, e: float) -> float:
    """Eve's information on an n-photon pulse whose probes she measures coherently.

    Only the all-phi / all-theta probe outcomes leave her uncertain; those
    occur with weight f**n + e**n and have overlap cos(alpha)**n, where
    cos(alpha) = 1 - 2e.
    """
    if n < 1 or int(n) != n:
        raise DomainError(f"photon number must be a positive integer, got {n}")
    _check_qber(e)
    f = 1.0 - e
    overlap_sq = (1.0 - 2.0 * e) ** (2 * n)
    arg = 0.5 * (1.0 + math.sqrt(max(0.0, 1.0 - overlap_sq)))
    return 1.0 - (f**n + e**n) * binary_entropy(min(arg, 1.0))


@dataclass(frozen=True)
class AttackInfo:
    n: int
    qber: float
    i_si: float
    i_cmp: float

    @property
    def fidelity(self) -> float:
        return 1.0 - self.qber

    @property
    def cos_alpha(self) -> float:
        return 1.0 - 2.0 * self.qber

    @property
    def cmp_advantage(self) -> float:
        """I_CMP(n) - n * I_SI; positive where the coherent attack wins."""
        return self.i_cmp - self.n * self.i_si


def attack_info(n: int, e: float) -> AttackInfo:
    return AttackInfo(n=n, qber=e, i_si=si_information(e), i_cmp=cmp_information(n, e))


def crossover_qber(n: int, lo: float = 1e-6, hi: float = 0.5 - 1e-6, xtol: float = 1e-12) -> float:
    """QBER below which I_CMP(n) exceeds n independent SI attacks.

    Bisection on I_CMP(n, e) - n * I_SI(e) over [lo, hi].
    """
    if n == 1:
        raise DegenerateCrossover("I_CMP(1) == I_SI identically; no crossover")
    if n < 1 or int(n) != n:
        raise DomainError(f"photon number must be an integer >= 2, got {n}")

    def g(e):
        return cmp_information(n, e) - n * si_information(e)

    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if (g_lo > 0) == (g_hi > 0):
        raise NoRootError(f"no sign change of I_CMP({n}) - {n} I_SI on [{lo}, {hi}]")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        if g_mid == 0.0:
            return mid
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def pns_full_info_threshold(mu: float) -> float:
    """Transmittance below which a PNS attack yields full information without decoys.

    (1 - e^-mu - mu e^-mu) / mu is the multiphoton emission probability over
    mu; it is evaluated as a Poisson tail to avoid cancellation at small mu.
    """
    if not mu > 0:
        raise DomainError(f"mu must be > 0, got {mu}")
    return poisson_tail(mu, 1) / mu
