"""Tagged fractions, QBER composition and secret-key rates.

Rates are returned unclamped: a negative value means no secret key can be
distilled, and optimizers rely on the sign change.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .attacks import binary_entropy
from .errors import DomainError
from .photon_stats import N_TRUNC, check_truncation, poisson_tail


def _check_mu(mu):
    if not mu > 0:
        raise DomainError(f"mu must be > 0, got {mu}")


def _check_eta(eta, allow_zero=True):
    ok = (0.0 <= eta <= 1.0) if allow_zero else (0.0 < eta <= 1.0)
    if not ok:
        raise DomainError(f"transmittance out of range: {eta}")


def tagged_fraction(mu: float, eta: float) -> float:
    """Fraction of single-photon detections that were emitted as multiphoton pulses.

    Closed form 1 - exp(-mu (1 - eta)).
    """
    _check_mu(mu)
    _check_eta(eta)
    return -math.expm1(-mu * (1.0 - eta))


def tagged_fraction_series(mu: float, eta: float, n_trunc: int = N_TRUNC) -> float:
    """The same fraction as an explicit ratio of truncated sums.

    Numerator and denominator sum p_mu[n] * n * eta * (1 - eta)**(n-1), i.e. the
    chance that exactly one of n emitted photons reaches Bob, over n >= 2 and
    n >= 1 respectively.
    """
    _check_mu(mu)
    _check_eta(eta, allow_zero=False)
    check_truncation(mu, n_trunc)
    terms = [
        math.exp(n * math.log(mu) - mu - math.lgamma(n + 1)) * n * eta * (1.0 - eta) ** (n - 1)
        for n in range(1, n_trunc + 1)
    ]
    return math.fsum(terms[1:]) / math.fsum(terms)


def tagged_fraction_limit(mu: float) -> float:
    """High-loss limit 1 - exp(-mu); both an upper and a lower bound there."""
    _check_mu(mu)
    return -math.expm1(-mu)


def residual_tagged_fraction(mu: float, eta: float, n0: Optional[int]) -> float:
    """Tagged fraction leaking past a detector that resolves at most n0 photons.

    Poisson emission tail beyond n0 over the single-photon detection
    probability mu * eta * exp(-mu * eta). ``n0=None`` means unbounded resolving
    power, giving 0.
    """
    _check_mu(mu)
    _check_eta(eta, allow_zero=False)
    if n0 is None or math.isinf(n0):
        return 0.0
    if n0 < 1 or int(n0) != n0:
        raise DomainError(f"resolving power must be an integer >= 1, got {n0}")
    check_truncation(mu)
    return poisson_tail(mu, int(n0)) / (mu * eta * math.exp(-mu * eta))


@dataclass(frozen=True)
class ErrorModel:
    e0: float
    d: float
    e_total: float
    clamped: bool = False

    @classmethod
    def from_components(cls, e0: float, d: float) -> "ErrorModel":
        e, clamped = total_qber(e0, d)
        return cls(e0=e0, d=d, e_total=e, clamped=clamped)


def total_qber(e0: float, d: float) -> tuple[float, bool]:
    """Setup error plus dark-count error d/2; returns ``(e, clamped)`` with e <= 0.5."""
    if not 0.0 <= e0 <= 0.5:
        raise DomainError(f"e0 must lie in [0, 0.5], got {e0}")
    if not 0.0 <= d <= 1.0:
        raise DomainError(f"d must lie in [0, 1], got {d}")
    e = e0 + 0.5 * d
    if e > 0.5:
        return 0.5, True
    return e, False


def gllp_rate(e: float, delta: float) -> float:
    """(1 - delta) - H2(e) - H2(e + delta)."""
    if not 0.0 <= e <= 0.5:
        raise DomainError(f"e must lie in [0, 0.5], got {e}")
    if not 0.0 <= delta < 1.0:
        raise DomainError(f"delta must lie in [0, 1), got {delta}")
    if e + delta > 1.0:
        raise DomainError(f"e + delta = {e + delta} exceeds 1")
    return (1.0 - delta) - binary_entropy(e) - binary_entropy(e + delta)


def sifted_rate(e: float, delta0: float) -> float:
    """Secret fraction of the sifted key when tagged bits are assumed error free.

    (1 - delta0) - H2(e) - (1 - delta0) H2(e / (1 - delta0)). An argument
    e / (1 - delta0) > 1 is fed to H2 as 1: that only happens when
    e > 1 - delta0, where H2(e) > 1 - delta0 already makes the rate negative.
    """
    if not 0.0 <= e <= 0.5:
        raise DomainError(f"e must lie in [0, 0.5], got {e}")
    if not 0.0 <= delta0 < 1.0:
        raise DomainError(f"delta0 must lie in [0, 1), got {delta0}")
    untagged = 1.0 - delta0
    x = min(e / untagged, 1.0)
    return untagged - binary_entropy(e) - untagged * binary_entropy(x)


def raw_rate(mu: float, eta: float) -> float:
    return 0.25 * mu * eta


def final_key_rate(mu: float, eta: float, e: float) -> float:
    """Secret bits per emitted pulse, 1/4 mu (1 - delta0) eta * sifted_rate."""
    _check_mu(mu)
    _check_eta(eta, allow_zero=False)
    delta0 = tagged_fraction_limit(mu)
    return 0.25 * mu * (1.0 - delta0) * eta * sifted_rate(e, delta0)


@dataclass(frozen=True)
class KeyRateReport:
    mu: float
    eta: float
    d: float
    delta: float
    delta0: float
    delta_prime: float
    e_total: float
    r_sifted: float
    r_final: float
    raw_rate: float

    @property
    def secure(self) -> bool:
        return self.r_final > 0


def key_rate_report(
    mu: float, eta: float, e0: float, d: float, n0: Optional[int] = None
) -> KeyRateReport:
    e, _ = total_qber(e0, d)
    delta0 = tagged_fraction_limit(mu)
    return KeyRateReport(
        mu=mu,
        eta=eta,
        d=d,
        delta=tagged_fraction(mu, eta),
        delta0=delta0,
        delta_prime=residual_tagged_fraction(mu, eta, n0),
        e_total=e,
        r_sifted=sifted_rate(e, delta0),
        r_final=final_key_rate(mu, eta, e),
        raw_rate=raw_rate(mu, eta),
    )
