"""Poisson photon statistics of weak coherent pulses.

Covers the emitted and detected photon-number distributions, Eve's photon
forwarding probabilities for a photon-number-splitting attack, the balance
condition an undetected PNS attack has to satisfy, and the dark-count model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from scipy import special

from .errors import DomainError, TruncationError

N_TRUNC = 60
TAIL_TOL = 1e-15

# f(m, k): probability that Eve forwards k of the m photons she intercepted
Strategy = Callable[[int, int], float]


@dataclass(frozen=True)
class SourceModel:
    mu: float
    pulse_rate: float
    decoy_mu: Optional[float] = None

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"mu must be > 0, got {self.mu}")
        if not self.pulse_rate > 0:
            raise DomainError(f"pulse_rate must be > 0, got {self.pulse_rate}")
        if self.decoy_mu is not None:
            if not self.decoy_mu > 0:
                raise DomainError(f"decoy_mu must be > 0, got {self.decoy_mu}")
            if self.decoy_mu == self.mu:
                raise DomainError("decoy_mu must differ from mu")


@dataclass(frozen=True)
class DetectorModel:
    """Photon-number-resolving detector.

    ``resolving_power=None`` means the detector resolves any photon number.
    """

    resolving_power: Optional[int] = None
    dark_rate_hz: float = 0.0

    def __post_init__(self):
        if self.resolving_power is not None and self.resolving_power < 1:
            raise DomainError(f"resolving_power must be >= 1, got {self.resolving_power}")
        if not self.dark_rate_hz >= 0:
            raise DomainError(f"dark_rate_hz must be >= 0, got {self.dark_rate_hz}")


@dataclass(frozen=True)
class PhotonDistribution:
    probs: tuple
    trunc_tail: float

    def __post_init__(self):
        if any(p < 0 or p > 1 for p in self.probs):
            raise DomainError("probabilities must lie in [0, 1]")
        total = math.fsum(self.probs) + self.trunc_tail
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"distribution mass {total!r} is not 1")

    def __getitem__(self, n):
        return self.probs[n] if n < len(self.probs) else 0.0

    def __len__(self):
        return len(self.probs)


def _check_count(n):
    if n < 0 or int(n) != n:
        raise DomainError(f"photon count must be a non-negative integer, got {n}")


def _check_eta(eta):
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"transmittance must lie in [0, 1], got {eta}")


def poisson_pmf(mu: float, n: int) -> float:
    """mu**n * exp(-mu) / n!, evaluated in the log domain."""
    if not mu >= 0:
        raise DomainError(f"mu must be >= 0, got {mu}")
    _check_count(n)
    if mu == 0:
        return 1.0 if n == 0 else 0.0
    return math.exp(n * math.log(mu) - mu - math.lgamma(n + 1))


def poisson_tail(mu: float, n: int) -> float:
    """P(N > n) for N ~ Poisson(mu), accurate for tiny tails."""
    if not mu >= 0:
        raise DomainError(f"mu must be >= 0, got {mu}")
    _check_count(n)
    if mu == 0:
        return 0.0
    # regularized lower incomplete gamma: P(N >= n+1) = P(n+1, mu)
    return float(special.gammainc(n + 1, mu))


def check_truncation(mu: float, n_trunc: int = N_TRUNC) -> float:
    """Return the Poisson tail mass beyond ``n_trunc``; raise if it is not negligible."""
    tail = poisson_tail(mu, n_trunc)
    if tail >= TAIL_TOL:
        raise TruncationError(
            f"tail mass {tail:.3g} beyond n={n_trunc} exceeds {TAIL_TOL:g} at mu={mu}"
        )
    return tail


def poisson_distribution(mu: float, n_trunc: int = N_TRUNC) -> PhotonDistribution:
    tail = check_truncation(mu, n_trunc)
    probs = tuple(poisson_pmf(mu, n) for n in range(n_trunc + 1))
    return PhotonDistribution(probs, tail)


def detected_pmf(mu: float, eta: float, n: int) -> float:
    """Photon-number distribution after a lossy channel of transmittance ``eta``.

    A Poisson source thinned by independent loss stays Poisson with mean
    ``eta * mu``; the same expression serves signal and decoy intensities.
    """
    _check_eta(eta)
    return poisson_pmf(eta * mu, n)


def forward_prob(m: int, k: int, eta: float) -> float:
    """Binomial probability that k of m photons pass a beam splitter of transmission eta."""
    _check_count(m)
    _check_count(k)
    if k > m:
        raise DomainError(f"cannot forward {k} of {m} photons")
    _check_eta(eta)
    return math.comb(m, k) * eta**k * (1.0 - eta) ** (m - k)


def binomial_strategy(eta: float) -> Strategy:
    """Beam-splitter PNS attack: every photon forwarded independently with probability eta."""
    _check_eta(eta)
    return lambda m, k: forward_prob(m, k, eta)


def identity_strategy(m: int, k: int) -> float:
    return 1.0 if k == m else 0.0


def block_all_strategy(m: int, k: int) -> float:
    return 1.0 if k == 0 else 0.0


def block_singles_strategy(eta: float) -> Strategy:
    """Block every single-photon pulse, beam-split the rest."""
    bs = binomial_strategy(eta)

    def f(m, k):
        if m == 1:
            return 1.0 if k == 0 else 0.0
        return bs(m, k)

    return f


def pns_balance_residual(
    mu: float,
    eta: float,
    n: int,
    strategy: Strategy,
    n_trunc: int = N_TRUNC,
) -> float:
    """LHS - RHS of the photon-number balance Eve must keep to stay unnoticed.

    LHS is the probability Bob sees n photons under ``strategy``: n-photon
    pulses that Eve leaves intact plus larger pulses cut down to n. RHS is
    the honest lossy-channel probability ``detected_pmf(mu, eta, n)``.
    """
    _check_eta(eta)
    _check_count(n)
    if n > n_trunc:
        raise DomainError(f"n={n} exceeds truncation order {n_trunc}")
    check_truncation(mu, n_trunc)
    kept = 1.0 - math.fsum(strategy(n, i) for i in range(n))
    lhs = poisson_pmf(mu, n) * kept + math.fsum(
        poisson_pmf(mu, j) * strategy(j, n) for j in range(n + 1, n_trunc + 1)
    )
    return lhs - detected_pmf(mu, eta, n)


def pns_condition_holds(
    mu: float,
    eta: float,
    n: int,
    strategy: Strategy,
    n_trunc: int = N_TRUNC,
    tol: float = 1e-12,
) -> bool:
    """Necessary condition (no decoy) for an undetected PNS attack at photon number n."""
    return pns_balance_residual(mu, eta, n, strategy, n_trunc) >= -tol


def normalized_dark_rate(
    dark_rate_hz: float, pulse_rate: float, mu: float, eta: float
) -> tuple[float, bool]:
    """Dark counts per detected pulse, ``r_dark / (r_pul * mu * eta)``.

    Returns ``(d, clamped)``; d is clamped to [0, 1] since the ratio can
    exceed a probability at extreme loss.
    """
    if not dark_rate_hz >= 0:
        raise DomainError(f"dark_rate_hz must be >= 0, got {dark_rate_hz}")
    for name, v in (("pulse_rate", pulse_rate), ("mu", mu), ("eta", eta)):
        if not v > 0:
            raise DomainError(f"{name} must be > 0, got {v}")
    d = dark_rate_hz / (pulse_rate * mu * eta)
    if d > 1.0:
        return 1.0, True
    return d, False


def dark_pmf(d: float, n: int) -> float:
    """Dark-count weight d**n.

    Not normalized (the weights sum to 1/(1-d)); kept for diagnostic
    subtraction only. The simulator uses a per-window Bernoulli model.
    """
    if not 0.0 <= d <= 1.0:
        raise DomainError(f"d must lie in [0, 1], got {d}")
    _check_count(n)
    return d**n
