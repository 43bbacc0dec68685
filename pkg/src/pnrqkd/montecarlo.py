"""Pulse-level Monte Carlo of Alice -> Eve -> photon-number-resolving Bob.

Each pulse: draw the emitted photon number from Poisson(mu), let Eve forward
some of the photons, add at most one dark click, resolve the click count and
keep the pulse for the sifted key only if exactly one click was seen.

Random numbers come from numpy's counter-based Philox generator keyed on
(seed, batch index). Batches have a fixed size, so the result does not
depend on how many workers process them.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import stats

from .errors import ConfigError, DomainError, InsufficientDataError
from .photon_stats import N_TRUNC, DetectorModel, SourceModel, detected_pmf

DEFAULT_BATCH = 1 << 20
MAX_PULSES = (1 << 62) - 1


@dataclass(frozen=True)
class EveStrategy:
    """How many of the m intercepted photons Eve forwards.

    ``beam_splitter`` forwards each photon with probability eta,
    ``block_singles`` does the same but suppresses every one-photon pulse,
    ``custom`` samples from ``table[m, k]``.
    """

    kind: str
    eta: float
    table: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("beam_splitter", "block_singles", "custom"):
            raise ConfigError(f"unknown Eve strategy {self.kind!r}")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"eta must lie in [0, 1], got {self.eta}")
        if self.kind == "custom":
            _check_table(self.table)

    @property
    def name(self) -> str:
        return self.label or self.kind

    def forward(self, n: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "custom":
            return _sample_table(self.table, n, rng)
        k = rng.binomial(n, self.eta)
        if self.kind == "block_singles":
            k[n == 1] = 0
        return k


def _check_table(table):
    if table is None:
        raise ConfigError("custom strategy needs a forwarding table")
    t = np.asarray(table, dtype=float)
    if t.ndim != 2 or t.shape[1] < t.shape[0]:
        raise ConfigError(f"forwarding table must be (M+1, >=M+1), got shape {t.shape}")
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise ConfigError("forwarding table has negative or non-finite entries")
    if np.any(np.triu(t, 1)[:, : t.shape[0]] > 0) or np.any(t[:, t.shape[0] :] > 0):
        raise ConfigError("forwarding table forwards more photons than intercepted")
    if not np.allclose(t.sum(axis=1), 1.0, atol=1e-9):
        raise ConfigError("forwarding table rows must sum to 1")


def _sample_table(table, n, rng):
    k = np.zeros_like(n)
    rows = table.shape[0]
    for m in np.unique(n):
        if m >= rows:
            raise ConfigError(f"forwarding table has no row for {m} photons")
        idx = np.nonzero(n == m)[0]
        p = table[m, : m + 1]
        k[idx] = rng.choice(m + 1, size=idx.size, p=p / p.sum())
    return k


def beam_splitter(eta: float) -> EveStrategy:
    return EveStrategy("beam_splitter", eta)


def block_singles(eta: float) -> EveStrategy:
    return EveStrategy("block_singles", eta)


def forwarding_table(
    table, eta: float, label: str = "custom"
) -> EveStrategy:
    return EveStrategy("custom", eta, table=np.asarray(table, dtype=float), label=label)


def binomial_table(eta: float, n_max: int = N_TRUNC) -> np.ndarray:
    m = np.arange(n_max + 1)[:, None]
    k = np.arange(n_max + 1)[None, :]
    return np.where(k <= m, stats.binom.pmf(k, m, eta), 0.0)


def intensity_aware_tables(eta: float, single_pass: float, n_max: int = N_TRUNC):
    """Forwarding tables for an Eve who treats the two intensities differently.

    The first table is the honest beam splitter; the second forwards
    one-photon pulses only with probability ``single_pass``. Both carry the
    same label, so a decoy check sees one nominal strategy.
    """
    honest = binomial_table(eta, n_max)
    biased = honest.copy()
    biased[1, :2] = (1.0 - single_pass, single_pass)
    label = "intensity_aware"
    return forwarding_table(honest, eta, label), forwarding_table(biased, eta, label)


@dataclass(frozen=True)
class SimConfig:
    source: SourceModel
    eta: float
    detector: DetectorModel = DetectorModel()
    n_pulses: int = 1_000_000
    seed: int = 0
    eve_strategy: Optional[EveStrategy] = None
    batch_size: int = DEFAULT_BATCH

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"eta must lie in [0, 1], got {self.eta}")
        if self.n_pulses < 1:
            raise ConfigError(f"n_pulses must be >= 1, got {self.n_pulses}")
        if self.n_pulses > MAX_PULSES:
            raise OverflowError(f"n_pulses={self.n_pulses} would overflow 64-bit counters")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.eve_strategy is None:
            object.__setattr__(self, "eve_strategy", beam_splitter(self.eta))

    @property
    def dark_prob(self) -> float:
        """Dark-click probability per pulse window, r_dark / r_pul."""
        return min(1.0, self.detector.dark_rate_hz / self.source.pulse_rate)

    @property
    def hist_max(self) -> int:
        rp = self.detector.resolving_power
        return N_TRUNC if rp is None else rp

    def decoy(self, seed: Optional[int] = None) -> "SimConfig":
        """Same run with the decoy intensity as the mean photon number."""
        if self.source.decoy_mu is None:
            raise ConfigError("source has no decoy intensity")
        src = SourceModel(self.source.decoy_mu, self.source.pulse_rate)
        return replace(self, source=src, seed=self.seed if seed is None else seed)

    def summary(self) -> dict:
        return {
            "mu": self.source.mu,
            "pulse_rate": self.source.pulse_rate,
            "eta": self.eta,
            "resolving_power": self.detector.resolving_power,
            "dark_rate_hz": self.detector.dark_rate_hz,
            "dark_prob": self.dark_prob,
            "n_pulses": self.n_pulses,
            "seed": self.seed,
            "strategy": self.eve_strategy.name,
            "batch_size": self.batch_size,
        }


@dataclass
class McResult:
    n_pulses: int
    counts_by_detected_n: np.ndarray
    emitted_by_n: np.ndarray
    detected_by_emitted_n: np.ndarray
    sifted_singles: int
    tagged_singles: int
    dark_contaminated: int
    mu: float = math.nan
    eta: float = math.nan
    strategy: str = ""
    config: dict = field(default_factory=dict)

    def __add__(self, other: "McResult") -> "McResult":
        return McResult(
            n_pulses=self.n_pulses + other.n_pulses,
            counts_by_detected_n=self.counts_by_detected_n + other.counts_by_detected_n,
            emitted_by_n=self.emitted_by_n + other.emitted_by_n,
            detected_by_emitted_n=self.detected_by_emitted_n + other.detected_by_emitted_n,
            sifted_singles=self.sifted_singles + other.sifted_singles,
            tagged_singles=self.tagged_singles + other.tagged_singles,
            dark_contaminated=self.dark_contaminated + other.dark_contaminated,
            mu=self.mu,
            eta=self.eta,
            strategy=self.strategy,
            config=self.config,
        )

    @property
    def empirical_delta(self) -> float:
        return self.tagged_singles / self.sifted_singles if self.sifted_singles else math.nan

    @property
    def stderr_delta(self) -> float:
        return estimate_delta(self)[1] if self.sifted_singles else math.nan

    def yields(self) -> np.ndarray:
        """Fraction of n-photon emissions that produced at least one click."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(
                self.emitted_by_n > 0, self.detected_by_emitted_n / np.maximum(self.emitted_by_n, 1), np.nan
            )

    def to_report(self) -> dict:
        last = len(self.counts_by_detected_n) - 1
        rows = [
            {"detected_n": i, "overflow": i == last, "count": int(c)}
            for i, c in enumerate(self.counts_by_detected_n)
        ]
        summary = {
            "n_pulses": int(self.n_pulses),
            "sifted_singles": int(self.sifted_singles),
            "tagged_singles": int(self.tagged_singles),
            "dark_contaminated": int(self.dark_contaminated),
            "empirical_delta": None if not self.sifted_singles else self.empirical_delta,
            "stderr_delta": None if not self.sifted_singles else self.stderr_delta,
            "emitted_by_n": [int(v) for v in np.trim_zeros(self.emitted_by_n, "b")],
            "detected_by_emitted_n": [int(v) for v in np.trim_zeros(self.detected_by_emitted_n, "b")],
        }
        return {"config": dict(self.config), "rows": rows, "summary": summary}


def _empty(config: SimConfig) -> McResult:
    return McResult(
        n_pulses=0,
        counts_by_detected_n=np.zeros(config.hist_max + 2, dtype=np.int64),
        emitted_by_n=np.zeros(N_TRUNC + 2, dtype=np.int64),
        detected_by_emitted_n=np.zeros(N_TRUNC + 2, dtype=np.int64),
        sifted_singles=0,
        tagged_singles=0,
        dark_contaminated=0,
        mu=config.source.mu,
        eta=config.eta,
        strategy=config.eve_strategy.name,
        config=config.summary(),
    )


def _run_batch(config: SimConfig, b: int, size: int) -> McResult:
    rng = np.random.Generator(np.random.Philox(key=(config.seed << 64) | b))
    n = rng.poisson(config.source.mu, size)
    k = config.eve_strategy.forward(n, rng)
    p_dark = config.dark_prob
    if p_dark > 0:
        dark = rng.random(size) < p_dark
    else:
        dark = np.zeros(size, dtype=bool)
    clicks = k + dark
    top = config.hist_max + 1
    n_bins = np.minimum(n, N_TRUNC + 1)
    detected = clicks >= 1
    keep = clicks == 1

    res = _empty(config)
    res.n_pulses = size
    res.counts_by_detected_n = np.bincount(np.minimum(clicks, top), minlength=top + 1).astype(np.int64)
    res.emitted_by_n = np.bincount(n_bins, minlength=N_TRUNC + 2).astype(np.int64)
    res.detected_by_emitted_n = np.bincount(n_bins[detected], minlength=N_TRUNC + 2).astype(np.int64)
    res.sifted_singles = int(np.count_nonzero(keep))
    res.tagged_singles = int(np.count_nonzero(keep & (n >= 2)))
    res.dark_contaminated = int(np.count_nonzero(keep & dark))
    return res


def simulate(config: SimConfig, workers: int = 1) -> McResult:
    """Run the simulation; identical output for any ``workers`` value."""
    full, rem = divmod(config.n_pulses, config.batch_size)
    batches = [(b, config.batch_size) for b in range(full)]
    if rem:
        batches.append((full, rem))
    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda bs: _run_batch(config, *bs), batches))
    else:
        parts = [_run_batch(config, b, s) for b, s in batches]
    total = _empty(config)
    for p in parts:
        total = total + p
    return total


def estimate_delta(result: McResult) -> tuple[float, float]:
    """Tagged fraction among kept pulses and its binomial standard error."""
    s = result.sifted_singles
    if s < 1:
        raise InsufficientDataError("no sifted single-photon detections")
    p = result.tagged_singles / s
    return p, math.sqrt(p * (1.0 - p) / s)


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    pvalue: float
    alpha: float

    @property
    def passed(self) -> bool:
        return self.pvalue >= self.alpha


def chi_square_vs_poisson(
    result: McResult, mean: float, alpha: float = 1e-3, min_expected: float = 5.0
) -> ChiSquareResult:
    """Goodness of fit of the detected-photon histogram to Poisson(mean).

    Bins with fewer than ``min_expected`` expected counts are pooled into a
    single tail bin together with the overflow bin.
    """
    obs = np.asarray(result.counts_by_detected_n, dtype=float)
    total = obs.sum()
    f_obs, f_exp = [], []
    for i in range(len(obs) - 1):
        ex = total * detected_pmf(mean, 1.0, i)
        if ex < min_expected:
            break
        f_obs.append(obs[i])
        f_exp.append(ex)
    f_obs.append(total - sum(f_obs))
    f_exp.append(total - sum(f_exp))
    if f_exp[-1] < min_expected:
        # merge an under-populated tail into the last regular bin
        f_obs[-2:] = [f_obs[-2] + f_obs[-1]]
        f_exp[-2:] = [f_exp[-2] + f_exp[-1]]
    if len(f_obs) < 2:
        raise InsufficientDataError("too few populated bins for a chi-square test")
    stat, p = stats.chisquare(f_obs, f_exp)
    return ChiSquareResult(float(stat), len(f_obs) - 1, float(p), alpha)


@dataclass(frozen=True)
class YieldTest:
    n: int
    yield_signal: float
    yield_decoy: float
    z: float
    pvalue: float
    rejected: bool


@dataclass(frozen=True)
class DecoyVerdict:
    passed: bool
    alpha: float
    rows: tuple

    @property
    def rejected_n(self) -> list:
        return [r.n for r in self.rows if r.rejected]


def verify_decoy_consistency(
    signal: McResult,
    decoy: McResult,
    alpha: float = 1e-3,
    min_emitted: int = 1000,
    min_events: int = 10,
) -> DecoyVerdict:
    """Two-proportion z-test of Y_n(signal) == Y_n(decoy) for each photon number n.

    Photon numbers without ``min_emitted`` emissions in both runs, or with
    fewer than ``min_events`` pooled detections or misses, are skipped.
    """
    if signal.n_pulses < 1 or decoy.n_pulses < 1:
        raise InsufficientDataError("both runs need at least one pulse")
    if signal.strategy != decoy.strategy or signal.eta != decoy.eta:
        raise ConfigError(
            f"runs used different channels: {signal.strategy}@{signal.eta} vs {decoy.strategy}@{decoy.eta}"
        )
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    rows = []
    for n in range(len(signal.emitted_by_n) - 1):
        e1, e2 = int(signal.emitted_by_n[n]), int(decoy.emitted_by_n[n])
        d1, d2 = int(signal.detected_by_emitted_n[n]), int(decoy.detected_by_emitted_n[n])
        if min(e1, e2) < min_emitted:
            continue
        hits, trials = d1 + d2, e1 + e2
        if hits < min_events or trials - hits < min_events:
            continue
        p1, p2, pooled = d1 / e1, d2 / e2, hits / trials
        se = math.sqrt(pooled * (1 - pooled) * (1 / e1 + 1 / e2))
        z = (p1 - p2) / se
        pval = float(2 * stats.norm.sf(abs(z)))
        rows.append(YieldTest(n, p1, p2, z, pval, pval < alpha))
    if not rows:
        raise InsufficientDataError("no photon number has enough statistics to compare")
    return DecoyVerdict(passed=not any(r.rejected for r in rows), alpha=alpha, rows=tuple(rows))
