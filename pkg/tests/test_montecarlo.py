import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx

from pnrqkd.errors import ConfigError, InsufficientDataError
from pnrqkd.montecarlo import (
    McResult,
    _run_batch,
    SimConfig,
    beam_splitter,
    binomial_table,
    block_singles,
    chi_square_vs_poisson,
    estimate_delta,
    forwarding_table,
    intensity_aware_tables,
    simulate,
    verify_decoy_consistency,
)
from pnrqkd.photon_stats import DetectorModel, SourceModel
from pnrqkd.security_rate import tagged_fraction

DELTA_05_01 = 0.36237184837822671


def cfg(mu=0.5, eta=0.1, n=200_000, seed=1, **kw):
    return SimConfig(SourceModel(mu, 1e6, kw.pop("decoy_mu", None)), eta, n_pulses=n, seed=seed, **kw)


def fake(tagged, sifted):
    z = np.zeros(3, dtype=np.int64)
    return McResult(sifted, z, z, z, sifted, tagged, 0)


def test_estimate_delta_examples():
    assert estimate_delta(fake(0, 1000)) == (0.0, 0.0)
    p, se = estimate_delta(fake(360, 1000))
    assert p == 0.36 and se == approx(0.015178933, rel=1e-7)
    with pytest.raises(InsufficientDataError):
        estimate_delta(fake(0, 0))


def test_lossless_channel_has_no_tagged_singles():
    r = simulate(cfg(mu=0.8, eta=1.0))
    assert r.sifted_singles > 0
    assert r.tagged_singles == 0 and r.empirical_delta == 0.0


def test_histogram_invariants():
    r = simulate(cfg(n=123_457, batch_size=10_000))
    assert r.counts_by_detected_n.sum() == r.n_pulses == 123_457
    assert r.emitted_by_n.sum() == r.n_pulses
    assert r.sifted_singles == r.counts_by_detected_n[1]
    assert 0 <= r.empirical_delta <= 1
    assert np.all(r.detected_by_emitted_n <= r.emitted_by_n)
    assert r.detected_by_emitted_n[0] == 0


def test_determinism_and_worker_independence():
    c = cfg(n=300_001, batch_size=50_000, seed=77)
    a, b, p = simulate(c), simulate(c), simulate(c, workers=4)
    for other in (b, p):
        assert np.array_equal(a.counts_by_detected_n, other.counts_by_detected_n)
        assert np.array_equal(a.emitted_by_n, other.emitted_by_n)
        assert a.to_report() == other.to_report()
    assert not np.array_equal(a.counts_by_detected_n, simulate(cfg(n=300_001, batch_size=50_000, seed=78)).counts_by_detected_n)


def test_merging_is_counter_addition():
    c = cfg(n=100_000, batch_size=30_000)
    whole = simulate(c)
    parts = [_run_batch(c, b, size) for b, size in enumerate((30_000, 30_000, 30_000, 10_000))]
    total = parts[0] + parts[1] + parts[2] + parts[3]
    assert total.n_pulses == whole.n_pulses
    assert np.array_equal(total.counts_by_detected_n, whole.counts_by_detected_n)
    assert total.tagged_singles == whole.tagged_singles
    # associativity of merging
    left = (parts[0] + parts[1]) + parts[2]
    right = parts[0] + (parts[1] + parts[2])
    assert np.array_equal(left.detected_by_emitted_n, right.detected_by_emitted_n)


def test_delta_convergence_repetitions():
    hits = 0
    for seed in range(100):
        r = simulate(cfg(n=1_000_000, seed=seed))
        p, se = estimate_delta(r)
        hits += abs(p - DELTA_05_01) < 3 * se
    assert hits >= 99


def test_beam_splitter_null_chi_square():
    r = simulate(cfg(mu=0.2, eta=0.05, n=2_000_000, seed=5))
    chi = chi_square_vs_poisson(r, 0.2 * 0.05)
    assert chi.passed, chi


def test_chi_square_detects_blocking():
    r = simulate(cfg(mu=0.5, eta=0.3, n=1_000_000, seed=5, eve_strategy=block_singles(0.3)))
    assert not chi_square_vs_poisson(r, 0.15).passed


def test_dark_clicks():
    det = DetectorModel(dark_rate_hz=2e4)
    r = simulate(cfg(mu=0.1, eta=1e-3, n=500_000, detector=det))
    assert r.config["dark_prob"] == 0.02
    assert r.dark_contaminated > 0
    # at this loss nearly every kept click is a dark count
    assert r.dark_contaminated / r.sifted_singles > 0.9


def test_signal_plus_dark_is_discarded():
    det = DetectorModel(dark_rate_hz=1e6)  # a dark click in every window
    r = simulate(cfg(mu=0.3, eta=1.0, n=50_000, detector=det))
    assert r.counts_by_detected_n[0] == 0
    assert r.sifted_singles == r.dark_contaminated == r.emitted_by_n[0]


def test_finite_resolving_power_overflow_bin():
    det = DetectorModel(resolving_power=2)
    r = simulate(cfg(mu=1.5, eta=1.0, n=100_000, detector=det))
    assert len(r.counts_by_detected_n) == 4
    assert r.counts_by_detected_n[3] > 0
    assert r.tagged_singles == 0
    assert r.to_report()["rows"][-1]["overflow"] is True


def test_custom_table_matches_beam_splitter_statistically():
    t = forwarding_table(binomial_table(0.1), 0.1)
    a = simulate(cfg(n=1_000_000, seed=9, eve_strategy=t))
    p, se = estimate_delta(a)
    assert abs(p - tagged_fraction(0.5, 0.1)) < 4 * se


def test_bad_tables_rejected():
    with pytest.raises(ConfigError):
        forwarding_table([[1.0, 0.0], [0.3, 0.3]], 0.1)
    with pytest.raises(ConfigError):
        forwarding_table([[0.0, 1.0], [0.5, 0.5]], 0.1)
    with pytest.raises(ConfigError):
        forwarding_table([[1.0], [1.0]], 0.1)


def test_config_validation():
    with pytest.raises(ConfigError):
        cfg(n=0)
    with pytest.raises(ConfigError):
        cfg(eta=1.5)
    with pytest.raises(OverflowError):
        cfg(n=1 << 63)
    with pytest.raises(ConfigError):
        cfg(seed=-1)


def test_decoy_beam_splitter_passes():
    sig = simulate(cfg(mu=0.1, eta=0.1, n=2_000_000, seed=11))
    dec = simulate(cfg(mu=0.3, eta=0.1, n=2_000_000, seed=12))
    verdict = verify_decoy_consistency(sig, dec)
    assert verdict.passed and verdict.rejected_n == []
    assert verdict.rows[0].n == 1


def test_decoy_intensity_aware_rejected_at_one():
    honest, biased = intensity_aware_tables(0.1, 0.05)
    sig = simulate(cfg(mu=0.1, eta=0.1, n=2_000_000, seed=11, eve_strategy=honest))
    dec = simulate(cfg(mu=0.3, eta=0.1, n=2_000_000, seed=12, eve_strategy=biased))
    verdict = verify_decoy_consistency(sig, dec)
    assert not verdict.passed
    assert 1 in verdict.rejected_n


def test_decoy_errors():
    a = simulate(cfg(mu=0.1, eta=0.1, n=10_000))
    b = simulate(cfg(mu=0.3, eta=0.1, n=10_000, eve_strategy=block_singles(0.1)))
    with pytest.raises(ConfigError):
        verify_decoy_consistency(a, b)
    empty = McResult(0, np.zeros(3, int), np.zeros(3, int), np.zeros(3, int), 0, 0, 0, strategy="beam_splitter", eta=0.1)
    with pytest.raises(InsufficientDataError):
        verify_decoy_consistency(a, empty)


def test_decoy_config_helper():
    c = cfg(mu=0.1, decoy_mu=0.3, seed=4)
    d = c.decoy(seed=5)
    assert d.source.mu == 0.3 and d.seed == 5 and d.eta == c.eta


@settings(max_examples=20, deadline=None)
@given(mu=st.floats(0.05, 1.0), eta=st.floats(0.0, 1.0), seed=st.integers(0, 2**64 - 1))
def test_result_invariants_property(mu, eta, seed):
    r = simulate(cfg(mu=mu, eta=eta, n=5_000, seed=seed, batch_size=1_000))
    assert r.counts_by_detected_n.sum() == 5_000
    assert r.sifted_singles <= r.n_pulses
    assert r.tagged_singles <= r.sifted_singles
    if r.sifted_singles:
        assert 0 <= r.empirical_delta <= 1
    assert r.eta == eta and r.strategy == beam_splitter(eta).name
    assert math.isclose(r.mu, mu)
