import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pytest import approx

import oracles
from pnrqkd.attacks import binary_entropy
from pnrqkd.errors import DomainError
from pnrqkd.security_rate import (
    ErrorModel,
    final_key_rate,
    gllp_rate,
    key_rate_report,
    raw_rate,
    residual_tagged_fraction,
    sifted_rate,
    tagged_fraction,
    tagged_fraction_limit,
    tagged_fraction_series,
    total_qber,
)

# frozen from tests/oracles.py (50-digit mpmath)
DELTA0_01 = 0.095162581964040432
DELTA0_07 = 0.50341469620859046
DELTA_05_01 = 0.36237184837822671
GLLP_005_01 = 0.0037627381676434497
GLLP_011_0 = 0.00016808367094400537
SIFTED_005 = 0.3394535699572515
RF_01_001_001 = 0.00016845844141468255
RESID_4 = 7.6685685047e-4
RESID_10 = 2.2860735267e-15
SIFTED_CUTOFF = 0.0972  # first nonpositive e on a 1e-4 grid at delta0(0.1)


def test_tagged_fraction_examples():
    assert tagged_fraction(0.3, 1.0) == 0.0
    assert tagged_fraction(0.5, 0.1) == approx(DELTA_05_01, rel=1e-14)
    assert tagged_fraction(0.1, 0.0) == approx(DELTA0_01, rel=1e-14)
    with pytest.raises(DomainError):
        tagged_fraction(0.0, 0.5)
    with pytest.raises(DomainError):
        tagged_fraction(0.1, 1.5)


def test_tagged_fraction_limit():
    assert tagged_fraction_limit(0.1) == approx(DELTA0_01, rel=1e-14)
    assert tagged_fraction_limit(0.7) == approx(DELTA0_07, rel=1e-14)
    assert tagged_fraction_limit(1e-9) / 1e-9 == approx(1.0, rel=1e-8)


@pytest.mark.parametrize("mu", [0.05, 0.1, 0.5, 1.0])
@pytest.mark.parametrize("eta", [1e-4, 1e-3, 0.1, 0.5, 0.99])
def test_tagged_closed_form_matches_series(mu, eta):
    ref = float(oracles.tagged_ratio(mu, eta))
    assert abs(tagged_fraction(mu, eta) - ref) < 1e-12
    assert abs(tagged_fraction_series(mu, eta) - ref) < 1e-12


def test_tagged_monotonicity_and_bound():
    mus = np.linspace(0.05, 1.0, 20)
    etas = np.logspace(-4, 0, 20)
    grid = np.array([[tagged_fraction(m, e) for e in etas] for m in mus])
    # the eta = 1 column is identically 0, so strictness holds only below it
    assert np.all(np.diff(grid[:, :-1], axis=0) > 0)
    assert np.all(np.diff(grid, axis=0) >= 0)
    assert np.all(np.diff(grid, axis=1) < 0)
    limits = np.array([tagged_fraction_limit(m) for m in mus])
    assert np.all(grid >= 0)
    assert np.all(grid <= limits[:, None])


def test_residual_tagged_fraction():
    assert residual_tagged_fraction(0.1, 1e-3, 4) == approx(RESID_4, rel=1e-9)
    assert 5e-4 < residual_tagged_fraction(0.1, 1e-3, 4) < 1e-3
    assert residual_tagged_fraction(0.1, 1e-3, 10) == approx(RESID_10, rel=1e-8)
    assert residual_tagged_fraction(0.1, 1e-3, None) == 0.0
    assert residual_tagged_fraction(0.1, 1e-3, math.inf) == 0.0
    with pytest.raises(DomainError):
        residual_tagged_fraction(0.1, 0.0, 4)
    with pytest.raises(DomainError):
        residual_tagged_fraction(0.1, 0.1, 0)


@pytest.mark.parametrize("mu, eta, n0", [(0.1, 1e-3, 2), (0.5, 0.1, 3), (1.0, 0.5, 6)])
def test_residual_matches_series(mu, eta, n0):
    ref = float(oracles.residual_ratio(mu, eta, n0))
    assert residual_tagged_fraction(mu, eta, n0) == approx(ref, rel=1e-12)


def test_total_qber():
    assert total_qber(0.033, 0.0) == (0.033, False)
    assert total_qber(0.01, 0.02)[0] == approx(0.02)
    assert total_qber(0.4, 0.5) == (0.5, True)
    m = ErrorModel.from_components(0.4, 0.5)
    assert m.e_total == 0.5 and m.clamped
    with pytest.raises(DomainError):
        total_qber(0.6, 0.0)
    with pytest.raises(DomainError):
        total_qber(0.1, 1.5)


def test_gllp_rate():
    assert gllp_rate(0.0, 0.0) == 1.0
    assert gllp_rate(0.05, 0.1) == approx(GLLP_005_01, rel=1e-10)
    assert gllp_rate(0.11, 0.0) == approx(GLLP_011_0, rel=1e-8)
    with pytest.raises(DomainError):
        gllp_rate(0.5, 0.6)


@given(st.floats(0.0, 0.5))
def test_gllp_zero_delta(e):
    assert gllp_rate(e, 0.0) == approx(1 - 2 * binary_entropy(e), abs=1e-12)


def test_sifted_rate():
    assert sifted_rate(0.0, 0.3) == approx(0.7, rel=1e-15)
    assert sifted_rate(0.05, DELTA0_01) == approx(SIFTED_005, rel=1e-10)
    with pytest.raises(DomainError):
        sifted_rate(0.1, 1.0)


def test_sifted_rate_cutoff_scan():
    es = np.round(np.arange(0, 0.5, 1e-4), 4)
    vals = np.array([sifted_rate(float(e), DELTA0_01) for e in es])
    first = es[np.argmax(vals <= 0)]
    assert first == approx(SIFTED_CUTOFF, abs=1e-9)
    # past the cutoff the rate stays negative, even where e/(1-delta0) would exceed 1
    assert np.all(vals[es >= SIFTED_CUTOFF] <= 0)
    assert sifted_rate(0.5, 0.6) < 0


def test_final_key_rate():
    assert final_key_rate(0.1, 0.01, 0.01) == approx(RF_01_001_001, rel=1e-10)
    assert abs(final_key_rate(1e-12, 0.5, 0.01)) < 1e-11
    assert final_key_rate(0.1, 0.01, 0.2) < 0


def test_final_rate_sign_change_beyond_max():
    mus = np.linspace(1e-3, 2.0, 2000)
    vals = np.array([final_key_rate(m, 0.01, 0.03) for m in mus])
    i = int(np.argmax(vals))
    assert vals[i] > 0
    assert np.any(vals[i:] <= 0)
    assert np.max(np.abs(np.diff(vals))) < 1e-4


def test_key_rate_report_invariants():
    for mu in (0.05, 0.1, 0.5, 1.0):
        for eta in (1e-4, 0.01, 0.5, 1.0):
            rep = key_rate_report(mu, eta, 0.02, 1e-3, n0=4)
            assert 0 <= rep.delta <= rep.delta0 < 1
            assert rep.r_final <= rep.raw_rate == raw_rate(mu, eta)
            assert rep.delta_prime >= 0
    assert key_rate_report(0.1, 0.01, 0.01, 0.0).secure
    assert not key_rate_report(0.1, 0.01, 0.5, 0.0).secure
