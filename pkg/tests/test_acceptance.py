"""End-to-end reference values on default settings; deselect with ``pytest -m "not slow"``."""

from __future__ import annotations

import math

import numpy as np
import pytest

from psk_keyrate.channel import ChannelParams, db_to_tau, posterior
from psk_keyrate.config import Settings
from psk_keyrate.constellation import build_constellation
from psk_keyrate.gaussian import gaussian_rr_rate
from psk_keyrate.rates import mutual_information, rate_dr, rate_rr

pytestmark = pytest.mark.slow

SAMPLES = 1_000_000


def _sampled_mutual_information(z: float, n: int, ch: ChannelParams, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of I(A;B) with its standard error."""

    rng = np.random.default_rng(seed)
    c = build_constellation(z, n)
    letters = rng.integers(0, n, size=SAMPLES)
    scale = math.sqrt(ch.output_noise / 2.0)
    noise = rng.normal(scale=scale, size=SAMPLES) + 1j * rng.normal(scale=scale, size=SAMPLES)
    b = math.sqrt(ch.tau) * c.amplitudes[letters] + noise

    post = posterior(b, c, ch)
    logs = np.log2(np.where(post > 0.0, post, 1.0))
    samples = math.log2(n) + np.sum(post * logs, axis=-1)
    return float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(SAMPLES))


@pytest.mark.parametrize(
    "z, n, tau, nbar, seed",
    [(0.3, 4, 0.5, 0.0, 11), (1.0, 4, 0.2, 0.05, 12), (1.5, 8, 0.8, 0.1, 13)],
)
def test_mutual_information_matches_sampling(z: float, n: int, tau: float, nbar: float, seed: int) -> None:
    ch = ChannelParams(tau, nbar)
    estimate, error = _sampled_mutual_information(z, n, ch, seed)
    exact = mutual_information(build_constellation(z, n), ch, settings=Settings())

    assert abs(exact - estimate) <= 3.0 * error + 1e-9


@pytest.mark.parametrize(
    "attenuation_db, epsilon",
    [(0.0, 0.0), (5.0, 0.0), (10.0, 0.0), (15.0, 0.0), (20.0, 0.0), (5.0, 0.001), (10.0, 0.001), (15.0, 0.001), (20.0, 0.001)],
)
def test_weak_four_state_protocol_tracks_gaussian_modulation(attenuation_db: float, epsilon: float) -> None:
    ch = ChannelParams.from_excess_noise(db_to_tau(attenuation_db), epsilon)
    point = rate_rr(build_constellation(0.1, 4), ch, settings=Settings())

    assert point.converged
    assert point.rate == pytest.approx(gaussian_rr_rate(0.02, ch), rel=0.05)


@pytest.mark.parametrize("attenuation_db", [5.0, 10.0, 15.0])
def test_gaussian_modulation_outperforms_four_states_at_large_amplitude(attenuation_db: float) -> None:
    ch = ChannelParams.from_excess_noise(db_to_tau(attenuation_db), 0.01)
    point = rate_rr(build_constellation(1.0, 4), ch, settings=Settings())

    assert gaussian_rr_rate(2.0, ch) > point.rate


def test_reverse_reconciliation_rate_at_fifteen_decibels() -> None:
    ch = ChannelParams.from_excess_noise(db_to_tau(15.0), 0.01)
    point = rate_rr(build_constellation(1.0, 4), ch, settings=Settings())

    assert point.converged
    assert 2e-3 <= point.rate <= 8e-3


def test_direct_reconciliation_degrades_with_thermal_noise() -> None:
    c = build_constellation(0.1, 4)
    tau = db_to_tau(0.5)
    rates = [rate_dr(c, ChannelParams(tau, nbar), settings=Settings()).rate for nbar in (0.0, 0.01, 0.1)]

    assert rates[0] > rates[1] > rates[2]


@pytest.mark.parametrize("attenuation_db", [3.0103, 3.5, 4.0])
def test_direct_reconciliation_has_no_key_beyond_three_decibels(attenuation_db: float) -> None:
    point = rate_dr(build_constellation(0.1, 4), ChannelParams.from_attenuation(attenuation_db), settings=Settings())
    assert point.rate <= 1e-6


def test_reverse_reconciliation_rate_falls_with_loss() -> None:
    c = build_constellation(0.1, 4)
    rates = [
        rate_rr(c, ChannelParams.from_attenuation(db), settings=Settings()).rate
        for db in (0.0, 2.0, 5.0, 10.0, 15.0, 20.0)
    ]

    assert all(later <= earlier + 1e-9 for earlier, later in zip(rates, rates[1:]))
    assert rates[-1] > 0.0
