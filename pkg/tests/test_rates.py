from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from pytest_mock import MockerFixture

from psk_keyrate.channel import ChannelParams, db_to_tau
from psk_keyrate.config import Settings
from psk_keyrate.constellation import INFINITE, build_constellation, source_entropy
from psk_keyrate.fock import DomainError, UsageError
from psk_keyrate.gaussian import gaussian_rr_rate
from psk_keyrate.quadrature import QuadratureGrid
from psk_keyrate.rates import (
    holevo_dr,
    mutual_information,
    rate_dr,
    rate_dr_upper,
    rate_point,
    rate_rr,
)


def test_mutual_information_trivial_limits(fast_settings: Settings) -> None:
    assert mutual_information(build_constellation(0.0, 4), ChannelParams(0.5), settings=fast_settings) == 0.0
    assert mutual_information(build_constellation(1.0, 1), ChannelParams(0.5), settings=fast_settings) == 0.0

    distinguishable = mutual_information(build_constellation(5.0, 4), ChannelParams(1.0))
    assert distinguishable == pytest.approx(2.0, abs=1e-3)


@pytest.mark.parametrize("z, n, tau, nbar", [(0.3, 4, 0.5, 0.0), (1.0, 3, 0.8, 0.1), (2.0, 8, 0.3, 0.05)])
def test_mutual_information_bounds(z: float, n: int, tau: float, nbar: float, fast_settings: Settings) -> None:
    info = mutual_information(build_constellation(z, n), ChannelParams(tau, nbar), settings=fast_settings)
    assert 0.0 < info <= math.log2(n)


def test_mutual_information_below_gaussian_channel_capacity(fast_settings: Settings) -> None:
    ch = ChannelParams(0.5, 0.1)
    info = mutual_information(build_constellation(1.0, 4), ch, settings=fast_settings)
    assert info <= math.log2(1.0 + ch.tau / ch.output_noise) + 1e-9


def test_holevo_dr_trivial_limits() -> None:
    assert holevo_dr(build_constellation(1.0, 4), ChannelParams(1.0)) == pytest.approx(0.0, abs=1e-12)
    assert holevo_dr(build_constellation(0.0, 4), ChannelParams(0.5)) == pytest.approx(0.0, abs=1e-12)
    assert holevo_dr(build_constellation(0.0, 4), ChannelParams(0.5, 0.1)) == pytest.approx(0.0, abs=1e-9)


def test_holevo_dr_pure_loss_paths_agree() -> None:
    c = build_constellation(0.5, 4)
    ch = ChannelParams(0.6)

    gram_schmidt = holevo_dr(c, ch)
    fock = holevo_dr(c, ch, fock_pipeline=True)
    assert gram_schmidt == pytest.approx(fock, abs=1e-6)
    assert gram_schmidt > 0.0


def test_holevo_dr_is_nonnegative_with_noise(thermal_point) -> None:
    assert holevo_dr(thermal_point.constellation, thermal_point.channel) >= 0.0


def test_dr_upper_bound_structure() -> None:
    assert rate_dr_upper(0.7, 4, 0.5) == pytest.approx(0.0, abs=1e-12)
    assert rate_dr_upper(0.7, INFINITE, 0.5) == pytest.approx(0.0, abs=1e-12)
    assert rate_dr_upper(0.7, 4, 1.0) == pytest.approx(source_entropy(0.7, 4), abs=1e-12)
    assert rate_dr_upper(0.7, 4, 0.3) < 0.0
    with pytest.raises(DomainError):
        rate_dr_upper(0.7, 4, 0.0)


@pytest.mark.parametrize("tau", [0.6, 0.8, 0.95])
def test_dr_upper_bound_vanishes_for_huge_radius(tau: float) -> None:
    assert abs(rate_dr_upper(1e6, 4, tau)) <= 1e-6


@pytest.mark.parametrize("z", [0.1, 0.3, 0.6])
@pytest.mark.parametrize("tau", [0.6, 0.8])
def test_four_state_and_continuous_upper_bounds_coincide_at_low_energy(z: float, tau: float) -> None:
    finite = rate_dr_upper(z, 4, tau)
    continuous = rate_dr_upper(z, INFINITE, tau)
    assert finite == pytest.approx(continuous, rel=1e-2)


def test_rr_lossless_rate_equals_mutual_information(fast_settings: Settings) -> None:
    point = rate_rr(build_constellation(0.5, 4), ChannelParams(1.0), settings=fast_settings)

    assert point.holevo == pytest.approx(0.0, abs=1e-12)
    assert point.rate == pytest.approx(point.i_ab, abs=1e-12)
    assert point.cutoff_dim is None


def test_rr_modes_agree_without_thermal_noise(fast_settings: Settings) -> None:
    c, ch = build_constellation(0.3, 4), ChannelParams(0.5)
    exact = rate_rr(c, ch, mode="exact", settings=fast_settings)
    unconditioned = rate_rr(c, ch, mode="unconditioned", settings=fast_settings)

    assert exact.rate == pytest.approx(unconditioned.rate, abs=1e-8)


@pytest.mark.parametrize("mode", ["exact", "unconditioned"])
def test_rr_thermal_pipeline_reproduces_pure_loss(mode: str, pure_loss_point, fast_settings: Settings) -> None:
    c, ch = pure_loss_point.constellation, pure_loss_point.channel
    pure = rate_rr(c, ch, mode=mode, settings=fast_settings)  # type: ignore[arg-type]
    fock = rate_rr(c, ch, mode=mode, fock_pipeline=True, settings=fast_settings)  # type: ignore[arg-type]

    assert fock.cutoff_dim is not None
    assert fock.rate == pytest.approx(pure.rate, abs=1e-6)


def test_dr_thermal_pipeline_reproduces_pure_loss(pure_loss_point, fast_settings: Settings) -> None:
    c, ch = pure_loss_point.constellation, pure_loss_point.channel
    pure = rate_dr(c, ch, settings=fast_settings)
    fock = rate_dr(c, ch, fock_pipeline=True, settings=fast_settings)

    assert fock.rate == pytest.approx(pure.rate, abs=1e-6)


def test_rate_assembly_is_consistent(thermal_point, fast_settings: Settings) -> None:
    c, ch = thermal_point.constellation, thermal_point.channel
    for point in (rate_dr(c, ch, beta=0.95, settings=fast_settings), rate_rr(c, ch, beta=0.95, settings=fast_settings)):
        assert point.rate == pytest.approx(0.95 * point.i_ab - point.holevo, abs=1e-12)
        assert abs(point.rate) <= math.log2(c.size)
        assert point.beta == 0.95


def test_dr_rate_vanishes_without_signal(fast_settings: Settings) -> None:
    point = rate_dr(build_constellation(0.0, 4), ChannelParams(0.8), settings=fast_settings)
    assert point.rate == pytest.approx(0.0, abs=1e-12)


def test_dr_rate_is_not_positive_at_half_transmission(fast_settings: Settings) -> None:
    point = rate_dr(build_constellation(0.1, 4), ChannelParams(db_to_tau(3.0103)), settings=fast_settings)
    assert point.rate <= 1e-6


@pytest.mark.parametrize("tau", [0.95, 0.8, 0.6])
def test_dr_rate_respects_upper_bound(tau: float, fast_settings: Settings) -> None:
    point = rate_dr(build_constellation(0.5, 4), ChannelParams(tau), settings=fast_settings)
    assert point.rate <= rate_dr_upper(0.5, 4, tau) + 1e-6


def test_explicit_grid_is_reported(fast_settings: Settings) -> None:
    c, ch = build_constellation(0.4, 4), ChannelParams(0.7)
    grid = QuadratureGrid.for_protocol(c.z, ch.tau, ch.nbar, c.size, 24, 12)
    point = rate_rr(c, ch, grid, settings=fast_settings)

    assert (point.n_radial, point.n_angular) == (24, 12)
    assert point.grid_delta is None and point.cutoff_delta is None


def test_convergence_guard_flags_coarse_grid(guarded_settings: Settings) -> None:
    c, ch = build_constellation(1.0, 4), ChannelParams(0.5, 0.01)
    coarse = QuadratureGrid.for_protocol(c.z, ch.tau, ch.nbar, c.size, 3, 2)
    point = rate_rr(c, ch, coarse, settings=guarded_settings)

    assert not point.converged
    assert point.grid_delta is not None and point.cutoff_delta is not None


def test_convergence_guard_passes_on_default_grid(guarded_settings: Settings) -> None:
    point = rate_dr(build_constellation(0.3, 4), ChannelParams(0.9), settings=guarded_settings)

    assert point.converged
    assert point.grid_delta < 1e-5
    assert point.normalization_error < 1e-6


def test_rate_point_dispatch(fast_settings: Settings) -> None:
    entropy = rate_point("entropy", 1.0, 4, settings=fast_settings)
    assert entropy.rate == pytest.approx(source_entropy(1.0, 4))
    assert entropy.tau is None

    gaussian = rate_point("gaussian", 0.1, 4, ChannelParams(1.0), settings=fast_settings)
    assert gaussian.rate == pytest.approx(gaussian_rr_rate(0.02, ChannelParams(1.0)))

    upper = rate_point("dr-upper", 0.5, INFINITE, ChannelParams(0.8), settings=fast_settings)
    assert upper.n_label == "inf"
    assert upper.rate == pytest.approx(rate_dr_upper(0.5, INFINITE, 0.8))

    rr = rate_point("rr", 0.3, 4, ChannelParams(0.5), grid_radial=20, grid_angular=8, settings=fast_settings)
    assert (rr.direction, rr.n_radial, rr.n_angular) == ("rr", 20, 8)


def test_rate_point_rejects_invalid_requests(fast_settings: Settings) -> None:
    with pytest.raises(DomainError):
        rate_point("dr-upper", 0.5, 4, ChannelParams(0.8, 0.1), settings=fast_settings)
    with pytest.raises(UsageError):
        rate_point("rr", 0.5, 4, None, settings=fast_settings)
    with pytest.raises(UsageError):
        rate_point("sideways", 0.5, 4, ChannelParams(0.8), settings=fast_settings)  # type: ignore[arg-type]


def test_strict_paper_mode_matches_unconditioned(thermal_point, fast_settings: Settings) -> None:
    c, ch = thermal_point.constellation, thermal_point.channel
    strict = rate_rr(c, ch, mode="strict-paper", settings=fast_settings)
    unconditioned = rate_rr(c, ch, mode="unconditioned", settings=fast_settings)

    assert strict.rate == unconditioned.rate
    assert strict.mode == "strict-paper"


@pytest.mark.parametrize("direction", ["dr", "rr", "gaussian"])
def test_rates_do_not_increase_with_thermal_noise(direction: str, fast_settings: Settings) -> None:
    tau = 0.9 if direction == "dr" else 0.6
    rates = [
        rate_point(direction, 0.5, 4, ChannelParams(tau, nbar), settings=fast_settings).rate  # type: ignore[arg-type]
        for nbar in (0.0, 0.001, 0.01, 0.1)
    ]
    assert all(later <= earlier + 1e-9 for earlier, later in zip(rates, rates[1:]))


def test_pure_loss_rr_rate_does_not_increase_with_attenuation(fast_settings: Settings) -> None:
    settings = replace(fast_settings, grid_radial=80, grid_angular=32)
    c = build_constellation(0.3, 4)
    rates = [
        rate_rr(c, ChannelParams.from_attenuation(db), settings=settings).rate
        for db in np.arange(0.0, 30.01, 2.0)
    ]
    assert all(later <= earlier + 1e-9 for earlier, later in zip(rates, rates[1:]))
    assert rates[-1] > 0.0


def test_clipped_mutual_information_fails_the_guard(mocker: MockerFixture, fast_settings: Settings) -> None:
    c, ch = build_constellation(0.4, 4), ChannelParams(0.7)
    grid = QuadratureGrid.for_protocol(c.z, ch.tau, ch.nbar, c.size, 8, 4)
    area = float(grid.weights.sum())
    # Unit normalization, but an average posterior entropy above log2(N).
    table = np.column_stack([np.full(grid.nodes.size, 1.0 / area), np.full(grid.nodes.size, 3.0 / area)])
    mocker.patch("psk_keyrate.rates.map_node_chunks", return_value=table)

    point = rate_dr(c, ch, grid, settings=fast_settings)

    assert point.i_ab == 0.0
    assert point.normalization_error == pytest.approx(0.0, abs=1e-12)
    assert not point.converged
