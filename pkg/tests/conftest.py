from __future__ import annotations

import os
from dataclasses import dataclass

import pytest

from psk_keyrate.channel import ChannelParams
from psk_keyrate.config import Settings
from psk_keyrate.constellation import Constellation, build_constellation


@dataclass(slots=True)
class ProtocolPoint:
    constellation: Constellation
    channel: ChannelParams


@pytest.fixture(autouse=True)
def _isolated_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    for name in list(os.environ):
        if name.startswith("PSK_KEYRATE_"):
            monkeypatch.delenv(name, raising=False)


@pytest.fixture()
def fast_settings() -> Settings:
    """Coarse grid without the convergence guard, for structural checks."""

    return Settings(
        tail_tolerance=1e-9,
        grid_radial=40,
        grid_angular=16,
        workers=1,
        node_chunk=512,
        node_threads=1,
        check_convergence=False,
        log_level="WARNING",
    )


@pytest.fixture()
def guarded_settings() -> Settings:
    return Settings(
        tail_tolerance=1e-9,
        grid_radial=80,
        grid_angular=32,
        workers=1,
        node_chunk=2048,
        node_threads=1,
        check_convergence=True,
        log_level="WARNING",
    )


@pytest.fixture()
def thermal_point() -> ProtocolPoint:
    return ProtocolPoint(build_constellation(0.5, 4), ChannelParams(0.6, 0.1))


@pytest.fixture()
def pure_loss_point() -> ProtocolPoint:
    return ProtocolPoint(build_constellation(0.3, 4), ChannelParams(0.7, 0.0))
