"""Polar Gauss-Legendre grids over heterodyne outcomes with N-fold wedge symmetry."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import NDArray

from .config import DEFAULT_GRID_ANGULAR, DEFAULT_GRID_RADIAL, DEFAULT_NODE_CHUNK, WEDGE_RADIUS_SIGMAS

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    radii: NDArray[np.float64]
    radial_weights: NDArray[np.float64]
    angles: NDArray[np.float64]
    wedge: int
    r_max: float

    @classmethod
    def build(
        cls,
        r_max: float,
        n_radial: int = DEFAULT_GRID_RADIAL,
        n_angular: int = DEFAULT_GRID_ANGULAR,
        wedge: int = 1,
    ) -> QuadratureGrid:
        """Gauss-Legendre radii on [0, r_max]; midpoint angles on a wedge of 2π/wedge."""

        if r_max <= 0.0 or n_radial < 1 or n_angular < 1 or wedge < 1:
            raise ValueError("grid needs r_max > 0 and positive node counts")
        x, w = np.polynomial.legendre.leggauss(n_radial)
        radii = 0.5 * r_max * (x + 1.0)
        radial_weights = 0.5 * r_max * w
        span = 2.0 * math.pi / wedge
        angles = (np.arange(n_angular) + 0.5) * span / n_angular
        return cls(radii, radial_weights, angles, wedge, float(r_max))

    @classmethod
    def for_protocol(
        cls,
        z: float,
        tau: float,
        nbar: float,
        wedge: int,
        n_radial: int = DEFAULT_GRID_RADIAL,
        n_angular: int = DEFAULT_GRID_ANGULAR,
    ) -> QuadratureGrid:
        r_max = math.sqrt(tau) * z + WEDGE_RADIUS_SIGMAS * math.sqrt(1.0 + (1.0 - tau) * nbar)
        logger.debug("grid r_max=%.4g %dx%d wedge=%d", r_max, n_radial, n_angular, wedge)
        return cls.build(r_max, n_radial, n_angular, wedge)

    @property
    def n_radial(self) -> int:
        return int(self.radii.size)

    @property
    def n_angular(self) -> int:
        return int(self.angles.size)

    @cached_property
    def nodes(self) -> NDArray[np.complex128]:
        return (self.radii[:, None] * np.exp(1j * self.angles)[None, :]).reshape(-1)

    @cached_property
    def weights(self) -> NDArray[np.float64]:
        """Area weights including the wedge multiplicity, so Σ w f = ∫ f d²b for wedge-symmetric f."""

        span = 2.0 * math.pi / self.wedge
        angular = np.full(self.n_angular, span / self.n_angular * self.wedge)
        return ((self.radii * self.radial_weights)[:, None] * angular[None, :]).reshape(-1)

    def refined(self, factor: int = 2) -> QuadratureGrid:
        return QuadratureGrid.build(
            self.r_max, self.n_radial * factor, self.n_angular * factor, self.wedge
        )

    def integrate(self, values: NDArray[np.float64]) -> float:
        return float(np.dot(self.weights, values))


def map_node_chunks(
    func: Callable[[NDArray[np.complex128]], NDArray[np.float64]],
    nodes: NDArray[np.complex128],
    chunk: int = DEFAULT_NODE_CHUNK,
    threads: int = 1,
) -> NDArray[np.float64]:
    """Evaluate ``func`` on fixed-size node batches; output order never depends on ``threads``."""

    batches = [nodes[start : start + chunk] for start in range(0, nodes.size, max(chunk, 1))]
    if threads > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            results = list(executor.map(func, batches))
    else:
        results = [func(batch) for batch in batches]
    return np.concatenate(results) if results else np.zeros(0)
