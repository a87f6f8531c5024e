"""Gaussian-modulation baseline: covariance matrices, symplectic spectra, heterodyne RR rate.

Quadratures are in shot-noise units (vacuum variance 1).
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import block_diag
from scipy.special import xlogy

from .channel import ChannelParams
from .fock import DomainError

_OMEGA_1 = np.array([[0.0, 1.0], [-1.0, 0.0]])
_PAULI_Z = np.diag([1.0, -1.0])


def thermal_entropy(x: ArrayLike) -> NDArray[np.float64] | float:
    """g(x) = (x+1)log₂(x+1) − x·log₂x, the entropy of a thermal state with mean x photons."""

    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    bits = (xlogy(x + 1.0, x + 1.0) - xlogy(x, x)) / math.log(2.0)
    return float(bits) if bits.ndim == 0 else bits


def symplectic_form(modes: int) -> NDArray[np.float64]:
    return block_diag(*([_OMEGA_1] * modes))


def symplectic_eigenvalues(cov: NDArray[np.float64]) -> NDArray[np.float64]:
    """Symplectic spectrum from the moduli of the eigenvalues of iΩγ (each appears twice)."""

    modes = cov.shape[0] // 2
    spectrum = np.sort(np.abs(np.linalg.eigvals(1j * symplectic_form(modes) @ cov)))
    return spectrum[::2]


def gaussian_entropy(cov: NDArray[np.float64]) -> float:
    nu = np.maximum(symplectic_eigenvalues(cov), 1.0)
    return float(np.sum(thermal_entropy((nu - 1.0) / 2.0)))


def heterodyne_conditional(
    cov_kept: NDArray[np.float64],
    cov_measured: NDArray[np.float64],
    correlations: NDArray[np.float64],
) -> NDArray[np.float64]:
    """Covariance of the kept mode after heterodyning the other: γ_A − C(γ_B + I)⁻¹Cᵀ."""

    identity = np.eye(cov_measured.shape[0])
    return cov_kept - correlations @ np.linalg.solve(cov_measured + identity, correlations.T)


def entangling_cloner_covariance(vm: float, ch: ChannelParams) -> NDArray[np.float64]:
    """γ_AB of the entanglement-based protocol after the thermal-loss channel."""

    if vm < 0.0:
        raise DomainError(f"modulation variance must be >= 0, got {vm}")
    v = vm + 1.0
    v_bob = ch.tau * v + (1.0 - ch.tau) * ch.omega
    c = math.sqrt(ch.tau * (v * v - 1.0))
    identity = np.eye(2)
    return np.block([[v * identity, c * _PAULI_Z], [c * _PAULI_Z, v_bob * identity]])


def gaussian_rr_terms(vm: float, ch: ChannelParams) -> tuple[float, float]:
    """Mutual information I_AB and Eve's Holevo bound χ(E:B) for heterodyne detection."""

    cov = entangling_cloner_covariance(vm, ch)
    cov_a, cov_b, corr = cov[:2, :2], cov[2:, 2:], cov[:2, 2:]

    # Alice's heterodyne projects B onto the prepared coherent state plus channel noise.
    v_bob = cov_b[0, 0]
    v_bob_given_a = heterodyne_conditional(cov_b, cov_a, corr.T)[0, 0]
    i_ab = math.log2((v_bob + 1.0) / (v_bob_given_a + 1.0))

    holevo = gaussian_entropy(cov) - gaussian_entropy(heterodyne_conditional(cov_a, cov_b, corr))
    return i_ab, max(holevo, 0.0)


def gaussian_rr_rate(vm: float, ch: ChannelParams, beta: float = 1.0) -> float:
    i_ab, holevo = gaussian_rr_terms(vm, ch)
    return beta * i_ab - holevo
