"""Truncated Fock-space kernel: states, the beam splitter, partial traces and entropies."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import expm
from scipy.special import entr, gammaln, xlogy
from scipy.stats import poisson

from .config import (
    CUTOFF_GUARD_STEP,
    DEFAULT_TAIL_TOLERANCE,
    EIGENVALUE_CLAMP,
    HERMITIAN_TOLERANCE,
    MIN_CUTOFF_DIM,
    NEGATIVE_EIGENVALUE_FLOOR,
)

logger = logging.getLogger(__name__)

ComplexArray = NDArray[np.complex128]
RealArray = NDArray[np.float64]

_LN2 = math.log(2.0)
_MAX_SEARCH_DIM = 100_000


class FockError(RuntimeError):
    """Base error for truncated Fock-space computations."""


class DomainError(FockError, ValueError):
    """A physical parameter lies outside its domain."""


class UsageError(FockError, ValueError):
    """An operation was called with an invalid mode selection."""


class InvalidStateError(FockError):
    """A matrix is not a valid density matrix within tolerance."""


class CutoffInsufficientError(FockError):
    def __init__(self, dim: int, required_dim: int, tail: float, tolerance: float) -> None:
        super().__init__(
            f"Fock cutoff dim={dim} discards probability {tail:.3e} > {tolerance:.1e}; "
            f"dim >= {required_dim} is required"
        )
        self.dim = dim
        self.required_dim = required_dim
        self.tail = tail
        self.tolerance = tolerance

    def __reduce__(self) -> tuple[type, tuple[int, int, float, float]]:
        return type(self), (self.dim, self.required_dim, self.tail, self.tolerance)


@dataclass(frozen=True, slots=True)
class FockCutoff:
    dim_per_mode: int
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE

    def __post_init__(self) -> None:
        if self.dim_per_mode < 2:
            raise DomainError(f"dim_per_mode must be >= 2, got {self.dim_per_mode}")
        if not self.tail_tolerance > 0.0:
            raise DomainError(f"tail_tolerance must be positive, got {self.tail_tolerance}")

    def enlarged(self, step: int = CUTOFF_GUARD_STEP) -> FockCutoff:
        return FockCutoff(self.dim_per_mode + step, self.tail_tolerance)


@dataclass(frozen=True, slots=True)
class StateVector:
    mode_dims: tuple[int, ...]
    amplitudes: ComplexArray
    raw_norm: float = 1.0

    def __post_init__(self) -> None:
        if self.amplitudes.shape != (math.prod(self.mode_dims),):
            raise UsageError(
                f"amplitudes of shape {self.amplitudes.shape} do not match modes {self.mode_dims}"
            )

    @property
    def tensor(self) -> ComplexArray:
        return self.amplitudes.reshape(self.mode_dims)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True, slots=True)
class DensityMatrix:
    mode_dims: tuple[int, ...]
    entries: ComplexArray
    basis: str = "fock"

    def __post_init__(self) -> None:
        side = math.prod(self.mode_dims)
        if self.entries.shape != (side, side):
            raise UsageError(
                f"density matrix of shape {self.entries.shape} does not match modes {self.mode_dims}"
            )

    @classmethod
    def from_vector(cls, state: StateVector) -> DensityMatrix:
        psi = state.amplitudes
        return cls(state.mode_dims, np.outer(psi, psi.conj()))

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def eigenvalues(self) -> RealArray:
        hermitian = 0.5 * (self.entries + self.entries.conj().T)
        return np.linalg.eigvalsh(hermitian)


@dataclass(frozen=True, slots=True)
class UnitaryMatrix:
    mode_dims: tuple[int, int]
    entries: ComplexArray

    def unitarity_error(self) -> float:
        product = self.entries.conj().T @ self.entries
        return float(np.max(np.abs(product - np.eye(product.shape[0]))))

    def apply(self, state: StateVector) -> StateVector:
        """Act on the leading two modes of ``state``, leaving any further modes untouched."""

        if state.mode_dims[:2] != self.mode_dims:
            raise UsageError(f"unitary on modes {self.mode_dims} cannot act on {state.mode_dims}")
        block = math.prod(self.mode_dims)
        psi = state.amplitudes.reshape(block, -1)
        out = (self.entries @ psi).reshape(-1)
        return StateVector(state.mode_dims, out, state.raw_norm)


# --------------------------------------------------------------------------- tails


def poisson_tail(mean_photons: float, dim: int) -> float:
    """Probability mass of Poisson(mean_photons) on n >= dim."""

    if mean_photons <= 0.0:
        return 0.0
    return float(poisson.sf(dim - 1, mean_photons))


def thermal_tail(nbar: float, dim: int) -> float:
    if nbar <= 0.0:
        return 0.0
    return float((nbar / (nbar + 1.0)) ** dim)


def joint_tail(mean_photons: float, nbar: float, dim: int) -> float:
    """Mass on n_A + n_E >= dim for independent Poisson and geometric photon numbers."""

    if nbar <= 0.0:
        return poisson_tail(mean_photons, dim)
    ratio = nbar / (nbar + 1.0)
    m = np.arange(dim)
    head = poisson.pmf(m, mean_photons) if mean_photons > 0.0 else (m == 0).astype(float)
    return poisson_tail(mean_photons, dim) + float(np.sum(head * ratio ** (dim - m)))


def required_dim(mean_photons: float, nbar: float = 0.0, tail_tolerance: float = DEFAULT_TAIL_TOLERANCE) -> int:
    """Smallest per-mode dimension whose joint discarded mass is within tolerance."""

    dim = max(2, int(mean_photons))
    while joint_tail(mean_photons, nbar, dim) > tail_tolerance:
        dim += 1
        if dim > _MAX_SEARCH_DIM:
            raise CutoffInsufficientError(dim, dim, joint_tail(mean_photons, nbar, dim), tail_tolerance)
    return dim


def default_cutoff(
    mean_photons: float,
    nbar: float = 0.0,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
) -> FockCutoff:
    heuristic = max(
        math.ceil(2.0 * mean_photons) + 6,
        math.ceil(10.0 * (nbar + 1.0) - 1e-9),
        MIN_CUTOFF_DIM,
    )
    dim = max(heuristic, required_dim(mean_photons, nbar, tail_tolerance))
    logger.debug("cutoff for |a|^2=%g nbar=%g: dim=%d", mean_photons, nbar, dim)
    return FockCutoff(dim, tail_tolerance)


# --------------------------------------------------------------------------- operators


def annihilation_operator(dim: int) -> RealArray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1)


def number_operator(dim: int) -> RealArray:
    return np.diag(np.arange(dim, dtype=float))


def fock_coefficients(amplitudes: ArrayLike, dim: int) -> ComplexArray:
    """⟨n|a⟩ = e^{-|a|²/2} aⁿ/√n! for n < dim, broadcast over ``amplitudes``."""

    a = np.asarray(amplitudes, dtype=complex)[..., None]
    n = np.arange(dim)
    log_magnitude = -0.5 * np.abs(a) ** 2 + xlogy(n, np.abs(a)) - 0.5 * gammaln(n + 1.0)
    return np.exp(log_magnitude) * np.exp(1j * n * np.angle(a))


def coherent_vector(a: complex, cutoff: FockCutoff) -> StateVector:
    dim = cutoff.dim_per_mode
    mean = abs(a) ** 2
    tail = poisson_tail(mean, dim)
    if tail > cutoff.tail_tolerance:
        raise CutoffInsufficientError(
            dim, required_dim(mean, 0.0, cutoff.tail_tolerance), tail, cutoff.tail_tolerance
        )
    components = fock_coefficients(a, dim)
    raw = float(np.linalg.norm(components))
    return StateVector((dim,), components / raw, raw_norm=raw)


def tmsv_lambda(nbar: float) -> float:
    if nbar < 0.0:
        raise DomainError(f"thermal photon number must be >= 0, got {nbar}")
    return math.tanh(0.5 * math.acosh(2.0 * nbar + 1.0))


def tmsv_vector(nbar: float, cutoff: FockCutoff) -> StateVector:
    """Two-mode squeezed vacuum Σ √(1−λ²) λⁿ |n,n⟩ (the +λ phase convention)."""

    lam = tmsv_lambda(nbar)
    dim = cutoff.dim_per_mode
    tail = thermal_tail(nbar, dim)
    if tail > cutoff.tail_tolerance:
        raise CutoffInsufficientError(
            dim, required_dim(0.0, nbar, cutoff.tail_tolerance), tail, cutoff.tail_tolerance
        )
    weights = math.sqrt(1.0 - lam**2) * lam ** np.arange(dim)
    matrix = np.diag(weights).astype(complex)
    raw = float(np.linalg.norm(weights))
    return StateVector((dim, dim), matrix.reshape(-1) / raw, raw_norm=raw)


def tensor_product(*states: StateVector) -> StateVector:
    amplitudes = states[0].amplitudes
    dims = states[0].mode_dims
    raw = states[0].raw_norm
    for state in states[1:]:
        amplitudes = np.kron(amplitudes, state.amplitudes)
        dims = dims + state.mode_dims
        raw *= state.raw_norm
    return StateVector(dims, amplitudes, raw)


@lru_cache(maxsize=64)
def _beam_splitter_entries(tau: float, dim: int) -> ComplexArray:
    theta = math.acos(math.sqrt(tau))
    a = annihilation_operator(dim)
    identity = np.eye(dim)
    a_sys = np.kron(a, identity)
    a_env = np.kron(identity, a)
    generator = theta * (a_sys.T @ a_env - a_sys @ a_env.T)
    entries = expm(generator).astype(complex)
    entries.setflags(write=False)
    return entries


def beam_splitter_unitary(tau: float, cutoff: FockCutoff) -> UnitaryMatrix:
    """U = exp[θ(a_A†a_E − a_A a_E†)], θ = arccos √τ; maps |a,0⟩ to |√τ a, −√(1−τ) a⟩."""

    if not 0.0 < tau <= 1.0:
        raise DomainError(f"transmissivity must lie in (0, 1], got {tau}")
    dim = cutoff.dim_per_mode
    return UnitaryMatrix((dim, dim), _beam_splitter_entries(float(tau), dim))


# --------------------------------------------------------------------------- reductions


def partial_trace(state: StateVector | DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    dims = state.mode_dims
    modes = len(dims)
    kept = sorted(set(keep))
    if not kept or len(kept) == modes or kept[0] < 0 or kept[-1] >= modes:
        raise UsageError(f"keep must be a nonempty proper subset of modes 0..{modes - 1}, got {kept}")
    traced = [i for i in range(modes) if i not in kept]
    kept_dim = math.prod(dims[i] for i in kept)
    traced_dim = math.prod(dims[i] for i in traced)

    if isinstance(state, StateVector):
        matrix = np.transpose(state.tensor, kept + traced).reshape(kept_dim, traced_dim)
        reduced = matrix @ matrix.conj().T
    else:
        tensor = state.entries.reshape(dims + dims)
        order = kept + traced + [i + modes for i in kept] + [i + modes for i in traced]
        tensor = np.transpose(tensor, order).reshape(kept_dim, traced_dim, kept_dim, traced_dim)
        reduced = np.einsum("ajbj->ab", tensor)
    return DensityMatrix(tuple(dims[i] for i in kept), reduced)


def mean_photon_number(rho: DensityMatrix) -> float:
    if len(rho.mode_dims) != 1:
        raise UsageError("mean photon number is defined here for single-mode states")
    return float(np.real(np.trace(rho.entries @ number_operator(rho.mode_dims[0]))))


# --------------------------------------------------------------------------- entropies


def entropy_from_spectrum(eigenvalues: ArrayLike) -> NDArray[np.float64] | float:
    """Entropy in bits along the last axis; tiny eigenvalues count as zero."""

    spectrum = np.asarray(eigenvalues, dtype=float)
    lowest = float(np.min(spectrum)) if spectrum.size else 0.0
    if lowest < NEGATIVE_EIGENVALUE_FLOOR:
        raise InvalidStateError(f"eigenvalue {lowest:.3e} is below {NEGATIVE_EIGENVALUE_FLOOR:.0e}")
    clean = np.where(spectrum <= EIGENVALUE_CLAMP, 0.0, spectrum)
    bits = np.maximum(np.sum(entr(clean), axis=-1) / _LN2, 0.0)
    return float(bits) if bits.ndim == 0 else bits


def von_neumann_entropy(rho: DensityMatrix) -> float:
    deviation = rho.hermiticity_error()
    if deviation > HERMITIAN_TOLERANCE:
        raise InvalidStateError(f"matrix is not Hermitian (max deviation {deviation:.3e})")
    return float(entropy_from_spectrum(rho.eigenvalues()))


def gram_entropy(gram: ArrayLike, weights: ArrayLike) -> NDArray[np.float64] | float:
    """Entropy of Σ_i w_i|v_i⟩⟨v_i| from the Gram matrix G_ij = ⟨v_i|v_j⟩ (batched)."""

    g = np.asarray(gram)
    root = np.sqrt(np.asarray(weights, dtype=float))
    weighted = root[..., :, None] * g * root[..., None, :]
    hermitian = 0.5 * (weighted + np.conj(np.swapaxes(weighted, -1, -2)))
    return entropy_from_spectrum(np.linalg.eigvalsh(hermitian))


def mixture_entropy(vectors: Sequence[ComplexArray] | ComplexArray, weights: ArrayLike) -> float:
    """Entropy of a finite mixture of pure states given as rows of ``vectors``."""

    rows = np.asarray(vectors)
    return float(gram_entropy(rows.conj() @ rows.T, weights))
