"""Phase-encoded alphabets C(z, N), their overlap matrices and average states."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from .config import GRAM_SCHMIDT_FLOOR, NEGATIVE_EIGENVALUE_FLOOR
from .fock import (
    ComplexArray,
    CutoffInsufficientError,
    DensityMatrix,
    DomainError,
    FockCutoff,
    FockError,
    UsageError,
    coherent_vector,
    default_cutoff,
    poisson_tail,
    required_dim,
    von_neumann_entropy,
)

logger = logging.getLogger(__name__)


class Alphabet(enum.Enum):
    INFINITE = "inf"


INFINITE = Alphabet.INFINITE
AlphabetSize = int | Alphabet


class InconsistentGramError(FockError):
    """The overlap matrix is not a valid Gram matrix of unit vectors."""


class SingularGramError(FockError):
    """Gram-Schmidt would divide by a vanishing diagonal coefficient."""


@dataclass(frozen=True, slots=True)
class Constellation:
    z: float
    n: AlphabetSize

    def __post_init__(self) -> None:
        if self.z < 0.0:
            raise DomainError(f"radius must be >= 0, got {self.z}")
        if self.n is not INFINITE and (isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1):
            raise DomainError(f"alphabet size must be a positive integer or INFINITE, got {self.n!r}")

    @property
    def is_finite(self) -> bool:
        return self.n is not INFINITE

    @property
    def size(self) -> int:
        if self.n is INFINITE:
            raise UsageError("the infinite alphabet has no finite size")
        return int(self.n)

    @property
    def amplitudes(self) -> ComplexArray:
        k = np.arange(self.size)
        return self.z * np.exp(2j * np.pi * k / self.size)

    @property
    def priors(self) -> np.ndarray:
        return np.full(self.size, 1.0 / self.size)

    def label(self) -> str:
        return "inf" if self.n is INFINITE else str(self.n)


@dataclass(frozen=True, slots=True)
class GramMatrix:
    order: int
    entries: ComplexArray
    scale: float = 1.0


@dataclass(frozen=True, slots=True)
class GramSchmidtBasis:
    order: int
    coefficients: ComplexArray


def build_constellation(z: float, n: AlphabetSize) -> Constellation:
    return Constellation(float(z), n)


def overlap_matrix(c: Constellation, scale: float = 1.0) -> GramMatrix:
    """V_ij = ⟨s·a_i|s·a_j⟩ = exp[s²z²(e^{i2π(j−i)/N} − 1)]."""

    if not c.is_finite:
        raise UsageError("overlap matrices need a finite alphabet; use continuous_limit_state")
    order = c.size
    offsets = np.arange(order)
    energy = (scale * c.z) ** 2
    first_row = np.exp(energy * (np.exp(2j * np.pi * offsets / order) - 1.0))
    index = (offsets[None, :] - offsets[:, None]) % order
    return GramMatrix(order, first_row[index], scale)


def gram_schmidt_coefficients(v: GramMatrix) -> GramSchmidtBasis:
    """Lower-triangular M with |a_k⟩ = Σ_i M_ki|i⟩, built row by row from the overlaps."""

    order = v.order
    overlaps = v.entries
    m = np.zeros((order, order), dtype=complex)
    for k in range(order):
        m[k, 0] = overlaps[0, k]
        for i in range(1, k):
            projection = np.dot(m[i, :i].conj(), m[k, :i])
            m[k, i] = (overlaps[i, k] - projection) / m[i, i].real
        if k == 0:
            continue
        residual = 1.0 - float(np.sum(np.abs(m[k, :k]) ** 2))
        if residual < NEGATIVE_EIGENVALUE_FLOOR:
            raise InconsistentGramError(f"row {k} has negative residual norm {residual:.3e}")
        if residual < GRAM_SCHMIDT_FLOOR:
            raise SingularGramError(f"row {k} residual {residual:.3e} is below {GRAM_SCHMIDT_FLOOR:.0e}")
        m[k, k] = math.sqrt(residual)
    return GramSchmidtBasis(order, m)


def fock_average_state(
    c: Constellation,
    scale: float = 1.0,
    cutoff: FockCutoff | None = None,
) -> DensityMatrix:
    """(1/N) Σ_k |s·a_k⟩⟨s·a_k| in the truncated Fock basis."""

    cutoff = cutoff or default_cutoff((scale * c.z) ** 2)
    rows = np.stack([coherent_vector(scale * a, cutoff).amplitudes for a in c.amplitudes])
    rho = rows.T @ rows.conj() / c.size
    return DensityMatrix((cutoff.dim_per_mode,), rho, basis="fock")


def average_state(
    c: Constellation,
    scale: float = 1.0,
    cutoff: FockCutoff | None = None,
) -> DensityMatrix:
    """Average state in the Gram-Schmidt basis, or in the Fock basis when the Gram matrix is singular."""

    if not c.is_finite:
        raise UsageError("the infinite alphabet is handled by continuous_limit_state")
    try:
        basis = gram_schmidt_coefficients(overlap_matrix(c, scale))
    except (SingularGramError, InconsistentGramError) as exc:
        # Near-singular overlaps lose precision in the recursion before the residual hits the floor.
        logger.debug("falling back to the Fock basis for z=%g scale=%g: %s", c.z, scale, exc)
        return fock_average_state(c, scale, cutoff)
    m = basis.coefficients
    rho = m.T @ m.conj() / c.size
    return DensityMatrix((c.size,), rho, basis="gram-schmidt")


def continuous_limit_state(z: float, cutoff: FockCutoff | None = None) -> DensityMatrix:
    """Uniform-phase limit: diagonal Poisson(z²) state e^{−z²} Σ z^{2n}/n! |n⟩⟨n|."""

    if z < 0.0:
        raise DomainError(f"radius must be >= 0, got {z}")
    mean = z**2
    cutoff = cutoff or default_cutoff(mean)
    dim = cutoff.dim_per_mode
    tail = poisson_tail(mean, dim)
    if tail > cutoff.tail_tolerance:
        raise CutoffInsufficientError(
            dim, required_dim(mean, 0.0, cutoff.tail_tolerance), tail, cutoff.tail_tolerance
        )
    if mean == 0.0:
        weights = np.zeros(dim)
        weights[0] = 1.0
    else:
        weights = poisson.pmf(np.arange(dim), mean)
        weights /= weights.sum()
    return DensityMatrix((dim,), np.diag(weights).astype(complex), basis="fock")


def source_entropy(z: float, n: AlphabetSize, cutoff: FockCutoff | None = None) -> float:
    """S(ρ_A) in bits for the alphabet C(z, N), N possibly INFINITE."""

    if n is INFINITE:
        return von_neumann_entropy(continuous_limit_state(z, cutoff))
    return von_neumann_entropy(average_state(build_constellation(z, n), cutoff=cutoff))
