"""Entangling-cloner propagation, heterodyne statistics and Eve's conditional states."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp, softmax

from .config import DEFAULT_TAIL_TOLERANCE, UNCONDITIONED_MODES, Conditioning, EpsilonConvention
from .constellation import Constellation, overlap_matrix
from .fock import (
    ComplexArray,
    CutoffInsufficientError,
    DensityMatrix,
    DomainError,
    FockCutoff,
    StateVector,
    UsageError,
    beam_splitter_unitary,
    coherent_vector,
    default_cutoff,
    entropy_from_spectrum,
    fock_coefficients,
    gram_entropy,
    joint_tail,
    partial_trace,
    required_dim,
    tensor_product,
    tmsv_lambda,
    tmsv_vector,
)

logger = logging.getLogger(__name__)


def db_to_tau(attenuation_db: float) -> float:
    return 10.0 ** (-attenuation_db / 10.0)


def tau_to_db(tau: float) -> float:
    return -10.0 * math.log10(tau)


def nbar_from_excess_noise(tau: float, epsilon: float, convention: EpsilonConvention = "input") -> float:
    """Thermal photons of the entangling cloner producing excess noise ε (shot-noise units).

    Input-referred: ε adds to the channel input, n̄ = τε / (2(1−τ)).
    Output-referred: ε is measured at Bob, n̄ = ε / (2(1−τ)).
    """

    if epsilon < 0.0:
        raise DomainError(f"excess noise must be >= 0, got {epsilon}")
    if convention not in ("input", "output"):
        raise DomainError(f"unknown excess-noise convention {convention!r}")
    if epsilon == 0.0:
        return 0.0
    if tau >= 1.0:
        raise DomainError("a lossless channel cannot carry excess noise in the entangling-cloner model")
    scale = tau if convention == "input" else 1.0
    return scale * epsilon / (2.0 * (1.0 - tau))


@dataclass(frozen=True, slots=True)
class ChannelParams:
    tau: float
    nbar: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.tau <= 1.0:
            raise DomainError(f"transmissivity must lie in (0, 1], got {self.tau}")
        if self.nbar < 0.0:
            raise DomainError(f"thermal photon number must be >= 0, got {self.nbar}")

    @classmethod
    def from_attenuation(cls, attenuation_db: float, nbar: float = 0.0) -> ChannelParams:
        return cls(db_to_tau(attenuation_db), nbar)

    @classmethod
    def from_excess_noise(
        cls,
        tau: float,
        epsilon: float,
        convention: EpsilonConvention = "input",
    ) -> ChannelParams:
        return cls(tau, nbar_from_excess_noise(tau, epsilon, convention))

    @property
    def omega(self) -> float:
        return 2.0 * self.nbar + 1.0

    @property
    def lam(self) -> float:
        return tmsv_lambda(self.nbar)

    @property
    def theta(self) -> float:
        return math.acos(math.sqrt(self.tau))

    @property
    def is_pure_loss(self) -> bool:
        return self.nbar == 0.0

    @property
    def output_noise(self) -> float:
        """Heterodyne variance 1 + (1−τ)n̄ of Bob's outcome around √τ·a_k."""

        return 1.0 + (1.0 - self.tau) * self.nbar

    @property
    def attenuation_db(self) -> float:
        return tau_to_db(self.tau)


@dataclass(frozen=True, slots=True)
class TripartiteOutput:
    letter: int
    state: StateVector


def channel_cutoff(
    c: Constellation,
    ch: ChannelParams,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
) -> FockCutoff:
    return default_cutoff(c.z**2, ch.nbar, tail_tolerance)


def propagate(
    c: Constellation,
    k: int,
    ch: ChannelParams,
    cutoff: FockCutoff | None = None,
) -> TripartiteOutput:
    """|Ψ_k⟩ = (U(θ) ⊗ I_e)(|a_k⟩_A ⊗ |TMSV⟩_Ee), modes ordered (B, E′, e)."""

    if not 0 <= k < c.size:
        raise UsageError(f"letter index {k} outside 0..{c.size - 1}")
    cutoff = cutoff or channel_cutoff(c, ch)
    dim = cutoff.dim_per_mode
    tail = joint_tail(c.z**2, ch.nbar, dim)
    if tail > cutoff.tail_tolerance:
        raise CutoffInsufficientError(
            dim, required_dim(c.z**2, ch.nbar, cutoff.tail_tolerance), tail, cutoff.tail_tolerance
        )
    signal = coherent_vector(complex(c.amplitudes[k]), cutoff)
    environment = tmsv_vector(ch.nbar, cutoff)
    joint = tensor_product(signal, environment)
    return TripartiteOutput(k, beam_splitter_unitary(ch.tau, cutoff).apply(joint))


def letter_tensors(
    c: Constellation,
    ch: ChannelParams,
    cutoff: FockCutoff | None = None,
) -> ComplexArray:
    """All |Ψ_k⟩ as an array of shape (N, dim_B, dim_E′·dim_e)."""

    cutoff = cutoff or channel_cutoff(c, ch)
    dim = cutoff.dim_per_mode
    outputs = [propagate(c, k, ch, cutoff).state.amplitudes for k in range(c.size)]
    return np.stack(outputs).reshape(c.size, dim, dim * dim)


def eve_conditional_state(out: TripartiteOutput) -> DensityMatrix:
    return partial_trace(out.state, keep=(1, 2))


def eve_average_state(
    c: Constellation,
    ch: ChannelParams,
    cutoff: FockCutoff | None = None,
) -> DensityMatrix:
    cutoff = cutoff or channel_cutoff(c, ch)
    states = [eve_conditional_state(propagate(c, k, ch, cutoff)) for k in range(c.size)]
    entries = sum(s.entries for s in states) / c.size
    return DensityMatrix(states[0].mode_dims, entries)


def eve_average_entropy(tensors: ComplexArray) -> float:
    """S(ρ_Eve) from the letter tensors, via the Gram matrix of the Schmidt rows."""

    letters, dim_b, _ = tensors.shape
    rows = tensors.reshape(letters * dim_b, -1)
    gram = rows.conj() @ rows.T
    return float(gram_entropy(gram, np.full(letters * dim_b, 1.0 / letters)))


def eve_conditional_entropy(tensors: ComplexArray, k: int = 0) -> float:
    """S(ρ_Eve|k), evaluated on the complementary mode B (same spectrum for a pure |Ψ_k⟩)."""

    block = tensors[k]
    rho_b = block @ block.conj().T
    return float(entropy_from_spectrum(np.linalg.eigvalsh(0.5 * (rho_b + rho_b.conj().T))))


# --------------------------------------------------------------------------- heterodyne


def heterodyne_likelihood(b: ArrayLike, a_k: ArrayLike, ch: ChannelParams) -> NDArray[np.float64]:
    """p(b|a_k) = exp[−|b − √τ a_k|² / v] / (π v), v = 1 + (1−τ)n̄."""

    v = ch.output_noise
    shift = np.asarray(b) - math.sqrt(ch.tau) * np.asarray(a_k)
    return np.exp(-np.abs(shift) ** 2 / v) / (math.pi * v)


def log_likelihoods(b: ArrayLike, c: Constellation, ch: ChannelParams) -> NDArray[np.float64]:
    """log p(b|a_k) with the letter index on the last axis."""

    v = ch.output_noise
    shift = np.asarray(b, dtype=complex)[..., None] - math.sqrt(ch.tau) * c.amplitudes
    return -np.abs(shift) ** 2 / v - math.log(math.pi * v)


def outcome_density(b: ArrayLike, c: Constellation, ch: ChannelParams) -> NDArray[np.float64]:
    """p(b) = (1/N) Σ_k p(b|a_k)."""

    return np.exp(logsumexp(log_likelihoods(b, c, ch), axis=-1) - math.log(c.size))


def posterior(b: ArrayLike, c: Constellation, ch: ChannelParams) -> NDArray[np.float64]:
    """p(a_k|b) by Bayes' rule with uniform priors; letters on the last axis."""

    return softmax(log_likelihoods(b, c, ch), axis=-1)


def heterodyne_likelihood_fock(b: complex, rho: DensityMatrix) -> float:
    """Tr[Π(b) ρ] with Π(b) = |b⟩⟨b|/π, evaluated in the truncated Fock basis."""

    if len(rho.mode_dims) != 1:
        raise UsageError("heterodyne likelihoods are taken on a single mode")
    ket = fock_coefficients(b, rho.mode_dims[0])
    return float(np.real(ket.conj() @ rho.entries @ ket)) / math.pi


def projected_eve_vectors(tensors: ComplexArray, b: ArrayLike) -> ComplexArray:
    """Normalized (⟨b|_B ⊗ I)|Ψ_k⟩ per node and letter, shape (nodes, N, dim_E′·dim_e)."""

    outcomes = np.atleast_1d(np.asarray(b, dtype=complex))
    bras = fock_coefficients(outcomes, tensors.shape[1]).conj()
    vectors = np.einsum("jn,knm->jkm", bras, tensors)
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    return vectors / np.where(norms > 0.0, norms, 1.0)


def eve_state_given_outcome(
    b: complex,
    c: Constellation,
    ch: ChannelParams,
    cutoff: FockCutoff | None = None,
    mode: Conditioning = "exact",
) -> DensityMatrix:
    """ρ_E′e|b = Σ_k p(a_k|b) ρ_k, with ρ_k Eve's state given (k, b) or, in
    ``unconditioned`` mode, given k alone."""

    cutoff = cutoff or channel_cutoff(c, ch)
    dim = cutoff.dim_per_mode
    weights = posterior(b, c, ch)
    if mode == "exact":
        vectors = projected_eve_vectors(letter_tensors(c, ch, cutoff), b)[0]
        entries = (vectors.T * weights) @ vectors.conj()
    elif mode in UNCONDITIONED_MODES:
        entries = sum(
            w * eve_conditional_state(propagate(c, k, ch, cutoff)).entries
            for k, w in enumerate(weights)
        )
    else:
        raise UsageError(f"unknown conditioning mode {mode!r}")
    return DensityMatrix((dim, dim), entries)


def conditional_eve_entropies(
    b: ArrayLike,
    c: Constellation,
    ch: ChannelParams,
    tensors: ComplexArray,
    mode: Conditioning = "exact",
) -> NDArray[np.float64]:
    """S(ρ_E′e|b) for a batch of outcomes, using Gram matrices of rank ≤ N (exact) or ≤ N·dim."""

    outcomes = np.atleast_1d(np.asarray(b, dtype=complex))
    weights = posterior(outcomes, c, ch)
    if mode == "exact":
        vectors = projected_eve_vectors(tensors, outcomes)
        gram = np.einsum("jkm,jlm->jkl", vectors.conj(), vectors)
        return np.atleast_1d(gram_entropy(gram, weights))
    if mode in UNCONDITIONED_MODES:
        letters, dim_b, _ = tensors.shape
        rows = tensors.reshape(letters * dim_b, -1)
        gram = rows.conj() @ rows.T
        return np.atleast_1d(gram_entropy(gram, np.repeat(weights, dim_b, axis=-1)))
    raise UsageError(f"unknown conditioning mode {mode!r}")


def pure_loss_conditional_entropies(
    b: ArrayLike,
    c: Constellation,
    ch: ChannelParams,
) -> NDArray[np.float64]:
    """S(ρ_E′|b) for ρ_E′|b = Σ_k p(a_k|b)|√(1−τ)a_k⟩⟨√(1−τ)a_k| from the analytic overlaps."""

    outcomes = np.atleast_1d(np.asarray(b, dtype=complex))
    gram = overlap_matrix(c, math.sqrt(1.0 - ch.tau)).entries
    return np.atleast_1d(gram_entropy(gram, posterior(outcomes, c, ch)))
