"""Key-rate assemblies: mutual information, Holevo terms, DR/RR rates and the Gaussian baseline.

Every integral over heterodyne outcomes runs on one node table holding p(b),
p(b)·H(posterior) and, for reverse reconciliation, p(b)·S(ρ_Eve|b), so the
mutual information and Eve's conditional term share their likelihood work.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.special import entr, logsumexp, softmax

from .channel import (
    ChannelParams,
    channel_cutoff,
    conditional_eve_entropies,
    eve_average_entropy,
    eve_conditional_entropy,
    letter_tensors,
    log_likelihoods,
    pure_loss_conditional_entropies,
)
from .config import (
    CONDITIONING_MODES,
    CONVERGENCE_TOLERANCE,
    NORMALIZATION_TOLERANCE,
    Conditioning,
    Direction,
    Settings,
)
from .constellation import INFINITE, AlphabetSize, Constellation, average_state, build_constellation, source_entropy
from .fock import ComplexArray, DomainError, FockCutoff, UsageError, von_neumann_entropy
from .gaussian import gaussian_rr_rate, gaussian_rr_terms
from .quadrature import QuadratureGrid, map_node_chunks

logger = logging.getLogger(__name__)

__all__ = [
    "RatePoint",
    "gaussian_rr_rate",
    "holevo_dr",
    "mutual_information",
    "rate_dr",
    "rate_dr_upper",
    "rate_point",
    "rate_rr",
]

_LN2 = math.log(2.0)

NodeEntropies = Callable[[NDArray[np.complex128]], NDArray[np.float64]]


@dataclass(frozen=True, slots=True)
class RatePoint:
    z: float
    n: AlphabetSize
    tau: float | None
    nbar: float | None
    direction: Direction
    rate: float
    i_ab: float | None = None
    holevo: float | None = None
    mode: Conditioning | None = None
    beta: float = 1.0
    cutoff_dim: int | None = None
    n_radial: int | None = None
    n_angular: int | None = None
    cutoff_delta: float | None = None
    grid_delta: float | None = None
    normalization_error: float | None = None
    converged: bool = True

    @property
    def n_label(self) -> str:
        return "inf" if self.n is INFINITE else str(self.n)


@dataclass(frozen=True, slots=True)
class _Integrals:
    mutual_information: float
    conditional_entropy: float
    normalization_error: float
    clipped: float = 0.0


def _settings(settings: Settings | None) -> Settings:
    return settings if settings is not None else Settings()


def _default_grid(c: Constellation, ch: ChannelParams, settings: Settings) -> QuadratureGrid:
    return QuadratureGrid.for_protocol(
        c.z, ch.tau, ch.nbar, c.size, settings.grid_radial, settings.grid_angular
    )


def _node_table(
    nodes: NDArray[np.complex128],
    c: Constellation,
    ch: ChannelParams,
    conditional: NodeEntropies | None,
) -> NDArray[np.float64]:
    log_like = log_likelihoods(nodes, c, ch)
    density = np.exp(logsumexp(log_like, axis=-1) - math.log(c.size))
    shannon = np.sum(entr(softmax(log_like, axis=-1)), axis=-1) / _LN2
    columns = [density, density * shannon]
    if conditional is not None:
        columns.append(density * conditional(nodes))
    return np.column_stack(columns)


def _integrate(
    c: Constellation,
    ch: ChannelParams,
    grid: QuadratureGrid,
    settings: Settings,
    conditional: NodeEntropies | None = None,
) -> _Integrals:
    table = map_node_chunks(
        lambda batch: _node_table(batch, c, ch, conditional),
        grid.nodes,
        settings.node_chunk,
        settings.node_threads,
    )
    totals = grid.weights @ table
    ceiling = math.log2(c.size)
    raw = 0.0 if c.z == 0.0 or c.size == 1 else ceiling - float(totals[1])
    info = min(max(raw, 0.0), ceiling)
    if info != raw:
        logger.debug("mutual information %.3e clipped to [0, %.3f]", raw, ceiling)
    conditional_entropy = float(totals[2]) if conditional is not None else 0.0
    return _Integrals(info, conditional_entropy, abs(float(totals[0]) - 1.0), abs(info - raw))


def mutual_information(
    c: Constellation,
    ch: ChannelParams,
    grid: QuadratureGrid | None = None,
    *,
    settings: Settings | None = None,
) -> float:
    """I(X_A:X_B) = log₂N − ∫ p(b) H(p(·|b)) d²b for heterodyne detection, in bits."""

    settings = _settings(settings)
    grid = grid or _default_grid(c, ch, settings)
    return _integrate(c, ch, grid, settings).mutual_information


# --------------------------------------------------------------------------- Holevo terms


def _eve_holevo_from_tensors(tensors: ComplexArray) -> float:
    return max(eve_average_entropy(tensors) - eve_conditional_entropy(tensors, 0), 0.0)


def holevo_dr(
    c: Constellation,
    ch: ChannelParams,
    cutoff: FockCutoff | None = None,
    *,
    fock_pipeline: bool = False,
) -> float:
    """χ(Eve:X_A) = S(ρ_Eve) − S(ρ_Eve|k).

    For pure loss Eve holds the pure states |−√(1−τ)a_k⟩, so χ reduces to the
    entropy of their average, taken in the Gram-Schmidt basis.
    """

    if ch.is_pure_loss and not fock_pipeline:
        return von_neumann_entropy(average_state(c, math.sqrt(1.0 - ch.tau)))
    cutoff = cutoff or channel_cutoff(c, ch)
    return _eve_holevo_from_tensors(letter_tensors(c, ch, cutoff))


def rate_dr_upper(z: float, n: AlphabetSize, tau: float) -> float:
    """S(ρ_B) − S(ρ_E′) for pure loss; the alphabet may be INFINITE."""

    if not 0.0 < tau <= 1.0:
        raise DomainError(f"transmissivity must lie in (0, 1], got {tau}")
    scale_bob = math.sqrt(tau)
    scale_eve = math.sqrt(1.0 - tau)
    if n is INFINITE:
        return source_entropy(scale_bob * z, INFINITE) - source_entropy(scale_eve * z, INFINITE)
    c = build_constellation(z, n)
    bob = von_neumann_entropy(average_state(c, scale_bob))
    eve = von_neumann_entropy(average_state(c, scale_eve))
    return bob - eve


# --------------------------------------------------------------------------- realistic rates


def _guard_failed(point: str, cutoff_delta: float | None, grid_delta: float | None, norm: float) -> None:
    logger.warning(
        "%s did not converge: cutoff delta=%s grid delta=%s normalization error=%.2e",
        point,
        "n/a" if cutoff_delta is None else f"{cutoff_delta:.2e}",
        "n/a" if grid_delta is None else f"{grid_delta:.2e}",
        norm,
    )


def _converged(
    cutoff_delta: float | None, grid_delta: float | None, norm: float, clipped: float = 0.0
) -> bool:
    deltas = [d for d in (cutoff_delta, grid_delta, clipped) if d is not None]
    return all(d < CONVERGENCE_TOLERANCE for d in deltas) and norm < NORMALIZATION_TOLERANCE


def rate_dr(
    c: Constellation,
    ch: ChannelParams,
    grid: QuadratureGrid | None = None,
    cutoff: FockCutoff | None = None,
    *,
    beta: float = 1.0,
    fock_pipeline: bool = False,
    settings: Settings | None = None,
) -> RatePoint:
    """Direct-reconciliation rate β·I(X_A:X_B) − χ(Eve:X_A)."""

    settings = _settings(settings)
    grid = grid or _default_grid(c, ch, settings)
    uses_fock = fock_pipeline or not ch.is_pure_loss
    if uses_fock:
        cutoff = cutoff or channel_cutoff(c, ch, settings.tail_tolerance)

    integrals = _integrate(c, ch, grid, settings)
    holevo = holevo_dr(c, ch, cutoff, fock_pipeline=fock_pipeline)
    rate = beta * integrals.mutual_information - holevo

    cutoff_delta = grid_delta = None
    if settings.check_convergence:
        grid_delta = beta * abs(
            _integrate(c, ch, grid.refined(), settings).mutual_information
            - integrals.mutual_information
        )
        if uses_fock:
            wider = holevo_dr(c, ch, cutoff.enlarged(), fock_pipeline=fock_pipeline)
            cutoff_delta = abs(wider - holevo)
    converged = _converged(cutoff_delta, grid_delta, integrals.normalization_error, integrals.clipped)
    if not converged:
        _guard_failed(f"DR z={c.z} tau={ch.tau} nbar={ch.nbar}", cutoff_delta, grid_delta, integrals.normalization_error)

    return RatePoint(
        z=c.z,
        n=c.n,
        tau=ch.tau,
        nbar=ch.nbar,
        direction="dr",
        rate=rate,
        i_ab=integrals.mutual_information,
        holevo=holevo,
        beta=beta,
        cutoff_dim=cutoff.dim_per_mode if uses_fock else None,
        n_radial=grid.n_radial,
        n_angular=grid.n_angular,
        cutoff_delta=cutoff_delta,
        grid_delta=grid_delta,
        normalization_error=integrals.normalization_error,
        converged=converged,
    )


def _rr_terms(
    c: Constellation,
    ch: ChannelParams,
    grid: QuadratureGrid,
    tensors: ComplexArray | None,
    mode: Conditioning,
    settings: Settings,
) -> tuple[_Integrals, float]:
    """Integrals and S(ρ_Eve), from the letter tensors or, without them, the pure-loss formulas."""

    if tensors is None:
        eve_entropy = von_neumann_entropy(average_state(c, math.sqrt(1.0 - ch.tau)))

        def conditional(batch: NDArray[np.complex128]) -> NDArray[np.float64]:
            return pure_loss_conditional_entropies(batch, c, ch)

    else:
        eve_entropy = eve_average_entropy(tensors)

        def conditional(batch: NDArray[np.complex128]) -> NDArray[np.float64]:
            return conditional_eve_entropies(batch, c, ch, tensors, mode)

    return _integrate(c, ch, grid, settings, conditional), eve_entropy


def rate_rr(
    c: Constellation,
    ch: ChannelParams,
    grid: QuadratureGrid | None = None,
    cutoff: FockCutoff | None = None,
    mode: Conditioning = "exact",
    *,
    beta: float = 1.0,
    fock_pipeline: bool = False,
    settings: Settings | None = None,
) -> RatePoint:
    """Reverse-reconciliation rate β·I(X_A:X_B) − S(ρ_Eve) + ∫ p(b) S(ρ_E′e|b) d²b."""

    if mode not in CONDITIONING_MODES:
        raise UsageError(f"unknown conditioning mode {mode!r}")
    settings = _settings(settings)
    grid = grid or _default_grid(c, ch, settings)
    uses_fock = fock_pipeline or not ch.is_pure_loss
    tensors = None
    if uses_fock:
        cutoff = cutoff or channel_cutoff(c, ch, settings.tail_tolerance)
        tensors = letter_tensors(c, ch, cutoff)

    integrals, eve_entropy = _rr_terms(c, ch, grid, tensors, mode, settings)
    holevo = eve_entropy - integrals.conditional_entropy
    rate = beta * integrals.mutual_information - holevo

    cutoff_delta = grid_delta = None
    if settings.check_convergence:
        fine, _ = _rr_terms(c, ch, grid.refined(), tensors, mode, settings)
        grid_delta = abs(
            beta * fine.mutual_information - beta * integrals.mutual_information
            + fine.conditional_entropy - integrals.conditional_entropy
        )
        if uses_fock:
            wide_tensors = letter_tensors(c, ch, cutoff.enlarged())
            wide, wide_entropy = _rr_terms(c, ch, grid, wide_tensors, mode, settings)
            cutoff_delta = abs((wide_entropy - wide.conditional_entropy) - holevo)
    converged = _converged(cutoff_delta, grid_delta, integrals.normalization_error, integrals.clipped)
    if not converged:
        _guard_failed(f"RR z={c.z} tau={ch.tau} nbar={ch.nbar}", cutoff_delta, grid_delta, integrals.normalization_error)

    return RatePoint(
        z=c.z,
        n=c.n,
        tau=ch.tau,
        nbar=ch.nbar,
        direction="rr",
        rate=rate,
        i_ab=integrals.mutual_information,
        holevo=holevo,
        mode=mode,
        beta=beta,
        cutoff_dim=cutoff.dim_per_mode if uses_fock else None,
        n_radial=grid.n_radial,
        n_angular=grid.n_angular,
        cutoff_delta=cutoff_delta,
        grid_delta=grid_delta,
        normalization_error=integrals.normalization_error,
        converged=converged,
    )


# --------------------------------------------------------------------------- dispatch


def rate_point(
    direction: Direction,
    z: float,
    n: AlphabetSize,
    ch: ChannelParams | None = None,
    *,
    mode: Conditioning = "exact",
    beta: float = 1.0,
    vm: float | None = None,
    cutoff_dim: int | None = None,
    grid_radial: int | None = None,
    grid_angular: int | None = None,
    settings: Settings | None = None,
) -> RatePoint:
    """Evaluate one protocol point for ``direction``; the unit of work of a sweep."""

    settings = _settings(settings)
    if direction == "entropy":
        return RatePoint(z=z, n=n, tau=None, nbar=None, direction="entropy", rate=source_entropy(z, n))
    if ch is None:
        raise UsageError(f"direction {direction!r} needs channel parameters")
    if direction == "dr-upper":
        if not ch.is_pure_loss:
            raise DomainError("the DR upper bound is defined for pure loss only")
        return RatePoint(z=z, n=n, tau=ch.tau, nbar=0.0, direction="dr-upper", rate=rate_dr_upper(z, n, ch.tau))
    if direction == "gaussian":
        modulation = 2.0 * z**2 if vm is None else vm
        i_ab, holevo = gaussian_rr_terms(modulation, ch)
        return RatePoint(
            z=z,
            n=n,
            tau=ch.tau,
            nbar=ch.nbar,
            direction="gaussian",
            rate=beta * i_ab - holevo,
            i_ab=i_ab,
            holevo=holevo,
            beta=beta,
        )

    c = build_constellation(z, n)
    grid = None
    if grid_radial is not None or grid_angular is not None:
        grid = QuadratureGrid.for_protocol(
            c.z,
            ch.tau,
            ch.nbar,
            c.size,
            grid_radial or settings.grid_radial,
            grid_angular or settings.grid_angular,
        )
    cutoff = FockCutoff(cutoff_dim, settings.tail_tolerance) if cutoff_dim is not None else None
    if direction == "dr":
        return rate_dr(c, ch, grid, cutoff, beta=beta, settings=settings)
    if direction == "rr":
        return rate_rr(c, ch, grid, cutoff, mode, beta=beta, settings=settings)
    raise UsageError(f"unknown direction {direction!r}")
