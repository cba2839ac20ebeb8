"""Time evolution: exact pure-state propagation under the modulated
coupling, and the intrinsic-decoherence channel for constant coupling.

The modulation enters only through the accumulated profile
Theta(t) = int_0^t zeta, because the shared scalar zeta(t) multiplies the
whole generator (which therefore commutes with itself at all times).  Pure
states evolve block by block as

    A(t) = V exp(-i Z Theta(t)) V^dag A(0)

with (Z, V) the cached spectrum of each block coupling matrix.

The intrinsic-decoherence master equation

    d rho / dt = -i [H, rho] - (gamma / 2) [H, [H, rho]]

is solved in closed form in the eigenbasis of H, where every off-diagonal
element picks up the phase exp(-i (E_m - E_n) t) and the Gaussian decay
exp(-gamma t (E_m - E_n)^2 / 2).  A truncated Kraus-operator sum implements
the same channel as an independent cross-check.  Both are defined for
time-independent coupling only; time-dependent profiles are refused rather
than approximated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DensityMatrix, PureState, Spectrum, hermitian_spectrum
from .ionmodel import (
    CutoffError,
    block_basis,
    build_full_hamiltonian,
    full_index,
    full_layout,
    get_block_system,
)
from .params import Constant, Modulation, Sech, SimParams

KRAUS_DEFICIT_TARGET = 1e-10
KRAUS_MAX_TERMS = 512


class UnsupportedRegimeError(ValueError):
    """Requested evolution is outside the regime where the method is exact."""


def modulation_integral(modulation: Modulation, t):
    """Accumulated coupling profile Theta(t) = int_0^t zeta(s) ds.

    Constant gives t; Sech{tau} gives the closed-form antiderivative
    4 tau arctan(tanh(t / (4 tau))), which tends to pi tau as t -> inf.
    Accepts scalars or arrays, t >= 0.
    """
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("modulation_integral requires t >= 0")
    if isinstance(modulation, Constant):
        out = t.copy()
    elif isinstance(modulation, Sech):
        out = 4.0 * modulation.tau * np.arctan(np.tanh(t / (4.0 * modulation.tau)))
    else:
        raise TypeError(f"unknown modulation {modulation!r}")
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EvolutionResult:
    """Time grid plus the state at each grid point and a method tag."""

    times: np.ndarray
    states: tuple
    method: str

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64, copy=True)
        times.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", tuple(self.states))
        if times.ndim != 1 or times.size == 0:
            raise ValueError("times must be a nonempty 1-d grid")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing and start at 0")
        if len(self.states) != times.size:
            raise ValueError("one state per grid point required")


def _check_times(times) -> np.ndarray:
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a nonempty 1-d grid")
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing and start at 0")
    return times


def _theta_grid(params: SimParams, times: np.ndarray, t_offset: float) -> np.ndarray:
    if t_offset < 0:
        raise ValueError("t_offset must be >= 0")
    base = modulation_integral(params.modulation, t_offset)
    return modulation_integral(params.modulation, t_offset + times) - base


def _check_block_support(psi0: PureState, params: SimParams) -> None:
    """Reject states with weight on the blocks truncated by the cutoff
    ceiling; those cannot be evolved faithfully under hard truncation."""
    if psi0.layout != full_layout(params.fock_cutoff):
        raise ValueError("initial state layout does not match params.fock_cutoff")
    leak = 0.0
    for n in range(params.fock_cutoff - 1, params.fock_cutoff + 1):
        basis = block_basis(n, params.fock_cutoff)
        idx = [full_index(f, l1, l2, params.fock_cutoff) for f, l1, l2 in basis.states]
        leak += float(np.sum(np.abs(psi0.amplitudes[idx]) ** 2))
    if leak > 1e-12:
        raise CutoffError(
            f"initial state has weight {leak:.3e} on blocks truncated by the cutoff; "
            f"raise fock_cutoff"
        )


def evolve_pure(psi0: PureState, params: SimParams, times, t_offset: float = 0.0) -> EvolutionResult:
    """Exact pure-state evolution via per-block eigendecomposition.

    The initial state must be expressed on the full layout of
    ``params.fock_cutoff`` and must not populate the blocks truncated by the
    cutoff ceiling (those cannot be evolved faithfully).  ``t_offset``
    restarts the modulation clock at a later point of the profile, so that
    evolving in two legs agrees with one direct leg.
    """
    times = _check_times(times)
    _check_block_support(psi0, params)
    layout = psi0.layout
    system = get_block_system(params)
    amps = psi0.amplitudes

    theta = _theta_grid(params, times, t_offset)
    out = np.zeros((times.size, layout.total_dim), dtype=np.complex128)
    for n in system.evolvable_indices:
        idx = system.full_indices(n)
        a0 = amps[idx]
        if not np.any(a0):
            continue
        block = system.block(n)
        z = block.spectrum.eigenvalues
        v = block.spectrum.eigenvectors
        coeffs = v.conj().T @ a0
        phases = np.exp(-1j * np.outer(theta, z))
        out[:, idx] = (phases * coeffs) @ v.T
    states = tuple(PureState(layout, out[i]) for i in range(times.size))
    return EvolutionResult(times, states, "block-eigen")


def evolve_pure_dense(psi0: PureState, params: SimParams, times, t_offset: float = 0.0) -> EvolutionResult:
    """Independent dense oracle: exp(-i H Theta(t)) on the full space via a
    single eigendecomposition of the assembled Hamiltonian.  Same contract
    as evolve_pure."""
    times = _check_times(times)
    _check_block_support(psi0, params)
    layout = psi0.layout
    spectrum = hermitian_spectrum(build_full_hamiltonian(params))
    theta = _theta_grid(params, times, t_offset)
    coeffs = spectrum.eigenvectors.conj().T @ psi0.amplitudes
    phases = np.exp(-1j * np.outer(theta, spectrum.eigenvalues))
    out = (phases * coeffs) @ spectrum.eigenvectors.T
    states = tuple(PureState(layout, out[i]) for i in range(times.size))
    return EvolutionResult(times, states, "dense-oracle")


def _closed_form_matrix(spectrum: Spectrum, rho0: np.ndarray, gamma: float, t: float) -> np.ndarray:
    v = spectrum.eigenvectors
    gaps = spectrum.eigenvalues[:, None] - spectrum.eigenvalues[None, :]
    rho_eig = v.conj().T @ rho0 @ v
    rho_eig = rho_eig * np.exp(-1j * gaps * t - 0.5 * gamma * t * gaps**2)
    out = v @ rho_eig @ v.conj().T
    return 0.5 * (out + out.conj().T)


def milburn_closed_form(
    rho0: DensityMatrix,
    hamiltonian: np.ndarray,
    gamma: float,
    t: float,
    modulation: Modulation = Constant(),
) -> DensityMatrix:
    """Closed-form solution of the intrinsic-decoherence master equation.

    Valid for time-independent coupling only; a Sech modulation is refused.
    """
    if not isinstance(modulation, Constant):
        raise UnsupportedRegimeError(
            "the intrinsic-decoherence closed form requires a time-independent "
            "coupling profile; got a time-dependent modulation"
        )
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    spectrum = hermitian_spectrum(np.asarray(hamiltonian))
    return DensityMatrix(rho0.layout, _closed_form_matrix(spectrum, rho0.matrix, gamma, t))


def _kraus_diagonal(eigenvalues: np.ndarray, gamma: float, t: float, k: int) -> np.ndarray:
    """Eigenbasis diagonal of the k-th Kraus operator
    (gamma t)^(k/2) / sqrt(k!) * E^k * exp(-i E t) * exp(-gamma t E^2 / 2)."""
    survival = np.exp(-1j * eigenvalues * t - 0.5 * gamma * t * eigenvalues**2)
    if k == 0:
        return survival
    x = gamma * t * eigenvalues**2
    with np.errstate(divide="ignore"):
        magnitude = np.exp(0.5 * (k * np.log(x) - math.lgamma(k + 1)))
    sign = np.where(eigenvalues < 0, (-1.0) ** k, 1.0)
    return sign * magnitude * survival


def _adaptive_kraus_terms(eigenvalues: np.ndarray, gamma: float, t: float) -> int:
    """Smallest K (capped) whose Poisson-weighted tail leaves a completeness
    deficit at most KRAUS_DEFICIT_TARGET."""
    rates = gamma * t * eigenvalues**2
    term = np.exp(-rates)
    covered = term.copy()
    for k in range(1, KRAUS_MAX_TERMS):
        if 1.0 - covered.min() <= KRAUS_DEFICIT_TARGET:
            return k
        term = term * rates / k
        covered += term
    return KRAUS_MAX_TERMS


def kraus_completeness_deficit(hamiltonian: np.ndarray, gamma: float, t: float, terms: int) -> float:
    """max-norm deviation of sum_k M_k M_k^dag from the identity for the
    first ``terms`` Kraus operators; non-increasing in ``terms``."""
    spectrum = hermitian_spectrum(np.asarray(hamiltonian))
    completeness = np.zeros_like(spectrum.eigenvectors)
    for k in range(terms):
        m_k = (spectrum.eigenvectors * _kraus_diagonal(spectrum.eigenvalues, gamma, t, k)) @ (
            spectrum.eigenvectors.conj().T
        )
        completeness = completeness + m_k @ m_k.conj().T
    dim = completeness.shape[0]
    return float(np.abs(completeness - np.eye(dim)).max())


def _kraus_apply(
    spectrum: Spectrum, rho0: np.ndarray, gamma: float, t: float, terms: int
) -> tuple[np.ndarray, float]:
    v = spectrum.eigenvectors
    evolved = np.zeros_like(rho0)
    completeness = np.zeros_like(rho0)
    for k in range(terms):
        m_k = (v * _kraus_diagonal(spectrum.eigenvalues, gamma, t, k)) @ v.conj().T
        evolved = evolved + m_k @ rho0 @ m_k.conj().T
        completeness = completeness + m_k @ m_k.conj().T
    deficit = float(np.abs(completeness - np.eye(completeness.shape[0])).max())
    return 0.5 * (evolved + evolved.conj().T), deficit


def milburn_kraus(
    rho0: DensityMatrix,
    hamiltonian: np.ndarray,
    gamma: float,
    t: float,
    terms: int | None = None,
) -> tuple[DensityMatrix, float]:
    """Truncated Kraus-operator sum for the intrinsic-decoherence channel.

    Builds each dense Kraus operator and accumulates sum_k M_k rho M_k^dag
    literally, as an independent cross-check of the closed form.  Returns
    the evolved state together with the completeness deficit
    delta(K) = max |sum_k M_k M_k^dag - I|, so callers can certify the
    truncation.  With ``terms=None`` the count is chosen adaptively so that
    delta <= 1e-10, capped at 512.
    """
    if terms is not None and terms < 1:
        raise ValueError(f"terms must be >= 1, got {terms}")
    spectrum = hermitian_spectrum(np.asarray(hamiltonian))
    if terms is None:
        terms = _adaptive_kraus_terms(spectrum.eigenvalues, gamma, t)
    evolved, deficit = _kraus_apply(spectrum, rho0.matrix, gamma, t, terms)
    return DensityMatrix(rho0.layout, evolved), deficit


def evolve_milburn(
    rho0: DensityMatrix, params: SimParams, times, method: str = "closed"
) -> EvolutionResult:
    """Intrinsic-decoherence evolution of a full-layout state over a grid,
    using the zeta = 1 interaction Hamiltonian.

    ``method`` selects the production closed form or the adaptively
    truncated Kraus sum (the slower cross-check path).  Both are refused
    for time-dependent modulation.
    """
    if not isinstance(params.modulation, Constant):
        raise UnsupportedRegimeError(
            "intrinsic-decoherence evolution requires a time-independent "
            "coupling profile; got a time-dependent modulation"
        )
    times = _check_times(times)
    if rho0.layout != full_layout(params.fock_cutoff):
        raise ValueError("initial state layout does not match params.fock_cutoff")
    spectrum = hermitian_spectrum(build_full_hamiltonian(params))
    if method == "closed":
        states = tuple(
            DensityMatrix(rho0.layout, _closed_form_matrix(spectrum, rho0.matrix, params.gamma, t))
            for t in times
        )
        return EvolutionResult(times, states, "milburn-closed")
    if method == "kraus":
        states = []
        most_terms = 1
        for t in times:
            terms = _adaptive_kraus_terms(spectrum.eigenvalues, params.gamma, float(t))
            most_terms = max(most_terms, terms)
            evolved, _ = _kraus_apply(spectrum, rho0.matrix, params.gamma, float(t), terms)
            states.append(DensityMatrix(rho0.layout, evolved))
        return EvolutionResult(times, tuple(states), f"milburn-kraus[K={most_terms}]")
    raise ValueError(f"unknown method {method!r}; choose 'closed' or 'kraus'")
