"""Simulation parameters and coupling-modulation profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Constant:
    """Time-independent coupling profile, zeta(t) = 1."""


@dataclass(frozen=True)
class Sech:
    """Smooth switch-on/off profile zeta(t) = sech(t / (2 tau)).

    The profile peaks at t = 0; runs start at the peak.
    """

    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"sech modulation requires tau > 0, got {self.tau}")


Modulation = Constant | Sech


@dataclass(frozen=True)
class SimParams:
    """All physical and numerical knobs of the two-ion simulation.

    Times are measured in units of 1/|lambda1| (scaled time); the
    conventional choice is |lambda1| = 1.

    Parameters
    ----------
    lambda1, lambda2 : complex
        Laser coupling strengths of the two sideband transitions
        (lower level to first / second upper level).
    eta : float >= 0
        Lamb-Dicke parameter.
    epsilon : float
        Laser amplitude scale entering the vibrational mode function.
    gamma : float >= 0
        Intrinsic-decoherence rate of the double-commutator channel.
    nbar : float >= 0
        Mean phonon number of the initial coherent field.
    theta : float in [0, 2 pi]
        Superposition angle of the two-ion initial state.
    phi : float in [0, pi]
        Relative phase of the two-ion initial state.
    modulation : Constant or Sech
        Shared scalar time profile zeta(t) multiplying all couplings.
    fock_cutoff : int >= 1
        Hard truncation N_max of the vibrational Fock space
        (dimension N_max + 1).
    nu, omega1, omega2 : float
        Trap and electronic frequencies.  Recorded for documentation
        only; the interaction-picture dynamics never uses them
        (exact resonance is assumed).
    standard_matrix_element : bool
        If True, the vibrational mode function uses the textbook
        sideband matrix element (sqrt of the factorial ratio and an
        eta**k magnitude factor) instead of the default diagonal form.
    """

    fock_cutoff: int
    lambda1: complex = 1.0 + 0.0j
    lambda2: complex = 0.01 + 0.0j
    eta: float = 0.202
    epsilon: float = 0.01
    gamma: float = 0.0
    nbar: float = 5.0
    theta: float = math.pi / 4
    phi: float = 0.0
    modulation: Modulation = field(default_factory=Constant)
    nu: float = 0.0
    omega1: float = 0.0
    omega2: float = 0.0
    standard_matrix_element: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lambda1", complex(self.lambda1))
        object.__setattr__(self, "lambda2", complex(self.lambda2))
        if self.fock_cutoff < 1:
            raise ValueError(f"fock_cutoff must be >= 1, got {self.fock_cutoff}")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.nbar < 0:
            raise ValueError(f"nbar must be >= 0, got {self.nbar}")
        if not 0.0 <= self.theta <= 2 * math.pi:
            raise ValueError(f"theta must lie in [0, 2 pi], got {self.theta}")
        if not 0.0 <= self.phi <= math.pi:
            raise ValueError(f"phi must lie in [0, pi], got {self.phi}")
        if not isinstance(self.modulation, (Constant, Sech)):
            raise TypeError(f"modulation must be Constant or Sech, got {self.modulation!r}")
