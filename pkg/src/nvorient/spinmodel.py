"""Ground-state spin physics of a single NV orientation.

Energies are in frequency units (MHz), magnetic fields in mT.  All matrices
use the fixed basis order {|+1>, |0>, |-1>}; the matrix-element conventions
below depend on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LabelingError

_SQRT2 = math.sqrt(2.0)

# Spin-1 angular momentum matrices, basis {|+1>, |0>, |-1>}.
SX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _SQRT2
SY = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / _SQRT2
SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)

KET_0 = np.array([0.0, 1.0, 0.0], dtype=complex)
KET_MINUS = np.array([-1.0, 0.0, 1.0], dtype=complex) / _SQRT2  # (|-1> - |+1>)/sqrt(2)
KET_PLUS = np.array([1.0, 0.0, 1.0], dtype=complex) / _SQRT2    # (|-1> + |+1>)/sqrt(2)


@dataclass(frozen=True)
class SpinConstants:
    """Zero-field splitting D (MHz) and electron gyromagnetic ratio (MHz/mT)."""

    d_mhz: float = 2870.0
    gamma_e: float = 28.02495

    def __post_init__(self):
        if not self.d_mhz > 0:
            raise ValueError("zero-field splitting must be positive")
        if not self.gamma_e > 0:
            raise ValueError("gyromagnetic ratio must be positive")


@dataclass(frozen=True)
class StaticFieldNV:
    """Static field in the NV frame: magnitude (mT), polar and azimuthal angle (rad)."""

    b_mt: float
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if self.b_mt < 0:
            raise ValueError("field magnitude must be nonnegative")
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError("theta must lie in [0, pi]")
        if not 0.0 <= self.phi < 2.0 * math.pi:
            raise ValueError("phi must lie in [0, 2*pi)")


@dataclass(frozen=True)
class MwFieldNV:
    """Microwave field in the NV frame.

    `zeta` is the angle from the NV Z-axis; `transverse_azimuth` locates the
    transverse component in the NV XY plane (the convention where the X-axis
    is defined by the microwave projection corresponds to azimuth 0).
    """

    amplitude_mt: float
    zeta: float
    transverse_azimuth: float = 0.0

    def __post_init__(self):
        if self.amplitude_mt < 0:
            raise ValueError("microwave amplitude must be nonnegative")
        if not 0.0 <= self.zeta <= math.pi:
            raise ValueError("zeta must lie in [0, pi]")

    def direction(self) -> np.ndarray:
        """Unit direction in the NV frame as (x, y, z)."""
        sz = math.sin(self.zeta)
        return np.array([
            sz * math.cos(self.transverse_azimuth),
            sz * math.sin(self.transverse_azimuth),
            math.cos(self.zeta),
        ])


def ground_hamiltonian(consts: SpinConstants, field: StaticFieldNV) -> np.ndarray:
    """D*Sz^2 + gamma_e*B*(sin(t)cos(p)*Sx + sin(t)sin(p)*Sy + cos(t)*Sz), MHz."""
    st, ct = math.sin(field.theta), math.cos(field.theta)
    sp, cp = math.sin(field.phi), math.cos(field.phi)
    gb = consts.gamma_e * field.b_mt
    return consts.d_mhz * (SZ @ SZ) + gb * (st * cp * SX + st * sp * SY + ct * SZ)


def _jacobi_eigh(matrix: np.ndarray, tol: float = 1e-14, max_sweeps: int = 60):
    """Cyclic Jacobi diagonalization of a complex Hermitian 3x3 matrix.

    Each off-diagonal element is annihilated by a phase rotation that makes
    the 2x2 subproblem real symmetric, followed by the classic real Jacobi
    rotation.  Returns (eigenvalues, eigenvector columns), unordered.
    """
    a = np.array(matrix, dtype=complex)
    v = np.eye(3, dtype=complex)
    scale = max(np.max(np.abs(a)), 1.0)
    for _ in range(max_sweeps):
        off = math.sqrt(sum(abs(a[p, q]) ** 2 for p, q in ((0, 1), (0, 2), (1, 2))))
        if off <= tol * scale:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[p, q]
            if abs(apq) <= tol * scale * 1e-2:
                continue
            w = apq / abs(apq)
            theta = 0.5 * math.atan2(2.0 * abs(apq), (a[q, q] - a[p, p]).real)
            c, s = math.cos(theta), math.sin(theta)
            u = np.eye(3, dtype=complex)
            u[p, p] = c
            u[p, q] = s
            u[q, p] = -s * np.conj(w)
            u[q, q] = c * np.conj(w)
            a = u.conj().T @ a @ u
            v = v @ u
    return a.diagonal().real.copy(), v


@dataclass(frozen=True)
class Transition:
    """Allowed transition between labeled levels, frequency in MHz."""

    lower: str
    upper: str
    frequency_mhz: float


@dataclass(frozen=True)
class EigenSystem:
    """Labeled eigensystem: L0 has maximal overlap with |0>, Lm/Lp by energy.

    `energies` and `states` are ordered (L0, Lm, Lp); eigenvector components
    follow the {|+1>, |0>, |-1>} basis.
    """

    energies: tuple[float, float, float]
    states: tuple[np.ndarray, np.ndarray, np.ndarray]

    @property
    def f_0m(self) -> float:
        return self.energies[1] - self.energies[0]

    @property
    def f_0p(self) -> float:
        return self.energies[2] - self.energies[0]

    @property
    def transitions(self) -> tuple[Transition, Transition]:
        return (
            Transition("L0", "Lm", self.f_0m),
            Transition("L0", "Lp", self.f_0p),
        )


def eigensystem(hamiltonian: np.ndarray) -> EigenSystem:
    """Exact eigen-decomposition with L0/Lm/Lp labeling.

    Raises LabelingError when no eigenvector carries majority |0> weight.
    """
    h = np.asarray(hamiltonian, dtype=complex)
    if h.shape != (3, 3):
        raise ValueError("Hamiltonian must be 3x3")
    if np.max(np.abs(h - h.conj().T)) > 1e-9:
        raise ValueError("Hamiltonian must be Hermitian")
    vals, vecs = _jacobi_eigh(h)
    weights = np.abs(vecs[1, :]) ** 2
    i0 = int(np.argmax(weights))
    if weights[i0] <= 0.5:
        raise LabelingError(
            f"maximal |0> weight is {weights[i0]:.3f} <= 0.5; labels undefined"
        )
    rest = sorted((i for i in range(3) if i != i0), key=lambda i: vals[i])
    order = (i0, rest[0], rest[1])
    return EigenSystem(
        energies=tuple(float(vals[i]) for i in order),
        states=tuple(vecs[:, i].copy() for i in order),
    )


@dataclass(frozen=True)
class RabiAmplitudes:
    """Coupling strengths gamma_e*B_mw*|<i|n.S|j>| for the three level pairs, MHz."""

    omega_0m: float
    omega_0p: float
    omega_mp: float


def rabi_amplitudes(eig: EigenSystem, consts: SpinConstants, mw: MwFieldNV) -> RabiAmplitudes:
    """Microwave coupling amplitudes; no rotating-wave 1/2 factor."""
    n = mw.direction()
    op = n[0] * SX + n[1] * SY + n[2] * SZ
    v0, vm, vp = eig.states
    pref = consts.gamma_e * mw.amplitude_mt
    return RabiAmplitudes(
        omega_0m=pref * abs(np.vdot(vm, op @ v0)),
        omega_0p=pref * abs(np.vdot(vp, op @ v0)),
        omega_mp=pref * abs(np.vdot(vp, op @ vm)),
    )


@dataclass(frozen=True)
class TransitionRecord:
    label: str
    frequency_mhz: float
    rabi_mhz: float


def transition_table(
    consts: SpinConstants, field: StaticFieldNV, mw: MwFieldNV
) -> list[TransitionRecord]:
    """Frequencies and Rabi amplitudes of the two |0>-connected transitions."""
    eig = eigensystem(ground_hamiltonian(consts, field))
    omegas = rabi_amplitudes(eig, consts, mw)
    return [
        TransitionRecord("L0-Lm", eig.f_0m, omegas.omega_0m),
        TransitionRecord("L0-Lp", eig.f_0p, omegas.omega_0p),
    ]
