"""Momentum-labelled spin Hilbert spaces and their Hermitian observables.

A state is a left-handed spinor ``psi_A`` attached to a four-momentum ``p``.
Its inner product uses ``I_u = u_alpha sigmabar^alpha`` with ``u = p/m``, so
states with different momenta live in different Hilbert spaces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lorentz
from .errors import DomainError
from .lorentz import GENERATORS, GENERATORS_LOWER, LEVI_CIVITA, PAULI, dot, lower

MOMENTUM_RTOL = 1e-9
PROJECTION_TOL = 1e-8


def _mass(p) -> float:
    p = np.asarray(p, dtype=float)
    if not lorentz.is_future_timelike(p):
        raise DomainError("momentum must be timelike and future-pointing")
    return float(np.sqrt(dot(p, p)))


@dataclass(frozen=True)
class Spinor:
    amplitude: np.ndarray
    momentum: np.ndarray

    def __post_init__(self):
        amp = np.array(self.amplitude, dtype=complex).reshape(2)
        mom = np.array(self.momentum, dtype=float).reshape(4)
        _mass(mom)
        amp.setflags(write=False)
        mom.setflags(write=False)
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "momentum", mom)

    @property
    def mass(self) -> float:
        return _mass(self.momentum)

    @property
    def velocity(self) -> np.ndarray:
        return self.momentum / self.mass

    def with_amplitude(self, amplitude) -> "Spinor":
        return Spinor(amplitude, self.momentum)

    def transformed(self, t: lorentz.LorentzPair) -> "Spinor":
        return Spinor(t.spinor @ self.amplitude, t.vector @ self.momentum)


@dataclass(frozen=True)
class SpinObservable:
    """Spin observable fixed by a unit spacelike ``direction`` orthogonal to ``velocity``.

    ``projected`` is set when the direction had to be nudged back onto the
    constraint surface (within ``PROJECTION_TOL``).
    """

    direction: np.ndarray
    momentum: np.ndarray
    matrix: np.ndarray
    projected: bool = False

    @property
    def mass(self) -> float:
        return _mass(self.momentum)

    @property
    def velocity(self) -> np.ndarray:
        return self.momentum / self.mass


def same_momentum(p, q, rtol: float = MOMENTUM_RTOL) -> bool:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return bool(np.abs(p - q).max() <= rtol * max(1.0, float(np.abs(p).max())))


def _require_same_space(p, q) -> None:
    if not same_momentum(p, q):
        raise DomainError("states carry different momenta and live in different Hilbert spaces")


def inner_product(phi: Spinor, psi: Spinor) -> complex:
    """``<phi|psi> = u_alpha sigmabar^{alpha A'A} conj(phi)_A' psi_A``."""
    _require_same_space(phi.momentum, psi.momentum)
    i_u = lorentz.pauli_contract(psi.velocity)
    return complex(phi.amplitude.conj() @ i_u @ psi.amplitude)


def norm(psi: Spinor) -> float:
    return float(np.sqrt(inner_product(psi, psi).real))


def normalized(psi: Spinor) -> Spinor:
    size = norm(psi)
    if size == 0.0:
        raise DomainError("cannot normalise the zero spinor")
    return psi.with_amplitude(psi.amplitude / size)


def pauli_lubanski(p, m: float | None = None) -> np.ndarray:
    """``W^alpha(p) = (1/2) eps^{abcd} p_b L_cd`` as a stack of four 2x2 operators."""
    p = np.asarray(p, dtype=float)
    mass = _mass(p)
    if m is not None and abs(mass - m) > 1e-9 * max(1.0, m):
        raise DomainError(f"momentum has mass {mass}, expected {m}")
    return 0.5 * np.einsum("abcd,b,cdij->aij", LEVI_CIVITA, lower(p), GENERATORS_LOWER)


def observable_matrix(n, u) -> np.ndarray:
    """Generator form ``2i n_a u_b L^{ab} + (n.u) I`` of a Hermitian operator."""
    n_low = lower(n)
    u_low = lower(u)
    return 2j * np.einsum("a,b,abij->ij", n_low, u_low, GENERATORS) + dot(n, u) * np.eye(2)


def observable_matrix_from_pauli_lubanski(n, p, m: float) -> np.ndarray:
    """Equivalent form ``n_a (-2 W^a(p)/m + u^a I)``."""
    w = pauli_lubanski(p, m)
    u = np.asarray(p, dtype=float) / m
    n_low = lower(n)
    return np.einsum("a,aij->ij", n_low, -2.0 * w / m) + dot(n, u) * np.eye(2)


def hermitian_observable(n, p, m: float) -> SpinObservable:
    p = np.array(p, dtype=float)
    n = np.array(n, dtype=float)
    mass = _mass(p)
    if abs(mass - m) > 1e-9 * max(1.0, m):
        raise DomainError(f"momentum has mass {mass}, expected {m}")
    u = p / m
    overlap = dot(n, u)
    length2 = dot(n, n)
    if abs(overlap) > PROJECTION_TOL:
        raise DomainError(f"direction is not orthogonal to the velocity (n.u = {overlap:.3e})")
    if abs(length2 + 1.0) > PROJECTION_TOL:
        raise DomainError(f"direction is not unit spacelike (n.n = {length2:.12g})")
    projected = overlap != 0.0 or length2 != -1.0
    if projected:
        n = n - overlap * u
        n = n / np.sqrt(-dot(n, n))
    n.setflags(write=False)
    p.setflags(write=False)
    return SpinObservable(n, p, observable_matrix(n, u), projected)


def hermiticity_defect(matrix, u) -> float:
    """Size of ``I_u A - (I_u A)^dagger``; zero iff ``A`` is ``I_u``-Hermitian."""
    form = lorentz.pauli_contract(u) @ np.asarray(matrix, dtype=complex)
    return float(np.abs(form - form.conj().T).max())


def rest_frame_matrix(matrix, p, m: float) -> np.ndarray:
    """Operator pulled back to the rest frame through the standard boost."""
    s = lorentz.standard_boost(p, m).spinor
    return np.linalg.inv(s) @ np.asarray(matrix, dtype=complex) @ s


def fix_phase(amplitude) -> np.ndarray:
    """Make the first non-negligible component real and non-negative."""
    amp = np.asarray(amplitude, dtype=complex)
    for i, c in enumerate(amp):
        if abs(c) > 1e-14:
            out = amp * (abs(c) / c)
            out[i] = abs(c)
            return out
    return amp


def from_rest_frame(amplitude, p, m: float) -> Spinor:
    """Carry a rest-frame spinor to momentum ``p`` with the standard boost."""
    s = lorentz.standard_boost(p, m).spinor
    return Spinor(s @ np.asarray(amplitude, dtype=complex), p)


def to_rest_frame(psi: Spinor) -> np.ndarray:
    s = lorentz.standard_boost(psi.momentum, psi.mass).spinor
    return np.linalg.solve(s, psi.amplitude)


def bloch_vector(psi: Spinor) -> np.ndarray:
    rest = to_rest_frame(psi)
    weight = float(np.vdot(rest, rest).real)
    return np.array([np.vdot(rest, s @ rest).real for s in PAULI]) / weight


def eigenstates(obs: SpinObservable) -> tuple[Spinor, Spinor]:
    """Return ``(psi_plus, psi_minus)`` normalised under ``I_u``.

    The problem is solved in the particle rest frame, where the observable is
    ``d.sigma`` for a unit 3-vector ``d``, then boosted back.
    """
    u = obs.velocity
    frame = lorentz.standard_boost(u, 1.0)
    d = (frame.inverse().vector @ obs.direction)[1:]
    d = d / np.linalg.norm(d)
    _, vecs = np.linalg.eigh(np.einsum("i,ijk->jk", d, PAULI))
    # eigh sorts ascending: column 0 is the -1 eigenvector
    p = obs.momentum
    plus = Spinor(fix_phase(frame.spinor @ vecs[:, 1]), p)
    minus = Spinor(fix_phase(frame.spinor @ vecs[:, 0]), p)
    return plus, minus


def expectation(psi: Spinor, obs: SpinObservable) -> float:
    """Covariant expectation value ``n_a sigmabar^{a A'A} conj(psi)_A' psi_A``.

    The contraction equals ``<psi|A|psi>`` for the operator built by
    :func:`hermitian_observable`; the state is normalised on the fly.
    """
    if not same_momentum(psi.momentum, obs.momentum):
        raise DomainError("observable was built for a different momentum")
    amp = psi.amplitude
    value = amp.conj() @ lorentz.pauli_contract(obs.direction) @ amp
    weight = amp.conj() @ lorentz.pauli_contract(psi.velocity) @ amp
    return float((value / weight).real)
