"""Minkowski geometry, the Pauli four-vector and paired Lorentz transformations.

Conventions
-----------
* Natural units, metric ``diag(1, -1, -1, -1)``; index 0 is time.
* Four-vectors are plain ``numpy`` arrays of shape ``(4,)`` holding
  contravariant components. :func:`lower` gives the covariant ones.
* ``SIGMA[a]`` is ``sigma^a = (I, sigma_i)`` and ``SIGMA_BAR[a]`` is
  ``sigmabar^a = (I, -sigma_i)``. Matrices are stored with the primed index as
  the row of ``sigmabar`` so that ``sigma^a @ sigmabar^b`` is an operator
  acting on lower-index spinors.
* ``LEVI_CIVITA`` holds ``eps^{abcd}`` with ``eps^{0123} = -1``
  (``eps_{0123} = +1``). This is the orientation for which the generators
  below are self-dual, ``L^{ab} = (i/2) eps^{abcd} L_cd``.
* The spinor part of a :class:`LorentzPair` acts on state spinors ``psi_A``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import DomainError

METRIC = np.diag([1.0, -1.0, -1.0, -1.0])

IDENTITY2 = np.eye(2, dtype=complex)
PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
SIGMA = np.array([IDENTITY2, *PAULI])
SIGMA_BAR = np.array([IDENTITY2, *(-PAULI)])

EPSILON_0123 = -1.0


def _levi_civita(n: int) -> np.ndarray:
    eps = np.zeros((n,) * n)
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        eps[perm] = -1.0 if inversions % 2 else 1.0
    return eps


LEVI_CIVITA_3 = _levi_civita(3)
LEVI_CIVITA = EPSILON_0123 * _levi_civita(4)
LEVI_CIVITA_LOWER = np.einsum("abcd,ai,bj,ck,dl->ijkl", LEVI_CIVITA, METRIC, METRIC, METRIC, METRIC)

# L^{ab} = (i/4)(sigma^a sigmabar^b - sigma^b sigmabar^a), shape (4, 4, 2, 2)
GENERATORS = 0.25j * (
    np.einsum("aij,bjk->abik", SIGMA, SIGMA_BAR) - np.einsum("bij,ajk->abik", SIGMA, SIGMA_BAR)
)
GENERATORS_LOWER = np.einsum("ac,bd,cdij->abij", METRIC, METRIC, GENERATORS)

# 4x4 generators of boosts (K) and rotations (J) in the vector representation
_BOOST_GEN = np.zeros((3, 4, 4))
_ROT_GEN = np.zeros((3, 4, 4))
for _i in range(3):
    _BOOST_GEN[_i, 0, _i + 1] = _BOOST_GEN[_i, _i + 1, 0] = 1.0
    _ROT_GEN[_i, 1:, 1:] = -LEVI_CIVITA_3[_i]

# Matching spinor generators: boosts along j use L^{0j}, rotations about k use
# (1/2) eps_ijk L^{ij} = sigma_k / 2.
_BOOST_GEN_SPIN = GENERATORS[0, 1:]
_ROT_GEN_SPIN = 0.5 * np.einsum("ijk,ijab->kab", LEVI_CIVITA_3, GENERATORS[1:, 1:])


def lower(a) -> np.ndarray:
    """Covariant components ``a_alpha`` of a four-vector."""
    return METRIC @ np.asarray(a, dtype=float)


def dot(a, b) -> float:
    """Minkowski product ``a_alpha b^alpha``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3])


def four_vector(t, x=0.0, y=0.0, z=0.0) -> np.ndarray:
    return np.array([t, x, y, z], dtype=float)


def spatial(a) -> np.ndarray:
    return np.asarray(a, dtype=float)[1:].copy()


def classify(a, tol: float = 1e-12) -> str:
    """Return ``'timelike'``, ``'spacelike'`` or ``'null'`` from the sign of ``a.a``."""
    norm = dot(a, a)
    scale = max(float(np.dot(a, a)), 1.0)
    if abs(norm) <= tol * scale:
        return "null"
    return "timelike" if norm > 0 else "spacelike"


def is_timelike(a, tol: float = 1e-12) -> bool:
    return classify(a, tol) == "timelike"


def is_future_timelike(a, tol: float = 1e-12) -> bool:
    return is_timelike(a, tol) and float(np.asarray(a)[0]) > 0


def pauli_contract(a) -> np.ndarray:
    """The 2x2 form ``a_alpha sigmabar^alpha``; equals ``I_u`` for ``a = u``."""
    return np.einsum("a,aij->ij", lower(a), SIGMA_BAR)


def levi_civita_contract(*vectors) -> np.ndarray:
    """Contract leading upper indices of ``eps`` with covariant vector components."""
    out = LEVI_CIVITA
    for v in vectors:
        out = np.tensordot(lower(v), out, axes=(0, 0))
    return out


@dataclass(frozen=True)
class LorentzPair:
    """One proper orthochronous Lorentz transformation in two representations.

    ``vector`` is the 4x4 real matrix ``Lambda^a_b``; ``spinor`` is the
    ``SL(2,C)`` matrix acting on state spinors.
    """

    vector: np.ndarray
    spinor: np.ndarray

    def __post_init__(self):
        vec = np.array(self.vector, dtype=float)
        spin = np.array(self.spinor, dtype=complex)
        if vec.shape != (4, 4) or spin.shape != (2, 2):
            raise DomainError("LorentzPair needs a 4x4 vector part and a 2x2 spinor part")
        vec.setflags(write=False)
        spin.setflags(write=False)
        object.__setattr__(self, "vector", vec)
        object.__setattr__(self, "spinor", spin)

    @classmethod
    def identity(cls) -> "LorentzPair":
        return cls(np.eye(4), np.eye(2))

    def __matmul__(self, other: "LorentzPair") -> "LorentzPair":
        return LorentzPair(self.vector @ other.vector, self.spinor @ other.spinor)

    def inverse(self) -> "LorentzPair":
        # Lambda^-1 = eta Lambda^T eta for metric-preserving Lambda
        return LorentzPair(METRIC @ self.vector.T @ METRIC, np.linalg.inv(self.spinor))

    @property
    def upper_spinor(self) -> np.ndarray:
        """Action on upper-index spinors, ``Lambda^A_B = (S^-1)^T``."""
        return np.linalg.inv(self.spinor).T

    def metric_defect(self) -> float:
        return float(np.abs(self.vector.T @ METRIC @ self.vector - METRIC).max())

    def determinant_defect(self) -> float:
        return float(abs(np.linalg.det(self.spinor) - 1.0))

    def intertwining_defect(self) -> float:
        """Max deviation in ``Lambda^a_b Lambda^A_B conj(Lambda)^A'_B' sigmabar^{b B'B} = sigmabar^{a A'A}``."""
        m = self.upper_spinor
        lhs = np.einsum("ab,ij,bjk,lk->ail", self.vector, m.conj(), SIGMA_BAR, m)
        return float(np.abs(lhs - SIGMA_BAR).max())


def from_parameters(rapidity=(0.0, 0.0, 0.0), rotation=(0.0, 0.0, 0.0)) -> LorentzPair:
    """Exponentiate a boost (rapidity vector) plus rotation (axis * angle) generator.

    Both parts come from the same Lie-algebra element, so they always form a
    matching pair.
    """
    eta = np.asarray(rapidity, dtype=float)
    theta = np.asarray(rotation, dtype=float)
    vec_gen = np.einsum("i,iab->ab", eta, _BOOST_GEN) + np.einsum("i,iab->ab", theta, _ROT_GEN)
    spin_gen = np.einsum("i,iab->ab", eta, _BOOST_GEN_SPIN) + np.einsum(
        "i,iab->ab", theta, _ROT_GEN_SPIN
    )
    return LorentzPair(expm(vec_gen), expm(-1j * spin_gen))


def boost(rapidity) -> LorentzPair:
    """Pure boost; ``rapidity`` is a 3-vector, its norm the rapidity."""
    return from_parameters(rapidity=rapidity)


def boost_from_beta(beta) -> LorentzPair:
    beta = np.asarray(beta, dtype=float)
    speed = float(np.linalg.norm(beta))
    if speed >= 1.0:
        raise DomainError(f"|beta| = {speed} is not subluminal")
    if speed == 0.0:
        return LorentzPair.identity()
    return boost(np.arctanh(speed) * beta / speed)


def rotation(axis, angle: float) -> LorentzPair:
    """Spatial rotation by ``angle`` about a unit ``axis``.

    The spinor part is ``exp(-i angle/2 axis.sigma)``; a full turn gives ``-I``.
    """
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > 1e-9:
        raise DomainError("rotation axis must be a unit 3-vector")
    return from_parameters(rotation=angle * axis)


def standard_boost(p, m: float) -> LorentzPair:
    """The pure boost ``L(p)`` taking ``(m, 0, 0, 0)`` to ``p``."""
    p = np.asarray(p, dtype=float)
    if not m > 0:
        raise DomainError(f"mass must be positive, got {m}")
    if not is_future_timelike(p):
        raise DomainError("standard_boost needs a future-pointing timelike momentum")
    mass_shell = dot(p, p)
    if abs(mass_shell - m * m) > 1e-9 * max(1.0, p[0] ** 2):
        raise DomainError(f"p.p = {mass_shell} differs from m^2 = {m * m}")
    three = p[1:]
    size = float(np.linalg.norm(three))
    if size == 0.0:
        return LorentzPair.identity()
    # asinh of |p|/m is better conditioned than arccosh(p0/m) near rest
    return boost(np.arcsinh(size / m) * three / size)


def apply(t: LorentzPair, x) -> np.ndarray:
    return t.vector @ np.asarray(x, dtype=float)


def apply_spinor(t: LorentzPair, psi) -> np.ndarray:
    return t.spinor @ np.asarray(psi, dtype=complex)


def apply_covariant_tensor(t: LorentzPair, tensor) -> np.ndarray:
    """Transform a rank-2 tensor given by covariant components ``T_ab``."""
    inv = np.linalg.inv(t.vector)
    return inv.T @ np.asarray(tensor, dtype=float) @ inv


def clifford_defect() -> float:
    """Max deviation in ``sigma^a sigmabar^b + sigma^b sigmabar^a = 2 eta^ab I``."""
    prod = np.einsum("aij,bjk->abik", SIGMA, SIGMA_BAR)
    anti = prod + prod.transpose(1, 0, 2, 3)
    target = 2.0 * np.einsum("ab,ij->abij", np.linalg.inv(METRIC), IDENTITY2)
    return float(np.abs(anti - target).max())


def self_duality_defect() -> float:
    """Max deviation in ``L^{ab} = (i/2) eps^{abcd} L_cd``."""
    dual = 0.5j * np.einsum("abcd,cdij->abij", LEVI_CIVITA, GENERATORS_LOWER)
    return float(np.abs(dual - GENERATORS).max())
