"""Model parameters, basis conventions and Hamiltonian builders.

Basis convention
----------------
Qubit-cavity states are stored photon-major: the amplitude of
``|n> (x) |q>`` sits at index ``k = 2*n + q``, where ``q = 0`` is ``|-z>``
and ``q = 1`` is ``|+z>``.  For ``n_max = 1`` the order is
``|0,->, |0,+>, |1,->, |1,+>``.  Qubit-only matrices use the same
``(|-z>, |+z>)`` order so that ``kron(cavity, qubit)`` is consistent.

All matrices are dense ``complex128`` arrays.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

# Pauli matrices in the (|-z>, |+z>) order.
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the PT-symmetric Rabi Hamiltonian.

    Attributes
    ----------
    delta : float
        Qubit level splitting.
    epsilon : float
        Gain/loss rate of the non-Hermitian qubit term.
    omega : float
        Cavity frequency, sets the energy unit.
    g : float
        Qubit-cavity coupling strength.
    """

    delta: float
    epsilon: float = 0.0
    omega: float = 1.0
    g: float = 0.0

    def __post_init__(self):
        for name in ("delta", "epsilon", "omega", "g"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        for name in ("delta", "epsilon", "g"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")

    def replace(self, **changes) -> "ModelParams":
        fields = {"delta": self.delta, "epsilon": self.epsilon,
                  "omega": self.omega, "g": self.g}
        fields.update(changes)
        return ModelParams(**fields)


class Representation(enum.Enum):
    """Which form of the Hamiltonian to build.

    The first three act on qubit (x) cavity, the last three on the qubit alone.
    """

    BARE_Z = "bare_z"
    ROTATED_X = "rotated_x"
    PASSIVE_X = "passive_x"
    QUBIT_ONLY_Z = "qubit_z"
    QUBIT_ONLY_X = "qubit_x"
    PASSIVE_QUBIT_X = "passive_qubit_x"

    @property
    def is_qubit_only(self) -> bool:
        return self in (Representation.QUBIT_ONLY_Z, Representation.QUBIT_ONLY_X,
                        Representation.PASSIVE_QUBIT_X)

    @classmethod
    def parse(cls, value) -> "Representation":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"barez": "bare_z", "rotatedx": "rotated_x", "passivex": "passive_x"}
        key = aliases.get(key, key)
        for member in cls:
            if member.value == key or member.name.lower() == key:
                return member
        raise ValueError(f"unknown representation {value!r}")


def check_n_max(n_max: int) -> int:
    if isinstance(n_max, bool) or int(n_max) != n_max or n_max < 0:
        raise ValueError(f"n_max must be a non-negative integer, got {n_max!r}")
    return int(n_max)


def full_dim(n_max: int) -> int:
    """Dimension of the qubit (x) cavity space for a given truncation."""
    return 2 * (check_n_max(n_max) + 1)


def basis_index(n: int, q: int) -> int:
    """Index of ``|n> (x) |q>``; ``q = 1`` is ``|+z>``."""
    return 2 * n + q


def build_annihilation(n_max: int) -> np.ndarray:
    """Cavity annihilation operator on Fock states ``0..n_max``.

    Only the cavity factor is returned; tensor with the qubit identity
    (see :func:`cavity_operator`) to act on the full space.
    """
    n_max = check_n_max(n_max)
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)


def build_number(n_max: int) -> np.ndarray:
    return np.diag(np.arange(check_n_max(n_max) + 1, dtype=float)).astype(complex)


def cavity_operator(op: np.ndarray) -> np.ndarray:
    """Lift a cavity operator to the full space: ``op (x) 1_qubit``."""
    return np.kron(op, IDENTITY_2)


def qubit_operator(op: np.ndarray, n_max: int) -> np.ndarray:
    """Lift a 2x2 qubit operator to the full space: ``1_cavity (x) op``."""
    return np.kron(np.eye(check_n_max(n_max) + 1, dtype=complex), op)


def photon_number_operator(n_max: int) -> np.ndarray:
    return cavity_operator(build_number(n_max))


def build_qubit_hamiltonian(p: ModelParams, rep=Representation.QUBIT_ONLY_Z) -> np.ndarray:
    """2x2 qubit Hamiltonian in the ``(|-z>, |+z>)`` order."""
    rep = Representation.parse(rep)
    if rep is Representation.QUBIT_ONLY_Z:
        return p.delta / 2 * SIGMA_Z + 0.5j * p.epsilon * SIGMA_X
    if rep is Representation.QUBIT_ONLY_X:
        return p.delta / 2 * SIGMA_X + 0.5j * p.epsilon * SIGMA_Z
    if rep is Representation.PASSIVE_QUBIT_X:
        return p.delta / 2 * SIGMA_X + 0.5j * p.epsilon * SIGMA_Z + 0.5j * p.epsilon * IDENTITY_2
    raise DimensionError(f"{rep.name} acts on qubit (x) cavity; use build_hamiltonian")


def build_hamiltonian(p: ModelParams, rep=Representation.BARE_Z, n_max: int = 40) -> np.ndarray:
    """Truncated qubit-cavity Hamiltonian of dimension ``2*(n_max+1)``.

    ``BARE_Z``:    Delta/2 sz + i eps/2 sx + w a^dag a + g sx (a^dag + a)
    ``ROTATED_X``: Delta/2 sx + i eps/2 sz + w a^dag a + g sz (a^dag + a)
    ``PASSIVE_X``: ``ROTATED_X`` + i eps/2 * identity

    Ladder operators are truncated, not unitarised; check convergence in
    ``n_max`` before trusting high-lying levels.
    """
    rep = Representation.parse(rep)
    if rep.is_qubit_only:
        raise DimensionError(f"{rep.name} is a 2x2 qubit representation; "
                             "use build_qubit_hamiltonian")
    n_max = check_n_max(n_max)
    a = build_annihilation(n_max)
    field = cavity_operator(a + a.conj().T)
    if rep is Representation.BARE_Z:
        qubit, coupling = build_qubit_hamiltonian(p, Representation.QUBIT_ONLY_Z), SIGMA_X
    else:
        qubit, coupling = build_qubit_hamiltonian(p, Representation.QUBIT_ONLY_X), SIGMA_Z
    h = (qubit_operator(qubit, n_max)
         + p.omega * photon_number_operator(n_max)
         + p.g * qubit_operator(coupling, n_max) @ field)
    if rep is Representation.PASSIVE_X:
        h = h + 0.5j * p.epsilon * np.eye(h.shape[0])
    return h


def bosonic_parity(n_max: int) -> np.ndarray:
    """``exp(i pi a^dag a)`` on the cavity alone."""
    return np.diag((-1.0) ** np.arange(check_n_max(n_max) + 1)).astype(complex)


def build_parity(n_max: int, rep=Representation.BARE_Z) -> np.ndarray:
    """Combined parity ``sz exp(i pi a^dag a)`` (``sx`` for the rotated forms).

    Diagonal for ``BARE_Z``: entry ``2n+q`` is ``(-1)**n * (+1 if q else -1)``.
    """
    rep = Representation.parse(rep)
    if rep.is_qubit_only:
        raise DimensionError("parity of the full system needs a full-system representation")
    qubit = SIGMA_Z if rep is Representation.BARE_Z else SIGMA_X
    return np.kron(bosonic_parity(n_max), qubit)


def pt_symmetry_residual(h: np.ndarray, parity: np.ndarray) -> float:
    """Frobenius norm of ``P conj(H) P - H``; zero certifies PT symmetry.

    Time reversal is complex conjugation and ``P`` is an involution, so
    ``(PT)^dag H (PT) = P conj(H) P``.
    """
    h = np.asarray(h)
    parity = np.asarray(parity)
    if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape != parity.shape:
        raise DimensionError(f"shape mismatch: H {h.shape}, P {parity.shape}")
    return float(np.linalg.norm(parity @ h.conj() @ parity - h))


def is_hermitian(h: np.ndarray, atol: float = 1e-14) -> bool:
    return bool(np.allclose(h, h.conj().T, rtol=0.0, atol=atol))
