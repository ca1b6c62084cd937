"""Three-level qubit-cavity master equation with an optional quantum-jump term.

Basis is block-major over the qubit levels: index ``l*(n_max+1) + n`` for
level ``l`` in ``(|0>, |1>, |2>)`` and photon number ``n``.  Level ``|0>`` is
a sink fed by the decay ``|1> -> |0>``; ``|1>`` and ``|2>`` carry the rotated
Rabi Hamiltonian with ``|1>`` playing the ``q = 0`` state and ``|2>`` the
``q = 1`` state of the photon-major two-level convention.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import model
from .dynamics import propagate, rk4_step
from .errors import DimensionError, IntegrationError
from .model import ModelParams, Representation

logger = logging.getLogger(__name__)

LEVELS = 3


def three_level_dim(n_max: int) -> int:
    return LEVELS * (model.check_n_max(n_max) + 1)


def qubit_to_block_indices(n_max: int) -> np.ndarray:
    """Block-major position of each photon-major qubit-cavity index ``2n+q``."""
    n_max = model.check_n_max(n_max)
    n = np.arange(n_max + 1)
    out = np.empty(2 * (n_max + 1), dtype=int)
    out[0::2] = 1 * (n_max + 1) + n
    out[1::2] = 2 * (n_max + 1) + n
    return out


def embed_state(psi: np.ndarray, n_max: int) -> np.ndarray:
    """Photon-major two-level state -> three-level block-major vector."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (model.full_dim(n_max),):
        raise DimensionError(f"state length {psi.shape} does not match n_max={n_max}")
    out = np.zeros(three_level_dim(n_max), dtype=complex)
    out[qubit_to_block_indices(n_max)] = psi
    return out


def embed_operator(op: np.ndarray, n_max: int) -> np.ndarray:
    """Photon-major two-level operator -> three-level operator, zero on ``|0>``."""
    idx = qubit_to_block_indices(n_max)
    out = np.zeros((three_level_dim(n_max),) * 2, dtype=complex)
    out[np.ix_(idx, idx)] = op
    return out


def extract_operator(op: np.ndarray, n_max: int) -> np.ndarray:
    """Restriction of a three-level operator to the ``{|1>, |2>}`` subspace, photon-major."""
    idx = qubit_to_block_indices(n_max)
    return np.asarray(op)[np.ix_(idx, idx)]


def level_projector(level: int, n_max: int) -> np.ndarray:
    size = model.check_n_max(n_max) + 1
    diag = np.zeros(LEVELS * size)
    diag[level * size:(level + 1) * size] = 1.0
    return np.diag(diag).astype(complex)


def build_three_level_system(p: ModelParams, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian Hamiltonian and jump operator ``|0><1| (x) 1``.

    The Hamiltonian is the rotated Rabi Hamiltonian without the gain/loss
    term on ``{|1>, |2>}`` and zero on the sink level.
    """
    n_max = model.check_n_max(n_max)
    hermitian = model.build_hamiltonian(p.replace(epsilon=0.0), Representation.ROTATED_X, n_max)
    size = n_max + 1
    jump = np.zeros((LEVELS * size,) * 2, dtype=complex)
    jump[0:size, size:2 * size] = np.eye(size)
    return embed_operator(hermitian, n_max), jump


def effective_hamiltonian(h_full: np.ndarray, jump_op: np.ndarray, gamma: float) -> np.ndarray:
    """``H - i (gamma/2) L^dag L``, the generator of jump-free evolution."""
    return h_full - 0.5j * gamma * jump_op.conj().T @ jump_op


@dataclass
class LindbladSeries:
    """Trace-renormalised observables of a density-matrix trajectory."""

    times: np.ndarray
    traces: np.ndarray
    photons: np.ndarray
    populations: np.ndarray
    sinks: np.ndarray
    purities: np.ndarray
    hermiticity: np.ndarray
    final_state: np.ndarray = field(repr=False, default=None)

    @property
    def norms(self) -> np.ndarray:
        # Norm analogue of a pure-state run: sqrt of the trace.
        return np.sqrt(self.traces)

    @property
    def log_norms(self) -> np.ndarray:
        return 0.5 * np.log(self.traces)


def _observables(rho: np.ndarray, n_max: int):
    size = n_max + 1
    diag = np.real(np.diag(rho))
    trace = float(np.real(np.trace(rho)))
    photon_diag = np.tile(np.arange(size, dtype=float), LEVELS)
    photon = float(diag @ photon_diag) / trace
    upper = float(diag[2 * size:].sum()) / trace
    sink = float(diag[:size].sum())
    purity = float(np.real(np.vdot(rho, rho))) / trace ** 2
    herm = float(np.abs(rho - rho.conj().T).max())
    return trace, photon, upper, sink, purity, herm


def propagate_lme(rho0: np.ndarray, h_full: np.ndarray, jump_op: np.ndarray, gamma: float,
                  include_jump: bool, t_max: float, dt: float = 1e-3,
                  record_every: int = 1, trace_tol: float = 1e-8) -> LindbladSeries:
    """RK4 integration of the master equation.

    With ``include_jump`` the generator is
    ``-i[H, rho] + gamma (L rho L^dag - {L^dag L, rho}/2)``; without it only
    the effective-Hamiltonian part ``-i(H_eff rho - rho H_eff^dag)`` remains.

    Raises
    ------
    IntegrationError
        If the state turns non-finite, or the trace drifts by more than
        ``trace_tol`` while the jump term is active.
    """
    rho = np.array(rho0, dtype=complex)
    dim = h_full.shape[0]
    if rho.shape != (dim, dim) or jump_op.shape != (dim, dim) or dim % LEVELS:
        raise DimensionError("rho0, H and the jump operator must share one three-level dimension")
    if gamma < 0 or dt <= 0 or t_max < 0 or record_every < 1:
        raise ValueError("need gamma >= 0, dt > 0, t_max >= 0, record_every >= 1")
    n_max = dim // LEVELS - 1
    h_eff = effective_hamiltonian(h_full, jump_op, gamma)
    jump_dag = jump_op.conj().T
    trace0 = float(np.real(np.trace(rho)))

    def generator(_t, r):
        x = h_eff @ r
        out = -1j * (x - x.conj().T)
        if include_jump:
            out += gamma * jump_op @ r @ jump_dag
        return out

    n_steps = int(round(t_max / dt))
    n_blocks, tail = divmod(n_steps, record_every)
    count = n_blocks + 1 + (1 if tail else 0)
    times = np.arange(count, dtype=float) * record_every * dt
    if tail:
        times[-1] = n_steps * dt
    records = np.empty((count, 6))
    records[0] = _observables(rho, n_max)
    t = 0.0
    for k in range(1, count):
        for _ in range(tail if (tail and k == count - 1) else record_every):
            rho = rk4_step(generator, t, rho, dt)
            t += dt
        if not np.all(np.isfinite(rho)):
            raise IntegrationError("density matrix became non-finite",
                                   last_valid_time=float(times[k - 1]))
        records[k] = _observables(rho, n_max)
        if include_jump and abs(records[k, 0] - trace0) > trace_tol:
            raise IntegrationError(f"trace drifted by {records[k, 0] - trace0:.3g}",
                                   last_valid_time=float(times[k - 1]))
    return LindbladSeries(times, records[:, 0], records[:, 1], records[:, 2], records[:, 3],
                          records[:, 4], records[:, 5], rho)


def rotated_initial_state(n: int, qubit: str, n_max: int) -> np.ndarray:
    """Bare state ``|n> (x) |+-z>`` expressed in the rotated (photon-major) frame.

    The rotation maps ``|+z> -> (|q0> + |q1>)/sqrt(2)`` and
    ``|-z> -> (|q1> - |q0>)/sqrt(2)``.
    """
    n_max = model.check_n_max(n_max)
    if not 0 <= n <= n_max:
        raise DimensionError(f"photon number {n} outside [0, {n_max}]")
    psi = np.zeros(model.full_dim(n_max), dtype=complex)
    sign = {"+": 1.0, "+z": 1.0, "-": -1.0, "-z": -1.0}[qubit]
    psi[2 * n] = sign / np.sqrt(2)
    psi[2 * n + 1] = 1 / np.sqrt(2)
    return psi


@dataclass
class PostselectionReport:
    photon_deviation: float
    population_deviation: float
    norm_deviation: float
    jump_photon_divergence: float
    jump_population_divergence: float
    final_sink: float
    sink_monotone: bool
    max_trace_error: float
    tdse: object = field(repr=False, default=None)
    no_jump: LindbladSeries = field(repr=False, default=None)
    with_jump: LindbladSeries = field(repr=False, default=None)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "photon_deviation", "population_deviation", "norm_deviation",
            "jump_photon_divergence", "jump_population_divergence",
            "final_sink", "sink_monotone", "max_trace_error")}


def compare_postselected(p: ModelParams, psi0: np.ndarray, t_max: float, dt: float = 1e-3,
                         n_max: int = 15, record_every: int = 10) -> PostselectionReport:
    """Jump-free master equation versus passive non-Hermitian Schrodinger evolution.

    ``psi0`` is a photon-major state on the rotated two-level space.  The
    decay rate is ``gamma = 2 epsilon``.  Deviations are maxima over the
    recorded times of renormalised photon number and ``|2>`` population.
    ``norm_deviation`` compares ``sqrt(Tr rho)`` with the TDSE norm after
    removing the constant ``exp(eps t)`` factor by which the passive
    Hamiltonian and the effective generator differ.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    psi0 = psi0 / np.linalg.norm(psi0)
    gamma = 2 * p.epsilon
    h_full, jump = build_three_level_system(p, n_max)
    vec = embed_state(psi0, n_max)
    rho0 = np.outer(vec, vec.conj())
    no_jump = propagate_lme(rho0, h_full, jump, gamma, False, t_max, dt, record_every)
    with_jump = propagate_lme(rho0, h_full, jump, gamma, True, t_max, dt, record_every)
    h_passive = model.build_hamiltonian(p, Representation.PASSIVE_X, n_max)
    tdse = propagate(h_passive, psi0, t_max, dt, record_every=record_every, snapshot_stride=0)
    shifted = tdse.log_norms - p.epsilon * tdse.times
    return PostselectionReport(
        photon_deviation=float(np.abs(no_jump.photons - tdse.photons).max()),
        population_deviation=float(np.abs(no_jump.populations - tdse.populations).max()),
        norm_deviation=float(np.abs(no_jump.log_norms - shifted).max()),
        jump_photon_divergence=float(np.abs(with_jump.photons - no_jump.photons).max()),
        jump_population_divergence=float(np.abs(with_jump.populations
                                                - no_jump.populations).max()),
        final_sink=float(with_jump.sinks[-1]),
        sink_monotone=bool(np.all(np.diff(with_jump.sinks) >= -1e-12)),
        max_trace_error=float(np.abs(with_jump.traces - 1).max()),
        tdse=tdse, no_jump=no_jump, with_jump=with_jump)
