"""Time evolution under a constant non-Hermitian Hamiltonian.

The integrator is the classical fourth-order Runge-Kutta scheme.  For a
constant ``H`` one step is the polynomial propagator
``T = sum_{k<=4} (-i H dt)^k / k!``, so ``s`` steps equal ``T**s`` applied
once; strided recording uses that identity to skip work between records
without changing the discrete trajectory.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from . import model
from .errors import DimensionError, IntegrationError
from .spectral import EigenDecomposition, pair_levels

logger = logging.getLogger(__name__)

_CHUNK = 4096


def _qubit_index(qubit) -> int:
    key = str(qubit).strip().lower()
    if key in ("+", "+z", "up", "1", "e", "excited"):
        return 1
    if key in ("-", "-z", "down", "0", "g", "ground"):
        return 0
    raise ValueError(f"qubit must be '+' or '-', got {qubit!r}")


def bare_state(n: int, qubit, n_max: int) -> np.ndarray:
    """Unit vector ``|n> (x) |qubit>`` in the photon-major basis."""
    n_max = model.check_n_max(n_max)
    if not 0 <= n <= n_max:
        raise DimensionError(f"photon number {n} outside [0, {n_max}]")
    psi = np.zeros(model.full_dim(n_max), dtype=complex)
    psi[model.basis_index(n, _qubit_index(qubit))] = 1.0
    return psi


@dataclass
class TimeSeries:
    """Observables along a trajectory.

    ``norms`` is the true norm of the unrescaled state, ``log_norms`` its
    natural logarithm (useful once the norm overflows).  ``photons`` and
    ``populations`` are renormalised expectations.  Snapshots are unit
    vectors taken every ``snapshot_stride`` records.
    """

    times: np.ndarray
    norms: np.ndarray
    log_norms: np.ndarray
    photons: np.ndarray
    populations: np.ndarray
    snapshot_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    snapshots: np.ndarray = field(default_factory=lambda: np.empty((0, 0), dtype=complex))

    def __len__(self):
        return len(self.times)

    def window_mean(self, name: str, t_lo: float, t_hi: float) -> float:
        values = getattr(self, name)
        mask = (self.times >= t_lo) & (self.times <= t_hi)
        if not mask.any():
            raise ValueError(f"no samples in [{t_lo}, {t_hi}]")
        return float(values[mask].mean())


def rk4_step(f, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """One classical RK4 step for ``dy/dt = f(t, y)``."""
    k1 = f(t, y)
    k2 = f(t + dt / 2, y + dt / 2 * k1)
    k3 = f(t + dt / 2, y + dt / 2 * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_matrix(h: np.ndarray, dt: float) -> np.ndarray:
    """Propagator of one RK4 step of ``i dpsi/dt = H psi`` for constant ``H``."""
    a = -1j * dt * np.asarray(h, dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    out = term.copy()
    for k in range(1, 5):
        term = term @ a / k
        out += term
    return out


def _matrix_power(m: np.ndarray, s: int) -> np.ndarray:
    # Overflow surfaces later as a non-finite state.
    with np.errstate(over="ignore", invalid="ignore"):
        return np.linalg.matrix_power(m, s)


def observable_diagonals(n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonals of the photon number and of the ``q = 1`` projector."""
    photon = np.repeat(np.arange(n_max + 1, dtype=float), 2)
    upper = np.tile([0.0, 1.0], n_max + 1)
    return photon, upper


def renormalized_observables(states: np.ndarray, n_max: int):
    """Norms, photon numbers and ``q = 1`` populations of row-stacked states."""
    states = np.atleast_2d(states)
    weights = np.abs(states) ** 2
    total = weights.sum(axis=1)
    photon, upper = observable_diagonals(n_max)
    return np.sqrt(total), weights @ photon / total, weights @ upper / total


def propagate(h: np.ndarray, psi0: np.ndarray, t_max: float, dt: float = 1e-3,
              renorm_guard: float = 1e6, record_every: int = 1,
              snapshot_stride: int = 100) -> TimeSeries:
    """Integrate ``i dpsi/dt = H psi`` with fixed-step RK4.

    Parameters
    ----------
    h : ndarray
        Constant Hamiltonian on the qubit (x) cavity space.
    psi0 : ndarray
        Initial state, unit norm.
    t_max, dt : float
        Final time and step, in units of ``1/omega``.
    renorm_guard : float
        The working state is divided by its norm whenever that norm leaves
        ``[1/renorm_guard, renorm_guard]``; the removed scale is accumulated
        so reported norms are the true ones.
    record_every : int
        Record every this many RK4 steps (1 records every step).
    snapshot_stride : int
        Keep a state snapshot every this many records; 0 disables.

    Raises
    ------
    IntegrationError
        If the state becomes non-finite.
    """
    h = np.asarray(h, dtype=complex)
    psi = np.array(psi0, dtype=complex)
    dim = h.shape[0]
    if h.shape != (dim, dim) or psi.shape != (dim,) or dim % 2:
        raise DimensionError(f"H {h.shape} and psi0 {psi.shape} are incompatible")
    if not (dt > 0 and t_max >= 0 and renorm_guard > 1 and record_every >= 1):
        raise ValueError("need dt > 0, t_max >= 0, renorm_guard > 1, record_every >= 1")
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise ValueError("psi0 must be unit norm")
    stiffness = dt * np.linalg.norm(h, 2)
    if stiffness > 0.1:
        logger.warning("dt*||H|| = %.3g exceeds the 0.1 stability heuristic", stiffness)
    n_max = dim // 2 - 1

    n_steps = int(round(t_max / dt))
    n_blocks, tail = divmod(n_steps, record_every)
    block = _matrix_power(rk4_matrix(h, dt), record_every)
    count = n_blocks + 1 + (1 if tail else 0)
    times = np.arange(count, dtype=float) * record_every * dt
    if tail:
        times[-1] = n_steps * dt

    log_scale = np.zeros(count)
    states = np.empty((min(count, _CHUNK), dim), dtype=complex)
    norms = np.empty(count)
    photons = np.empty(count)
    pops = np.empty(count)
    snap_idx = []
    snaps = []
    accumulated = 0.0
    tail_op = _matrix_power(rk4_matrix(h, dt), tail) if tail else None

    def flush(start, stop):
        nrm, ph, pop = renormalized_observables(states[: stop - start], n_max)
        norms[start:stop] = nrm
        photons[start:stop] = ph
        pops[start:stop] = pop

    chunk_start = 0
    for k in range(count):
        if k > 0:
            op = tail_op if (tail and k == count - 1) else block
            with np.errstate(over="ignore", invalid="ignore"):
                nxt = op @ psi
            if not np.all(np.isfinite(nxt)):
                flush(chunk_start, k)
                raise IntegrationError("state became non-finite", last_valid_time=float(times[k - 1]))
            psi = nxt
            size = np.linalg.norm(psi)
            if size > renorm_guard or size < 1 / renorm_guard:
                psi = psi / size
                accumulated += math.log(size)
        log_scale[k] = accumulated
        states[k - chunk_start] = psi
        if snapshot_stride and k % snapshot_stride == 0:
            snap_idx.append(k)
            snaps.append(psi / np.linalg.norm(psi))
        if k - chunk_start + 1 == len(states) or k == count - 1:
            flush(chunk_start, k + 1)
            chunk_start = k + 1

    log_norms = np.log(norms) + log_scale
    with np.errstate(over="ignore"):
        true_norms = np.exp(log_norms)
    return TimeSeries(times, true_norms, log_norms, photons, pops,
                      times[snap_idx] if snap_idx else np.empty(0),
                      np.array(snaps) if snaps else np.empty((0, dim), dtype=complex))


def projection_probabilities(psi0: np.ndarray, decomp: EigenDecomposition) -> np.ndarray:
    """``|<psi0|v_k>|^2`` for each unit right eigenvector, in sorted order.

    The eigenbasis is not orthogonal, so the values need not sum to one.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (decomp.dim,):
        raise DimensionError(f"state length {psi0.shape} does not match dim {decomp.dim}")
    psi0 = psi0 / np.linalg.norm(psi0)
    return np.clip(np.abs(decomp.vectors.conj().T @ psi0) ** 2, 0.0, 1.0)


@dataclass
class GrowthReport:
    imag: np.ndarray
    probabilities: np.ndarray
    dominant_index: int | None
    dominant_pair: int | None
    dominant_probability: float
    largest_probability_index: int
    takeover_time: float
    max_abs_imag: float
    within_bound: bool | None

    def as_dict(self) -> dict:
        return {"dominant_index": self.dominant_index, "dominant_pair": self.dominant_pair,
                "dominant_probability": self.dominant_probability,
                "largest_probability_index": self.largest_probability_index,
                "takeover_time": self.takeover_time, "max_abs_imag": self.max_abs_imag,
                "within_bound": self.within_bound}


def growth_analysis(decomp: EigenDecomposition, probs: np.ndarray, k: int = 101,
                    epsilon: float | None = None, p_floor: float = 1e-8,
                    im_tol: float = 1e-9) -> GrowthReport:
    """Which eigenstate will eventually dominate a non-Hermitian trajectory.

    Among the lowest ``k`` states with projection probability above
    ``p_floor``, the one with the largest ``Im E`` grows fastest.  The
    takeover time estimate is ``ln(p_max / p_dom) / (2 (Im E_dom - Im E_max))``
    where ``p_max`` is the largest initial weight.  When ``epsilon`` is given
    the report flags whether all ``|Im E| <= epsilon/2 + 1e-9``.
    """
    if not 0 < k <= decomp.dim:
        raise ValueError(f"k must lie in (0, {decomp.dim}]")
    probs = np.asarray(probs, dtype=float)[:k]
    imag = decomp.values.imag[:k].copy()
    largest = int(np.argmax(probs))
    candidates = np.nonzero(probs > p_floor)[0]
    dom = None
    if len(candidates):
        best = int(candidates[np.argmax(imag[candidates])])
        if imag[best] > im_tol:
            dom = best
    pair = None
    takeover = math.inf
    p_dom = 0.0
    if dom is not None:
        p_dom = float(probs[dom])
        for lp in pair_levels(decomp):
            if dom in (lp.index_plus, lp.index_minus):
                pair = lp.n
                break
        rate = imag[dom] - imag[largest]
        if dom == largest:
            takeover = 0.0
        elif rate > 0:
            takeover = math.log(probs[largest] / p_dom) / (2 * rate)
    max_imag = float(np.abs(imag).max())
    bound = None if epsilon is None else bool(max_imag <= epsilon / 2 + 1e-9)
    return GrowthReport(imag, probs, dom, pair, p_dom, largest, takeover, max_imag, bound)


def dominant_frequency(times: np.ndarray, signal: np.ndarray, t_min: float = 0.0,
                       pad: int = 8) -> float:
    """Angular frequency of the strongest oscillation in ``signal``.

    Samples before ``t_min`` are dropped, a linear trend is removed, a Hann
    window applied and the tallest local maximum of the zero-padded FFT
    returned, so leakage falling off from zero frequency is never chosen.
    Times must be uniformly spaced.
    """
    times = np.asarray(times, dtype=float)
    signal = np.asarray(signal, dtype=float)
    mask = times >= t_min
    t, y = times[mask], signal[mask]
    if len(t) < 8:
        raise ValueError("too few samples for a spectrum")
    step = t[1] - t[0]
    y = y - np.polyval(np.polyfit(t - t[0], y, 1), t - t[0])
    y = y * np.hanning(len(y))
    size = pad * len(y)
    spectrum = np.abs(np.fft.rfft(y, n=size))
    freqs = np.fft.rfftfreq(size, d=step)
    peaks, _ = find_peaks(spectrum)
    if not len(peaks):
        raise ValueError("signal has no oscillatory component")
    return float(2 * np.pi * freqs[peaks[np.argmax(spectrum[peaks])]])
