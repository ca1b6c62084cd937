"""Exact spectra of the truncated model.

Dense non-Hermitian eigendecomposition with a residual contract, grouping of
eigenvalues into level pairs with PTS/PTB tags, parameter sweeps, exact EP
and level-crossing searches, and truncation convergence checks.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import model
from .errors import DimensionError, SearchError, SolverError
from .model import ModelParams, Representation

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_IM_TOL = 1e-9
_TIE_TOL = 1e-9


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted by real part (ties by imaginary part).

    ``vectors[:, k]`` is the unit-norm right eigenvector of ``values[k]`` and
    ``residuals[k] = ||H v_k - lambda_k v_k||_2``.
    """

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    tol: float
    matrix_norm: float

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class LevelPair:
    n: int
    e_plus: complex
    e_minus: complex
    phase: str
    fidelity: float
    photon_plus: float
    photon_minus: float
    w_plus: float
    w_minus: float
    index_plus: int = -1
    index_minus: int = -1

    @property
    def max_imag(self) -> float:
        return max(abs(self.e_plus.imag), abs(self.e_minus.imag))


def sort_eigenvalues(values: np.ndarray, tie_tol: float = _TIE_TOL) -> np.ndarray:
    """Permutation ordering eigenvalues by real part, then imaginary part.

    Real parts closer than ``tie_tol`` (relative, floor 1) count as equal so
    that conjugate pairs always come out as ``(-i, +i)``.
    """
    order = np.argsort(values.real, kind="stable")
    re = values.real[order]
    out = []
    start = 0
    for k in range(1, len(order) + 1):
        if k == len(order) or re[k] - re[k - 1] > tie_tol * max(1.0, abs(re[k])):
            group = order[start:k]
            out.extend(group[np.argsort(values.imag[group], kind="stable")])
            start = k
    return np.array(out, dtype=int)


def eigendecompose(h: np.ndarray, tol: float = DEFAULT_TOL) -> EigenDecomposition:
    """Full eigensystem of a general complex matrix.

    Uses LAPACK ``zgeev`` (Hessenberg reduction + shifted QR) and then
    enforces ``||H v - lambda v|| <= tol * ||H||_2`` for every pair.

    Raises
    ------
    SolverError
        If the QR iteration does not converge or a residual exceeds the bound.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionError(f"eigendecompose needs a square matrix, got {h.shape}")
    if not np.all(np.isfinite(h)):
        raise SolverError("matrix has non-finite entries")
    try:
        values, vectors = np.linalg.eig(h)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"QR iteration did not converge: {exc}") from exc
    order = sort_eigenvalues(values)
    values = values[order]
    vectors = vectors[:, order]
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    residuals = np.linalg.norm(h @ vectors - vectors * values, axis=0)
    hnorm = float(np.linalg.norm(h, 2)) if h.size else 0.0
    bad = np.nonzero(residuals > tol * max(hnorm, np.finfo(float).tiny))[0]
    if len(bad):
        cluster = ", ".join(f"{values[k]:.6g}" for k in bad[:5])
        raise SolverError(f"residual bound {tol:g}*||H|| violated near eigenvalues [{cluster}]"
                          f" (max residual {residuals[bad].max():.3g})")
    return EigenDecomposition(values, vectors, residuals, tol, hnorm)


def _expectation(vec: np.ndarray, diag: np.ndarray) -> float:
    weights = np.abs(vec) ** 2
    return float(weights @ diag / weights.sum())


def _units(values: np.ndarray, im_tol: float):
    # Group sorted eigenvalues into conjugate pairs and singles.
    units = []
    k = 0
    count = len(values)
    while k < count:
        lam = values[k]
        if (abs(lam.imag) > im_tol and k + 1 < count
                and abs(values[k + 1] - lam.conjugate()) <= max(1e-7, 1e-7 * abs(lam))):
            units.append((k, k + 1))
            k += 2
        else:
            units.append((k,))
            k += 1
    return units


def pair_levels(decomp: EigenDecomposition, p: ModelParams | None = None,
                im_tol: float | None = None, max_pairs: int | None = None) -> list[LevelPair]:
    """Group the spectrum of a qubit-cavity Hamiltonian into level pairs.

    Conjugate eigenvalue pairs are kept together; remaining real levels are
    paired consecutively in ascending order.  Observables use the right
    eigenvectors renormalised by ``<v|v>``.  An unpaired level (possible at
    the truncation edge) is dropped with a warning.
    """
    omega = p.omega if p is not None else 1.0
    if im_tol is None:
        im_tol = DEFAULT_IM_TOL * omega
    dim = decomp.dim
    if dim % 2:
        raise DimensionError("pair_levels expects a qubit (x) cavity spectrum")
    n_max = dim // 2 - 1
    photon_diag = np.repeat(np.arange(n_max + 1, dtype=float), 2)
    excited_diag = np.tile([0.0, 1.0], n_max + 1)

    pairs: list[LevelPair] = []
    pending = None
    for unit in _units(decomp.values, im_tol):
        if max_pairs is not None and len(pairs) >= max_pairs:
            break
        if len(unit) == 2:
            if pending is not None:
                logger.warning("dropping unpaired level %s before a conjugate pair",
                               decomp.values[pending])
                pending = None
            lo, hi = unit  # sorted: negative imaginary part first
            idx_plus, idx_minus = hi, lo
        elif pending is None:
            pending = unit[0]
            continue
        else:
            idx_minus, idx_plus = pending, unit[0]
            pending = None
        vp = decomp.vectors[:, idx_plus]
        vm = decomp.vectors[:, idx_minus]
        ep = complex(decomp.values[idx_plus])
        em = complex(decomp.values[idx_minus])
        broken = max(abs(ep.imag), abs(em.imag)) > im_tol
        pairs.append(LevelPair(
            n=len(pairs), e_plus=ep, e_minus=em,
            phase="PTB" if broken else "PTS",
            fidelity=float(min(1.0, abs(np.vdot(vp, vm)) ** 2)),
            photon_plus=_expectation(vp, photon_diag),
            photon_minus=_expectation(vm, photon_diag),
            w_plus=_expectation(vp, excited_diag),
            w_minus=_expectation(vm, excited_diag),
            index_plus=int(idx_plus), index_minus=int(idx_minus)))
    if pending is not None and (max_pairs is None or len(pairs) < max_pairs):
        logger.warning("odd level count: dropping top unpaired level %s",
                       decomp.values[pending])
    return pairs


def exact_pairs(p: ModelParams, n_max: int, n_pairs: int | None = None,
                tol: float = DEFAULT_TOL, im_tol: float | None = None,
                rep=Representation.BARE_Z) -> list[LevelPair]:
    h = model.build_hamiltonian(p, rep, n_max)
    return pair_levels(eigendecompose(h, tol), p, im_tol, max_pairs=n_pairs)


@dataclass
class SweepRow:
    axis_value: float
    pair: LevelPair


def _axis_params(template: ModelParams, axis: str, value: float) -> ModelParams:
    if axis not in ("g", "epsilon"):
        raise ValueError(f"axis must be 'g' or 'epsilon', got {axis!r}")
    return template.replace(**{axis: float(value)})


def _sweep_point(args):
    template, axis, value, n_max, tol, im_tol, n_pairs = args
    p = _axis_params(template, axis, value)
    try:
        return exact_pairs(p, n_max, n_pairs=n_pairs + 2, tol=tol, im_tol=im_tol)
    except SolverError as exc:
        raise SolverError(f"{axis}={value:g}: {exc}") from exc


def _center(pair: LevelPair) -> float:
    return 0.5 * (pair.e_plus.real + pair.e_minus.real)


def sweep(template: ModelParams, axis: str, grid, n_max: int, n_pairs: int = 6,
          tol: float = DEFAULT_TOL, im_tol: float | None = None,
          workers: int = 1) -> list[SweepRow]:
    """Exact level pairs along ``axis`` (``"g"`` or ``"epsilon"``).

    Pair identity is carried from one grid point to the next by greedy
    nearest-centre matching, so labels do not flap near crossings.  Rows come
    back ordered by grid point, then pair label.
    """
    grid = [float(x) for x in grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("sweep grid must be strictly increasing")
    jobs = [(template, axis, x, n_max, tol, im_tol, n_pairs) for x in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_point = list(pool.map(_sweep_point, jobs))
    else:
        per_point = [_sweep_point(job) for job in jobs]

    rows: list[SweepRow] = []
    previous: list[LevelPair] | None = None
    for x, pairs in zip(grid, per_point):
        if previous is None:
            tracked = pairs[:n_pairs]
        else:
            free = list(range(len(pairs)))
            tracked = []
            for old in previous:
                best = min(free, key=lambda j: abs(_center(pairs[j]) - _center(old)))
                free.remove(best)
                tracked.append(pairs[best])
        labelled = [_relabel(pair, n) for n, pair in enumerate(tracked)]
        rows.extend(SweepRow(x, pair) for pair in labelled)
        previous = tracked
    return rows


def _relabel(pair: LevelPair, n: int) -> LevelPair:
    if pair.n == n:
        return pair
    return LevelPair(n, pair.e_plus, pair.e_minus, pair.phase, pair.fidelity,
                     pair.photon_plus, pair.photon_minus, pair.w_plus, pair.w_minus,
                     pair.index_plus, pair.index_minus)


def pair_max_imag(p: ModelParams, pair_index: int, n_max: int,
                  tol: float = DEFAULT_TOL) -> float:
    pairs = exact_pairs(p, n_max, n_pairs=pair_index + 1, tol=tol)
    if len(pairs) <= pair_index:
        raise SearchError(f"pair {pair_index} not resolved at n_max={n_max}")
    return pairs[pair_index].max_imag


def find_ep(template: ModelParams, axis: str, bracket: tuple[float, float],
            pair_index: int, n_max: int, im_tol: float | None = None,
            xtol: float = 1e-7, tol: float = DEFAULT_TOL) -> float:
    """Abscissa where pair ``pair_index`` switches between PTS and PTB.

    Bisects the indicator ``max|Im E| - im_tol`` over ``bracket``.

    Raises
    ------
    SearchError
        If the pair has the same phase at both ends ("no EP in bracket").
    """
    if im_tol is None:
        im_tol = DEFAULT_IM_TOL * template.omega
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise ValueError("bracket must satisfy lo < hi")

    def indicator(x):
        return pair_max_imag(_axis_params(template, axis, x), pair_index, n_max, tol) - im_tol

    f_lo, f_hi = indicator(lo), indicator(hi)
    if (f_lo > 0) == (f_hi > 0):
        raise SearchError(f"no EP in bracket [{lo:g}, {hi:g}] for pair {pair_index} on {axis}")
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        f_mid = indicator(mid)
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def pair_fidelity(p: ModelParams, pair_index: int, n_max: int) -> float:
    return exact_pairs(p, n_max, n_pairs=pair_index + 1)[pair_index].fidelity


def parity_resolved_levels(p: ModelParams, n_max: int, rep=Representation.BARE_Z):
    """Spectra of the even and odd parity blocks of a Hermitian Hamiltonian.

    Returns ``(even, odd)`` ascending arrays.  Within one parity sector
    levels never cross, so the ``n``-th level of each sector belongs to pair
    ``n``.
    """
    if p.epsilon != 0:
        raise ValueError("parity blocks exist only in the Hermitian limit (epsilon = 0)")
    h = model.build_hamiltonian(p, rep, n_max)
    parity = np.real(np.diag(model.build_parity(n_max, rep)))
    if Representation.parse(rep) is not Representation.BARE_Z:
        raise ValueError("parity-resolved levels are implemented for BARE_Z")
    out = []
    for sign in (1.0, -1.0):
        idx = np.nonzero(parity == sign)[0]
        out.append(np.linalg.eigvalsh(h[np.ix_(idx, idx)]))
    return out[0], out[1]


def level_crossings(template: ModelParams, pair_index: int, g_range: tuple[float, float],
                    n_max: int, samples: int = 400, xtol: float = 1e-10) -> list[float]:
    """Couplings where the two members of a Hermitian level pair cross.

    Scans the signed even-minus-odd gap of pair ``pair_index`` and refines
    each sign change by bisection.
    """
    base = template.replace(epsilon=0.0)

    def gap(g):
        even, odd = parity_resolved_levels(base.replace(g=g), n_max)
        return even[pair_index] - odd[pair_index]

    grid = np.linspace(g_range[0], g_range[1], samples + 1)
    vals = [gap(g) for g in grid]
    found = []
    for i in range(samples):
        if vals[i] == 0.0:
            found.append(float(grid[i]))
            continue
        if vals[i] * vals[i + 1] >= 0:
            continue
        lo, hi, f_lo = grid[i], grid[i + 1], vals[i]
        while hi - lo > xtol:
            mid = 0.5 * (lo + hi)
            f_mid = gap(mid)
            if (f_mid > 0) == (f_lo > 0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        found.append(0.5 * (lo + hi))
    return found


def fidelity_minimum(template: ModelParams, pair_index: int, bracket: tuple[float, float],
                     n_max: int, xtol: float = 1e-9) -> tuple[float, float]:
    """Golden-section search for the pair-fidelity minimum over ``g`` in ``bracket``."""
    invphi = (math.sqrt(5) - 1) / 2
    a, b = map(float, bracket)

    def f(g):
        return pair_fidelity(template.replace(g=g), pair_index, n_max)

    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    g = 0.5 * (a + b)
    return g, f(g)


@dataclass
class ConvergenceReport:
    n_max_list: list[int]
    k: int
    drifts: list[float]
    threshold: float
    lowest: list[np.ndarray] = field(repr=False, default_factory=list)

    @property
    def max_drift(self) -> float:
        return max(self.drifts) if self.drifts else 0.0

    @property
    def passed(self) -> bool:
        return self.max_drift <= self.threshold

    def as_dict(self) -> dict:
        return {"n_max": self.n_max_list, "k": self.k, "drifts": self.drifts,
                "max_drift": self.max_drift, "threshold": self.threshold,
                "passed": self.passed}


def convergence_check(p: ModelParams, n_max_list, k: int, rep=Representation.BARE_Z,
                      rel_threshold: float = 1e-8) -> ConvergenceReport:
    """Largest change of the lowest ``k`` eigenvalues between successive truncations.

    Passes when every drift is at most ``rel_threshold * omega``.
    """
    n_max_list = [int(n) for n in n_max_list]
    if any(b <= a for a, b in zip(n_max_list, n_max_list[1:])):
        raise ValueError("truncations must be strictly increasing")
    lowest = []
    for n_max in n_max_list:
        if k > model.full_dim(n_max):
            raise ValueError(f"k={k} exceeds the dimension at n_max={n_max}")
        decomp = eigendecompose(model.build_hamiltonian(p, rep, n_max))
        lowest.append(decomp.values[:k])
    drifts = [float(np.abs(b - a).max()) for a, b in zip(lowest, lowest[1:])]
    return ConvergenceReport(n_max_list, k, drifts, rel_threshold * p.omega, lowest)
