"""Adiabatic-approximation (AA) solution in the displaced-oscillator picture.

Within the AA the Hamiltonian splits into 2x2 blocks, one per level pair
``n``, written on the displaced states ``|n_+, +x>`` and ``|n_-, -x>`` with
``|n_+-> = D(+-g/w)|n>`` and ``D(alpha) = exp[-alpha (a^dag - a)]``::

    H_n = n w - g^2/w + 1/2 [[ i eps, Omega_n ], [ Omega_n, -i eps ]]
    Omega_n = Delta exp(-2 g^2/w^2) L_n(4 g^2/w^2)

Everything here is closed form except the root searches.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import ModelParams, check_n_max, full_dim


class DegeneratePairWarning(RuntimeWarning):
    """An AA pair sits at a 0/0 point (EP coalescence or Omega_n = eps = 0)."""


@dataclass(frozen=True)
class AAPairSolution:
    """Eigensystem of one 2x2 AA block.

    ``v_plus``/``v_minus`` are unit vectors on ``(|n_+,+x>, |n_-,-x>)``.
    ``coalesced`` marks an exact EP (both vectors equal); ``degenerate``
    marks ``Omega_n == 0`` where the canonical basis is returned.
    """

    n: int
    omega_n: float
    e_plus: complex
    e_minus: complex
    v_plus: np.ndarray
    v_minus: np.ndarray
    norm_plus: complex
    norm_minus: complex
    coalesced: bool = False
    degenerate: bool = False

    @property
    def is_pts(self) -> bool:
        return self.e_plus.imag == 0.0 and self.e_minus.imag == 0.0


def laguerre(n: int, x, alpha: float = 0.0):
    """Generalised Laguerre polynomial ``L_n^(alpha)(x)`` by upward recurrence.

    Works element-wise on array ``x``.  ``alpha = 0`` gives the ordinary
    polynomial.
    """
    if n < 0:
        raise ValueError("Laguerre order must be non-negative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + alpha - x
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur if cur.ndim else float(cur)


def omega_n(p: ModelParams, n: int) -> float:
    """Effective tunnelling ``Omega_n``; changes sign at Laguerre roots."""
    x = 4.0 * p.g ** 2 / p.omega ** 2
    return p.delta * math.exp(-x / 2.0) * laguerre(n, x)


def _pair_center(p: ModelParams, n: int) -> float:
    return n * p.omega - p.g ** 2 / p.omega


def aa_pair(p: ModelParams, n: int) -> AAPairSolution:
    """Energies and eigenvectors of the ``n``-th AA block.

    ``E_n^+- = n w - g^2/w +- sqrt(Omega_n^2 - eps^2)/2`` with the principal
    root, so in the broken phase ``E_n^+`` carries the positive imaginary
    part (the growing mode).
    """
    om = omega_n(p, n)
    eps = p.epsilon
    center = _pair_center(p, n)
    # Scaled discriminant, so tiny parameters do not underflow.
    scale = max(abs(om), eps)
    disc = 0.0 if scale == 0 else (om / scale) ** 2 - (eps / scale) ** 2
    if disc >= 0:
        root = complex(scale * math.sqrt(disc), 0.0)
    else:
        root = complex(0.0, scale * math.sqrt(-disc))
    e_plus = center + root / 2
    e_minus = center - root / 2

    if om == 0.0:
        # Laguerre root: the block is already diagonal.
        v_plus = np.array([1.0, 0.0], dtype=complex)
        v_minus = np.array([0.0, 1.0], dtype=complex)
        return AAPairSolution(n, om, e_plus, e_minus, v_plus, v_minus,
                              1.0, 1.0, coalesced=False, degenerate=True)

    if abs(om) >= eps:
        n_plus = n_minus = 1.0 / math.sqrt(2.0)
        v_plus = n_plus * np.array([(1j * eps + root) / om, 1.0], dtype=complex)
        v_minus = n_minus * np.array([(1j * eps - root) / om, 1.0], dtype=complex)
    else:
        s = root.imag
        n_plus = om / (math.sqrt(2 * eps) * math.sqrt(eps + s))
        # eps - s = om^2 / (eps + s), avoids cancellation as om -> 0
        n_minus = math.copysign(math.sqrt((eps + s) / (2 * eps)), om)
        # n_plus * i(eps + s)/om in closed form, finite even for subnormal om.
        v_plus = np.array([1j * math.sqrt((eps + s) / (2 * eps)), n_plus], dtype=complex)
        v_minus = n_minus * np.array([1j * om / (eps + s), 1.0], dtype=complex)
    coalesced = abs(om) == eps and eps > 0
    return AAPairSolution(n, om, e_plus, e_minus, v_plus, v_minus,
                          n_plus, n_minus, coalesced=coalesced)


def aa_block(p: ModelParams, n: int) -> np.ndarray:
    """The 2x2 matrix ``H_n`` itself."""
    om = omega_n(p, n)
    return _pair_center(p, n) * np.eye(2) + 0.5 * np.array(
        [[1j * p.epsilon, om], [om, -1j * p.epsilon]])


def aa_fidelity(p: ModelParams, n: int) -> float:
    """``|<psi_n^+|psi_n^->|^2``: ``eps^2/Omega_n^2`` (PTS) or ``Omega_n^2/eps^2`` (PTB)."""
    om = abs(omega_n(p, n))
    eps = p.epsilon
    if om >= eps:
        return 0.0 if om == 0.0 else (eps / om) ** 2
    return (om / eps) ** 2


def aa_photon(p: ModelParams, n: int) -> float:
    """Mean photon number of either pair member, ``n + g^2/w^2``."""
    return n + (p.g / p.omega) ** 2


def aa_qubit_population(p: ModelParams, n: int) -> tuple[float, float]:
    """Excited-state populations ``(W_n^+, W_n^-)``.

    In the broken phase both are 1/2.  At ``Omega_n = eps = 0`` the AA
    vectors are undefined; the decoupled-limit value ``(1, 0)`` is returned
    with a :class:`DegeneratePairWarning`.
    """
    om = omega_n(p, n)
    eps = p.epsilon
    if om == 0.0 and eps == 0.0:
        warnings.warn(f"pair {n}: Omega_n = eps = 0, population set to (1, 0)",
                      DegeneratePairWarning, stacklevel=2)
        return 1.0, 0.0
    if abs(om) >= eps:
        sz = math.sqrt(om * om - eps * eps) / om
        return 0.5 * (1 + sz), 0.5 * (1 - sz)
    return 0.5, 0.5


def _displacement_std(beta: float, n_max: int) -> np.ndarray:
    # <m|exp(beta a^dag - beta a)|k> for real beta, via associated Laguerre.
    dim = n_max + 1
    out = np.zeros((dim, dim))
    if beta == 0.0:
        return np.eye(dim)
    x = beta * beta
    pref = math.exp(-x / 2.0)
    log_b = math.log(abs(beta))
    lg = [math.lgamma(j + 1) for j in range(dim)]
    for shift in range(dim):
        # L_j^(shift)(x) for j = 0..dim-1-shift by recurrence in j
        count = dim - shift
        lag = np.empty(count)
        lag[0] = 1.0
        if count > 1:
            lag[1] = 1.0 + shift - x
        for j in range(1, count - 1):
            lag[j + 1] = ((2 * j + 1 + shift - x) * lag[j] - (j + shift) * lag[j - 1]) / (j + 1)
        for j in range(count):
            mag = math.exp(0.5 * (lg[j] - lg[j + shift]) + shift * log_b)
            val = pref * mag * lag[j]
            # lower triangle m = j + shift >= k = j carries beta^shift,
            # upper triangle carries (-beta)^shift
            sign_lower = 1.0 if beta > 0 or shift % 2 == 0 else -1.0
            out[j + shift, j] = sign_lower * val
            if shift:
                out[j, j + shift] = (-1.0) ** shift * sign_lower * val
    return out


def displacement_matrix(alpha: float, n_max: int) -> np.ndarray:
    """Truncated ``D(alpha) = exp[-alpha (a^dag - a)]`` from closed-form elements.

    The matrix is cut from the infinite operator, so it is unitary only up
    to leakage past ``n_max``; see :func:`displacement_unitarity_residual`.
    """
    n_max = check_n_max(n_max)
    return _displacement_std(-float(alpha), n_max).astype(complex)


def displacement_unitarity_residual(alpha: float, n_max: int, keep: int | None = None) -> float:
    """Max deviation of ``D(alpha) D(-alpha)`` from identity on the lowest ``keep`` states.

    Rows near ``n_max`` always leak, so the check is restricted to the lower
    block (half the space by default).
    """
    n_max = check_n_max(n_max)
    if keep is None:
        keep = (n_max + 1) // 2
    prod = displacement_matrix(alpha, n_max) @ displacement_matrix(-alpha, n_max)
    return float(np.abs(prod[:keep, :keep] - np.eye(keep)).max())


_PLUS_X = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
_MINUS_X = np.array([-1.0, 1.0], dtype=complex) / math.sqrt(2.0)


def aa_state_in_bare_basis(p: ModelParams, n: int, branch: str, n_max: int) -> np.ndarray:
    """AA eigenvector of pair ``n`` expanded in the bare ``k = 2n+q`` basis.

    ``branch`` is ``"+"`` or ``"-"``.  The result is normalised after
    truncation.  At a coalesced EP both branches give the same state.
    """
    n_max = check_n_max(n_max)
    if n > n_max:
        raise ValueError(f"pair {n} lies above the truncation n_max={n_max}")
    if branch not in ("+", "-"):
        raise ValueError("branch must be '+' or '-'")
    sol = aa_pair(p, n)
    if sol.coalesced:
        warnings.warn(f"pair {n} is at an exceptional point; branches coincide",
                      DegeneratePairWarning, stacklevel=2)
    coeff = sol.v_plus if branch == "+" else sol.v_minus
    alpha = p.g / p.omega
    fock = np.zeros(n_max + 1, dtype=complex)
    fock[n] = 1.0
    up = displacement_matrix(alpha, n_max) @ fock
    down = displacement_matrix(-alpha, n_max) @ fock
    state = coeff[0] * np.kron(up, _PLUS_X) + coeff[1] * np.kron(down, _MINUS_X)
    assert state.shape == (full_dim(n_max),)
    return state / np.linalg.norm(state)


def aa_ep_epsilon(p: ModelParams, n: int) -> float:
    """Gain/loss rate at which pair ``n`` hits its EP, ``|Omega_n|``.

    ``p.epsilon`` is ignored.
    """
    return abs(omega_n(p, n))


def aa_ep_couplings(p: ModelParams, n: int, g_max: float, samples: int = 4000) -> list[float]:
    """Couplings in ``(0, g_max]`` where ``|Omega_n(g)| = eps`` for the given ``eps``."""
    if p.epsilon <= 0:
        return []

    def f(g):
        return abs(omega_n(p.replace(g=g), n)) - p.epsilon

    grid = np.linspace(0.0, g_max, samples + 1)
    vals = np.array([f(g) for g in grid])
    roots = []
    for i in range(samples):
        if vals[i] == 0.0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(f, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-14))
    return [r for r in roots if r > 0]


def _bisect(f, lo, hi, f_lo):
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= 1e-15 * max(1.0, abs(mid)):
            return mid
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid


def laguerre_roots(n: int) -> list[float]:
    """Roots of ``L_n`` in ascending order.

    Roots of ``L_n`` interlace with those of ``L_{n-1}``, so each one is
    bracketed by consecutive lower-order roots and refined by bisection.
    """
    if n <= 0:
        return []
    roots: list[float] = []
    for order in range(1, n + 1):
        top = 2 * order + 1 + math.sqrt((2 * order + 1) ** 2 + 0.25)
        edges = [0.0] + roots + [top]
        new = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            f_lo = laguerre(order, lo)
            new.append(_bisect(lambda x, k=order: laguerre(k, x), lo, hi, f_lo))
        roots = new
    return roots


def juddian_points(n: int, omega: float = 1.0, g_max: float = float("inf")) -> list[float]:
    """Couplings ``g = w sqrt(x_k)/2`` in ``(0, g_max]`` where ``L_n(4g^2/w^2) = 0``.

    These are the AA predictions for the level crossings of pair ``n`` in the
    Hermitian model; they do not depend on ``eps``.
    """
    return [omega * math.sqrt(x) / 2 for x in laguerre_roots(n) if omega * math.sqrt(x) / 2 <= g_max]
