"""Odd-harmonic amplitudes generated by a real probe.

Along a ray, the amplitudes a_k (k odd) of ``sum_k e^{ik phi/h} a_k`` obey

    2k da_k/ds + i alpha(s) (a*a*a)_k = 0,    a_{+-1}(0) = A/2,

with the discrete convolution over the two-sided sequence.  Only k > 0 is
stored; ``a_{-k} = conj(a_k)`` is implied.  The full sequence for truncation
order ``kmax`` lives in an array of length ``2*kmax + 1`` indexed by
``k + kmax`` (even entries are zero).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .errors import BoundsNotCertifiedError, ConfigError, DivergenceError, SetupError

AlphaLike = Union[float, Callable[[np.ndarray], np.ndarray], tuple]

# Default cap on s0 when alpha_inf -> 0.
S0_CAP = 1e6
SAFETY = 0.9


def odd_orders(kmax: int) -> np.ndarray:
    if kmax < 1 or kmax % 2 == 0:
        raise ConfigError(f"kmax must be odd and >= 1 (got {kmax})")
    return np.arange(1, kmax + 1, 2)


@dataclass
class HarmonicState:
    A: float
    kmax: int
    amps: np.ndarray  # a_k for k = 1, 3, ..., kmax
    s: float = 0.0

    @classmethod
    def initial(cls, A: float, kmax: int = 15) -> "HarmonicState":
        amps = np.zeros(len(odd_orders(kmax)), dtype=complex)
        amps[0] = A / 2
        return cls(A, kmax, amps, 0.0)

    @property
    def orders(self) -> np.ndarray:
        return odd_orders(self.kmax)

    def full(self) -> np.ndarray:
        return full_sequence(self.amps, self.kmax)

    @property
    def Q(self) -> float:
        return conserved_q(self.amps, self.kmax)


def full_sequence(amps, kmax: int) -> np.ndarray:
    """Two-sided conjugate-symmetric sequence from the k > 0 amplitudes."""
    ks = odd_orders(kmax)
    a = np.zeros(2 * kmax + 1, dtype=complex)
    a[kmax + ks] = amps
    a[kmax - ks] = np.conj(amps)
    return a


def triple_convolution(a: np.ndarray) -> np.ndarray:
    """``(a*a*a)_k`` for |k| <= kmax, dropping indices outside the window.

    ``a`` is the two-sided sequence of length ``2*kmax + 1``.  Direct
    (non-FFT) convolution, so zeros stay exact.
    """
    n = len(a)
    kmax = (n - 1) // 2
    c = np.convolve(np.convolve(a, a), a)
    return c[2 * kmax:2 * kmax + n]


def l2_norm(a_full: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(a_full) ** 2)))


def h_norm(a_full: np.ndarray, m: float = 0.5) -> float:
    """``(sum_k |k|^{2m} |a_k|^2)^{1/2}`` over the two-sided sequence."""
    kmax = (len(a_full) - 1) // 2
    k = np.abs(np.arange(-kmax, kmax + 1))
    return float(np.sqrt(np.sum(k ** (2 * m) * np.abs(a_full) ** 2)))


def conserved_q(amps, kmax: int) -> float:
    """``Q = sum_{k>0} k |a_k|^2``; equals A^2/4 at the initial data."""
    return float(np.sum(odd_orders(kmax) * np.abs(amps) ** 2))


def quartic_invariant(amps, kmax: int) -> float:
    """``sum_k a_{-k} (a*a*a)_k``, the mean of u^4 over a carrier period.

    Exactly conserved by the truncated system for any alpha(s).
    """
    a = full_sequence(amps, kmax)
    return float(np.real(np.sum(a[::-1] * triple_convolution(a))))


def rhs(state: HarmonicState, alpha_s: float) -> np.ndarray:
    """``da_k/ds = -i alpha (a*a*a)_k / (2k)`` for k = 1, 3, ..., kmax."""
    return _rhs(state.amps, state.kmax, alpha_s)


def _rhs(amps, kmax, alpha_s):
    ks = odd_orders(kmax)
    c = triple_convolution(full_sequence(amps, kmax))
    return -1j * alpha_s * c[kmax + ks] / (2 * ks)


def _alpha_fn(alpha: AlphaLike) -> Callable:
    if callable(alpha):
        return alpha
    if isinstance(alpha, tuple):
        s_pts, vals = (np.asarray(v, dtype=float) for v in alpha)
        return lambda s: np.interp(s, s_pts, vals)
    value = float(alpha)
    return lambda s: value + 0.0 * np.asarray(s, dtype=float)


def solve_transport(A: float, alpha: AlphaLike, kmax: int = 15, ds: float = 1e-3,
                    S: float = 1.0, s_out: Optional[Sequence[float]] = None,
                    amps0: Optional[np.ndarray] = None):
    """Classical RK4 integration of the transport system from s = 0 to S.

    ``alpha`` is a constant, a callable of s, or a ``(s_samples, values)``
    pair interpolated linearly.  The step is shrunk so that it divides S.
    Returns (s_values, list of HarmonicState) at ``s_out`` (default: every step).
    """
    if not ds > 0:
        raise ConfigError("ds must be > 0")
    fa = _alpha_fn(alpha)
    n = max(1, int(math.ceil(S / ds - 1e-9))) if S > 0 else 0
    h = S / n if n else 0.0
    amps = HarmonicState.initial(A, kmax).amps if amps0 is None else np.array(amps0, dtype=complex)
    grid = np.linspace(0.0, S, n + 1)
    want = None if s_out is None else {int(round(s / h)) if h else 0: s for s in s_out}
    out_s, out = [], []

    def keep(i, a):
        if want is None or i in want:
            out_s.append(grid[i])
            out.append(HarmonicState(A, kmax, a.copy(), grid[i]))

    keep(0, amps)
    for i in range(n):
        s = grid[i]
        a_lo, a_mid, a_hi = fa(s), fa(s + 0.5 * h), fa(s + h)
        k1 = _rhs(amps, kmax, a_lo)
        k2 = _rhs(amps + 0.5 * h * k1, kmax, a_mid)
        k3 = _rhs(amps + 0.5 * h * k2, kmax, a_mid)
        k4 = _rhs(amps + h * k3, kmax, a_hi)
        amps = amps + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(amps)):
            raise DivergenceError(f"transport integration diverged at s={grid[i + 1]:.6g}",
                                  s=grid[i + 1])
        keep(i + 1, amps)
    return np.array(out_s), out


# --- Picard iteration -----------------------------------------------------------

@dataclass(frozen=True)
class PicardBounds:
    alpha_inf: float
    a0_l2: float
    a0_h12: Optional[float]
    M: float
    s0: float

    @property
    def reference_norm(self) -> float:
        """Norm of a(0) entering the conditions (h^{1/2} if supplied)."""
        return self.a0_h12 if self.a0_h12 is not None else self.a0_l2

    @property
    def contraction(self) -> float:
        """Lipschitz constant ``(3 s0 / 2) |alpha| (M + |a(0)|)^2`` of the integral map."""
        return 1.5 * self.s0 * self.alpha_inf * (self.M + self.reference_norm) ** 2

    def satisfied(self) -> bool:
        return certify(self.alpha_inf, self.reference_norm, self.M, self.s0)


def certify(alpha_inf: float, a0_norm: float, M: float, s0: float) -> bool:
    """Ball-invariance and contraction conditions for the Picard map."""
    maps_into = 0.5 * alpha_inf * (a0_norm + M) ** 3 * s0 <= M
    contracts = 1.5 * alpha_inf * (M + a0_norm) ** 2 * s0 < 1.0
    return bool(maps_into and contracts)


def existence_bounds(alpha_inf: float, a0_l2: float, a0_h12: Optional[float] = None,
                     s0_cap: float = S0_CAP) -> PicardBounds:
    """Largest certified step ``s0`` (times 0.9) for ball radius M = |a(0)|.

    Ball invariance needs ``s0 <= 2M / (|alpha| (|a0| + M)^3)`` and the
    contraction ``s0 < 2 / (3 |alpha| (M + |a0|)^2)``.  When the h^{1/2} norm
    is given it replaces |a0| in both, which keeps the conditions valid for
    every restart along the trajectory.
    """
    if not (a0_l2 > 0 and alpha_inf >= 0):
        raise ConfigError("existence_bounds needs a0_l2 > 0 and alpha_inf >= 0")
    norm = a0_h12 if a0_h12 is not None else a0_l2
    M = norm
    if alpha_inf == 0:
        return PicardBounds(alpha_inf, a0_l2, a0_h12, M, s0_cap)
    into = 2 * M / (alpha_inf * (norm + M) ** 3)
    contr = 2 / (3 * alpha_inf * (M + norm) ** 2)
    s0 = min(SAFETY * min(into, contr), s0_cap)
    return PicardBounds(alpha_inf, a0_l2, a0_h12, M, s0)


@dataclass
class PicardResult:
    s: np.ndarray
    amps: np.ndarray          # (len(s), n_orders)
    distances: np.ndarray     # sup_s l2 distance between successive iterates
    bounds: PicardBounds

    @property
    def ratios(self) -> np.ndarray:
        d = self.distances
        nz = d[:-1] > 0
        return d[1:][nz] / d[:-1][nz]


def picard_solve(A: float, alpha: AlphaLike, kmax: int = 15, s0: Optional[float] = None,
                 M: Optional[float] = None, iterations: int = 30, n_nodes: int = 4001,
                 tol: float = 1e-14, override: bool = False) -> PicardResult:
    """Fixed-point iteration of the integral form on [0, s0].

    Starts from the constant initial sequence; the s-integral is a
    cumulative trapezoid on ``n_nodes`` points (positive weights, so the
    discrete map keeps the continuous Lipschitz bound).  ``alpha_inf`` is
    taken as the max of |alpha| on the nodes.  Raises
    BoundsNotCertifiedError if (s0, M) fail the conditions, unless
    ``override``.  Stops early when the update falls below ``tol``.
    """
    fa = _alpha_fn(alpha)
    a0 = HarmonicState.initial(A, kmax).amps
    a0_full = full_sequence(a0, kmax)
    a0_l2 = l2_norm(a0_full)
    if s0 is None or M is None:
        probe = np.linspace(0, 1 if s0 is None else s0, n_nodes)
        ainf = float(np.max(np.abs(fa(probe))))
        b = existence_bounds(ainf, a0_l2)
        s0 = b.s0 if s0 is None else s0
        M = b.M if M is None else M
    s = np.linspace(0.0, s0, n_nodes)
    al = np.asarray(fa(s), dtype=float) * np.ones_like(s)
    ainf = float(np.max(np.abs(al)))
    bounds = PicardBounds(ainf, a0_l2, None, M, s0)
    if not bounds.satisfied() and not override:
        raise BoundsNotCertifiedError(
            f"(s0={s0:.4g}, M={M:.4g}) do not satisfy the Picard conditions for |alpha|={ainf:.4g}")
    ks = odd_orders(kmax)
    cur = np.tile(a0, (n_nodes, 1))
    dists = []
    for _ in range(iterations):
        full = np.zeros((n_nodes, 2 * kmax + 1), dtype=complex)
        full[:, kmax + ks] = cur
        full[:, kmax - ks] = np.conj(cur)
        conv = np.array([triple_convolution(f) for f in full])[:, kmax + ks]
        integrand = al[:, None] * conv
        new = a0[None, :] - (1j / (2 * ks))[None, :] * integrate.cumulative_trapezoid(
            integrand, s, axis=0, initial=0.0)
        # two-sided l2 distance: each k > 0 entry appears twice
        d = float(np.max(np.sqrt(2 * np.sum(np.abs(new - cur) ** 2, axis=1))))
        dists.append(d)
        cur = new
        if d < tol:
            break
    return PicardResult(s, cur, np.array(dists), bounds)


# --- linearisation and closed forms ---------------------------------------------

def linearized_amplitudes(A: float, R: float):
    """First-order changes (da_1, da_3) for small alpha with integral R."""
    return -(3 * A ** 3 / 8) * (0.5j) * R, -(A ** 3 / 8) * (1j / 6) * R


def first_harmonic_field(A: float, partial_integral: float, phase_arg: float, h: float) -> float:
    """``A h^{-1/2} cos(phase_arg - (3A^2/8) * partial_integral)``."""
    return A * h ** -0.5 * math.cos(phase_arg - 0.375 * A * A * partial_integral)


# --- real-probe data -------------------------------------------------------------

REAL_DATA_FACTOR = math.sqrt(41) / 24


def real_data_constant(envelope) -> float:
    """``sqrt(41)/24 * (int chi^6)^{1/2}``."""
    from .phantoms import envelope_power_integral

    return REAL_DATA_FACTOR * math.sqrt(envelope_power_integral(envelope, 6))


def real_data_extract(u_T, u_lin_T, packet, T: float, alpha=None, band_level: float = 0.1,
                      half_width: float = 0.5, overlap_tol: float = 1e-3):
    """Estimate |X alpha|(z) from a real-probe snapshot.

    ``Data(z)^2 = h * int_band |u - u_L|^2 ds`` over the band
    ``|x.omega - c0 - T| <= w sqrt(ln(1/band_level))`` for vertical omega,
    divided by the real-probe constant.  If ``alpha`` is given, a band that
    still sees alpha above ``overlap_tol * max(alpha)`` raises SetupError.
    Returns ``(z, estimates)``.
    """
    from .fields import Field
    from .optics import _axis_aligned

    if packet.is_complex:
        raise ConfigError("real_data_extract needs a real probe")
    if _axis_aligned(packet.omega) != (1, 1):
        raise ConfigError("real_data_extract expects omega = (0, 1)")
    u = u_T.values if isinstance(u_T, Field) else np.asarray(u_T)
    ul = u_lin_T.values if isinstance(u_lin_T, Field) else np.asarray(u_lin_T)
    g = u_T.grid
    hw = packet.envelope.mask_halfwidth(band_level)
    y = g.y
    rows = np.abs(y - packet.c0 - T) <= hw
    if alpha is not None:
        amax = float(np.max(alpha.values))
        if amax > 0 and np.max(alpha.values[:, rows]) > overlap_tol * amax:
            raise SetupError("measurement band overlaps the support of alpha")
    cols = np.flatnonzero(np.abs(g.x) <= half_width + 1e-12)
    diff2 = np.abs(u[np.ix_(cols, rows)] - ul[np.ix_(cols, rows)]) ** 2
    data = np.sqrt(packet.h * np.trapezoid(diff2, y[rows], axis=1))
    return g.x[cols], data / real_data_constant(packet.envelope)


def power_spectrum(samples, spacing: float):
    """Magnitude of the DFT of a real slice; frequencies in cycles per unit length."""
    x = np.asarray(samples, dtype=float)
    if len(x) < 64:
        raise ConfigError("power_spectrum needs at least 64 samples")
    return np.fft.rfftfreq(len(x), spacing), np.abs(np.fft.rfft(x))


def spectral_peak(freqs, mag, near: float, search: float) -> float:
    """Sub-bin location of the largest local maximum within ``near +- search``.

    Parabolic interpolation of log-magnitude over the three bins around it.
    Returns NaN if there is no interior local maximum in the window.
    """
    idx = np.flatnonzero(np.abs(freqs - near) <= search)
    best = None
    for i in idx:
        if 0 < i < len(mag) - 1 and mag[i] >= mag[i - 1] and mag[i] >= mag[i + 1]:
            if best is None or mag[i] > mag[best]:
                best = i
    if best is None:
        return float("nan")
    l, c, r = np.log(mag[best - 1:best + 2] + 1e-300)
    denom = l - 2 * c + r
    shift = 0.5 * (l - r) / denom if denom != 0 else 0.0
    return float(freqs[best] + shift * (freqs[1] - freqs[0]))
