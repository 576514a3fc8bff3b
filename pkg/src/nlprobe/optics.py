"""Weakly nonlinear geometric optics: parametrix, phase shifts and Data profiles."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy import integrate
from scipy.integrate import cumulative_trapezoid

from .errors import (AmbiguousBranchError, DegenerateAmplitudeError, UnsupportedGeometryError)
from .fields import Field, GridSpec
from .phantoms import MASK_LEVEL, envelope_power_integral, sample_envelope
from .wavesolver import WavePacket

# Envelope level defining the beam core used for peak statistics.
CORE_LEVEL = 0.1
# Envelope level bounding the Data integration band.  The outer tail carries
# little phase but all of the noise (the relative noise on the phase grows
# like 1/chi), so integrating it buys nothing.
DATA_LEVEL = 0.3
_CHUNK = 2_000_000


# --- line integrals -----------------------------------------------------------

def _ray_box(grid: GridSpec, x, omega):
    """Parameter interval where x + s*omega lies in the grid box (or None)."""
    lo, hi = -np.inf, np.inf
    for p, d, a, b in ((x[0], omega[0], grid.xmin, grid.xmax), (x[1], omega[1], grid.ymin, grid.ymax)):
        if d == 0:
            if not a <= p <= b:
                return None
            continue
        s1, s2 = (a - p) / d, (b - p) / d
        lo, hi = max(lo, min(s1, s2)), min(hi, max(s1, s2))
    return (lo, hi) if hi > lo else None


def _sample(alpha: Field, px, py):
    ci, cj = alpha.grid.to_index(px, py)
    return ndimage.map_coordinates(alpha.values, [ci, cj], order=1, mode="constant", cval=0.0,
                                   prefilter=False)


def partial_xray(alpha: Field, omega, x, t_upper: float = np.inf) -> float:
    """``int_{-inf}^{t_upper} alpha(x + s omega) ds``.

    Composite trapezoid with step at most dx/2 from the point where the line
    enters the grid; alpha is bilinear inside the grid and zero outside.
    """
    omega = np.asarray(omega, dtype=float)
    seg = _ray_box(alpha.grid, np.asarray(x, dtype=float), omega)
    if seg is None:
        return 0.0
    s_in, s_out = seg
    upper = min(t_upper, s_out)
    if upper <= s_in:
        return 0.0
    ds = 0.5 * min(alpha.grid.dx, alpha.grid.dy)
    n = max(1, int(math.ceil((upper - s_in) / ds)))
    s = np.linspace(s_in, upper, n + 1)
    vals = _sample(alpha, x[0] + s * omega[0], x[1] + s * omega[1])
    return float(np.trapezoid(vals, s))


def _axis_aligned(omega):
    ox, oy = float(omega[0]), float(omega[1])
    if abs(ox) < 1e-15 and abs(abs(oy) - 1) < 1e-15:
        return 1, int(np.sign(oy))
    if abs(oy) < 1e-15 and abs(abs(ox) - 1) < 1e-15:
        return 0, int(np.sign(ox))
    return None


def partial_xray_field(alpha: Field, omega, t: float = 0.0) -> np.ndarray:
    """Integral of alpha along the ray behind every node.

    Returns ``P[x] = int_{-inf}^{0} alpha(x + s omega) ds`` for finite ``t``
    (the ray through x at time t entered at x - t*omega, so the elapsed
    integral does not depend on t) and the full X-ray transform through x
    for ``t = inf``.  Axis-aligned directions use a cumulative trapezoid on
    the nodes, which equals the dx/2 bilinear rule exactly; other directions
    fall back to sampling each ray.
    """
    g = alpha.grid
    full = np.isinf(t) and t > 0
    aligned = _axis_aligned(omega)
    if aligned is not None:
        axis, sign = aligned
        a = alpha.values if sign > 0 else np.flip(alpha.values, axis=axis)
        step = g.dx if axis == 0 else g.dy
        P = cumulative_trapezoid(a, dx=step, axis=axis, initial=0.0)
        if full:
            tot = np.take(P, [-1], axis=axis)
            P = np.broadcast_to(tot, P.shape).copy()
        return P if sign > 0 else np.flip(P, axis=axis)

    omega = np.asarray(omega, dtype=float)
    X, Y = g.mesh()
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    diam = math.hypot(g.xmax - g.xmin, g.ymax - g.ymin)
    ds = 0.5 * min(g.dx, g.dy)
    upper = diam if full else 0.0
    s = np.linspace(-diam, upper, int(math.ceil((upper + diam) / ds)) + 1)
    out = np.empty(len(pts))
    chunk = max(1, _CHUNK // len(s))
    for k in range(0, len(pts), chunk):
        p = pts[k:k + chunk]
        px = p[:, :1] + s[None, :] * omega[0]
        py = p[:, 1:] + s[None, :] * omega[1]
        out[k:k + chunk] = np.trapezoid(_sample(alpha, px, py), s, axis=1)
    return out.reshape(g.shape)


# --- parametrix ---------------------------------------------------------------

def parametrix(packet: WavePacket, alpha: Field, t: float, linear: Optional[np.ndarray] = None):
    """Leading-order approximate solution at time t.

    ``h^{-1/2} chi(s) exp(i(s/h - chi(s)^2 P / 2))`` with ``s = -t + x.omega - c0``
    and P the alpha-integral behind each node.  If ``linear`` (the free wave
    propagated by the same discrete scheme) is given, it replaces the
    closed-form free packet ``h^{-1/2} chi e^{is/h}`` and supplies the local
    amplitude, so grid dispersion cancels out of comparisons with the solver.
    """
    if not packet.is_complex:
        raise UnsupportedGeometryError("the parametrix is defined for complex probes only")
    P = partial_xray_field(alpha, packet.omega, t)
    g = alpha.grid
    if linear is None:
        s = packet.phase_coordinate(g, t)
        chi = packet.envelope(s)
        return packet.h ** -0.5 * chi * np.exp(1j * (s / packet.h - 0.5 * chi ** 2 * P))
    A2 = packet.h * np.abs(linear) ** 2
    return linear * np.exp(-0.5j * A2 * P)


def transport_residual(alpha: Field, omega, x0, A: float, length: float) -> float:
    """Sup-norm of ``2 a' + i alpha |a|^2 a`` for the closed-form amplitude along a ray.

    The amplitude ``A exp(-i A^2/2 int alpha)`` is sampled at step dx/2 from
    ``x0`` over ``length`` and differentiated with centred differences.
    """
    omega = np.asarray(omega, dtype=float)
    ds = 0.5 * min(alpha.grid.dx, alpha.grid.dy)
    s = np.arange(0.0, length + 0.5 * ds, ds)
    al = _sample(alpha, x0[0] + s * omega[0], x0[1] + s * omega[1])
    base = partial_xray(alpha, omega, x0, 0.0)
    integ = base + cumulative_trapezoid(al, s, initial=0.0)
    a0 = A * np.exp(-0.5j * A * A * integ)
    da = (a0[2:] - a0[:-2]) / (2 * ds)
    res = 2 * da + 1j * al[1:-1] * np.abs(a0[1:-1]) ** 2 * a0[1:-1]
    return float(np.max(np.abs(res)))


# --- phase extraction ---------------------------------------------------------

@dataclass
class PhaseMap:
    """Principal-branch phase shift on the beam mask (NaN elsewhere)."""

    grid: GridSpec
    values: np.ndarray
    mask: np.ndarray


def beam_mask(packet: WavePacket, grid: GridSpec, T: float, level: float = MASK_LEVEL) -> np.ndarray:
    """Interior nodes where the closed-form envelope exceeds ``level * K``."""
    m = packet.envelope_at(grid, T) > level * packet.envelope.K
    m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = False
    return m


def extract_phase(u_T, packet: WavePacket, T: float, reference=None,
                  level: float = MASK_LEVEL) -> PhaseMap:
    """Phase of the measured wave relative to the free carrier.

    Without ``reference`` the carrier is the closed-form
    ``h^{1/2} e^{i(T - x.omega + c0)/h}``.  With a reference field (free wave
    run on the same grid) the phase is ``arg(u conj(u_ref))``.
    """
    f = u_T if isinstance(u_T, Field) else None
    if f is None:
        raise TypeError("extract_phase needs a Field")
    g = f.grid
    mask = beam_mask(packet, g, T, level)
    u = f.values
    if np.any(np.abs(u[mask]) < 1e-14):
        raise DegenerateAmplitudeError("measured amplitude vanishes inside the beam mask")
    if reference is None:
        s = packet.phase_coordinate(g, T)
        z = math.sqrt(packet.h) * np.exp(-1j * s / packet.h) * u
    else:
        ref = np.asarray(reference.values if isinstance(reference, Field) else reference)
        if np.any(np.abs(ref[mask]) < 1e-14):
            raise DegenerateAmplitudeError("reference amplitude vanishes inside the beam mask")
        z = u * np.conj(ref)
    vals = np.full(g.shape, np.nan)
    vals[mask] = np.angle(z[mask])
    return PhaseMap(g, vals, mask)


def unwrap_profile(profile: Sequence[float], anchor: int = 0) -> np.ndarray:
    """Continuous branch of a wrapped 1D phase, pinned at ``anchor``.

    Walks outwards from the anchor in both directions, shifting by 2*pi*g
    whenever consecutive samples jump by more than pi.
    """
    p = np.asarray(profile, dtype=float)
    n = len(p)
    if n == 0:
        return p.copy()
    if not 0 <= anchor < n:
        raise IndexError(f"anchor {anchor} outside profile of length {n}")
    out = np.empty(n)
    out[anchor] = p[anchor]
    for direction in (1, -1):
        offset = 0.0
        i = anchor + direction
        while 0 <= i < n:
            d = p[i] - p[i - direction]
            if abs(abs(d) - math.pi) < 1e-9:
                raise AmbiguousBranchError(f"jump of exactly pi between samples {i - direction} and {i}")
            if abs(d) > math.pi:
                offset -= 2 * math.pi * round(d / (2 * math.pi))
            out[i] = p[i] + offset
            i += direction
    return out


def phase_peak(pm: PhaseMap, packet: WavePacket, T: float, core_level: float = CORE_LEVEL) -> float:
    """Signed phase of largest magnitude inside the beam core (chi > core_level K)."""
    core = pm.mask & beam_mask(packet, pm.grid, T, core_level)
    vals = pm.values[core]
    return float(vals[np.argmax(np.abs(vals))])


def relative_shift(phase_max: float) -> float:
    """Relative displacement of carrier zeros: phase / (2 pi).

    Negative values mean the wave runs ahead of the free carrier.
    """
    return phase_max / (2 * math.pi)


@dataclass
class DataProfile:
    """Phase integrated along the beam, per transverse offset z.

    ``values / C`` estimates the X-ray transform (with the sign of the phase;
    the nonlinearity retards the phase, so ``-values / C`` is X alpha).
    """

    z: np.ndarray
    values: np.ndarray
    C: float

    @property
    def xray_estimate(self) -> np.ndarray:
        return -self.values / self.C


def calibration_constant(packet: WavePacket, level: float = 0.0) -> float:
    """``C = (1/2) int chi^2 ds`` for the envelope chi with chi(0) = K.

    With ``level > 0`` the integral is restricted to ``{chi > level * K}``,
    matching a Data profile integrated over that band only.
    """
    env = packet.envelope
    if level <= 0:
        return 0.5 * envelope_power_integral(env, 2)
    a = env.mask_halfwidth(level)
    val, _ = integrate.quad(lambda s: sample_envelope(env, s) ** 2, -a, a, epsabs=1e-14, epsrel=1e-12)
    return 0.5 * val


def integrated_data(u_T: Field, u_lin_T, packet: WavePacket, T: float,
                    half_width: float = 0.5, level: float = DATA_LEVEL) -> DataProfile:
    """Data(z): unwrapped phase shift integrated along the beam at offset z.

    ``u_lin_T`` is the free reference (Field/array), or None for the closed
    form.  The band is ``{chi > level * K}`` and C is taken over the same
    band.  Each column is unwrapped from the leading edge of the band, where
    the wave has not yet met any shift, then integrated with the plain
    trapezoid.  Columns with an empty mask give NaN.
    """
    if _axis_aligned(packet.omega) != (1, 1):
        raise UnsupportedGeometryError("integrated_data expects omega = (0, 1); rotate alpha instead")
    pm = extract_phase(u_T, packet, T, reference=u_lin_T, level=level)
    g = pm.grid
    y = g.y
    cols = np.flatnonzero(np.abs(g.x) <= half_width + 1e-12)
    vals = np.full(len(cols), np.nan)
    for k, i in enumerate(cols):
        rows = np.flatnonzero(pm.mask[i])
        if len(rows) < 2:
            continue
        seg = unwrap_profile(pm.values[i, rows], anchor=len(rows) - 1)
        vals[k] = np.trapezoid(seg, y[rows])
    return DataProfile(g.x[cols], vals, calibration_constant(packet, level))


@dataclass
class ModulusStats:
    max: float
    mean: float


def modulus_check(u_nl, u_lin, mask) -> ModulusStats:
    """Relative deviation ``||u_nl| - |u_lin|| / |u_lin|`` over ``mask``."""
    a = np.abs(np.asarray(u_nl))[mask]
    b = np.abs(np.asarray(u_lin))[mask]
    dev = np.abs(a - b) / b
    return ModulusStats(float(dev.max()), float(dev.mean()))


def fit_order(hs, errors):
    """Least-squares fit of ``errors ~ C h^p`` in log-log; returns (p, C)."""
    p, logc = np.polyfit(np.log(hs), np.log(errors), 1)
    return float(p), float(np.exp(logc))


def parametrix_error(u_T, u_lin_T, packet: WavePacket, alpha: Field, t: float) -> float:
    """``sup |h^{1/2} (u - u~)|`` with u~ built on the discrete free wave."""
    u = u_T.values if isinstance(u_T, Field) else np.asarray(u_T)
    ul = u_lin_T.values if isinstance(u_lin_T, Field) else np.asarray(u_lin_T)
    approx = parametrix(packet, alpha, t, linear=ul)
    return float(np.max(np.abs(u - approx)) * math.sqrt(packet.h))
