"""Sinograms from phase-shift data and filtered backprojection.

Geometry: the row for angle theta holds line integrals of alpha along the
direction ``d = (sin theta, cos theta)`` at signed offset ``z`` along
``n = (cos theta, -sin theta)``.  This is what a vertical probe measures after
``alpha`` is rotated counter-clockwise by theta (see ``phantoms.rotate_field``),
so at 0 degrees the rows are vertical-line integrals indexed by x.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import FormatError, InsufficientDataError, NlprobeError
from .fields import Field, GridSpec
from .optics import integrated_data
from .phantoms import rotate_field
from .wavesolver import SimConfig, WavePacket, run

log = logging.getLogger(__name__)


@dataclass
class Sinogram:
    angles: np.ndarray   # degrees, increasing, in [0, 180)
    offsets: np.ndarray  # z, uniform and symmetric about 0
    values: np.ndarray   # (n_angles, n_offsets) X-ray estimates
    center: tuple = (0.0, 0.0)  # rotation centre the offsets refer to

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        self.offsets = np.asarray(self.offsets, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.angles), len(self.offsets)):
            raise FormatError(f"sinogram shape {self.values.shape} does not match "
                              f"{len(self.angles)} angles x {len(self.offsets)} offsets")
        if len(self.angles) > 1 and np.any(np.diff(self.angles) <= 0):
            raise FormatError("sinogram angles must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise FormatError("sinogram has non-finite entries")


def line_geometry(angle: float):
    th = math.radians(angle)
    return np.array([math.cos(th), -math.sin(th)]), np.array([math.sin(th), math.cos(th)])


def xray_transform(alpha: Field, angle: float, offsets) -> np.ndarray:
    """Line integrals of alpha at the given offsets (trapezoid, step dx/2, bilinear)."""
    g = alpha.grid
    n, d = line_geometry(angle)
    xc, yc = g.center
    offsets = np.asarray(offsets, dtype=float)
    half = 0.5 * math.hypot(g.xmax - g.xmin, g.ymax - g.ymin)
    ds = 0.5 * min(g.dx, g.dy)
    s = np.linspace(-half, half, int(math.ceil(2 * half / ds)) + 1)
    px = xc + offsets[:, None] * n[0] + s[None, :] * d[0]
    py = yc + offsets[:, None] * n[1] + s[None, :] * d[1]
    ci, cj = g.to_index(px, py)
    vals = ndimage.map_coordinates(alpha.values, [ci, cj], order=1, mode="constant", cval=0.0,
                                   prefilter=False)
    return np.trapezoid(vals, s, axis=1)


def analytic_sinogram(alpha: Field, angles, offsets) -> Sinogram:
    rows = np.array([xray_transform(alpha, a, offsets) for a in angles])
    return Sinogram(angles, offsets, rows, center=alpha.grid.center)


# --- acquisition ---------------------------------------------------------------

def _one_angle(args):
    alpha, packet, config, angle, u_lin, half_width = args
    rotated = rotate_field(alpha, angle)
    snap = run(config, packet, rotated, keep_prev=False)[-1]
    prof = integrated_data(snap.field(), u_lin, packet, snap.t, half_width=half_width)
    return prof


def acquire_sinogram(alpha: Field, packet: WavePacket, config: SimConfig, angles: Sequence[float],
                     jobs: int = 1, half_width: float = 0.5, reference: str = "simulated") -> Sinogram:
    """Simulate one vertical probe per angle and stack the calibrated Data rows.

    The free reference run does not depend on the angle, so it is computed
    once.  ``reference='closed_form'`` uses the analytic carrier instead.
    Rows hold ``-Data/C``; offsets with an empty beam mask are filled by
    linear interpolation along z.
    """
    if not _is_vertical(packet.omega):
        raise NlprobeError("acquisition requires a vertically propagating packet")
    angles = [float(a) for a in angles]
    if any(not 0 <= a < 180 for a in angles):
        raise NlprobeError("acquisition angles must lie in [0, 180)")
    config = replace(config, snapshot_times=(config.t_final,))
    u_lin = None
    if reference == "simulated":
        zero = Field(alpha.grid, np.zeros(alpha.grid.shape))
        u_lin = run(config, packet, zero, keep_prev=False)[-1].u
    jobs_args = [(alpha, packet, config, a, u_lin, half_width) for a in angles]
    profiles = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_one_angle, a) for a in jobs_args]
            for a, fut in zip(angles, futures):
                try:
                    profiles.append(fut.result())
                except NlprobeError as exc:
                    raise type(exc)(f"angle {a:g} deg: {exc}") from exc
    else:
        for a, args in zip(angles, jobs_args):
            log.info("acquiring angle %g", a)
            try:
                profiles.append(_one_angle(args))
            except NlprobeError as exc:
                raise type(exc)(f"angle {a:g} deg: {exc}") from exc
    z = profiles[0].z
    rows = []
    for p in profiles:
        est = p.xray_estimate
        ok = np.isfinite(est)
        if not ok.all():
            est = np.interp(z, z[ok], est[ok])
        rows.append(est)
    return Sinogram(angles, z, np.array(rows), center=alpha.grid.center)


def _is_vertical(omega) -> bool:
    return abs(omega[0]) < 1e-15 and abs(omega[1] - 1) < 1e-15


# --- reconstruction ------------------------------------------------------------

def ramp_filter(n_pad: int, spacing: float, window: str = "ram_lak_hann") -> np.ndarray:
    """Frequency response of the band-limited ramp filter on ``n_pad`` samples.

    Built as the DFT of the spatial Ram-Lak kernel (1/(4 tau^2) at 0,
    -1/(pi n tau)^2 at odd n), which avoids the DC offset of a sampled |f|.
    """
    n = np.rint(np.fft.fftfreq(n_pad, d=1.0 / n_pad)).astype(int)
    kernel = np.zeros(n_pad)
    kernel[0] = 0.25 / spacing ** 2
    odd = n % 2 == 1
    kernel[odd] = -1.0 / (math.pi * n[odd] * spacing) ** 2
    H = np.real(np.fft.fft(kernel)) * spacing
    if window == "ram_lak_hann":
        f = np.fft.fftfreq(n_pad)  # cycles per sample, |f| <= 1/2
        H = H * 0.5 * (1 + np.cos(2 * math.pi * f))
    elif window != "ram_lak":
        raise ValueError(f"unknown filter {window!r}")
    return H


def filter_rows(sino: Sinogram, window: str = "ram_lak_hann") -> np.ndarray:
    nz = len(sino.offsets)
    dz = sino.offsets[1] - sino.offsets[0]
    n_pad = 1 << int(math.ceil(math.log2(2 * nz)))
    H = ramp_filter(n_pad, dz, window)
    F = np.fft.fft(sino.values, n=n_pad, axis=1)
    return np.real(np.fft.ifft(F * H[None, :], axis=1))[:, :nz]


def fbp(sino: Sinogram, filter: str = "ram_lak_hann", out_grid: Optional[GridSpec] = None) -> Field:
    """Filtered backprojection onto ``out_grid`` (default: square over the offsets)."""
    if len(sino.angles) < 2:
        raise InsufficientDataError("filtered backprojection needs at least 2 angles")
    z = sino.offsets
    dz = np.diff(z)
    if len(z) < 2 or np.max(np.abs(dz - dz[0])) > 1e-9 * max(1.0, abs(dz[0])):
        raise FormatError("sinogram offsets must be uniformly spaced")
    if out_grid is None:
        xc, yc = sino.center
        r = float(z[-1])
        out_grid = GridSpec(len(z), len(z), xc - r, xc + r, yc - r, yc + r)
    q = filter_rows(sino, filter)
    X, Y = out_grid.mesh()
    xc, yc = sino.center
    recon = np.zeros(out_grid.shape)
    for a, row in zip(sino.angles, q):
        n, _ = line_geometry(a)
        t = (X - xc) * n[0] + (Y - yc) * n[1]
        recon += np.interp(t, z, row, left=0.0, right=0.0)
    recon *= math.pi / len(sino.angles)
    return Field(out_grid, recon)


def normalized_cross_correlation(a, b) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    a = a - a.mean()
    b = b - b.mean()
    return float(a @ b / math.sqrt((a @ a) * (b @ b)))
