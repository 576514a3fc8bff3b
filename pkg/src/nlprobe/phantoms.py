"""Nonlinearity coefficients alpha(x), probe envelopes and field rotation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, ndimage

from .errors import InvalidDescriptorError, UnsupportedGeometryError
from .fields import Field, GridSpec

# Effective support of the Gaussian envelope, in widths: chi/K < 2e-11 beyond.
SUPPORT_WIDTHS = 5.0
# Relative envelope level below which samples count as "outside the beam".
MASK_LEVEL = 1e-3

# Modified Shepp-Logan (Toft): intensity, semi-axes a, b, centre x0, y0, tilt (deg).
TOFT_ELLIPSES = (
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
)


@dataclass(frozen=True)
class AlphaDescriptor:
    """Recipe for a nonnegative nonlinearity coefficient.

    ``kind`` is one of ``gaussian`` (``amplitude * exp(-(x/ax)^2 - (y/ay)^2)``),
    ``shepp_logan`` (Toft phantom squeezed into [-0.5, 0.5]^2, peak
    ``amplitude``, blurred with a Gaussian of width ``blur_sigma``) or
    ``from_file`` (a GRD1 real field at ``path``, resampled bilinearly).
    """

    kind: str = "gaussian"
    ax: float = 0.2
    ay: float = 0.1
    amplitude: float = 1.0
    blur_sigma: float = 0.01
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "shepp_logan", "from_file"):
            raise InvalidDescriptorError(f"unknown phantom kind {self.kind!r}")
        if not (self.amplitude >= 0 and math.isfinite(self.amplitude)):
            raise InvalidDescriptorError("phantom amplitude must be finite and >= 0")
        if self.kind == "gaussian" and not (self.ax > 0 and self.ay > 0):
            raise InvalidDescriptorError("gaussian axes ax, ay must be > 0")
        if self.kind == "shepp_logan" and not self.blur_sigma > 0:
            raise InvalidDescriptorError("blur_sigma must be > 0")
        if self.kind == "from_file" and not self.path:
            raise InvalidDescriptorError("from_file phantom needs a path")


@dataclass(frozen=True)
class Envelope:
    """Gaussian beam profile ``chi(s) = K exp(-(s/w)^2)``."""

    K: float = 1.0
    width: float = 0.14

    def __post_init__(self):
        if not (self.K > 0 and self.width > 0):
            raise InvalidDescriptorError("envelope needs K > 0 and width > 0")

    @property
    def support(self) -> float:
        """Effective support half-width delta."""
        return SUPPORT_WIDTHS * self.width

    def mask_halfwidth(self, level: float = MASK_LEVEL) -> float:
        """Half-width of ``{chi > level * K}``."""
        return self.width * math.sqrt(math.log(1.0 / level))

    def __call__(self, s):
        return sample_envelope(self, s)


def sample_envelope(env: Envelope, s):
    s = np.asarray(s, dtype=float)
    out = env.K * np.exp(-((s / env.width) ** 2))
    return float(out) if out.ndim == 0 else out


def envelope_power_integral(env: Envelope, power: int = 2) -> float:
    """``int chi(s)^power ds`` over the real line, by adaptive quadrature."""
    val, _ = integrate.quad(lambda s: sample_envelope(env, s) ** power, -np.inf, np.inf,
                            epsabs=1e-14, epsrel=1e-12)
    return val


def _gaussian(desc: AlphaDescriptor, X, Y):
    return desc.amplitude * np.exp(-((X / desc.ax) ** 2) - (Y / desc.ay) ** 2)


def shepp_logan_raster(X, Y, scale: float = 0.5) -> np.ndarray:
    """Toft ellipse table rasterised at points (X, Y), unit square scaled by ``scale``."""
    out = np.zeros(np.shape(X))
    for rho, a, b, x0, y0, tilt in TOFT_ELLIPSES:
        th = math.radians(tilt)
        xr = (X / scale - x0) * math.cos(th) + (Y / scale - y0) * math.sin(th)
        yr = -(X / scale - x0) * math.sin(th) + (Y / scale - y0) * math.cos(th)
        out[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += rho
    return np.clip(out, 0.0, None)


def sample_alpha(desc: AlphaDescriptor, grid: GridSpec) -> Field:
    X, Y = grid.mesh()
    if desc.kind == "gaussian":
        vals = _gaussian(desc, X, Y)
    elif desc.kind == "shepp_logan":
        raw = shepp_logan_raster(X, Y)
        sig = (desc.blur_sigma / grid.dx, desc.blur_sigma / grid.dy)
        vals = ndimage.gaussian_filter(raw, sig, mode="constant", truncate=4.0)
        peak = vals.max()
        vals = desc.amplitude * vals / peak if peak > 0 else vals
        vals = np.clip(vals, 0.0, None)
    else:
        from .gridio import read_grd1

        src = read_grd1(desc.path)
        if src.is_complex:
            raise InvalidDescriptorError(f"{desc.path}: phantom file must be real")
        vals = desc.amplitude * resample(src, grid).values
        if np.any(vals < 0):
            raise InvalidDescriptorError(f"{desc.path}: phantom has negative samples")
    return Field(grid, np.ascontiguousarray(vals, dtype=float))


def resample(f: Field, grid: GridSpec) -> Field:
    """Bilinear resampling onto another grid, zero outside the source domain."""
    if f.grid == grid:
        return f
    X, Y = grid.mesh()
    ci, cj = f.grid.to_index(X, Y)
    vals = ndimage.map_coordinates(f.values, [ci, cj], order=1, mode="constant", cval=0.0)
    return Field(grid, vals)


def rotate_field(f: Field, angle: float) -> Field:
    """Rotate ``f`` counter-clockwise by ``angle`` degrees about the domain centre.

    The result samples ``f(R(-angle) x)`` bilinearly; points whose preimage
    lies outside the source domain are zero.
    """
    g = f.grid
    if not g.is_square:
        raise UnsupportedGeometryError("rotate_field needs a square domain")
    if angle % 360.0 == 0.0:
        return Field(g, f.values.copy())
    X, Y = g.mesh()
    xc, yc = g.center
    th = math.radians(angle)
    c, s = math.cos(th), math.sin(th)
    # preimage under the rotation
    xs = xc + c * (X - xc) + s * (Y - yc)
    ys = yc - s * (X - xc) + c * (Y - yc)
    ci, cj = g.to_index(xs, ys)
    vals = ndimage.map_coordinates(f.values, [ci, cj], order=1, mode="constant", cval=0.0,
                                   prefilter=False)
    return Field(g, vals)
