"""Explicit leapfrog solver for u_tt - Lap u + alpha |u|^2 u = 0 on a 2D grid.

Complex probes carry the nonlinearity ``alpha |u|^2 u``; real probes the
``alpha u^3`` form (identical for real u).  Boundary nodes are held at zero.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numba
import numpy as np

from . import rng
from .errors import ConfigError, DivergenceError, SetupError
from .fields import Field, GridSpec
from .phantoms import MASK_LEVEL, Envelope

log = logging.getLogger(__name__)

MAX_CFL = 0.7
# Relative nonlinear phase the packet may have "missed" by starting inside
# the tail of alpha (see make_initial_data).
PRESTART_TOL = 1e-3


@dataclass(frozen=True)
class WavePacket:
    h: float
    envelope: Envelope = field(default_factory=Envelope)
    omega: tuple = (0.0, 1.0)
    c0: float = -0.5
    field_kind: str = "complex"

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigError("packet h must be > 0")
        if abs(math.hypot(*self.omega) - 1.0) > 1e-12:
            raise ConfigError(f"packet direction {self.omega} is not a unit vector")
        if self.field_kind not in ("complex", "real"):
            raise ConfigError(f"field_kind must be 'complex' or 'real', not {self.field_kind!r}")

    @property
    def is_complex(self) -> bool:
        return self.field_kind == "complex"

    def phase_coordinate(self, grid: GridSpec, t: float) -> np.ndarray:
        """``-t + x.omega - c0`` at every node."""
        X, Y = grid.mesh()
        return -t + X * self.omega[0] + Y * self.omega[1] - self.c0

    def envelope_at(self, grid: GridSpec, t: float) -> np.ndarray:
        return self.envelope(self.phase_coordinate(grid, t))

    def free_field(self, grid: GridSpec, t: float) -> np.ndarray:
        """The incoming wave evaluated at time t (exact free solution)."""
        s = self.phase_coordinate(grid, t)
        amp = self.h ** -0.5 * self.envelope(s)
        if self.is_complex:
            return amp * np.exp(1j * s / self.h)
        return amp * np.cos(s / self.h)


@dataclass(frozen=True)
class SimConfig:
    grid: GridSpec
    cfl: float = 0.5
    t_final: float = 1.0
    snapshot_times: tuple = (1.0,)
    boundary: str = "dirichlet_zero"
    noise_level: float = 0.0
    seed: int = 0
    # dx <= h / min_points_per_h is enforced unless allow_coarse is set
    min_points_per_h: float = 4.0
    allow_coarse: bool = False

    def __post_init__(self):
        if not 0 < self.cfl <= MAX_CFL:
            raise ConfigError(f"cfl must lie in (0, {MAX_CFL}] (got {self.cfl})")
        if not self.t_final > 0:
            raise ConfigError("t_final must be > 0")
        if self.noise_level < 0:
            raise ConfigError("noise_level must be >= 0")
        if self.boundary != "dirichlet_zero":
            raise ConfigError(f"unsupported boundary {self.boundary!r}")
        for t in self.snapshot_times:
            if not 0 <= t <= self.t_final + 1e-12:
                raise ConfigError(f"snapshot time {t} outside [0, t_final]")

    @property
    def spacing(self) -> float:
        return min(self.grid.dx, self.grid.dy)

    def time_grid(self):
        """Number of steps and the step that lands exactly on t_final."""
        nsteps = max(1, int(math.ceil(self.t_final / (self.cfl * self.spacing) - 1e-9)))
        return nsteps, self.t_final / nsteps

    def check_resolution(self, packet: WavePacket) -> None:
        if not self.allow_coarse and self.spacing > packet.h / self.min_points_per_h * (1 + 1e-9):
            raise ConfigError(
                f"grid spacing {self.spacing:.3g} exceeds h/{self.min_points_per_h:g} = "
                f"{packet.h / self.min_points_per_h:.3g}; refine the grid or set allow_coarse")


@dataclass
class WaveState:
    t: float
    u: np.ndarray
    u_prev: np.ndarray
    dt: float
    packet: WavePacket
    alpha: Field
    step_index: int = 0

    @property
    def grid(self) -> GridSpec:
        return self.alpha.grid

    @property
    def u_t(self) -> np.ndarray:
        return (self.u - self.u_prev) / self.dt

    def field(self) -> Field:
        return Field(self.grid, self.u)


# --- kernels ------------------------------------------------------------------

@numba.njit(cache=True)
def _leapfrog_complex(ur, ui, pr, pi, a, cx, cy, dt2, nr, ni):
    nx, ny = ur.shape
    ok = True
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            r = ur[i, j]
            m = ui[i, j]
            lr = cx * (ur[i + 1, j] + ur[i - 1, j] - 2.0 * r) + cy * (ur[i, j + 1] + ur[i, j - 1] - 2.0 * r)
            li = cx * (ui[i + 1, j] + ui[i - 1, j] - 2.0 * m) + cy * (ui[i, j + 1] + ui[i, j - 1] - 2.0 * m)
            q = dt2 * a[i, j] * (r * r + m * m)
            vr = 2.0 * r - pr[i, j] + lr - q * r
            vi = 2.0 * m - pi[i, j] + li - q * m
            nr[i, j] = vr
            ni[i, j] = vi
            if not (abs(vr) < 1e300 and abs(vi) < 1e300):
                ok = False
    return ok


@numba.njit(cache=True)
def _leapfrog_real(u, p, a, cx, cy, dt2, nxt):
    nx, ny = u.shape
    ok = True
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            r = u[i, j]
            lap = cx * (u[i + 1, j] + u[i - 1, j] - 2.0 * r) + cy * (u[i, j + 1] + u[i, j - 1] - 2.0 * r)
            v = 2.0 * r - p[i, j] + lap - dt2 * a[i, j] * r * r * r
            nxt[i, j] = v
            if not abs(v) < 1e300:
                ok = False
    return ok


class _Stepper:
    """Buffer-rotating driver around the kernels; owns its arrays."""

    def __init__(self, state: WaveState, dt: float):
        g = state.grid
        self.cx = (dt / g.dx) ** 2
        self.cy = (dt / g.dy) ** 2
        self.dt2 = dt * dt
        self.a = np.ascontiguousarray(state.alpha.values, dtype=float)
        self.complex = np.iscomplexobj(state.u)
        if self.complex:
            self.cur = [np.ascontiguousarray(state.u.real), np.ascontiguousarray(state.u.imag)]
            self.prev = [np.ascontiguousarray(state.u_prev.real), np.ascontiguousarray(state.u_prev.imag)]
        else:
            self.cur = [np.array(state.u, dtype=float)]
            self.prev = [np.array(state.u_prev, dtype=float)]
        self.nxt = [np.zeros(g.shape) for _ in self.cur]

    def advance(self) -> bool:
        if self.complex:
            ok = _leapfrog_complex(self.cur[0], self.cur[1], self.prev[0], self.prev[1], self.a,
                                   self.cx, self.cy, self.dt2, self.nxt[0], self.nxt[1])
        else:
            ok = _leapfrog_real(self.cur[0], self.prev[0], self.a, self.cx, self.cy, self.dt2,
                                self.nxt[0])
        self.prev, self.cur, self.nxt = self.cur, self.nxt, self.prev
        return ok

    def arrays(self):
        if self.complex:
            return self.cur[0] + 1j * self.cur[1], self.prev[0] + 1j * self.prev[1]
        return self.cur[0].copy(), self.prev[0].copy()


# --- operations ---------------------------------------------------------------

def _zero_boundary(f: np.ndarray) -> np.ndarray:
    f[0, :] = 0
    f[-1, :] = 0
    f[:, 0] = 0
    f[:, -1] = 0
    return f


def make_initial_data(packet: WavePacket, grid: GridSpec, dt: float,
                      alpha: Optional[Field] = None) -> WaveState:
    """Two-level start from the exact incoming wave at t = 0 and t = -dt.

    Raises SetupError when the beam (chi > 1e-3 K across the beam) does not
    fit in the grid along omega, or when the packet already sits inside alpha,
    measured by the nonlinear phase it would have accumulated before t = 0
    relative to the phase accumulated over the whole crossing.
    """
    if alpha is None:
        alpha = Field(grid, np.zeros(grid.shape))
    elif alpha.grid != grid:
        raise SetupError("alpha grid does not match the simulation grid")
    corners = np.array([[grid.xmin, grid.ymin], [grid.xmin, grid.ymax],
                        [grid.xmax, grid.ymin], [grid.xmax, grid.ymax]]) @ np.asarray(packet.omega)
    hw = packet.envelope.mask_halfwidth(MASK_LEVEL)
    if packet.c0 - hw < corners.min() - 1e-12 or packet.c0 + hw > corners.max() + 1e-12:
        raise SetupError(
            f"packet band [{packet.c0 - hw:.3f}, {packet.c0 + hw:.3f}] along omega "
            f"exceeds the grid extent [{corners.min():.3f}, {corners.max():.3f}]")
    if np.any(alpha.values > 0):
        from .optics import partial_xray_field

        behind = partial_xray_field(alpha, packet.omega, t=0.0)
        total = partial_xray_field(alpha, packet.omega, t=np.inf)
        chi2 = (packet.envelope_at(grid, 0.0) / packet.envelope.K) ** 2
        missed = float(np.max(chi2 * behind))
        scale = float(np.max(total))
        if scale > 0 and missed > PRESTART_TOL * scale:
            raise SetupError(
                f"packet overlaps alpha at t=0 (pre-start phase fraction {missed / scale:.2e}); "
                "move c0 further upstream")
    u = _zero_boundary(packet.free_field(grid, 0.0))
    u_prev = _zero_boundary(packet.free_field(grid, -dt))
    return WaveState(0.0, u, u_prev, dt, packet, alpha)


def step(state: WaveState, dt: Optional[float] = None) -> WaveState:
    """Advance one leapfrog step; returns a new state (inputs untouched)."""
    dt = state.dt if dt is None else dt
    g = state.grid
    if dt / min(g.dx, g.dy) > MAX_CFL * (1 + 1e-12):
        raise ConfigError(f"dt={dt:.3g} violates CFL {MAX_CFL} for spacing {min(g.dx, g.dy):.3g}")
    if not math.isclose(dt, state.dt, rel_tol=1e-12):
        raise ConfigError("step dt must match the dt the state was built with")
    stepper = _Stepper(state, dt)
    if not stepper.advance():
        raise DivergenceError(f"non-finite values at step {state.step_index + 1}",
                              step=state.step_index + 1)
    u, u_prev = stepper.arrays()
    return replace(state, t=state.t + dt, u=u, u_prev=u_prev, step_index=state.step_index + 1)


def add_noise(state: WaveState, level: float, seed: int) -> WaveState:
    """Uniform noise of half-width ``level * max|u|`` on both time levels.

    Real and imaginary parts, and the two time levels, draw from separate
    sub-streams of ``seed`` (see :mod:`nlprobe.rng`).  Boundary nodes stay 0.
    """
    if level < 0:
        raise ConfigError("noise level must be >= 0")
    if level == 0:
        return replace(state, u=state.u.copy(), u_prev=state.u_prev.copy())
    amp = level * float(np.max(np.abs(state.u)))
    shape = state.u.shape

    def draw(stream):
        return rng.uniform(rng.stream_key(seed, stream), shape, -amp, amp)

    if np.iscomplexobj(state.u):
        du = draw(0) + 1j * draw(1)
        dp = draw(2) + 1j * draw(3)
    else:
        du, dp = draw(0), draw(2)
    return replace(state, u=_zero_boundary(state.u + du), u_prev=_zero_boundary(state.u_prev + dp))


def energy(state: WaveState) -> float:
    """Discrete energy sum(|u_t|^2/2 + |grad u|^2/2 + alpha |u|^4/4) dx dy."""
    g = state.grid
    u = state.u
    ux, uy = np.gradient(u, g.dx, g.dy)
    au2 = np.abs(u) ** 2
    dens = (0.5 * np.abs(state.u_t) ** 2 + 0.5 * (np.abs(ux) ** 2 + np.abs(uy) ** 2)
            + 0.25 * state.alpha.values * au2 * au2)
    return float(dens.sum() * g.dx * g.dy)


def scheme_energy(state: WaveState) -> float:
    """Energy the leapfrog update conserves exactly when alpha = 0.

    Kinetic part from the backward difference, potential part as the product
    of forward-difference gradients at the two time levels, quartic term
    averaged over them.  Unlike :func:`energy` it weights the jump at a
    Dirichlet wall correctly, so it is the sharper conservation check.
    """
    g = state.grid
    u, p = state.u, state.u_prev
    kin = 0.5 * np.sum(np.abs(state.u_t) ** 2)
    pot = 0.0
    for axis, d in ((0, g.dx), (1, g.dy)):
        pot += 0.5 * np.sum(np.real(np.diff(u, axis=axis) * np.conj(np.diff(p, axis=axis)))) / d ** 2
    quart = 0.125 * np.sum(state.alpha.values * (np.abs(u) ** 4 + np.abs(p) ** 4))
    return float((kin + pot + quart) * g.dx * g.dy)


def run(config: SimConfig, packet: WavePacket, alpha: Field,
        keep_prev: bool = True) -> List[WaveState]:
    """Integrate to ``config.t_final``; return states at the snapshot times.

    Snapshot times are honoured at the nearest step.  ``keep_prev=False``
    skips storing ``u_prev`` (energy then cannot be evaluated on snapshots).
    """
    config.check_resolution(packet)
    if alpha.grid != config.grid:
        raise SetupError("alpha grid does not match config grid")
    nsteps, dt = config.time_grid()
    state = make_initial_data(packet, config.grid, dt, alpha)
    if config.noise_level > 0:
        state = add_noise(state, config.noise_level, config.seed)
    wanted = {}
    for t in config.snapshot_times:
        wanted.setdefault(int(round(t / dt)), []).append(t)
    out = []

    def capture(n, stepper=None):
        if n not in wanted:
            return
        if stepper is None:
            u, up = state.u.copy(), state.u_prev.copy()
        else:
            u, up = stepper.arrays()
        for _ in wanted[n]:
            out.append(replace(state, t=n * dt, u=u, u_prev=up if keep_prev else None,
                               step_index=n))

    capture(0)
    stepper = _Stepper(state, dt)
    log.debug("run: %d steps of dt=%.3g on %dx%d", nsteps, dt, *config.grid.shape)
    for n in range(1, nsteps + 1):
        if not stepper.advance():
            raise DivergenceError(f"non-finite values at step {n} (t={n * dt:.4g})", step=n)
        capture(n, stepper)
    return out


def run_pair(config: SimConfig, packet: WavePacket, alpha: Field):
    """Nonlinear run plus the alpha = 0 reference on the same grid and noise."""
    zero = Field(alpha.grid, np.zeros(alpha.grid.shape))
    return run(config, packet, alpha), run(config, packet, zero)
