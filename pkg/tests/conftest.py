"""Shared, session-cached simulations.

The expensive runs (fine grids at h = 0.005 and below) are computed once per
session and shared by the unit tests and the acceptance suite.  Fixtures keep
only what the tests read (final snapshots or scalars) to bound memory.
"""
import math
import time

import numpy as np
import pytest

from nlprobe import AlphaDescriptor, Envelope, Field, GridSpec, SimConfig, WavePacket, run, sample_alpha
from nlprobe import optics, tomo
from nlprobe.wavesolver import energy

H = 0.005
N_FINE = 1601  # dx = 0.00125 = h/4 on [-1, 1]
TIMES = {}


def gaussian_xray(z, ax=0.2, ay=0.1, amplitude=1.0):
    """Vertical-line integral of amplitude*exp(-(x/ax)^2 - (y/ay)^2)."""
    return amplitude * ay * math.sqrt(math.pi) * np.exp(-(np.asarray(z) / ax) ** 2)


def _timed(name, fn):
    t0 = time.perf_counter()
    out = fn()
    TIMES[name] = time.perf_counter() - t0
    return out


class Bundle(dict):
    __getattr__ = dict.__getitem__


@pytest.fixture(scope="session")
def fine_grid():
    return GridSpec.square(N_FINE)


@pytest.fixture(scope="session")
def gauss_fine(fine_grid):
    return sample_alpha(AlphaDescriptor(), fine_grid)


@pytest.fixture(scope="session")
def zero_fine(fine_grid):
    return Field(fine_grid, np.zeros(fine_grid.shape))


@pytest.fixture(scope="session")
def k1_run(fine_grid, gauss_fine, zero_fine):
    """K = 1, h = 0.005 nonlinear and free runs; energy sampled at five times."""
    pk = WavePacket(H)
    sc = SimConfig(fine_grid, snapshot_times=(0.0, 0.25, 0.5, 0.75, 1.0))

    def go():
        nl = run(sc, pk, gauss_fine)
        lin = run(sc, pk, zero_fine)
        return nl, lin

    nl, lin = _timed("k1_pair", go)
    E = [energy(s) for s in nl]
    return Bundle(packet=pk, config=sc, alpha=gauss_fine, u0=nl[0], u=nl[-1], lin0=lin[0],
                  lin=lin[-1], E=E, E0=E[0], E1=E[-1], seconds=TIMES["k1_pair"])


@pytest.fixture(scope="session")
def k5_run(fine_grid, gauss_fine, k1_run):
    """K = 5 at h = 0.005; the free run is 5x the K = 1 one (the scheme is linear)."""
    pk = WavePacket(H, envelope=Envelope(K=5.0))
    sc = SimConfig(fine_grid)
    u = _timed("k5", lambda: run(sc, pk, gauss_fine, keep_prev=False)[-1])
    return Bundle(packet=pk, u=u, lin=5.0 * k1_run.lin.u)


@pytest.fixture(scope="session")
def noisy_run(fine_grid, gauss_fine, zero_fine):
    """10% uniform noise on the initial data, applied identically to both runs."""
    pk = WavePacket(H)
    sc = SimConfig(fine_grid, noise_level=0.1, seed=20240611)

    def go():
        return (run(sc, pk, gauss_fine, keep_prev=False)[-1],
                run(sc, pk, zero_fine, keep_prev=False)[-1])

    u, ul = _timed("noisy_pair", go)
    return Bundle(packet=pk, u=u, lin=ul)


@pytest.fixture(scope="session")
def convergence_errors(k1_run):
    """sup |h^{1/2}(u - u~)| at t = 1 for h = 0.01, 0.005, 0.0025 (dx = h/4)."""
    out = {}

    def one(h):
        g = GridSpec.square(int(round(8 / h)) + 1)
        al = sample_alpha(AlphaDescriptor(), g)
        pk = WavePacket(h)
        sc = SimConfig(g)
        u = run(sc, pk, al, keep_prev=False)[-1]
        ul = run(sc, pk, Field(g, np.zeros(g.shape)), keep_prev=False)[-1]
        return optics.parametrix_error(u.u, ul.u, pk, al, u.t)

    out[0.01] = one(0.01)
    out[H] = optics.parametrix_error(k1_run.u.u, k1_run.lin.u, k1_run.packet, k1_run.alpha, 1.0)
    out[0.0025] = _timed("h0.0025_pair", lambda: one(0.0025))
    return out


@pytest.fixture(scope="session")
def tomo_run():
    """Desk-scale acquisition: 400 x 400, h = 0.005, K = 1, 60 angles."""
    g = GridSpec.square(400)
    al = sample_alpha(AlphaDescriptor(), g)
    pk = WavePacket(H)
    sc = SimConfig(g, allow_coarse=True)
    angles = [3.0 * i for i in range(60)]
    sino = _timed("tomography", lambda: tomo.acquire_sinogram(al, pk, sc, angles, jobs=1))
    return Bundle(alpha=al, sino=sino, seconds=TIMES["tomography"])


@pytest.fixture(scope="session")
def real_small_run(fine_grid, zero_fine):
    """Real probe through 0.1 * Gaussian, K = 1, h = 0.005."""
    al = sample_alpha(AlphaDescriptor(amplitude=0.1), fine_grid)
    pk = WavePacket(H, field_kind="real")
    sc = SimConfig(fine_grid)

    def go():
        return (run(sc, pk, al, keep_prev=False)[-1], run(sc, pk, zero_fine, keep_prev=False)[-1])

    u, ul = _timed("real_small_pair", go)
    return Bundle(packet=pk, alpha=al, u=u, lin=ul)


@pytest.fixture(scope="session")
def real_k5_slices():
    """Real probe, K = 5, h = 0.01 on dx = h/8: vertical slices through x = 0."""
    g = GridSpec.square(1601)
    al = sample_alpha(AlphaDescriptor(), g)
    pk = WavePacket(0.01, envelope=Envelope(K=5.0), field_kind="real")
    sc = SimConfig(g)
    i, _ = g.index_of(0.0, 0.0)

    def go():
        u = run(sc, pk, al, keep_prev=False)[-1].u[i, :].copy()
        ul = run(sc, pk, Field(g, np.zeros(g.shape)), keep_prev=False)[-1].u[i, :].copy()
        return u, ul

    u, ul = _timed("real_k5_pair", go)
    return Bundle(h=0.01, dy=g.dy, u=u, lin=ul)


# --- acceptance report ------------------------------------------------------------

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
