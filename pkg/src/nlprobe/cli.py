"""Command-line front end: ``nlprobe <command> --config FILE --out DIR``.

Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
4 I/O or file-format error, 1 anything else.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import gridio, harmonics, optics, tomo
from .config import ExperimentConfig, load_config
from .errors import ConfigError, DivergenceError, NlprobeError
from .fields import Field
from .phantoms import resample, sample_alpha
from .wavesolver import run

log = logging.getLogger("nlprobe")

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_DIVERGENCE, EXIT_IO = 0, 1, 2, 3, 4
MANIFEST = "manifest.json"


def _tag(t: float) -> str:
    return format(t, ".6g").replace(".", "p").replace("-", "m")


def _write_manifest(out: Path, command: str, cfg_path, seed, entries, extra=None):
    with open(cfg_path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    doc = {"command": command, "config_sha256": digest, "seed": seed, "files": entries}
    if extra:
        doc.update(extra)
    with open(out / MANIFEST, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _alpha(cfg: ExperimentConfig, grid=None) -> Field:
    return sample_alpha(cfg.alpha_descriptor(), grid or cfg.grid())


# --- commands ----------------------------------------------------------------

def cmd_phantom(cfg, args) -> int:
    alpha = _alpha(cfg)
    path = args.out / "alpha.grd1"
    gridio.write_grd1(path, alpha)
    _write_manifest(args.out, "phantom", args.config, None, [{"path": path.name, "kind": "alpha"}])
    print(path)
    return EXIT_OK


def cmd_simulate(cfg, args) -> int:
    sc = cfg.sim_config(seed=args.seed)
    packet = cfg.packet()
    alpha = _alpha(cfg, sc.grid)
    states = run(sc, packet, alpha, keep_prev=False)
    zero = Field(sc.grid, np.zeros(sc.grid.shape))
    refs = run(sc, packet, zero, keep_prev=False)
    entries = []
    for st, ref in zip(states, refs):
        name, rname = f"u_t{_tag(st.t)}.grd1", f"u_lin_t{_tag(st.t)}.grd1"
        gridio.write_grd1(args.out / name, st.field())
        gridio.write_grd1(args.out / rname, ref.field())
        entries.append({"path": name, "kind": "nonlinear", "t": st.t, "step": st.step_index,
                        "reference": rname})
        entries.append({"path": rname, "kind": "reference", "t": ref.t, "step": ref.step_index})
    _write_manifest(args.out, "simulate", args.config, sc.seed, entries,
                    {"h": packet.h, "dt": sc.time_grid()[1], "nsteps": sc.time_grid()[0]})
    print(args.out / MANIFEST)
    return EXIT_OK


def _lookup_manifest(snapshot: Path):
    mpath = snapshot.parent / MANIFEST
    if not mpath.exists():
        return None
    with open(mpath) as fh:
        doc = json.load(fh)
    for e in doc.get("files", []):
        if e.get("path") == snapshot.name:
            return e
    return None


def write_profile(path, prof: optics.DataProfile) -> None:
    gridio.write_rows(path, [
        ["z", *prof.z],
        ["data", *prof.values],
        ["data_over_C", *(prof.values / prof.C)],
        ["C", *([prof.C] * len(prof.z))],
    ])


def cmd_extract(cfg, args) -> int:
    snap = Path(args.snapshot)
    u = gridio.read_grd1(snap)
    entry = _lookup_manifest(snap) or {}
    T = args.time if args.time is not None else entry.get("t", cfg["solver"]["t_final"])
    ref_path = args.reference or (snap.parent / entry["reference"] if "reference" in entry else None)
    ref = gridio.read_grd1(ref_path).values if ref_path else None
    packet = cfg.packet()
    if u.is_complex:
        prof = optics.integrated_data(u, ref, packet, T, half_width=cfg["acquisition"]["half_width"])
    else:
        if ref is None:
            raise ConfigError("real-probe extraction needs a reference snapshot (--reference)")
        packet = cfg.packet(field_kind="real")
        z, est = harmonics.real_data_extract(u, Field(u.grid, ref), packet, T,
                                             half_width=cfg["acquisition"]["half_width"])
        C = harmonics.real_data_constant(packet.envelope)
        prof = optics.DataProfile(z, est * C, C)
    path = args.out / "profile.csv"
    write_profile(path, prof)
    print(path)
    return EXIT_OK


def write_sinogram(path, sino: tomo.Sinogram) -> None:
    rows = [["angle", *sino.offsets]]
    rows += [[a, *row] for a, row in zip(sino.angles, sino.values)]
    gridio.write_rows(path, rows)


def read_sinogram(path, center=(0.0, 0.0)) -> tomo.Sinogram:
    rows = gridio.read_rows(path)
    try:
        if not rows or rows[0][0] != "angle":
            raise ValueError("missing 'angle' header")
        offsets = [float(v) for v in rows[0][1:]]
        angles = [float(r[0]) for r in rows[1:]]
        values = [[float(v) for v in r[1:]] for r in rows[1:]]
        if any(len(r) != len(offsets) for r in values):
            raise ValueError("ragged rows")
    except (ValueError, IndexError) as exc:
        raise gridio.FormatError(f"{path}: bad sinogram CSV ({exc})") from exc
    return tomo.Sinogram(angles, offsets, np.array(values).reshape(len(angles), len(offsets)),
                         center=center)


def cmd_sinogram(cfg, args) -> int:
    sc = cfg.sim_config(seed=args.seed)
    acq = cfg["acquisition"]
    sino = tomo.acquire_sinogram(_alpha(cfg, sc.grid), cfg.packet(), sc, cfg.angles(),
                                 jobs=args.jobs, half_width=acq["half_width"],
                                 reference=acq["reference"])
    path = args.out / "sinogram.csv"
    write_sinogram(path, sino)
    _write_manifest(args.out, "sinogram", args.config, sc.seed,
                    [{"path": path.name, "kind": "sinogram"}])
    print(path)
    return EXIT_OK


def cmd_reconstruct(cfg, args) -> int:
    grid = cfg.grid()
    sino = read_sinogram(args.sinogram, center=grid.center)
    recon = tomo.fbp(sino, cfg["acquisition"]["filter"])
    path = args.out / "reconstruction.grd1"
    gridio.write_grd1(path, recon)
    truth = resample(_alpha(cfg, grid), recon.grid)
    ncc = tomo.normalized_cross_correlation(recon.values, truth.values)
    _write_manifest(args.out, "reconstruct", args.config, None,
                    [{"path": path.name, "kind": "reconstruction"}], {"ncc_vs_phantom": ncc})
    print(f"{path}  ncc={ncc:.4f}")
    return EXIT_OK


def _harmonics_alpha(hm):
    a = hm["alpha"]
    if hm["alpha_profile"] == "one_plus_sin2":
        return lambda s: a * (1 + np.sin(s) ** 2)
    return a


def cmd_harmonics(cfg, args) -> int:
    hm = cfg["harmonics"]
    alpha = _harmonics_alpha(hm)
    s, traj = harmonics.solve_transport(hm["A"], alpha, hm["kmax"], hm["ds"], hm["S"])
    ks = harmonics.odd_orders(hm["kmax"])
    header = ["s"] + [f"{p}{k}" for k in ks for p in ("re_a", "im_a")] + ["Q", "quartic"]
    rows = [header]
    for si, st in zip(s, traj):
        parts = [v for a in st.amps for v in (a.real, a.imag)]
        rows.append([si, *parts, st.Q, harmonics.quartic_invariant(st.amps, st.kmax)])
    gridio.write_rows(args.out / "trajectory.csv", rows)

    a0 = harmonics.full_sequence(traj[0].amps, hm["kmax"])
    ainf = hm["alpha"] * (2.0 if hm["alpha_profile"] == "one_plus_sin2" else 1.0)
    bounds = harmonics.existence_bounds(ainf, harmonics.l2_norm(a0), harmonics.h_norm(a0))
    report = {"alpha_inf": ainf, "a0_l2": bounds.a0_l2, "a0_h12": bounds.a0_h12, "M": bounds.M,
              "s0": bounds.s0, "contraction": bounds.contraction}
    if ainf > 0 and hm["A"] > 0:
        lb = harmonics.existence_bounds(ainf, harmonics.l2_norm(a0))
        pic = harmonics.picard_solve(hm["A"], alpha, hm["kmax"], lb.s0, lb.M,
                                     iterations=hm["picard_iterations"])
        report["picard"] = {"s0": lb.s0, "M": lb.M, "contraction": lb.contraction,
                            "distances": pic.distances.tolist()}
    with open(args.out / "bounds.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if hm["spectrum_run"]:
        sc = cfg.sim_config(seed=args.seed)
        packet = cfg.packet(field_kind="real")
        st = run(sc, packet, _alpha(cfg, sc.grid), keep_prev=False)[-1]
        i, _ = sc.grid.index_of(hm["spectrum_x"], 0.0)
        f, mag = harmonics.power_spectrum(st.u[i, :], sc.grid.dy)
        gridio.write_rows(args.out / "spectrum.csv", [["frequency", "magnitude"], *zip(f, mag)])
    print(args.out / "bounds.json")
    return EXIT_OK


def cmd_convergence(cfg, args) -> int:
    hs = cfg["solver"]["convergence_h"]
    rows = [["h", "error"]]
    errs = []
    for h in hs:
        sc = cfg.sim_config(h=h, seed=args.seed)
        packet = cfg.packet(h=h)
        alpha = _alpha(cfg, sc.grid)
        u = run(sc, packet, alpha, keep_prev=False)[-1]
        ul = run(sc, packet, Field(sc.grid, np.zeros(sc.grid.shape)), keep_prev=False)[-1]
        e = optics.parametrix_error(u.u, ul.u, packet, alpha, u.t)
        log.info("h=%g error=%.4g", h, e)
        errs.append(e)
        rows.append([h, e])
    path = args.out / "convergence.csv"
    if len(hs) >= 2 and all(e > 0 for e in errs):
        p, C = optics.fit_order(hs, errs)
        rows.append(["order", p])
        rows.append(["constant", C])
        print(f"order p = {p:.3f}")
    gridio.write_rows(path, rows)
    print(path)
    return EXIT_OK


COMMANDS = {
    "phantom": cmd_phantom,
    "simulate": cmd_simulate,
    "extract": cmd_extract,
    "sinogram": cmd_sinogram,
    "reconstruct": cmd_reconstruct,
    "harmonics": cmd_harmonics,
    "convergence": cmd_convergence,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config file")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--seed", type=int, default=None, help="64-bit seed (overrides [solver] seed)")
    common.add_argument("--jobs", type=int, default=1, help="concurrent angle simulations")
    common.add_argument("-v", "--verbose", action="store_true")
    ap = argparse.ArgumentParser(prog="nlprobe", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "extract":
            p.add_argument("snapshot")
            p.add_argument("--reference", default=None, help="free-wave snapshot (GRD1)")
            p.add_argument("--time", type=float, default=None)
        elif name == "reconstruct":
            p.add_argument("sinogram")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = load_config(args.config)
        args.out = Path(args.out)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NlprobeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
