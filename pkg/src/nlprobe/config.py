"""Experiment configuration: INI-style text with five fixed sections.

Example::

    [phantom]
    kind = gaussian
    [packet]
    h = 0.01
    K = 1
    [solver]
    points_per_h = 4
    [acquisition]
    n_angles = 60
    [harmonics]
    A = 1

Every key is checked against the schema below before anything runs.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from .errors import ConfigError
from .fields import GridSpec
from .phantoms import AlphaDescriptor, Envelope
from .wavesolver import SimConfig, WavePacket


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _str(text: str) -> str:
    return text.strip()


# section -> key -> (parser, default)
SCHEMA: Dict[str, Dict[str, tuple]] = {
    "phantom": {
        "kind": (_str, "gaussian"),
        "ax": (float, 0.2),
        "ay": (float, 0.1),
        "amplitude": (float, 1.0),
        "blur_sigma": (float, 0.01),
        "path": (_str, None),
    },
    "packet": {
        "h": (float, 0.01),
        "K": (float, 1.0),
        "width": (float, 0.14),
        "omega": (_floats, (0.0, 1.0)),
        "c0": (float, -0.5),
        "field_kind": (_str, "complex"),
    },
    "solver": {
        "n": (int, None),
        "points_per_h": (float, 4.0),
        "half_width": (float, 1.0),
        "cfl": (float, 0.5),
        "t_final": (float, 1.0),
        "snapshot_times": (_floats, None),
        "noise_level": (float, 0.0),
        "seed": (int, 0),
        "allow_coarse": (_bool, False),
        "convergence_h": (_floats, (0.01, 0.005, 0.0025)),
    },
    "acquisition": {
        "n_angles": (int, 60),
        "angle_start": (float, 0.0),
        "angle_stop": (float, 180.0),
        "half_width": (float, 0.5),
        "filter": (_str, "ram_lak_hann"),
        "reference": (_str, "simulated"),
    },
    "harmonics": {
        "A": (float, 1.0),
        "kmax": (int, 15),
        "ds": (float, 1e-3),
        "S": (float, 1.0),
        "alpha": (float, 1.0),
        "alpha_profile": (_str, "constant"),
        "picard_iterations": (int, 30),
        "spectrum_run": (_bool, False),
        "spectrum_x": (float, 0.0),
    },
}


@dataclass
class ExperimentConfig:
    values: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def __getitem__(self, section: str) -> Dict[str, Any]:
        return self.values[section]

    # -- builders --------------------------------------------------------
    def alpha_descriptor(self) -> AlphaDescriptor:
        p = self["phantom"]
        return _build("phantom", AlphaDescriptor, kind=p["kind"], ax=p["ax"], ay=p["ay"],
                      amplitude=p["amplitude"], blur_sigma=p["blur_sigma"], path=p["path"])

    def packet(self, h: Optional[float] = None, field_kind: Optional[str] = None) -> WavePacket:
        p = self["packet"]
        env = _build("packet", Envelope, K=p["K"], width=p["width"])
        omega = p["omega"]
        if len(omega) != 2:
            raise ConfigError("[packet] omega must have two components")
        return _build("packet", WavePacket, h=p["h"] if h is None else h, envelope=env,
                      omega=omega, c0=p["c0"], field_kind=field_kind or p["field_kind"])

    def grid(self, h: Optional[float] = None) -> GridSpec:
        s = self["solver"]
        hw = s["half_width"]
        if not hw > 0:
            raise ConfigError("[solver] half_width must be > 0")
        n = s["n"]
        if n is None:
            h = self["packet"]["h"] if h is None else h
            ppH = s["points_per_h"]
            if not ppH > 0:
                raise ConfigError("[solver] points_per_h must be > 0")
            n = int(math.ceil(2 * hw * ppH / h - 1e-9)) + 1
        if n < 3:
            raise ConfigError("[solver] n must be >= 3")
        return GridSpec.square(n, hw)

    def sim_config(self, h: Optional[float] = None, seed: Optional[int] = None) -> SimConfig:
        s = self["solver"]
        snaps = s["snapshot_times"] or (s["t_final"],)
        return _build("solver", SimConfig, grid=self.grid(h), cfl=s["cfl"], t_final=s["t_final"],
                      snapshot_times=snaps, noise_level=s["noise_level"],
                      seed=s["seed"] if seed is None else seed,
                      min_points_per_h=4.0, allow_coarse=s["allow_coarse"])

    def angles(self):
        a = self["acquisition"]
        n = a["n_angles"]
        if n < 1:
            raise ConfigError("[acquisition] n_angles must be >= 1")
        lo, hi = a["angle_start"], a["angle_stop"]
        if not 0 <= lo < hi <= 180:
            raise ConfigError("[acquisition] need 0 <= angle_start < angle_stop <= 180")
        return [lo + (hi - lo) * i / n for i in range(n)]

    def validate(self) -> None:
        """Build every derived object once so bad values surface before a run."""
        self.alpha_descriptor()
        self.packet()
        self.sim_config()
        self.angles()
        a = self["acquisition"]
        if a["filter"] not in ("ram_lak", "ram_lak_hann"):
            raise ConfigError(f"[acquisition] filter: unknown value {a['filter']!r}")
        if a["reference"] not in ("simulated", "closed_form"):
            raise ConfigError(f"[acquisition] reference: unknown value {a['reference']!r}")
        hm = self["harmonics"]
        if hm["kmax"] < 1 or hm["kmax"] % 2 == 0:
            raise ConfigError("[harmonics] kmax must be odd and >= 1")
        if not (hm["ds"] > 0 and hm["S"] > 0 and hm["A"] >= 0 and hm["alpha"] >= 0):
            raise ConfigError("[harmonics] need ds > 0, S > 0, A >= 0, alpha >= 0")
        if hm["alpha_profile"] not in ("constant", "one_plus_sin2"):
            raise ConfigError(f"[harmonics] alpha_profile: unknown value {hm['alpha_profile']!r}")
        if any(not h > 0 for h in self["solver"]["convergence_h"]):
            raise ConfigError("[solver] convergence_h entries must be > 0")


def _build(section, cls, **kw):
    try:
        return cls(**kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",),
                                   interpolation=None)
    cp.optionxform = str  # keys are case-sensitive (K, A, S)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    values = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key '{key}' in [{sec}]")
            parser = SCHEMA[sec][key][0]
            try:
                values[sec][key] = parser(raw)
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key}: cannot parse {raw!r} ({exc})") from exc
    cfg = ExperimentConfig(values)
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    # an unreadable file is an I/O problem, not a config one: let OSError through
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
