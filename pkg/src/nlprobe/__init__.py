"""Imaging a nonlinearity coefficient with high-frequency wave packets.

Subpackages are plain modules: ``phantoms``, ``wavesolver``, ``optics``,
``tomo``, ``harmonics`` and the ``cli`` front end.
"""
from .errors import (BoundsNotCertifiedError, ConfigError, DivergenceError, FormatError,
                     NlprobeError, SetupError, UnsupportedGeometryError)
from .fields import Field, GridSpec
from .phantoms import AlphaDescriptor, Envelope, sample_alpha
from .wavesolver import SimConfig, WavePacket, run, run_pair

__version__ = "0.1.0"

__all__ = [
    "AlphaDescriptor", "BoundsNotCertifiedError", "ConfigError", "DivergenceError", "Envelope",
    "Field", "FormatError", "GridSpec", "NlprobeError", "SetupError", "SimConfig",
    "UnsupportedGeometryError", "WavePacket", "run", "run_pair", "sample_alpha",
]
