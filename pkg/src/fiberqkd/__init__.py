"""Photon-level simulation and protocol stack for interferometric fiber QKD."""
from .encoding import ProtocolKind
from .optics import ChannelConfig, DetectorConfig, OpticsConfig, SourceConfig, ideal_config

__version__ = "0.1.0"

__all__ = [
    "ChannelConfig",
    "DetectorConfig",
    "OpticsConfig",
    "ProtocolKind",
    "SourceConfig",
    "ideal_config",
]
