"""Joint transmit/reflection beamforming for multi-cluster MISO-NOMA with an IRS."""

from .channel import ChannelParams, ChannelRealization, generate
from .model import BeamformingSolution, ReflectionCase, SystemConfig, audit

__all__ = ["ChannelParams", "ChannelRealization", "generate", "BeamformingSolution",
           "ReflectionCase", "SystemConfig", "audit"]
__version__ = "0.1.0"
