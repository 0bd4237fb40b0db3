"""Configuration package initialization"""

from .settings import ProtocolDefaults, RunConfig

__all__ = ['ProtocolDefaults', 'RunConfig']
