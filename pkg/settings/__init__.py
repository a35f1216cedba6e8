"""
Settings package for the F-SLM simulator.

Provides run-configuration parsing and the physical and numerical defaults.
"""

from .defaults import REFERENCE_FIBER, TOOL_NAME, TOOL_VERSION
from .run_config import RunConfig, ConfigError, parse_config, load_config

__all__ = [
    'REFERENCE_FIBER',
    'TOOL_NAME',
    'TOOL_VERSION',
    'RunConfig',
    'ConfigError',
    'parse_config',
    'load_config',
]
