"""Configuration and error types."""

from carbm.core.config import RunConfig, Settings, get_settings, parse_config
from carbm.core.errors import CarbmError, ConfigError

__all__ = [
    'RunConfig',
    'Settings',
    'get_settings',
    'parse_config',
    'CarbmError',
    'ConfigError',
]
