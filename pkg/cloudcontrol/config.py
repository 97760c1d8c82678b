"""Runtime configuration for the CloudControl toolkit.

Numerical defaults live here so that the CLI and the library agree on them.
The only environment variable read is CLOUDCONTROL_LOG_LEVEL, optionally
supplied through a .env file.
"""

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

from dotenv import load_dotenv

DEFAULT_ZERO_TOLERANCE = 1e-9
DEFAULT_FIXED_POINT_TOLERANCE = 1e-9
DEFAULT_GRID_RESOLUTION = 1001
MIN_GRID_RESOLUTION = 100


@dataclass
class CloudControlConfig:
    """Process-wide settings for logging, output and numerical tolerances."""

    log_level: str = "WARNING"
    log_json: bool = False
    output_format: Literal["text", "json", "csv"] = "text"
    out_dir: Optional[Path] = None

    zero_tolerance: float = DEFAULT_ZERO_TOLERANCE
    fixed_point_tolerance: float = DEFAULT_FIXED_POINT_TOLERANCE
    grid_resolution: int = DEFAULT_GRID_RESOLUTION

    def __post_init__(self):
        """Validate configuration after initialization."""
        valid_log_levels = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
        if self.log_level.upper() not in valid_log_levels:
            raise ValueError(
                f"Invalid log level: {self.log_level}. "
                f"Must be one of: {', '.join(sorted(valid_log_levels))}"
            )

        valid_formats = {"text", "json", "csv"}
        if self.output_format not in valid_formats:
            raise ValueError(
                f"Invalid output format: {self.output_format}. "
                f"Must be one of: {', '.join(sorted(valid_formats))}"
            )

        if self.zero_tolerance < 0:
            raise ValueError("zero_tolerance must be non-negative")

        if self.fixed_point_tolerance <= 0:
            raise ValueError("fixed_point_tolerance must be positive")

        if self.grid_resolution < MIN_GRID_RESOLUTION:
            raise ValueError(f"grid_resolution must be at least {MIN_GRID_RESOLUTION}")


def load_config(env_file: Optional[Path] = None) -> CloudControlConfig:
    """Load configuration from the environment and an optional .env file.

    Args:
        env_file: Optional path to a .env file. If not provided,
                 a .env in the current directory is used when present.

    Returns:
        CloudControlConfig: Validated configuration object

    Raises:
        ValueError: If the given env file is missing or a value is invalid
    """
    if env_file:
        if not env_file.exists():
            raise ValueError(f"Configuration file not found: {env_file}")
        load_dotenv(env_file)
    else:
        default_env = Path(".env")
        if default_env.exists():
            load_dotenv(default_env)

    return CloudControlConfig(
        log_level=os.getenv("CLOUDCONTROL_LOG_LEVEL", "WARNING").strip().upper(),
    )


_config: Optional[CloudControlConfig] = None


def get_config() -> CloudControlConfig:
    """Get the singleton configuration instance, loading it on first use."""
    global _config
    if _config is None:
        _config = load_config()
    return _config


def set_config(config: CloudControlConfig) -> None:
    """Set the singleton configuration instance.

    Used by the CLI to install flag overrides, and by tests.
    """
    global _config
    _config = config


def reset_config() -> None:
    """Reset the singleton configuration instance."""
    global _config
    _config = None
