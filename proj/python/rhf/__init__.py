"""Reduced Hartree-Fock dielectric response of insulating crystals."""

from ._rhf import (
    Crystal,
    NumericalError,
    RunConfig,
    ValidationError,
    __version__,
    parse_config,
    parse_config_text,
    run_command,
)

__all__ = [
    "Crystal",
    "NumericalError",
    "RunConfig",
    "ValidationError",
    "__version__",
    "parse_config",
    "parse_config_text",
    "run_command",
]
