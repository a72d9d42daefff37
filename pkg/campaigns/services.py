from __future__ import annotations

from enum import IntEnum
import math
from pathlib import Path

from django.conf import settings

from eigensolver.services import EigensolverError, SolverDiverged
from nodal.services import NodalError, ResolutionUnstable
from optimizer.services import OptimizerError
from spectrum.geometry import InvalidGeometry
from spectrum.services import SearchRadiusExceeded, SpectrumError
from topology.services import PartitionError


PI2 = math.pi**2


class ExitCode(IntEnum):
    PASSED = 0
    VERIFICATION_FAILED = 1
    USAGE = 2
    RESOURCE = 3


class CampaignError(Exception):
    exit_code = ExitCode.USAGE


class UsageError(CampaignError):
    pass


class VerificationFailed(CampaignError):
    exit_code = ExitCode.VERIFICATION_FAILED


class ReplayMismatch(VerificationFailed):
    pass


RESOURCE_ERRORS = (SearchRadiusExceeded, SolverDiverged, ResolutionUnstable, MemoryError)
USAGE_ERRORS = (
    InvalidGeometry,
    SpectrumError,
    NodalError,
    PartitionError,
    EigensolverError,
    OptimizerError,
    FileNotFoundError,
    ValueError,
)


def exit_code_for(exc: BaseException) -> ExitCode:
    if isinstance(exc, CampaignError):
        return exc.exit_code
    if isinstance(exc, RESOURCE_ERRORS):
        return ExitCode.RESOURCE
    if isinstance(exc, USAGE_ERRORS):
        return ExitCode.USAGE
    raise exc


def format_energy(value: float) -> str:
    """Absolute value next to its multiple of pi^2."""
    return f"{value:.10g} ({value / PI2:.6f} pi^2)"


def default_output_dir(command: str) -> Path:
    return Path(getattr(settings, "TPL_OUTPUT_DIR", Path.cwd() / "runs")) / command


def parse_grid(value: str) -> tuple[int, int]:
    """'128x32' -> (128, 32)."""
    try:
        nx, ny = (int(part) for part in value.lower().split("x"))
    except ValueError as exc:
        raise UsageError(f"grid must look like 128x32, got {value!r}") from exc
    if nx < 4 or ny < 4:
        raise UsageError("grid needs at least 4 cells per axis")
    return nx, ny


def parse_values(value: str) -> list[str]:
    """Comma-separated list with blanks dropped."""
    return [part.strip() for part in value.split(",") if part.strip()]
