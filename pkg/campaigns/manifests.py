from __future__ import annotations

from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
import hashlib
from importlib import metadata
import json
import logging
from pathlib import Path
import platform

from .serializers import RunManifestSerializer
from .services import UsageError


logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
TRACKED_PACKAGES = ("Django", "djangorestframework", "numpy", "scipy", "networkx")


@dataclass
class RunManifest:
    """Everything needed to re-run a command and check that it reproduced its files."""

    command: str
    args: list = field(default_factory=list)
    options: dict = field(default_factory=dict)
    seed: int | None = None
    output_dir: str = ""
    formats: list[str] = field(default_factory=list)
    outputs: dict[str, str] = field(default_factory=dict)
    versions: dict[str, str] = field(default_factory=dict)
    created_at: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(8192), b""):
            digest.update(chunk)
    return digest.hexdigest()


def package_versions() -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def digest_outputs(output_dir: Path, names: list[str]) -> dict[str, str]:
    return {name: sha256_file(Path(output_dir) / name) for name in sorted(names)}


def write_manifest(manifest: RunManifest, files: list[str]) -> Path:
    output_dir = Path(manifest.output_dir)
    manifest.outputs = digest_outputs(output_dir, files)
    manifest.formats = sorted({Path(name).suffix.lstrip(".") for name in files})
    manifest.versions = package_versions()
    manifest.created_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
    serializer = RunManifestSerializer(data=manifest.as_dict())
    serializer.is_valid(raise_exception=True)
    path = output_dir / MANIFEST_NAME
    path.write_text(json.dumps(manifest.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("Wrote manifest for %s with %s outputs to %s", manifest.command, len(manifest.outputs), path)
    return path


def load_manifest(path) -> RunManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.is_file():
        raise UsageError(f"manifest {path} does not exist")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"manifest {path} is not valid JSON: {exc}") from exc
    serializer = RunManifestSerializer(data=data)
    if not serializer.is_valid():
        raise UsageError(f"manifest {path} is invalid: {json.dumps(serializer.errors, sort_keys=True)}")
    return RunManifest(**serializer.validated_data)


def compare_outputs(recorded: dict[str, str], output_dir: Path) -> list[str]:
    """Names whose digest differs from the recorded one (or that are missing)."""
    mismatched = []
    for name, expected in sorted(recorded.items()):
        path = Path(output_dir) / name
        if not path.is_file() or sha256_file(path) != expected:
            mismatched.append(name)
    return mismatched
