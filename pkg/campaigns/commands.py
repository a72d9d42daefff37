from __future__ import annotations

import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from .manifests import RunManifest, write_manifest
from .services import ExitCode, default_output_dir, exit_code_for


logger = logging.getLogger(__name__)

BASE_OPTIONS = {
    "verbosity",
    "settings",
    "pythonpath",
    "traceback",
    "no_color",
    "force_color",
    "skip_checks",
    "stdout",
    "stderr",
    "out",
}


class CampaignCommand(BaseCommand):
    """A command that writes its results to an output directory together with a RunManifest.

    Subclasses implement ``run(out_dir, **options)`` and return the list of files they wrote.
    """

    positional: tuple[str, ...] = ()

    def add_arguments(self, parser):
        parser.add_argument("--out", type=str, help="Output directory (defaults to TPL_OUTPUT_DIR/<command>)")

    @property
    def command_name(self) -> str:
        return self.__module__.rsplit(".", 1)[-1]

    def run(self, out_dir: Path, **options) -> list[str]:
        raise NotImplementedError

    def handle(self, *args, **options):
        out_dir = Path(options.get("out") or default_output_dir(self.command_name))
        params = {key: value for key, value in options.items() if key not in BASE_OPTIONS}
        positional = [str(params.pop(name)) for name in self.positional]
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            files = self.run(out_dir, **options)
        except CommandError:
            raise
        except Exception as exc:
            code = exit_code_for(exc)
            logger.warning("%s failed with %s: %s", self.command_name, type(exc).__name__, exc)
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=int(code)) from exc

        manifest = RunManifest(
            command=self.command_name,
            args=positional,
            options=params,
            seed=params.get("seed"),
            output_dir=str(out_dir),
        )
        path = write_manifest(manifest, files)
        self.stdout.write(f"manifest: {path}")
        self.finish(manifest)

    def finish(self, manifest: RunManifest) -> None:
        """Hook run after the manifest is written; verification commands fail here."""

    def exit_with(self, code: ExitCode, message: str) -> None:
        raise CommandError(message, returncode=int(code))

    def fail(self, message: str) -> None:
        self.exit_with(ExitCode.VERIFICATION_FAILED, message)
