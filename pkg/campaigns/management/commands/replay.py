from pathlib import Path

from django.core.management import call_command
from django.core.management.base import BaseCommand, CommandError

from campaigns.manifests import compare_outputs, load_manifest
from campaigns.services import CampaignError, ExitCode


class Command(BaseCommand):
    help = "Re-run a recorded RunManifest and check that every output is reproduced byte for byte."

    def add_arguments(self, parser):
        parser.add_argument("manifest", type=str, help="manifest.json or the directory holding it")
        parser.add_argument("--out", type=str, help="Directory for the replayed outputs")

    def handle(self, *args, **options):
        try:
            manifest = load_manifest(options["manifest"])
        except CampaignError as exc:
            raise CommandError(str(exc), returncode=int(exc.exit_code)) from exc

        out_dir = Path(options["out"] or f"{manifest.output_dir.rstrip('/')}-replay")
        self.stdout.write(f"replaying {manifest.command} {' '.join(manifest.args)} into {out_dir}")
        failure = None
        try:
            call_command(manifest.command, *manifest.args, **manifest.options, out=str(out_dir), stdout=self.stdout)
        except CommandError as exc:
            if exc.returncode != ExitCode.VERIFICATION_FAILED:
                raise
            failure = exc

        mismatched = compare_outputs(manifest.outputs, out_dir)
        if mismatched:
            raise CommandError(
                f"replay differs from the recording in {', '.join(mismatched)}",
                returncode=int(ExitCode.VERIFICATION_FAILED),
            )
        self.stdout.write(self.style.SUCCESS(f"reproduced {len(manifest.outputs)} outputs"))
        if failure is not None:
            raise failure
