from spectrum.exports import spectrum_rows, write_spectrum_csv
from spectrum.geometry import TorusGeometry
from spectrum.services import enumerate_spectrum

from campaigns.commands import CampaignCommand
from campaigns.services import format_energy


class Command(CampaignCommand):
    help = "Enumerate the first eigenvalues of the flat torus T(a, b) and export them as CSV."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--a", type=str, default="1", help="Horizontal circumference")
        parser.add_argument("--b", type=str, default="1", help="Vertical circumference")
        parser.add_argument("--count", type=int, default=10, help="Number of spectral indices")

    def run(self, out_dir, **options):
        geom = TorusGeometry.of(options["a"], options["b"])
        count = options["count"]
        entries = enumerate_spectrum(geom, count)
        write_spectrum_csv(out_dir / "spectrum.csv", entries, count)

        self.stdout.write(self.style.SUCCESS(f"Spectrum of {geom}, {count} indices"))
        for row in spectrum_rows(entries, count):
            value = float(row["value"])
            self.stdout.write(
                f"{row['index']:>4}  ({row['m']},{row['n']})  {format_energy(value)}  "
                f"courant_index={row['courant_index']} sharp={row['courant_sharp']}"
            )
        return ["spectrum.csv"]
