from nodal.exports import write_labels_csv, write_labels_pgm
from nodal.services import (
    EigenfunctionForm,
    EigenfunctionSpec,
    count_nodal_domains,
    label_nodal_domains,
    sign_grid,
)
from spectrum.geometry import EigenIndex, TorusGeometry

from campaigns.commands import CampaignCommand


FORMS = {choice.replace("_", "-"): choice for choice in EigenfunctionForm.values}


class Command(CampaignCommand):
    help = "Count the nodal domains of an explicit torus eigenfunction and export the labeled grid."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--m", type=int, required=True)
        parser.add_argument("--n", type=int, required=True)
        parser.add_argument("--a", type=str, default="1")
        parser.add_argument("--b", type=str, default="1")
        parser.add_argument("--mu", type=float, default=1.0)
        parser.add_argument("--lam", type=float, default=1.0)
        parser.add_argument("--theta1", type=float, default=0.0)
        parser.add_argument("--theta2", type=float, default=0.0)
        parser.add_argument("--branch", type=int, default=1, choices=[1, -1])
        parser.add_argument("--form", type=str, default="lemma", choices=sorted(FORMS))
        parser.add_argument("--nx", type=int, help="Cells along x (default 64 per oscillation)")
        parser.add_argument("--ny", type=int, help="Cells along y (default 64 per oscillation)")

    def run(self, out_dir, **options):
        geom = TorusGeometry.of(options["a"], options["b"])
        spec = EigenfunctionSpec(
            mode=EigenIndex(options["m"], options["n"]),
            mu=options["mu"],
            lam=options["lam"],
            theta1=options["theta1"],
            theta2=options["theta2"],
            form=FORMS[options["form"]],
            branch=options["branch"],
        )
        nx = options["nx"] or 64 * max(spec.mode.m, 1)
        ny = options["ny"] or 64 * max(spec.mode.n, 1)
        count = count_nodal_domains(spec, geom, nx, ny)
        labels, _ = label_nodal_domains(sign_grid(spec, geom, nx, ny))
        write_labels_pgm(out_dir / "nodal.pgm", labels)
        write_labels_csv(out_dir / "nodal.csv", labels)

        self.stdout.write(str(count))
        self.stdout.write(f"{spec.form} mode {spec.mode} on {geom} at {nx}x{ny}: {count} nodal domains")
        return ["nodal.csv", "nodal.pgm"]
