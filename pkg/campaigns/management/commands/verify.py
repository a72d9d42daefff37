from optimizer.serializers import load_config, parse_config
from optimizer.verification import default_config
from spectrum.geometry import TorusGeometry
from topology.containers import load_partition

from campaigns import suites
from campaigns.commands import CampaignCommand
from campaigns.services import ExitCode, UsageError, parse_grid, parse_values


SUITES = (
    "courant-scan",
    "sharp-scan",
    "nodal-table",
    "critical-zeros",
    "knots",
    "euler",
    "lift",
    "eigensolver",
    "thin-torus",
    "covering",
)


class Command(CampaignCommand):
    help = "Run a verification suite and write a machine-readable pass/fail report."
    positional = ("suite",)

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("suite", choices=SUITES)
        parser.add_argument("--b", type=str, help="Thickness, or a comma-separated list for courant-scan")
        parser.add_argument("--a", type=str, default="1")
        parser.add_argument("--k", type=int)
        parser.add_argument("--mmax", type=int)
        parser.add_argument("--count", type=int, default=40)
        parser.add_argument("--expect", type=str, default="1,2", help="Expected sharp indices for sharp-scan")
        parser.add_argument("--draws", type=int, default=50)
        parser.add_argument("--seed", type=int, default=1234)
        parser.add_argument("--pmax", type=int, default=12)
        parser.add_argument("--input", type=str, help="Partition container for euler and lift")
        parser.add_argument("--config", type=str, help="Optimizer JSON config for thin-torus")
        parser.add_argument("--grid", type=str, help="Resolution for thin-torus, such as 128x32")
        parser.add_argument("--restarts", type=int)

    def _require(self, options, name):
        if options.get(name) is None:
            raise UsageError(f"suite {options['suite']} needs --{name}")
        return options[name]

    def _thin_torus_config(self, geom, options):
        nx, ny = parse_grid(options["grid"]) if options["grid"] else (None, None)
        overrides = {"k": options["k"], "nx": nx, "ny": ny, "restarts": options["restarts"]}
        if options["config"]:
            return load_config(options["config"], **overrides)
        if nx is None and options["restarts"] is None:
            return None
        fallback = default_config(geom.unit_width()[0], max(options["k"], 2))
        return parse_config({"nx": fallback.nx, "ny": fallback.ny}, **overrides)

    def _run_suite(self, options):
        suite = options["suite"]
        if suite == "courant-scan":
            return suites.courant_scan(parse_values(options["b"] or "0.37,0.61,0.83"), options["mmax"] or 6)
        if suite == "sharp-scan":
            expected = tuple(int(value) for value in parse_values(options["expect"]))
            return suites.sharp_scan(options["b"] or "0.97", options["count"], expected)
        if suite == "nodal-table":
            return suites.nodal_table(options["b"] or "0.4", options["mmax"] or 4)
        if suite == "critical-zeros":
            return suites.critical_zero_scan(options["b"] or "0.4", options["draws"], options["seed"])
        if suite == "knots":
            return suites.knot_scan(options["pmax"])
        if suite == "euler":
            return suites.euler_suite(load_partition(self._require(options, "input")))
        if suite == "lift":
            return suites.lift_suite(load_partition(self._require(options, "input")))
        if suite == "eigensolver":
            return suites.eigensolver_suite()
        k = self._require(options, "k")
        b = self._require(options, "b")
        if suite == "thin-torus":
            geom = TorusGeometry.of(options["a"], b)
            return suites.thin_torus_suite(geom, k, self._thin_torus_config(geom, options))
        return suites.covering_suite(b, k)

    def run(self, out_dir, **options):
        report = self._run_suite(options)
        name = report.suite
        suites.write_suite_json(out_dir / f"{name}.json", report)
        suites.write_suite_csv(out_dir / f"{name}.csv", report)

        for check in report.checks:
            mark = self.style.SUCCESS("pass") if check.passed else self.style.ERROR("FAIL")
            self.stdout.write(f"{mark}  {check.name}  {check.detail}")
        if report.refusal:
            self.stdout.write(self.style.WARNING(f"refused: {report.refusal}"))
        self.stdout.write(f"{name}: {'passed' if report.passed else 'failed'}")
        self.report = report
        return [f"{name}.csv", f"{name}.json"]

    def finish(self, manifest):
        if self.report.refusal:
            self.exit_with(ExitCode.USAGE, f"{self.report.suite} refused: {self.report.refusal}")
        if not self.report.passed:
            self.fail(f"{self.report.suite} failed")
