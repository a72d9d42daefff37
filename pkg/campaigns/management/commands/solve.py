import csv
import json

from optimizer.exports import write_trace_csv, write_trace_json
from optimizer.serializers import load_config, parse_config
from optimizer.services import optimize, scan_thickness, upper_bound
from optimizer.verification import default_config
from spectrum.geometry import TorusGeometry
from topology.containers import save_partition
from topology.services import topology_report

from campaigns.commands import CampaignCommand
from campaigns.services import format_energy, parse_grid, parse_values


SCAN_HEADER = ["b", "k", "energy", "energy_over_pi2", "k_squared", "below_odd_threshold", "converged"]


class Command(CampaignCommand):
    help = "Optimize a k-partition of T(a, b) and export the partition, its trace and its topology."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--a", type=str, default="1")
        parser.add_argument("--b", type=str, default="1")
        parser.add_argument("--k", type=int, required=True)
        parser.add_argument("--grid", type=str, help="Resolution such as 128x32")
        parser.add_argument("--config", type=str, help="JSON file with optimizer parameters")
        parser.add_argument("--seed", type=int)
        parser.add_argument("--restarts", type=int)
        parser.add_argument(
            "--scan",
            type=str,
            help="Comma-separated b values; runs a thickness scan on T(1, b) instead of a single solve",
        )

    def _config(self, geom, options):
        nx, ny = parse_grid(options["grid"]) if options["grid"] else (None, None)
        overrides = {"k": options["k"], "nx": nx, "ny": ny, "seed": options["seed"], "restarts": options["restarts"]}
        if options["config"]:
            return load_config(options["config"], **overrides)
        fallback = default_config(geom, max(options["k"], 2))
        return parse_config({"nx": fallback.nx, "ny": fallback.ny}, **overrides)

    def run(self, out_dir, **options):
        geom = TorusGeometry.of(options["a"], options["b"])
        cfg = self._config(geom, options)
        if options["scan"]:
            return self._scan(out_dir, cfg, parse_values(options["scan"]))

        result = optimize(geom, cfg)
        report = topology_report(result.partition)
        report["energy"] = {
            "per_domain": list(result.energy.per_domain),
            "max": result.energy.max_energy,
            "max_over_pi2": result.energy.max_over_pi2,
            "target": result.energy.target,
            "relative_gap": result.energy.relative_gap(),
            "upper_bound": upper_bound(geom, cfg.k),
        }
        report["optimizer"] = {**cfg.as_dict(), "converged": result.converged, "best_restart": result.restart}

        save_partition(out_dir / "partition.tpl", result.partition)
        write_trace_csv(out_dir / "trace.csv", result.trace)
        write_trace_json(out_dir / "trace.json", result.trace)
        (out_dir / "topology.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")

        style = self.style.SUCCESS if result.converged else self.style.WARNING
        self.stdout.write(style(f"k={cfg.k} on {geom} at {cfg.nx}x{cfg.ny}, converged={result.converged}"))
        self.stdout.write(f"energy: {format_energy(result.energy.max_energy)}")
        self.stdout.write(f"target: {format_energy(result.energy.target)}  gap: {result.energy.relative_gap():.3%}")
        for label, value in enumerate(result.energy.per_domain, start=1):
            self.stdout.write(f"  domain {label}: {format_energy(value)}")
        self.stdout.write(f"bipartite: {str(report['bipartite']).lower()}")
        self.stdout.write(f"euler residual: {report['euler_residual_twice']}")
        return ["partition.tpl", "topology.json", "trace.csv", "trace.json"]

    def _scan(self, out_dir, cfg, b_values):
        rows = scan_thickness(cfg.k, b_values, cfg)
        with (out_dir / "thickness_scan.csv").open("w", encoding="utf-8", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=SCAN_HEADER, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        for row in rows:
            self.stdout.write(
                f"b={row['b']:g}: {format_energy(row['energy'])} against k^2 = {row['k_squared']}"
                f"{'' if row['below_odd_threshold'] else '  (b >= 1/k)'}"
            )
        return ["thickness_scan.csv"]
