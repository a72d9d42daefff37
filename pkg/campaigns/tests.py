import csv
import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from nodal.services import ResolutionUnstable
from optimizer.services import OptimizerConfigError
from spectrum.geometry import InvalidGeometry, TorusGeometry
from spectrum.services import SearchRadiusExceeded
from topology.containers import save_partition
from topology.services import GridPartition, strip_partition

from .manifests import MANIFEST_NAME, load_manifest, sha256_file
from .serializers import RunManifestSerializer
from .services import ExitCode, UsageError, exit_code_for, format_energy, parse_grid


THIN = TorusGeometry.of(1, "0.25")


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def run_command(self, name, *args, out="run", **options):
        stdout = StringIO()
        call_command(name, *args, out=str(self.tmp / out), stdout=stdout, **options)
        return stdout.getvalue()

    def assertExitCode(self, code, name, *args, **options):
        with self.assertRaises(CommandError) as ctx:
            self.run_command(name, *args, **options)
        self.assertEqual(ctx.exception.returncode, code)
        return ctx.exception

    def read_csv(self, path):
        with open(path, encoding="utf-8") as handle:
            return list(csv.DictReader(handle))


class ExitCodeTests(SimpleTestCase):
    def test_mapping(self):
        self.assertEqual(exit_code_for(SearchRadiusExceeded("cap")), ExitCode.RESOURCE)
        self.assertEqual(exit_code_for(ResolutionUnstable("refine")), ExitCode.RESOURCE)
        self.assertEqual(exit_code_for(InvalidGeometry("b")), ExitCode.USAGE)
        self.assertEqual(exit_code_for(OptimizerConfigError("k")), ExitCode.USAGE)
        self.assertEqual(exit_code_for(UsageError("flag")), ExitCode.USAGE)

    def test_unknown_errors_propagate(self):
        with self.assertRaises(KeyError):
            exit_code_for(KeyError("x"))

    def test_helpers(self):
        self.assertEqual(parse_grid("128x32"), (128, 32))
        for bad in ("128", "axb", "2x2"):
            with self.subTest(bad=bad), self.assertRaises(UsageError):
                parse_grid(bad)
        self.assertIn("(16.000000 pi^2)", format_energy(16 * np.pi**2))


class SpectrumCommandTests(CommandTestCase):
    def test_thin_torus_fourth_eigenvalue(self):
        output = self.run_command("spectrum", a="1", b="0.4", count=10)
        rows = self.read_csv(self.tmp / "run" / "spectrum.csv")
        self.assertEqual(len(rows), 10)
        self.assertEqual(rows[3]["value_over_pi2"], "16")
        self.assertIn("16.000000 pi^2", output)

    def test_covering_sixth_eigenvalue(self):
        self.run_command("spectrum", a="2", b="0.5", count=7)
        rows = self.read_csv(self.tmp / "run" / "spectrum.csv")
        self.assertEqual(rows[5]["value_over_pi2"], "9")
        self.assertEqual(rows[5]["courant_sharp"], "yes")

    def test_zero_count_is_a_usage_error(self):
        self.assertExitCode(ExitCode.USAGE, "spectrum", count=0)

    def test_invalid_geometry(self):
        self.assertExitCode(ExitCode.USAGE, "spectrum", b="-1")

    @override_settings(TPL_SEARCH_RADIUS_CAP=4)
    def test_radius_cap(self):
        self.assertExitCode(ExitCode.RESOURCE, "spectrum", b="0.4", count=100)

    def test_manifest_records_digest(self):
        self.run_command("spectrum", b="0.4", count=5)
        manifest = load_manifest(self.tmp / "run")
        self.assertEqual(manifest.command, "spectrum")
        self.assertEqual(manifest.options, {"a": "1", "b": "0.4", "count": 5})
        self.assertEqual(manifest.outputs, {"spectrum.csv": sha256_file(self.tmp / "run" / "spectrum.csv")})
        self.assertEqual(manifest.formats, ["csv"])
        self.assertIn("numpy", manifest.versions)
        self.assertTrue(manifest.created_at)


class NodalCommandTests(CommandTestCase):
    def test_examples(self):
        cases = [
            ({"m": 3, "n": 2, "lam": 1.0, "theta1": 0.0}, "2"),
            ({"m": 2, "n": 0}, "4"),
            ({"m": 1, "n": 1, "form": "product-sin"}, "4"),
        ]
        for options, expected in cases:
            with self.subTest(**options):
                output = self.run_command("nodal", **options)
                self.assertEqual(output.splitlines()[0], expected)

    def test_exports(self):
        self.run_command("nodal", m=1, n=1, form="product-cos")
        pgm = (self.tmp / "run" / "nodal.pgm").read_bytes()
        self.assertTrue(pgm.startswith(b"P5\n64 64\n255\n"))
        self.assertEqual(len(pgm), len(b"P5\n64 64\n255\n") + 64 * 64)
        rows = self.read_csv(self.tmp / "run" / "nodal.csv")
        self.assertEqual(len(rows), 64 * 64)
        self.assertEqual({int(row["label"]) for row in rows}, {1, 2, 3, 4})

    def test_coarse_grid_is_rejected(self):
        self.assertExitCode(ExitCode.USAGE, "nodal", m=2, n=1, nx=16)

    def test_degenerate_product_sin(self):
        self.assertExitCode(ExitCode.USAGE, "nodal", m=1, n=1, lam=0.0, form="product-sin")


class SolveCommandTests(CommandTestCase):
    def test_missing_config_file(self):
        self.assertExitCode(ExitCode.USAGE, "solve", b="0.25", k=3, config=str(self.tmp / "absent.json"))

    def test_single_domain_is_rejected(self):
        self.assertExitCode(ExitCode.USAGE, "solve", b="0.25", k=1)

    def test_small_run_writes_every_output(self):
        config = self.tmp / "cfg.json"
        config.write_text(json.dumps({"k": 5, "max_outer_iters": 4, "restarts": 1}), encoding="utf-8")
        output = self.run_command("solve", b="0.25", k=2, grid="32x8", config=str(config))
        run = self.tmp / "run"
        for name in ("partition.tpl", "topology.json", "trace.csv", "trace.json", MANIFEST_NAME):
            self.assertTrue((run / name).is_file(), name)
        report = json.loads((run / "topology.json").read_text(encoding="utf-8"))
        self.assertEqual(report["k"], 2)
        self.assertEqual(report["optimizer"]["max_outer_iters"], 4)
        self.assertEqual(report["energy"]["max"], max(report["energy"]["per_domain"]))
        self.assertIn("pi^2", output)
        self.assertIn("bipartite:", output)


class VerifyCommandTests(CommandTestCase):
    def save(self, part):
        return str(save_partition(self.tmp / "part.bin", part))

    def test_knots(self):
        output = self.run_command("verify", "knots")
        self.assertIn("knots: passed", output)
        report = json.loads((self.tmp / "run" / "knots.json").read_text(encoding="utf-8"))
        self.assertTrue(report["passed"])

    def test_courant_scan(self):
        self.run_command("verify", "courant-scan", b="0.37", mmax=6)
        rows = self.read_csv(self.tmp / "run" / "courant-scan.csv")
        self.assertEqual(len(rows), 36)
        self.assertEqual({row["courant_sharp"] for row in rows}, {"no"})

    def test_euler_on_strips(self):
        output = self.run_command("verify", "euler", input=self.save(strip_partition(THIN, 3, 96, 24)))
        self.assertIn("residual 0", output)

    def test_lift_on_strips(self):
        self.run_command("verify", "lift", input=self.save(strip_partition(THIN, 3, 96, 24)))
        rows = self.read_csv(self.tmp / "run" / "lift.csv")
        self.assertEqual(rows[0]["lifted_k"], "6")
        self.assertEqual(rows[0]["bipartite"], "True")

    def test_lift_of_a_disk_fails(self):
        labels = np.ones((8, 8), dtype=np.int32)
        labels[2:5, 2:5] = 2
        part = GridPartition(geometry=TorusGeometry.of(1, 1), labels=labels, k=2)
        self.assertExitCode(ExitCode.VERIFICATION_FAILED, "verify", "lift", input=self.save(part))
        self.assertTrue((self.tmp / "run" / MANIFEST_NAME).is_file())

    def test_missing_input(self):
        self.assertExitCode(ExitCode.USAGE, "verify", "euler")
        self.assertExitCode(ExitCode.USAGE, "verify", "euler", input=str(self.tmp / "absent.bin"))

    def test_thick_torus_is_refused(self):
        self.assertExitCode(ExitCode.USAGE, "verify", "thin-torus", b="0.5", k=3)

    def test_covering(self):
        output = self.run_command("verify", "covering", b="0.25", k=3)
        self.assertIn("covering: passed", output)


class ReplayCommandTests(CommandTestCase):
    def test_replay_reproduces_csv(self):
        self.run_command("spectrum", b="0.4", count=12)
        stdout = StringIO()
        call_command("replay", str(self.tmp / "run"), out=str(self.tmp / "again"), stdout=stdout)
        self.assertIn("reproduced 1 outputs", stdout.getvalue())
        self.assertEqual(
            (self.tmp / "run" / "spectrum.csv").read_bytes(),
            (self.tmp / "again" / "spectrum.csv").read_bytes(),
        )

    def test_replay_of_positional_suite(self):
        self.run_command("verify", "knots", pmax=5)
        call_command("replay", str(self.tmp / "run" / MANIFEST_NAME), out=str(self.tmp / "again"), stdout=StringIO())
        self.assertTrue((self.tmp / "again" / "knots.csv").is_file())

    def test_tampered_digest_fails(self):
        self.run_command("spectrum", b="0.4", count=5)
        path = self.tmp / "run" / MANIFEST_NAME
        data = json.loads(path.read_text(encoding="utf-8"))
        data["outputs"]["spectrum.csv"] = "0" * 64
        path.write_text(json.dumps(data), encoding="utf-8")
        with self.assertRaises(CommandError) as ctx:
            call_command("replay", str(path), out=str(self.tmp / "again"), stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, ExitCode.VERIFICATION_FAILED)

    def test_missing_manifest(self):
        with self.assertRaises(CommandError) as ctx:
            call_command("replay", str(self.tmp / "nowhere.json"), stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, ExitCode.USAGE)


class RunManifestSerializerTests(SimpleTestCase):
    def test_rejects_bad_outputs(self):
        base = {"command": "spectrum", "output_dir": "runs/spectrum"}
        for outputs in ({}, {"spectrum.csv": "abc"}, {"../x.csv": "0" * 64}):
            with self.subTest(outputs=outputs):
                self.assertFalse(RunManifestSerializer(data={**base, "outputs": outputs}).is_valid())

    def test_rejects_unknown_command(self):
        data = {"command": "replay", "output_dir": "x", "outputs": {"a.csv": "0" * 64}}
        self.assertFalse(RunManifestSerializer(data=data).is_valid())
