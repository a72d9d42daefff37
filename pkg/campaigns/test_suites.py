import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from spectrum.geometry import TorusGeometry
from topology.services import band_partition, strip_partition

from . import suites


class SpectrumSuiteTests(SimpleTestCase):
    def test_courant_scan_over_three_thicknesses(self):
        report = suites.courant_scan(["0.37", "0.61", "0.83"], 6)
        self.assertTrue(report.passed, [c for c in report.checks if not c.passed])
        self.assertEqual(len(report.rows), 3 * 36)

    def test_sharp_scan_near_square(self):
        report = suites.sharp_scan("0.97", 40)
        self.assertTrue(report.passed)
        self.assertEqual([row["index"] for row in report.rows], [1, 2])

    def test_sharp_scan_reports_unexpected_indices(self):
        report = suites.sharp_scan("0.97", 40, expected=(1,))
        self.assertFalse(report.passed)

    def test_covering(self):
        self.assertTrue(suites.covering_suite("0.25", 3).passed)
        # b = 0.4 is above 1/4, so lambda_8 of T(2, 0.8) comes from (1, 1)
        self.assertFalse(suites.covering_suite("0.4", 4).passed)


class NodalSuiteTests(SimpleTestCase):
    def test_nodal_table(self):
        report = suites.nodal_table("0.4", 4)
        self.assertTrue(report.passed, [c for c in report.checks if not c.passed])
        self.assertEqual(len(report.rows), 16 * 6 + 16 * 2 + 4)

    def test_critical_zero_scan(self):
        report = suites.critical_zero_scan("0.4", 50, 1234)
        self.assertTrue(report.passed, [c for c in report.checks if not c.passed])
        self.assertEqual(sum(row["kind"] == "mixed" for row in report.rows), 50)

    def test_knots(self):
        report = suites.knot_scan(12)
        self.assertTrue(report.passed)
        self.assertEqual(len(report.rows), 144)


class TopologySuiteTests(SimpleTestCase):
    def test_euler_and_lift_on_bands(self):
        part = band_partition(TorusGeometry.of(1, 1), 3, 48, 48)
        self.assertTrue(suites.euler_suite(part).passed)
        self.assertTrue(suites.lift_suite(part).passed)

    def test_lift_of_even_strips(self):
        report = suites.lift_suite(strip_partition(TorusGeometry.of(1, "0.25"), 4, 96, 24))
        self.assertTrue(report.passed)
        self.assertEqual(report.rows[0]["lifted_k"], 8)


class EigensolverSuiteTests(SimpleTestCase):
    def test_unit_square_order(self):
        report = suites.eigensolver_suite()
        self.assertTrue(report.passed, report.checks)
        self.assertGreater(report.rows[0]["order"], 1.8)


class ReportExportTests(SimpleTestCase):
    def test_json_and_csv(self):
        report = suites.knot_scan(3)
        with tempfile.TemporaryDirectory() as tmp:
            json_path = suites.write_suite_json(Path(tmp) / "knots.json", report)
            csv_path = suites.write_suite_csv(Path(tmp) / "knots.csv", report)
            self.assertIn('"passed": true', json_path.read_text(encoding="utf-8"))
            lines = csv_path.read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[0], "p,q,gcd,traced")
        self.assertEqual(len(lines), 10)
