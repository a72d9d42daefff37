import math
import warnings

from django.test import SimpleTestCase

from spectrum.geometry import TorusGeometry
from topology.services import (
    check_euler_identity,
    critical_points,
    domain_topology,
    is_bipartite,
    lift_partition,
    winding_pair,
)

from .services import NotConverged, OptimizerConfig, optimize, upper_bound
from .verification import verify_thin_torus


PI2 = math.pi**2


def settled_optimize(geom, cfg):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = optimize(geom, cfg)
    return result, [w for w in caught if issubclass(w.category, NotConverged)]


class OddStripAcceptanceTests(SimpleTestCase):
    """Three domains on T(1, 1/4): the strips are the certificate."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.geom = TorusGeometry.of(1, "0.25")
        cls.result, cls.cap_warnings = settled_optimize(cls.geom, OptimizerConfig(k=3, nx=128, ny=32, restarts=8))

    def test_reassignment_settles(self):
        self.assertTrue(self.result.converged)
        self.assertEqual(self.cap_warnings, [])
        self.assertLess(len(self.result.trace), 8 * 300)

    def test_energy_matches_three_strips(self):
        self.assertLess(abs(self.result.energy.max_energy - 9 * PI2), 0.05 * 9 * PI2)
        self.assertLessEqual(self.result.energy.max_energy, 1.10 * upper_bound(self.geom, 3))

    def test_every_domain_is_a_vertical_annulus(self):
        part = self.result.partition
        topology = domain_topology(part)
        self.assertEqual(set(topology.euler.values()), {0})
        self.assertEqual(critical_points(part), [])
        for label in range(1, 4):
            self.assertEqual(winding_pair(part, label), (1, 0))

    def test_euler_identity_and_lift(self):
        part = self.result.partition
        self.assertEqual(check_euler_identity(part), 0)
        lifted = lift_partition(part, 2, 2)
        self.assertEqual(lifted.k, 6)
        self.assertTrue(is_bipartite(lifted))


class EvenNodalAcceptanceTests(SimpleTestCase):
    def test_four_domains_are_nodal(self):
        geom = TorusGeometry.of(1, "0.4")
        result, cap_warnings = settled_optimize(geom, OptimizerConfig(k=4, nx=128, ny=48, restarts=8))
        self.assertTrue(result.converged)
        self.assertEqual(cap_warnings, [])
        self.assertLess(abs(result.energy.max_energy - 16 * PI2), 0.05 * 16 * PI2)
        self.assertTrue(is_bipartite(result.partition))


class ThinTorusVerificationTests(SimpleTestCase):
    def test_even_case_passes(self):
        geom = TorusGeometry.of(1, "0.9")
        report = verify_thin_torus(geom, 2, OptimizerConfig(k=2, nx=64, ny=56, restarts=4))
        self.assertIsNone(report.refusal)
        self.assertTrue(report.passed, report.as_dict())

    def test_odd_case_passes(self):
        report = verify_thin_torus(TorusGeometry.of(1, "0.25"), 3, OptimizerConfig(k=3, nx=96, ny=24, restarts=4))
        self.assertTrue(report.passed, report.as_dict())
        self.assertEqual([check.name for check in report.checks][0], "spectrum")

    def test_thick_odd_case_is_refused(self):
        report = verify_thin_torus(TorusGeometry.of(1, "0.5"), 3)
        self.assertIn("HypothesisNotMet", report.refusal)
        self.assertFalse(report.passed)
