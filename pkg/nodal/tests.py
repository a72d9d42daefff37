import math
import tempfile
from pathlib import Path
from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from spectrum.geometry import EigenIndex, TorusGeometry
from spectrum.services import max_nodal_count

from .exports import write_labels_csv, write_labels_pgm
from .services import (
    DegenerateInput,
    EigenfunctionForm,
    EigenfunctionSpec,
    InsufficientResolution,
    InvalidEigenfunction,
    _newton,
    count_nodal_domains,
    crossing_points,
    evaluate,
    find_critical_zeros,
    knot_components,
    knot_components_by_tracing,
    label_nodal_domains,
    search_critical_zeros,
    sign_grid,
)


THIN = TorusGeometry.of(1, "0.4")


def lemma(m, n, lam, theta):
    return EigenfunctionSpec(mode=EigenIndex(m, n), lam=lam, theta1=theta, form=EigenfunctionForm.LEMMA)


def periodic_gap(geom, p, q):
    dx = abs(p[0] - q[0]) % geom.a
    dy = abs(p[1] - q[1]) % geom.b
    return math.hypot(min(dx, geom.a - dx), min(dy, geom.b - dy))


class EvaluateTests(SimpleTestCase):
    def test_general_form_at_origin(self):
        spec = EigenfunctionSpec(mode=EigenIndex(1, 1), mu=2.5)
        self.assertAlmostEqual(evaluate(spec, THIN, 0.0, 0.0), 2.5)

    def test_product_sin_quarter_period(self):
        spec = EigenfunctionSpec(mode=EigenIndex(1, 1), lam=1.0, form=EigenfunctionForm.PRODUCT_SIN)
        self.assertAlmostEqual(evaluate(spec, THIN, THIN.a / 4, THIN.b / 4), 1.0)

    def test_general_form_vanishes_on_quarter_line(self):
        spec = EigenfunctionSpec(mode=EigenIndex(1, 1), lam=1.0)
        for x in np.linspace(0, 1, 9):
            self.assertAlmostEqual(evaluate(spec, THIN, x, THIN.b / 4), 0.0, places=12)

    def test_periodic_in_both_axes(self):
        spec = lemma(2, 3, 0.7, 0.3)
        rng = np.random.default_rng(5)
        for x, y in rng.uniform(-2, 2, size=(20, 2)):
            self.assertAlmostEqual(evaluate(spec, THIN, x, y), evaluate(spec, THIN, x + THIN.a, y - 3 * THIN.b), places=10)

    def test_lemma_form_uses_sine_in_second_term(self):
        spec = lemma(1, 1, 1.0, 0.0)
        rng = np.random.default_rng(9)
        for x, y in rng.uniform(0, 1, size=(10, 2)):
            X, Y = 2 * math.pi * x, 2 * math.pi * y / THIN.b
            self.assertAlmostEqual(evaluate(spec, THIN, x, y), math.cos(X) * math.cos(Y) + math.sin(X) * math.sin(Y))

    def test_angles_reduced(self):
        spec = EigenfunctionSpec(mode=EigenIndex(1, 1), theta1=5 * math.pi, theta2=-math.pi / 2)
        self.assertAlmostEqual(spec.theta1, math.pi)
        self.assertAlmostEqual(spec.theta2, 1.5 * math.pi)

    def test_rejects_zero_mu_and_degenerate_product_sin(self):
        with self.assertRaises(InvalidEigenfunction):
            EigenfunctionSpec(mode=EigenIndex(1, 1), mu=0.0)
        with self.assertRaises(InvalidEigenfunction):
            EigenfunctionSpec(mode=EigenIndex(1, 1), lam=0.0, form=EigenfunctionForm.PRODUCT_SIN)


class SignGridTests(SimpleTestCase):
    def test_sine_profile_splits_halves(self):
        spec = EigenfunctionSpec(mode=EigenIndex(1, 0), lam=1.0, theta1=math.pi / 2)
        grid = sign_grid(spec, THIN, 8, 4)
        self.assertTrue((grid.signs[:4] == 1).all())
        self.assertTrue((grid.signs[4:] == -1).all())

    def test_refined_grid_agrees_away_from_nodal_set(self):
        geom = TorusGeometry.of(1, 1)
        spec = EigenfunctionSpec(mode=EigenIndex(1, 1), form=EigenfunctionForm.PRODUCT_COS)
        coarse = sign_grid(spec, geom, 16, 16).signs
        fine = sign_grid(spec, geom, 32, 32).signs.reshape(16, 2, 16, 2)
        self.assertTrue((fine == coarse[:, None, :, None]).all())

    def test_minimum_size(self):
        with self.assertRaises(InsufficientResolution):
            sign_grid(EigenfunctionSpec(mode=EigenIndex(0, 0)), THIN, 3, 8)


class NodalCountTests(SimpleTestCase):
    def test_product_of_sines_has_four_domains(self):
        spec = EigenfunctionSpec(mode=EigenIndex(1, 1), lam=1.0, form=EigenfunctionForm.PRODUCT_SIN)
        self.assertEqual(count_nodal_domains(spec, THIN, 32, 32), 4)

    def test_mixed_eigenfunction_has_twice_gcd_domains(self):
        self.assertEqual(count_nodal_domains(lemma(3, 2, 1.0, 0.0), THIN, 96, 64), 2)

    def test_general_form_with_equal_angles_factors(self):
        spec = EigenfunctionSpec(mode=EigenIndex(3, 2), lam=1.0)
        self.assertEqual(count_nodal_domains(spec, THIN, 96, 64), 24)

    def test_pure_horizontal_mode(self):
        spec = EigenfunctionSpec(mode=EigenIndex(3, 0), form=EigenfunctionForm.PRODUCT_COS)
        self.assertEqual(count_nodal_domains(spec, THIN, 96, 8), 6)

    def test_constant_eigenfunction(self):
        self.assertEqual(count_nodal_domains(EigenfunctionSpec(mode=EigenIndex(0, 0)), THIN, 8, 8), 1)

    def test_resolution_floor(self):
        with self.assertRaises(InsufficientResolution):
            count_nodal_domains(lemma(2, 1, 1.0, 0.0), THIN, 32, 32)

    def test_mixed_family_table(self):
        for m in range(1, 5):
            for n in range(1, 5):
                for lam in (-1.0, 0.5, 1.0):
                    for theta in (0.0, math.pi / 4):
                        with self.subTest(m=m, n=n, lam=lam, theta=theta):
                            spec = lemma(m, n, lam, theta)
                            self.assertEqual(count_nodal_domains(spec, THIN, 64 * m, 64 * n), 2 * math.gcd(m, n))

    def test_product_family_table(self):
        for m in range(1, 5):
            for n in range(1, 5):
                with self.subTest(m=m, n=n):
                    spec = EigenfunctionSpec(mode=EigenIndex(m, n), form=EigenfunctionForm.PRODUCT_COS)
                    self.assertEqual(count_nodal_domains(spec, THIN, 64 * m, 64 * n), 4 * m * n)
                    spec = EigenfunctionSpec(mode=EigenIndex(m, n), lam=1.0, form=EigenfunctionForm.LEMMA, theta1=math.pi / 2)
                    self.assertEqual(count_nodal_domains(spec, THIN, 64 * m, 64 * n), 4 * m * n)

    def test_translation_invariance(self):
        rng = np.random.default_rng(21)
        spec = lemma(2, 1, 0.5, math.pi / 4)
        reference = count_nodal_domains(spec, THIN, 128, 64)
        for x0, y0 in rng.uniform(0, 1, size=(6, 2)):
            with self.subTest(x0=x0, y0=y0):
                self.assertEqual(count_nodal_domains(spec, THIN, 128, 64, shift=(x0, y0 * THIN.b)), reference)

    def test_counts_stay_below_analytic_maximum(self):
        geom = TorusGeometry.of(1.0, 1 / math.sqrt(7.3))
        for m, n in [(1, 1), (2, 1), (1, 3), (2, 2)]:
            spec = lemma(m, n, 0.5, 0.0)
            with self.subTest(m=m, n=n):
                self.assertLessEqual(count_nodal_domains(spec, geom, 64 * m, 64 * n), max_nodal_count(geom, EigenIndex(m, n)))

    def test_labels_cover_nonzero_cells(self):
        grid = sign_grid(lemma(1, 1, 1.0, 0.0), THIN, 64, 64)
        labels, count = label_nodal_domains(grid)
        self.assertEqual(count, 2)
        self.assertTrue(((labels == 0) == (grid.signs == 0)).all())


class CriticalZeroTests(SimpleTestCase):
    def test_mixed_eigenfunction_has_no_critical_zero(self):
        self.assertEqual(find_critical_zeros(lemma(1, 1, 1.0, math.pi / 4), THIN, 32), [])

    def test_product_of_cosines_crossings(self):
        spec = EigenfunctionSpec(mode=EigenIndex(1, 1), form=EigenfunctionForm.PRODUCT_COS)
        zeros = find_critical_zeros(spec, THIN, 32)
        expected = crossing_points(spec, THIN)
        self.assertEqual(len(zeros), 4)
        self.assertEqual(len(expected), 4)
        for point in expected:
            self.assertLess(min(periodic_gap(THIN, point, (z.x, z.y)) for z in zeros), 1e-8)
        self.assertTrue(all(z.residual <= 1e-10 for z in zeros))

    def test_product_sin_branch_has_crossings(self):
        spec = EigenfunctionSpec(mode=EigenIndex(1, 1), lam=1.0, form=EigenfunctionForm.PRODUCT_SIN)
        zeros = find_critical_zeros(spec, THIN, 32)
        self.assertEqual(len(zeros), len(crossing_points(spec, THIN)))
        self.assertGreater(len(zeros), 0)

    def test_crossing_count_is_four_mn(self):
        spec = EigenfunctionSpec(mode=EigenIndex(2, 3), form=EigenfunctionForm.PRODUCT_COS)
        self.assertEqual(len(crossing_points(spec, THIN)), 24)
        self.assertEqual(len(find_critical_zeros(spec, THIN, 96)), 24)

    def test_crossing_points_refuse_non_products(self):
        with self.assertRaises(InvalidEigenfunction):
            crossing_points(lemma(1, 1, 1.0, 0.0), THIN)

    def test_random_mixed_eigenfunctions(self):
        rng = np.random.default_rng(1234)
        draws = 0
        while draws < 50:
            lam = rng.uniform(0.1, 2.0) * rng.choice([-1.0, 1.0])
            theta = rng.uniform(0, 2 * math.pi)
            if abs(math.cos(theta)) < 0.1:
                continue
            draws += 1
            with self.subTest(lam=lam, theta=theta):
                search = search_critical_zeros(lemma(1, 1, lam, theta), THIN, 32)
                self.assertEqual(search.zeros, [])

    def test_expected_failures_stay_quiet(self):
        with self.assertNoLogs("nodal.services", level="WARNING"):
            search = search_critical_zeros(lemma(1, 1, 1.0, math.pi / 4), THIN, 32)
        self.assertEqual(search.zeros, [])

    def test_failures_next_to_found_zeros_warn(self):
        spec = EigenfunctionSpec(mode=EigenIndex(1, 1), form=EigenfunctionForm.PRODUCT_COS)

        def spoil_first(*args, **kwargs):
            x, y, residual = _newton(*args, **kwargs)
            residual = residual.copy()
            residual[0] = 1.0
            return x, y, residual

        with mock.patch("nodal.services._newton", side_effect=spoil_first):
            with self.assertLogs("nodal.services", level="WARNING"):
                search = search_critical_zeros(spec, THIN, 32)
        self.assertEqual(len(search.failures), 1)
        self.assertGreater(len(search.zeros), 0)

    def test_seed_resolution_floor(self):
        with self.assertRaises(InsufficientResolution):
            find_critical_zeros(lemma(2, 2, 1.0, 0.0), THIN, 32)


class KnotTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(knot_components(3, 2), 1)
        self.assertEqual(knot_components(4, 2), 2)
        self.assertEqual(knot_components(1, 0), 1)
        self.assertEqual(knot_components(0, 5), 5)

    def test_paths_agree(self):
        for p in range(1, 13):
            for q in range(1, 13):
                self.assertEqual(knot_components_by_tracing(p, q), math.gcd(p, q))

    def test_degenerate(self):
        with self.assertRaises(DegenerateInput):
            knot_components(0, 0)


class NodalExportTests(SimpleTestCase):
    def test_pgm_and_csv(self):
        grid = sign_grid(lemma(1, 1, 1.0, 0.0), THIN, 64, 32)
        labels, _ = label_nodal_domains(grid)
        with tempfile.TemporaryDirectory() as tmp:
            pgm = write_labels_pgm(Path(tmp) / "domains.pgm", labels).read_bytes()
            rows = write_labels_csv(Path(tmp) / "domains.csv", labels).read_text().splitlines()
        self.assertTrue(pgm.startswith(b"P5\n64 32\n255\n"))
        self.assertEqual(len(pgm), len(b"P5\n64 32\n255\n") + 64 * 32)
        self.assertEqual(rows[0], "ix,iy,label")
        self.assertEqual(len(rows), 1 + 64 * 32)
