from fractions import Fraction
import csv
import math
import tempfile
import time
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, override_settings

from .exports import SPECTRUM_CSV_HEADER, write_spectrum_csv
from .geometry import EigenIndex, InvalidGeometry, TorusGeometry
from .services import (
    AmbiguousEigenspace,
    CourantSharpness,
    SearchRadiusExceeded,
    SpectrumError,
    counting_bound,
    courant_index,
    eigenvalue,
    eigenvalue_at,
    enumerate_spectrum,
    is_courant_sharp,
    is_generic,
    max_nodal_count,
    sharp_indices,
)


PI2 = math.pi**2


def brute_force_indices(geom: TorusGeometry, radius: int = 50) -> list[Fraction]:
    """Every eigenvalue / (4 pi^2) with multiplicity, sorted, for m, n <= radius."""
    values: list[Fraction] = []
    for m in range(radius + 1):
        for n in range(radius + 1):
            value = Fraction(m * m) / geom.a_exact**2 + Fraction(n * n) / geom.b_exact**2
            values.extend([value] * EigenIndex(m, n).multiplicity)
    values.sort()
    return values


class GeometryTests(SimpleTestCase):
    def test_normalized_swaps_axes_and_records_it(self):
        geom = TorusGeometry.normalized("0.5", "2")
        self.assertEqual(geom.a, 2.0)
        self.assertEqual(geom.b, 0.5)
        self.assertTrue(geom.swapped)
        self.assertFalse(TorusGeometry.normalized(1, "0.4").swapped)

    def test_rejects_non_positive_circumference(self):
        with self.assertRaises(InvalidGeometry):
            TorusGeometry.of(1, 0)
        with self.assertRaises(InvalidGeometry):
            TorusGeometry.of(-1.0, 0.5)

    def test_string_and_fraction_inputs_are_exact(self):
        self.assertTrue(TorusGeometry.of(1, "0.4").is_exact)
        self.assertTrue(TorusGeometry.of(1, Fraction(2, 5)).is_exact)
        self.assertFalse(TorusGeometry.of(1, 0.4).is_exact)

    def test_unit_width_rescales_to_a_equal_one(self):
        geom, scale = TorusGeometry.of(1, 2).unit_width()
        self.assertEqual(geom.a, 1.0)
        self.assertEqual(geom.b, 0.5)
        self.assertEqual(scale, Fraction(1, 2))


class EigenvalueTests(SimpleTestCase):
    def test_ground_state_is_zero(self):
        self.assertEqual(eigenvalue(TorusGeometry.of(1, "0.5"), EigenIndex(0, 0)), 0.0)

    def test_first_horizontal_mode(self):
        self.assertAlmostEqual(eigenvalue(TorusGeometry.of(1, "0.4"), EigenIndex(1, 0)), 4 * PI2, places=10)

    def test_first_vertical_mode(self):
        self.assertAlmostEqual(eigenvalue(TorusGeometry.of(1, "0.4"), EigenIndex(0, 1)), 25 * PI2, places=9)

    def test_scaling_covariance(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            a, b, s = rng.uniform(0.2, 2.0, size=3)
            m, n = (int(v) for v in rng.integers(0, 8, size=2))
            with self.subTest(a=a, b=b, s=s, m=m, n=n):
                base = eigenvalue(TorusGeometry.of(a, b), EigenIndex(m, n))
                scaled = eigenvalue(TorusGeometry.of(s * a, s * b), EigenIndex(m, n))
                self.assertAlmostEqual(scaled, base / s**2, delta=1e-9 * max(1.0, base / s**2))

    def test_square_torus_symmetry(self):
        geom = TorusGeometry.of(1, 1)
        for m in range(6):
            for n in range(6):
                self.assertEqual(eigenvalue(geom, EigenIndex(m, n)), eigenvalue(geom, EigenIndex(n, m)))


class EnumerateSpectrumTests(SimpleTestCase):
    def test_thin_torus_first_entries(self):
        entries = enumerate_spectrum(TorusGeometry.of(1, "0.4"), 5)
        self.assertEqual([entry.value_over_pi2 for entry in entries], [0, 4, 16, 25, 29])
        self.assertEqual([entry.multiplicity for entry in entries], [1, 2, 2, 2, 4])
        self.assertEqual(eigenvalue_at(TorusGeometry.of(1, "0.4"), 4).value_over_pi2, 16)

    def test_covering_torus_sixth_eigenvalue(self):
        geom = TorusGeometry.of(2, "0.5")
        entries = enumerate_spectrum(geom, 4)
        self.assertEqual([entry.value_over_pi2 for entry in entries], [0, 1, 4, 9])
        self.assertEqual([entry.multiplicity for entry in entries], [1, 2, 2, 2])
        sixth = eigenvalue_at(geom, 6)
        self.assertEqual(sixth.value_over_pi2, 9)
        self.assertEqual(sixth.modes, (EigenIndex(3, 0),))
        self.assertEqual(sixth.first_index, 6)
        self.assertEqual(sixth.courant_sharp, CourantSharpness.YES)

    def test_square_torus_merges_axes(self):
        entries = enumerate_spectrum(TorusGeometry.of(1, 1), 2)
        self.assertEqual([entry.value_over_pi2 for entry in entries], [0, 4])
        self.assertEqual([entry.multiplicity for entry in entries], [1, 4])
        self.assertEqual(entries[1].courant_sharp, CourantSharpness.UNDETERMINED)
        self.assertFalse(is_generic(entry.modes for entry in entries))

    def test_matches_brute_force_in_rational_mode(self):
        started = time.perf_counter()
        geom = TorusGeometry.of(1, "0.4")
        expected = brute_force_indices(geom)[:12]
        entries = enumerate_spectrum(geom, 12)
        flat = [entry.exact for entry in entries for _ in range(entry.multiplicity)][:12]
        self.assertEqual(flat, expected)
        self.assertEqual(flat[1], flat[2])
        self.assertEqual(4 * flat[1], 4)
        self.assertEqual(4 * flat[3], 16)
        self.assertLess(time.perf_counter() - started, 1.0)

    def test_entries_are_ordered_and_indexed(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            a, b = sorted(rng.uniform(0.2, 1.5, size=2), reverse=True)
            geom = TorusGeometry.of(float(a), float(b))
            with self.subTest(a=a, b=b):
                entries = enumerate_spectrum(geom, 30)
                expected_first = 1
                for previous, entry in zip([None] + entries[:-1], entries):
                    self.assertEqual(entry.first_index, expected_first)
                    expected_first += entry.multiplicity
                    if previous is not None:
                        self.assertGreater(entry.value, previous.value)
                    self.assertEqual(entry.multiplicity, sum(mode.multiplicity for mode in entry.modes))

    def test_matches_brute_force_for_random_geometries(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a, b = rng.uniform(0.3, 1.2, size=2)
            geom = TorusGeometry.of(float(a), float(b))
            with self.subTest(a=a, b=b):
                entries = enumerate_spectrum(geom, 15)
                flat = [entry.value for entry in entries for _ in range(entry.multiplicity)]
                radius = 40
                brute = sorted(
                    eigenvalue(geom, EigenIndex(m, n))
                    for m in range(radius + 1)
                    for n in range(radius + 1)
                    for _ in range(EigenIndex(m, n).multiplicity)
                )
                np.testing.assert_allclose(flat, brute[: len(flat)], rtol=1e-12, atol=1e-12)

    def test_generic_multiplicities_follow_zero_pattern(self):
        entries = enumerate_spectrum(TorusGeometry.of(1.0, 1 / math.sqrt(7.3)), 25)
        self.assertTrue(is_generic(entry.modes for entry in entries))
        for entry in entries:
            (mode,) = entry.modes
            self.assertIn(entry.multiplicity, {1, 2, 4})
            self.assertEqual(entry.multiplicity, mode.multiplicity)

    def test_rejects_zero_count(self):
        with self.assertRaises(SpectrumError):
            enumerate_spectrum(TorusGeometry.of(1, "0.4"), 0)

    @override_settings(TPL_SEARCH_RADIUS_CAP=4)
    def test_radius_cap_overflow(self):
        with self.assertRaises(SearchRadiusExceeded):
            enumerate_spectrum(TorusGeometry.of(1, "0.4"), 100)


class CourantTests(SimpleTestCase):
    def test_courant_index_examples(self):
        geom = TorusGeometry.of(1, "0.4")
        self.assertEqual(courant_index(geom, EigenIndex(1, 1)), 8)
        self.assertGreaterEqual(courant_index(geom, EigenIndex(1, 1)), counting_bound(EigenIndex(1, 1)))
        self.assertEqual(courant_index(geom, EigenIndex(2, 0)), 4)
        for b in ("0.4", "0.9", 0.73):
            self.assertEqual(courant_index(TorusGeometry.of(1, b), EigenIndex(0, 0)), 1)

    def test_courant_index_matches_enumeration(self):
        geom = TorusGeometry.of(1, "0.37")
        entries = enumerate_spectrum(geom, 40)
        for entry in entries:
            for mode in entry.modes:
                self.assertEqual(courant_index(geom, mode), entry.first_index)

    def test_max_nodal_count_examples(self):
        geom = TorusGeometry.of(1, "0.4")
        self.assertEqual(max_nodal_count(geom, EigenIndex(2, 3)), 24)
        self.assertEqual(max_nodal_count(geom, EigenIndex(3, 0)), 6)
        self.assertEqual(max_nodal_count(geom, EigenIndex(0, 0)), 1)

    def test_max_nodal_count_refuses_merged_eigenspace(self):
        # 5^2 = 2^2 / 0.4^2, so (5,0) and (0,2) share an eigenvalue
        with self.assertRaises(AmbiguousEigenspace):
            max_nodal_count(TorusGeometry.of(1, "0.4"), EigenIndex(5, 0))
        self.assertEqual(is_courant_sharp(TorusGeometry.of(1, "0.4"), EigenIndex(0, 2)), CourantSharpness.UNDETERMINED)

    def test_sharpness_examples(self):
        geom = TorusGeometry.of(1, "0.4")
        self.assertEqual(is_courant_sharp(geom, EigenIndex(1, 0)), CourantSharpness.YES)
        self.assertEqual(is_courant_sharp(geom, EigenIndex(1, 1)), CourantSharpness.NO)
        self.assertEqual(is_courant_sharp(geom, EigenIndex(2, 0)), CourantSharpness.YES)

    def test_no_sharp_pair_with_both_indices_positive(self):
        started = time.perf_counter()
        for b in ("0.37", "0.61", "0.83"):
            geom = TorusGeometry.of(1, b)
            for m in range(1, 7):
                for n in range(1, 7):
                    idx = EigenIndex(m, n)
                    with self.subTest(b=b, m=m, n=n):
                        self.assertGreaterEqual(courant_index(geom, idx), counting_bound(idx))
                        self.assertEqual(is_courant_sharp(geom, idx), CourantSharpness.NO)
        self.assertLess(time.perf_counter() - started, 10.0)

    def test_only_first_two_sharp_near_square(self):
        started = time.perf_counter()
        self.assertEqual(sharp_indices(TorusGeometry.of(1, "0.97"), 40), [1, 2])
        self.assertLess(time.perf_counter() - started, 5.0)


class SpectrumExportTests(SimpleTestCase):
    def test_csv_rows_follow_indices(self):
        geom = TorusGeometry.of(1, "0.4")
        with tempfile.TemporaryDirectory() as tmp:
            path = write_spectrum_csv(Path(tmp) / "spectrum.csv", enumerate_spectrum(geom, 10), 10)
            with path.open(encoding="utf-8") as handle:
                reader = csv.DictReader(handle)
                self.assertEqual(reader.fieldnames, SPECTRUM_CSV_HEADER)
                rows = list(reader)
        self.assertEqual(len(rows), 10)
        self.assertEqual(rows[3]["index"], "4")
        self.assertEqual(rows[3]["value_over_pi2"], "16")
        self.assertEqual((rows[3]["m"], rows[3]["n"]), ("2", "0"))
        self.assertEqual(rows[1]["courant_sharp"], "yes")
        self.assertEqual(rows[7]["courant_index"], "8")
        self.assertEqual(rows[3]["max_nodal_count"], "4")
        self.assertEqual(rows[7]["max_nodal_count"], "4")

    def test_shared_eigenvalue_leaves_nodal_count_blank(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_spectrum_csv(Path(tmp) / "spectrum.csv", enumerate_spectrum(TorusGeometry.of(1, 1), 2), 5)
            with path.open(encoding="utf-8") as handle:
                rows = list(csv.DictReader(handle))
        self.assertEqual(rows[0]["max_nodal_count"], "1")
        self.assertEqual({row["max_nodal_count"] for row in rows[1:]}, {""})
