import math

import numpy as np
from django.test import SimpleTestCase

from spectrum.geometry import TorusGeometry

from .services import (
    DomainMask,
    InsufficientResolutions,
    InvalidMask,
    MaskTooThin,
    convergence_order,
    fitted_order,
    ground_energy,
    rectangle_mask,
    strip_family,
    strip_mask,
    unit_square_family,
)


PI2 = math.pi**2


def grown_region(rng, shape, sizes):
    """Nested connected regions grown cell by cell from the grid centre."""
    inside = np.zeros(shape, dtype=bool)
    start = (shape[0] // 2, shape[1] // 2)
    inside[start] = True
    frontier = {start}
    regions = []
    for size in sizes:
        while inside.sum() < size:
            cells = sorted(frontier)
            i, j = cells[int(rng.integers(len(cells)))]
            di, dj = ((1, 0), (-1, 0), (0, 1), (0, -1))[int(rng.integers(4))]
            cell = ((i + di) % shape[0], (j + dj) % shape[1])
            if not inside[cell]:
                inside[cell] = True
                frontier.add(cell)
        regions.append(inside.copy())
    return regions


class DomainMaskTests(SimpleTestCase):
    def test_rejects_empty_full_and_disconnected(self):
        geom = TorusGeometry.of(1, 1)
        with self.assertRaises(InvalidMask):
            DomainMask(geometry=geom, inside=np.zeros((8, 8), dtype=bool))
        with self.assertRaises(InvalidMask):
            DomainMask(geometry=geom, inside=np.ones((8, 8), dtype=bool))
        split = np.zeros((8, 8), dtype=bool)
        split[1, 1] = split[5, 5] = True
        with self.assertRaises(InvalidMask):
            DomainMask(geometry=geom, inside=split)

    def test_wrapping_strip_is_connected(self):
        mask = strip_mask(TorusGeometry.of(1, "0.25"), 16, 8, 0.9, 0.2)
        self.assertEqual(mask.cells, 4 * 8)
        self.assertTrue(mask.inside[0].all() and mask.inside[-1].all())


class GroundEnergyTests(SimpleTestCase):
    def test_strip_energy(self):
        mask = strip_mask(TorusGeometry.of(1, "0.25"), 256, 64, 0.0, 1 / 3)
        state = ground_energy(mask)
        self.assertLess(abs(state.energy - 9 * PI2), 0.01 * 9 * PI2)

    def test_unit_square(self):
        mask = rectangle_mask(TorusGeometry.of(2, 2), 512, 512, 0.5, 0.5, 1.0, 1.0)
        state = ground_energy(mask)
        self.assertLess(abs(state.energy - 2 * PI2), 0.01 * 2 * PI2)
        self.assertLessEqual(state.residual, 1e-8 * state.energy)

    def test_long_rectangle_exceeds_height_bound(self):
        mask = rectangle_mask(TorusGeometry.of(4, 1), 256, 64, 0.5, 0.25, 3.0, 0.5)
        self.assertGreater(ground_energy(mask).energy, PI2 / 0.5**2)

    def test_ground_state_is_positive_and_normalized(self):
        mask = rectangle_mask(TorusGeometry.of(1, 1), 48, 48, 0.2, 0.3, 0.5, 0.4)
        state = ground_energy(mask)
        self.assertTrue((state.vector[mask.inside] > 0).all())
        self.assertTrue((state.vector[~mask.inside] == 0).all())
        self.assertAlmostEqual(float((state.vector**2).sum() * mask.cell_area), 1.0, places=10)

    def test_one_cell_strip_warns(self):
        mask = strip_mask(TorusGeometry.of(1, "0.25"), 16, 8, 0.0, 1 / 16)
        with self.assertWarns(MaskTooThin):
            state = ground_energy(mask)
        self.assertAlmostEqual(state.energy, 4 * 16**2, places=5)

    def test_warm_start_reaches_same_energy(self):
        mask = rectangle_mask(TorusGeometry.of(1, 1), 40, 40, 0.1, 0.1, 0.6, 0.5)
        cold = ground_energy(mask)
        warm = ground_energy(mask, initial=cold.vector)
        self.assertAlmostEqual(warm.energy, cold.energy, delta=1e-9 * cold.energy)
        self.assertLessEqual(warm.iterations, cold.iterations)


class EigensolverPropertyTests(SimpleTestCase):
    def test_domain_monotonicity(self):
        rng = np.random.default_rng(8)
        geom = TorusGeometry.of(1, 1)
        for trial in range(5):
            small, large = grown_region(rng, (24, 24), (80, 200))
            with self.subTest(trial=trial):
                e_small = ground_energy(DomainMask(geometry=geom, inside=small), warn_thin=False).energy
                e_large = ground_energy(DomainMask(geometry=geom, inside=large), warn_thin=False).energy
                self.assertGreaterEqual(e_small, e_large * (1 - 1e-9))

    def test_scaling(self):
        inside = rectangle_mask(TorusGeometry.of(1, 1), 32, 32, 0.2, 0.2, 0.5, 0.3).inside
        base = ground_energy(DomainMask(geometry=TorusGeometry.of(1, 1), inside=inside)).energy
        for s in (0.5, 2.0, 3.0):
            scaled = ground_energy(DomainMask(geometry=TorusGeometry.of(s, s), inside=inside)).energy
            self.assertAlmostEqual(scaled, base / s**2, delta=1e-8 * base / s**2)

    def test_translation_invariance(self):
        rng = np.random.default_rng(2)
        geom = TorusGeometry.of(1, "0.5")
        (inside,) = grown_region(rng, (32, 16), (120,))
        base = ground_energy(DomainMask(geometry=geom, inside=inside), warn_thin=False).energy
        for shift in rng.integers(0, 32, size=(4, 2)):
            shifted = np.roll(inside, tuple(int(s) for s in shift), axis=(0, 1))
            energy = ground_energy(DomainMask(geometry=geom, inside=shifted), warn_thin=False).energy
            self.assertAlmostEqual(energy, base, delta=1e-9 * base)


class ConvergenceOrderTests(SimpleTestCase):
    def test_unit_square_family(self):
        order = convergence_order(unit_square_family())
        self.assertGreaterEqual(order, 1.8)
        self.assertLessEqual(order, 2.2)

    def test_strip_family(self):
        order = convergence_order(strip_family())
        self.assertGreaterEqual(order, 1.8)
        self.assertLessEqual(order, 2.2)

    def test_single_resolution_is_rejected(self):
        with self.assertRaises(InsufficientResolutions):
            fitted_order([1 / 64], [20.0], 2 * PI2)
        with self.assertRaises(InsufficientResolutions):
            fitted_order([1 / 64, 1 / 64, 1 / 64], [20.0, 20.0, 20.0], 2 * PI2)
