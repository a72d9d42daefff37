import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from spectrum.geometry import TorusGeometry

from .containers import ContainerFormatError, dump_partition, load_partition, parse_partition, save_partition
from .grids import label_periodic
from .services import (
    GridPartition,
    IndivisibleResolution,
    InvalidPartition,
    NotAnnular,
    adjacency_graph,
    band_partition,
    boundary_direction_histogram,
    check_euler_identity,
    critical_points,
    domain_topology,
    euler_characteristic,
    is_bipartite,
    lift_partition,
    strip_partition,
    topology_report,
    winding_pair,
)


THIN = TorusGeometry.of(1, "0.25")


def blob_partition(n=8, size=3) -> GridPartition:
    labels = np.ones((n, n), dtype=np.int32)
    start = (n - size) // 2
    labels[start : start + size, start : start + size] = 2
    return GridPartition(geometry=TorusGeometry.of(1, 1), labels=labels, k=2)


def t_junction_partition() -> GridPartition:
    labels = np.ones((8, 8), dtype=np.int32)
    labels[4:, :4] = 2
    labels[4:, 4:] = 3
    return GridPartition(geometry=TorusGeometry.of(1, 1), labels=labels, k=3)


def ring_partition() -> GridPartition:
    labels = np.ones((12, 12), dtype=np.int32)
    labels[2:10, 2:10] = 2
    labels[4:8, 4:8] = 3
    return GridPartition(geometry=TorusGeometry.of(1, 1), labels=labels, k=3)


def random_voronoi_partition(rng, k, nx=24, ny=24) -> GridPartition:
    """Periodic nearest-seed partition with fragments merged into a neighbour."""
    seeds = rng.uniform(0, 1, size=(k, 2))
    xs = (np.arange(nx) + 0.5) / nx
    ys = (np.arange(ny) + 0.5) / ny
    dx = np.abs(xs[None, :, None] - seeds[:, 0, None, None])
    dy = np.abs(ys[None, None, :] - seeds[:, 1, None, None])
    dist = np.minimum(dx, 1 - dx) ** 2 + np.minimum(dy, 1 - dy) ** 2
    labels = np.argmin(dist, axis=0).astype(np.int32) + 1
    relabeled = np.zeros_like(labels)
    next_label = 1
    for label in range(1, k + 1):
        components, count = label_periodic(labels == label)
        if count == 0:
            continue
        sizes = np.bincount(components.ravel())[1:]
        keep = int(np.argmax(sizes)) + 1
        relabeled[components == keep] = next_label
        next_label += 1
    # cells of dropped fragments take any labelled 4-neighbour until none remain
    while (relabeled == 0).any():
        for axis in (0, 1):
            for step in (1, -1):
                neighbour = np.roll(relabeled, step, axis=axis)
                fill = (relabeled == 0) & (neighbour > 0)
                relabeled[fill] = neighbour[fill]
    return GridPartition.from_labels(TorusGeometry.of(1, 1), relabeled)


class GridPartitionTests(SimpleTestCase):
    def test_rejects_missing_label(self):
        labels = np.ones((4, 4), dtype=np.int32)
        with self.assertRaises(InvalidPartition):
            GridPartition(geometry=THIN, labels=labels, k=2)

    def test_rejects_disconnected_domain(self):
        labels = np.ones((4, 4), dtype=np.int32)
        labels[::2, ::2] = 2
        labels[1::2, 1::2] = 2
        with self.assertRaises(InvalidPartition):
            GridPartition(geometry=THIN, labels=labels, k=2)

    def test_domain_connected_across_seam(self):
        labels = np.ones((8, 4), dtype=np.int32)
        labels[0, :] = 2
        labels[7, :] = 2
        self.assertEqual(GridPartition(geometry=THIN, labels=labels, k=2).k, 2)

    def test_labels_are_read_only(self):
        part = strip_partition(THIN, 2, 8, 4)
        with self.assertRaises(ValueError):
            part.labels[0, 0] = 2


class StripPartitionTests(SimpleTestCase):
    def test_three_strips(self):
        part = strip_partition(THIN, 3, 96, 24)
        self.assertEqual(part.cell_counts(), {1: 32 * 24, 2: 32 * 24, 3: 32 * 24})
        self.assertTrue((part.labels[:32] == 1).all())
        self.assertTrue((part.labels[64:] == 3).all())

    def test_single_domain(self):
        part = strip_partition(THIN, 1, 16, 8)
        self.assertTrue((part.labels == 1).all())

    def test_indivisible(self):
        with self.assertRaises(IndivisibleResolution):
            strip_partition(THIN, 5, 96, 24)


class EulerTests(SimpleTestCase):
    def test_whole_torus(self):
        self.assertEqual(euler_characteristic(strip_partition(THIN, 1, 16, 8), 1), 0)

    def test_block_is_a_disk(self):
        part = blob_partition()
        self.assertEqual(euler_characteristic(part, 2), 1)
        self.assertEqual(euler_characteristic(part, 1), -1)

    def test_strip_is_an_annulus(self):
        part = strip_partition(THIN, 3, 96, 24)
        for label in (1, 2, 3):
            self.assertEqual(euler_characteristic(part, label), 0)

    def test_ring(self):
        part = ring_partition()
        self.assertEqual(euler_characteristic(part, 2), 0)
        self.assertEqual(euler_characteristic(part, 3), 1)
        self.assertEqual(check_euler_identity(part), 0)


class CriticalPointTests(SimpleTestCase):
    def test_strips_have_none(self):
        for k in range(1, 6):
            self.assertEqual(critical_points(strip_partition(THIN, k, 60, 12)), [])

    def test_t_junctions(self):
        points = critical_points(t_junction_partition())
        self.assertEqual(len(points), 4)
        self.assertTrue(all(point.valence == 3 for point in points))

    def test_four_domain_corner(self):
        labels = np.ones((8, 8), dtype=np.int32)
        labels[4:, :4] = 2
        labels[:4, 4:] = 3
        labels[4:, 4:] = 4
        points = critical_points(GridPartition(geometry=TorusGeometry.of(1, 1), labels=labels, k=4))
        self.assertEqual(sorted(point.valence for point in points), [4, 4, 4, 4])


class EulerIdentityTests(SimpleTestCase):
    def test_strips(self):
        for k in range(1, 7):
            self.assertEqual(check_euler_identity(strip_partition(THIN, k, 60, 12)), 0)

    def test_disk_in_background(self):
        part = blob_partition()
        self.assertEqual(critical_points(part), [])
        self.assertEqual(check_euler_identity(part), 0)

    def test_t_junction_fixture(self):
        self.assertEqual(check_euler_identity(t_junction_partition()), 0)

    def test_random_partitions(self):
        rng = np.random.default_rng(17)
        for trial in range(25):
            k = int(rng.integers(2, 7))
            part = random_voronoi_partition(rng, k)
            with self.subTest(trial=trial, k=part.k):
                self.assertEqual(check_euler_identity(part), 0)
                topology = domain_topology(part)
                self.assertEqual(topology.euler_residual_twice, 0)
                no_disks = all(chi <= 0 for chi in topology.euler.values())
                if no_disks:
                    self.assertTrue(all(chi == 0 for chi in topology.euler.values()))
                    self.assertEqual(topology.critical_points, [])


class WindingTests(SimpleTestCase):
    def test_strip(self):
        part = strip_partition(THIN, 3, 96, 24)
        for label in (1, 2, 3):
            self.assertEqual(winding_pair(part, label), (1, 0))

    def test_diagonal_band(self):
        part = band_partition(TorusGeometry.of(1, 1), 3, 48, 48)
        for label in (1, 2, 3):
            self.assertEqual(euler_characteristic(part, label), 0)
            self.assertEqual(winding_pair(part, label), (1, 1))

    def test_horizontal_band(self):
        labels = np.ones((16, 8), dtype=np.int32)
        labels[:, 4:] = 2
        part = GridPartition(geometry=THIN, labels=labels, k=2)
        self.assertEqual(winding_pair(part, 1), (0, 1))

    def test_contractible_ring(self):
        self.assertEqual(winding_pair(ring_partition(), 2), (0, 0))

    def test_disk_is_not_annular(self):
        with self.assertRaises(NotAnnular):
            winding_pair(blob_partition(), 2)
        with self.assertRaises(NotAnnular):
            winding_pair(strip_partition(THIN, 1, 8, 4), 1)


class AdjacencyTests(SimpleTestCase):
    def test_even_strips_are_bipartite(self):
        self.assertTrue(is_bipartite(strip_partition(THIN, 4, 96, 24)))
        self.assertEqual(sorted(adjacency_graph(strip_partition(THIN, 4, 96, 24)).edges), [(1, 2), (1, 4), (2, 3), (3, 4)])

    def test_odd_strips_are_not(self):
        self.assertFalse(is_bipartite(strip_partition(THIN, 3, 96, 24)))

    def test_single_domain(self):
        graph = adjacency_graph(strip_partition(THIN, 1, 8, 4))
        self.assertEqual(graph.number_of_edges(), 0)
        self.assertTrue(is_bipartite(strip_partition(THIN, 1, 8, 4)))

    def test_strip_parity(self):
        for k in range(2, 8):
            part = strip_partition(THIN, k, 420, 6)
            self.assertEqual(is_bipartite(part), k % 2 == 0)
            self.assertTrue(is_bipartite(lift_partition(part, 2, 2)))


class LiftTests(SimpleTestCase):
    def test_strip_lift(self):
        lifted = lift_partition(strip_partition(THIN, 3, 96, 24), 2, 2)
        self.assertEqual(lifted.k, 6)
        self.assertEqual((lifted.geometry.a, lifted.geometry.b), (2.0, 0.5))
        self.assertEqual(lifted.labels.shape, (192, 48))
        self.assertTrue(is_bipartite(lifted))
        self.assertTrue(all(winding_pair(lifted, label) == (1, 0) for label in range(1, 7)))

    def test_band_lift(self):
        lifted = lift_partition(band_partition(TorusGeometry.of(1, 1), 3, 48, 48), 2, 2)
        self.assertEqual(lifted.k, 6)
        self.assertTrue(is_bipartite(lifted))

    def test_identity_lift(self):
        part = t_junction_partition()
        lifted = lift_partition(part, 1, 1)
        self.assertEqual(lifted.k, part.k)
        np.testing.assert_array_equal(lifted.labels, part.labels)

    def test_disk_lifts_to_four_copies(self):
        lifted = lift_partition(blob_partition(), 2, 2)
        self.assertEqual(lifted.k, 5)


class ContainerTests(SimpleTestCase):
    def test_round_trip(self):
        part = t_junction_partition()
        with tempfile.TemporaryDirectory() as tmp:
            loaded = load_partition(save_partition(Path(tmp) / "part.tpl", part))
        np.testing.assert_array_equal(loaded.labels, part.labels)
        self.assertEqual(loaded.k, 3)
        self.assertEqual((loaded.geometry.a, loaded.geometry.b), (1.0, 1.0))

    def test_rejects_bad_payloads(self):
        payload = dump_partition(strip_partition(THIN, 2, 8, 4))
        for broken in (b"nonsense", payload[:-4], b"TPLPART\x02" + payload[8:]):
            with self.assertRaises(ContainerFormatError):
                parse_partition(broken)

    def test_report_is_json(self):
        report = json.loads(json.dumps(topology_report(strip_partition(THIN, 3, 96, 24))))
        self.assertEqual(report["k"], 3)
        self.assertEqual([d["winding"] for d in report["domains"]], [[1, 0]] * 3)
        self.assertEqual(report["critical_points"], [])
        self.assertFalse(report["bipartite"])
        self.assertTrue(math.isclose(sum(d["area"] for d in report["domains"]), 0.25))


class BoundaryHistogramTests(SimpleTestCase):
    def test_strips_only_have_vertical_segments(self):
        histogram = boundary_direction_histogram(strip_partition(THIN, 3, 96, 24))
        self.assertEqual(histogram, {"vertical": 3 * 24, "horizontal": 0})
