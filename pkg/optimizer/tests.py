import json
import math
import tempfile
from dataclasses import replace
from pathlib import Path
from unittest import mock

import numpy as np
from django.test import SimpleTestCase, override_settings

from eigensolver.services import SolverDiverged, ground_energy
from spectrum.geometry import TorusGeometry
from topology.services import GridPartition, strip_partition

from .exports import TRACE_CSV_HEADER, write_trace_csv, write_trace_json
from .serializers import load_config, parse_config
from .services import (
    OptimizerConfig,
    OptimizerConfigError,
    OptimizerError,
    _absorb_fragments,
    _cooling,
    _reassign,
    _restore_vanished,
    ground_states,
    optimize,
    partition_energy,
    scan_thickness,
    strip_target,
    upper_bound,
)
from .verification import (
    HypothesisNotMet,
    strip_spectrum_check,
    default_config,
    require_thin,
    thickness_threshold,
    verify_thin_torus,
)


PI2 = math.pi**2
THIN = TorusGeometry.of(1, "0.25")
SMALL = OptimizerConfig(k=2, nx=32, ny=8, restarts=2, max_outer_iters=15, seed=5)


class PartitionEnergyTests(SimpleTestCase):
    def test_three_strips(self):
        energy = partition_energy(strip_partition(THIN, 3, 96, 24), target=9 * PI2)
        self.assertEqual(len(energy.per_domain), 3)
        self.assertEqual(energy.max_energy, max(energy.per_domain))
        self.assertLess(energy.relative_gap(), 0.01)
        for value in energy.per_domain:
            self.assertAlmostEqual(value, energy.max_energy, delta=1e-6 * energy.max_energy)

    def test_two_strips_on_thicker_torus(self):
        energy = partition_energy(strip_partition(TorusGeometry.of(1, "0.75"), 2, 64, 48))
        self.assertLess(abs(energy.max_energy - 4 * PI2), 0.01 * 4 * PI2)
        self.assertAlmostEqual(energy.max_over_pi2, energy.max_energy / PI2)

    @override_settings(TPL_THREADS=3)
    def test_thread_pool_gives_same_energies(self):
        part = strip_partition(THIN, 3, 48, 12)
        pooled = partition_energy(part).per_domain
        with self.settings(TPL_THREADS=1):
            serial = partition_energy(part).per_domain
        self.assertEqual(pooled, serial)

    def test_whole_torus_is_rejected(self):
        with self.assertRaises(OptimizerError):
            partition_energy(strip_partition(THIN, 1, 16, 4))


class BoundTests(SimpleTestCase):
    def test_upper_bound_examples(self):
        self.assertAlmostEqual(upper_bound(THIN, 3), 9 * PI2)
        self.assertAlmostEqual(upper_bound(TorusGeometry.of(1, 1), 2), 4 * PI2)
        self.assertAlmostEqual(upper_bound(TorusGeometry.of(1, 2), 3), 9 * PI2)

    def test_strip_target_uses_longer_side(self):
        self.assertAlmostEqual(strip_target(TorusGeometry.of(2, 1), 2), PI2)
        self.assertAlmostEqual(strip_target(TorusGeometry.of(1, 2), 2), PI2)

    def test_thresholds(self):
        self.assertEqual(thickness_threshold(2), 1)
        self.assertEqual(float(thickness_threshold(3)), 1 / 3)
        self.assertEqual(float(thickness_threshold(4)), 0.5)

    def test_require_thin(self):
        self.assertEqual(require_thin(TorusGeometry.of(4, 1), 3).b, 0.25)
        with self.assertRaises(HypothesisNotMet):
            require_thin(TorusGeometry.of(1, "0.5"), 3)
        with self.assertRaises(HypothesisNotMet):
            require_thin(TorusGeometry.of(1, 1), 2)


class OptimizerConfigTests(SimpleTestCase):
    def test_defaults(self):
        cfg = parse_config({"k": 3})
        self.assertEqual((cfg.nx, cfg.ny, cfg.restarts, cfg.seed), (128, 32, 8, 0))
        self.assertEqual(cfg.as_dict()["reassign_damping"], 0.95)

    def test_rejects_invalid_values(self):
        for data in ({"k": 1}, {"k": 3, "reassign_damping": 0}, {"k": 3, "weight_step": -1}, {"k": 3, "nx": 0}):
            with self.subTest(data=data), self.assertRaises(OptimizerConfigError):
                parse_config(data)

    def test_dataclass_guards(self):
        with self.assertRaises(OptimizerConfigError):
            OptimizerConfig(k=1)
        with self.assertRaises(OptimizerConfigError):
            OptimizerConfig(k=3, tol=0.5)

    def test_file_and_overrides(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "cfg.json"
            path.write_text(json.dumps({"k": 3, "nx": 64, "ny": 16, "seed": 4}), encoding="utf-8")
            cfg = load_config(path, seed=9, restarts=None)
        self.assertEqual((cfg.k, cfg.nx, cfg.ny, cfg.seed, cfg.restarts), (3, 64, 16, 9, 8))

    def test_missing_or_malformed_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(OptimizerConfigError):
                load_config(Path(tmp) / "absent.json")
            broken = Path(tmp) / "broken.json"
            broken.write_text("{k: 3", encoding="utf-8")
            with self.assertRaises(OptimizerConfigError):
                load_config(broken)

    def test_default_config_grid(self):
        self.assertEqual(default_config(THIN, 3).ny, 32)
        self.assertEqual(default_config(TorusGeometry.of(1, "0.4"), 4).ny, 48)
        self.assertEqual(default_config(THIN, 3, restarts=2).restarts, 2)


class FragmentTests(SimpleTestCase):
    def test_stray_piece_joins_its_neighbour(self):
        labels = np.ones((16, 16), dtype=np.int32)
        labels[2:6, 2:6] = 2
        labels[10, 10] = 2
        absorbed = _absorb_fragments(labels, 2)
        self.assertEqual(absorbed[10, 10], 1)
        self.assertEqual(int((absorbed == 2).sum()), 16)
        GridPartition(geometry=TorusGeometry.of(1, 1), labels=absorbed, k=2)

    def test_largest_component_survives(self):
        labels = np.ones((12, 12), dtype=np.int32)
        labels[:, 0:4] = 2
        labels[:, 6] = 2
        absorbed = _absorb_fragments(labels, 2)
        self.assertTrue((absorbed[:, 0:4] == 2).all())
        self.assertTrue((absorbed[:, 6] == 1).all())

    def test_vanished_label_is_restored_at_peak(self):
        labels = np.ones((10, 10), dtype=np.int32)
        peak = np.zeros((10, 10))
        peak[0, 5] = 1.0
        restored = _restore_vanished(labels, 2, [np.zeros((10, 10)), peak])
        self.assertEqual(int((restored == 2).sum()), 1)
        self.assertEqual(restored[0, 5], 2)
        self.assertTrue((labels == 1).all())

    def test_vanished_labels_get_distinct_cells(self):
        labels = np.ones((6, 6), dtype=np.int32)
        labels[:, 3:] = 2
        restored = _restore_vanished(labels, 4, [np.zeros((6, 6))] * 4)
        for label in range(1, 5):
            with self.subTest(label=label):
                self.assertTrue((restored == label).any())
        GridPartition(geometry=TorusGeometry.of(1, 1), labels=restored, k=4)

    def test_restoring_never_erases_a_small_domain(self):
        labels = np.ones((10, 10), dtype=np.int32)
        labels[0, 0] = 2
        peak = np.zeros((10, 10))
        peak[0, 0] = 1.0
        restored = _restore_vanished(labels, 3, [None, None, peak])
        self.assertEqual(restored[0, 0], 2)
        self.assertEqual(int((restored == 3).sum()), 1)
        GridPartition(geometry=TorusGeometry.of(1, 1), labels=restored, k=3)

    def test_reassignment_margin(self):
        labels = np.ones((8, 8), dtype=np.int32)
        labels[4:, :] = 2
        part = GridPartition(geometry=TorusGeometry.of(1, 1), labels=labels, k=2)
        states = ground_states(part, tol=1e-6)
        favoured = np.array([1.0, 1.5])
        moved = _reassign(labels, states, favoured, 1.0)
        self.assertGreater(int((moved != labels).sum()), 0)
        frozen = _reassign(labels, states, favoured, 1.0, margin=100.0)
        np.testing.assert_array_equal(frozen, labels)

    def test_cooling_schedule(self):
        cfg = OptimizerConfig(k=2, nx=16, ny=16, max_outer_iters=10, weight_step=0.5)
        self.assertEqual(_cooling(1, cfg), (0.5, 1.0))
        steps, margins = zip(*(_cooling(i, cfg) for i in range(1, 11)))
        self.assertEqual(list(steps), sorted(steps, reverse=True))
        self.assertEqual(list(margins), sorted(margins))
        self.assertAlmostEqual(margins[-1], 10.0)


class OptimizeTests(SimpleTestCase):
    def test_result_is_a_valid_partition(self):
        result = optimize(THIN, SMALL)
        self.assertEqual(result.partition.k, 2)
        self.assertEqual(result.partition.labels.shape, (32, 8))
        self.assertEqual(result.energy.max_energy, max(result.energy.per_domain))
        self.assertTrue(all(value > 0 for value in result.energy.per_domain))
        self.assertEqual({entry.restart for entry in result.trace}, {0, 1})

    def test_deterministic_for_a_seed(self):
        first = optimize(THIN, SMALL)
        second = optimize(THIN, SMALL)
        self.assertEqual(first.trace, second.trace)
        np.testing.assert_array_equal(first.partition.labels, second.partition.labels)
        self.assertEqual(first.energy.per_domain, second.energy.per_domain)

    def test_many_domains_on_a_coarse_grid(self):
        geom = TorusGeometry.of(1, "0.5")
        for seed in range(20):
            with self.subTest(seed=seed):
                cfg = OptimizerConfig(k=12, nx=8, ny=8, seed=seed, restarts=1, max_outer_iters=30)
                result = optimize(geom, cfg)
                self.assertEqual(set(np.unique(result.partition.labels).tolist()), set(range(1, 13)))

    def test_small_run_settles(self):
        result = optimize(THIN, replace(SMALL, restarts=1, max_outer_iters=60))
        self.assertTrue(result.converged)
        self.assertEqual(result.trace[-1].iteration, len(result.trace))
        self.assertLess(len(result.trace), 60)

    def test_solves_start_cold(self):
        with mock.patch("optimizer.services.ground_energy", wraps=ground_energy) as solver:
            optimize(THIN, replace(SMALL, restarts=1, max_outer_iters=3))
        self.assertTrue(solver.called)
        for call in solver.call_args_list:
            self.assertNotIn("initial", call.kwargs)

    def test_diverged_restart_is_skipped(self):
        calls = {"count": 0}

        def flaky(part, tol=1e-8):
            calls["count"] += 1
            if calls["count"] == 1:
                raise SolverDiverged("no convergence")
            return ground_states(part, tol=tol)

        with mock.patch("optimizer.services.ground_states", side_effect=flaky):
            result = optimize(THIN, replace(SMALL, max_outer_iters=5))
        self.assertEqual(result.restart, 1)
        self.assertEqual({entry.restart for entry in result.trace}, {1})

    def test_every_restart_diverging_raises(self):
        with mock.patch("optimizer.services.ground_states", side_effect=SolverDiverged("no convergence")):
            with self.assertRaises(SolverDiverged):
                optimize(THIN, SMALL)

    def test_scan_reports_rows(self):
        rows = scan_thickness(3, ["0.25", "0.4"], replace(SMALL, nx=48, ny=12, restarts=1, max_outer_iters=5))
        self.assertEqual([row["b"] for row in rows], [0.25, 0.4])
        self.assertEqual([row["below_odd_threshold"] for row in rows], [True, False])
        self.assertTrue(all(row["k_squared"] == 9 for row in rows))

    def test_trace_exports(self):
        result = optimize(THIN, replace(SMALL, restarts=1, max_outer_iters=3))
        with tempfile.TemporaryDirectory() as tmp:
            csv_path = write_trace_csv(Path(tmp) / "trace.csv", result.trace)
            json_path = write_trace_json(Path(tmp) / "trace.json", result.trace)
            lines = csv_path.read_text(encoding="utf-8").splitlines()
            entries = json.loads(json_path.read_text(encoding="utf-8"))
        self.assertEqual(lines[0], ",".join(TRACE_CSV_HEADER))
        self.assertEqual(len(lines) - 1, len(result.trace))
        self.assertEqual(len(entries), len(result.trace))
        self.assertEqual(entries[0]["iteration"], 1)


class ThinTorusReportTests(SimpleTestCase):
    def test_refuses_thick_torus(self):
        report = verify_thin_torus(TorusGeometry.of(1, "0.5"), 3)
        self.assertFalse(report.passed)
        self.assertTrue(report.refusal.startswith("HypothesisNotMet"))
        self.assertEqual(report.checks, [])
        self.assertIsNone(report.as_dict()["energy"])

    def test_refuses_single_domain(self):
        report = verify_thin_torus(THIN, 1)
        self.assertFalse(report.passed)
        self.assertIsNotNone(report.refusal)

    def test_spectrum_check_by_parity(self):
        cases = [(THIN, 3), (TorusGeometry.of(1, "0.9"), 2), (TorusGeometry.of(1, "0.4"), 4)]
        for geom, k in cases:
            with self.subTest(geom=str(geom), k=k):
                self.assertTrue(strip_spectrum_check(geom, k).passed)
