from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
import logging
import math
import warnings

import numpy as np
from django.conf import settings

from eigensolver.services import DomainMask, GroundState, SolverDiverged, ground_energy
from spectrum.geometry import TorusGeometry
from topology.grids import label_periodic
from topology.services import GridPartition


logger = logging.getLogger(__name__)

PI2 = math.pi**2


class OptimizerError(Exception):
    pass


class OptimizerConfigError(OptimizerError):
    pass


class NotConverged(UserWarning):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    k: int
    nx: int = 128
    ny: int = 32
    seed: int = 0
    max_outer_iters: int = 300
    reassign_damping: float = 0.95
    weight_step: float = 0.25
    stop_changes: int = 1
    restarts: int = 8
    tol: float = 1e-6

    def __post_init__(self):
        if self.k < 2:
            raise OptimizerConfigError("k must be at least 2")
        for name in ("nx", "ny", "max_outer_iters", "stop_changes", "restarts"):
            if getattr(self, name) < 1:
                raise OptimizerConfigError(f"{name} must be positive")
        if self.seed < 0:
            raise OptimizerConfigError("seed must be non-negative")
        if not 0 < self.reassign_damping <= 1:
            raise OptimizerConfigError("reassign_damping must lie in (0, 1]")
        if self.weight_step <= 0:
            raise OptimizerConfigError("weight_step must be positive")
        if not 0 < self.tol <= 1e-2:
            raise OptimizerConfigError("tol must lie in (0, 1e-2]")
        if self.nx * self.ny < 4 * self.k:
            raise OptimizerConfigError("grid too small for k domains")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PartitionEnergy:
    per_domain: tuple[float, ...]
    max_energy: float
    target: float | None = None

    @property
    def max_over_pi2(self) -> float:
        return self.max_energy / PI2

    def relative_gap(self) -> float | None:
        if self.target is None:
            return None
        return abs(self.max_energy - self.target) / self.target


@dataclass(frozen=True)
class TraceEntry:
    restart: int
    iteration: int
    max_energy: float
    per_domain: tuple[float, ...]
    flips: int


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    partition: GridPartition
    energy: PartitionEnergy
    trace: list[TraceEntry] = field(repr=False)
    converged: bool
    restart: int


def _thread_count() -> int:
    return max(1, int(getattr(settings, "TPL_THREADS", 1)))


def ground_states(part: GridPartition, tol: float = 1e-8) -> list[GroundState]:
    """Dirichlet ground state of every domain, in label order.

    Every solve starts from the all-ones vector on its mask.
    """
    if part.k < 2:
        raise OptimizerError("partition energies need k >= 2")
    masks = [DomainMask(geometry=part.geometry, inside=part.labels == label) for label in range(1, part.k + 1)]

    def solve(index: int) -> GroundState:
        return ground_energy(masks[index], tol=tol, warn_thin=False)

    threads = min(_thread_count(), part.k)
    if threads == 1:
        return [solve(index) for index in range(part.k)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(solve, range(part.k)))


def partition_energy(part: GridPartition, tol: float = 1e-8, target: float | None = None) -> PartitionEnergy:
    """Largest Dirichlet ground energy over the domains of the partition."""
    per_domain = tuple(state.energy for state in ground_states(part, tol=tol))
    return PartitionEnergy(per_domain=per_domain, max_energy=max(per_domain), target=target)


def upper_bound(geom: TorusGeometry, k: int) -> float:
    """k^2 pi^2 min(1, b^-2) on the unit-width normalization T(1, b) of geom."""
    if k < 1:
        raise OptimizerError("k must be at least 1")
    unit, _ = geom.unit_width()
    return k * k * PI2 * min(1.0, unit.b**-2)


def strip_target(geom: TorusGeometry, k: int) -> float:
    """k^2 pi^2 / a^2 for T(a, b) with a >= b."""
    normalized = TorusGeometry.normalized(geom.a, geom.b)
    return (k * math.pi / normalized.a) ** 2


def _voronoi_labels(geom: TorusGeometry, cfg: OptimizerConfig, rng: np.random.Generator) -> np.ndarray:
    seeds = rng.uniform(0, 1, size=(cfg.k, 2)) * (geom.a, geom.b)
    xs = (np.arange(cfg.nx) + 0.5) * geom.a / cfg.nx
    ys = (np.arange(cfg.ny) + 0.5) * geom.b / cfg.ny
    dx = np.abs(xs[None, :, None] - seeds[:, 0, None, None])
    dy = np.abs(ys[None, None, :] - seeds[:, 1, None, None])
    dx = np.minimum(dx, geom.a - dx)
    dy = np.minimum(dy, geom.b - dy)
    return (np.argmin(dx**2 + dy**2, axis=0) + 1).astype(np.int32)


def _boundary_counts(labels: np.ndarray, region: np.ndarray) -> np.ndarray:
    """Shared edge count between the region and each label (index = label)."""
    counts = np.zeros(int(labels.max()) + 1, dtype=np.int64)
    for axis in (0, 1):
        for step in (1, -1):
            neighbour = np.roll(labels, step, axis=axis)
            np.add.at(counts, neighbour[region], 1)
    counts[0] = 0
    return counts


def _absorb_fragments(labels: np.ndarray, k: int) -> np.ndarray:
    """Keep the largest component of each label; hand other pieces to their longest-bordered neighbour."""
    labels = labels.copy()
    for label in range(1, k + 1):
        components, count = label_periodic(labels == label)
        if count <= 1:
            continue
        sizes = np.bincount(components.ravel())[1:]
        keep = int(np.argmax(sizes)) + 1
        labels[(components > 0) & (components != keep)] = 0

    while (labels == 0).any():
        holes, count = label_periodic(labels == 0)
        for hole in range(1, count + 1):
            region = holes == hole
            counts = _boundary_counts(labels, region)
            if counts.max() == 0:
                continue
            labels[region] = int(np.argmax(counts))
    return labels


def _can_give(labels: np.ndarray, ix: int, iy: int) -> bool:
    """Whether the cell's domain stays non-empty and connected without it."""
    region = labels == labels[ix, iy]
    if region.sum() < 2:
        return False
    region[ix, iy] = False
    return label_periodic(region)[1] == 1


def _restore_vanished(labels: np.ndarray, k: int, fields: list[np.ndarray]) -> np.ndarray:
    """Give each label that lost every cell one cell near the peak of its last ground state.

    The cell is taken from a domain that stays non-empty and connected, so every
    restored label gets its own cell and no other label disappears.
    """
    labels = labels.copy()
    for label in range(1, k + 1):
        if (labels == label).any():
            continue
        order = np.argsort(-np.asarray(fields[label - 1], dtype=float).ravel(), kind="stable")
        for flat in order:
            ix, iy = np.unravel_index(int(flat), labels.shape)
            if _can_give(labels, ix, iy):
                logger.debug("Restored vanished domain %s at cell (%s, %s) taken from %s", label, ix, iy, labels[ix, iy])
                labels[ix, iy] = label
                break
        else:
            raise OptimizerError(f"no cell left to restore domain {label}")
    return labels


def _collar(values: np.ndarray, inside: np.ndarray, damping: float) -> np.ndarray:
    """The field extended by one cell: outside neighbours get damping times the mean inside value."""
    total = np.zeros_like(values)
    count = np.zeros_like(values)
    for axis in (0, 1):
        for step in (1, -1):
            total += np.roll(values, step, axis=axis)
            count += np.roll(inside, step, axis=axis)
    extended = values.copy()
    rim = ~inside & (count > 0)
    extended[rim] = damping * total[rim] / count[rim]
    return extended


def _cooling(iteration: int, cfg: OptimizerConfig) -> tuple[float, float]:
    """Weight step and reassignment margin for an iteration.

    The step falls linearly to zero over max_outer_iters while the score ratio a
    cell needs to change label grows without bound, so the labels settle.
    """
    progress = (iteration - 1) / cfg.max_outer_iters
    return cfg.weight_step * (1.0 - progress), 1.0 / (1.0 - progress)


def _reassign(
    labels: np.ndarray,
    states: list[GroundState],
    weights: np.ndarray,
    damping: float,
    margin: float = 1.0,
) -> np.ndarray:
    """Move a cell to the best-scoring domain when it beats its own score by the margin."""
    scores = np.stack(
        [
            weights[j] * _collar(np.abs(state.vector), labels == j + 1, damping)
            for j, state in enumerate(states)
        ]
    )
    best = np.argmax(scores, axis=0)
    own = np.take_along_axis(scores, (labels - 1)[None].astype(np.intp), axis=0)[0]
    challenger = np.take_along_axis(scores, best[None], axis=0)[0]
    moved = challenger > margin * own
    return np.where(moved, best + 1, labels).astype(np.int32)


def _update_weights(weights: np.ndarray, energies: np.ndarray, step: float) -> np.ndarray:
    pressure = 1.0 + step * (energies / energies.mean() - 1.0)
    weights = weights * np.clip(pressure, 0.1, None)
    return weights / weights.mean()


def _run_restart(geom: TorusGeometry, cfg: OptimizerConfig, restart: int, rng: np.random.Generator):
    labels = _absorb_fragments(_voronoi_labels(geom, cfg, rng), cfg.k)
    labels = _restore_vanished(labels, cfg.k, [np.zeros(labels.shape)] * cfg.k)
    weights = np.ones(cfg.k)
    trace: list[TraceEntry] = []
    best: tuple[float, np.ndarray] | None = None
    flips = 0
    converged = False

    for iteration in range(1, cfg.max_outer_iters + 1):
        part = GridPartition(geometry=geom, labels=labels, k=cfg.k)
        try:
            states = ground_states(part, tol=cfg.tol)
        except SolverDiverged as exc:
            if best is None:
                raise
            logger.warning("restart %s stopped at iteration %s: %s", restart, iteration, exc)
            break
        energies = np.array([state.energy for state in states])
        trace.append(
            TraceEntry(
                restart=restart,
                iteration=iteration,
                max_energy=float(energies.max()),
                per_domain=tuple(float(e) for e in energies),
                flips=flips,
            )
        )
        if best is None or energies.max() < best[0]:
            best = (float(energies.max()), labels.copy())
        logger.debug("restart %s iteration %s: max energy %.6g, %s flips", restart, iteration, energies.max(), flips)

        step, margin = _cooling(iteration, cfg)
        weights = _update_weights(weights, energies, step)
        proposed = _reassign(labels, states, weights, cfg.reassign_damping, margin)
        proposed = _absorb_fragments(proposed, cfg.k)
        proposed = _restore_vanished(proposed, cfg.k, [state.vector for state in states])

        flips = int((proposed != labels).sum())
        labels = proposed
        if flips < cfg.stop_changes:
            converged = True
            break

    return best[1], trace, converged


def optimize(geom: TorusGeometry, cfg: OptimizerConfig) -> OptimizationResult:
    """Search for a k-partition of geom with small largest ground energy.

    Each restart starts from a seeded periodic Voronoi partition and alternates
    ground-state solves with weighted reassignment. The best labels seen are
    re-evaluated at full solver accuracy; the best restart wins. A restart whose
    eigensolve diverges is skipped; if every restart fails the last error is raised.
    """
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    target = strip_target(geom, cfg.k)
    outcome: OptimizationResult | None = None
    full_trace: list[TraceEntry] = []
    failure: SolverDiverged | None = None

    for restart, stream in enumerate(streams):
        try:
            labels, trace, converged = _run_restart(geom, cfg, restart, np.random.default_rng(stream))
            full_trace.extend(trace)
            part = GridPartition(geometry=geom, labels=labels, k=cfg.k)
            energy = partition_energy(part, target=target)
        except SolverDiverged as exc:
            logger.warning("Restart %s skipped: %s", restart, exc)
            failure = exc
            continue
        logger.info(
            "Restart %s finished after %s iterations: max energy %.6g (%.4f pi^2)",
            restart,
            len(trace),
            energy.max_energy,
            energy.max_over_pi2,
        )
        if outcome is None or energy.max_energy < outcome.energy.max_energy:
            outcome = OptimizationResult(
                partition=part, energy=energy, trace=full_trace, converged=converged, restart=restart
            )

    if outcome is None:
        raise failure
    if not outcome.converged:
        message = f"optimizer stopped at the iteration cap on {geom} for k={cfg.k}"
        logger.warning(message)
        warnings.warn(message, NotConverged, stacklevel=2)
    return outcome


def scan_thickness(k: int, b_values, cfg: OptimizerConfig) -> list[dict]:
    """Optimized energies across T(1, b) for several b, reported next to k^2 pi^2."""
    cfg = replace(cfg, k=k)
    rows = []
    for b in b_values:
        geom = TorusGeometry.of(1, b)
        result = optimize(geom, cfg)
        rows.append(
            {
                "b": geom.b,
                "k": k,
                "energy": result.energy.max_energy,
                "energy_over_pi2": result.energy.max_over_pi2,
                "k_squared": k * k,
                "below_odd_threshold": geom.b < 1 / k,
                "converged": result.converged,
            }
        )
        logger.info("Thickness scan b=%s: %.4f pi^2 (k^2 = %s)", geom.b, result.energy.max_over_pi2, k * k)
    return rows
