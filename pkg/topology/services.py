from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
import logging
import math

import networkx as nx
import numpy as np

from spectrum.geometry import TorusGeometry

from .grids import label_periodic, periodic_neighbours


logger = logging.getLogger(__name__)


class PartitionError(Exception):
    pass


class InvalidPartition(PartitionError):
    pass


class IndivisibleResolution(PartitionError):
    pass


class NotAnnular(PartitionError):
    pass


@dataclass(frozen=True, eq=False)
class GridPartition:
    """A k-partition of T(a, b) as a label field on an (nx, ny) periodic grid.

    ``labels[i, j]`` is the domain of the cell [i a/nx, (i+1) a/nx) x [j b/ny, (j+1) b/ny).
    """

    geometry: TorusGeometry
    labels: np.ndarray = field(repr=False)
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2 or min(labels.shape) < 1:
            raise InvalidPartition("labels must be a non-empty 2D array")
        if not np.issubdtype(labels.dtype, np.integer):
            raise InvalidPartition("labels must be integers")
        labels = labels.astype(np.int32)
        if self.k < 1:
            raise InvalidPartition("k must be at least 1")
        if labels.min() < 1 or labels.max() > self.k:
            raise InvalidPartition(f"labels must lie in 1..{self.k}")
        present = np.unique(labels)
        if len(present) != self.k:
            missing = sorted(set(range(1, self.k + 1)) - set(present.tolist()))
            raise InvalidPartition(f"labels {missing} do not occur")
        for label in range(1, self.k + 1):
            _, components = label_periodic(labels == label)
            if components != 1:
                raise InvalidPartition(f"domain {label} has {components} connected components")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, geometry: TorusGeometry, labels) -> GridPartition:
        labels = np.asarray(labels)
        return cls(geometry=geometry, labels=labels, k=int(labels.max()))

    @property
    def nx(self) -> int:
        return self.labels.shape[0]

    @property
    def ny(self) -> int:
        return self.labels.shape[1]

    def cell_counts(self) -> dict[int, int]:
        counts = np.bincount(self.labels.ravel(), minlength=self.k + 1)
        return {label: int(counts[label]) for label in range(1, self.k + 1)}


@dataclass(frozen=True)
class CriticalPoint:
    ix: int
    iy: int
    x: float
    y: float
    valence: int


@dataclass(frozen=True)
class DomainTopology:
    euler: dict[int, int]
    winding: dict[int, tuple[int, int] | None]
    critical_points: list[CriticalPoint]
    euler_residual_twice: int


def strip_partition(geom: TorusGeometry, k: int, nx: int, ny: int) -> GridPartition:
    """k vertical strips of equal width, each wrapping the vertical cycle."""
    if k < 1:
        raise InvalidPartition("k must be at least 1")
    if nx % k:
        raise IndivisibleResolution(f"nx={nx} is not divisible by k={k}")
    column = 1 + (k * np.arange(nx)) // nx
    labels = np.repeat(column[:, None], ny, axis=1)
    return GridPartition(geometry=geom, labels=labels, k=k)


def band_partition(geom: TorusGeometry, k: int, nx: int, ny: int) -> GridPartition:
    """k diagonal bands of equal area along the direction x/a + y/b = const."""
    if k < 1:
        raise InvalidPartition("k must be at least 1")
    u = (np.arange(nx)[:, None] + 0.5) / nx + (np.arange(ny)[None, :] + 0.5) / ny
    labels = 1 + np.floor(k * np.mod(u, 1.0)).astype(np.int32) % k
    return GridPartition(geometry=geom, labels=labels, k=k)


def _corner_blocks(labels: np.ndarray) -> tuple[np.ndarray, ...]:
    """The four cells around every dual vertex, in cyclic order.

    Vertex (i, j) is the corner shared by cells (i, j), (i+1, j), (i+1, j+1), (i, j+1).
    """
    right, up = periodic_neighbours(labels)
    diagonal = np.roll(right, -1, axis=1)
    return labels, right, diagonal, up


def euler_characteristic(part: GridPartition, label: int) -> int:
    """Euler characteristic V - E + F of one domain's cell complex.

    Around each grid vertex the domain's cells are split into edge-connected
    groups and each group contributes its own vertex, so domains touching
    themselves only at a corner are not pinched.
    """
    if label < 1 or label > part.k:
        raise PartitionError(f"label {label} not in 1..{part.k}")
    inside = part.labels == label
    faces = int(inside.sum())
    right, up = periodic_neighbours(inside)
    shared = int((inside & right).sum() + (inside & up).sum())
    edges = 4 * faces - shared

    cycle = [block == label for block in _corner_blocks(part.labels)]
    present = sum(c.astype(np.int64) for c in cycle)
    linked = sum((cycle[s] & cycle[(s + 1) % 4]).astype(np.int64) for s in range(4))
    groups = present - linked + (present == 4)
    vertices = int(groups.sum())
    return vertices - edges + faces


def _valences(part: GridPartition) -> np.ndarray:
    c0, c1, c2, c3 = _corner_blocks(part.labels)
    return (c0 != c1).astype(np.int64) + (c1 != c2) + (c2 != c3) + (c3 != c0)


def critical_points(part: GridPartition) -> list[CriticalPoint]:
    """Grid vertices where the boundary set branches (valence 3 or 4)."""
    valence = _valences(part)
    points = []
    for ix, iy in zip(*np.nonzero(valence >= 3)):
        points.append(
            CriticalPoint(
                ix=int(ix),
                iy=int(iy),
                x=((ix + 1) % part.nx) * part.geometry.a / part.nx,
                y=((iy + 1) % part.ny) * part.geometry.b / part.ny,
                valence=int(valence[ix, iy]),
            )
        )
    return points


def check_euler_identity(part: GridPartition) -> int:
    """2 * (sum of chi - sum of (valence/2 - 1)); zero for every valid partition."""
    total = sum(euler_characteristic(part, label) for label in range(1, part.k + 1))
    return 2 * total - sum(point.valence - 2 for point in critical_points(part))


def _cycle_vectors(part: GridPartition, label: int) -> list[tuple[int, int]]:
    """Wrap vectors of closed loops in the domain, found by lifting it to the plane."""
    inside = part.labels == label
    nx_, ny_ = inside.shape
    wraps: dict[tuple[int, int], tuple[int, int]] = {}
    start = tuple(int(v) for v in np.argwhere(inside)[0])
    wraps[start] = (0, 0)
    queue = deque([start])
    vectors: set[tuple[int, int]] = set()
    while queue:
        i, j = queue.popleft()
        wx, wy = wraps[(i, j)]
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = i + di, j + dj
            shift = (ni // nx_, nj // ny_)
            ni, nj = ni % nx_, nj % ny_
            if not inside[ni, nj]:
                continue
            lifted = (wx + shift[0], wy + shift[1])
            seen = wraps.get((ni, nj))
            if seen is None:
                wraps[(ni, nj)] = lifted
                queue.append((ni, nj))
            elif seen != lifted:
                vectors.add((lifted[0] - seen[0], lifted[1] - seen[1]))
    return sorted(vectors)


def winding_pair(part: GridPartition, label: int) -> tuple[int, int]:
    """(p, q) of an annular domain: p crossings of the cut y = 0, q of the cut x = 0.

    A vertical strip gives (1, 0); a contractible ring gives (0, 0).
    """
    chi = euler_characteristic(part, label)
    if chi != 0:
        raise NotAnnular(f"domain {label} has Euler characteristic {chi}")
    if part.k == 1:
        raise NotAnnular("the whole torus is not an annulus")
    for wx, wy in _cycle_vectors(part, label):
        divisor = math.gcd(wx, wy)
        if divisor:
            return abs(wy) // divisor, abs(wx) // divisor
    return 0, 0


def domain_topology(part: GridPartition) -> DomainTopology:
    euler = {label: euler_characteristic(part, label) for label in range(1, part.k + 1)}
    winding: dict[int, tuple[int, int] | None] = {}
    for label, chi in euler.items():
        winding[label] = winding_pair(part, label) if chi == 0 and part.k > 1 else None
    points = critical_points(part)
    residual = 2 * sum(euler.values()) - sum(point.valence - 2 for point in points)
    return DomainTopology(euler=euler, winding=winding, critical_points=points, euler_residual_twice=residual)


def adjacency_graph(part: GridPartition) -> nx.Graph:
    """Domains as vertices, an edge wherever two domains share a boundary segment."""
    graph = nx.Graph()
    graph.add_nodes_from(range(1, part.k + 1))
    for neighbour in periodic_neighbours(part.labels):
        differs = part.labels != neighbour
        pairs = np.stack([part.labels[differs], neighbour[differs]], axis=1)
        pairs.sort(axis=1)
        graph.add_edges_from((int(u), int(v)) for u, v in np.unique(pairs, axis=0))
    return graph


def is_bipartite(part: GridPartition) -> bool:
    return nx.is_bipartite(adjacency_graph(part))


def lift_partition(part: GridPartition, fx: int = 2, fy: int = 2) -> GridPartition:
    """Pull the partition back to the fx*fy-fold covering torus.

    Each pulled-back domain splits into its connected components; new labels
    follow (original label, first cell) order, so the (1, 1) lift is the identity.
    """
    if fx not in (1, 2) or fy not in (1, 2):
        raise PartitionError("covering factors must be 1 or 2")
    tiled = np.tile(part.labels, (fx, fy))
    lifted = np.zeros_like(tiled)
    next_label = 1
    for label in range(1, part.k + 1):
        components, count = label_periodic(tiled == label)
        inside = components > 0
        lifted[inside] = components[inside] + next_label - 1
        next_label += count
    lifted_part = GridPartition(geometry=part.geometry.covering(fx, fy), labels=lifted, k=next_label - 1)
    logger.debug("Lifted %s-partition by (%s, %s) to %s domains", part.k, fx, fy, lifted_part.k)
    return lifted_part


def boundary_direction_histogram(part: GridPartition) -> dict[str, int]:
    """Boundary segments by direction: vertical ones separate left/right neighbours."""
    right, up = periodic_neighbours(part.labels)
    return {
        "vertical": int((part.labels != right).sum()),
        "horizontal": int((part.labels != up).sum()),
    }


def topology_report(part: GridPartition) -> dict:
    topology = domain_topology(part)
    counts = part.cell_counts()
    cell_area = part.geometry.area / (part.nx * part.ny)
    return {
        "geometry": {"a": part.geometry.a, "b": part.geometry.b},
        "resolution": {"nx": part.nx, "ny": part.ny},
        "k": part.k,
        "domains": [
            {
                "label": label,
                "cells": counts[label],
                "area": counts[label] * cell_area,
                "euler": topology.euler[label],
                "winding": list(topology.winding[label]) if topology.winding[label] is not None else None,
            }
            for label in range(1, part.k + 1)
        ],
        "critical_points": [
            {"x": point.x, "y": point.y, "valence": point.valence} for point in topology.critical_points
        ],
        "euler_residual_twice": topology.euler_residual_twice,
        "bipartite": is_bipartite(part),
        "boundary_directions": boundary_direction_histogram(part),
    }
