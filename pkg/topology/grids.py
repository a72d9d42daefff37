from __future__ import annotations

import numpy as np
from scipy import ndimage


# Edge-sharing neighbours only; diagonal contact never merges components.
FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


class UnionFind:
    """Disjoint sets over 0..n-1 with union by size and path compression."""

    def __init__(self, n: int):
        self.parents = np.arange(n)
        self.sizes = np.ones(n, dtype=np.int64)

    def find(self, i: int) -> int:
        root = i
        while self.parents[root] != root:
            root = self.parents[root]
        while self.parents[i] != root:
            self.parents[i], i = root, self.parents[i]
        return int(root)

    def union(self, i: int, j: int) -> int:
        root_i, root_j = self.find(i), self.find(j)
        if root_i == root_j:
            return root_i
        large, small = root_i, root_j
        if self.sizes[root_i] < self.sizes[root_j]:
            large, small = small, large
        self.sizes[large] += self.sizes[small]
        self.sizes[small] = 0
        self.parents[small] = large
        return large


def label_periodic(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """Label the 4-connected components of a boolean (nx, ny) mask on the periodic grid.

    Returns (labels, count); labels are 1..count in order of first appearance
    (C order) and 0 outside the mask.
    """
    mask = np.asarray(mask, dtype=bool)
    labels, count = ndimage.label(mask, structure=FOUR_CONNECTED)
    if count == 0:
        return labels.astype(np.int32), 0

    sets = UnionFind(count + 1)
    seams = (
        (labels[0, :], labels[-1, :]),
        (labels[:, 0], labels[:, -1]),
    )
    for first, last in seams:
        both = (first > 0) & (last > 0)
        for left, right in zip(first[both], last[both]):
            sets.union(int(left), int(right))

    roots = np.array([sets.find(i) for i in range(count + 1)])
    flat = roots[labels].ravel()
    inside = flat > 0
    _, first_seen = np.unique(flat[inside], return_index=True)
    order = np.unique(flat[inside])[np.argsort(first_seen)]
    remap = np.zeros(count + 1, dtype=np.int32)
    remap[order] = np.arange(1, len(order) + 1, dtype=np.int32)
    return remap[roots[labels]], len(order)


def periodic_neighbours(field: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(right, up) shifted copies of a (nx, ny) field on the periodic grid."""
    return np.roll(field, -1, axis=0), np.roll(field, -1, axis=1)
