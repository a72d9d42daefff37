from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
import logging
import math

import numpy as np
from django.conf import settings
from django.db import models

from .geometry import EigenIndex, TorusGeometry


logger = logging.getLogger(__name__)

FOUR_PI2 = 4.0 * math.pi**2
INT64_SAFE = 2**62


class SpectrumError(Exception):
    pass


class SearchRadiusExceeded(SpectrumError):
    pass


class AmbiguousEigenspace(SpectrumError):
    pass


class CourantSharpness(models.TextChoices):
    YES = "yes", "Yes"
    NO = "no", "No"
    UNDETERMINED = "undetermined", "Undetermined"


@dataclass(frozen=True)
class SpectrumEntry:
    value: float
    modes: tuple[EigenIndex, ...]
    multiplicity: int
    first_index: int
    courant_sharp: CourantSharpness
    exact: Fraction | None = None  # lambda / (4 pi^2) in rational mode

    @property
    def value_over_pi2(self) -> float:
        if self.exact is not None:
            return float(4 * self.exact)
        return self.value / math.pi**2

    @property
    def last_index(self) -> int:
        return self.first_index + self.multiplicity - 1


def _group_tolerance() -> float:
    return float(getattr(settings, "TPL_GROUP_TOLERANCE", 1e-9))


def _radius_cap() -> int:
    return int(getattr(settings, "TPL_SEARCH_RADIUS_CAP", 10**6))


def analytic_nodal_count(idx: EigenIndex) -> int:
    if idx.m >= 1 and idx.n >= 1:
        return 4 * idx.m * idx.n
    if idx.m >= 1:
        return 2 * idx.m
    if idx.n >= 1:
        return 2 * idx.n
    return 1


def eigenvalue(geom: TorusGeometry, idx: EigenIndex) -> float:
    rational = geom.rational_eigenvalue()
    if rational is not None:
        return FOUR_PI2 * float(rational.value(idx.m, idx.n))
    return FOUR_PI2 * (idx.m**2 / geom.a**2 + idx.n**2 / geom.b**2)


class _ModeTable:
    """All modes (m, n) with m <= rm, n <= rn and their sort keys.

    In rational mode the keys are integers proportional to lambda; otherwise they
    are lambda / (4 pi^2) as floats.
    """

    def __init__(self, geom: TorusGeometry, rm: int, rn: int):
        self.geom = geom
        self.rm = rm
        self.rn = rn
        rational = geom.rational_eigenvalue()
        m = np.arange(rm + 1)
        n = np.arange(rn + 1)
        if rational is not None:
            cm, cn, scale = rational.integer_weights()
            self.scale = scale
            self.weights = (cm, cn)
            if cm * (rm + 1) ** 2 + cn * (rn + 1) ** 2 < INT64_SAFE:
                mm, nn = np.int64(cm) * m.astype(np.int64) ** 2, np.int64(cn) * n.astype(np.int64) ** 2
            else:
                mm = np.array([cm * int(v) ** 2 for v in m], dtype=object)
                nn = np.array([cn * int(v) ** 2 for v in n], dtype=object)
        else:
            self.scale = None
            self.weights = (1.0 / geom.a**2, 1.0 / geom.b**2)
            mm, nn = m.astype(float) ** 2 * self.weights[0], n.astype(float) ** 2 * self.weights[1]
        self.keys = mm[:, None] + nn[None, :]

    @property
    def exact(self) -> bool:
        return self.scale is not None

    def key(self, m: int, n: int):
        return self.weights[0] * m * m + self.weights[1] * n * n

    def bound(self):
        """Smallest key any mode outside the table can have."""
        return min(self.key(self.rm + 1, 0), self.key(0, self.rn + 1))

    def to_fraction(self, key) -> Fraction | None:
        if not self.exact:
            return None
        return Fraction(int(key), self.scale)

    def to_value(self, key) -> float:
        if self.exact:
            return FOUR_PI2 * float(Fraction(int(key), self.scale))
        return FOUR_PI2 * float(key)

    def rows_below(self, limit) -> list[tuple]:
        """(key, m, n) for every mode with key < limit, sorted."""
        mask = np.asarray(self.keys < limit, dtype=bool)
        ms, ns = np.nonzero(mask)
        rows = [(self.keys[i, j], int(i), int(j)) for i, j in zip(ms, ns)]
        rows.sort()
        return rows

    def same(self, key, other) -> bool:
        if self.exact:
            return key == other
        if key == 0 or other == 0:
            return key == other
        return abs(other - key) <= _group_tolerance() * abs(key)


def _radii(geom: TorusGeometry, radius: int) -> tuple[int, int]:
    longest = max(geom.a, geom.b)
    return (
        math.ceil(radius * geom.a / longest) + 1,
        math.ceil(radius * geom.b / longest) + 1,
    )


def _sharpness(modes: tuple[EigenIndex, ...], first_index: int) -> CourantSharpness:
    if not is_generic([modes]):
        return CourantSharpness.UNDETERMINED
    if analytic_nodal_count(modes[0]) == first_index:
        return CourantSharpness.YES
    return CourantSharpness.NO


def _group_rows(table: _ModeTable, rows: list[tuple], count: int) -> list[SpectrumEntry]:
    entries: list[SpectrumEntry] = []
    next_index = 1
    position = 0
    while position < len(rows) and len(entries) < count:
        group_key = rows[position][0]
        end = position
        while end < len(rows) and table.same(group_key, rows[end][0]):
            end += 1
        modes = tuple(EigenIndex(m, n) for _, m, n in rows[position:end])
        multiplicity = sum(mode.multiplicity for mode in modes)
        entries.append(
            SpectrumEntry(
                value=table.to_value(group_key),
                modes=modes,
                multiplicity=multiplicity,
                first_index=next_index,
                courant_sharp=_sharpness(modes, next_index),
                exact=table.to_fraction(group_key),
            )
        )
        next_index += multiplicity
        position = end
    return entries


def enumerate_spectrum(geom: TorusGeometry, count: int) -> list[SpectrumEntry]:
    """First `count` distinct eigenvalues of T(a, b), each with its modes and multiplicity.

    The entries cover at least `count` spectral indices. The search radius doubles
    until the last needed value is certified below every mode outside the searched
    rectangle.
    """
    if count < 1:
        raise SpectrumError("count must be at least 1")

    cap = _radius_cap()
    radius = math.ceil(math.sqrt(count) * max(geom.a, geom.b)) + 2
    while True:
        if radius > cap:
            raise SearchRadiusExceeded(
                f"Mode search radius {radius} exceeds the cap {cap} for count={count} on {geom}"
            )
        table = _ModeTable(geom, *_radii(geom, radius))
        bound = table.bound()
        rows = table.rows_below(bound)
        entries = _group_rows(table, rows, count)
        if len(entries) >= count:
            logger.debug("Enumerated %s eigenvalues of %s with radius %s", count, geom, radius)
            return entries
        radius *= 2


def is_generic(groups: Iterable[Sequence[EigenIndex]]) -> bool:
    """True when no eigenvalue group merges two distinct mode pairs.

    The analytic nodal count only applies to generic groups.
    """
    return all(len(modes) == 1 for modes in groups)


def _eigenspace(geom: TorusGeometry, idx: EigenIndex) -> tuple[tuple[EigenIndex, ...], int]:
    """(modes sharing the eigenvalue of idx, 1-based first index of that eigenvalue)."""
    if idx.m == 0 and idx.n == 0:
        return (idx,), 1

    key_value = idx.m**2 / geom.a**2 + idx.n**2 / geom.b**2
    tolerance = 1.0 + 4 * _group_tolerance()
    rm = math.floor(math.sqrt(key_value * tolerance) * geom.a) + 1
    rn = math.floor(math.sqrt(key_value * tolerance) * geom.b) + 1
    cap = _radius_cap()
    if max(rm, rn) > cap:
        raise SearchRadiusExceeded(f"Mode search radius {max(rm, rn)} exceeds the cap {cap} for {idx} on {geom}")

    table = _ModeTable(geom, rm, rn)
    target = table.keys[idx.m, idx.n]
    below = 0
    modes: list[EigenIndex] = []
    for key, m, n in table.rows_below(table.bound()):
        if table.same(target, key):
            modes.append(EigenIndex(m, n))
        elif key < target:
            below += EigenIndex(m, n).multiplicity
    return tuple(modes), below + 1


def courant_index(geom: TorusGeometry, idx: EigenIndex) -> int:
    """Minimal k with lambda_k equal to the eigenvalue of idx."""
    _, first_index = _eigenspace(geom, idx)
    return first_index


def max_nodal_count(geom: TorusGeometry, idx: EigenIndex) -> int:
    modes, _ = _eigenspace(geom, idx)
    if not is_generic([modes]):
        raise AmbiguousEigenspace(
            f"Eigenvalue of {idx} on {geom} is shared by {', '.join(str(mode) for mode in modes)}"
        )
    return analytic_nodal_count(idx)


def is_courant_sharp(geom: TorusGeometry, idx: EigenIndex) -> CourantSharpness:
    try:
        count = max_nodal_count(geom, idx)
    except AmbiguousEigenspace:
        return CourantSharpness.UNDETERMINED
    return CourantSharpness.YES if count == courant_index(geom, idx) else CourantSharpness.NO


def counting_bound(idx: EigenIndex) -> int:
    """Lower bound on the Courant index obtained by counting smaller modes."""
    return 4 * idx.m * idx.n + 2 * idx.m + 2 * idx.n - 2


def sharp_indices(geom: TorusGeometry, count: int) -> list[int]:
    """First indices of the Courant-sharp entries among the first `count` eigenvalues."""
    return [
        entry.first_index
        for entry in enumerate_spectrum(geom, count)
        if entry.first_index <= count and entry.courant_sharp == CourantSharpness.YES
    ]


def eigenvalue_at(geom: TorusGeometry, index: int) -> SpectrumEntry:
    """The entry holding the `index`-th eigenvalue (1-based)."""
    for entry in enumerate_spectrum(geom, index):
        if entry.first_index <= index <= entry.last_index:
            return entry
    raise SpectrumError(f"Index {index} not covered")  # unreachable when enumeration succeeds
