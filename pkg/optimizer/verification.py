from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
import logging
import math

from spectrum.geometry import EigenIndex, TorusGeometry
from spectrum.services import CourantSharpness, eigenvalue_at, is_courant_sharp
from topology.services import (
    GridPartition,
    check_euler_identity,
    critical_points,
    domain_topology,
    is_bipartite,
    lift_partition,
)

from .services import (
    PI2,
    OptimizationResult,
    OptimizerConfig,
    OptimizerError,
    optimize,
    upper_bound,
)


logger = logging.getLogger(__name__)

ENERGY_SLACK = 0.05
ENVELOPE_SLACK = 0.10


class HypothesisNotMet(OptimizerError):
    pass


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ThinTorusReport:
    geometry: TorusGeometry
    k: int
    threshold: float
    refusal: str | None = None
    checks: list[CheckOutcome] = field(default_factory=list)
    result: OptimizationResult | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.refusal is None and bool(self.checks) and all(check.passed for check in self.checks)

    @property
    def partition(self) -> GridPartition | None:
        return self.result.partition if self.result is not None else None

    def as_dict(self) -> dict:
        energy = self.result.energy if self.result is not None else None
        return {
            "geometry": {"a": self.geometry.a, "b": self.geometry.b},
            "k": self.k,
            "threshold": self.threshold,
            "refusal": self.refusal,
            "passed": self.passed,
            "energy": energy.max_energy if energy is not None else None,
            "energy_over_pi2": energy.max_over_pi2 if energy is not None else None,
            "target_over_pi2": self.k * self.k,
            "converged": self.result.converged if self.result is not None else None,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }


def thickness_threshold(k: int) -> Fraction:
    """Largest b for which k strips are known minimal on T(1, b): 2/k for even k, 1/k for odd k."""
    if k < 2:
        raise OptimizerError("k must be at least 2")
    return Fraction(2, k) if k % 2 == 0 else Fraction(1, k)


def require_thin(geom: TorusGeometry, k: int) -> TorusGeometry:
    """The unit-width normalization of geom, provided it is thinner than the threshold for k."""
    unit, _ = geom.unit_width()
    threshold = thickness_threshold(k)
    b = unit.b_exact if unit.b_exact is not None else unit.b
    if b >= threshold:
        raise HypothesisNotMet(f"b = {unit.b:g} is not below b_k = {float(threshold):g} for k = {k}")
    return unit


def default_config(geom: TorusGeometry, k: int, **overrides) -> OptimizerConfig:
    """128 cells across the width and a multiple of 16 across the height, near-square cells."""
    ny = max(16, 16 * round(8 * geom.b / geom.a))
    return replace(OptimizerConfig(k=k, nx=128, ny=ny), **overrides)


def strip_spectrum_check(unit: TorusGeometry, k: int) -> CheckOutcome:
    """lambda = k^2 pi^2 with a Courant-sharp strip mode: on T(1, b) for even k, on T(2, 2b) for odd k."""
    target = k * k * PI2
    if k % 2 == 0:
        geom, index, mode = unit, k, EigenIndex(k // 2, 0)
    else:
        geom, index, mode = unit.covering(2, 2), 2 * k, EigenIndex(k, 0)
    entry = eigenvalue_at(geom, index)
    sharp = is_courant_sharp(geom, mode)
    passed = (
        math.isclose(entry.value, target, rel_tol=1e-9)
        and mode in entry.modes
        and sharp == CourantSharpness.YES
    )
    detail = f"lambda_{index}({geom}) = {entry.value_over_pi2:.6g} pi^2, mode {mode} sharp={sharp}"
    return CheckOutcome("spectrum", passed, detail)


def _partition_checks(result: OptimizationResult, unit: TorusGeometry, k: int) -> list[CheckOutcome]:
    part = result.partition
    energy = result.energy.max_energy
    target = k * k * PI2
    topology = domain_topology(part)
    points = critical_points(part)
    residual = check_euler_identity(part)
    lifted = lift_partition(part, 2, 2)
    lifted_bipartite = is_bipartite(lifted)
    envelope = upper_bound(unit, k)
    return [
        CheckOutcome(
            "energy",
            abs(energy - target) <= ENERGY_SLACK * target,
            f"{energy / PI2:.6g} pi^2 against {k * k} pi^2",
        ),
        CheckOutcome(
            "no_disks",
            all(chi != 1 for chi in topology.euler.values()),
            f"euler characteristics {sorted(topology.euler.values())}",
        ),
        CheckOutcome("no_critical_points", not points, f"{len(points)} critical points"),
        CheckOutcome("euler_identity", residual == 0, f"residual {residual}"),
        CheckOutcome(
            "lift",
            lifted.k == 2 * k and lifted_bipartite,
            f"(2,2)-lift has {lifted.k} domains, bipartite={lifted_bipartite}",
        ),
        CheckOutcome(
            "upper_bound",
            energy <= (1 + ENVELOPE_SLACK) * envelope,
            f"{energy / PI2:.6g} pi^2 against envelope {envelope / PI2:.6g} pi^2",
        ),
    ]


def verify_thin_torus(geom: TorusGeometry, k: int, cfg: OptimizerConfig | None = None) -> ThinTorusReport:
    """Optimize a k-partition of a thin torus and check it against the strip certificate.

    Problems are recorded in the report; nothing is raised.
    """
    try:
        threshold = float(thickness_threshold(k))
    except OptimizerError as exc:
        return ThinTorusReport(geometry=geom, k=k, threshold=math.nan, refusal=str(exc))
    report = ThinTorusReport(geometry=geom, k=k, threshold=threshold)
    try:
        unit = require_thin(geom, k)
    except HypothesisNotMet as exc:
        report.refusal = f"HypothesisNotMet: {exc}"
        logger.info("Thin-torus check refused on %s for k=%s: %s", geom, k, exc)
        return report
    report.geometry = unit

    try:
        report.checks.append(strip_spectrum_check(unit, k))
    except Exception as exc:
        report.checks.append(CheckOutcome("spectrum", False, f"{type(exc).__name__}: {exc}"))

    cfg = replace(cfg, k=k) if cfg is not None else default_config(unit, k)
    try:
        report.result = optimize(unit, cfg)
        report.checks.extend(_partition_checks(report.result, unit, k))
    except Exception as exc:
        report.checks.append(CheckOutcome("optimize", False, f"{type(exc).__name__}: {exc}"))

    logger.info(
        "Thin-torus check on %s for k=%s: %s",
        unit,
        k,
        "passed" if report.passed else "failed " + ", ".join(c.name for c in report.checks if not c.passed),
    )
    return report
