"""Verification suites run by ``manage.py verify``.

Each suite returns a SuiteReport: named checks plus table rows for the CSV export.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
import json
import logging
import math
from pathlib import Path

import numpy as np

from eigensolver.services import convergence_order, ground_energy, unit_square_family
from nodal.services import (
    EigenfunctionForm,
    EigenfunctionSpec,
    count_nodal_domains,
    crossing_points,
    knot_components,
    knot_components_by_tracing,
    search_critical_zeros,
)
from optimizer.verification import CheckOutcome, strip_spectrum_check, verify_thin_torus
from spectrum.geometry import EigenIndex, TorusGeometry
from spectrum.services import (
    CourantSharpness,
    counting_bound,
    courant_index,
    eigenvalue_at,
    is_courant_sharp,
    sharp_indices,
)
from topology.services import GridPartition, check_euler_identity, critical_points, is_bipartite, lift_partition

from .services import PI2


logger = logging.getLogger(__name__)


@dataclass
class SuiteReport:
    suite: str
    params: dict
    checks: list[CheckOutcome] = field(default_factory=list)
    rows: list[dict] = field(default_factory=list)
    refusal: str | None = None

    @property
    def passed(self) -> bool:
        return self.refusal is None and all(check.passed for check in self.checks)

    def check(self, name: str, passed: bool, detail: str = "") -> bool:
        self.checks.append(CheckOutcome(name, bool(passed), detail))
        return bool(passed)

    def as_dict(self) -> dict:
        return {
            "suite": self.suite,
            "params": self.params,
            "passed": self.passed,
            "refusal": self.refusal,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }


def write_suite_json(path: Path, report: SuiteReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_suite_csv(path: Path, report: SuiteReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fieldnames = list(report.rows[0]) if report.rows else ["name", "passed", "detail"]
    rows = report.rows or [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in report.checks]
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return path


def courant_scan(b_values: list[str], mmax: int = 6) -> SuiteReport:
    """No eigenfunction with m, n >= 1 is Courant sharp; the counting bound holds for each pair."""
    report = SuiteReport("courant-scan", {"b": b_values, "mmax": mmax})
    for b in b_values:
        geom = TorusGeometry.of(1, b)
        sharp_pairs = []
        for m in range(1, mmax + 1):
            for n in range(1, mmax + 1):
                idx = EigenIndex(m, n)
                sharp = is_courant_sharp(geom, idx)
                index = courant_index(geom, idx)
                bound = counting_bound(idx)
                report.rows.append(
                    {"b": geom.b, "m": m, "n": n, "courant_index": index, "bound": bound, "courant_sharp": str(sharp)}
                )
                report.check(f"bound b={geom.b:g} ({m},{n})", index >= bound, f"index {index} >= {bound}")
                if sharp != CourantSharpness.NO:
                    sharp_pairs.append(str(idx))
        report.check(f"no sharp pair b={geom.b:g}", not sharp_pairs, ", ".join(sharp_pairs) or "none")
    return report


def sharp_scan(b: str, count: int = 40, expected: tuple[int, ...] = (1, 2)) -> SuiteReport:
    report = SuiteReport("sharp-scan", {"b": b, "count": count, "expected": list(expected)})
    geom = TorusGeometry.of(1, b)
    found = sharp_indices(geom, count)
    for index in found:
        entry = eigenvalue_at(geom, index)
        report.rows.append(
            {"index": index, "value": entry.value, "value_over_pi2": entry.value_over_pi2, "modes": " ".join(map(str, entry.modes))}
        )
    report.check("sharp indices", found == list(expected), f"found {found}, expected {list(expected)}")
    return report


def nodal_table(b: str = "0.4", mmax: int = 4) -> SuiteReport:
    """Mixed lemma eigenfunctions have 2 gcd(m, n) domains, products 4mn, n = 0 modes 2m."""
    report = SuiteReport("nodal-table", {"b": b, "mmax": mmax})
    geom = TorusGeometry.of(1, b)

    def record(kind, m, n, lam, theta, spec, expected):
        counted = count_nodal_domains(spec, geom, 64 * max(m, 1), 64 * max(n, 1))
        report.rows.append(
            {"kind": kind, "m": m, "n": n, "lam": lam, "theta1": theta, "count": counted, "expected": expected}
        )
        return counted == expected

    mixed = products = horizontal = 0
    for m in range(1, mmax + 1):
        for n in range(1, mmax + 1):
            for lam in (-1.0, 0.5, 1.0):
                for theta in (0.0, math.pi / 4):
                    spec = EigenfunctionSpec(mode=EigenIndex(m, n), lam=lam, theta1=theta, form=EigenfunctionForm.LEMMA)
                    mixed += not record("lemma", m, n, lam, theta, spec, 2 * math.gcd(m, n))
            spec = EigenfunctionSpec(mode=EigenIndex(m, n), form=EigenfunctionForm.PRODUCT_COS)
            products += not record("product_cos", m, n, 0.0, 0.0, spec, 4 * m * n)
            spec = EigenfunctionSpec(mode=EigenIndex(m, n), lam=1.0, form=EigenfunctionForm.PRODUCT_SIN)
            products += not record("product_sin", m, n, 1.0, 0.0, spec, 4 * m * n)
        spec = EigenfunctionSpec(mode=EigenIndex(m, 0), form=EigenfunctionForm.PRODUCT_COS)
        horizontal += not record("product_cos", m, 0, 0.0, 0.0, spec, 2 * m)
    report.check("mixed count 2 gcd(m,n)", mixed == 0, f"{mixed} mismatches")
    report.check("product count 4mn", products == 0, f"{products} mismatches")
    report.check("n = 0 count 2m", horizontal == 0, f"{horizontal} mismatches")
    return report


def critical_zero_scan(b: str = "0.4", draws: int = 50, seed: int = 1234) -> SuiteReport:
    report = SuiteReport("critical-zeros", {"b": b, "draws": draws, "seed": seed})
    geom = TorusGeometry.of(1, b)
    rng = np.random.default_rng(seed)
    found = 0
    done = 0
    while done < draws:
        lam = float(rng.uniform(0.1, 2.0) * rng.choice([-1.0, 1.0]))
        theta = float(rng.uniform(0, 2 * math.pi))
        if abs(math.cos(theta)) < 0.1:
            continue
        done += 1
        spec = EigenfunctionSpec(mode=EigenIndex(1, 1), lam=lam, theta1=theta, form=EigenfunctionForm.LEMMA)
        zeros = search_critical_zeros(spec, geom, 32).zeros
        found += len(zeros)
        report.rows.append({"kind": "mixed", "lam": lam, "theta1": theta, "zeros": len(zeros), "expected": 0})
    report.check("mixed draws have no critical zero", found == 0, f"{found} zeros over {draws} draws")

    branches = [
        ("product_cos", EigenfunctionSpec(mode=EigenIndex(1, 1), form=EigenfunctionForm.PRODUCT_COS)),
        ("product_sin", EigenfunctionSpec(mode=EigenIndex(1, 1), lam=1.0, form=EigenfunctionForm.PRODUCT_SIN)),
    ]
    for name, spec in branches:
        zeros = search_critical_zeros(spec, geom, 32).zeros
        expected = len(crossing_points(spec, geom))
        report.rows.append({"kind": name, "lam": spec.lam, "theta1": spec.theta1, "zeros": len(zeros), "expected": expected})
        report.check(f"{name} crossings", len(zeros) == expected and expected > 0, f"{len(zeros)} of {expected}")
    return report


def knot_scan(pmax: int = 12) -> SuiteReport:
    report = SuiteReport("knots", {"pmax": pmax})
    disagreements = 0
    for p in range(1, pmax + 1):
        for q in range(1, pmax + 1):
            traced = knot_components_by_tracing(p, q)
            disagreements += traced != math.gcd(p, q)
            report.rows.append({"p": p, "q": q, "gcd": math.gcd(p, q), "traced": traced})
    report.check("gcd agrees with tracing", disagreements == 0, f"{disagreements} disagreements")
    report.check("(3,2) is one line", knot_components(3, 2) == 1)
    report.check("(4,2) has two lines", knot_components(4, 2) == 2)
    return report


def euler_suite(part: GridPartition) -> SuiteReport:
    report = SuiteReport("euler", {"k": part.k, "nx": part.nx, "ny": part.ny})
    residual = check_euler_identity(part)
    points = critical_points(part)
    for point in points:
        report.rows.append({"x": point.x, "y": point.y, "valence": point.valence})
    report.check("euler identity", residual == 0, f"residual {residual}, {len(points)} critical points")
    return report


def lift_suite(part: GridPartition) -> SuiteReport:
    report = SuiteReport("lift", {"k": part.k, "nx": part.nx, "ny": part.ny})
    lifted = lift_partition(part, 2, 2)
    bipartite = is_bipartite(lifted)
    report.rows.append({"k": part.k, "lifted_k": lifted.k, "bipartite": bipartite})
    report.check("2k domains", lifted.k == 2 * part.k, f"{lifted.k} domains")
    report.check("bipartite", bipartite)
    return report


def eigensolver_suite(resolutions: tuple[int, ...] = (64, 128, 256)) -> SuiteReport:
    report = SuiteReport("eigensolver", {"resolutions": list(resolutions)})
    family = unit_square_family(resolutions)
    finest = ground_energy(family.masks[-1]).energy
    order = convergence_order(family)
    report.rows.append({"finest_energy": finest, "finest_over_pi2": finest / PI2, "order": order})
    gap = abs(finest - family.exact) / family.exact
    report.check("unit square within 1%", gap <= 0.01, f"{finest / PI2:.6f} pi^2, gap {gap:.2e}")
    report.check("order in [1.8, 2.2]", 1.8 <= order <= 2.2, f"order {order:.3f}")
    return report


def thin_torus_suite(geom: TorusGeometry, k: int, cfg=None) -> SuiteReport:
    report = SuiteReport("thin-torus", {"a": geom.a, "b": geom.b, "k": k})
    outcome = verify_thin_torus(geom, k, cfg)
    report.refusal = outcome.refusal
    report.checks.extend(outcome.checks)
    if outcome.result is not None:
        for entry_index, value in enumerate(outcome.result.energy.per_domain, start=1):
            report.rows.append({"domain": entry_index, "energy": value, "energy_over_pi2": value / PI2})
    summary = outcome.as_dict()
    summary.pop("checks")
    report.params.update(summary)
    return report


def covering_suite(b: str, k: int) -> SuiteReport:
    """lambda_2k of T(2, 2b) equals k^2 pi^2, carried by a Courant-sharp (k, 0) mode."""
    report = SuiteReport("covering", {"b": b, "k": k})
    unit = TorusGeometry.of(1, b)
    cover = unit.covering(2, 2)
    entry = eigenvalue_at(cover, 2 * k)
    report.rows.append(
        {"index": 2 * k, "value": entry.value, "value_over_pi2": entry.value_over_pi2, "modes": " ".join(map(str, entry.modes))}
    )
    report.check(
        "lambda_2k = k^2 pi^2",
        math.isclose(entry.value, k * k * PI2, rel_tol=1e-9),
        f"{entry.value_over_pi2:.6g} pi^2",
    )
    sharp = is_courant_sharp(cover, EigenIndex(k, 0))
    report.check("strip mode sharp", sharp == CourantSharpness.YES, str(sharp))
    report.checks.append(strip_spectrum_check(unit, k))
    return report
