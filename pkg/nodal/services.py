from __future__ import annotations

from dataclasses import dataclass, field, replace
import logging
import math

import numpy as np
from django.db import models

from spectrum.geometry import EigenIndex, TorusGeometry
from topology.grids import UnionFind, label_periodic


logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
SIGN_EPSILON = 1e-12
CRITICAL_RESIDUAL = 1e-10
CELLS_PER_OSCILLATION = 32
NEWTON_ITERATIONS = 60


class NodalError(Exception):
    pass


class InvalidEigenfunction(NodalError):
    pass


class InsufficientResolution(NodalError):
    pass


class ResolutionUnstable(NodalError):
    pass


class NoConvergence(NodalError):
    def __init__(self, x: float, y: float, residual: float):
        super().__init__(f"Newton refinement from ({x:.6g}, {y:.6g}) stalled at residual {residual:.3g}")
        self.x = x
        self.y = y
        self.residual = residual


class DegenerateInput(NodalError):
    pass


class EigenfunctionForm(models.TextChoices):
    GENERAL = "general", "General"
    PRODUCT_COS = "product_cos", "Product of cosines"
    PRODUCT_SIN = "product_sin", "Product with sine factor"
    LEMMA = "lemma", "Normalized lemma family"


@dataclass(frozen=True)
class EigenfunctionSpec:
    """An eigenfunction built from the four modes (+-m, +-n).

    general:     mu * (cos X cos(Y + theta1) + lam * sin X cos(Y + theta2))
    product_cos: mu * cos X cos(Y + theta1)
    product_sin: mu * sin Y * (lam * sin X + branch * cos X)
    lemma:       mu * (cos X cos(Y + theta1) + lam * sin X sin(Y + theta2))

    with X = 2 pi m x / a and Y = 2 pi n y / b. Angles are stored mod 2 pi.
    """

    mode: EigenIndex
    mu: float = 1.0
    lam: float = 0.0
    theta1: float = 0.0
    theta2: float = 0.0
    form: EigenfunctionForm = EigenfunctionForm.GENERAL
    branch: int = 1

    def __post_init__(self):
        if not math.isfinite(self.mu) or self.mu == 0:
            raise InvalidEigenfunction("mu must be a nonzero real number")
        if not math.isfinite(self.lam):
            raise InvalidEigenfunction("lam must be finite")
        if self.branch not in (1, -1):
            raise InvalidEigenfunction("branch must be +1 or -1")
        form = EigenfunctionForm(self.form)
        if form == EigenfunctionForm.PRODUCT_SIN and self.lam == 0:
            raise InvalidEigenfunction("product_sin needs a nonzero lam")
        object.__setattr__(self, "form", form)
        object.__setattr__(self, "theta1", math.fmod(self.theta1, TWO_PI) % TWO_PI)
        object.__setattr__(self, "theta2", math.fmod(self.theta2, TWO_PI) % TWO_PI)

    def canonical(self) -> EigenfunctionSpec:
        """The same function written in the general form."""
        if self.form == EigenfunctionForm.GENERAL:
            return self
        if self.form == EigenfunctionForm.PRODUCT_COS:
            return replace(self, form=EigenfunctionForm.GENERAL, lam=0.0, theta2=0.0, branch=1)
        if self.form == EigenfunctionForm.PRODUCT_SIN:
            return EigenfunctionSpec(
                mode=self.mode,
                mu=self.branch * self.mu,
                lam=self.branch * self.lam,
                theta1=-math.pi / 2,
                theta2=-math.pi / 2,
            )
        return replace(self, form=EigenfunctionForm.GENERAL, theta2=self.theta2 - math.pi / 2, branch=1)

    @property
    def sup_bound(self) -> float:
        """Upper bound on |u| over the torus."""
        spec = self.canonical()
        return abs(spec.mu) * (1.0 + abs(spec.lam))


@dataclass(frozen=True, eq=False)
class SignGrid:
    nx: int
    ny: int
    signs: np.ndarray = field(repr=False)
    geometry: TorusGeometry

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise InsufficientResolution("Sign grids need at least 4 cells per axis")
        if self.signs.shape != (self.nx, self.ny):
            raise ValueError(f"signs must have shape ({self.nx}, {self.ny})")


@dataclass(frozen=True)
class CriticalZero:
    x: float
    y: float
    residual: float


@dataclass(frozen=True)
class CriticalZeroSearch:
    zeros: list[CriticalZero]
    seeds: int
    failures: list[NoConvergence]


def _wavenumbers(spec: EigenfunctionSpec, geom: TorusGeometry) -> tuple[float, float]:
    return TWO_PI * spec.mode.m / geom.a, TWO_PI * spec.mode.n / geom.b


def _phases(spec, geom, x, y):
    kx, ky = _wavenumbers(spec, geom)
    x = np.mod(x, geom.a)
    y = np.mod(y, geom.b)
    return kx * x, ky * y


def evaluate(spec: EigenfunctionSpec, geom: TorusGeometry, x, y):
    """u(x, y); accepts scalars or broadcastable arrays."""
    canon = spec.canonical()
    X, Y = _phases(canon, geom, x, y)
    value = canon.mu * (np.cos(X) * np.cos(Y + canon.theta1) + canon.lam * np.sin(X) * np.cos(Y + canon.theta2))
    if np.ndim(value) == 0:
        return float(value)
    return value


def gradient(spec: EigenfunctionSpec, geom: TorusGeometry, x, y):
    canon = spec.canonical()
    kx, ky = _wavenumbers(canon, geom)
    X, Y = _phases(canon, geom, x, y)
    ux = canon.mu * kx * (-np.sin(X) * np.cos(Y + canon.theta1) + canon.lam * np.cos(X) * np.cos(Y + canon.theta2))
    uy = canon.mu * ky * (-np.cos(X) * np.sin(Y + canon.theta1) - canon.lam * np.sin(X) * np.sin(Y + canon.theta2))
    return ux, uy


def hessian(spec: EigenfunctionSpec, geom: TorusGeometry, x, y):
    """(uxx, uxy, uyy)."""
    canon = spec.canonical()
    kx, ky = _wavenumbers(canon, geom)
    X, Y = _phases(canon, geom, x, y)
    u = evaluate(canon, geom, x, y)
    uxy = canon.mu * kx * ky * (np.sin(X) * np.sin(Y + canon.theta1) - canon.lam * np.cos(X) * np.sin(Y + canon.theta2))
    return -kx * kx * u, uxy, -ky * ky * u


def cell_centers(geom: TorusGeometry, nx: int, ny: int) -> tuple[np.ndarray, np.ndarray]:
    xs = (np.arange(nx) + 0.5) * geom.a / nx
    ys = (np.arange(ny) + 0.5) * geom.b / ny
    return np.meshgrid(xs, ys, indexing="ij")


def sign_grid(
    spec: EigenfunctionSpec,
    geom: TorusGeometry,
    nx: int,
    ny: int,
    shift: tuple[float, float] = (0.0, 0.0),
) -> SignGrid:
    """Signs of u sampled at cell centers, optionally of the translate u(x + x0, y + y0)."""
    if nx < 4 or ny < 4:
        raise InsufficientResolution("Sign grids need at least 4 cells per axis")
    xx, yy = cell_centers(geom, nx, ny)
    values = evaluate(spec, geom, xx + shift[0], yy + shift[1])
    signs = np.sign(values).astype(np.int8)
    signs[np.abs(values) < SIGN_EPSILON * spec.sup_bound] = 0
    return SignGrid(nx=nx, ny=ny, signs=signs, geometry=geom)


def label_nodal_domains(grid: SignGrid) -> tuple[np.ndarray, int]:
    """Labels 1..count for positive then negative domains; 0 on zero cells."""
    positive, n_positive = label_periodic(grid.signs > 0)
    negative, n_negative = label_periodic(grid.signs < 0)
    labels = positive.copy()
    labels[negative > 0] = negative[negative > 0] + n_positive
    return labels, n_positive + n_negative


def _check_resolution(spec: EigenfunctionSpec, nx: int, ny: int) -> None:
    need_x = CELLS_PER_OSCILLATION * spec.mode.m
    need_y = CELLS_PER_OSCILLATION * spec.mode.n
    if nx < need_x or ny < need_y:
        raise InsufficientResolution(
            f"Mode {spec.mode} needs at least {need_x} x {need_y} cells, got {nx} x {ny}"
        )


def count_nodal_domains(
    spec: EigenfunctionSpec,
    geom: TorusGeometry,
    nx: int,
    ny: int,
    shift: tuple[float, float] = (0.0, 0.0),
) -> int:
    """Number of nodal domains, certified by recounting at twice the resolution."""
    _check_resolution(spec, nx, ny)
    _, coarse = label_nodal_domains(sign_grid(spec, geom, nx, ny, shift))
    _, fine = label_nodal_domains(sign_grid(spec, geom, 2 * nx, 2 * ny, shift))
    if coarse != fine:
        raise ResolutionUnstable(
            f"Nodal count of {spec.mode} changed from {coarse} to {fine} when refining {nx}x{ny}"
        )
    logger.debug("Counted %s nodal domains for %s on %s", coarse, spec.mode, geom)
    return coarse


def _newton(spec, geom, x, y, iterations=NEWTON_ITERATIONS):
    """Vectorized Gauss-Newton on (u, ux, uy) = 0 from many seeds at once."""
    kx, ky = _wavenumbers(spec, geom)
    # Rows rescaled so every equation is O(|mu|).
    sx = 1.0 / kx if kx else 1.0
    sy = 1.0 / ky if ky else 1.0
    kappa = math.hypot(sx, sy)
    for _ in range(iterations):
        u = evaluate(spec, geom, x, y)
        ux, uy = gradient(spec, geom, x, y)
        uxx, uxy, uyy = hessian(spec, geom, x, y)
        residual = np.stack([u, ux * kappa, uy * kappa], axis=-1)
        jac = np.stack(
            [
                np.stack([ux, uy], axis=-1),
                np.stack([uxx * kappa, uxy * kappa], axis=-1),
                np.stack([uxy * kappa, uyy * kappa], axis=-1),
            ],
            axis=-2,
        )
        jt = np.swapaxes(jac, -1, -2)
        normal = jt @ jac
        damping = 1e-14 * np.trace(normal, axis1=-2, axis2=-1)[..., None, None] + 1e-300
        normal = normal + damping * np.eye(2)
        step = np.linalg.solve(normal, -(jt @ residual[..., None]))[..., 0]
        x = np.mod(x + step[..., 0], geom.a)
        y = np.mod(y + step[..., 1], geom.b)
    u = evaluate(spec, geom, x, y)
    ux, uy = gradient(spec, geom, x, y)
    residual = np.maximum(np.abs(u), np.maximum(np.abs(ux), np.abs(uy)))
    return x, y, residual


def _periodic_distance(geom: TorusGeometry, x0, y0, x1, y1) -> float:
    dx = abs(x0 - x1) % geom.a
    dy = abs(y0 - y1) % geom.b
    return math.hypot(min(dx, geom.a - dx), min(dy, geom.b - dy))


def search_critical_zeros(spec: EigenfunctionSpec, geom: TorusGeometry, seed_res: int) -> CriticalZeroSearch:
    """Full critical-zero search, including the seeds whose refinement failed."""
    minimum = CELLS_PER_OSCILLATION * max(spec.mode.m, spec.mode.n, 1)
    if seed_res < minimum:
        raise InsufficientResolution(f"seed_res must be at least {minimum} for mode {spec.mode}")

    canon = spec.canonical()
    kx, ky = _wavenumbers(canon, geom)
    step = max(kx * geom.a / seed_res, ky * geom.b / seed_res)
    bound = canon.sup_bound
    xx, yy = cell_centers(geom, seed_res, seed_res)
    u = evaluate(canon, geom, xx, yy)
    ux, uy = gradient(canon, geom, xx, yy)
    phase_gradient = np.hypot(ux / kx if kx else 0.0, uy / ky if ky else 0.0)
    seeds = (np.abs(u) <= bound * step**2) & (phase_gradient <= 2.0 * bound * step)

    x0, y0 = xx[seeds], yy[seeds]
    zeros: list[CriticalZero] = []
    failures: list[NoConvergence] = []
    if x0.size:
        x1, y1, residual = _newton(canon, geom, x0, y0)
        merge_radius = (geom.a + geom.b) / (2 * seed_res)
        for sx, sy, x, y, r in zip(x0, y0, x1, y1, residual):
            if not r <= CRITICAL_RESIDUAL:
                failures.append(NoConvergence(float(sx), float(sy), float(r)))
                continue
            if any(_periodic_distance(geom, x, y, z.x, z.y) <= merge_radius for z in zeros):
                continue
            zeros.append(CriticalZero(x=float(x), y=float(y), residual=float(r)))

    if failures:
        # with no zero found, failed seeds are the expected outcome for mixed modes
        level = logging.WARNING if zeros else logging.DEBUG
        logger.log(
            level, "%s of %s critical-zero seeds for %s did not converge", len(failures), int(x0.size), spec.mode
        )
    zeros.sort(key=lambda z: (z.x, z.y))
    return CriticalZeroSearch(zeros=zeros, seeds=int(x0.size), failures=failures)


def find_critical_zeros(spec: EigenfunctionSpec, geom: TorusGeometry, seed_res: int) -> list[CriticalZero]:
    """Points where u and its gradient vanish; empty means none were found at this resolution."""
    return search_critical_zeros(spec, geom, seed_res).zeros


def crossing_points(spec: EigenfunctionSpec, geom: TorusGeometry) -> list[tuple[float, float]]:
    """Exact intersections of the nodal lines of a product eigenfunction.

    The canonical form factors as cos(Y + theta1) * (cos X + c sin X) when lam == 0
    or theta1 == theta2 (mod pi).
    """
    canon = spec.canonical()
    gap = math.remainder(canon.theta1 - canon.theta2, math.pi)
    if canon.lam != 0 and abs(gap) > 1e-12:
        raise InvalidEigenfunction("Eigenfunction does not factor into a product")
    m, n = canon.mode.m, canon.mode.n
    if m == 0 or n == 0:
        return []
    same = abs(math.remainder(canon.theta1 - canon.theta2, TWO_PI)) < 1e-12
    c = canon.lam if same else -canon.lam
    phi = math.atan2(c, 1.0)
    xs = sorted(((phi + math.pi / 2 + j * math.pi) * geom.a / (TWO_PI * m)) % geom.a for j in range(2 * m))
    ys = sorted(((math.pi / 2 - canon.theta1 + j * math.pi) * geom.b / (TWO_PI * n)) % geom.b for j in range(2 * n))
    return [(x, y) for x in xs for y in ys]


def knot_components_by_tracing(p: int, q: int) -> int:
    """Components of the lines y = -x + c, c integer, on the p-by-q torus.

    A line leaving the fundamental rectangle through the cut at intercept c
    re-enters at c + q while c < p and at c - p afterwards.
    """
    if p < 0 or q < 0:
        raise DegenerateInput("p and q must be non-negative")
    if p == 0 and q == 0:
        raise DegenerateInput("(0, 0) does not describe a closed line")
    size = p + q
    sets = UnionFind(size)
    for c in range(size):
        sets.union(c, c + q if c < p else c - p)
    return len({sets.find(c) for c in range(size)})


def knot_components(p: int, q: int) -> int:
    if p < 0 or q < 0:
        raise DegenerateInput("p and q must be non-negative")
    if p == 0 and q == 0:
        raise DegenerateInput("(0, 0) does not describe a closed line")
    by_gcd = math.gcd(p, q)
    by_tracing = knot_components_by_tracing(p, q)
    if by_gcd != by_tracing:
        raise NodalError(f"Component counts disagree for ({p}, {q}): gcd {by_gcd}, tracing {by_tracing}")
    return by_gcd
