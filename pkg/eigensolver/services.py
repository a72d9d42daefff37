from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Sequence
import warnings

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import cg

from spectrum.geometry import TorusGeometry
from topology.grids import label_periodic


logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-8
MAX_OUTER_ITERATIONS = 500


class EigensolverError(Exception):
    pass


class InvalidMask(EigensolverError):
    pass


class SolverDiverged(EigensolverError):
    pass


class InsufficientResolutions(EigensolverError):
    pass


class MaskTooThin(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class DomainMask:
    """Cells of a (nx, ny) periodic grid on T(a, b) that belong to one domain."""

    geometry: TorusGeometry
    inside: np.ndarray = field(repr=False)

    def __post_init__(self):
        inside = np.asarray(self.inside, dtype=bool)
        if inside.ndim != 2 or min(inside.shape) < 2:
            raise InvalidMask("masks need at least 2 cells per axis")
        if not inside.any():
            raise InvalidMask("mask is empty")
        if inside.all():
            raise InvalidMask("mask covers the whole torus and has no Dirichlet boundary")
        _, components = label_periodic(inside)
        if components != 1:
            raise InvalidMask(f"mask has {components} connected components")
        inside = inside.copy()
        inside.setflags(write=False)
        object.__setattr__(self, "inside", inside)

    @property
    def nx(self) -> int:
        return self.inside.shape[0]

    @property
    def ny(self) -> int:
        return self.inside.shape[1]

    @property
    def hx(self) -> float:
        return self.geometry.a / self.nx

    @property
    def hy(self) -> float:
        return self.geometry.b / self.ny

    @property
    def cells(self) -> int:
        return int(self.inside.sum())

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def is_thin(self) -> bool:
        """True when some cell has no inside neighbour on either side along an axis."""
        for axis in (0, 1):
            before = np.roll(self.inside, 1, axis=axis)
            after = np.roll(self.inside, -1, axis=axis)
            if (self.inside & ~before & ~after).any():
                return True
        return False


@dataclass(frozen=True, eq=False)
class GroundState:
    energy: float
    vector: np.ndarray = field(repr=False)  # (nx, ny), zero outside the mask
    iterations: int
    residual: float


def dirichlet_laplacian(mask: DomainMask) -> sparse.csr_matrix:
    """Five-point -Laplacian on the inside cells with the Dirichlet condition on cell faces.

    A missing neighbour acts as a ghost cell holding -u, which adds 1/h^2 to the
    diagonal; neighbours across the periodic seams are ordinary neighbours.
    """
    inside = mask.inside
    index = np.full(inside.shape, -1, dtype=np.int64)
    index[inside] = np.arange(mask.cells)
    diagonal = np.full(mask.cells, 2.0 / mask.hx**2 + 2.0 / mask.hy**2)
    rows, cols, values = [], [], []
    for axis, step, h in ((0, 1, mask.hx), (0, -1, mask.hx), (1, 1, mask.hy), (1, -1, mask.hy)):
        neighbour = np.roll(index, -step, axis=axis)[inside]
        own = index[inside]
        linked = neighbour >= 0
        rows.append(own[linked])
        cols.append(neighbour[linked])
        values.append(np.full(int(linked.sum()), -1.0 / h**2))
        diagonal[own[~linked]] += 1.0 / h**2
    rows.append(np.arange(mask.cells))
    cols.append(np.arange(mask.cells))
    values.append(diagonal)
    matrix = sparse.coo_matrix(
        (np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))),
        shape=(mask.cells, mask.cells),
    )
    return matrix.tocsr()


def ground_energy(
    mask: DomainMask,
    tol: float = DEFAULT_TOLERANCE,
    initial: np.ndarray | None = None,
    warn_thin: bool = True,
    max_outer: int = MAX_OUTER_ITERATIONS,
) -> GroundState:
    """Smallest Dirichlet eigenvalue of the mask by inverse power iteration.

    Each step solves A x = psi with conjugate gradients, warm-started from psi / lambda.
    Iteration stops once ||A psi - lambda psi|| <= tol * lambda * ||psi||.
    """
    if not 0 < tol <= 1e-2:
        raise EigensolverError(f"tol must lie in (0, 1e-2], got {tol}")
    if warn_thin and mask.is_thin():
        warnings.warn(f"mask on {mask.geometry} has regions one cell wide", MaskTooThin, stacklevel=2)

    matrix = dirichlet_laplacian(mask)
    if initial is not None:
        psi = np.abs(np.asarray(initial, dtype=float)[mask.inside]) + 1e-3
    else:
        psi = np.ones(mask.cells)
    psi /= np.linalg.norm(psi)
    energy = float(psi @ (matrix @ psi))
    inner_cap = int(10 * math.sqrt(mask.cells)) + 50
    residual = math.inf

    for iteration in range(1, max_outer + 1):
        solution, info = cg(matrix, psi, x0=psi / energy, rtol=0.1 * tol, maxiter=inner_cap)
        if info < 0 or not np.all(np.isfinite(solution)):
            raise SolverDiverged(f"inner solve broke down (info={info})")
        psi = solution / np.linalg.norm(solution)
        image = matrix @ psi
        energy = float(psi @ image)
        residual = float(np.linalg.norm(image - energy * psi))
        if residual <= tol * energy:
            break
    else:
        raise SolverDiverged(f"no convergence after {max_outer} iterations (residual {residual:.3g})")

    if psi.sum() < 0:
        psi = -psi
    vector = np.zeros(mask.inside.shape)
    vector[mask.inside] = psi / math.sqrt(mask.cell_area)
    logger.debug("Ground energy %.10g on %s cells after %s iterations", energy, mask.cells, iteration)
    return GroundState(energy=energy, vector=vector, iterations=iteration, residual=residual)


def rectangle_mask(
    geom: TorusGeometry, nx: int, ny: int, x0: float, y0: float, width: float, height: float
) -> DomainMask:
    """Cells whose centers lie in [x0, x0 + width) x [y0, y0 + height), taken periodically."""
    xs = (np.arange(nx) + 0.5) * geom.a / nx
    ys = (np.arange(ny) + 0.5) * geom.b / ny
    in_x = np.mod(xs - x0, geom.a) < width
    in_y = np.mod(ys - y0, geom.b) < height
    return DomainMask(geometry=geom, inside=in_x[:, None] & in_y[None, :])


def strip_mask(geom: TorusGeometry, nx: int, ny: int, x0: float, width: float) -> DomainMask:
    """A full-height vertical strip; it wraps the vertical cycle."""
    xs = (np.arange(nx) + 0.5) * geom.a / nx
    in_x = np.mod(xs - x0, geom.a) < width
    return DomainMask(geometry=geom, inside=np.repeat(in_x[:, None], ny, axis=1))


@dataclass(frozen=True)
class MaskFamily:
    masks: tuple[DomainMask, ...]
    exact: float
    label: str = ""


def unit_square_family(resolutions: Sequence[int] = (64, 128, 256)) -> MaskFamily:
    """Unit squares on T(2, 2) with n x n cells each; exact energy 2 pi^2."""
    geom = TorusGeometry.of(2, 2)
    masks = tuple(rectangle_mask(geom, 2 * n, 2 * n, 0.5, 0.5, 1.0, 1.0) for n in resolutions)
    return MaskFamily(masks=masks, exact=2 * math.pi**2, label="unit-square")


def strip_family(k: int = 3, b="0.25", resolutions: Sequence[int] = (96, 192, 384)) -> MaskFamily:
    """One strip of width 1/k on T(1, b) at nx in resolutions; exact energy k^2 pi^2."""
    geom = TorusGeometry.of(1, b)
    masks = tuple(strip_mask(geom, nx, max(4, round(nx * geom.b)), 0.0, 1.0 / k) for nx in resolutions)
    return MaskFamily(masks=masks, exact=(k * math.pi) ** 2, label=f"strip-{k}")


def fitted_order(spacings: Sequence[float], energies: Sequence[float], exact: float) -> float:
    """Slope of log|energy - exact| against log(spacing)."""
    if len(set(spacings)) < 3:
        raise InsufficientResolutions("a convergence order needs at least three resolutions")
    errors = np.abs(np.asarray(energies, dtype=float) - exact)
    if np.any(errors == 0):
        raise InsufficientResolutions("an exact match leaves the error slope undefined")
    slope, _ = np.polyfit(np.log(np.asarray(spacings, dtype=float)), np.log(errors), 1)
    return float(slope)


def convergence_order(family: MaskFamily, tol: float = DEFAULT_TOLERANCE) -> float:
    spacings = [max(mask.hx, mask.hy) for mask in family.masks]
    energies = [ground_energy(mask, tol=tol).energy for mask in family.masks]
    order = fitted_order(spacings, energies, family.exact)
    logger.info("Observed order %.3f for the %s family", order, family.label or "mask")
    return order
