"""Hexagonal cell layout and quadrature over hexagons.

The reference cell is split into a central base region (served by the BS at
the origin) and six relay regions, each served by an RS at its centre.  The
six first-tier neighbour cells are translated copies of the reference cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidParameterError

SQRT3 = math.sqrt(3.0)
SQRT7 = math.sqrt(7.0)
NUM_RELAYS = 6
NUM_NEIGHBORS = 6

# Relay sub-cells have a vertex on the +x axis; their centres (and edges) face
# 30 deg + k*60 deg.
SUBCELL_ORIENTATION = 0.0
# Cell hexagons have a vertex at 30 deg so that edge midpoints, and therefore
# neighbour BSs, sit at k*60 deg.
CELL_ORIENTATION = math.pi / 6

# Default Gauss points per triangle; 16x16 per triangle keeps successive
# refinements of the moment integrands below 1e-4 relative on the default
# geometry (see tests/test_geometry.py::test_default_quadrature_converged).
DEFAULT_POINTS_PER_TRIANGLE = 256


class Point2D(NamedTuple):
    x: float
    y: float


def _rotate(p, angle):
    c, s = math.cos(angle), math.sin(angle)
    return Point2D(c * p[0] - s * p[1], s * p[0] + c * p[1])


@dataclass(frozen=True)
class Hexagon:
    """Regular hexagon; ``orientation`` is the angle of the first vertex."""

    center: Point2D
    circumradius: float
    orientation: float = 0.0

    def __post_init__(self):
        if not (self.circumradius > 0 and math.isfinite(self.circumradius)):
            raise InvalidParameterError(f"circumradius must be positive, got {self.circumradius}")
        if not all(math.isfinite(v) for v in self.center):
            raise InvalidParameterError("hexagon centre must be finite")

    @property
    def area(self) -> float:
        return 1.5 * SQRT3 * self.circumradius**2

    @property
    def apothem(self) -> float:
        return 0.5 * SQRT3 * self.circumradius

    def vertices(self) -> np.ndarray:
        k = np.arange(6)
        ang = self.orientation + k * math.pi / 3
        return np.column_stack(
            [
                self.center[0] + self.circumradius * np.cos(ang),
                self.center[1] + self.circumradius * np.sin(ang),
            ]
        )

    def contains_points(self, pts, rtol: float = 1e-9) -> np.ndarray:
        """Vectorised boundary-inclusive membership for an (n, 2) array."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        rel = pts - np.asarray(self.center)
        # outward edge normals lie half-way between consecutive vertices
        ang = self.orientation + math.pi / 6 + np.arange(6) * math.pi / 3
        normals = np.column_stack([np.cos(ang), np.sin(ang)])
        proj = rel @ normals.T
        return np.all(proj <= self.apothem * (1 + rtol), axis=1)


def contains(region: Hexagon, p) -> bool:
    """True iff ``p`` lies inside ``region`` or on its boundary."""
    return bool(region.contains_points([p])[0])


@dataclass(frozen=True)
class CellLayout:
    base_region: Hexagon
    relay_regions: tuple[Hexagon, ...]
    rs_positions: tuple[Point2D, ...]
    neighbor_bs_positions: tuple[Point2D, ...]
    neighbor_rs_positions: tuple[tuple[Point2D, ...], ...]
    inter_bs_distance: float

    @property
    def subcell_circumradius(self) -> float:
        return self.base_region.circumradius

    @property
    def cell_circumradius(self) -> float:
        return self.inter_bs_distance / SQRT3

    def cell_region(self, center=Point2D(0.0, 0.0)) -> Hexagon:
        return Hexagon(Point2D(*center), self.cell_circumradius, CELL_ORIENTATION + self._rotation)

    @property
    def _rotation(self) -> float:
        p = self.neighbor_bs_positions[0]
        return math.atan2(p.y, p.x)


def build_layout(
    inter_bs_distance: float,
    subcell_circumradius: float | None = None,
    rotation: float = 0.0,
) -> CellLayout:
    """Build the reference cell, its six RSs and the first-tier neighbours.

    By default the sub-cell circumradius is the equal-area value
    ``(D / sqrt(3)) / sqrt(7)``; ``rotation`` turns the whole layout about the
    origin (neighbour BSs at ``rotation + k*60 deg``).
    """
    if not (inter_bs_distance > 0 and math.isfinite(inter_bs_distance)):
        raise InvalidParameterError(f"inter_bs_distance must be positive, got {inter_bs_distance}")
    if subcell_circumradius is None:
        r_s = inter_bs_distance / SQRT3 / SQRT7
    else:
        if not subcell_circumradius > 0:
            raise InvalidParameterError("subcell_circumradius must be positive")
        r_s = float(subcell_circumradius)

    origin = Point2D(0.0, 0.0)
    base = Hexagon(origin, r_s, SUBCELL_ORIENTATION + rotation)
    rs = tuple(
        _rotate((SQRT3 * r_s, 0.0), rotation + math.pi / 6 + k * math.pi / 3) for k in range(NUM_RELAYS)
    )
    relays = tuple(Hexagon(p, r_s, SUBCELL_ORIENTATION + rotation) for p in rs)
    nbs = tuple(_rotate((inter_bs_distance, 0.0), rotation + k * math.pi / 3) for k in range(NUM_NEIGHBORS))
    nrs = tuple(tuple(Point2D(b.x + p.x, b.y + p.y) for p in rs) for b in nbs)
    return CellLayout(base, relays, rs, nbs, nrs, float(inter_bs_distance))


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray  # (n, 2)
    weights: np.ndarray  # (n,), sum to the region area
    target_region: Hexagon

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def mean(self, values):
        """Average of ``values`` (first axis over nodes) under the uniform density."""
        return np.tensordot(self.weights, values, axes=(0, 0)) / self.target_region.area


def make_quadrature(region: Hexagon, points_per_triangle: int = DEFAULT_POINTS_PER_TRIANGLE) -> QuadratureRule:
    """Composite rule: six centre-apex triangles, each mapped from the unit square.

    Each triangle uses a collapsed (Duffy) tensor Gauss-Legendre rule with
    ``q = ceil(sqrt(points_per_triangle))`` points per axis, so the actual
    count per triangle is ``q*q``.  The collapse puts the apex at the hexagon
    centre, where the serving node sits and the integrands are least smooth.
    """
    if points_per_triangle < 1:
        raise InvalidParameterError("points_per_triangle must be >= 1")
    q = math.isqrt(points_per_triangle - 1) + 1
    x, w = np.polynomial.legendre.leggauss(q)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    uu, vv = np.meshgrid(u, u, indexing="ij")
    ww = np.outer(wu, wu) * uu  # Jacobian of the collapse

    c = np.asarray(region.center)
    verts = region.vertices()
    tri_area = region.area / 6
    nodes, weights = [], []
    for k in range(6):
        e1 = verts[k] - c
        e2 = verts[(k + 1) % 6] - c
        pts = c + uu[..., None] * ((1 - vv)[..., None] * e1 + vv[..., None] * e2)
        nodes.append(pts.reshape(-1, 2))
        weights.append((2 * tri_area * ww).ravel())
    return QuadratureRule(np.vstack(nodes), np.concatenate(weights), region)


def sample_uniform(region: Hexagon, rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform points in a hexagon (pick one of six triangles, then reflect)."""
    verts = region.vertices()
    c = np.asarray(region.center)
    k = rng.integers(0, 6, size=size)
    a = rng.random(size)
    b = rng.random(size)
    flip = a + b > 1
    a[flip] = 1 - a[flip]
    b[flip] = 1 - b[flip]
    e1 = verts[k] - c
    e2 = verts[(k + 1) % 6] - c
    return c + a[:, None] * e1 + b[:, None] * e2
