import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ParameterError
from .extremal import disc_intersection_area

"""Regions, homotheties and the exact distribution of the distance between two independent uniform
points of a disk or a square.

Disks and squares are described by `Region`. The two-dimensional quadrature path also accepts convex
polygons and unions of disjoint convex polygons, through their set covariogram K(v) = |A ∩ (A + v)|.
"""


class Shape(Enum):
    DISK = "disk"
    SQUARE = "square"


@dataclass(frozen=True)
class Region:
    shape: Shape
    r: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if not self.r > 0:
            msg = f"region size must be positive, got {self.r}"
            raise ParameterError(msg)

    @property
    def area(self) -> float:
        return math.pi * self.r ** 2 if self.shape is Shape.DISK else self.r ** 2

    @property
    def max_pair_distance(self) -> float:
        return 2 * self.r if self.shape is Shape.DISK else self.r * math.sqrt(2)

    def translate(self, v: tuple[float, float]) -> "Region":
        return Region(self.shape, self.r, (self.center[0] + v[0], self.center[1] + v[1]))

    def scale(self, lambda_: float) -> "Region":
        return Region(self.shape, self.r * lambda_, self.center)

    def bounds(self) -> tuple[float, float, float, float]:
        half = self.r if self.shape is Shape.DISK else self.r / 2
        return self.center[0] - half, self.center[1] - half, self.center[0] + half, self.center[1] + half

    def contains(self, points: np.ndarray) -> np.ndarray:
        offsets = np.asarray(points, dtype=float) - np.asarray(self.center)
        if self.shape is Shape.DISK:
            return np.einsum("...i,...i->...", offsets, offsets) <= self.r ** 2
        return np.all(np.abs(offsets) <= self.r / 2, axis=-1)

    def as_polygon(self) -> "ConvexPolygon":
        if self.shape is not Shape.SQUARE:
            msg = f"only squares have an exact polygon form, got {self}"
            raise ParameterError(msg)
        x0, y0, x1, y1 = self.bounds()
        return ConvexPolygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))

    def to_dict(self) -> dict:
        return {"shape": self.shape.value, "r": self.r, "center": list(self.center)}

    def __repr__(self) -> str:
        return f"{self.shape.value}(r={self.r}, center={self.center})"


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex polygon given by its vertices in counter-clockwise order."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.vertices) < 3:
            msg = f"a polygon needs at least 3 vertices, got {len(self.vertices)}"
            raise ParameterError(msg)
        if _signed_area(np.asarray(self.vertices, dtype=float)) <= 0:
            msg = "polygon vertices must be given in counter-clockwise order"
            raise ParameterError(msg)

    @property
    def points(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    @property
    def area(self) -> float:
        return _signed_area(self.points)

    @property
    def center(self) -> tuple[float, float]:
        points = self.points
        rolled = np.roll(points, -1, axis=0)
        cross = points[:, 0] * rolled[:, 1] - rolled[:, 0] * points[:, 1]
        factor = 1.0 / (6.0 * self.area)
        return (float(factor * np.sum((points[:, 0] + rolled[:, 0]) * cross)),
                float(factor * np.sum((points[:, 1] + rolled[:, 1]) * cross)))

    @property
    def max_pair_distance(self) -> float:
        points = self.points
        return float(np.max(np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)))

    def translate(self, v: tuple[float, float]) -> "ConvexPolygon":
        return ConvexPolygon(tuple((x + v[0], y + v[1]) for x, y in self.vertices))

    def scale(self, lambda_: float) -> "ConvexPolygon":
        cx, cy = self.center
        return ConvexPolygon(tuple((cx + lambda_ * (x - cx), cy + lambda_ * (y - cy)) for x, y in self.vertices))

    def bounds(self) -> tuple[float, float, float, float]:
        points = self.points
        return (float(points[:, 0].min()), float(points[:, 1].min()),
                float(points[:, 0].max()), float(points[:, 1].max()))

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        inside = np.ones(points.shape[:-1], dtype=bool)
        vertices = self.points
        for start, end in zip(vertices, np.roll(vertices, -1, axis=0), strict=True):
            edge = end - start
            cross = edge[0] * (points[..., 1] - start[1]) - edge[1] * (points[..., 0] - start[0])
            inside &= cross >= 0
        return inside

    def to_dict(self) -> dict:
        return {"shape": "polygon", "vertices": [list(v) for v in self.vertices]}


@dataclass(frozen=True)
class RegionUnion:
    """Union of pairwise disjoint convex polygons."""

    parts: tuple[ConvexPolygon, ...] = field(default_factory=tuple)

    @property
    def area(self) -> float:
        return sum(part.area for part in self.parts)

    @property
    def center(self) -> tuple[float, float]:
        centers = np.array([part.center for part in self.parts])
        weights = np.array([part.area for part in self.parts])
        cx, cy = weights @ centers / weights.sum()
        return float(cx), float(cy)

    @property
    def max_pair_distance(self) -> float:
        points = np.concatenate([part.points for part in self.parts])
        return float(np.max(np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)))

    def translate(self, v: tuple[float, float]) -> "RegionUnion":
        return RegionUnion(tuple(part.translate(v) for part in self.parts))

    def scale(self, lambda_: float) -> "RegionUnion":
        cx, cy = self.center
        return RegionUnion(tuple(
            ConvexPolygon(tuple((cx + lambda_ * (x - cx), cy + lambda_ * (y - cy)) for x, y in part.vertices))
            for part in self.parts))

    def to_dict(self) -> dict:
        return {"shape": "union", "parts": [part.to_dict() for part in self.parts]}


AnyRegion = Region | ConvexPolygon | RegionUnion


@dataclass(frozen=True)
class Homothety:
    """λA: homothety of ratio λ centered at the barycenter of A."""

    base: AnyRegion
    lambda_: float

    def __post_init__(self) -> None:
        if not self.lambda_ > 0:
            msg = f"homothety ratio must be positive, got {self.lambda_}"
            raise ParameterError(msg)

    def region(self) -> AnyRegion:
        return self.base.scale(self.lambda_)

    @property
    def area(self) -> float:
        return self.lambda_ ** 2 * self.base.area


def region_area(region: AnyRegion, lambda_: float = 1.0) -> float:
    return Homothety(region, lambda_).area


def _signed_area(points: np.ndarray) -> float:
    rolled = np.roll(points, -1, axis=0)
    return float(0.5 * np.sum(points[:, 0] * rolled[:, 1] - rolled[:, 0] * points[:, 1]))


def disk_distance_density(h: np.ndarray, r: float) -> np.ndarray:
    x = np.clip(h / (2 * r), 0.0, 1.0)
    values = 2 * h / r ** 2 * (2 / math.pi * np.arccos(x) - h / (math.pi * r) * np.sqrt(1 - x * x))
    return np.where((h >= 0) & (h <= 2 * r), np.maximum(values, 0.0), 0.0)


def square_branch_literal(b: float | np.ndarray) -> float | np.ndarray:
    """Bracketed factor of the square density on [R, R√2], written with its two divergent terms."""
    b = np.asarray(b, dtype=float)
    return (-2 - b + 3 * np.sqrt(b - 1) + (b + 1) / np.sqrt(b - 1) + 2 * np.arcsin((2 - b) / b)
            - 4 / (b * np.sqrt(1 - (2 - b) ** 2 / b ** 2)))


def square_branch_stable(b: float | np.ndarray) -> float | np.ndarray:
    """Same factor with the divergent terms combined: (b+1)/√(b-1) - 2/√(b-1) = √(b-1)."""
    b = np.asarray(b, dtype=float)
    return -2 - b + 4 * np.sqrt(np.maximum(b - 1, 0.0)) + 2 * np.arcsin(np.clip((2 - b) / b, -1.0, 1.0))


def square_distance_density(h: np.ndarray, r: float) -> np.ndarray:
    b = (h / r) ** 2
    near = 2 * math.pi * h / r ** 2 - 8 * h ** 2 / r ** 3 + 2 * h ** 3 / r ** 4
    far = square_branch_stable(np.maximum(b, 1.0)) * 2 * h / r ** 2
    values = np.where(h <= r, near, far)
    return np.where((h >= 0) & (h <= r * math.sqrt(2)), np.maximum(values, 0.0), 0.0)


def distance_density(region: Region, h: float | np.ndarray) -> float | np.ndarray:
    """Density of ‖U - V‖ for U, V independent and uniform on a disk or a square (0 outside the support)."""
    if not isinstance(region, Region):
        msg = f"distance densities are only known for disks and squares, got {region}"
        raise ParameterError(msg)

    distances = np.asarray(h, dtype=float)
    if region.shape is Shape.DISK:
        values = disk_distance_density(distances, region.r)
    else:
        values = square_distance_density(distances, region.r)
    return float(values) if np.ndim(h) == 0 else values


def distance_density_scaled(region: Region, lambda_: float, h: float | np.ndarray) -> float | np.ndarray:
    """Density for λA through f(h, λR) = f(h/λ, R)/λ."""
    if not lambda_ > 0:
        msg = f"homothety ratio must be positive, got {lambda_}"
        raise ParameterError(msg)
    values = np.asarray(distance_density(region, np.asarray(h, dtype=float) / lambda_)) / lambda_
    return float(values) if np.ndim(h) == 0 else values


def sample_uniform_points(region: AnyRegion, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(region, Region) and region.shape is Shape.DISK:
        radius = region.r * np.sqrt(rng.random(n))
        angle = 2 * math.pi * rng.random(n)
        return np.column_stack([radius * np.cos(angle), radius * np.sin(angle)]) + np.asarray(region.center)

    if isinstance(region, Region):
        return (rng.random((n, 2)) - 0.5) * region.r + np.asarray(region.center)

    parts = region.parts if isinstance(region, RegionUnion) else (region,)
    weights = np.array([part.area for part in parts])
    counts = rng.multinomial(n, weights / weights.sum())
    samples = []
    for part, count in zip(parts, counts, strict=True):
        x0, y0, x1, y1 = part.bounds()
        accepted = np.empty((0, 2))
        while len(accepted) < count:
            candidates = rng.random((2 * count + 16, 2)) * [x1 - x0, y1 - y0] + [x0, y0]
            accepted = np.concatenate([accepted, candidates[part.contains(candidates)]])
        samples.append(accepted[:count])
    return np.concatenate(samples)


def clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman intersection of two convex counter-clockwise polygons."""
    output = subject
    for start, end in zip(clip, np.roll(clip, -1, axis=0), strict=True):
        if len(output) == 0:
            break
        edge = end - start
        side = edge[0] * (output[:, 1] - start[1]) - edge[1] * (output[:, 0] - start[0])
        kept = []
        for i in range(len(output)):
            j = (i + 1) % len(output)
            if side[i] >= 0:
                kept.append(output[i])
            if (side[i] >= 0) != (side[j] >= 0):
                t = side[i] / (side[i] - side[j])
                kept.append(output[i] + t * (output[j] - output[i]))
        output = np.array(kept) if kept else np.empty((0, 2))
    return output


def _intersection_area(first: np.ndarray, second: np.ndarray) -> float:
    overlap = clip_polygon(first, second)
    return _signed_area(overlap) if len(overlap) >= 3 else 0.0


def covariogram(region: AnyRegion, v: tuple[float, float] | np.ndarray) -> float:
    """K(v) = |A ∩ (A + v)|."""
    vx, vy = float(v[0]), float(v[1])
    if isinstance(region, Region) and region.shape is Shape.DISK:
        return float(disc_intersection_area(math.hypot(vx, vy), region.r))
    if isinstance(region, Region):
        return max(region.r - abs(vx), 0.0) * max(region.r - abs(vy), 0.0)

    parts = region.parts if isinstance(region, RegionUnion) else (region,)
    shift = np.array([vx, vy])
    return sum(_intersection_area(first.points, second.points + shift) for first in parts for second in parts)


def _hull(points: np.ndarray) -> np.ndarray:
    """Counter-clockwise convex hull (monotone chain)."""
    ordered = sorted({(round(float(x), 12), round(float(y), 12)) for x, y in points})
    if len(ordered) < 3:
        return np.array(ordered)

    def half(sequence: list) -> list:
        chain = []
        for p in sequence:
            while len(chain) >= 2 and ((chain[-1][0] - chain[-2][0]) * (p[1] - chain[-2][1])
                                       - (chain[-1][1] - chain[-2][1]) * (p[0] - chain[-2][0])) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower, upper = half(ordered), half(list(reversed(ordered)))
    return np.array(lower[:-1] + upper[:-1])


def _ray_interval(polygon: np.ndarray, direction: np.ndarray) -> tuple[float, float] | None:
    """Parameters t >= 0 for which t·direction lies in a convex counter-clockwise polygon."""
    t0, t1 = 0.0, math.inf
    for start, end in zip(polygon, np.roll(polygon, -1, axis=0), strict=True):
        edge = end - start
        # inside iff edge x (t d - start) >= 0, i.e. t * (edge x d) >= edge x start
        slope = edge[0] * direction[1] - edge[1] * direction[0]
        offset = edge[0] * start[1] - edge[1] * start[0]
        if abs(slope) < 1e-15:
            if offset > 0:
                return None
            continue
        bound = offset / slope
        if slope > 0:
            t0 = max(t0, bound)
        else:
            t1 = min(t1, bound)
    return (t0, t1) if t1 > t0 else None


class DifferenceDomain:
    """Polar description of the support of the covariogram, used by the 2-D quadrature."""

    def __init__(self, region: AnyRegion) -> None:
        self.region = region
        self.isotropic = isinstance(region, Region) and region.shape is Shape.DISK
        if isinstance(region, Region):
            self.differences = []
        else:
            parts = region.parts if isinstance(region, RegionUnion) else (region,)
            self.differences = [_hull((first.points[:, None, :] - second.points[None, :, :]).reshape(-1, 2))
                                for first in parts for second in parts]

    def radial_breakpoints(self, phi: float) -> tuple[float, list[float]]:
        """Outer radius of the support in direction phi and the radii where it starts or stops."""
        if isinstance(self.region, Region) and self.region.shape is Shape.DISK:
            return 2 * self.region.r, []
        if isinstance(self.region, Region):
            c, s = abs(math.cos(phi)), abs(math.sin(phi))
            return self.region.r / max(c, s), []

        direction = np.array([math.cos(phi), math.sin(phi)])
        radii = []
        for difference in self.differences:
            interval = _ray_interval(difference, direction)
            if interval:
                radii.extend(interval)
        return max(radii), sorted(set(radii))

    def angular_breakpoints(self) -> list[float]:
        if isinstance(self.region, Region) and self.region.shape is Shape.DISK:
            return [0.0, 2 * math.pi]
        if isinstance(self.region, Region):
            return [k * math.pi / 4 for k in range(9)]

        angles = {0.0, 2 * math.pi}
        for difference in self.differences:
            for x, y in difference:
                if abs(x) + abs(y) > 1e-12:
                    angles.add(math.atan2(y, x) % (2 * math.pi))
        # the covariogram has kinks along the edge directions of the parts
        parts = self.region.parts if isinstance(self.region, RegionUnion) else (self.region,)
        for part in parts:
            for x, y in np.roll(part.points, -1, axis=0) - part.points:
                angles.add(math.atan2(y, x) % (2 * math.pi))
                angles.add(math.atan2(-y, -x) % (2 * math.pi))
        return sorted(angles)
