"""Core geospatial data model: rasters, binary masks, polygons and grids.

Everything here is a plain immutable value backed by numpy; the geometry
routines (point-in-polygon, rasterization, mask tracing) are written so that
``rasterize(polygonize(mask))`` reproduces the mask bit-exactly, which the
rest of the pipeline relies on when turning model output into reviewable
vector labels and back.

Conventions:
- pixel (col, row) maps to the map-coordinate of its top-left corner;
  pixel centers sit at (col + 0.5, row + 0.5) in pixel space
- pixel membership for rasterization is pixel-center containment with the
  even-odd rule
- polygon exteriors are normalized counter-clockwise (positive signed area
  in map coordinates), holes clockwise
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

MATURITY_VALUES = ("young", "mature", "unknown")
PROVENANCE_VALUES = ("expert", "model_proposed", "model_approved", "synthetic")

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)  # 4-connectivity


class InvalidInputError(ValueError):
    """Raised when an operation gets degenerate or inconsistent input."""


class CrsMismatchError(InvalidInputError):
    """Raised when geometries and rasters disagree on the CRS."""


@dataclass(frozen=True)
class GeoTransform:
    """Affine pixel->map mapping for an axis-aligned, north-up raster."""

    origin_x: float
    origin_y: float
    pixel_size_x: float
    pixel_size_y: float
    crs_id: str = ""

    def __post_init__(self):
        if not self.pixel_size_x > 0:
            raise InvalidInputError(f"pixel_size_x must be > 0, got {self.pixel_size_x}")
        if self.pixel_size_y == 0:
            raise InvalidInputError("pixel_size_y must be nonzero")

    def pixel_to_map(self, col: float, row: float) -> tuple[float, float]:
        return (self.origin_x + col * self.pixel_size_x,
                self.origin_y + row * self.pixel_size_y)

    def map_to_pixel(self, x: float, y: float) -> tuple[float, float]:
        return ((x - self.origin_x) / self.pixel_size_x,
                (y - self.origin_y) / self.pixel_size_y)

    def shifted(self, col_off: int, row_off: int) -> "GeoTransform":
        """Transform of a window whose (0,0) pixel is (col_off, row_off) here."""
        ox, oy = self.pixel_to_map(col_off, row_off)
        return replace(self, origin_x=ox, origin_y=oy)

    def to_dict(self) -> dict:
        return {
            "origin_x": self.origin_x,
            "origin_y": self.origin_y,
            "pixel_size_x": self.pixel_size_x,
            "pixel_size_y": self.pixel_size_y,
            "crs_id": self.crs_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeoTransform":
        return cls(d["origin_x"], d["origin_y"], d["pixel_size_x"],
                   d["pixel_size_y"], d.get("crs_id", ""))


@dataclass(frozen=True)
class Raster:
    """Georeferenced pixel grid, row-major, band-interleaved (H, W, B)."""

    pixels: np.ndarray
    transform: GeoTransform

    def __post_init__(self):
        px = self.pixels
        if px.ndim == 2:
            px = px[:, :, np.newaxis]
        if px.ndim != 3:
            raise InvalidInputError(f"pixels must be HxWxB, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise InvalidInputError("raster must be at least 1x1")
        if px.shape[2] not in (1, 3):
            raise InvalidInputError(f"band count must be 1 or 3, got {px.shape[2]}")
        if px.dtype not in (np.uint8, np.uint16):
            raise InvalidInputError(f"dtype must be uint8 or uint16, got {px.dtype}")
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def bands(self) -> int:
        return self.pixels.shape[2]

    @property
    def dtype(self) -> np.dtype:
        return self.pixels.dtype

    def window(self, col: int, row: int, width: int, height: int) -> "Raster":
        return Raster(self.pixels[row:row + height, col:col + width],
                      self.transform.shifted(col, row))


@dataclass(frozen=True)
class BitMask:
    """Binary pixel mask, stored as a bool array of shape (H, W)."""

    data: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(self.data.astype(bool))
        if d.ndim != 2:
            raise InvalidInputError(f"mask must be 2-D, got shape {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @classmethod
    def zeros(cls, width: int, height: int) -> "BitMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def ones(cls, width: int, height: int) -> "BitMask":
        return cls(np.ones((height, width), dtype=bool))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitMask):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))

    def __and__(self, other: "BitMask") -> "BitMask":
        return BitMask(self.data & other.data)

    def __or__(self, other: "BitMask") -> "BitMask":
        return BitMask(self.data | other.data)

    def __invert__(self) -> "BitMask":
        return BitMask(~self.data)


def mask_area_px(mask: BitMask) -> int:
    """Number of set pixels."""
    return int(mask.data.sum())


def _ring_signed_area(ring: list[tuple[float, float]]) -> float:
    """Shoelace signed area; positive = counter-clockwise in (x right, y up)."""
    area = 0.0
    for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
        area += x1 * y2 - x2 * y1
    return area / 2.0


def _close_ring(ring) -> list[tuple[float, float]]:
    pts = [(float(x), float(y)) for x, y in ring]
    if len(pts) >= 2 and pts[0] != pts[-1]:
        pts.append(pts[0])
    return pts


def _segments_intersect(p1, p2, p3, p4) -> bool:
    """Proper or improper intersection of open segments, endpoints excluded."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return (v > 0) - (v < 0)

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    if o1 != o2 and o3 != o4:
        return True
    return False


@dataclass(frozen=True)
class Polygon:
    """Simple polygon with optional holes, in map coordinates.

    Rings are closed (first == last vertex) and normalized on construction:
    exterior counter-clockwise, holes clockwise.
    """

    exterior: tuple[tuple[float, float], ...]
    holes: tuple[tuple[tuple[float, float], ...], ...] = ()

    def __post_init__(self):
        ext = _close_ring(self.exterior)
        if len(ext) < 4:
            raise InvalidInputError("exterior ring needs at least 3 distinct vertices")
        if _ring_signed_area(ext) < 0:
            ext = ext[::-1]
        norm_holes = []
        for hole in self.holes:
            h = _close_ring(hole)
            if len(h) < 4:
                raise InvalidInputError("hole ring needs at least 3 distinct vertices")
            if _ring_signed_area(h) > 0:
                h = h[::-1]
            norm_holes.append(tuple(h))
        object.__setattr__(self, "exterior", tuple(ext))
        object.__setattr__(self, "holes", tuple(norm_holes))

    @property
    def rings(self) -> list[tuple[tuple[float, float], ...]]:
        return [self.exterior, *self.holes]

    def area(self) -> float:
        a = _ring_signed_area(list(self.exterior))
        for h in self.holes:
            a += _ring_signed_area(list(h))  # holes are CW, negative
        return a

    def bounds(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.exterior]
        ys = [p[1] for p in self.exterior]
        return (min(xs), min(ys), max(xs), max(ys))

    def is_simple(self) -> bool:
        """True when no ring self-intersects (adjacent edges excluded)."""
        for ring in self.rings:
            edges = list(zip(ring[:-1], ring[1:]))
            n = len(edges)
            for i in range(n):
                for j in range(i + 1, n):
                    if j == i + 1 or (i == 0 and j == n - 1):
                        continue
                    if _segments_intersect(*edges[i], *edges[j]):
                        return False
        return True

    def contains_point(self, x: float, y: float) -> bool:
        """Even-odd containment over exterior and holes."""
        return point_in_rings(x, y, self.rings)


def point_in_rings(x: float, y: float, rings) -> bool:
    """Even-odd ray casting: count edge crossings of the ray toward +x."""
    inside = False
    for ring in rings:
        for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
            if (y1 > y) != (y2 > y):
                xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
                if xi > x:
                    inside = not inside
    return inside


@dataclass(frozen=True)
class ParcelLabel:
    """A labeled crop parcel: boundary polygon plus maturity class."""

    id: str
    polygon: Polygon
    maturity: str = "unknown"
    provenance: str = "expert"
    phase: int = 1

    def __post_init__(self):
        if self.maturity not in MATURITY_VALUES:
            raise InvalidInputError(f"bad maturity {self.maturity!r}")
        if self.provenance not in PROVENANCE_VALUES:
            raise InvalidInputError(f"bad provenance {self.provenance!r}")
        if not 1 <= int(self.phase) <= 3:
            raise InvalidInputError(f"phase must be 1..3, got {self.phase}")


@dataclass(frozen=True)
class GridCell:
    """One square cell of the scene partition."""

    cell_id: int
    bounds: tuple[float, float, float, float]  # (xmin, ymin, xmax, ymax)
    size_m: float = 2500.0


def make_grid(scene_bounds: tuple[float, float, float, float],
              cell_size_m: float) -> list[GridCell]:
    """Tile the bounding rectangle of the scene with full-size square cells.

    Cells are assigned ids row-major starting at 1 in the north-west corner.
    Boundary cells keep the full cell size and may extend past the scene.
    """
    xmin, ymin, xmax, ymax = map(float, scene_bounds)
    if not (xmax > xmin and ymax > ymin):
        raise InvalidInputError(f"degenerate scene bounds {scene_bounds}")
    if not cell_size_m > 0:
        raise InvalidInputError(f"cell size must be > 0, got {cell_size_m}")
    ncols = math.ceil((xmax - xmin) / cell_size_m)
    nrows = math.ceil((ymax - ymin) / cell_size_m)
    cells = []
    for r in range(nrows):
        y1 = ymax - r * cell_size_m
        for c in range(ncols):
            x0 = xmin + c * cell_size_m
            cells.append(GridCell(
                cell_id=r * ncols + c + 1,
                bounds=(x0, y1 - cell_size_m, x0 + cell_size_m, y1),
                size_m=cell_size_m,
            ))
    return cells


def rasterize(polygons, transform: GeoTransform, width: int, height: int,
              crs_id: str | None = None) -> BitMask:
    """Burn polygons into a mask: pixel-center containment, even-odd rule.

    ``crs_id``, when given, is the CRS the polygons were digitized in and
    must match the transform's.
    """
    if crs_id is not None and transform.crs_id and crs_id != transform.crs_id:
        raise CrsMismatchError(f"polygon CRS {crs_id!r} != raster CRS {transform.crs_id!r}")
    out = np.zeros((height, width), dtype=bool)
    for poly in polygons:
        _burn_polygon(out, poly, transform)
    return BitMask(out)


def _burn_polygon(out: np.ndarray, poly: Polygon, transform: GeoTransform) -> None:
    height, width = out.shape
    # gather all ring edges in pixel space
    x1s, y1s, x2s, y2s = [], [], [], []
    for ring in poly.rings:
        for (ax, ay), (bx, by) in zip(ring, ring[1:]):
            pax, pay = transform.map_to_pixel(ax, ay)
            pbx, pby = transform.map_to_pixel(bx, by)
            x1s.append(pax); y1s.append(pay)
            x2s.append(pbx); y2s.append(pby)
    if not x1s:
        return
    x1 = np.array(x1s); y1 = np.array(y1s)
    x2 = np.array(x2s); y2 = np.array(y2s)
    row_lo = max(0, int(math.floor(min(y1.min(), y2.min()) - 0.5)))
    row_hi = min(height - 1, int(math.ceil(max(y1.max(), y2.max()))))
    for row in range(row_lo, row_hi + 1):
        y = row + 0.5
        hit = (y1 > y) != (y2 > y)
        if not hit.any():
            continue
        xi = x1[hit] + (y - y1[hit]) * (x2[hit] - x1[hit]) / (y2[hit] - y1[hit])
        xi.sort()
        # centers c + 0.5 with x_{2k} <= c + 0.5 < x_{2k+1} are inside
        for k in range(0, len(xi) - 1, 2):
            lo = int(math.ceil(xi[k] - 0.5))
            hi = int(math.ceil(xi[k + 1] - 0.5))  # exclusive
            lo = max(lo, 0)
            hi = min(hi, width)
            if hi > lo:
                out[row, lo:hi] = True


def _trace_rings(comp: np.ndarray) -> list[list[tuple[int, int]]]:
    """Trace all boundary rings of one connected component on the pixel lattice.

    Directed edges keep the component on the left when walking in
    (x right, y down) pixel coordinates; at pinch vertices (two pixels of
    the component touching only diagonally) the walk takes the turn that
    hugs the component, so every emitted ring is simple.
    """
    h, w = comp.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = comp
    inside = padded[1:-1, 1:-1]
    # boundary sides per direction; each yields directed edges (start -> end)
    edges: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def add(start, end):
        edges.setdefault(start, []).append(end)

    rows, cols = np.nonzero(inside)
    up_open = ~padded[0:-2, 1:-1][rows, cols]
    down_open = ~padded[2:, 1:-1][rows, cols]
    left_open = ~padded[1:-1, 0:-2][rows, cols]
    right_open = ~padded[1:-1, 2:][rows, cols]
    for r, c, uo, do, lo, ro in zip(rows.tolist(), cols.tolist(),
                                    up_open.tolist(), down_open.tolist(),
                                    left_open.tolist(), right_open.tolist()):
        if uo:
            add((c + 1, r), (c, r))          # top edge, right -> left
        if do:
            add((c, r + 1), (c + 1, r + 1))  # bottom edge, left -> right
        if lo:
            add((c, r), (c, r + 1))          # left edge, downward
        if ro:
            add((c + 1, r + 1), (c + 1, r))  # right edge, upward

    rings = []
    while edges:
        start = next(iter(edges))
        ring = [start]
        prev_dir = None
        cur = start
        while True:
            outs = edges[cur]
            if len(outs) == 1 or prev_dir is None:
                nxt = outs.pop()
            else:
                # pinch vertex: take the clockwise turn (hugs the component)
                nxt = None
                for cand in outs:
                    d = (cand[0] - cur[0], cand[1] - cur[1])
                    if prev_dir[0] * d[1] - prev_dir[1] * d[0] == -1:
                        nxt = cand
                        break
                if nxt is None:
                    nxt = outs[0]
                outs.remove(nxt)
            if not outs:
                del edges[cur]
            prev_dir = (nxt[0] - cur[0], nxt[1] - cur[1])
            ring.append(nxt)
            cur = nxt
            if cur == start:
                break
        rings.append(_compress_ring(ring))
    return rings


def _compress_ring(ring: list[tuple[int, int]]) -> list[tuple[int, int]]:
    """Drop collinear lattice vertices, keeping only corners."""
    out = []
    n = len(ring) - 1  # last repeats first
    for i in range(n):
        prev = ring[i - 1] if i > 0 else ring[n - 1]
        cur = ring[i]
        nxt = ring[i + 1]
        d1 = (cur[0] - prev[0], cur[1] - prev[1])
        d2 = (nxt[0] - cur[0], nxt[1] - cur[1])
        if d1 != d2:
            out.append(cur)
    out.append(out[0])
    return out


def polygonize(mask: BitMask, transform: GeoTransform) -> list[Polygon]:
    """Vectorize a mask: one polygon per 4-connected component, with holes.

    Boundaries follow pixel edges exactly, so re-rasterizing the result
    reproduces the input mask bit for bit.
    """
    data = mask.data
    if not data.any():
        return []
    labels, n = ndimage.label(data, structure=_CROSS)
    slices = ndimage.find_objects(labels)
    polys = []
    for idx in range(1, n + 1):
        sl = slices[idx - 1]
        comp = labels[sl] == idx
        row0, col0 = sl[0].start, sl[1].start
        rings = _trace_rings(comp)
        exterior = None
        holes = []
        for ring in rings:
            pts = [transform.pixel_to_map(c + col0, r + row0) for c, r in ring]
            # in pixel space (y down) exterior rings come out with negative
            # shoelace area; classify before map-coordinate flips
            px_area = _ring_signed_area([(c, r) for c, r in ring])
            if px_area < 0:
                exterior = pts
            else:
                holes.append(pts)
        assert exterior is not None, "component without an exterior ring"
        polys.append(Polygon(tuple(exterior), tuple(tuple(h) for h in holes)))
    return polys
