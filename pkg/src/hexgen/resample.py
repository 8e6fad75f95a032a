"""Square <-> hexagonal lattice resampling.

Image coordinates: pixel (i, j) covers ``[j, j+1] x [i, i+1]`` with ``x``
to the right and ``y`` downward.  Arrays are stored interleaved,
``(height, width, channels)`` for square images and ``(rows, cols, channels)``
for hexagonal ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator

import numpy as np
from scipy.spatial import cKDTree

from .hexgrid import HexGeometry, hexagon_vertices
from .polygon import box_intersection_area

# circumradius for which one hexagon has the area of one square pixel
UNIT_AREA_CIRCUMRADIUS = math.sqrt(2.0 / (3.0 * math.sqrt(3.0)))
MIN_OVERLAP_AREA = 1e-12

METHODS = ("nearest", "bilinear", "bicubic", "area")


class DimensionError(ValueError):
    pass


def _as_hwc(data) -> np.ndarray:
    a = np.asarray(data, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3:
        raise DimensionError(f"expected (h, w[, c]) array, got shape {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class SquareImage:
    data: np.ndarray

    def __post_init__(self):
        a = _as_hwc(self.data)
        if a.size and (a.min() < 0.0 or a.max() > 1.0):
            raise ValueError("square image values must lie in [0, 1]")
        object.__setattr__(self, "data", a)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class HexImage:
    geometry: HexGeometry
    data: np.ndarray

    def __post_init__(self):
        a = _as_hwc(self.data)
        if a.shape[:2] != self.geometry.shape:
            raise DimensionError(f"data shape {a.shape[:2]} does not match grid {self.geometry.shape}")
        if a.size and (a.min() < 0.0 or a.max() > 1.0):
            raise ValueError("hexagonal image values must lie in [0, 1]")
        object.__setattr__(self, "data", a)

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class OverlapMap:
    """Exact pixel/hexagon intersection areas, one entry per nonempty pair.

    ``sq_index`` and ``hex_index`` are (n, 2) arrays of (row, col) pairs,
    ``area`` the clipped area of each pair.
    """
    geometry: HexGeometry
    height: int
    width: int
    sq_index: np.ndarray
    hex_index: np.ndarray
    area: np.ndarray
    total_area: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total_area", float(np.sum(self.area)))

    def __len__(self) -> int:
        return len(self.area)

    @property
    def entries(self) -> Iterator[tuple[tuple[int, int], tuple[int, int], float]]:
        for s, h, a in zip(self.sq_index, self.hex_index, self.area):
            yield (int(s[0]), int(s[1])), (int(h[0]), int(h[1])), float(a)

    @property
    def sq_flat(self) -> np.ndarray:
        return self.sq_index[:, 0] * self.width + self.sq_index[:, 1]

    @property
    def hex_flat(self) -> np.ndarray:
        return self.hex_index[:, 0] * self.geometry.cols + self.hex_index[:, 1]

    def hex_coverage(self) -> np.ndarray:
        """Overlapped area of every hex cell, (rows, cols)."""
        g = self.geometry
        return np.bincount(self.hex_flat, weights=self.area, minlength=g.size).reshape(g.shape)

    def pixel_coverage(self) -> np.ndarray:
        """Overlapped area of every square pixel, (height, width)."""
        return np.bincount(self.sq_flat, weights=self.area,
                           minlength=self.height * self.width).reshape(self.height, self.width)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def fit_hex_geometry(height: int, width: int) -> HexGeometry:
    """Area-matched hexagonal grid centered over a ``height x width`` image.

    Each hexagon gets the area of one pixel.  Row and column counts are the
    image extent divided by the row/column spacing, rounded half up, which
    keeps the cell count close to the pixel count (32x32 -> 34x30).
    """
    if height < 1 or width < 1:
        raise DimensionError(f"image must be at least 1x1, got {height}x{width}")
    r = UNIT_AREA_CIRCUMRADIUS
    rows = max(1, _round_half_up(height / (1.5 * r)))
    cols = max(1, _round_half_up(width / (math.sqrt(3.0) * r)))
    probe = HexGeometry(rows, cols, r)
    xmin, ymin, xmax, ymax = probe.bounding_box()
    ox = width / 2.0 - (xmin + xmax) / 2.0
    oy = height / 2.0 - (ymin + ymax) / 2.0
    return HexGeometry(rows, cols, r, ox, oy)


def _check_fitted(geom: HexGeometry, height: int, width: int) -> None:
    xmin, ymin, xmax, ymax = geom.bounding_box()
    slack_x, slack_y = geom.dx, geom.dy
    if (abs((xmin + xmax) - width) > slack_x or abs((ymin + ymax) - height) > slack_y
            or abs((xmax - xmin) - width) > 2 * slack_x or abs((ymax - ymin) - height) > 2 * slack_y):
        raise DimensionError(
            f"{geom.rows}x{geom.cols} grid is not registered to a {height}x{width} image")


@lru_cache(maxsize=32)
def compute_overlap_map(geom: HexGeometry, height: int, width: int) -> OverlapMap:
    """Clip every hexagon against the pixels under its bounding box."""
    sq, hx, areas = [], [], []
    cx, cy = geom.centers()
    r = geom.circumradius
    half_w = 0.5 * geom.dx
    for row in range(geom.rows):
        for col in range(geom.cols):
            x0, y0 = float(cx[row, col]), float(cy[row, col])
            poly = hexagon_vertices(x0, y0, r)
            i_lo = max(0, int(math.floor(y0 - r)))
            i_hi = min(height - 1, int(math.ceil(y0 + r)) - 1)
            j_lo = max(0, int(math.floor(x0 - half_w)))
            j_hi = min(width - 1, int(math.ceil(x0 + half_w)) - 1)
            for i in range(i_lo, i_hi + 1):
                for j in range(j_lo, j_hi + 1):
                    a = box_intersection_area(poly, j, i, j + 1, i + 1)
                    if a >= MIN_OVERLAP_AREA:
                        sq.append((i, j))
                        hx.append((row, col))
                        areas.append(a)
    return OverlapMap(geom, height, width,
                      np.asarray(sq, dtype=np.int64).reshape(-1, 2),
                      np.asarray(hx, dtype=np.int64).reshape(-1, 2),
                      np.asarray(areas, dtype=np.float64))


def _catmull_rom(t: np.ndarray) -> np.ndarray:
    t2, t3 = t * t, t * t * t
    return np.stack([
        0.5 * (-t3 + 2 * t2 - t),
        0.5 * (3 * t3 - 5 * t2 + 2),
        0.5 * (-3 * t3 + 4 * t2 + t),
        0.5 * (t3 - t2),
    ], axis=-1)


def sample_square(data: np.ndarray, x: np.ndarray, y: np.ndarray, method: str) -> np.ndarray:
    """Interpolate an (h, w, c) array at image coordinates; clamp-to-edge."""
    h, w = data.shape[:2]
    u = x - 0.5
    v = y - 0.5
    if method == "nearest":
        j = np.clip(np.floor(x).astype(np.int64), 0, w - 1)
        i = np.clip(np.floor(y).astype(np.int64), 0, h - 1)
        return data[i, j]
    if method == "bilinear":
        j0 = np.floor(u).astype(np.int64)
        i0 = np.floor(v).astype(np.int64)
        fu = (u - j0)[..., None]
        fv = (v - i0)[..., None]
        j0c, j1c = np.clip(j0, 0, w - 1), np.clip(j0 + 1, 0, w - 1)
        i0c, i1c = np.clip(i0, 0, h - 1), np.clip(i0 + 1, 0, h - 1)
        top = data[i0c, j0c] * (1 - fu) + data[i0c, j1c] * fu
        bottom = data[i1c, j0c] * (1 - fu) + data[i1c, j1c] * fu
        return top * (1 - fv) + bottom * fv
    if method == "bicubic":
        j0 = np.floor(u).astype(np.int64)
        i0 = np.floor(v).astype(np.int64)
        wu = _catmull_rom(u - j0)
        wv = _catmull_rom(v - i0)
        out = np.zeros(u.shape + (data.shape[2],))
        for a in range(4):
            ii = np.clip(i0 - 1 + a, 0, h - 1)
            for b in range(4):
                jj = np.clip(j0 - 1 + b, 0, w - 1)
                out += (wv[..., a] * wu[..., b])[..., None] * data[ii, jj]
        return out
    raise ValueError(f"unknown interpolation method {method!r}")


def square_to_hex(img: SquareImage, geom: HexGeometry, method: str = "bilinear") -> HexImage:
    """Sample a square image on a hexagonal grid.

    ``nearest``/``bilinear``/``bicubic`` interpolate at each hexagon center;
    ``area`` averages the overlapped pixels weighted by overlap area.
    """
    if not isinstance(img, SquareImage):
        img = SquareImage(img)
    _check_fitted(geom, img.height, img.width)
    if method == "area":
        out = _area_to_hex(img.data, compute_overlap_map(geom, img.height, img.width))
    else:
        x, y = geom.centers()
        out = sample_square(img.data, x, y, method)
    return HexImage(geom, np.clip(out, 0.0, 1.0))


def _weighted_mean(target: np.ndarray, values: np.ndarray, weights: np.ndarray, n: int):
    """Per-target weighted mean of (entries, channels) values; returns (means, hit mask).

    Deviations from one member value per target are averaged, so a target
    whose members are all equal gets that value exactly.
    """
    c = values.shape[1]
    ref = np.zeros((n, c))
    ref[target[::-1]] = values[::-1]
    dev = values - ref[target]
    num = np.stack([np.bincount(target, weights=weights * dev[:, k], minlength=n) for k in range(c)], axis=-1)
    den = np.bincount(target, weights=weights, minlength=n)
    out = np.zeros((n, c))
    hit = den > 0
    out[hit] = ref[hit] + num[hit] / den[hit, None]
    return out, hit


def _area_to_hex(data: np.ndarray, omap: OverlapMap) -> np.ndarray:
    g = omap.geometry
    c = data.shape[-1]
    values = data[omap.sq_index[:, 0], omap.sq_index[:, 1]]
    out, hit = _weighted_mean(omap.hex_flat, values, omap.area, g.size)
    if not hit.all():
        # cells entirely outside the image: fall back to the nearest pixel
        x, y = g.centers()
        out[~hit] = sample_square(data, x.ravel()[~hit], y.ravel()[~hit], "nearest")
    return out.reshape(g.rows, g.cols, c)


def hex_to_square(img: HexImage, height: int, width: int, method: str = "area") -> SquareImage:
    """Render a hexagonal image back onto a ``height x width`` pixel grid."""
    geom = img.geometry
    _check_fitted(geom, height, width)
    flat = img.data.reshape(geom.size, -1)
    if method == "nearest":
        out = flat[_nearest_hex_index(geom, height, width)].reshape(height, width, -1)
    elif method == "area":
        omap = compute_overlap_map(geom, height, width)
        c = flat.shape[1]
        mean, hit = _weighted_mean(omap.sq_flat, flat[omap.hex_flat], omap.area, height * width)
        out = flat[_nearest_hex_index(geom, height, width)].copy()
        out[hit] = mean[hit]
        out = out.reshape(height, width, c)
    else:
        raise ValueError(f"unknown method {method!r}; expected 'nearest' or 'area'")
    return SquareImage(np.clip(out, 0.0, 1.0))


@lru_cache(maxsize=32)
def _nearest_hex_index(geom: HexGeometry, height: int, width: int) -> np.ndarray:
    cx, cy = geom.centers()
    tree = cKDTree(np.column_stack([cx.ravel(), cy.ravel()]))
    jj, ii = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    _, idx = tree.query(np.column_stack([jj.ravel(), ii.ravel()]))
    idx = np.asarray(idx, dtype=np.int64)
    idx.setflags(write=False)
    return idx
