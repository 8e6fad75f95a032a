"""Pooling maps between a grid and its half-resolution successor.

A ``PoolMapping`` partitions the input cells into groups, one per output
cell.  For hexagonal grids the groups are built around anchors on the
stride-2 sublattice (even rows, even columns): every input cell joins its
nearest anchor, ties going to the lowest (row, col) anchor.  Which output
cell a group feeds is then decided by a linear assignment problem that
minimizes the summed squared distance between group centroids and output
cell centers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .hexgrid import HexGeometry


class MappingIntegrityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PoolMapping:
    in_shape: tuple[int, int]
    out_shape: tuple[int, int]
    groups: tuple[np.ndarray, ...]     # flat input indices per flat output cell
    owner: np.ndarray                  # (n_in,) output cell of every input cell
    cost: float
    in_centers: np.ndarray             # (n_in, 2) x, y
    out_centers: np.ndarray            # (n_out, 2)
    in_geometry: HexGeometry | None = None
    out_geometry: HexGeometry | None = None

    @property
    def n_in(self) -> int:
        return self.in_shape[0] * self.in_shape[1]

    @property
    def n_out(self) -> int:
        return self.out_shape[0] * self.out_shape[1]

    @property
    def padded(self) -> np.ndarray:
        """(n_out, max_group) member table, padded with the sentinel ``n_in``."""
        return _padded(self)

    @property
    def group_sizes(self) -> np.ndarray:
        return np.array([len(g) for g in self.groups])

    @property
    def position_in_group(self) -> np.ndarray:
        """(n_in,) position of every input cell inside its own group."""
        pos = np.empty(self.n_in, dtype=np.int64)
        for g in self.groups:
            pos[g] = np.arange(len(g))
        return pos


def _padded(m: PoolMapping) -> np.ndarray:
    width = max(len(g) for g in m.groups)
    out = np.full((m.n_out, width), m.n_in, dtype=np.int64)
    for o, g in enumerate(m.groups):
        out[o, :len(g)] = g
    return out


def solve_assignment(cost: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimum-cost perfect matching; returns ``cols`` with row i -> cols[i]."""
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(cost.shape[0], dtype=np.int64)
    perm[rows] = cols
    return perm, float(cost[rows, cols].sum())


def pooled_geometry(geom: HexGeometry) -> HexGeometry:
    """Half-resolution grid with doubled spacing, centered on the same region."""
    rows, cols = math.ceil(geom.rows / 2), math.ceil(geom.cols / 2)
    probe = HexGeometry(rows, cols, 2.0 * geom.circumradius)
    px0, py0, px1, py1 = probe.bounding_box()
    x0, y0, x1, y1 = geom.bounding_box()
    return HexGeometry(rows, cols, probe.circumradius,
                       (x0 + x1) / 2 - (px0 + px1) / 2, (y0 + y1) / 2 - (py0 + py1) / 2)


def _centers(geom: HexGeometry) -> np.ndarray:
    x, y = geom.centers()
    return np.column_stack([x.ravel(), y.ravel()])


@lru_cache(maxsize=64)
def build_pool_mapping(in_shape: tuple[int, int], geometry: HexGeometry | None = None) -> PoolMapping:
    """Hexagonal pooling map for an ``in_shape`` grid (ceil-halving per axis)."""
    rows, cols = in_shape
    if geometry is None:
        geometry = HexGeometry(rows, cols)
    elif geometry.shape != (rows, cols):
        raise ValueError(f"geometry {geometry.shape} does not match {in_shape}")
    out_geom = pooled_geometry(geometry)
    in_xy = _centers(geometry)
    out_xy = _centers(out_geom)

    anchors = np.array([(2 * i) * cols + 2 * j
                        for i in range(out_geom.rows) for j in range(out_geom.cols)])
    d2 = ((in_xy[:, None, :] - in_xy[anchors][None, :, :]) ** 2).sum(-1)
    tol = 1e-9 * geometry.circumradius ** 2
    # first anchor within tolerance of the minimum = lowest (row, col) on ties
    nearest = np.argmax(d2 <= d2.min(axis=1, keepdims=True) + tol, axis=1)

    n_out = len(anchors)
    members = [np.flatnonzero(nearest == a) for a in range(n_out)]
    centroids = np.array([in_xy[m].mean(axis=0) for m in members])
    cost = ((centroids[:, None, :] - out_xy[None, :, :]) ** 2).sum(-1)
    perm, total = solve_assignment(cost)

    groups: list[np.ndarray] = [None] * n_out  # type: ignore[list-item]
    owner = np.empty(rows * cols, dtype=np.int64)
    for a, o in enumerate(perm):
        groups[o] = members[a]
        owner[members[a]] = o
    m = PoolMapping((rows, cols), out_geom.shape, tuple(groups), owner, total,
                    in_xy, out_xy, geometry, out_geom)
    _validate(m)
    return m


@lru_cache(maxsize=64)
def square_pool_mapping(in_shape: tuple[int, int], extent: tuple[float, float] | None = None) -> PoolMapping:
    """2x2 block pooling (ceil-halving), centers in a frame of size ``extent`` (h, w)."""
    h, w = in_shape
    oh, ow = math.ceil(h / 2), math.ceil(w / 2)
    eh, ew = extent if extent is not None else (float(h), float(w))
    groups = []
    owner = np.empty(h * w, dtype=np.int64)
    for i in range(oh):
        for j in range(ow):
            g = [(2 * i + a) * w + (2 * j + b) for a in (0, 1) for b in (0, 1)
                 if 2 * i + a < h and 2 * j + b < w]
            owner[g] = len(groups)
            groups.append(np.array(g, dtype=np.int64))
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    in_xy = np.column_stack([((jj + 0.5) * ew / w).ravel(), ((ii + 0.5) * eh / h).ravel()])
    out_xy = np.array([in_xy[g].mean(axis=0) for g in groups])
    m = PoolMapping((h, w), (oh, ow), tuple(groups), owner, 0.0, in_xy, out_xy)
    _validate(m)
    return m


def _validate(m: PoolMapping) -> None:
    seen = np.concatenate(m.groups)
    if len(seen) != m.n_in or len(np.unique(seen)) != m.n_in:
        raise MappingIntegrityError("pooling groups do not partition the input grid")
    if any(len(g) == 0 for g in m.groups):
        raise MappingIntegrityError("empty pooling group")


@dataclass(frozen=True, eq=False)
class WhereMask:
    """Argmax switches of a max pooling: (batch, n_out, channels) flat input indices."""
    mapping: PoolMapping
    index: np.ndarray

    def validate(self) -> None:
        if self.index.ndim != 3 or self.index.shape[1] != self.mapping.n_out:
            raise MappingIntegrityError(f"mask shape {self.index.shape} does not fit mapping")
        if self.index.min() < 0 or self.index.max() >= self.mapping.n_in:
            raise MappingIntegrityError("mask index outside the input grid")
        owners = self.mapping.owner[self.index]
        expected = np.arange(self.mapping.n_out)[None, :, None]
        if not np.array_equal(owners, np.broadcast_to(expected, owners.shape)):
            raise MappingIntegrityError("stale mask: index outside its pooling group")


def where_translation(src: PoolMapping, dst: PoolMapping) -> tuple[np.ndarray, np.ndarray]:
    """Table carrying argmax switches from ``src`` pooling onto ``dst`` groups.

    Both mappings must express their centers in the same frame.  Every
    output cell of ``dst`` reads the switch of the nearest output cell of
    ``src``; the switch position is replaced by the member of the ``dst``
    group closest to it.  Returns ``(source_cell, table)`` where
    ``table[o, k]`` is the ``dst`` input index standing in for member ``k`` of
    the ``src`` group feeding ``dst`` output cell ``o``.
    """
    d = ((dst.out_centers[:, None, :] - src.out_centers[None, :, :]) ** 2).sum(-1)
    source = np.argmin(d, axis=1)
    width = max(len(g) for g in src.groups)
    table = np.zeros((dst.n_out, width), dtype=np.int64)
    for o in range(dst.n_out):
        members = dst.groups[o]
        src_members = src.groups[source[o]]
        for k in range(width):
            p = src.in_centers[src_members[min(k, len(src_members) - 1)]]
            dist = ((dst.in_centers[members] - p) ** 2).sum(-1)
            table[o, k] = members[int(np.argmin(dist))]
    return source, table


def translate_where(mask: WhereMask, dst: PoolMapping, translation=None) -> WhereMask:
    """Express a max-pool switch mask of one lattice on another lattice's groups."""
    src = mask.mapping
    source, table = translation if translation is not None else where_translation(src, dst)
    pos = src.position_in_group[mask.index]            # (N, n_src_out, C)
    picked = pos[:, source, :]                          # (N, n_dst_out, C)
    rows = np.arange(dst.n_out)[None, :, None]
    return WhereMask(dst, table[rows, picked])
