"""Hexagonal lattice geometry and addressing.

Cells are pointy-top regular hexagons stored linewise in a rectangular
(rows, cols) array; every odd row is shifted right by half a column ("odd-r").
Row indices grow downward, like image rows.

Directions are counted counterclockwise starting East, as seen on screen
(so "north" means decreasing row index)::

    index  name  axial (a, b)
      1    E     ( 1,  0)
      2    NE    ( 0,  1)
      3    NW    (-1,  1)
      4    W     (-1,  0)
      5    SW    ( 0, -1)
      6    SE    ( 1, -1)

Axial coordinates are Eisenstein integers ``a + b*w`` with ``w = exp(i*pi/3)``:
``a`` steps along East, ``b`` steps along North-East.  Spiral (SAA) digit
``d`` in 1..6 denotes direction ``d`` above and digit 0 the center.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

SQRT3 = math.sqrt(3.0)

DIRECTION_NAMES = ("E", "NE", "NW", "W", "SW", "SE")
AXIAL_DIRECTIONS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))
# Opposite of direction i (0-based) is (i + 3) % 6.

# Septree generator 2 + w.  Its norm is 7 and {0, units} is a complete residue
# system modulo it, which makes the base-7 expansion below injective.
SEPTREE_GENERATOR = (2, 1)


class HexGridError(ValueError):
    pass


class InvalidAddressError(HexGridError):
    pass


@dataclass(frozen=True)
class HexGeometry:
    rows: int
    cols: int
    circumradius: float = 1.0
    origin_x: float = 0.0
    origin_y: float = 0.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise HexGridError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if not self.circumradius > 0:
            raise HexGridError(f"circumradius must be positive, got {self.circumradius}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @property
    def dx(self) -> float:
        """Horizontal center spacing."""
        return SQRT3 * self.circumradius

    @property
    def dy(self) -> float:
        """Vertical center spacing."""
        return 1.5 * self.circumradius

    @property
    def cell_area(self) -> float:
        return 1.5 * SQRT3 * self.circumradius ** 2

    def contains(self, row: int, col: int) -> bool:
        return 0 <= row < self.rows and 0 <= col < self.cols

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Center coordinates of all cells as two (rows, cols) arrays."""
        r = np.arange(self.rows)[:, None]
        c = np.arange(self.cols)[None, :]
        x = self.origin_x + (c + 0.5 * (r % 2)) * self.dx
        y = self.origin_y + r * self.dy + 0.0 * c
        return x, y

    def vertices(self, row: int, col: int) -> list[tuple[float, float]]:
        """Corners of one cell, counterclockwise on screen starting at the top."""
        cx, cy = hex_center(self, HexCoord(row, col))
        return hexagon_vertices(cx, cy, self.circumradius)

    def bounding_box(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the union of all cells."""
        shift = 0.5 if self.rows > 1 else 0.0
        xmin = self.origin_x - 0.5 * self.dx
        xmax = self.origin_x + (self.cols - 1 + shift + 0.5) * self.dx
        ymin = self.origin_y - self.circumradius
        ymax = self.origin_y + (self.rows - 1) * self.dy + self.circumradius
        return xmin, ymin, xmax, ymax

    def scaled(self, factor: float) -> "HexGeometry":
        return HexGeometry(self.rows, self.cols, self.circumradius * factor,
                           self.origin_x * factor, self.origin_y * factor)


@dataclass(frozen=True, order=True)
class HexCoord:
    row: int
    col: int


@dataclass(frozen=True)
class SpiralAddress:
    digits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))
        for d in self.digits:
            if not 0 <= d <= 6:
                raise InvalidAddressError(f"spiral digit {d} not in 0..6")

    @property
    def order(self) -> int:
        return len(self.digits)


def hexagon_vertices(cx: float, cy: float, r: float) -> list[tuple[float, float]]:
    # pointy-top: vertices at 90 + 60k degrees, y axis pointing down
    return [(cx + r * math.cos(math.radians(90 + 60 * k)),
             cy - r * math.sin(math.radians(90 + 60 * k))) for k in range(6)]


def _check(geom: HexGeometry, c: HexCoord) -> None:
    if not geom.contains(c.row, c.col):
        raise IndexError(f"{c} outside {geom.rows}x{geom.cols} grid")


def hex_center(geom: HexGeometry, c: HexCoord) -> tuple[float, float]:
    _check(geom, c)
    x = geom.origin_x + (c.col + 0.5 * (c.row % 2)) * geom.dx
    y = geom.origin_y + c.row * geom.dy
    return x, y


def axial_to_offset(da: int, db: int, parity: int) -> tuple[int, int]:
    """Turn an axial displacement into (drow, dcol) for an anchor row of given parity."""
    drow = -db
    # x (in columns) must move by da + db/2 while the half-column shift changes
    twice = 2 * da + db + parity - ((parity - db) % 2)
    return drow, twice // 2


def hex_neighbors(geom: HexGeometry, c: HexCoord) -> list[tuple[HexCoord, bool]]:
    """The six neighbors of ``c`` counterclockwise from East, flagged in/out of bounds."""
    _check(geom, c)
    out = []
    for da, db in AXIAL_DIRECTIONS:
        drow, dcol = axial_to_offset(da, db, c.row % 2)
        n = HexCoord(c.row + drow, c.col + dcol)
        out.append((n, geom.contains(n.row, n.col)))
    return out


def _eis_mul(x: tuple[int, int], y: tuple[int, int]) -> tuple[int, int]:
    # (a + b w)(c + d w) with w^2 = w - 1
    a, b = x
    c, d = y
    return (a * c - b * d, a * d + b * c + b * d)


def spiral_to_axial(addr: SpiralAddress | Sequence[int]) -> tuple[int, int]:
    """Axial displacement of a spiral address relative to the Hexarray center.

    Digits are most significant first.  The digit at level k (0 = least
    significant) contributes ``unit(d) * (2 + w)**k``, so every order-n
    address names a distinct cell of the order-n Hexarray.
    """
    if not isinstance(addr, SpiralAddress):
        addr = SpiralAddress(tuple(addr))
    a, b = 0, 0
    scale = (1, 0)
    for d in reversed(addr.digits):
        if d:
            ua, ub = _eis_mul(AXIAL_DIRECTIONS[d - 1], scale)
            a += ua
            b += ub
        scale = _eis_mul(scale, SEPTREE_GENERATOR)
    return a, b


def spiral_to_offset(addr: SpiralAddress | Sequence[int], parity: int = 0) -> tuple[int, int]:
    """(drow, dcol) of a spiral address as seen from an anchor row of ``parity``."""
    return axial_to_offset(*spiral_to_axial(addr), parity)


def hexarray_addresses(order: int) -> Iterator[SpiralAddress]:
    """All 7**order addresses of a Hexarray in increasing base-7 order."""
    for n in range(7 ** order):
        digits = []
        for _ in range(order):
            n, d = divmod(n, 7)
            digits.append(d)
        yield SpiralAddress(tuple(reversed(digits)))


@lru_cache(maxsize=None)
def kernel_offsets(radius: int) -> tuple[tuple[tuple[int, int], ...], tuple[tuple[int, int], ...]]:
    """Kernel tap displacements in spiral digit order.

    Returns ``(even, odd)``: the (drow, dcol) tables for anchors on even and
    odd rows.  Radius 0 is the center alone; radius 1 adds the six neighbors.
    """
    if radius == 0:
        digits = [0]
    elif radius == 1:
        digits = list(range(7))
    else:
        raise HexGridError(f"unsupported kernel radius {radius}; only 0 and 1")
    even = tuple(spiral_to_offset([d], 0) for d in digits)
    odd = tuple(spiral_to_offset([d], 1) for d in digits)
    return even, odd


def opposite_tap(tap: int) -> int:
    """Index of the tap pointing the other way (center maps to itself)."""
    return 0 if tap == 0 else (tap - 1 + 3) % 6 + 1


@lru_cache(maxsize=64)
def neighbor_table(rows: int, cols: int, radius: int = 1) -> np.ndarray:
    """(rows*cols, taps) flat indices of each cell's kernel taps.

    Out-of-grid taps point at the sentinel index ``rows*cols``.
    """
    even, odd = kernel_offsets(radius)
    size = rows * cols
    table = np.full((size, len(even)), size, dtype=np.int64)
    r = np.repeat(np.arange(rows), cols)
    c = np.tile(np.arange(cols), rows)
    for t in range(len(even)):
        dr = np.where(r % 2 == 0, even[t][0], odd[t][0])
        dc = np.where(r % 2 == 0, even[t][1], odd[t][1])
        rr, cc = r + dr, c + dc
        ok = (rr >= 0) & (rr < rows) & (cc >= 0) & (cc < cols)
        table[ok, t] = rr[ok] * cols + cc[ok]
    table.setflags(write=False)
    return table
