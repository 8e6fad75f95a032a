"""Dataset loaders, PNG exchange, the HEXI hexagonal image file, and hexagon rendering."""
from __future__ import annotations

import gzip
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .hexgrid import HexGeometry
from .resample import HexImage, SquareImage

TARGET = 32


class DataFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """Images (N, 32, 32, 3) float in [0, 1] and integer labels."""
    images: np.ndarray
    labels: np.ndarray
    split: str
    class_count: int

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataFormatError("image and label counts differ")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise DataFormatError("label outside [0, class_count)")

    def __len__(self) -> int:
        return len(self.labels)

    def limit(self, n: int | None) -> "Dataset":
        if n is None:
            return self
        return Dataset(self.images[:n], self.labels[:n], self.split, self.class_count)

    def square_image(self, i: int) -> SquareImage:
        return SquareImage(self.images[i])


def normalize(raw: np.ndarray) -> np.ndarray:
    return np.asarray(raw, dtype=np.float32) / np.float32(255.0)


def denormalize(x: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(x, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


# -- MNIST ---------------------------------------------------------------------
def _open(path: Path) -> bytes:
    raw = path.read_bytes()
    return gzip.decompress(raw) if raw[:2] == b"\x1f\x8b" else raw


def _find(root: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx"), stem.replace("-idx", ".idx") + ".gz"):
        if (root / name).exists():
            return root / name
    raise FileNotFoundError(f"no {stem}[.gz] under {root}")


def read_idx(path, expected_magic: int) -> np.ndarray:
    blob = _open(Path(path))
    if len(blob) < 8:
        raise DataFormatError(f"{path}: truncated IDX header")
    magic = struct.unpack(">I", blob[:4])[0]
    if magic != expected_magic:
        raise DataFormatError(f"{path}: bad IDX magic {magic}, expected {expected_magic}")
    ndim = magic & 0xFF
    dims = struct.unpack(f">{ndim}I", blob[4:4 + 4 * ndim])
    start = 4 + 4 * ndim
    count = int(np.prod(dims))
    if len(blob) - start < count:
        raise DataFormatError(f"{path}: truncated IDX payload")
    return np.frombuffer(blob, dtype=np.uint8, count=count, offset=start).reshape(dims)


def mnist_to_rgb32(raw: np.ndarray) -> np.ndarray:
    """(N, 28, 28) bytes -> (N, 32, 32, 3) floats, zero padded and channel replicated."""
    pad = (TARGET - raw.shape[1]) // 2
    x = np.pad(normalize(raw), ((0, 0), (pad, pad), (pad, pad)))
    return np.repeat(x[..., None], 3, axis=-1)


def load_mnist(path, split: str = "train") -> Dataset:
    root = Path(path)
    prefix = "train" if split == "train" else "t10k"
    images = read_idx(_find(root, f"{prefix}-images-idx3-ubyte"), 2051)
    labels = read_idx(_find(root, f"{prefix}-labels-idx1-ubyte"), 2049)
    if len(images) != len(labels):
        raise DataFormatError("MNIST image and label files disagree on count")
    return Dataset(mnist_to_rgb32(images), labels.astype(np.int64), split, 10)


# -- CIFAR-10 ------------------------------------------------------------------
CIFAR_RECORD = 1 + 3 * 32 * 32


def parse_cifar_records(blob: bytes) -> tuple[np.ndarray, np.ndarray]:
    if len(blob) % CIFAR_RECORD:
        raise DataFormatError(f"CIFAR-10 data length {len(blob)} is not a multiple of {CIFAR_RECORD}")
    rec = np.frombuffer(blob, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    images = rec[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
    return normalize(images), rec[:, 0].astype(np.int64)


def load_cifar10(path, split: str = "train") -> Dataset:
    root = Path(path)
    if root.is_file():
        files = [root]
    elif split == "train":
        files = sorted(root.glob("data_batch_*.bin"))
    else:
        files = sorted(root.glob("test_batch*.bin"))
    if not files:
        raise FileNotFoundError(f"no CIFAR-10 batches under {root}")
    parts = [parse_cifar_records(f.read_bytes()) for f in files]
    return Dataset(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]), split, 10)


# -- image folders -------------------------------------------------------------
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".ppm"}


def load_png(path, size: int | None = None) -> np.ndarray:
    """RGB floats in [0, 1]; optionally bilinear-resized to size x size."""
    try:
        with Image.open(path) as im:
            im = im.convert("RGB")
            if size is not None and im.size != (size, size):
                im = im.resize((size, size), Image.BILINEAR)
            arr = np.asarray(im)
    except (OSError, SyntaxError) as exc:
        raise DataFormatError(f"cannot read image {path}: {exc}") from exc
    return normalize(arr)


def save_png(path, image: np.ndarray) -> None:
    arr = np.asarray(image)
    if arr.ndim == 3 and arr.shape[-1] == 1:
        arr = arr[..., 0]
    Image.fromarray(denormalize(arr)).save(path, format="PNG")


def load_image_folder(path, split: str = "train") -> Dataset:
    """One sub-directory per class, classes and files in lexicographic order."""
    root = Path(path)
    classes = sorted(d for d in root.iterdir() if d.is_dir())
    if not classes:
        raise FileNotFoundError(f"no class folders under {root}")
    images, labels = [], []
    for k, d in enumerate(classes):
        for f in sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES):
            images.append(load_png(f, TARGET))
            labels.append(k)
    if not images:
        raise DataFormatError(f"no images under {root}")
    return Dataset(np.stack(images), np.array(labels, dtype=np.int64), split, len(classes))


# -- HEXI file -----------------------------------------------------------------
HEXI_MAGIC = b"HEXI"
HEXI_VERSION = 1
_HEXI_HEADER = struct.Struct("<4sHIIHddd")


def encode_hex_image(img: HexImage) -> bytes:
    g = img.geometry
    data = np.asarray(img.data)
    header = _HEXI_HEADER.pack(HEXI_MAGIC, HEXI_VERSION, g.rows, g.cols, data.shape[-1],
                               g.circumradius, g.origin_x, g.origin_y)
    return header + np.ascontiguousarray(data, dtype="<f4").tobytes()


def decode_hex_image(blob: bytes) -> HexImage:
    if len(blob) < _HEXI_HEADER.size:
        raise DataFormatError("truncated HEXI header")
    magic, version, rows, cols, ch, r, ox, oy = _HEXI_HEADER.unpack_from(blob)
    if magic != HEXI_MAGIC:
        raise DataFormatError(f"bad HEXI magic {magic!r}")
    if version != HEXI_VERSION:
        raise DataFormatError(f"unsupported HEXI version {version}")
    n = rows * cols * ch
    if len(blob) - _HEXI_HEADER.size != 4 * n:
        raise DataFormatError(f"HEXI payload has {len(blob) - _HEXI_HEADER.size} bytes, expected {4 * n}")
    data = np.frombuffer(blob, dtype="<f4", offset=_HEXI_HEADER.size).reshape(rows, cols, ch)
    return HexImage(HexGeometry(rows, cols, r, ox, oy), data.astype(np.float32))


def write_hex_image(path, img: HexImage) -> None:
    Path(path).write_bytes(encode_hex_image(img))


def read_hex_image(path) -> HexImage:
    return decode_hex_image(Path(path).read_bytes())


# -- rendering -----------------------------------------------------------------
def render_hex(img: HexImage, scale: float = 8.0) -> np.ndarray:
    """Rasterize every hexagon as a filled polygon on a black canvas.

    The canvas covers the grid bounding box at ``scale`` pixels per unit
    length.  Each output pixel center is assigned to the hexagon whose
    center is nearest, and kept only if it falls inside that hexagon.
    Returns (height, width, channels) floats.
    """
    if scale < 4:
        raise ValueError(f"scale must be at least 4, got {scale}")
    g = img.geometry
    data = np.asarray(img.data, dtype=np.float64)
    if data.ndim == 2:
        data = data[..., None]
    x0, y0, x1, y1 = g.bounding_box()
    w = int(math.ceil((x1 - x0) * scale))
    h = int(math.ceil((y1 - y0) * scale))
    px = x0 + (np.arange(w) + 0.5) / scale
    py = y0 + (np.arange(h) + 0.5) / scale
    X, Y = np.meshgrid(px, py)
    r = g.circumradius
    # row candidates: the nearest row and its two neighbours, then the nearest column per row
    row0 = np.floor((Y - g.origin_y) / g.dy + 0.5).astype(np.int64)
    best = np.full(X.shape, np.inf)
    best_idx = np.full(X.shape, -1, dtype=np.int64)
    for dr in (-1, 0, 1):
        row = np.clip(row0 + dr, 0, g.rows - 1)
        shift = 0.5 * (row % 2)
        col = np.clip(np.floor((X - g.origin_x) / g.dx - shift + 0.5).astype(np.int64), 0, g.cols - 1)
        for dc in (-1, 0, 1):
            c = np.clip(col + dc, 0, g.cols - 1)
            cx = g.origin_x + (c + shift) * g.dx
            cy = g.origin_y + row * g.dy
            d = (X - cx) ** 2 + (Y - cy) ** 2
            better = d < best
            best = np.where(better, d, best)
            best_idx = np.where(better, row * g.cols + c, best_idx)
    cx_all, cy_all = g.centers()
    cx = cx_all.ravel()[best_idx]
    cy = cy_all.ravel()[best_idx]
    inside = _in_pointy_hexagon(X - cx, Y - cy, r)
    out = np.zeros((h, w, data.shape[-1]))
    flat = data.reshape(-1, data.shape[-1])
    out[inside] = flat[best_idx[inside]]
    return out


def _in_pointy_hexagon(dx: np.ndarray, dy: np.ndarray, r: float) -> np.ndarray:
    ax, ay = np.abs(dx), np.abs(dy)
    half_w = r * math.sqrt(3) / 2
    eps = 1e-12 * r
    return (ax <= half_w + eps) & (ay <= r - ax / math.sqrt(3) + eps)


def render_hex_to_png(img: HexImage, path, scale: float = 8.0) -> np.ndarray:
    out = render_hex(img, scale)
    save_png(path, out)
    return out
