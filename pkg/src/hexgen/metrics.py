"""Transformation-efficiency measures between a square image and a hexagonal one.

The error between square image S and hexagonal image H is the overlap-area
weighted mean over all pixel/hexagon subareas a::

    MSE = 1/|A| * sum_a |a| * (S(a) - H(a))**2,     |A| = sum_a |a|

``|A|`` is the total subarea measure, not the number of subareas; with that
reading the prefactor turns the sum into a weighted mean.  For multichannel
images the squared error of a subarea is averaged over channels first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .resample import DimensionError, HexImage, OverlapMap, SquareImage


@dataclass(frozen=True)
class MetricReport:
    mse: float
    psnr: float
    mae: float
    total_weight: float
    psnr_std: float = 0.0
    count: int = 1

    def csv_header(self) -> str:
        return "mse,psnr,mae,total_weight,psnr_std,count"

    def csv_row(self) -> str:
        return ",".join([_fmt(self.mse), _fmt(self.psnr), _fmt(self.mae),
                         _fmt(self.total_weight), _fmt(self.psnr_std), str(self.count)])


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def _arrays(S, H) -> tuple[np.ndarray, np.ndarray]:
    s = S.data if isinstance(S, SquareImage) else np.asarray(S, dtype=np.float64)
    h = H.data if isinstance(H, HexImage) else np.asarray(H, dtype=np.float64)
    return s, h


def _gather(S, H, omap: OverlapMap) -> tuple[np.ndarray, np.ndarray]:
    """Per-subarea values, shaped (..., n_entries, channels)."""
    s, h = _arrays(S, H)
    if s.shape[-3:-1] != (omap.height, omap.width):
        raise DimensionError(f"square image {s.shape} does not match map {omap.height}x{omap.width}")
    if h.shape[-3:-1] != omap.geometry.shape:
        raise DimensionError(f"hex image {h.shape} does not match grid {omap.geometry.shape}")
    if s.shape[-1] != h.shape[-1]:
        raise DimensionError(f"channel mismatch: {s.shape[-1]} vs {h.shape[-1]}")
    sv = s[..., omap.sq_index[:, 0], omap.sq_index[:, 1], :]
    hv = h[..., omap.hex_index[:, 0], omap.hex_index[:, 1], :]
    return sv.astype(np.float64), hv.astype(np.float64)


def transformation_mse(S, H, omap: OverlapMap) -> float | np.ndarray:
    """Area-weighted MSE; leading batch axes of S and H are kept."""
    sv, hv = _gather(S, H, omap)
    err = ((sv - hv) ** 2).mean(axis=-1)
    return np.sum(err * omap.area, axis=-1) / omap.total_area


def transformation_mae(S, H, omap: OverlapMap) -> float | np.ndarray:
    sv, hv = _gather(S, H, omap)
    err = np.abs(sv - hv).mean(axis=-1)
    return np.sum(err * omap.area, axis=-1) / omap.total_area


def transformation_mse_grad(S, H, omap: OverlapMap) -> np.ndarray:
    """Gradient of ``transformation_mse`` with respect to every hex value."""
    sv, hv = _gather(S, H, omap)
    _, h = _arrays(S, H)
    c = h.shape[-1]
    g = omap.geometry
    scale = 2.0 / (omap.total_area * c)
    contrib = (hv - sv) * omap.area[:, None] * scale
    lead = h.shape[:-3]
    flat = contrib.reshape((-1,) + contrib.shape[-2:])
    out = np.zeros((flat.shape[0], g.size, c))
    idx = omap.hex_flat
    for b in range(flat.shape[0]):
        for k in range(c):
            out[b, :, k] = np.bincount(idx, weights=flat[b, :, k], minlength=g.size)
    return out.reshape(lead + (g.rows, g.cols, c))


def psnr(mse: float, max_value: float = 1.0) -> float:
    if mse < 0:
        raise ValueError(f"mse must be non-negative, got {mse}")
    if max_value <= 0:
        raise ValueError(f"max_value must be positive, got {max_value}")
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / mse)


def square_mse(a, b) -> float | np.ndarray:
    """Plain per-image MSE between same-lattice images (channels averaged)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return ((a - b) ** 2).mean(axis=(-3, -2, -1))


def metric_report(S, H, omap: OverlapMap) -> MetricReport:
    mse = float(transformation_mse(S, H, omap))
    return MetricReport(mse, psnr(mse), float(transformation_mae(S, H, omap)), omap.total_area)


def batch_report(mses: np.ndarray, maes: np.ndarray, total_weight: float) -> MetricReport:
    """Aggregate per-image errors: mean MSE/MAE, mean and std of per-image PSNR."""
    mses = np.asarray(mses, dtype=np.float64)
    ps = np.array([psnr(float(m)) for m in mses])
    finite = np.isfinite(ps)
    if finite.all():
        mean_p, std_p = float(ps.mean()), float(ps.std())
    elif not finite.any():
        mean_p, std_p = math.inf, 0.0
    else:
        mean_p, std_p = math.inf, float(ps[finite].std())
    return MetricReport(float(mses.mean()), mean_p, float(np.mean(maes)), float(total_weight),
                        std_p, int(mses.size))
