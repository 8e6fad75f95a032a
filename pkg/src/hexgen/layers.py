"""Neural-network layers on hexagonal and square lattices.

Spatial activations are (batch, cells, channels) with cells flattened
row-major, whatever the lattice.  A convolution is a gather over a
per-cell tap table (7 taps on the hexagonal lattice, in spiral digit order;
9 taps for square 3x3) followed by a per-tap matrix product.  Pooling and
unpooling go through a ``PoolMapping``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import tensor as T
from .hexgrid import neighbor_table, opposite_tap
from .optim import glorot_init
from .pooling import PoolMapping, WhereMask
from .tensor import ShapeError, Tensor

SQUARE_TAPS = tuple((dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1))


@lru_cache(maxsize=64)
def square_table(h: int, w: int) -> np.ndarray:
    """(h*w, 9) flat indices of the 3x3 neighborhood, sentinel ``h*w`` outside."""
    size = h * w
    r = np.repeat(np.arange(h), w)
    c = np.tile(np.arange(w), h)
    table = np.full((size, 9), size, dtype=np.int64)
    for t, (dr, dc) in enumerate(SQUARE_TAPS):
        rr, cc = r + dr, c + dc
        ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        table[ok, t] = rr[ok] * w + cc[ok]
    table.setflags(write=False)
    return table


HEX_OPPOSITE = tuple(opposite_tap(t) for t in range(7))
SQUARE_OPPOSITE = tuple(8 - t for t in range(9))


# -- primitives ----------------------------------------------------------------
def gather_conv(x: Tensor, kernel: Tensor, bias: Tensor | None, table: np.ndarray) -> Tensor:
    """y[n, p] = sum_t kernel[:, :, t] @ x[n, table[p, t]] + bias (zero outside the grid).

    ``x`` is (N, P, Cin), ``kernel`` (Cout, Cin, taps).
    """
    n, p, cin = x.shape
    cout, kin, taps = kernel.shape
    if kin != cin:
        raise ShapeError(f"kernel expects {kin} input channels, got {cin}")
    if table.shape != (p, taps):
        raise ShapeError(f"tap table {table.shape} does not fit {p} cells x {taps} taps")
    xp = np.concatenate([x.data, np.zeros((n, 1, cin), dtype=x.dtype)], axis=1)
    w = kernel.data
    # per-tap slabs must be contiguous, otherwise matmul bypasses BLAS
    w_fwd = np.ascontiguousarray(w.transpose(2, 1, 0))     # (taps, cin, cout)
    xflat = xp.reshape(n * (p + 1), cin)
    base = (np.arange(n) * (p + 1))[:, None]
    rows = [(base + table[None, :, t]).ravel() for t in range(taps)]
    acc = np.zeros((n * p, cout), dtype=x.dtype)
    for t in range(taps):
        acc += np.take(xflat, rows[t], axis=0) @ w_fwd[t]
    if bias is not None:
        acc += bias.data
    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def backward(g):
        g2 = g.reshape(n * p, cout)
        gx = np.zeros_like(xflat) if x.requires_grad else None
        gw = np.zeros((taps, cout, cin), dtype=w.dtype) if kernel.requires_grad else None
        w_bwd = np.ascontiguousarray(w.transpose(2, 0, 1))     # (taps, cout, cin)
        g2t = np.ascontiguousarray(g2.T)
        for t in range(taps):
            if gw is not None:
                gw[t] = g2t @ np.take(xflat, rows[t], axis=0)
            if gx is not None:
                # non-sentinel indices in one tap column are distinct
                gx[rows[t]] += g2 @ w_bwd[t]
        if gw is not None:
            gw = np.ascontiguousarray(gw.transpose(1, 2, 0))
        grads = [None if gx is None else gx.reshape(n, p + 1, cin)[:, :p, :], gw]
        if bias is not None:
            grads.append(g2.sum(axis=0, dtype=np.float64).astype(bias.dtype))
        return tuple(grads)

    return Tensor.from_op(acc.reshape(n, p, cout), parents, backward)


def transpose_kernel(kernel: Tensor, opposite) -> Tensor:
    """Kernel of the adjoint convolution: swap channel roles and mirror the taps."""
    return T.take(T.transpose(kernel, (1, 0, 2)), list(opposite), axis=2)


def pool_max(x: Tensor, mapping: PoolMapping) -> tuple[Tensor, WhereMask]:
    n, p, c = x.shape
    if p != mapping.n_in:
        raise ShapeError(f"input has {p} cells, mapping expects {mapping.n_in}")
    pad = mapping.padded
    xp = np.concatenate([x.data, np.full((n, 1, c), -np.inf, dtype=x.dtype)], axis=1)
    vals = xp[:, pad, :]                                   # (N, O, G, C)
    arg = np.argmax(vals, axis=2)                          # (N, O, C)
    where = pad[np.arange(mapping.n_out)[None, :, None], arg]
    out = np.take_along_axis(x.data, where, axis=1)

    def backward(g):
        gx = np.zeros_like(x.data)
        np.put_along_axis(gx, where, g, axis=1)
        return (gx,)

    return Tensor.from_op(out, (x,), backward), WhereMask(mapping, where)


def pool_avg(x: Tensor, mapping: PoolMapping) -> Tensor:
    n, p, c = x.shape
    if p != mapping.n_in:
        raise ShapeError(f"input has {p} cells, mapping expects {mapping.n_in}")
    order, starts, sizes = _segments(mapping)
    sums = np.add.reduceat(x.data[:, order, :], starts, axis=1, dtype=np.float64)
    out = (sums / sizes[None, :, None]).astype(x.dtype)
    owner = mapping.owner

    def backward(g):
        return ((g / sizes[None, :, None])[:, owner, :].astype(x.dtype),)

    return Tensor.from_op(out, (x,), backward)


def unpool_where(x: Tensor, where: WhereMask) -> Tensor:
    """Scatter every pooled value back to its argmax cell; zeros elsewhere."""
    m = where.mapping
    n, o, c = x.shape
    if o != m.n_out or where.index.shape != (n, o, c):
        raise ShapeError(f"input {x.shape} does not fit mask {where.index.shape}")
    where.validate()
    idx = where.index
    out = np.zeros((n, m.n_in, c), dtype=x.dtype)
    np.put_along_axis(out, idx, x.data, axis=1)
    return Tensor.from_op(out, (x,), lambda g: (np.take_along_axis(g, idx, axis=1),))


def unpool_replicate(x: Tensor, mapping: PoolMapping) -> Tensor:
    """Copy every pooled value onto all cells of its group."""
    n, o, c = x.shape
    if o != mapping.n_out:
        raise ShapeError(f"input has {o} cells, mapping expects {mapping.n_out}")
    owner = mapping.owner
    order, starts, _ = _segments(mapping)

    def backward(g):
        return (np.add.reduceat(g[:, order, :], starts, axis=1, dtype=np.float64).astype(x.dtype),)

    return Tensor.from_op(x.data[:, owner, :], (x,), backward)


def _segments(m: PoolMapping):
    order = np.concatenate(m.groups)
    sizes = m.group_sizes
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    return order, starts, sizes


def batch_norm_train(x: Tensor, gamma: Tensor, beta: Tensor, eps: float):
    """Normalize over every axis but the last with batch statistics.

    Returns the output and the (mean, var) batch statistics.
    """
    axes = tuple(range(x.ndim - 1))
    xd = x.data.astype(np.float64)
    mean = xd.mean(axis=axes)
    var = xd.var(axis=axes)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mean) * inv
    out = (xhat * gamma.data + beta.data).astype(x.dtype)
    m = xd.size // xd.shape[-1]

    def backward(g):
        g64 = g.astype(np.float64)
        dbeta = g64.sum(axis=axes)
        dgamma = (g64 * xhat).sum(axis=axes)
        dxhat = g64 * gamma.data
        dx = inv / m * (m * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes))
        return dx.astype(x.dtype), dgamma.astype(gamma.dtype), dbeta.astype(beta.dtype)

    return Tensor.from_op(out, (x, gamma, beta), backward), mean, var


# -- layers ----------------------------------------------------------------------
class Layer:
    """Container of named trainable tensors and non-trainable buffers."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))


class _GatherConvBase(Layer):
    taps: int
    opposite: tuple[int, ...]
    transposed = False

    def __init__(self, in_channels: int, out_channels: int, table: np.ndarray, seed: int,
                 name: str, dtype=np.float32, use_bias: bool = True):
        super().__init__()
        self.in_channels, self.out_channels = in_channels, out_channels
        self.table = table
        # a transposed layer keeps the kernel of the convolution it is the adjoint of
        shape = (in_channels, out_channels, self.taps) if self.transposed else (out_channels, in_channels, self.taps)
        self.params["kernel"] = glorot_init(in_channels * self.taps, out_channels * self.taps,
                                            shape, seed, f"{name}/kernel", dtype)
        if use_bias:
            self.params["bias"] = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True,
                                         name=f"{name}/bias")

    def __call__(self, x: Tensor) -> Tensor:
        k = self.params["kernel"]
        if self.transposed:
            k = transpose_kernel(k, self.opposite)
        return gather_conv(x, k, self.params.get("bias"), self.table)


class HexConv(_GatherConvBase):
    """7-tap hexagonal convolution, unit stride, zero padding."""
    taps = 7
    opposite = HEX_OPPOSITE

    def __init__(self, in_channels, out_channels, shape, seed, name="hexconv", **kw):
        super().__init__(in_channels, out_channels, neighbor_table(*shape, 1), seed, name, **kw)


class HexConvTranspose(HexConv):
    """Adjoint of ``HexConv`` (mirrored taps, swapped channel roles)."""
    transposed = True


class SquareConv(_GatherConvBase):
    """3x3 square convolution, unit stride, zero padding."""
    taps = 9
    opposite = SQUARE_OPPOSITE

    def __init__(self, in_channels, out_channels, shape, seed, name="conv", **kw):
        super().__init__(in_channels, out_channels, square_table(*shape), seed, name, **kw)


class SquareConvTranspose(SquareConv):
    transposed = True


class Dense(Layer):
    def __init__(self, in_features: int, out_features: int, seed: int, name: str = "dense", dtype=np.float32):
        super().__init__()
        self.params["kernel"] = glorot_init(in_features, out_features, (in_features, out_features),
                                            seed, f"{name}/kernel", dtype)
        self.params["bias"] = Tensor(np.zeros(out_features, dtype=dtype), requires_grad=True,
                                     name=f"{name}/bias")

    def __call__(self, x: Tensor) -> Tensor:
        return T.matmul(x, self.params["kernel"]) + self.params["bias"]


class Embedding(Layer):
    def __init__(self, count: int, dim: int, seed: int, name: str = "embedding", dtype=np.float32):
        super().__init__()
        self.params["table"] = glorot_init(count, dim, (count, dim), seed, f"{name}/table", dtype)

    def __call__(self, labels) -> Tensor:
        return T.take(self.params["table"], np.asarray(labels, dtype=np.int64), axis=0)


class BatchNorm(Layer):
    """Per-channel batch normalization (momentum 0.99, eps 1e-3)."""

    def __init__(self, channels: int, name: str = "bn", momentum: float = 0.99, eps: float = 1e-3,
                 dtype=np.float32):
        super().__init__()
        self.momentum, self.eps = momentum, eps
        self.params["gamma"] = Tensor(np.ones(channels, dtype=dtype), requires_grad=True, name=f"{name}/gamma")
        self.params["beta"] = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True, name=f"{name}/beta")
        self.buffers["moving_mean"] = np.zeros(channels, dtype=dtype)
        self.buffers["moving_variance"] = np.ones(channels, dtype=dtype)

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        gamma, beta = self.params["gamma"], self.params["beta"]
        if training:
            y, mean, var = batch_norm_train(x, gamma, beta, self.eps)
            mom = self.momentum
            self.buffers["moving_mean"] = (mom * self.buffers["moving_mean"] + (1 - mom) * mean).astype(x.dtype)
            self.buffers["moving_variance"] = (mom * self.buffers["moving_variance"] + (1 - mom) * var).astype(x.dtype)
            return y
        scale = gamma * (1.0 / np.sqrt(self.buffers["moving_variance"].astype(np.float64) + self.eps)).astype(x.dtype)
        return x * scale + (beta - scale * self.buffers["moving_mean"])
