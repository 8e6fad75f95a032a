"""What-where autoencoders and auxiliary-classifier GANs on square and hex lattices.

* S-SWWAE: square encoder, square decoder.
* H-SWWAE: square encoder, hexagonal decoder.  Max-pool switches recorded
  by the encoder are carried over to the hexagonal unpooling stages by
  nearest-center translation.
* S-ACGAN / H-ACGAN: generator and discriminator entirely on one lattice.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .hexgrid import HexGeometry
from .layers import (BatchNorm, Dense, Embedding, HexConv, HexConvTranspose, Layer, SquareConv,
                     SquareConvTranspose, pool_max, unpool_replicate, unpool_where)
from .metrics import batch_report, square_mse, transformation_mae, transformation_mse
from .optim import Adam, make_rng
from .pooling import (PoolMapping, WhereMask, build_pool_mapping, square_pool_mapping,
                      translate_where, where_translation)
from .resample import OverlapMap, compute_overlap_map, fit_hex_geometry
from .tensor import Tensor, no_grad

SWWAE_SCHEDULE = (3, 16, 32, 64, 96, 128)
DISC_SCHEDULE = (3, 16, 32, 64, 128)
SQUARE_CHAIN_32 = [(32, 32), (16, 16), (8, 8), (4, 4), (2, 2), (1, 1)]
HEX_CHAIN_32 = [(34, 30), (17, 15), (9, 8), (5, 4), (3, 2), (2, 1)]


class ConfigError(ValueError):
    pass


class UntrainedModelError(RuntimeError):
    pass


@dataclass
class ModelConfig:
    family: str = "swwae"                 # swwae | acgan
    lattice: str = "hex"                  # square | hex
    input_shape: tuple[int, int, int] = (32, 32, 3)
    latent_dim: int = 128
    class_count: int = 10
    channel_schedule: tuple[int, ...] = SWWAE_SCHEDULE
    seed: int = 0
    noise_dim: int = 100
    embed_dim: int = 10
    gen_base_channels: int = 512
    gen_stages: int = 3
    residual: bool = False
    dtype: str = "float32"

    def __post_init__(self):
        self.input_shape = tuple(self.input_shape)
        self.channel_schedule = tuple(self.channel_schedule)
        if self.family not in ("swwae", "acgan"):
            raise ConfigError(f"unknown model family {self.family!r}")
        if self.lattice not in ("square", "hex"):
            raise ConfigError(f"unknown lattice {self.lattice!r}")
        if self.channel_schedule[0] != self.input_shape[2]:
            raise ConfigError("channel schedule must start with the input channel count")
        if len(self.channel_schedule) < 2:
            raise ConfigError("channel schedule needs at least one stage")

    @property
    def stages(self) -> int:
        return len(self.channel_schedule) - 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input_shape"] = list(self.input_shape)
        d["channel_schedule"] = list(self.channel_schedule)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def acgan_config(lattice: str = "hex", **kw) -> ModelConfig:
    kw.setdefault("channel_schedule", DISC_SCHEDULE)
    return ModelConfig(family="acgan", lattice=lattice, **kw)


# -- lattice chains ----------------------------------------------------------
def square_chain(h: int, w: int, stages: int) -> list[PoolMapping]:
    maps, shape = [], (h, w)
    for _ in range(stages):
        m = square_pool_mapping(shape, (float(h), float(w)))
        maps.append(m)
        shape = m.out_shape
    return maps


def hex_chain(geom: HexGeometry, stages: int) -> list[PoolMapping]:
    maps = []
    for _ in range(stages):
        m = build_pool_mapping(geom.shape, geom)
        maps.append(m)
        geom = m.out_geometry
    return maps


def _shapes(maps: list[PoolMapping]) -> list[tuple[int, int]]:
    return [maps[0].in_shape] + [m.out_shape for m in maps]


class Model:
    """Ordered collection of named layers."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.dtype = np.dtype(config.dtype)
        self.layers: dict[str, Layer] = {}
        self.steps = 0

    def add(self, name: str, layer: Layer) -> Layer:
        self.layers[name] = layer
        return layer

    def seed_for(self, name: str) -> int:
        return int(make_rng(self.config.seed, name).integers(0, 2 ** 31 - 1))

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        return {f"{prefix}{ln}/{pn}": p for ln, layer in self.layers.items() for pn, p in layer.params.items()}

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.named_parameters().values()))

    def state_tensors(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {k: v.data for k, v in self.named_parameters(prefix).items()}
        for ln, layer in self.layers.items():
            for bn, b in layer.buffers.items():
                out[f"{prefix}{ln}/{bn}"] = b
        return out

    def load_state_tensors(self, tensors: dict[str, np.ndarray], prefix: str = "") -> None:
        for ln, layer in self.layers.items():
            for pn, p in layer.params.items():
                key = f"{prefix}{ln}/{pn}"
                if tensors[key].shape != p.shape:
                    raise ConfigError(f"checkpoint tensor {key} has shape {tensors[key].shape}, expected {p.shape}")
                p.data = tensors[key].astype(self.dtype)
            for bn in layer.buffers:
                layer.buffers[bn] = tensors[f"{prefix}{ln}/{bn}"].astype(self.dtype)


class ConvBlock:
    """conv -> batch norm -> relu, plus an optional residual conv with identity skip."""

    def __init__(self, model: Model, name: str, conv: Layer, out_channels: int, conv_cls, shape,
                 residual: bool):
        self.conv = model.add(f"{name}/conv", conv)
        self.bn = model.add(f"{name}/bn", BatchNorm(out_channels, f"{name}/bn", dtype=model.dtype))
        self.res = None
        if residual:
            self.res = model.add(f"{name}/res_conv", conv_cls(out_channels, out_channels, shape,
                                                              model.seed_for(f"{name}/res_conv"),
                                                              f"{name}/res_conv", dtype=model.dtype))
            self.res_bn = model.add(f"{name}/res_bn", BatchNorm(out_channels, f"{name}/res_bn", dtype=model.dtype))

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        y = T.relu(self.bn(self.conv(x), training))
        if self.res is not None:
            y = y + T.relu(self.res_bn(self.res(y), training))
        return y


# -- SWWAE ---------------------------------------------------------------------
class SWWAE(Model):
    """Square encoder with switch-guided decoder on either lattice."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        h, w, c = config.input_shape
        sched = config.channel_schedule
        k = config.stages
        self.enc_maps = square_chain(h, w, k)
        enc_shapes = _shapes(self.enc_maps)
        if (h, w) == (32, 32) and k == 5 and enc_shapes != SQUARE_CHAIN_32:
            raise ConfigError(f"unexpected encoder chain {enc_shapes}")
        if sched[-1] != config.latent_dim and enc_shapes[-1] == (1, 1):
            raise ConfigError("last stage width must equal the latent dimension")

        self.encoder = []
        for i in range(k):
            shape = enc_shapes[i]
            conv = SquareConv(sched[i], sched[i + 1], shape, self.seed_for(f"encoder/stage{i + 1}/conv"),
                              f"encoder/stage{i + 1}/conv", dtype=self.dtype)
            self.encoder.append(ConvBlock(self, f"encoder/stage{i + 1}", conv, sched[i + 1], SquareConv,
                                          shape, config.residual))

        if config.lattice == "square":
            self.dec_maps = self.enc_maps
            self.geometry = None
            conv_t, conv_cls = SquareConvTranspose, SquareConv
        else:
            self.geometry = fit_hex_geometry(h, w)
            self.dec_maps = hex_chain(self.geometry, k)
            dec_shapes = _shapes(self.dec_maps)
            if (h, w) == (32, 32) and k == 5 and dec_shapes != HEX_CHAIN_32:
                raise ConfigError(f"unexpected decoder chain {dec_shapes}")
            self.translations = [where_translation(s, d) for s, d in zip(self.enc_maps, self.dec_maps)]
            # core -> top of the hexagonal chain by nearest center
            top = self.dec_maps[-1]
            core = self.enc_maps[-1]
            d = ((top.out_centers[:, None, :] - core.out_centers[None, :, :]) ** 2).sum(-1)
            self.lift = np.argmin(d, axis=1)
            conv_t, conv_cls = HexConvTranspose, HexConv

        self.decoder = []
        for i in reversed(range(k)):
            shape = self.dec_maps[i].in_shape
            name = f"decoder/stage{i + 1}"
            conv = conv_t(sched[i + 1], sched[i], shape, self.seed_for(f"{name}/conv"), f"{name}/conv",
                          dtype=self.dtype)
            if i == 0:
                self.decoder.append(self.add(f"{name}/conv", conv))
            else:
                self.decoder.append(ConvBlock(self, name, conv, sched[i], conv_cls, shape, config.residual))

        self.out_shape = self.dec_maps[0].in_shape + (sched[0],)
        if config.lattice == "hex":
            self.overlap: OverlapMap | None = compute_overlap_map(self.geometry, h, w)
        else:
            self.overlap = None

    def encode(self, x: Tensor, training: bool) -> tuple[Tensor, list[WhereMask]]:
        n = x.shape[0]
        h = T.reshape(x, (n, -1, x.shape[-1]))
        masks = []
        for block, m in zip(self.encoder, self.enc_maps):
            h = block(h, training)
            h, where = pool_max(h, m)
            masks.append(where)
        return h, masks

    def decode(self, core: Tensor, masks: list[WhereMask], training: bool) -> Tensor:
        h = core
        if self.config.lattice == "hex":
            h = T.take(h, self.lift, axis=1)
            masks = [translate_where(mk, dm, tr) for mk, dm, tr in zip(masks, self.dec_maps, self.translations)]
        for block, where in zip(self.decoder, reversed(masks)):
            h = unpool_where(h, where)
            h = block(h, training) if isinstance(block, ConvBlock) else block(h)
        return T.sigmoid(h)

    def __call__(self, x, training: bool = False) -> Tensor:
        """Reconstruction, (N, rows, cols, channels) on the decoder lattice."""
        x = T.as_tensor(np.asarray(x, dtype=self.dtype)) if not isinstance(x, Tensor) else x
        core, masks = self.encode(x, training)
        out = self.decode(core, masks, training)
        return T.reshape(out, (x.shape[0],) + self.out_shape)

    def loss(self, recon: Tensor, target: np.ndarray) -> Tensor:
        """Area-weighted MSE against the square target, averaged over the batch."""
        target = np.asarray(target, dtype=self.dtype)
        n, c = target.shape[0], target.shape[-1]
        if self.overlap is None:
            return T.mse(recon, target)
        om = self.overlap
        flat = T.reshape(recon, (n, -1, c))
        values = T.take(flat, om.hex_flat, axis=1)
        targets = target.reshape(n, -1, c)[:, om.sq_flat, :]
        weights = (om.area / (om.total_area * c * n))[:, None].astype(self.dtype)
        return T.weighted_sse(values, targets, weights)

    def reconstruct(self, images: np.ndarray, batch_size: int = 100) -> np.ndarray:
        outs = []
        with no_grad():
            for s in range(0, len(images), batch_size):
                outs.append(self(images[s:s + batch_size], training=False).data)
        return np.concatenate(outs, axis=0)

    def per_image_errors(self, images: np.ndarray, recon: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.overlap is None:
            return square_mse(images, recon), np.abs(images.astype(np.float64) - recon).mean(axis=(1, 2, 3))
        return transformation_mse(images, recon, self.overlap), transformation_mae(images, recon, self.overlap)


def build_swwae(config: ModelConfig) -> SWWAE:
    if config.family != "swwae":
        raise ConfigError("build_swwae needs a swwae config")
    return SWWAE(config)


# -- ACGAN ---------------------------------------------------------------------
class Generator(Model):
    """(noise, class) -> image in tanh range on the configured lattice."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        h, w, c = config.input_shape
        k = config.gen_stages
        if config.lattice == "square":
            maps = square_chain(h, w, k)
            conv_t, conv = SquareConvTranspose, SquareConv
        else:
            maps = hex_chain(fit_hex_geometry(h, w), k)
            conv_t, conv = HexConvTranspose, HexConv
        self.maps = maps
        self.seed_shape = maps[-1].out_shape
        self.out_shape = maps[0].in_shape + (c,)
        c0 = config.gen_base_channels
        seed_cells = self.seed_shape[0] * self.seed_shape[1]
        self.dense_units = seed_cells * c0
        self.embed = self.add("generator/embedding", Embedding(config.class_count, config.embed_dim,
                                                                self.seed_for("generator/embedding"),
                                                                "generator/embedding", self.dtype))
        self.dense = self.add("generator/dense", Dense(config.noise_dim + config.embed_dim, self.dense_units,
                                                       self.seed_for("generator/dense"), "generator/dense",
                                                       self.dtype))
        self.dense_bn = self.add("generator/dense_bn", BatchNorm(c0, "generator/dense_bn", dtype=self.dtype))
        self.blocks = []
        ch = c0
        for i in reversed(range(k)):
            name = f"generator/stage{k - i}"
            shape = maps[i].in_shape
            ct = conv_t(ch, ch // 2, shape, self.seed_for(f"{name}/conv"), f"{name}/conv", dtype=self.dtype)
            self.blocks.append((maps[i], ConvBlock(self, name, ct, ch // 2, conv, shape, False)))
            ch //= 2
        self.final = self.add("generator/output", conv(ch, c, maps[0].in_shape, self.seed_for("generator/output"),
                                                       "generator/output", dtype=self.dtype))
        self.base_channels = c0

    def __call__(self, noise, labels, training: bool = False) -> Tensor:
        z = T.as_tensor(np.asarray(noise, dtype=self.dtype))
        n = z.shape[0]
        h = T.concat([z, self.embed(labels)], axis=1)
        h = T.reshape(self.dense(h), (n, -1, self.base_channels))
        h = T.relu(self.dense_bn(h, training))
        for m, block in self.blocks:
            h = block(unpool_replicate(h, m), training)
        out = T.tanh(self.final(h))
        return T.reshape(out, (n,) + self.out_shape)


class Discriminator(Model):
    """image -> (real/fake logit, class logits)."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        h, w, c = config.input_shape
        sched = config.channel_schedule
        k = config.stages
        if config.lattice == "square":
            self.maps = square_chain(h, w, k)
            conv = SquareConv
        else:
            self.maps = hex_chain(fit_hex_geometry(h, w), k)
            conv = HexConv
        self.in_shape = self.maps[0].in_shape + (c,)
        self.convs = []
        for i in range(k):
            name = f"discriminator/stage{i + 1}/conv"
            self.convs.append(self.add(name, conv(sched[i], sched[i + 1], self.maps[i].in_shape,
                                                  self.seed_for(name), name, dtype=self.dtype)))
        last = self.maps[-1].n_out * sched[-1]
        self.rf_head = self.add("discriminator/real_fake", Dense(last, 1, self.seed_for("discriminator/real_fake"),
                                                                 "discriminator/real_fake", self.dtype))
        self.cls_head = self.add("discriminator/class", Dense(last, config.class_count,
                                                              self.seed_for("discriminator/class"),
                                                              "discriminator/class", self.dtype))

    def __call__(self, x) -> tuple[Tensor, Tensor]:
        x = x if isinstance(x, Tensor) else T.as_tensor(np.asarray(x, dtype=self.dtype))
        n = x.shape[0]
        h = T.reshape(x, (n, -1, x.shape[-1]))
        for conv, m in zip(self.convs, self.maps):
            h = T.leaky_relu(conv(h), 0.2)
            h, _ = pool_max(h, m)
        flat = T.reshape(h, (n, -1))
        return T.reshape(self.rf_head(flat), (n,)), self.cls_head(flat)


def build_acgan(config: ModelConfig) -> tuple[Generator, Discriminator]:
    if config.family != "acgan":
        raise ConfigError("build_acgan needs an acgan config")
    return Generator(config), Discriminator(config)


def class_probabilities(logits: Tensor) -> np.ndarray:
    return T.softmax(logits, axis=1).data


# -- training --------------------------------------------------------------------
@dataclass
class TrainReport:
    family: str
    lattice: str
    epoch_losses: list[dict] = field(default_factory=list)
    step_losses: list[float] = field(default_factory=list)
    final: object = None
    parameter_counts: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    extra: dict = field(default_factory=dict)


def _batches(n: int, batch_size: int, seed: int, epoch: int):
    order = make_rng(seed, f"shuffle/{epoch}").permutation(n)
    for s in range(0, n, batch_size):
        yield order[s:s + batch_size]


def train_swwae(model: SWWAE, images: np.ndarray, epochs: int, batch_size: int = 100, lr: float = 2e-4,
                beta1: float = 0.5, beta2: float = 0.999, optimizer: Adam | None = None,
                start_epoch: int = 0, on_epoch=None) -> TrainReport:
    """Minimize the area-weighted reconstruction error with Adam."""
    images = np.asarray(images, dtype=model.dtype)
    if len(images) == 0:
        raise ValueError("empty dataset")
    opt = optimizer or Adam(model.named_parameters(), lr, beta1, beta2)
    report = TrainReport("swwae", model.config.lattice,
                         parameter_counts={"model": model.parameter_count()})
    t0 = time.perf_counter()
    for epoch in range(start_epoch, start_epoch + epochs):
        losses, sizes = [], []
        for idx in _batches(len(images), batch_size, model.config.seed, epoch):
            batch = images[idx]
            opt.zero_grad()
            loss = model.loss(model(batch, training=True), batch)
            loss.backward()
            opt.step()
            model.steps += 1
            losses.append(float(loss.data))
            sizes.append(len(idx))
        report.step_losses.extend(losses)
        entry = {"epoch": epoch + 1, "loss": float(np.average(losses, weights=sizes)), "steps": model.steps}
        report.epoch_losses.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
    report.wall_clock = time.perf_counter() - t0
    report.extra["optimizer"] = opt
    return report


def _to_tanh(x: np.ndarray) -> np.ndarray:
    return x * 2.0 - 1.0


def _from_tanh(x: np.ndarray) -> np.ndarray:
    return np.clip((x + 1.0) * 0.5, 0.0, 1.0)


class ACGANTrainer:
    """Alternating discriminator / generator updates with Adam on both."""

    def __init__(self, gen: Generator, disc: Discriminator, lr: float = 2e-4, beta1: float = 0.5,
                 beta2: float = 0.999):
        self.gen, self.disc = gen, disc
        self.g_opt = Adam(gen.named_parameters(), lr, beta1, beta2)
        self.d_opt = Adam(disc.named_parameters(), lr, beta1, beta2)
        self.class_count = gen.config.class_count
        self.noise_dim = gen.config.noise_dim

    def sample_inputs(self, n: int, rng: np.random.Generator):
        z = rng.standard_normal((n, self.noise_dim))
        c = rng.integers(0, self.class_count, n)
        return z, c

    def step(self, real: np.ndarray, labels: np.ndarray, rng: np.random.Generator) -> dict:
        n = len(real)
        if labels.min() < 0 or labels.max() >= self.class_count:
            raise ValueError("class label outside [0, class_count)")
        z, c = self.sample_inputs(n, rng)
        # the discriminator sees the same batch-statistics output the generator step trains against
        with no_grad():
            fake = self.gen(z, c, training=True).data
        self.d_opt.zero_grad()
        rf_r, cls_r = self.disc(real)
        rf_f, cls_f = self.disc(fake)
        d_loss = (T.bce_with_logits(rf_r, np.ones(n)) + T.softmax_cross_entropy(cls_r, labels)
                  + T.bce_with_logits(rf_f, np.zeros(n)) + T.softmax_cross_entropy(cls_f, c))
        d_loss.backward()
        self.d_opt.step()

        z, c = self.sample_inputs(n, rng)
        self.g_opt.zero_grad()
        self.d_opt.zero_grad()
        rf, cls = self.disc(self.gen(z, c, training=True))
        g_loss = T.bce_with_logits(rf, np.ones(n)) + T.softmax_cross_entropy(cls, c)
        g_loss.backward()
        self.g_opt.step()
        self.d_opt.zero_grad()
        self.gen.steps += 1
        self.disc.steps += 1
        return {"d_loss": float(d_loss.data), "g_loss": float(g_loss.data)}

    def real_fake_accuracy(self, real: np.ndarray, seed: int) -> float:
        """Share of a real batch and an equal fake batch the discriminator labels correctly."""
        rng = make_rng(seed, "heldout-fakes")
        z, c = self.sample_inputs(len(real), rng)
        with no_grad():
            fake = self.gen(z, c, training=False).data
            rf_r, _ = self.disc(real)
            rf_f, _ = self.disc(fake)
        correct = np.sum(rf_r.data > 0) + np.sum(rf_f.data < 0)
        return float(correct) / (2 * len(real))


def acgan_inputs(gen: Generator, images: np.ndarray) -> np.ndarray:
    """Real images as the discriminator sees them: on its lattice, in tanh range."""
    images = np.asarray(images, dtype=np.float64)
    if gen.config.lattice == "hex":
        from .resample import _area_to_hex
        h, w = images.shape[1:3]
        omap = compute_overlap_map(fit_hex_geometry(h, w), h, w)
        images = np.stack([_area_to_hex(im, omap) for im in images])
    return _to_tanh(images).astype(gen.dtype)


def train_acgan(gen: Generator, disc: Discriminator, images: np.ndarray, labels: np.ndarray, epochs: int,
                batch_size: int = 100, lr: float = 2e-4, beta1: float = 0.5, beta2: float = 0.999,
                trainer: ACGANTrainer | None = None, start_epoch: int = 0, on_epoch=None) -> TrainReport:
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) == 0:
        raise ValueError("empty dataset")
    if labels.min() < 0 or labels.max() >= gen.config.class_count:
        raise ValueError("class label outside [0, class_count)")
    trainer = trainer or ACGANTrainer(gen, disc, lr, beta1, beta2)
    real_all = acgan_inputs(gen, images)
    report = TrainReport("acgan", gen.config.lattice,
                         parameter_counts={"generator": gen.parameter_count(),
                                           "discriminator": disc.parameter_count()})
    t0 = time.perf_counter()
    for epoch in range(start_epoch, start_epoch + epochs):
        rng = make_rng(gen.config.seed, f"acgan-noise/{epoch}")
        d_losses, g_losses = [], []
        for idx in _batches(len(images), batch_size, gen.config.seed, epoch):
            out = trainer.step(real_all[idx], labels[idx], rng)
            d_losses.append(out["d_loss"])
            g_losses.append(out["g_loss"])
            report.step_losses.append(out["d_loss"])
        entry = {"epoch": epoch + 1, "d_loss": float(np.mean(d_losses)), "g_loss": float(np.mean(g_losses)),
                 "steps": gen.steps}
        report.epoch_losses.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
    report.wall_clock = time.perf_counter() - t0
    report.extra["trainer"] = trainer
    return report


def generate(gen: Generator, labels, seed: int) -> np.ndarray:
    """Images in [0, 1] for the given class labels, reproducible from ``seed``."""
    labels = np.asarray(labels, dtype=np.int64)
    z = make_rng(seed, "generate").standard_normal((len(labels), gen.config.noise_dim))
    with no_grad():
        return _from_tanh(gen(z, labels, training=False).data.astype(np.float64))


def class_paired_references(images: np.ndarray, labels: np.ndarray, per_class: int,
                            class_count: int) -> tuple[np.ndarray, np.ndarray]:
    """i-th image of every class in dataset order; returns (images, labels) class-major."""
    labels = np.asarray(labels)
    refs, labs = [], []
    for k in range(class_count):
        idx = np.flatnonzero(labels == k)[:per_class]
        if len(idx) < per_class:
            raise ValueError(f"class {k} has only {len(idx)} images, need {per_class}")
        refs.append(images[idx])
        labs.extend([k] * per_class)
    return np.concatenate(refs), np.asarray(labs)


def evaluate_generation(model, images: np.ndarray, labels: np.ndarray | None = None, batch: int = 100,
                        seed: int = 0):
    """PSNR of one batch against the original square images.

    SWWAE: reconstructions of the first ``batch`` images.  ACGAN (a
    ``Generator``): ``batch // class_count`` samples per class, sample i of
    class k compared with the i-th image of class k.
    """
    if getattr(model, "steps", 0) == 0:
        raise UntrainedModelError("model has not been trained")
    images = np.asarray(images, dtype=np.float64)
    if isinstance(model, Generator):
        per_class = max(1, batch // model.config.class_count)
        refs, labs = class_paired_references(images, labels, per_class, model.config.class_count)
        fake = generate(model, labs, seed)
        h, w = refs.shape[1:3]
        if model.config.lattice == "hex":
            omap = compute_overlap_map(fit_hex_geometry(h, w), h, w)
            mses, maes = transformation_mse(refs, fake, omap), transformation_mae(refs, fake, omap)
            total = omap.total_area
        else:
            mses, maes = square_mse(refs, fake), np.abs(refs - fake).mean(axis=(1, 2, 3))
            total = float(h * w)
        return batch_report(mses, maes, total)
    sel = images[:batch]
    recon = model.reconstruct(sel.astype(model.dtype) if hasattr(model, "dtype") else sel).astype(np.float64)
    mses, maes = model.per_image_errors(sel, recon)
    overlap = getattr(model, "overlap", None)
    total = overlap.total_area if overlap is not None else float(sel.shape[1] * sel.shape[2])
    return batch_report(mses, maes, total)


# -- checkpoints -----------------------------------------------------------------
def _parts(models) -> dict[str, Model]:
    if isinstance(models, SWWAE):
        return {"model": models}
    gen, disc = models
    return {"generator": gen, "discriminator": disc}


def checkpoint_tensors(models, optimizers: dict[str, Adam], epoch: int) -> dict[str, np.ndarray]:
    """Parameters, batch-norm buffers, optimizer moments and the epoch counter."""
    out: dict[str, np.ndarray] = {}
    parts = _parts(models)
    for name, m in parts.items():
        out.update(m.state_tensors(f"{name}:"))
        out[f"{name}:steps"] = np.array([m.steps], dtype=np.float32)
    for name, opt in optimizers.items():
        out.update(opt.state_tensors(f"adam:{name}"))
    out["epoch"] = np.array([epoch], dtype=np.float32)
    return out


def restore_checkpoint(models, optimizers: dict[str, Adam], tensors: dict[str, np.ndarray]) -> int:
    """Load what ``checkpoint_tensors`` wrote; returns the stored epoch count."""
    for name, m in _parts(models).items():
        m.load_state_tensors(tensors, f"{name}:")
        m.steps = int(tensors[f"{name}:steps"][0])
    for name, opt in optimizers.items():
        opt.load_state_tensors(f"adam:{name}", tensors)
    return int(tensors["epoch"][0])


def build_models(config: ModelConfig):
    return build_swwae(config) if config.family == "swwae" else build_acgan(config)


def parameter_counts(models) -> dict[str, int]:
    return {name: m.parameter_count() for name, m in _parts(models).items()}
