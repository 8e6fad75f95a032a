"""Acceptance criteria, one PASS/FAIL line each (see the summary at the end of the run)."""
import filecmp
import itertools
import json
import math
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE, ROOT, fd_check, leaf
from scipy.stats import qmc

from hexgen import dataio
from hexgen import tensor as T
from hexgen.checkpoint import decode_checkpoint, encode_checkpoint
from hexgen.cli import load_trained, main
from hexgen.layers import (BatchNorm, HexConv, HexConvTranspose, SquareConv, batch_norm_train, pool_avg,
                           pool_max, unpool_replicate, unpool_where)
from hexgen.metrics import transformation_mse
from hexgen.models import ModelConfig, acgan_config, build_acgan, build_swwae, evaluate_generation
from hexgen.pooling import build_pool_mapping
from hexgen.resample import HexImage, compute_overlap_map, fit_hex_geometry
from hexgen.tensor import Tensor


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def test_c1_geometry_shape():
    t0 = time.perf_counter()
    g = fit_hex_geometry(32, 32)
    dt = time.perf_counter() - t0
    report(1, g.shape == (34, 30) and dt < 1, f"fit_hex_geometry(32, 32) -> {g.rows}x{g.cols} in {dt:.3f}s")


def _naive_mse(S, H, om):
    num = den = 0.0
    for (si, sj), (hi, hj), a in om.entries:
        err = sum((S[si, sj, c] - H[hi, hj, c]) ** 2 for c in range(S.shape[-1])) / S.shape[-1]
        num += a * err
        den += a
    return num / den


def test_c2_eq1_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    g = fit_hex_geometry(8, 8)
    om = compute_overlap_map(g, 8, 8)
    worst = 0.0
    for _ in range(50):
        S = rng.random((8, 8, 3))
        H = rng.random(g.shape + (3,))
        fast, slow = transformation_mse(S, H, om), _naive_mse(S, H, om)
        worst = max(worst, abs(fast - slow) / slow)
    big = compute_overlap_map(fit_hex_geometry(32, 32), 32, 32)
    gb = big.geometry
    x0, y0, x1, y1 = gb.bounding_box()
    inner = big.pixel_coverage()[math.ceil(y0 + gb.circumradius):int(y1 - gb.circumradius), 2:-2]
    pou = float(np.abs(inner - 1.0).max())
    x, y = gb.centers()
    r = gb.circumradius
    inside = (x - r >= 0) & (x + r <= 32) & (y - r >= 0) & (y + r <= 32)
    hex_pou = float(np.abs(big.hex_coverage()[inside] - gb.cell_area).max())
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and pou <= 1e-9 and hex_pou <= 1e-9 and dt < 10
    report(2, ok, f"max rel diff {worst:.2e}, pixel partition err {pou:.2e}, hex partition err {hex_pou:.2e}, "
                  f"{dt:.1f}s")


def test_c3_overlap_monte_carlo():
    t0 = time.perf_counter()
    g = fit_hex_geometry(4, 4)
    om = compute_overlap_map(g, 4, 4)
    cx, cy = (a.ravel() for a in g.centers())
    r = g.circumradius
    pts = qmc.Sobol(2, scramble=True, seed=3).random_base2(20)    # 1 048 576 samples per pixel
    est = {}
    for i, j in itertools.product(range(4), range(4)):
        px, py = j + pts[:, 0], i + pts[:, 1]
        k = np.argmin((px[:, None] - cx) ** 2 + (py[:, None] - cy) ** 2, axis=1)
        ax, ay = np.abs(px - cx[k]), np.abs(py - cy[k])
        inside = (ax <= r * math.sqrt(3) / 2) & (ay <= r - ax / math.sqrt(3))
        counts = np.bincount(k[inside], minlength=g.size) / len(px)
        for h in np.flatnonzero(counts):
            est[(i, j, int(h))] = counts[h]
    got = {(int(s[0]), int(s[1]), int(h[0] * g.cols + h[1])): a for s, h, a in zip(om.sq_index, om.hex_index,
                                                                                 om.area)}
    err = max(abs(est.get(k, 0.0) - got.get(k, 0.0)) for k in set(est) | set(got))
    dt = time.perf_counter() - t0
    report(3, err < 1e-3 and dt < 30, f"max |clip - MC| {err:.2e} over {len(got)} entries, {dt:.1f}s")


def test_c4_gradient_suite():
    t0 = time.perf_counter()
    W = np.random.default_rng(0).standard_normal((5, 3))
    prim = {
        "relu": lambda x: T.relu(x + 0.05), "leaky_relu": lambda x: T.leaky_relu(x + 0.05, 0.2),
        "sigmoid": T.sigmoid, "tanh": T.tanh, "exp": T.exp, "log": lambda x: T.log(x + 2.0),
        "softmax": lambda x: T.softmax(x, 1), "log_softmax": lambda x: T.log_softmax(x, 1),
        "matmul": lambda x: T.matmul(x, W), "mul": lambda x: x * x, "div": lambda x: x / (x * x + 1),
        "reduce_mean": lambda x: T.reduce_mean(x, 0), "take": lambda x: T.take(x, [0, 2, 2], 1),
        "concat": lambda x: T.concat([x, x * 2.0], 1), "weighted_sse": lambda x: T.weighted_sse(x, 0.3, 0.5),
        "bce": lambda x: T.bce_with_logits(x[:, 0], np.array([0.0, 1.0, 1.0, 0.0])),
        "softmax_ce": lambda x: T.softmax_cross_entropy(x, [0, 1, 2, 3]),
    }
    worst_prim = max(fd_check(f, [leaf((4, 5), seed=1)]) for f in prim.values())

    shape, p = (5, 4), 20
    hc = HexConv(2, 3, shape, 1, dtype=np.float64)
    ht = HexConvTranspose(3, 2, shape, 2, dtype=np.float64)
    m = build_pool_mapping(shape)
    x = leaf((2, p, 2), seed=3)
    _, where = pool_max(Tensor(x.data), m)
    y = leaf((2, m.n_out, 2), seed=4)
    g_, b_ = leaf((2,), 5, 0.5, 1.5), leaf((2,), 6)
    layer_checks = [
        fd_check(lambda v, k, b: hc(v), [x, hc.params["kernel"], hc.params["bias"]]),
        fd_check(lambda v, k: ht(v), [leaf((2, p, 3), seed=7), ht.params["kernel"]]),
        fd_check(lambda v: pool_max(v, m)[0], [x]),
        fd_check(lambda v: pool_avg(v, m), [x]),
        fd_check(lambda v: unpool_where(v, where), [y]),
        fd_check(lambda v: unpool_replicate(v, m), [y]),
        fd_check(lambda v, g2, b2: batch_norm_train(v, g2, b2, 1e-3)[0], [x, g_, b_]),
    ]
    worst_layer = max(layer_checks)

    cfg = ModelConfig("swwae", "hex", (8, 8, 3), latent_dim=6, channel_schedule=(3, 4, 6), dtype="float64")
    model = build_swwae(cfg)
    imgs = np.random.default_rng(8).random((2, 8, 8, 3))
    params = list(model.named_parameters().values())
    e2e = fd_check(lambda *ps: model.loss(model(imgs, training=True), imgs), params, eps=1e-5)
    dt = time.perf_counter() - t0
    ok = worst_prim <= 1e-4 and worst_layer <= 1e-4 and e2e <= 1e-3 and dt < 120
    report(4, ok, f"primitives {worst_prim:.1e} ({len(prim)}), hex layers {worst_layer:.1e}, "
                  f"2-stage H-SWWAE {e2e:.1e}, {dt:.1f}s")


def test_c5_assignment_optimality():
    t0 = time.perf_counter()
    grids = [(r, c) for r in range(1, 7) for c in range(1, 7) if ((r + 1) // 2) * ((c + 1) // 2) <= 9]
    worst = 0.0
    for shape in grids:
        mp = build_pool_mapping(shape)
        cen = np.array([mp.in_centers[g].mean(axis=0) for g in mp.groups])
        cost = ((cen[:, None] - mp.out_centers[None]) ** 2).sum(-1)
        n = len(cost)
        best = min(sum(cost[i, q[i]] for i in range(n)) for q in itertools.permutations(range(n)))
        worst = max(worst, abs(mp.cost - best))
    dt = time.perf_counter() - t0
    report(5, worst < 1e-9 and dt < 30, f"{len(grids)} grids, max |cost - exhaustive min| {worst:.1e}, {dt:.1f}s")


def test_c6_parameter_direction():
    ratios_ok = True
    for cin, cout in [(3, 16), (16, 32), (32, 64), (64, 96), (96, 128)]:
        h = HexConv(cin, cout, (2, 2), 0).parameter_count()
        s = SquareConv(cin, cout, (2, 2), 0).parameter_count()
        ratios_ok &= h * (9 * cin * cout + cout) == s * (7 * cin * cout + cout)
    sw = {lat: build_swwae(ModelConfig("swwae", lat)).parameter_count() for lat in ("square", "hex")}
    ac = {}
    for lat in ("square", "hex"):
        gen, disc = build_acgan(acgan_config(lat))
        ac[lat] = gen.parameter_count() + disc.parameter_count()
    bn = BatchNorm(4).parameter_count()
    ok = ratios_ok and sw["hex"] < sw["square"] and ac["hex"] < ac["square"] and bn == 8
    report(6, ok, f"per-layer ratio exact: {ratios_ok}; SWWAE square {sw['square']} / hex {sw['hex']}; "
                  f"ACGAN square {ac['square']} / hex {ac['hex']}")


def test_c7_swwae_training_smoke(tmp_path, mnist_path):
    out = tmp_path / "c7"
    t0 = time.perf_counter()
    code = main(["train", "--family", "swwae", "--lattice", "hex", "--dataset", "mnist",
                 "--data-root", str(ROOT / "data"), "--limit", "500", "--epochs", "2", "--seed", "7",
                 "--out", str(out)])
    assert code == 0
    log = [json.loads(x) for x in (out / "epochs.jsonl").read_text().splitlines()]
    _, model = load_trained(out / "checkpoint.hxck")
    limited = dataio.load_mnist(mnist_path, "train").limit(500)
    final = evaluate_generation(model, limited.images, batch=len(limited))
    dt = time.perf_counter() - t0
    decreased = log[1]["loss"] < log[0]["loss"]
    ok = decreased and final.psnr > 15 and dt < 600
    report(7, ok, f"loss {log[0]['loss']:.5f} -> {log[1]['loss']:.5f} (decrease: {decreased}), "
                  f"PSNR on the 500 images {final.psnr:.2f} dB (need > 15), {dt:.0f}s")


@pytest.mark.parametrize("lattice", ["square", "hex"])
def test_c8_acgan_smoke(tmp_path, mnist_path, lattice):
    out = tmp_path / f"c8{lattice}"
    t0 = time.perf_counter()
    code = main(["train", "--family", "acgan", "--lattice", lattice, "--dataset", "mnist",
                 "--data-root", str(ROOT / "data"), "--limit", "500", "--epochs", "1", "--seed", "7",
                 "--out", str(out)])
    assert code == 0
    header, row = (out / "report.csv").read_text().splitlines()
    acc = float(dict(zip(header.split(","), row.split(",")))["disc_accuracy"])
    _, (gen, _) = load_trained(out / "checkpoint.hxck")
    from hexgen.models import generate
    samples = generate(gen, np.arange(10), seed=7)
    finite = bool(np.isfinite(samples).all() and samples.min() >= 0 and samples.max() <= 1)
    dt = time.perf_counter() - t0
    ok = acc > 0.55 and finite and dt < 600
    report(8, ok, f"[{lattice}] held-out real/fake accuracy {acc:.3f} (need > 0.55), outputs finite and in "
                  f"[0, 1]: {finite}, {dt:.0f}s")


def test_c9_table3_is_out_of_scale():
    ACCEPTANCE.append("criterion 9: SKIP  100-epoch full-dataset run; use `repro_table3` "
                      "(target MNIST H-SWWAE PSNR 45.1 +/- 3.4 dB)")
    pytest.skip("long-running reproduction, not part of CI")


def _same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    files = sorted(p.name for p in a.iterdir() if p.is_file())
    same = all(filecmp.cmp(a / f, b / f, shallow=False) for f in files)
    return same and not cmp.left_only and not cmp.right_only, len(files)


def test_c10_determinism(tmp_path, mnist_path, capsys):
    t0 = time.perf_counter()
    yy, xx = np.mgrid[0:32, 0:32] / 31.0
    src = tmp_path / "in.png"
    dataio.save_png(src, np.stack([xx, yy, xx * yy], axis=-1))
    data = str(ROOT / "data")
    results = {}

    def twice(name, build):
        outs = []
        for tag in ("a", "b"):
            d = tmp_path / f"{name}-{tag}"
            d.mkdir()
            capsys.readouterr()
            assert main(build(d)) == 0
            text = capsys.readouterr().out.replace(str(d), "<out>")
            outs.append((d, text))
        same_files, n = _same_tree(outs[0][0], outs[1][0])
        results[name] = same_files and outs[0][1] == outs[1][1]
        return outs[0][0]

    twice("transform", lambda d: ["transform", str(src), str(d / "x.hexi")])
    hexi = tmp_path / "transform-a" / "x.hexi"
    twice("metrics", lambda d: ["metrics", str(src), str(hexi)])
    twice("render", lambda d: ["render", str(hexi), str(d / "x.png"), "--scale", "4"])
    twice("train-swwae", lambda d: ["train", "--lattice", "hex", "--data-root", data, "--limit", "40",
                                    "--batch-size", "20", "--epochs", "2", "--seed", "3", "--out", str(d)])
    run = twice("train-acgan", lambda d: ["train", "--family", "acgan", "--lattice", "hex", "--data-root", data,
                                          "--limit", "20", "--batch-size", "20", "--seed", "3", "--out", str(d)])
    twice("generate", lambda d: ["generate", str(run / "checkpoint.hxck"), "--out", str(d), "--seed", "5",
                                 "--scale", "4"])
    dt = time.perf_counter() - t0
    ok = all(results.values()) and dt < 300
    report(10, ok, ", ".join(f"{k} {'identical' if v else 'DIFFERENT'}" for k, v in results.items())
           + f", {dt:.0f}s")


def test_c11_round_trips():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    hexi_ok = ckpt_ok = True
    for _ in range(50):
        ch = int(rng.integers(1, 5))
        g = fit_hex_geometry(int(rng.integers(1, 40)), int(rng.integers(1, 40)))
        img = HexImage(g, rng.random(g.shape + (ch,)).astype(np.float32))
        back = dataio.decode_hex_image(dataio.encode_hex_image(img))
        hexi_ok &= back.data.tobytes() == img.data.tobytes() and back.geometry == img.geometry
        tensors = {f"t{i}/{'x' * int(rng.integers(1, 6))}": rng.standard_normal(
            tuple(int(d) for d in rng.integers(1, 6, int(rng.integers(0, 4))))).astype(np.float32)
            for i in range(int(rng.integers(1, 8)))}
        blob = encode_checkpoint(tensors)
        back_t = decode_checkpoint(blob)
        ckpt_ok &= list(back_t) == list(tensors) and all(
            back_t[k].shape == v.shape and back_t[k].tobytes() == v.tobytes() for k, v in tensors.items())
        ckpt_ok &= encode_checkpoint(back_t) == blob
    dt = time.perf_counter() - t0
    report(11, hexi_ok and ckpt_ok and dt < 10, f"HEXI bit-exact {hexi_ok}, HXCK bit-exact {ckpt_ok} "
                                                  f"(50 randomized payloads each), {dt:.1f}s")
