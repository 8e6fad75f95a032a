import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexgen.hexgrid import HexGeometry
from hexgen.metrics import (MetricReport, batch_report, metric_report, psnr, transformation_mae,
                            transformation_mse, transformation_mse_grad)
from hexgen.resample import (DimensionError, OverlapMap, SquareImage, compute_overlap_map, fit_hex_geometry,
                             square_to_hex)


def naive_mse(S, H, om):
    num = 0.0
    den = 0.0
    for (si, sj), (hi, hj), a in om.entries:
        err = 0.0
        for c in range(S.shape[-1]):
            err += (S[si, sj, c] - H[hi, hj, c]) ** 2
        num += a * err / S.shape[-1]
        den += a
    return num / den


def _setup(h=4, w=4, c=1, seed=0):
    rng = np.random.default_rng(seed)
    g = fit_hex_geometry(h, w)
    om = compute_overlap_map(g, h, w)
    return rng.random((h, w, c)), rng.random(g.shape + (c,)), om


def test_single_entry_map():
    g = HexGeometry(1, 1)
    om = OverlapMap(g, 1, 1, np.array([[0, 0]]), np.array([[0, 0]]), np.array([0.5]))
    S = np.ones((1, 1, 1))
    H = np.zeros((1, 1, 1))
    assert transformation_mse(S, H, om) == pytest.approx(1.0)
    assert transformation_mse_grad(S, H, om)[0, 0, 0] == pytest.approx(-2.0)


def test_constant_area_projection_is_zero():
    img = SquareImage(np.full((8, 8, 3), 0.6))
    g = fit_hex_geometry(8, 8)
    om = compute_overlap_map(g, 8, 8)
    H = square_to_hex(img, g, "area")
    assert transformation_mse(img, H, om) == pytest.approx(0.0, abs=1e-24)
    assert np.abs(transformation_mse_grad(img, H, om)).max() < 1e-12
    assert math.isinf(metric_report(img, H, om).psnr)


def test_matches_naive_loop_random_4x4():
    S, H, om = _setup(4, 4, 3, seed=1)
    assert transformation_mse(S, H, om) == pytest.approx(naive_mse(S, H, om), rel=1e-12)


def test_batch_axis():
    S, H, om = _setup(6, 6, 2, seed=2)
    rng = np.random.default_rng(3)
    Sb = np.stack([S, rng.random(S.shape)])
    Hb = np.stack([H, rng.random(H.shape)])
    got = transformation_mse(Sb, Hb, om)
    assert got.shape == (2,)
    assert got[0] == pytest.approx(transformation_mse(S, H, om))


def test_gradient_finite_differences():
    S, H, om = _setup(5, 5, 2, seed=4)
    g = transformation_mse_grad(S, H, om)
    eps = 1e-4
    num = np.zeros_like(H)
    for idx in np.ndindex(H.shape):
        Hp, Hm = H.copy(), H.copy()
        Hp[idx] += eps
        Hm[idx] -= eps
        num[idx] = (transformation_mse(S, Hp, om) - transformation_mse(S, Hm, om)) / (2 * eps)
    assert np.abs(num - g).max() / np.abs(num).max() < 1e-5


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.1, 3.0))
def test_scaling_and_nonnegativity(seed, k):
    S, H, om = _setup(4, 4, 1, seed=seed)
    m = transformation_mse(S, H, om)
    assert m >= 0
    assert transformation_mse(k * S, k * H, om) == pytest.approx(k * k * m, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_gradient_property(seed):
    S, H, om = _setup(4, 4, 1, seed=seed)
    g = transformation_mse_grad(S, H, om)
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(H.shape)
    eps = 1e-5
    num = (transformation_mse(S, H + eps * d, om) - transformation_mse(S, H - eps * d, om)) / (2 * eps)
    assert num == pytest.approx(float((g * d).sum()), rel=1e-5, abs=1e-12)


def test_channel_averaging():
    S, H, om = _setup(4, 4, 1, seed=6)
    assert transformation_mse(np.repeat(S, 3, -1), np.repeat(H, 3, -1), om) == pytest.approx(
        transformation_mse(S, H, om), rel=1e-14)


def test_zero_iff_equal_on_covered_cells():
    S, H, om = _setup(4, 4, 1, seed=7)
    H2 = H.copy()
    for (si, sj), (hi, hj), _ in om.entries:
        H2[hi, hj] = 0.0
    S2 = np.zeros_like(S)
    assert transformation_mse(S2, H2, om) == 0.0
    H2[om.hex_index[0, 0], om.hex_index[0, 1]] = 0.5
    assert transformation_mse(S2, H2, om) > 0.0


def test_mae_le_sqrt_mse():
    S, H, om = _setup(6, 6, 3, seed=8)
    assert transformation_mae(S, H, om) <= math.sqrt(transformation_mse(S, H, om)) + 1e-12


def test_dimension_errors():
    S, H, om = _setup(4, 4, 1)
    with pytest.raises(DimensionError):
        transformation_mse(np.zeros((5, 4, 1)), H, om)
    with pytest.raises(DimensionError):
        transformation_mse(S, np.zeros((3, 3, 1)), om)
    with pytest.raises(DimensionError):
        transformation_mse(S, np.zeros(H.shape[:2] + (2,)), om)


def test_psnr_values():
    assert psnr(1.0) == 0.0
    assert psnr(0.01) == pytest.approx(20.0)
    assert math.isinf(psnr(0.0))
    with pytest.raises(ValueError):
        psnr(-1e-3)


def test_report_csv_inf():
    r = MetricReport(0.0, math.inf, 0.0, 1.0)
    assert r.csv_row().split(",")[1] == "inf"
    assert r.csv_header().startswith("mse,psnr,mae")


def test_batch_report():
    r = batch_report(np.array([0.01, 0.001]), np.array([0.1, 0.01]), 10.0)
    assert r.psnr == pytest.approx(25.0)
    assert r.psnr_std == pytest.approx(5.0)
    assert r.count == 2
