"""Variational flow solver, magnitude processing, expansion fit, kernels."""

import numpy as np
import pytest

from flowgate.flow import (FlowConfig, FlowError, FlowField, MagnitudeMap,
                           VariationalBackend, clip_magnitude, estimate_flow,
                           fit_expansion, get_kernels, magnitude,
                           resample_field)
from flowgate.imaging import ImageBuffer, sample_plane


def smooth_texture(n, seed=0, sigma=2.0, pad=0):
    """Low-pass random texture; pad allows cutting shifted windows."""
    from scipy.ndimage import gaussian_filter
    rng = np.random.default_rng(seed)
    big = gaussian_filter(rng.standard_normal((n + 2 * pad, n + 2 * pad)), sigma)
    big = (big - big.min()) / (big.max() - big.min())
    return big


def shifted_pair(n, dx, dy, seed):
    """Two n x n windows of one texture, offset by exactly (dx, dy)."""
    pad = 8
    tex = smooth_texture(n, seed=seed, pad=pad)
    a = tex[pad:pad + n, pad:pad + n]
    b = tex[pad - dy:pad + n - dy, pad - dx:pad + n - dx]
    return ImageBuffer(a), ImageBuffer(b)


def block_match(a, b, patch=8, search=6, step=8):
    """Exhaustive integer-displacement oracle over interior patches."""
    ha, wa = a.shape
    votes = {}
    for y in range(search + patch, ha - search - 2 * patch, step):
        for x in range(search + patch, wa - search - 2 * patch, step):
            ref = a[y:y + patch, x:x + patch]
            best, best_d = None, None
            for dy in range(-search, search + 1):
                for dx in range(-search, search + 1):
                    cand = b[y + dy:y + dy + patch, x + dx:x + dx + patch]
                    err = float(np.sum((ref - cand) ** 2))
                    if best is None or err < best:
                        best, best_d = err, (dx, dy)
            votes[best_d] = votes.get(best_d, 0) + 1
    return max(votes, key=votes.get)


def central_mask(n, frac=0.75):
    m = np.zeros((n, n), bool)
    border = int(round(n * (1 - frac) / 2))
    m[border:n - border, border:n - border] = True
    return m


class TestEstimateFlow:
    def test_identical_inputs_zero_flow(self):
        img = ImageBuffer(smooth_texture(64, seed=1))
        f = estimate_flow(img, img)
        assert np.abs(f.u).max() < 1e-6
        assert np.abs(f.v).max() < 1e-6

    def test_integer_shift_matches_block_matching_oracle(self):
        a, b = shifted_pair(64, 3, 0, seed=2)
        # the oracle first confirms the displacement really is (3, 0)
        assert block_match(a.gray(), b.gray()) == (3, 0)
        f = estimate_flow(a, b)
        m = central_mask(64)
        epe = np.sqrt((f.u - 3.0) ** 2 + f.v ** 2)
        assert epe[m].mean() <= 0.3

    def test_negative_diagonal_shift(self):
        a, b = shifted_pair(64, -2, 4, seed=3)
        assert block_match(a.gray(), b.gray()) == (-2, 4)
        f = estimate_flow(a, b)
        m = central_mask(64)
        epe = np.sqrt((f.u + 2.0) ** 2 + (f.v - 4.0) ** 2)
        assert epe[m].mean() <= 0.3

    def test_central_zoom_recovery(self):
        n = 128
        tex = smooth_texture(n, seed=4)
        c = (n - 1) / 2
        ys, xs = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        k = 1.10
        zoomed = sample_plane(tex, c + (xs - c) / k, c + (ys - c) / k)
        f = estimate_flow(ImageBuffer(tex), ImageBuffer(zoomed))
        fit = fit_expansion(f, mask=central_mask(n))
        assert 1.08 <= fit.zoom <= 1.12

    def test_dimension_mismatch_rejected(self):
        a = ImageBuffer(smooth_texture(64, seed=5))
        b = ImageBuffer(smooth_texture(32, seed=5))
        with pytest.raises(FlowError):
            estimate_flow(a, b)

    def test_shift_equivariance(self):
        a, b = shifted_pair(64, 2, 1, seed=6)
        f = estimate_flow(a, b)
        m = central_mask(64)
        epe = np.sqrt((f.u - 2.0) ** 2 + (f.v - 1.0) ** 2)
        assert epe[m].mean() <= 0.3

    def test_rgb_inputs_converted(self):
        g = smooth_texture(64, seed=7)
        a = ImageBuffer(np.stack([g, g * 0.5, g * 0.25], axis=-1))
        f = estimate_flow(a, a)
        assert np.abs(f.u).max() < 1e-6


class TestKernelBackends:
    def test_backends_agree(self):
        pure = get_kernels("pure")
        a, b = shifted_pair(48, 2, -1, seed=8)
        f_pure = VariationalBackend("pure").estimate(a, b, FlowConfig())
        try:
            f_comp = VariationalBackend("compiled").estimate(a, b, FlowConfig())
        except RuntimeError:
            pytest.skip("compiled kernels not built")
        assert np.abs(f_pure.u - f_comp.u).max() < 1e-8
        assert np.abs(f_pure.v - f_comp.v).max() < 1e-8
        assert pure.BACKEND == "pure"

    def test_warp_parity(self):
        pure = get_kernels("pure")
        try:
            comp = get_kernels("compiled")
        except RuntimeError:
            pytest.skip("compiled kernels not built")
        rng = np.random.default_rng(9)
        img = rng.random((33, 29))
        u = rng.uniform(-3, 3, img.shape)
        v = rng.uniform(-3, 3, img.shape)
        assert np.abs(pure.warp_backward(img, u, v)
                      - comp.warp_backward(img, u, v)).max() < 1e-12

    def test_jacobi_parity(self):
        pure = get_kernels("pure")
        try:
            comp = get_kernels("compiled")
        except RuntimeError:
            pytest.skip("compiled kernels not built")
        rng = np.random.default_rng(10)
        ix, iy, it = (rng.standard_normal((21, 27)) * 0.1 for _ in range(3))
        up, vp = pure.jacobi_sweeps(ix, iy, it, 0.01, 30)
        uc, vc = comp.jacobi_sweeps(ix, iy, it, 0.01, 30)
        assert np.abs(up - uc).max() < 1e-12
        assert np.abs(vp - vc).max() < 1e-12


class TestPyramidHandoff:
    def test_upsample_doubles_vectors(self):
        coarse = FlowField(np.full((16, 16), 1.5, np.float32),
                           np.full((16, 16), -0.5, np.float32))
        fine = resample_field(coarse, 32, 32, scale_values=2.0)
        assert np.allclose(fine.u, 3.0)
        assert np.allclose(fine.v, -1.0)


class TestMagnitude:
    def test_345(self):
        f = FlowField(np.full((2, 2), 3.0, np.float32), np.full((2, 2), 4.0, np.float32))
        assert magnitude(f).m == pytest.approx(np.full((2, 2), 5.0))

    def test_zero(self):
        f = FlowField.zeros(3, 3)
        assert np.all(magnitude(f).m == 0.0)

    def test_5_12_13(self):
        f = FlowField(np.full((1, 1), -5.0, np.float32), np.full((1, 1), 12.0, np.float32))
        assert magnitude(f).m[0, 0] == pytest.approx(13.0)

    def test_negative_rejected(self):
        with pytest.raises(FlowError):
            MagnitudeMap(np.array([[-1.0]]))


class TestClipMagnitude:
    def test_clip_at_256(self):
        m = MagnitudeMap(np.array([[60.0, 10.0]]))
        out = clip_magnitude(m, 256)
        assert out.m[0, 0] == pytest.approx(51.2, abs=1e-4)
        assert out.m[0, 1] == pytest.approx(10.0)

    def test_threshold_scales_with_crop(self):
        m = MagnitudeMap(np.array([[100.0]]))
        assert clip_magnitude(m, 320).m[0, 0] == pytest.approx(64.0, abs=1e-4)

    def test_idempotent_and_monotone(self):
        rng = np.random.default_rng(11)
        vals = rng.uniform(0, 100, (16, 16))
        m = MagnitudeMap(vals)
        once = clip_magnitude(m, 256)
        twice = clip_magnitude(once, 256)
        assert np.array_equal(once.m, twice.m)
        # order preserved
        flat = vals.ravel()
        order = np.argsort(flat)
        clipped = once.m.ravel()[order]
        assert np.all(np.diff(clipped) >= 0)


class TestFitExpansion:
    def test_exact_expansion_recovered(self):
        n = 32
        c = (n - 1) / 2
        ys, xs = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        f = FlowField((0.5 * (xs - c)).astype(np.float32),
                      (0.5 * (ys - c)).astype(np.float32))
        fit = fit_expansion(f)
        assert fit.scale == pytest.approx(0.5, abs=1e-6)
        assert fit.residual_rms == pytest.approx(0.0, abs=1e-5)
        assert fit.explained_energy == pytest.approx(1.0, abs=1e-6)

    def test_translation_absorbed(self):
        f = FlowField(np.full((8, 8), 2.0, np.float32), np.full((8, 8), -1.0, np.float32))
        fit = fit_expansion(f)
        assert fit.scale == pytest.approx(0.0, abs=1e-9)
        assert (fit.tx, fit.ty) == pytest.approx((2.0, -1.0), abs=1e-9)


class TestFlowConfig:
    def test_validation(self):
        with pytest.raises(FlowError):
            FlowConfig(resolution=32)
        with pytest.raises(FlowError):
            FlowConfig(alpha=-1)

    def test_json_round_trip(self):
        cfg = FlowConfig(resolution=192, refine_iters=2)
        assert FlowConfig.from_json(cfg.to_json()) == cfg
