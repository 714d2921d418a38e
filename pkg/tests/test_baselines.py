import math

import numpy as np
import pytest

from glips import (
    FeatureSet,
    GaussianSummary,
    ImageTensor,
    fid,
    fit_gaussian,
    kid,
    mad,
    mape,
    ms_ssim,
    psnr,
    ssim,
)
from glips.baselines import MSSSIM_WEIGHTS, SsimParams, _gaussian_window
from glips.errors import (
    DimensionMismatchError,
    EmptyInputError,
    InsufficientSamplesError,
    LengthMismatchError,
    TooSmallForScalesError,
    ZeroHumanScoreError,
)
from glips.imagery import luminance

from conftest import make_image


def constant_image(size: int, value: float) -> ImageTensor:
    return ImageTensor(np.full((size, size, 3), value))


def skimage_ssim(a: ImageTensor, b: ImageTensor) -> float:
    """Independent reference implementation on the same luminance planes."""
    from skimage.metrics import structural_similarity

    return structural_similarity(
        luminance(a),
        luminance(b),
        data_range=1.0,
        gaussian_weights=True,
        sigma=1.5,
        use_sample_covariance=False,
    )


class TestSsim:
    def test_identity_is_exactly_one(self, rng):
        img = make_image(rng, 64)
        assert ssim(img, img) == 1.0

    def test_constant_pair(self):
        assert ssim(constant_image(32, 0.5), constant_image(32, 0.5)) == 1.0

    def test_black_vs_white_matches_reference(self):
        a, b = constant_image(32, 0.0), constant_image(32, 1.0)
        assert ssim(a, b) == pytest.approx(skimage_ssim(a, b), abs=1e-9)

    def test_random_pair_matches_reference(self, rng):
        a, b = make_image(rng, 48), make_image(rng, 48)
        assert ssim(a, b) == pytest.approx(skimage_ssim(a, b), abs=1e-7)

    def test_symmetry_and_bounds(self, rng):
        a, b = make_image(rng, 32), make_image(rng, 32)
        forward, backward = ssim(a, b), ssim(b, a)
        assert forward == pytest.approx(backward, abs=1e-12)
        assert -1.0 <= forward <= 1.0

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            ssim(make_image(rng, 32), make_image(rng, 48))

    def test_window_larger_than_image(self, rng):
        with pytest.raises(DimensionMismatchError):
            ssim(make_image(rng, 8), make_image(rng, 8))


def sliding_window_msssim(a: ImageTensor, b: ImageTensor) -> float:
    """Independent multi-scale oracle via explicit window tensors."""
    from numpy.lib.stride_tricks import sliding_window_view

    p = SsimParams()
    w = _gaussian_window(p.window, p.sigma)
    c1, c2 = (p.k1 * p.dynamic_range) ** 2, (p.k2 * p.dynamic_range) ** 2

    def stats(x, y):
        mu_x = np.einsum("ijkl,kl->ij", sliding_window_view(x, w.shape), w)
        mu_y = np.einsum("ijkl,kl->ij", sliding_window_view(y, w.shape), w)
        exx = np.einsum("ijkl,kl->ij", sliding_window_view(x * x, w.shape), w)
        eyy = np.einsum("ijkl,kl->ij", sliding_window_view(y * y, w.shape), w)
        exy = np.einsum("ijkl,kl->ij", sliding_window_view(x * y, w.shape), w)
        cs = (2 * (exy - mu_x * mu_y) + c2) / ((exx - mu_x**2) + (eyy - mu_y**2) + c2)
        lum = (2 * mu_x * mu_y + c1) / (mu_x**2 + mu_y**2 + c1)
        return float((lum * cs).mean()), float(cs.mean())

    def halve(z):
        h, w2 = (z.shape[0] // 2) * 2, (z.shape[1] // 2) * 2
        z = z[:h, :w2]
        return (z[0::2, 0::2] + z[0::2, 1::2] + z[1::2, 0::2] + z[1::2, 1::2]) / 4

    x, y = luminance(a), luminance(b)
    value = 1.0
    for level, weight in enumerate(MSSSIM_WEIGHTS):
        s, cs = stats(x, y)
        term = s if level == len(MSSSIM_WEIGHTS) - 1 else cs
        value *= max(term, 0.0) ** weight
        if level < len(MSSSIM_WEIGHTS) - 1:
            x, y = halve(x), halve(y)
    return value


class TestMsSsim:
    def test_identity_is_one(self, rng):
        img = make_image(rng, 192)
        assert ms_ssim(img, img) == pytest.approx(1.0, abs=1e-9)

    def test_lossless_reencode_is_one(self, tmp_path, rng):
        from glips import decode_image, save_image

        img = make_image(rng, 192)
        save_image(img, str(tmp_path / "x.png"))
        again = decode_image(str(tmp_path / "x.png"))
        assert ms_ssim(again, again) == pytest.approx(1.0, abs=1e-9)

    def test_fixture_pair_matches_sliding_window_oracle(self, rng):
        a, b = make_image(rng, 192), make_image(rng, 192)
        assert ms_ssim(a, b) == pytest.approx(sliding_window_msssim(a, b), abs=1e-9)

    def test_noisy_pair_below_identity(self, rng):
        base = make_image(rng, 192)
        noisy = ImageTensor(np.clip(base.data + rng.normal(0, 0.1, base.data.shape), 0, 1))
        assert ms_ssim(base, noisy) < 1.0

    def test_too_small_rejected(self, rng):
        with pytest.raises(TooSmallForScalesError):
            ms_ssim(make_image(rng, 64), make_image(rng, 64))

    def test_weights_must_sum_to_one(self):
        with pytest.raises(Exception):
            SsimParams(msssim_weights=(0.5, 0.5, 0.5, 0.5, 0.5))


class TestPsnr:
    def test_identical_images_infinite(self, rng):
        img = make_image(rng, 16)
        assert psnr(img, img) == math.inf

    def test_quarter_mse_hand_case(self):
        got = psnr(constant_image(8, 0.0), constant_image(8, 0.5))
        assert got == pytest.approx(10 * math.log10(4), abs=1e-12)
        assert got == pytest.approx(6.0206, abs=1e-3)

    def test_full_mse_is_zero_db(self):
        assert psnr(constant_image(8, 0.0), constant_image(8, 1.0)) == pytest.approx(0.0)

    def test_strictly_decreasing_in_mse(self, rng):
        base = constant_image(16, 0.0)
        values = [psnr(base, constant_image(16, v)) for v in (0.1, 0.2, 0.4, 0.8)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            psnr(make_image(rng, 8), make_image(rng, 16))


class TestFitGaussian:
    def test_two_identical_vectors_zero_covariance(self):
        summary = fit_gaussian(np.array([[1.0, 2.0], [1.0, 2.0]]))
        assert np.array_equal(summary.covariance, np.zeros((2, 2)))

    def test_hand_covariance(self):
        summary = fit_gaussian(np.array([[0.0, 0.0], [2.0, 0.0]]))
        assert np.array_equal(summary.mean, np.array([1.0, 0.0]))
        assert np.array_equal(summary.covariance, np.array([[2.0, 0.0], [0.0, 0.0]]))

    def test_single_vector_rejected(self):
        with pytest.raises(InsufficientSamplesError):
            fit_gaussian(np.array([[1.0, 2.0]]))

    def test_accepts_feature_sets(self, rng):
        feats = FeatureSet(tokens=rng.normal(size=(10, 3)))
        summary = fit_gaussian(feats)
        assert summary.dim == 3


def random_summary(rng, dim=4) -> GaussianSummary:
    a = rng.normal(size=(dim, dim))
    cov = a @ a.T / dim + np.eye(dim) * 0.1
    return GaussianSummary(mean=rng.normal(size=dim), covariance=cov)


class TestFid:
    def test_identical_summaries_zero(self, rng):
        g = random_summary(rng)
        assert fid(g, g) == pytest.approx(0.0, abs=1e-6)

    def test_mean_shift_closed_form(self):
        g1 = GaussianSummary(mean=[0.0], covariance=[[1.0]])
        g2 = GaussianSummary(mean=[3.0], covariance=[[1.0]])
        assert fid(g1, g2) == pytest.approx(9.0, abs=1e-6)

    def test_variance_gap_closed_form(self):
        g1 = GaussianSummary(mean=[0.0], covariance=[[4.0]])
        g2 = GaussianSummary(mean=[0.0], covariance=[[1.0]])
        assert fid(g1, g2) == pytest.approx(1.0, abs=1e-6)  # 4 + 1 - 2*sqrt(4)

    def test_symmetry(self, rng):
        g1, g2 = random_summary(rng), random_summary(rng)
        assert fid(g1, g2) == pytest.approx(fid(g2, g1), abs=1e-6)

    def test_nonnegative_on_random_summaries(self, rng):
        for _ in range(10):
            assert fid(random_summary(rng), random_summary(rng)) >= 0.0

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatchError):
            fid(random_summary(rng, 3), random_summary(rng, 4))


class TestKid:
    def test_identical_sets_zero(self, rng):
        f = FeatureSet(tokens=rng.normal(size=(6, 4)))
        assert kid(f, FeatureSet(tokens=f.tokens.copy())) == pytest.approx(0.0, abs=1e-9)

    def test_one_dimensional_hand_case(self):
        # alpha = 1/dim = 1: K_oo = 1, K_gg = (1+1)^3 = 8, K_og = 2*1
        f = FeatureSet(tokens=np.array([[0.0]]))
        g = FeatureSet(tokens=np.array([[1.0]]))
        assert kid(f, g) == pytest.approx(7.0, abs=1e-12)

    def test_symmetry(self, rng):
        f = FeatureSet(tokens=rng.normal(size=(5, 3)))
        g = FeatureSet(tokens=rng.normal(size=(8, 3)))
        assert kid(f, g) == pytest.approx(kid(g, f), abs=1e-10)


class TestErrorStatistics:
    def test_single_pair_from_published_table(self):
        assert mad([3.30], [4.52]) == pytest.approx(1.22, abs=1e-12)
        assert mape([3.30], [4.52]) == pytest.approx(36.96, abs=0.05)

    def test_glide_row(self):
        assert mad([2.04], [4.71]) == pytest.approx(2.67, abs=1e-12)

    def test_dalle2_row_percentage(self):
        assert mape([3.63], [4.90]) == pytest.approx(34.98, abs=0.05)

    def test_identical_vectors(self):
        assert mad([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert mape([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_vector_aggregation(self):
        assert mad([1.0, 2.0], [2.0, 4.0]) == pytest.approx(1.5)
        assert mape([1.0, 2.0], [2.0, 4.0]) == pytest.approx(100.0)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            mad([1.0], [1.0, 2.0])

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            mad([], [])

    def test_zero_human_score_rejected(self):
        with pytest.raises(ZeroHumanScoreError):
            mape([0.0], [1.0])

    def test_published_inconsistency_documented(self):
        # one published row pairs (rescaled 2.56, human 2.75) with printed
        # MAD 0.17 / MAPE 6.23, but |2.75 - 2.56| is 0.19 (6.91%); the
        # acceptance gate over printed values therefore cannot clear that
        # row, and this pins the arithmetic fact so the fixture data is
        # known-good
        assert mad([2.75], [2.56]) == pytest.approx(0.19, abs=1e-12)
        assert abs(mad([2.75], [2.56]) - 0.17) > 0.015
        assert abs(mape([2.75], [2.56]) - 6.23) > 0.5
