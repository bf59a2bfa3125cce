import hashlib
import json
import math
from pathlib import Path

import numpy as np
import pytest

from helpers import make_photo, write_photo
from t2i_eval.degrade import (
    DEFAULT_BLUR_SIGMAS,
    DEFAULT_JPEG_QUALITIES,
    DEFAULT_NOISE_SIGMAS,
    CorpusEntry,
    DegradationKind,
    DegradationSpec,
    apply_gaussian_blur,
    apply_gaussian_noise,
    build_degraded_corpus,
    default_plan,
    gaussian_kernel,
    load_image,
    psnr,
    recompress_jpeg,
    splitmix64,
    standard_normals,
)
from t2i_eval.errors import DegradeError

BLUR = DegradationKind.GAUSSIAN_BLUR
NOISE = DegradationKind.GAUSSIAN_NOISE
JPEG = DegradationKind.JPEG


def _splitmix64_reference(seed: int, count: int) -> list[int]:
    mask = (1 << 64) - 1
    out = []
    state = seed & mask
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return out


class TestSplitMix64:
    @pytest.mark.parametrize("seed", [0, 1, 42, 1234567, 2**64 - 1])
    def test_matches_scalar_reference(self, seed):
        assert splitmix64(seed, 16).tolist() == _splitmix64_reference(seed, 16)

    def test_normals_shape_and_moments(self):
        z = standard_normals(7, 100001)
        assert len(z) == 100001
        assert abs(z.mean()) < 0.02
        assert abs(z.std() - 1.0) < 0.02


class TestGaussianKernel:
    @pytest.mark.parametrize("sigma", [0.1, 0.5, 1.0, 2.0, 4.0])
    def test_normalized(self, sigma):
        weights = gaussian_kernel(sigma)
        assert weights.sum() == pytest.approx(1.0, abs=1e-9)
        assert len(weights) == 2 * math.ceil(3 * sigma) + 1

    def test_sigma_must_be_positive(self):
        with pytest.raises(ValueError):
            gaussian_kernel(0.0)


class TestGaussianBlur:
    def test_flat_field_invariant(self):
        flat = np.full((32, 24, 3), 181, dtype=np.uint8)
        assert np.array_equal(apply_gaussian_blur(flat, 2.0), flat)

    def test_preserves_mean_of_constant_grayscale(self):
        flat = np.full((16, 16), 7, dtype=np.uint8)
        assert np.array_equal(apply_gaussian_blur(flat, 4.0), flat)

    def test_tiny_sigma_barely_changes_image(self):
        image = make_photo(2)
        blurred = apply_gaussian_blur(image, 0.1)
        deviation = np.abs(blurred.astype(int) - image.astype(int)).max()
        assert deviation <= 1

    def test_impulse_response_center_weight(self):
        image = np.zeros((31, 31), dtype=np.uint8)
        image[15, 15] = 255
        sigma = 1.5
        center = gaussian_kernel(sigma)[math.ceil(3 * sigma)]
        blurred = apply_gaussian_blur(image, sigma)
        assert abs(int(blurred[15, 15]) - 255 * center * center) <= 0.5 + 1e-9

    def test_dimensions_preserved(self):
        image = make_photo(1, size=41)
        assert apply_gaussian_blur(image, 3.0).shape == image.shape

    def test_bad_sigma(self):
        with pytest.raises(ValueError):
            apply_gaussian_blur(make_photo(0), -1.0)


class TestGaussianNoise:
    def test_deterministic_for_seed(self):
        image = make_photo(3)
        a = apply_gaussian_noise(image, 10.0, 99)
        b = apply_gaussian_noise(image, 10.0, 99)
        assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        image = make_photo(3)
        a = apply_gaussian_noise(image, 10.0, 99)
        b = apply_gaussian_noise(image, 10.0, 100)
        assert not np.array_equal(a, b)

    def test_variance_close_to_sigma_squared(self):
        gray = np.full((256, 256), 128, dtype=np.uint8)
        noisy = apply_gaussian_noise(gray, 10.0, 7)
        variance = (noisy.astype(float) - 128.0).var()
        assert abs(variance - 100.0) / 100.0 < 0.05

    def test_clamped_to_byte_range(self):
        dark = np.zeros((64, 64), dtype=np.uint8)
        noisy = apply_gaussian_noise(dark, 50.0, 5)
        assert noisy.min() >= 0 and noisy.max() <= 255

    def test_bad_sigma(self):
        with pytest.raises(ValueError):
            apply_gaussian_noise(make_photo(0), 0.0, 1)


class TestJpeg:
    def test_deterministic(self):
        image = make_photo(4)
        assert np.array_equal(recompress_jpeg(image, 10), recompress_jpeg(image, 10))

    def test_quality_ordering(self):
        image = make_photo(4)
        assert psnr(image, recompress_jpeg(image, 95)) > psnr(image, recompress_jpeg(image, 10))

    def test_one_by_one_image(self):
        tiny = np.array([[[12, 200, 34]]], dtype=np.uint8)
        assert recompress_jpeg(tiny, 10).shape == tiny.shape

    def test_grayscale_round_trip(self):
        gray = make_photo(5)[:, :, 0]
        assert recompress_jpeg(gray, 50).shape == gray.shape

    @pytest.mark.parametrize("quality", [0, 101, 50.5])
    def test_bad_quality(self, quality):
        with pytest.raises(ValueError):
            recompress_jpeg(make_photo(0), quality)


class TestPsnr:
    def test_identical_is_infinite(self):
        image = make_photo(6)
        assert psnr(image, image) == math.inf

    def test_black_vs_white_is_zero_db(self):
        black = np.zeros((8, 8), dtype=np.uint8)
        white = np.full((8, 8), 255, dtype=np.uint8)
        assert psnr(black, white) == pytest.approx(0.0, abs=1e-12)

    def test_hand_computed_example(self):
        ref = np.array([[0, 0], [0, 0]], dtype=np.uint8)
        test = np.array([[10, 0], [0, 0]], dtype=np.uint8)
        # MSE = 100/4 = 25 -> 10*log10(255^2/25)
        assert psnr(ref, test) == pytest.approx(10 * math.log10(255**2 / 25), abs=1e-9)
        assert psnr(ref, test) == pytest.approx(34.1514, abs=1e-3)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            psnr(np.zeros((4, 4), dtype=np.uint8), np.zeros((4, 5), dtype=np.uint8))


class TestDegradationSpec:
    def test_severity_zero_is_identity_only(self):
        with pytest.raises(ValueError):
            DegradationSpec(kind=BLUR, severity_index=0, param=1.0)

    def test_jpeg_quality_range(self):
        with pytest.raises(ValueError):
            DegradationSpec(kind=JPEG, severity_index=1, param=0)
        with pytest.raises(ValueError):
            DegradationSpec(kind=JPEG, severity_index=1, param=30.5)

    def test_negative_severity(self):
        with pytest.raises(ValueError):
            DegradationSpec(kind=BLUR, severity_index=-1, param=1.0)


class TestPlans:
    def test_default_plan_shape(self):
        plan = default_plan()
        assert len(plan) == 12
        for kind in (BLUR, NOISE, JPEG):
            severities = sorted(s.severity_index for s in plan if s.kind is kind)
            assert severities == [0, 1, 2, 3]

    def test_default_ladders(self):
        plan = default_plan()
        blur = [s.param for s in plan if s.kind is BLUR and s.severity_index > 0]
        noise = [s.param for s in plan if s.kind is NOISE and s.severity_index > 0]
        jpeg = [s.param for s in plan if s.kind is JPEG and s.severity_index > 0]
        assert tuple(blur) == DEFAULT_BLUR_SIGMAS
        assert tuple(noise) == DEFAULT_NOISE_SIGMAS
        assert tuple(jpeg) == tuple(float(v) for v in DEFAULT_JPEG_QUALITIES)

    def test_non_monotone_plan_rejected(self, tmp_path):
        source = write_photo(tmp_path / "a.png", 0)
        plan = [
            DegradationSpec(kind=BLUR, severity_index=1, param=2.0),
            DegradationSpec(kind=BLUR, severity_index=2, param=1.0),
        ]
        with pytest.raises(DegradeError, match="monotone"):
            build_degraded_corpus([source], plan, tmp_path / "out")

    def test_duplicate_plan_entry_rejected(self, tmp_path):
        source = write_photo(tmp_path / "a.png", 0)
        plan = [
            DegradationSpec(kind=BLUR, severity_index=1, param=1.0),
            DegradationSpec(kind=BLUR, severity_index=1, param=1.0),
        ]
        with pytest.raises(DegradeError, match="duplicate"):
            build_degraded_corpus([source], plan, tmp_path / "out")

    def test_empty_inputs_rejected(self, tmp_path):
        with pytest.raises(DegradeError, match="empty"):
            build_degraded_corpus([tmp_path / "a.png"], [], tmp_path / "out")
        with pytest.raises(DegradeError, match="no images"):
            build_degraded_corpus([], default_plan(), tmp_path / "out")


def _dir_digest(directory: Path) -> str:
    digest = hashlib.sha256()
    for path in sorted(directory.rglob("*")):
        if path.is_file():
            digest.update(path.name.encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


class TestBuildCorpus:
    def blur_plan(self):
        return [
            DegradationSpec(kind=BLUR, severity_index=0, param=0.0),
            DegradationSpec(kind=BLUR, severity_index=1, param=1.0),
            DegradationSpec(kind=BLUR, severity_index=2, param=2.0),
        ]

    def test_cardinality_and_sidecars(self, tmp_path):
        sources = [write_photo(tmp_path / f"img{i}.png", i) for i in range(2)]
        out = tmp_path / "corpus"
        entries = build_degraded_corpus(sources, self.blur_plan(), out)
        assert len(entries) == 6
        sidecars = sorted(out.glob("*.png.json"))
        assert len(sidecars) == 4
        for entry in entries:
            assert entry.degraded_path.exists()
            if entry.spec.severity_index == 0:
                assert entry.psnr_vs_source is None
            else:
                assert entry.psnr_vs_source > 0 and math.isfinite(entry.psnr_vs_source)

    def test_severity_zero_is_byte_copy(self, tmp_path):
        source = write_photo(tmp_path / "img.png", 1)
        out = tmp_path / "corpus"
        entries = build_degraded_corpus([source], self.blur_plan(), out)
        clean = next(e for e in entries if e.spec.severity_index == 0)
        assert clean.degraded_path.read_bytes() == source.read_bytes()

    def test_sidecar_fields(self, tmp_path):
        source = write_photo(tmp_path / "img.png", 1)
        out = tmp_path / "corpus"
        entries = build_degraded_corpus([source], self.blur_plan(), out)
        degraded = next(e for e in entries if e.spec.severity_index == 1)
        sidecar_path = degraded.degraded_path.with_name(degraded.degraded_path.name + ".json")
        sidecar = json.loads(sidecar_path.read_text())
        assert set(sidecar) == {"kind", "severity_index", "param", "seed",
                                "psnr_vs_source", "encoder_id"}
        assert sidecar["kind"] == "gaussian_blur"
        assert sidecar["severity_index"] == 1
        assert sidecar["psnr_vs_source"] == pytest.approx(degraded.psnr_vs_source)

    def test_psnr_strictly_decreasing_full_default_plan(self, tmp_path):
        sources = [write_photo(tmp_path / f"img{i}.png", 10 + i) for i in range(2)]
        entries = build_degraded_corpus(sources, default_plan(seed=3), tmp_path / "corpus")
        by_ladder: dict[tuple[str, DegradationKind], list[CorpusEntry]] = {}
        for entry in entries:
            if entry.spec.severity_index > 0:
                by_ladder.setdefault((entry.image_id, entry.spec.kind), []).append(entry)
        assert len(by_ladder) == 6
        for ladder in by_ladder.values():
            ladder.sort(key=lambda e: e.spec.severity_index)
            values = [e.psnr_vs_source for e in ladder]
            assert all(a > b for a, b in zip(values, values[1:])), values

    def test_rerun_is_byte_identical(self, tmp_path):
        sources = [write_photo(tmp_path / f"img{i}.png", 20 + i) for i in range(2)]
        out1, out2 = tmp_path / "c1", tmp_path / "c2"
        build_degraded_corpus(sources, default_plan(seed=5), out1)
        build_degraded_corpus(sources, default_plan(seed=5), out2)
        assert _dir_digest(out1) == _dir_digest(out2)

    def test_manifest_deterministic_order(self, tmp_path):
        sources = [write_photo(tmp_path / f"img{i}.png", 30 + i) for i in range(2)]
        out = tmp_path / "corpus"
        build_degraded_corpus(sources, default_plan(), out)
        manifest = json.loads((out / "manifest.json").read_text())
        keys = [(e["image_id"], e["kind"], e["severity_index"]) for e in manifest["entries"]]
        assert keys == sorted(keys)
        assert len(manifest["entries"]) == 2 * 12

    def test_identity_degradation_rejected(self, tmp_path):
        flat = np.full((32, 32, 3), 99, dtype=np.uint8)
        from t2i_eval.degrade import save_png

        source = tmp_path / "flat.png"
        save_png(flat, source)
        plan = [DegradationSpec(kind=BLUR, severity_index=1, param=1.0)]
        with pytest.raises(DegradeError, match="identical"):
            build_degraded_corpus([source], plan, tmp_path / "out")

    def test_duplicate_stems_rejected(self, tmp_path):
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        s1 = write_photo(tmp_path / "a" / "img.png", 0)
        s2 = write_photo(tmp_path / "b" / "img.png", 1)
        with pytest.raises(DegradeError, match="unique"):
            build_degraded_corpus([s1, s2], self.blur_plan(), tmp_path / "out")


class TestLoadImage:
    def test_rgb(self, tmp_path):
        path = write_photo(tmp_path / "img.png", 0)
        assert load_image(path).shape == (96, 96, 3)

    def test_grayscale_preserved(self, tmp_path):
        from t2i_eval.degrade import save_png

        gray = make_photo(0)[:, :, 0]
        path = tmp_path / "gray.png"
        save_png(gray, path)
        assert load_image(path).shape == (96, 96)
