"""Seeded image degradations: Gaussian blur, additive Gaussian noise, JPEG.

Builds ordered-severity corpora whose severity index defines the ground-truth
quality rank; PSNR against the source is recorded per entry as a sanity check.
Noise is generated from a SplitMix64 stream through Box-Muller in row-major
(y, x, channel) order, so corpora are byte-reproducible for a given seed.
"""

from __future__ import annotations

import io
import json
import math
import shutil
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
import PIL
from PIL import Image

from .errors import DegradeError

_PIL_VERSION = PIL.__version__

PNG_ENCODER_ID = f"pillow-{_PIL_VERSION}-png"
JPEG_ENCODER_ID = f"pillow-{_PIL_VERSION}-jpeg-baseline-420"

#: Default severity ladders; PSNR gaps exceed 2 dB between adjacent levels on
#: natural photos. Overridable by passing an explicit plan.
DEFAULT_BLUR_SIGMAS = (1.0, 2.0, 4.0)
DEFAULT_NOISE_SIGMAS = (5.0, 15.0, 35.0)
DEFAULT_JPEG_QUALITIES = (70, 30, 10)

_SM64_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM64_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_SM64_MIX2 = np.uint64(0x94D049BB133111EB)


class DegradationKind(Enum):
    GAUSSIAN_BLUR = "gaussian_blur"
    GAUSSIAN_NOISE = "gaussian_noise"
    JPEG = "jpeg"


@dataclass(frozen=True)
class DegradationSpec:
    """One corpus perturbation: severity 0 is the identity (clean) transform."""

    kind: DegradationKind
    severity_index: int
    param: float
    seed: int = 0

    def __post_init__(self):
        if self.severity_index < 0:
            raise ValueError("severity_index must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.severity_index == 0:
            if self.param != 0:
                raise ValueError("severity 0 is the identity transform; param must be 0")
            return
        if self.kind is DegradationKind.JPEG:
            if not (float(self.param).is_integer() and 1 <= self.param <= 100):
                raise ValueError(f"JPEG quality must be an integer in 1..100, got {self.param}")
        elif self.param <= 0:
            raise ValueError(f"{self.kind.value} sigma must be positive, got {self.param}")


@dataclass(frozen=True)
class CorpusEntry:
    image_id: str
    source_path: Path
    degraded_path: Path
    spec: DegradationSpec
    psnr_vs_source: float | None


def load_image(path: str | Path) -> np.ndarray:
    """Load an image as uint8 (H, W) grayscale or (H, W, 3) RGB."""
    with Image.open(path) as img:
        if img.mode == "L":
            return np.asarray(img, dtype=np.uint8)
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def _to_pil(image: np.ndarray) -> Image.Image:
    if image.dtype != np.uint8 or image.ndim not in (2, 3):
        raise ValueError("expected a uint8 array of shape (H, W) or (H, W, 3)")
    return Image.fromarray(image)


def encode_png(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    _to_pil(image).save(buf, format="PNG")
    return buf.getvalue()


def save_png(image: np.ndarray, path: str | Path) -> None:
    Path(path).write_bytes(encode_png(image))


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Discrete Gaussian weights with radius ceil(3*sigma), normalized to sum 1."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return weights / weights.sum()


def _convolve_axis(arr: np.ndarray, weights: np.ndarray, axis: int) -> np.ndarray:
    radius = len(weights) // 2
    moved = np.moveaxis(arr, axis, 0)
    pad = [(radius, radius)] + [(0, 0)] * (moved.ndim - 1)
    padded = np.pad(moved, pad, mode="reflect")
    out = np.zeros_like(moved)
    for k, w in enumerate(weights):
        out += w * padded[k:k + moved.shape[0]]
    return np.moveaxis(out, 0, axis)


def apply_gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with reflect padding; dimensions preserved."""
    weights = gaussian_kernel(sigma)
    blurred = image.astype(np.float64)
    blurred = _convolve_axis(blurred, weights, axis=0)
    blurred = _convolve_axis(blurred, weights, axis=1)
    return np.clip(np.rint(blurred), 0, 255).astype(np.uint8)


def splitmix64(seed: int, count: int) -> np.ndarray:
    """The first `count` outputs of a SplitMix64 stream, as uint64."""
    steps = np.arange(1, count + 1, dtype=np.uint64)
    z = np.uint64(seed) + steps * _SM64_GAMMA
    z = (z ^ (z >> np.uint64(30))) * _SM64_MIX1
    z = (z ^ (z >> np.uint64(27))) * _SM64_MIX2
    return z ^ (z >> np.uint64(31))


def standard_normals(seed: int, count: int) -> np.ndarray:
    """Box-Muller normals over a SplitMix64 uniform stream, in stream order."""
    pairs = (count + 1) // 2
    u = (splitmix64(seed, 2 * pairs) >> np.uint64(11)) * 2.0**-53
    u1, u2 = u[0::2], u[1::2]
    radius = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * np.pi * u2
    normals = np.empty(2 * pairs, dtype=np.float64)
    normals[0::2] = radius * np.cos(theta)
    normals[1::2] = radius * np.sin(theta)
    return normals[:count]


def apply_gaussian_noise(image: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Add N(0, sigma^2) per channel per pixel, clamped to [0, 255].

    Variates are consumed in row-major (y, x, channel) order, so output bytes
    depend only on (image, sigma, seed).
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    noise = standard_normals(seed, image.size).reshape(image.shape)
    noisy = image.astype(np.float64) + sigma * noise
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8)


def recompress_jpeg(image: np.ndarray, quality: int) -> np.ndarray:
    """Encode as baseline JPEG (4:2:0) at `quality`, decode back."""
    if not (isinstance(quality, int) and 1 <= quality <= 100):
        raise ValueError(f"JPEG quality must be an integer in 1..100, got {quality}")
    buf = io.BytesIO()
    _to_pil(image).save(
        buf, format="JPEG", quality=quality, subsampling=2, optimize=False, progressive=False
    )
    buf.seek(0)
    with Image.open(buf) as decoded:
        out = np.asarray(decoded.convert("L" if image.ndim == 2 else "RGB"), dtype=np.uint8)
    if out.shape != image.shape:
        raise DegradeError(f"JPEG round-trip changed dimensions: {image.shape} -> {out.shape}")
    return out


def psnr(reference: np.ndarray, test: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB over all channels; inf when identical."""
    if reference.shape != test.shape:
        raise ValueError(f"dimension mismatch: {reference.shape} vs {test.shape}")
    mse = np.mean((reference.astype(np.float64) - test.astype(np.float64)) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def apply_spec(image: np.ndarray, spec: DegradationSpec) -> np.ndarray:
    if spec.severity_index == 0:
        return image.copy()
    if spec.kind is DegradationKind.GAUSSIAN_BLUR:
        return apply_gaussian_blur(image, spec.param)
    if spec.kind is DegradationKind.GAUSSIAN_NOISE:
        return apply_gaussian_noise(image, spec.param, spec.seed)
    return recompress_jpeg(image, int(spec.param))


def default_plan(seed: int = 0) -> list[DegradationSpec]:
    """Clean + three severities for each degradation kind."""
    plan = []
    ladders = [
        (DegradationKind.GAUSSIAN_BLUR, DEFAULT_BLUR_SIGMAS),
        (DegradationKind.GAUSSIAN_NOISE, DEFAULT_NOISE_SIGMAS),
        (DegradationKind.JPEG, DEFAULT_JPEG_QUALITIES),
    ]
    for kind, params in ladders:
        plan.append(DegradationSpec(kind=kind, severity_index=0, param=0.0))
        for severity, param in enumerate(params, start=1):
            spec_seed = seed + severity if kind is DegradationKind.GAUSSIAN_NOISE else 0
            plan.append(DegradationSpec(kind=kind, severity_index=severity,
                                        param=float(param), seed=spec_seed))
    return plan


def single_kind_plan(kind: DegradationKind, seed: int = 0) -> list[DegradationSpec]:
    return [s for s in default_plan(seed) if s.kind is kind]


NAMED_PLANS = {
    "default": default_plan,
    "blur": lambda seed=0: single_kind_plan(DegradationKind.GAUSSIAN_BLUR, seed),
    "noise": lambda seed=0: single_kind_plan(DegradationKind.GAUSSIAN_NOISE, seed),
    "jpeg": lambda seed=0: single_kind_plan(DegradationKind.JPEG, seed),
}


def _validate_plan(plan: list[DegradationSpec]) -> None:
    if not plan:
        raise DegradeError("empty degradation plan")
    by_kind: dict[DegradationKind, list[DegradationSpec]] = {}
    seen = set()
    for spec in plan:
        pair = (spec.kind, spec.severity_index)
        if pair in seen:
            raise DegradeError(f"duplicate plan entry {spec.kind.value} severity {spec.severity_index}")
        seen.add(pair)
        by_kind.setdefault(spec.kind, []).append(spec)
    for kind, specs in by_kind.items():
        ordered = sorted((s for s in specs if s.severity_index > 0),
                         key=lambda s: s.severity_index)
        params = [s.param for s in ordered]
        if kind is DegradationKind.JPEG:
            monotone = all(a > b for a, b in zip(params, params[1:]))
        else:
            monotone = all(a < b for a, b in zip(params, params[1:]))
        if not monotone:
            raise DegradeError(
                f"{kind.value} params must be strictly monotone in severity, got {params}"
            )


def _entry_sort_key(entry: CorpusEntry):
    return (entry.image_id, entry.spec.kind.value, entry.spec.severity_index)


def _sidecar_payload(entry: CorpusEntry) -> dict:
    return {
        "kind": entry.spec.kind.value,
        "severity_index": entry.spec.severity_index,
        "param": entry.spec.param,
        "seed": entry.spec.seed,
        "psnr_vs_source": entry.psnr_vs_source,
        "encoder_id": JPEG_ENCODER_ID if entry.spec.kind is DegradationKind.JPEG
                      else PNG_ENCODER_ID,
    }


def build_degraded_corpus(
    sources: list[str | Path],
    plan: list[DegradationSpec],
    out_dir: str | Path,
) -> list[CorpusEntry]:
    """Apply every plan entry to every source image.

    Writes PNG frames (the JPEG kind stores the recompressed-then-decoded
    frame), one JSON sidecar per degraded entry, and a deterministic
    manifest.json. Severity-0 entries are byte copies of their sources.
    """
    _validate_plan(plan)
    if not sources:
        raise DegradeError("no images")
    stems = [Path(s).stem for s in sources]
    if len(set(stems)) != len(stems):
        raise DegradeError("source image stems must be unique")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    entries: list[CorpusEntry] = []
    for source in sources:
        source = Path(source)
        image_id = source.stem
        image = load_image(source)
        for spec in plan:
            name = f"{image_id}__{spec.kind.value}_s{spec.severity_index}.png"
            degraded_path = out / name
            if spec.severity_index == 0:
                shutil.copyfile(source, degraded_path)
                entries.append(CorpusEntry(image_id, source, degraded_path, spec, None))
                continue
            degraded = apply_spec(image, spec)
            value = psnr(image, degraded)
            if not math.isfinite(value):
                raise DegradeError(
                    f"{name}: severity {spec.severity_index} left the image identical; "
                    f"the quality rank would be meaningless"
                )
            save_png(degraded, degraded_path)
            entry = CorpusEntry(image_id, source, degraded_path, spec, value)
            sidecar_path = degraded_path.with_name(degraded_path.name + ".json")
            sidecar_path.write_text(
                json.dumps(_sidecar_payload(entry), indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
            entries.append(entry)

    entries.sort(key=_entry_sort_key)
    manifest = {
        "entries": [
            {
                "image_id": e.image_id,
                "source_path": str(e.source_path),
                "degraded_path": e.degraded_path.name,
                **_sidecar_payload(e),
            }
            for e in entries
        ]
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return entries
