"""Image decoding, preprocessing, and patch access.

All operations are pure functions on immutable data: inputs are never
mutated and outputs are freshly allocated, so concurrent use is safe.
Pixel data is held as float64 in [0, 1]. Mean/std normalization is
deliberately NOT applied here; model backends normalize their own inputs,
while pixel-level metrics and patch similarity consume the raw values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import (
    CorruptImageError,
    IndexOutOfRangeError,
    InvalidSpecError,
    UnsupportedFormatError,
)

SUPPORTED_FORMATS = ("PNG", "JPEG")

# ITU-R BT.601 luma weights; single definition shared by every consumer
# that needs a one-channel view (structural metrics, fixture attention).
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)

_MAGIC = {
    b"\x89PNG\r\n\x1a\n": "PNG",
    b"\xff\xd8": "JPEG",
}


@dataclass(frozen=True)
class ImageTensor:
    """Decoded image: height x width x 3 real values in [0, 1], row-major."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) pixel data, got shape {np.shape(self.data)}")
        if data.shape[0] == 0 or data.shape[1] == 0:
            raise ValueError("empty image")
        if not np.isfinite(data).all():
            raise ValueError("pixel values must be finite")
        if float(data.min()) < 0.0 or float(data.max()) > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class PreprocessSpec:
    """Resize target and normalization constants for the model input path.

    ``channel_mean``/``channel_std`` are recorded here for configuration
    round-trips but applied only by backends; resize output stays raw.
    """

    target_size: int = 224
    resize_filter: str = "bilinear"
    channel_mean: tuple[float, float, float] = (0.485, 0.456, 0.406)
    channel_std: tuple[float, float, float] = (0.229, 0.224, 0.225)

    def __post_init__(self) -> None:
        if self.target_size <= 0:
            raise InvalidSpecError(f"target_size must be positive, got {self.target_size}")
        if self.resize_filter != "bilinear":
            raise InvalidSpecError(f"unsupported resize filter {self.resize_filter!r}")
        if len(self.channel_mean) != 3 or len(self.channel_std) != 3:
            raise InvalidSpecError("channel_mean and channel_std must each hold 3 values")
        if any(s <= 0 for s in self.channel_std):
            raise InvalidSpecError("channel_std entries must be strictly positive")


@dataclass(frozen=True)
class PatchGrid:
    """Square grid of non-overlapping patches over a square image."""

    patch_size: int = 16
    patches_per_side: int = 14

    def __post_init__(self) -> None:
        if self.patch_size < 1 or self.patches_per_side < 1:
            raise InvalidSpecError("patch_size and patches_per_side must be >= 1")

    @classmethod
    def for_image_size(cls, image_size: int, patch_size: int = 16) -> "PatchGrid":
        if patch_size < 1 or image_size < 1 or image_size % patch_size != 0:
            raise InvalidSpecError(
                f"image size {image_size} is not divisible by patch size {patch_size}"
            )
        return cls(patch_size=patch_size, patches_per_side=image_size // patch_size)

    @property
    def patch_count(self) -> int:
        return self.patches_per_side ** 2

    @property
    def image_size(self) -> int:
        return self.patches_per_side * self.patch_size


def decode_image(path: str) -> ImageTensor:
    """Decode an 8-bit PNG or JPEG file into an ImageTensor.

    Integer channels are scaled into [0, 1] by division by 255. Alpha
    channels are discarded; palette images are expanded to RGB.

    Raises:
        FileNotFoundError: the path does not exist.
        UnsupportedFormatError: the file is neither PNG nor JPEG.
        CorruptImageError: the file has a known signature but fails to parse.
    """
    with open(path, "rb") as fh:
        head = fh.read(8)
    signature = next((fmt for magic, fmt in _MAGIC.items() if head.startswith(magic)), None)
    try:
        with Image.open(path) as im:
            fmt = im.format
            if fmt not in SUPPORTED_FORMATS:
                raise UnsupportedFormatError(f"{path}: format {fmt!r} is not PNG or JPEG")
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float64)
    except UnsupportedFormatError:
        raise
    except Exception as exc:
        if signature is not None:
            raise CorruptImageError(f"{path}: cannot decode {signature} data: {exc}") from exc
        raise UnsupportedFormatError(f"{path}: unrecognized image format") from exc
    return ImageTensor(arr / 255.0)


def save_image(img: ImageTensor, path: str) -> None:
    """Write an ImageTensor as an 8-bit image; format inferred from suffix."""
    quantized = np.rint(img.data * 255.0).astype(np.uint8)
    Image.fromarray(quantized, mode="RGB").save(path)


def resize(img: ImageTensor, spec: PreprocessSpec) -> ImageTensor:
    """Resize to spec.target_size squared with bilinear interpolation.

    Sampling uses the half-pixel convention with edge clamping, so a
    same-size resize is an exact copy and constant images stay constant
    bitwise. Values remain in [0, 1].
    """
    out = spec.target_size
    data = img.data
    if img.height == out and img.width == out:
        return ImageTensor(data.copy())
    resized = _bilinear(data, out, out)
    return ImageTensor(np.clip(resized, 0.0, 1.0))


def _bilinear(data: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = data.shape[:2]
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    # lerp as v0 + f*(v1 - v0) so equal neighbors reproduce exactly
    top = data[y0][:, x0] + fx * (data[y0][:, x1] - data[y0][:, x0])
    bottom = data[y1][:, x0] + fx * (data[y1][:, x1] - data[y1][:, x0])
    return top + fy * (bottom - top)


def extract_pixel_patch(img: ImageTensor, grid: PatchGrid, index: int) -> np.ndarray:
    """Return raw pixel values of one grid patch as a flat vector.

    Values are read from the raw [0, 1] image (never mean/std-normalized),
    row-major within the patch with the channel axis fastest, giving
    patch_size**2 * 3 entries. Patch ``index`` addresses row-major grid
    cells: row = index // patches_per_side, col = index % patches_per_side.
    """
    if not 0 <= index < grid.patch_count:
        raise IndexOutOfRangeError(f"patch index {index} outside grid of {grid.patch_count}")
    if img.height != grid.image_size or img.width != grid.image_size:
        raise InvalidSpecError(
            f"image is {img.height}x{img.width} but grid covers "
            f"{grid.image_size}x{grid.image_size}"
        )
    ps = grid.patch_size
    row, col = divmod(index, grid.patches_per_side)
    block = img.data[row * ps:(row + 1) * ps, col * ps:(col + 1) * ps, :]
    return np.ascontiguousarray(block).reshape(-1)


def patch_matrix(img: ImageTensor, grid: PatchGrid) -> np.ndarray:
    """Stack all patches into a (patch_count, patch_size**2 * 3) matrix.

    Row i equals extract_pixel_patch(img, grid, i); concatenating rows in
    index order tiles the image exactly once.
    """
    if img.height != grid.image_size or img.width != grid.image_size:
        raise InvalidSpecError(
            f"image is {img.height}x{img.width} but grid covers "
            f"{grid.image_size}x{grid.image_size}"
        )
    ps, n = grid.patch_size, grid.patches_per_side
    blocks = img.data.reshape(n, ps, n, ps, 3).transpose(0, 2, 1, 3, 4)
    return np.ascontiguousarray(blocks).reshape(grid.patch_count, ps * ps * 3)


def luminance(img: ImageTensor) -> np.ndarray:
    """BT.601 luma plane of the image, shape (H, W), values in [0, 1]."""
    return img.data @ _LUMA_WEIGHTS
