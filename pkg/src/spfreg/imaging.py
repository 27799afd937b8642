"""Grayscale images, Gaussian noise, PSNR, box projection and PGM I/O."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

__all__ = [
    "ImageGray",
    "NoiseSpec",
    "PGMError",
    "PGMHeaderError",
    "PGMDepthError",
    "PGMTruncatedError",
    "PSNR_CAP",
    "add_gaussian_noise",
    "psnr",
    "project_box",
    "read_pgm",
    "write_pgm",
    "image_dir",
    "load_test_image",
]

PSNR_CAP = 99.0

PathLike = Union[str, os.PathLike]


@dataclass(frozen=True)
class ImageGray:
    """Grayscale image stored as a float64 ``(rows, cols)`` array.

    Vectors exchanged with the solvers use column-major order, which for a
    square image of side ``N`` gives the ``N^2`` layout the gradient operator
    expects.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise ValueError("pixels must be a nonempty 2-D array")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def shape(self) -> tuple:
        return self.pixels.shape

    @property
    def is_square(self) -> bool:
        return self.shape[0] == self.shape[1]

    @property
    def n_side(self) -> int:
        if not self.is_square:
            raise ValueError(f"image of shape {self.shape} is not square")
        return self.shape[0]

    def vectorize(self) -> np.ndarray:
        """Stack the columns into one vector."""
        return self.pixels.ravel(order="F").copy()

    @classmethod
    def from_vector(cls, v, shape) -> "ImageGray":
        """Inverse of :meth:`vectorize`; an int ``shape`` means square."""
        if isinstance(shape, (int, np.integer)):
            shape = (int(shape), int(shape))
        v = np.asarray(v, dtype=np.float64)
        if v.size != shape[0] * shape[1]:
            raise ValueError(f"vector of length {v.size} does not fit shape {shape}")
        return cls(v.reshape(shape, order="F"))


@dataclass(frozen=True)
class NoiseSpec:
    """White Gaussian noise of standard deviation ``eta`` drawn with ``seed``."""

    eta: float
    seed: int = 0

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")


def add_gaussian_noise(img: ImageGray, spec: NoiseSpec) -> ImageGray:
    """Return ``img + eps`` with ``eps ~ N(0, eta^2)`` i.i.d., not clipped.

    Samples come from numpy's PCG64 generator (ziggurat normals) seeded with
    ``spec.seed``, drawn in row-major pixel order; the result is bit
    reproducible for a given (image shape, eta, seed).
    """
    if spec.eta == 0:
        return ImageGray(img.pixels)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    eps = rng.standard_normal(img.shape)
    return ImageGray(img.pixels + spec.eta * eps)


def psnr(reference: ImageGray, candidate: ImageGray, peak: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB, ``20 log10(peak / RMSE)``.

    RMSE is the root mean squared pixel error. Identical images return
    :data:`PSNR_CAP`.
    """
    a = reference.pixels if isinstance(reference, ImageGray) else np.asarray(reference, float)
    b = candidate.pixels if isinstance(candidate, ImageGray) else np.asarray(candidate, float)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    rmse = float(np.sqrt(np.mean((a - b) ** 2)))
    if rmse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 20.0 * np.log10(peak / rmse))


def project_box(x, lo: float, hi: float) -> np.ndarray:
    """Componentwise clamp onto ``[lo, hi]``."""
    if lo > hi:
        raise ValueError(f"empty box: lo={lo} > hi={hi}")
    return np.clip(np.asarray(x, dtype=float), lo, hi)


# ---------------------------------------------------------------------------
# PGM (P5, 8 bit)
# ---------------------------------------------------------------------------


class PGMError(ValueError):
    pass


class PGMHeaderError(PGMError):
    pass


class PGMDepthError(PGMError):
    pass


class PGMTruncatedError(PGMError):
    pass


_TOKEN = re.compile(rb"(?:\s|#[^\n\r]*[\n\r])*([^\s#]+)")


def _parse_header(data: bytes):
    pos = 0
    fields = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise PGMHeaderError("malformed header")
        fields.append(m.group(1))
        pos = m.end()
    if fields[0] != b"P5":
        raise PGMHeaderError(f"malformed header: magic {fields[0]!r} is not P5")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise PGMHeaderError("malformed header: non-integer field") from None
    if width <= 0 or height <= 0:
        raise PGMHeaderError("malformed header: nonpositive size")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise PGMHeaderError("malformed header: missing separator before raster")
    return width, height, maxval, pos + 1


def read_pgm(path: PathLike) -> ImageGray:
    """Read a binary 8-bit PGM into an image with values in ``[0, 255]``.

    Raises
    ------
    PGMHeaderError
        Bad magic number or header fields.
    PGMDepthError
        ``maxval`` other than 255 ("unsupported depth").
    PGMTruncatedError
        Fewer raster bytes than ``width * height``.
    """
    data = Path(path).read_bytes()
    width, height, maxval, start = _parse_header(data)
    if maxval != 255:
        raise PGMDepthError(f"unsupported depth: maxval {maxval}")
    raster = data[start:start + width * height]
    if len(raster) < width * height:
        raise PGMTruncatedError(
            f"truncated payload: expected {width * height} bytes, got {len(raster)}"
        )
    px = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return ImageGray(px.astype(np.float64))


def write_pgm(img: ImageGray, path: PathLike) -> None:
    """Write ``img`` as binary 8-bit PGM, clamping to [0, 255] and rounding."""
    px = np.clip(np.rint(img.pixels), 0, 255).astype(np.uint8)
    height, width = px.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + px.tobytes())


# ---------------------------------------------------------------------------
# standard test images
# ---------------------------------------------------------------------------

_IMAGE_SUFFIXES = (".pgm", ".png", ".tif", ".tiff", ".bmp")


def image_dir() -> Path:
    """Directory holding the standard test images.

    ``$SPFREG_IMAGE_DIR`` if set, otherwise ``data/`` at the repository root.
    """
    env = os.environ.get("SPFREG_IMAGE_DIR")
    if env:
        return Path(env)
    return Path(__file__).resolve().parents[2] / "data"


def load_test_image(name: str, directory: Optional[PathLike] = None) -> ImageGray:
    """Load ``name`` (e.g. ``"cameraman"``) from the test image directory.

    PGM files are read natively; other formats go through Pillow, converted
    to 8-bit grayscale.
    """
    directory = Path(directory) if directory is not None else image_dir()
    for suffix in _IMAGE_SUFFIXES:
        path = directory / f"{name}{suffix}"
        if path.exists():
            break
    else:
        raise FileNotFoundError(
            f"test image {name!r} not found in {directory}; "
            "run demos/fetch_test_images.py or supply it as <name>.pgm"
        )
    if path.suffix == ".pgm":
        return read_pgm(path)
    from PIL import Image

    with Image.open(path) as im:
        return ImageGray(np.asarray(im.convert("L"), dtype=np.float64))
