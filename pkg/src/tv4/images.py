"""Grayscale image files and synthetic test images.

Reads 8-bit PGM (``P2`` ASCII and ``P5`` binary, parsed here) and 8-bit
grayscale PNG (decoded with Pillow). Pixel values are mapped to ``[0, 1]`` by
dividing by 255. Writing clamps to ``[0, 1]``, quantises with
``round(255 v)`` and picks the format from the file extension.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .grid import as_image

__all__ = [
    "ImageFormatError",
    "read_image",
    "write_image",
    "quantize",
    "synth_fixture",
    "rhombus",
    "add_gaussian_noise",
    "FIXTURES",
]


class ImageFormatError(ValueError):
    """Unsupported, corrupt or truncated image file."""


_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _pgm_tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last one.
    """
    tokens = []
    i, n = 0, len(data)
    while len(tokens) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        if i >= n:
            raise ImageFormatError("truncated PGM header")
        j = i
        while j < n and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
            j += 1
        tokens.append(data[i:j])
        i = j
    if i >= n or not data[i:i + 1].isspace():
        raise ImageFormatError("corrupt PGM header: missing separator before raster")
    return tokens, i + 1


def _read_pgm(data: bytes) -> np.ndarray:
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError(f"not a grayscale PGM (magic {magic!r})")
    try:
        tokens, offset = _pgm_tokens(data, 4)
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        if isinstance(exc, ImageFormatError):
            raise
        raise ImageFormatError(f"corrupt PGM header: {exc}") from None
    if width < 2 or height < 2:
        raise ImageFormatError(f"image must be at least 2x2, got {height}x{width}")
    if maxval > 255:
        raise ImageFormatError(f"only 8-bit PGM is supported (maxval {maxval})")
    if maxval < 1:
        raise ImageFormatError(f"corrupt PGM header: maxval {maxval}")
    npx = width * height
    if magic == b"P5":
        raw = data[offset:offset + npx]
        if len(raw) < npx:
            raise ImageFormatError(f"truncated PGM raster: {len(raw)} of {npx} bytes")
        vals = np.frombuffer(raw, dtype=np.uint8).astype(np.float64)
    else:
        parts = data[offset:].split()
        if len(parts) < npx:
            raise ImageFormatError(f"truncated PGM raster: {len(parts)} of {npx} samples")
        try:
            vals = np.array([int(p) for p in parts[:npx]], dtype=np.float64)
        except ValueError:
            raise ImageFormatError("non-integer sample in ASCII PGM") from None
    if vals.max(initial=0) > maxval:
        raise ImageFormatError("sample exceeds maxval")
    # 8-bit convention: values in [0, 1] are value / 255
    return vals.reshape(height, width) * (255.0 / maxval) / 255.0


def _read_png(path) -> np.ndarray:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            mode = im.mode
            if mode not in ("L", "1"):
                raise ImageFormatError(f"only 8-bit grayscale PNG is supported (mode {mode})")
            im.load()
            arr = np.asarray(im.convert("L"), dtype=np.float64)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ImageFormatError(f"corrupt PNG: {exc}") from None
    if min(arr.shape) < 2:
        raise ImageFormatError(f"image must be at least 2x2, got {arr.shape[0]}x{arr.shape[1]}")
    return arr / 255.0


def read_image(path) -> np.ndarray:
    """Load an 8-bit grayscale PGM or PNG as a float image in ``[0, 1]``.

    Raises
    ------
    ImageFormatError
        Colour, 16-bit, corrupt or truncated files, or images below 2x2.
    """
    path = Path(path)
    data = path.read_bytes()
    if data[:8] == _PNG_MAGIC:
        return _read_png(path)
    if data[:1] == b"P":
        return _read_pgm(data)
    raise ImageFormatError(f"{path}: unrecognised image format")


def quantize(x) -> np.ndarray:
    """Clamp to ``[0, 1]`` and map to 8-bit codes ``round(255 v)``."""
    x = np.asarray(x, dtype=np.float64)
    return np.rint(np.clip(x, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_image(x, path) -> None:
    """Write ``x`` as binary PGM (``.pgm``/``.pnm``) or PNG (``.png``).

    The file is written to a temporary sibling and renamed into place.
    """
    x = as_image(x)
    path = Path(path)
    ext = path.suffix.lower()
    if ext not in (".pgm", ".pnm", ".png"):
        raise ImageFormatError(f"cannot infer format from extension {ext!r}; use .pgm or .png")
    q = quantize(x)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=ext)
    try:
        with os.fdopen(fd, "wb") as fh:
            if ext == ".png":
                from PIL import Image

                Image.fromarray(q, mode="L").save(fh, format="PNG")
            else:
                fh.write(b"P5\n%d %d\n255\n" % (q.shape[1], q.shape[0]))
                fh.write(q.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- synthetic images ------------------------------------------------------

def rhombus(n: int = 92, radius: float | None = None, supersample: int = 8) -> np.ndarray:
    """White 45-degree square on black, centred, with area-weighted edges.

    A pixel's value is the fraction of its area inside
    ``|i - c| + |j - c| <= radius`` with ``c = (n - 1) / 2``, estimated on a
    ``supersample x supersample`` subgrid. ``radius`` defaults to
    ``round(0.3 n)``. The image is symmetric under both flips and transposition.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if radius is None:
        radius = round(0.3 * n)
    s = int(supersample)
    sub = (np.arange(n * s) + 0.5) / s - 0.5 - (n - 1) / 2
    inside = (np.abs(sub)[:, None] + np.abs(sub)[None, :]) <= radius
    return inside.reshape(n, s, n, s).mean(axis=(1, 3))


def _stripes(n, rng):
    period = 8
    cols = (np.arange(n) // (period // 2)) % 2
    return np.tile(cols.astype(np.float64) * 0.8 + 0.1, (n, 1))


def _checker(n, rng):
    b = 8
    ii, jj = np.indices((n, n))
    return (((ii // b) + (jj // b)) % 2).astype(np.float64) * 0.8 + 0.1


def _piecewise(n, rng):
    """A few flat regions: background, rectangle, disc and a triangle."""
    x = np.full((n, n), 0.2)
    ii, jj = np.indices((n, n)) / n
    x[(ii > 0.12) & (ii < 0.45) & (jj > 0.1) & (jj < 0.55)] = 0.75
    x[(ii - 0.68) ** 2 + (jj - 0.62) ** 2 < 0.2**2] = 0.95
    x[(ii > 0.55) & (jj < 0.4) & (jj < ii - 0.5)] = 0.5
    # one seed-dependent offset so that different seeds give different images
    x[:, :] += 0.05 * rng.uniform(-1, 1)
    return x


FIXTURES = ("rhombus", "stripes", "checker", "piecewise")


def synth_fixture(kind: str, n: int = 64, seed: int = 0) -> np.ndarray:
    """Deterministic synthetic image.

    Parameters
    ----------
    kind : {"rhombus", "stripes", "checker", "piecewise"}
        ``stripes`` has constant columns (vertical stripes of width 4).
    n : int
        Side length.
    seed : int
        Only ``piecewise`` depends on it.
    """
    rng = np.random.default_rng(seed)
    if kind == "rhombus":
        return rhombus(n)
    makers = {"stripes": _stripes, "checker": _checker, "piecewise": _piecewise}
    if kind not in makers:
        raise ValueError(f"unknown fixture {kind!r}; choose from {FIXTURES}")
    if n < 2:
        raise ValueError("n must be at least 2")
    return makers[kind](n, rng)


def add_gaussian_noise(x, sigma: float, seed: int = 0) -> np.ndarray:
    """``x`` plus i.i.d. ``N(0, sigma^2)`` noise; not clamped."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    if sigma == 0:
        return x.copy()
    return x + np.random.default_rng(seed).normal(0.0, sigma, size=x.shape)
