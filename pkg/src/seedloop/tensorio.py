"""Raster and tensor file I/O plus the synthetic scene generator.

Supported formats: binary PPM (P6, maxval 255) for RGB images, binary PGM
(P5, maxval 255) for label maps, and a tiny "DFNT" container for numeric
tensors exchanged between CLI stages.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    DimOverflow,
    InvalidParams,
    IoFailure,
    MalformedHeader,
    TruncatedPayload,
    UnsupportedMaxval,
    UnsupportedVersion,
)

IGNORE = 255  # label value excluded from supervision and evaluation


@dataclass(frozen=True)
class RasterImage:
    """8-bit RGB image; `data` has shape (height, width, 3)."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidParams("image dimensions must be >= 1")
        if self.data.shape != (self.height, self.width, 3):
            raise InvalidParams("data shape does not match width/height")
        if self.data.dtype != np.uint8:
            raise InvalidParams("image data must be uint8")


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel category ids in 0..C-1 with 255 reserved as ignore."""

    width: int
    height: int
    labels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidParams("label map dimensions must be >= 1")
        if self.labels.shape != (self.height, self.width):
            raise InvalidParams("labels shape does not match width/height")
        if self.labels.dtype != np.uint8:
            raise InvalidParams("labels must be uint8")


def _read_pnm_header(raw: bytes, magic: bytes):
    """Parse a PNM header and return (width, height, maxval, payload offset)."""
    if raw[:2] != magic:
        raise MalformedHeader(f"expected {magic!r} magic, got {raw[:2]!r}")
    pos = 2
    fields = []
    while len(fields) < 3:
        # skip whitespace and '#' comments between header tokens
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        token = raw[start:pos]
        if not token.isdigit():
            raise MalformedHeader(f"bad header token {token!r}")
        fields.append(int(token))
    if pos >= len(raw):
        raise MalformedHeader("header ends before payload")
    pos += 1  # single whitespace byte separates maxval from payload
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MalformedHeader("non-positive dimensions")
    return width, height, maxval, pos


def load_ppm(path) -> RasterImage:
    """Load a binary P6 PPM with maxval 255."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise IoFailure(str(e)) from e
    width, height, maxval, pos = _read_pnm_header(raw, b"P6")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} unsupported, need 255")
    need = width * height * 3
    payload = raw[pos : pos + need]
    if len(payload) < need:
        raise TruncatedPayload(f"expected {need} payload bytes, got {len(payload)}")
    data = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return RasterImage(width, height, data.copy())


def save_ppm(image: RasterImage, path) -> None:
    """Write a binary P6 PPM with maxval 255."""
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(image.data.tobytes())
    except OSError as e:
        raise IoFailure(str(e)) from e


def load_label_pgm(path) -> LabelMap:
    """Load a binary P5 PGM with maxval 255 as a label map."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise IoFailure(str(e)) from e
    width, height, maxval, pos = _read_pnm_header(raw, b"P5")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} unsupported, need 255")
    need = width * height
    payload = raw[pos : pos + need]
    if len(payload) < need:
        raise TruncatedPayload(f"expected {need} payload bytes, got {len(payload)}")
    labels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return LabelMap(width, height, labels.copy())


def save_label_pgm(lmap: LabelMap, path) -> None:
    """Write a label map as binary P5 PGM with maxval 255."""
    header = f"P5\n{lmap.width} {lmap.height}\n255\n".encode("ascii")
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(lmap.labels.tobytes())
    except OSError as e:
        raise IoFailure(str(e)) from e


# DFNT tensor container: magic "DFNT", u8 version=1, u8 dtype code,
# u8 ndim, ndim little-endian u32 dims, little-endian row-major payload.
_DFNT_MAGIC = b"DFNT"
_DTYPE_CODES = {np.dtype("<f4"): 1, np.dtype("<u2"): 2, np.dtype("u1"): 3}
_CODE_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<u2"), 3: np.dtype("u1")}


def save_tensor(arr: np.ndarray, path) -> None:
    """Serialize a float32/uint16/uint8 array, ndim 1..4, bit-exactly."""
    a = np.ascontiguousarray(arr)
    if a.dtype == np.float32:
        a = a.astype("<f4", copy=False)
        if not np.isfinite(a).all():
            raise InvalidParams("f32 tensor payload must be finite")
    elif a.dtype == np.uint16:
        a = a.astype("<u2", copy=False)
    elif a.dtype != np.uint8:
        raise InvalidParams(f"unsupported tensor dtype {a.dtype}")
    if not 1 <= a.ndim <= 4:
        raise InvalidParams(f"tensor ndim must be 1..4, got {a.ndim}")
    if any(d > 0xFFFFFFFF for d in a.shape):
        raise DimOverflow("dimension exceeds u32")
    code = _DTYPE_CODES[np.dtype(a.dtype.str.replace(">", "<"))]
    try:
        with open(path, "wb") as f:
            f.write(_DFNT_MAGIC)
            f.write(struct.pack("<BBB", 1, code, a.ndim))
            f.write(struct.pack(f"<{a.ndim}I", *a.shape))
            f.write(a.tobytes())
    except OSError as e:
        raise IoFailure(str(e)) from e


def load_tensor(path) -> np.ndarray:
    """Load a DFNT tensor; inverse of :func:`save_tensor`."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise IoFailure(str(e)) from e
    if raw[:4] != _DFNT_MAGIC:
        raise BadMagic(f"bad magic {raw[:4]!r}")
    if len(raw) < 7:
        raise TruncatedPayload("header truncated")
    version, code, ndim = struct.unpack("<BBB", raw[4:7])
    if version != 1:
        raise UnsupportedVersion(f"version {version}")
    if code not in _CODE_DTYPES:
        raise MalformedHeader(f"unknown dtype code {code}")
    if not 1 <= ndim <= 4:
        raise MalformedHeader(f"ndim {ndim} out of range")
    if len(raw) < 7 + 4 * ndim:
        raise TruncatedPayload("dims truncated")
    dims = struct.unpack(f"<{ndim}I", raw[7 : 7 + 4 * ndim])
    dtype = _CODE_DTYPES[code]
    need = int(np.prod(dims)) * dtype.itemsize
    payload = raw[7 + 4 * ndim :]
    if len(payload) < need:
        raise TruncatedPayload(f"expected {need} payload bytes, got {len(payload)}")
    return np.frombuffer(payload[:need], dtype=dtype).reshape(dims).copy()


@dataclass(frozen=True)
class SynthParams:
    """Knobs for the synthetic scene generator."""

    width: int = 64
    height: int = 64
    max_shapes: int = 3
    seed_area_fraction: float = 0.10
    noise_sigma: float = 6.0
    margin: int = 6  # keeps shapes clear of the background seed ring

    def __post_init__(self):
        if self.width < 16 or self.height < 16:
            raise InvalidParams("scene must be at least 16x16")
        if not 1 <= self.max_shapes <= 3:
            raise InvalidParams("max_shapes must be in 1..3")
        if not 0 < self.seed_area_fraction < 1:
            raise InvalidParams("seed_area_fraction must be in (0,1)")


# base colors per category: background plus three foreground classes
_BASE_COLORS = np.array(
    [[70, 90, 75], [200, 60, 50], [60, 180, 70], [60, 80, 200]], dtype=np.float64
)


def _shape_mask(kind, rng, h, w, margin):
    """Return a boolean mask for one random filled shape, or None if degenerate."""
    yy, xx = np.mgrid[0:h, 0:w]
    if kind == 0:  # rectangle
        sw = int(rng.integers(w // 6, w // 3))
        sh = int(rng.integers(h // 6, h // 3))
        x0 = int(rng.integers(margin, w - margin - sw))
        y0 = int(rng.integers(margin, h - margin - sh))
        return (xx >= x0) & (xx < x0 + sw) & (yy >= y0) & (yy < y0 + sh)
    if kind == 1:  # ellipse
        rx = int(rng.integers(w // 10, w // 6))
        ry = int(rng.integers(h // 10, h // 6))
        cx = int(rng.integers(margin + rx, w - margin - rx))
        cy = int(rng.integers(margin + ry, h - margin - ry))
        return ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
    # triangle: axis-aligned right triangle inside a random box
    sw = int(rng.integers(w // 5, w // 3))
    sh = int(rng.integers(h // 5, h // 3))
    x0 = int(rng.integers(margin, w - margin - sw))
    y0 = int(rng.integers(margin, h - margin - sh))
    inside_box = (xx >= x0) & (xx < x0 + sw) & (yy >= y0) & (yy < y0 + sh)
    return inside_box & ((xx - x0) * sh + (yy - y0) * sw <= sw * sh)


def _central_seed_blob(mask, frac):
    """Pixels of `mask` nearest its centroid, covering about `frac` of its area."""
    ys, xs = np.nonzero(mask)
    cy, cx = ys.mean(), xs.mean()
    d2 = (ys - cy) ** 2 + (xs - cx) ** 2
    n_keep = max(1, int(round(frac * ys.size)))
    order = np.lexsort((xs, ys, d2))  # deterministic under distance ties
    keep = order[:n_keep]
    return ys[keep], xs[keep]


def gen_synthetic(rng_seed: int, count: int, params: SynthParams = SynthParams()):
    """Generate `count` scenes of (image, ground truth, sparse initial seeds).

    Each scene has a textured background (category 0) and 1-3 non-overlapping
    shapes in distinct foreground categories. Initial seeds label a small
    central blob per shape plus a sparse background ring; everything else is
    ignore (255). Deterministic for a fixed rng_seed.
    """
    if count < 1:
        raise InvalidParams("count must be >= 1")
    rng = np.random.default_rng(rng_seed)
    h, w = params.height, params.width
    scenes = []
    for _ in range(count):
        gt = np.zeros((h, w), dtype=np.uint8)
        seeds = np.full((h, w), IGNORE, dtype=np.uint8)

        # textured background: base color plus low-frequency sinusoid
        yy, xx = np.mgrid[0:h, 0:w]
        phase = rng.uniform(0, 2 * np.pi)
        tex = 12.0 * np.sin(2 * np.pi * xx / 17 + phase) * np.cos(2 * np.pi * yy / 13)
        img = _BASE_COLORS[0][None, None, :] + tex[:, :, None]

        n_shapes = int(rng.integers(1, params.max_shapes + 1))
        occupied = np.zeros((h, w), dtype=bool)
        categories = rng.permutation(np.arange(1, 4))[:n_shapes]
        for cat in categories:
            mask = None
            for _attempt in range(30):
                kind = int(rng.integers(0, 3))
                cand = _shape_mask(kind, rng, h, w, params.margin)
                if cand.sum() >= 20 and not (cand & occupied).any():
                    mask = cand
                    break
            if mask is None:
                continue
            occupied |= mask
            gt[mask] = cat
            jitter = rng.normal(0, 12, size=3)
            img[mask] = _BASE_COLORS[cat] + jitter
            sy, sx = _central_seed_blob(mask, params.seed_area_fraction)
            seeds[sy, sx] = cat

        img = img + rng.normal(0, params.noise_sigma, size=img.shape)
        img = np.clip(np.rint(img), 0, 255).astype(np.uint8)

        # sparse background ring: every 4th border-band pixel that is background
        ring = np.zeros((h, w), dtype=bool)
        ring[1:3, :] = True
        ring[-3:-1, :] = True
        ring[:, 1:3] = True
        ring[:, -3:-1] = True
        ring &= gt == 0
        ring &= ((yy + xx) % 4) == 0
        seeds[ring] = 0

        scenes.append(
            (
                RasterImage(w, h, img),
                LabelMap(w, h, gt),
                LabelMap(w, h, seeds),
            )
        )
    return scenes
