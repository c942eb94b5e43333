"""Two-class image datasets: synthetic wing/tumour analogs, netpbm ingestion, stratified splits.

Class 0 is "no tumour", class 1 is "tumour".
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core_math import Prng, derive_seed
from .errors import ImageFormatError, ParameterError, ShapeError, StratificationError


@dataclass
class Dataset:
    images: np.ndarray  # [n, channels, h, w], values in [0, 1]
    labels: np.ndarray  # [n], 0/1
    ids: np.ndarray = None  # index of each sample in the source dataset

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise ShapeError(f"images must be [n, channels, h, w], got {self.images.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ShapeError("image count and label count differ")
        if self.labels.size and not np.isin(self.labels, (0, 1)).all():
            raise ParameterError("labels must be 0 or 1")
        if self.ids is None:
            self.ids = np.arange(len(self.labels))
        self.ids = np.asarray(self.ids, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.labels)

    def flat(self) -> np.ndarray:
        return self.images.reshape(len(self), -1)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.images[idx], self.labels[idx], self.ids[idx])

    def class_counts(self) -> tuple[int, int]:
        return int(np.sum(self.labels == 0)), int(np.sum(self.labels == 1))


# --- synthetic generator -------------------------------------------------

@dataclass(frozen=True)
class SynthSpec:
    n_class0: int = 139
    n_class1: int = 76
    side: int = 32
    noise_std: float = 0.15
    seed: int = 2023
    speckle_intensity: float = 0.45
    label_flip_rate: float = 0.0

    def __post_init__(self):
        if self.n_class0 < 1 or self.n_class1 < 1:
            raise ParameterError("class counts must be >= 1")
        if self.side < 8:
            raise ParameterError("side must be >= 8 pixels")
        if self.noise_std < 0 or not 0 <= self.label_flip_rate <= 1:
            raise ParameterError("noise_std must be >= 0 and label_flip_rate in [0, 1]")


@dataclass(frozen=True)
class WingParams:
    cx: float
    cy: float
    ax: float
    ay: float
    angle: float
    brightness: float
    speckles: tuple = ()  # (x, y, radius) disks


def draw_wing_params(prng: Prng, side: int, tumour: bool) -> WingParams:
    u = prng.uniform_array(6)
    c = side / 2
    cx, cy = c + (u[0] - 0.5) * side / 16, c + (u[1] - 0.5) * side / 16
    ax = side * (0.28 + 0.05 * u[2])
    ay = side * (0.17 + 0.03 * u[3])
    angle = math.pi * u[4]
    brightness = 0.5 + 0.06 * u[5]
    speckles = []
    if tumour:
        count = int(prng.integers(3, 9, 1)[0])
        for _ in range(count):
            r, theta, rad = prng.uniform_array(3)
            # place inside the ellipse (radius fraction <= 0.75)
            rr = 0.75 * math.sqrt(r)
            ex, ey = rr * ax * math.cos(2 * math.pi * theta), rr * ay * math.sin(2 * math.pi * theta)
            x = cx + ex * math.cos(angle) - ey * math.sin(angle)
            y = cy + ex * math.sin(angle) + ey * math.cos(angle)
            speckles.append((x, y, side / 32 * (1.3 + 1.0 * rad)))
    return WingParams(cx, cy, ax, ay, angle, brightness, tuple(speckles))


def _grid(side: int):
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    return xx + 0.5, yy + 0.5


def speckle_mask(params: WingParams, side: int) -> np.ndarray:
    xx, yy = _grid(side)
    mask = np.zeros((side, side), dtype=bool)
    for x, y, rad in params.speckles:
        mask |= (xx - x) ** 2 + (yy - y) ** 2 <= rad**2
    return mask


def render_wing(params: WingParams, side: int, speckle_intensity: float, with_speckles: bool = True) -> np.ndarray:
    """Noise-free [side, side] image: smooth elliptical blob plus optional bright speckle disks."""
    xx, yy = _grid(side)
    dx, dy = xx - params.cx, yy - params.cy
    ca, sa = math.cos(params.angle), math.sin(params.angle)
    u = (dx * ca + dy * sa) / params.ax
    v = (-dx * sa + dy * ca) / params.ay
    r = np.sqrt(u * u + v * v)
    img = 0.05 + params.brightness / (1.0 + np.exp(-(1.0 - r) / 0.08))
    if with_speckles and params.speckles:
        img = img + speckle_intensity * speckle_mask(params, side)
    return np.clip(img, 0.0, 1.0)


def synth_generate(spec: SynthSpec = SynthSpec()) -> Dataset:
    """Deterministic per ``spec.seed``; samples are class 0 first, then class 1."""
    side = spec.side
    n = spec.n_class0 + spec.n_class1
    labels = np.array([0] * spec.n_class0 + [1] * spec.n_class1, dtype=np.int64)
    shape_rng = Prng(derive_seed(spec.seed, 1))
    noise_rng = Prng(derive_seed(spec.seed, 2))
    images = np.empty((n, 1, side, side))
    for i in range(n):
        params = draw_wing_params(shape_rng, side, bool(labels[i]))
        img = render_wing(params, side, spec.speckle_intensity)
        if spec.noise_std > 0:
            img = np.clip(img + spec.noise_std * noise_rng.normal_array(side * side).reshape(side, side), 0.0, 1.0)
        images[i, 0] = img
    if spec.label_flip_rate > 0:
        flip = Prng(derive_seed(spec.seed, 3)).uniform_array(n) < spec.label_flip_rate
        labels = np.where(flip, 1 - labels, labels)
    return Dataset(images, labels)


# --- netpbm --------------------------------------------------------------

def _read_header(data: bytes):
    tokens, pos = [], 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise ImageFormatError("truncated netpbm header")
        ch = data[pos:pos + 1]
        if ch == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
                pos += 1
            tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    return tokens, pos + 1


def read_netpbm(path) -> np.ndarray:
    """Read a binary PGM (P5) or PPM (P6) file into a [channels, h, w] array scaled to [0, 1]."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from None
    if data[:2] not in (b"P5", b"P6"):
        raise ImageFormatError(f"{path}: bad magic number {data[:2]!r} (expected P5 or P6)")
    tokens, offset = _read_header(data)
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise ImageFormatError(f"{path}: malformed header") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ImageFormatError(f"{path}: invalid dimensions or maxval")
    channels = 1 if tokens[0] == b"P5" else 3
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    raster = data[offset:offset + count * dtype.itemsize]
    if len(raster) < count * dtype.itemsize:
        raise ImageFormatError(f"{path}: raster truncated")
    pixels = np.frombuffer(raster, dtype=dtype).astype(np.float64) / maxval
    return pixels.reshape(height, width, channels).transpose(2, 0, 1).copy()


def quantize8(img) -> np.ndarray:
    return np.round(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255).astype(np.uint8)


def write_netpbm(path, img) -> None:
    """Write [h, w] or [1, h, w] as P5, [3, h, w] as P6, 8-bit."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[None]
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise ShapeError(f"expected [h, w], [1, h, w] or [3, h, w], got {img.shape}")
    c, h, w = img.shape
    magic = b"P5" if c == 1 else b"P6"
    raster = quantize8(img).transpose(1, 2, 0).tobytes()
    with open(path, "wb") as fh:
        fh.write(b"%s\n%d %d\n255\n" % (magic, w, h))
        fh.write(raster)


def save_image_dir(ds: Dataset, root) -> None:
    root = Path(root)
    ext = ".pgm" if ds.images.shape[1] == 1 else ".ppm"
    for sub in ("tumor", "no_tumor"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for i, (img, label) in enumerate(zip(ds.images, ds.labels)):
        sub = "tumor" if label == 1 else "no_tumor"
        write_netpbm(root / sub / f"img_{ds.ids[i]:05d}{ext}", img)


def load_image_dir(root) -> Dataset:
    """Load ``root/{no_tumor,tumor}/*.pgm|*.ppm``; class 0 files first, each class sorted by name."""
    root = Path(root)
    images, labels = [], []
    for label, sub in ((0, "no_tumor"), (1, "tumor")):
        folder = root / sub
        if not folder.is_dir():
            raise ImageFormatError(f"missing directory {folder}")
        files = sorted(p for p in folder.iterdir() if p.suffix.lower() in (".pgm", ".ppm"))
        if not files:
            warnings.warn(f"{folder} contains no images", stacklevel=2)
        for f in files:
            images.append(read_netpbm(f))
            labels.append(label)
    if not images:
        raise ImageFormatError(f"no images found under {root}")
    shapes = {im.shape for im in images}
    if len(shapes) > 1:
        raise ImageFormatError(f"images differ in size/channels: {sorted(shapes)}")
    return Dataset(np.stack(images), np.array(labels))


def save_dataset_json(ds: Dataset, path) -> None:
    with open(path, "w") as fh:
        json.dump({"shape": list(ds.images.shape), "images": ds.images.reshape(-1).tolist(),
                   "labels": ds.labels.tolist(), "ids": ds.ids.tolist()}, fh)


def load_dataset_json(path) -> Dataset:
    with open(path) as fh:
        doc = json.load(fh)
    return Dataset(np.array(doc["images"]).reshape(doc["shape"]), doc["labels"], doc["ids"])


# --- splitting -----------------------------------------------------------

def apportion(n: int, fractions) -> list[int]:
    """Largest-remainder integer apportionment of ``n`` items; ties go to the earlier part."""
    raw = [n * f for f in fractions]
    counts = [math.floor(r + 1e-9) for r in raw]
    rest = n - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:rest]:
        counts[i] += 1
    return counts


def split(ds: Dataset, fractions=(0.7, 0.15, 0.15), seed: int = 0, stratified: bool = True):
    """Partition into (train, val, test) with per-class proportions preserved."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1) > 1e-9:
        raise ParameterError(f"fractions must be three non-negative numbers summing to 1, got {fractions}")
    prng = Prng(seed)
    parts = [[], [], []]
    groups = [np.flatnonzero(ds.labels == c) for c in (0, 1)] if stratified else [np.arange(len(ds))]
    n_parts = sum(f > 0 for f in fractions)
    for idx in groups:
        if idx.size == 0:
            continue
        if stratified and idx.size < n_parts:
            raise StratificationError(f"class with {idx.size} samples cannot be spread over {n_parts} parts")
        idx = idx[prng.permutation(idx.size)]
        start = 0
        for k, count in enumerate(apportion(idx.size, fractions)):
            parts[k].extend(idx[start:start + count].tolist())
            start += count
    return tuple(ds.subset(np.array(sorted(p), dtype=np.int64)) for p in parts)
