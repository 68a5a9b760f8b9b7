"""Synthetic ellipse world with analytically known feature correlations.

Every image holds one centered ellipse with a fixed 2:1 axis ratio, so
area and perimeter are locked to one another (perimeter ~ 3.8656 * sqrt(area))
while fill intensity is sampled independently of the geometry. The world
doubles as an oracle: `analytic_features` gives exact measurements and
`nearest_feasible_params` inverts a feature vector back to parameters,
closing the loop without any trained model.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .rng import Rng

IMAGE_SIZE = 64
ASPECT = 2.0  # semi-major a = ASPECT * semi-minor b
B_MIN, B_MAX = 4.0, 14.0
INTENSITY_MIN, INTENSITY_MAX = 40, 220

FEATURE_NAMES = ("area", "perimeter", "eccentricity", "orientation", "intensity")

# perimeter / sqrt(area) for the 2:1 ellipse family (Ramanujan II over sqrt(2*pi*b^2))
MANIFOLD_RATIO = 3.8656


@dataclass(frozen=True)
class EllipseParams:
    """Generative parameters; a = 2*b is implied."""

    semi_minor_b: float
    orientation_theta: float  # wrapped into [0, pi)
    intensity: int

    def __post_init__(self):
        if not (B_MIN <= self.semi_minor_b <= B_MAX):
            raise ValueError(f"semi_minor_b {self.semi_minor_b} outside [{B_MIN}, {B_MAX}]")
        if not (INTENSITY_MIN <= self.intensity <= INTENSITY_MAX):
            raise ValueError(f"intensity {self.intensity} outside [{INTENSITY_MIN}, {INTENSITY_MAX}]")
        object.__setattr__(self, "orientation_theta", float(self.orientation_theta) % np.pi)

    @property
    def semi_major_a(self):
        return ASPECT * self.semi_minor_b


@dataclass
class GeoDataset:
    images: np.ndarray       # (n, 64, 64) uint8
    params: list             # EllipseParams per image
    features: np.ndarray     # (n, 5) analytic raw features
    seed: int

    def __len__(self):
        return len(self.params)


def sample_params(rng: Rng) -> EllipseParams:
    b = B_MIN + rng.uniform() * (B_MAX - B_MIN)
    theta = rng.uniform() * np.pi
    intensity = rng.integers(INTENSITY_MIN, INTENSITY_MAX + 1)
    return EllipseParams(b, theta, intensity)


_COORDS = np.arange(IMAGE_SIZE, dtype=np.float64) - (IMAGE_SIZE - 1) / 2.0
_XX, _YY = np.meshgrid(_COORDS, _COORDS)  # x: columns, y: rows


def render(params: EllipseParams) -> np.ndarray:
    """Hard-edged rasterization: a pixel is foreground iff its center is inside."""
    a = params.semi_major_a
    b = params.semi_minor_b
    half = (IMAGE_SIZE - 1) / 2.0
    if a > half + 0.5:
        raise ValueError(f"ellipse with a={a} exceeds the {IMAGE_SIZE}x{IMAGE_SIZE} frame")
    ct, st = np.cos(params.orientation_theta), np.sin(params.orientation_theta)
    xr = _XX * ct + _YY * st
    yr = -_XX * st + _YY * ct
    inside = (xr / a) ** 2 + (yr / b) ** 2 <= 1.0
    return (inside * np.uint8(params.intensity)).astype(np.uint8)


def analytic_features(params: EllipseParams) -> np.ndarray:
    """Exact feature vector [area, perimeter, eccentricity, orientation, intensity]."""
    a = params.semi_major_a
    b = params.semi_minor_b
    area = np.pi * a * b
    h = ((a - b) / (a + b)) ** 2
    perimeter = np.pi * (a + b) * (1.0 + 3.0 * h / (10.0 + np.sqrt(4.0 - 3.0 * h)))
    ecc = np.sqrt(1.0 - (b / a) ** 2)
    return np.array([area, perimeter, ecc, params.orientation_theta, float(params.intensity)])


def nearest_feasible_params(y_raw) -> EllipseParams:
    """Project a raw feature vector onto the parameter space.

    The area coordinate alone determines b (perimeter and eccentricity are
    functions of it in this world); orientation is wrapped, intensity
    rounded and clamped.
    """
    y = np.asarray(y_raw, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise ValueError("nearest_feasible_params: non-finite feature vector")
    b = float(np.clip(np.sqrt(max(y[0], 0.0) / (2.0 * np.pi)), B_MIN, B_MAX))
    theta = float(y[3]) % np.pi
    intensity = int(np.clip(round(y[4]), INTENSITY_MIN, INTENSITY_MAX))
    return EllipseParams(b, theta, intensity)


def build_dataset(n=4000, seed=0) -> GeoDataset:
    if n < 1:
        raise ValueError("build_dataset: n must be >= 1")
    rng = Rng(seed)
    images = np.empty((n, IMAGE_SIZE, IMAGE_SIZE), dtype=np.uint8)
    params = []
    features = np.empty((n, len(FEATURE_NAMES)), dtype=np.float64)
    for i in range(n):
        p = sample_params(rng)
        params.append(p)
        images[i] = render(p)
        features[i] = analytic_features(p)
    return GeoDataset(images=images, params=params, features=features, seed=seed)


# ------------------------------------------------------------------ on disk

def write_pgm(path, image):
    """Binary PGM (P5), maxval 255."""
    img = np.asarray(image, dtype=np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM")
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while data[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    w, h, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    pos += 1  # single whitespace after maxval
    img = np.frombuffer(data[pos:pos + w * h], dtype=np.uint8)
    return img.reshape(h, w)


def _fmt(x):
    return repr(float(x))


def save_dataset(ds: GeoDataset, out_dir):
    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)
    for i in range(len(ds)):
        write_pgm(os.path.join(img_dir, f"{i:06d}.pgm"), ds.images[i])
    with open(os.path.join(out_dir, "features.csv"), "w", encoding="ascii", newline="\n") as fh:
        fh.write("id," + ",".join(FEATURE_NAMES) + "\n")
        for i, row in enumerate(ds.features):
            fh.write(f"{i}," + ",".join(_fmt(v) for v in row) + "\n")
    with open(os.path.join(out_dir, "params.csv"), "w", encoding="ascii", newline="\n") as fh:
        fh.write("id,b,theta,intensity\n")
        for i, p in enumerate(ds.params):
            fh.write(f"{i},{_fmt(p.semi_minor_b)},{_fmt(p.orientation_theta)},{p.intensity}\n")
    meta = {"seed": ds.seed, "count": len(ds), "image_size": IMAGE_SIZE,
            "feature_names": list(FEATURE_NAMES)}
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="ascii", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(dir_path) -> GeoDataset:
    with open(os.path.join(dir_path, "meta.json"), "r", encoding="ascii") as fh:
        meta = json.load(fh)
    n = meta["count"]
    images = np.empty((n, IMAGE_SIZE, IMAGE_SIZE), dtype=np.uint8)
    for i in range(n):
        images[i] = read_pgm(os.path.join(dir_path, "images", f"{i:06d}.pgm"))
    params = []
    with open(os.path.join(dir_path, "params.csv"), "r", encoding="ascii") as fh:
        next(fh)
        for line in fh:
            _, b, theta, intensity = line.strip().split(",")
            params.append(EllipseParams(float(b), float(theta), int(intensity)))
    features = np.empty((n, len(FEATURE_NAMES)), dtype=np.float64)
    with open(os.path.join(dir_path, "features.csv"), "r", encoding="ascii") as fh:
        next(fh)
        for line in fh:
            parts = line.strip().split(",")
            features[int(parts[0])] = [float(v) for v in parts[1:]]
    return GeoDataset(images=images, params=params, features=features, seed=meta["seed"])
