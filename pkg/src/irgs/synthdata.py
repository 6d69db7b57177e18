"""Sprite-world scenes: solid shapes on a solid background, with instance labels."""
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

log = logging.getLogger(__name__)

SHAPES = ("square", "circle")


@dataclass(frozen=True)
class SceneSpec:
    height: int = 32
    width: int = 32
    min_objects: int = 1
    max_objects: int = 2
    shapes: tuple = SHAPES
    min_size: int = 6
    max_size: int = 10
    min_color_distance: float = 0.25
    allow_occlusion: bool = False
    max_retries: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("scene must be at least 1x1")
        if not 0 <= self.min_objects <= self.max_objects:
            raise ValueError("need 0 <= min_objects <= max_objects")
        if not 1 <= self.min_size <= self.max_size <= min(self.height, self.width):
            raise ValueError("size range must fit inside the scene")
        bad = set(self.shapes) - set(SHAPES)
        if bad or not self.shapes:
            raise ValueError(f"unknown shapes {sorted(bad)}")
        if not 0.0 <= self.min_color_distance <= np.sqrt(3.0) / 2:
            # beyond sqrt(3)/2 some background colors admit no object color
            raise ValueError("min_color_distance must lie in [0, sqrt(3)/2]")


@dataclass
class LabeledScene:
    image: np.ndarray          # (H, W, 3) float in [0, 1]
    labels: np.ndarray         # (H, W) int, 0 = background
    objects: list = field(default_factory=list)   # per object: dict(shape, color, top, left, size)


def shape_footprint(shape, size):
    """Boolean ``size x size`` stencil; circles keep pixels within ``size / 2`` of the center."""
    if shape == "square":
        return np.ones((size, size), dtype=bool)
    c = (size - 1) / 2.0
    ii, jj = np.mgrid[0:size, 0:size]
    return (ii - c) ** 2 + (jj - c) ** 2 <= (size / 2.0) ** 2


def _object_color(rng, bg, delta):
    while True:
        col = rng.uniform(0.0, 1.0, size=3)
        if np.linalg.norm(col - bg) >= delta:
            return col


def _boxes_overlap(a, b):
    (t1, l1, s1), (t2, l2, s2) = a, b
    return not (t1 + s1 <= t2 or t2 + s2 <= t1 or l1 + s1 <= l2 or l2 + s2 <= l1)


def generate_one(spec, index):
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, index]))
    h, w = spec.height, spec.width
    bg = rng.uniform(0.0, 1.0, size=3)
    image = np.broadcast_to(bg, (h, w, 3)).copy()
    labels = np.zeros((h, w), dtype=np.int64)
    n_obj = int(rng.integers(spec.min_objects, spec.max_objects + 1))
    placed = []
    for _ in range(n_obj):
        shape = spec.shapes[int(rng.integers(len(spec.shapes)))]
        color = _object_color(rng, bg, spec.min_color_distance)
        for _attempt in range(spec.max_retries):
            size = int(rng.integers(spec.min_size, spec.max_size + 1))
            top = int(rng.integers(0, h - size + 1))
            left = int(rng.integers(0, w - size + 1))
            box = (top, left, size)
            if spec.allow_occlusion or not any(_boxes_overlap(box, o["box"]) for o in placed):
                break
        else:
            log.warning("scene %d: placed %d of %d objects", index, len(placed), n_obj)
            break
        placed.append({"shape": shape, "color": color, "box": box})

    for label, obj in enumerate(placed, start=1):
        top, left, size = obj["box"]
        stencil = shape_footprint(obj["shape"], size)
        region = (slice(top, top + size), slice(left, left + size))
        image[region][stencil] = obj["color"]
        labels[region][stencil] = label

    # drop fully occluded objects and keep labels contiguous
    visible = [lab for lab in range(1, len(placed) + 1) if np.any(labels == lab)]
    remap = np.zeros(len(placed) + 1, dtype=np.int64)
    for new, old in enumerate(visible, start=1):
        remap[old] = new
    labels = remap[labels]
    objects = [dict(shape=placed[old - 1]["shape"], color=placed[old - 1]["color"],
                    top=placed[old - 1]["box"][0], left=placed[old - 1]["box"][1],
                    size=placed[old - 1]["box"][2]) for old in visible]
    return LabeledScene(image=image, labels=labels, objects=objects)


def generate(spec, count):
    return [generate_one(spec, i) for i in range(count)]


# ---------------------------------------------------------------------------
# dataset directory: NNNNN.png, NNNNN.labels.png, manifest
# ---------------------------------------------------------------------------

def to_uint8(img):
    return np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)


def save_png(path, arr):
    arr = np.asarray(arr)
    mode = "RGB" if arr.ndim == 3 else "L"
    PILImage.fromarray(arr.astype(np.uint8), mode=mode).save(path, optimize=False)


def load_image(path):
    with PILImage.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def load_labels(path):
    with PILImage.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.int64)


def spec_to_manifest(spec, count):
    lines = [f"count={count}", f"height={spec.height}", f"width={spec.width}"]
    for key, val in asdict(spec).items():
        if key in ("height", "width"):
            continue
        if isinstance(val, (tuple, list)):
            val = ",".join(val)
        lines.append(f"{key}={val}")
    return "\n".join(lines) + "\n"


def read_manifest(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            key, _, val = line.partition("=")
            out[key.strip()] = val.strip()
    return out


def write_dataset(directory, scenes, spec):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, sc in enumerate(scenes):
        save_png(directory / f"{i:05d}.png", to_uint8(sc.image))
        save_png(directory / f"{i:05d}.labels.png", sc.labels.astype(np.uint8))
    (directory / "manifest").write_text(spec_to_manifest(spec, len(scenes)))


def image_paths(directory):
    """Image files in ``directory`` (label files excluded), sorted by name."""
    directory = Path(directory)
    return sorted(p for p in directory.glob("*.png") if not p.name.endswith(".labels.png"))


def label_path(image_path):
    p = Path(image_path)
    return p.with_name(p.stem + ".labels.png")


def load_dataset(directory, with_labels=False):
    """Load every image in a folder; optionally pair each with its label plane."""
    paths = image_paths(directory)
    images = [load_image(p) for p in paths]
    if not with_labels:
        return images
    labels = []
    for p in paths:
        lp = label_path(p)
        if not lp.exists():
            raise FileNotFoundError(f"missing labels for {p.name}: {lp.name}")
        labels.append(load_labels(lp))
    return images, labels
