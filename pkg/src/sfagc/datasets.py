"""Point-cloud file formats, mesh sampling, and synthetic datasets.

Two point formats: plain text (one point per line, whitespace-separated
floats) and a little-endian binary container.  Labeled clouds for
segmentation append an integer part id per line.  Datasets are described
by a JSON manifest listing split files, the label map, and part ids.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, ParseError
from .graphs import PointSet

__all__ = [
    "BIN_MAGIC",
    "load_points",
    "save_points",
    "load_labeled_points",
    "save_labeled_points",
    "sample_off_mesh",
    "normalize_unit_sphere",
    "rotate_z",
    "DatasetManifest",
    "load_manifest",
    "load_split",
    "synth_dataset",
    "SYNTH_KINDS",
]

BIN_MAGIC = b"PCBIN01"


# ---------------------------------------------------------------------------
# point formats


def _infer_format(path: str) -> str:
    return "bin" if path.endswith(".bin") else "xyz-text"


def load_points(path: str, format: str | None = None) -> PointSet:
    """Read a point cloud; features start out as a copy of the coords.

    format is "xyz-text" or "bin"; None infers from the extension
    (.bin is binary, anything else text).
    """
    fmt = format or _infer_format(path)
    if fmt == "xyz-text":
        coords = _read_text_table(path, 3)
    elif fmt == "bin":
        coords = _read_bin(path)
    else:
        raise InvalidArgument(f"load_points: unknown format {fmt!r}")
    return PointSet(coords=coords, feats=coords.copy())


def save_points(points, path: str, format: str | None = None) -> None:
    """Write coordinates (a PointSet or an (N, C) array) to disk."""
    coords = getattr(points, "coords", points)
    coords = np.asarray(getattr(coords, "data", coords), dtype=float)
    if coords.ndim != 2:
        raise InvalidArgument(f"save_points: expected (N, C) coords, got {coords.shape}")
    fmt = format or _infer_format(path)
    if fmt == "xyz-text":
        # float repr round-trips exactly
        with open(path, "w") as fh:
            for row in coords:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    elif fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(BIN_MAGIC)
            np.array(coords.shape, dtype="<u8").tofile(fh)
            coords.astype("<f8").tofile(fh)
    else:
        raise InvalidArgument(f"save_points: unknown format {fmt!r}")


def load_labeled_points(path: str):
    """Read a labeled cloud (x y z part per line) -> (PointSet, labels)."""
    table = _read_text_table(path, 4)
    labels = table[:, 3]
    rounded = np.rint(labels)
    if not np.array_equal(labels, rounded):
        raise ParseError(f"{path}: labels must be integers")
    coords = table[:, :3]
    return PointSet(coords=coords, feats=coords.copy()), rounded.astype(int)


def save_labeled_points(points, labels, path: str) -> None:
    coords = getattr(points, "coords", points)
    coords = np.asarray(getattr(coords, "data", coords), dtype=float)
    labels = np.asarray(labels)
    if coords.ndim != 2 or coords.shape[1] != 3 or labels.shape != (coords.shape[0],):
        raise InvalidArgument(
            f"save_labeled_points: coords {coords.shape} with labels {labels.shape}"
        )
    with open(path, "w") as fh:
        for row, lab in zip(coords, labels):
            fh.write(" ".join(repr(float(v)) for v in row) + f" {int(lab)}\n")


def _read_text_table(path: str, ncols: int) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != ncols:
                raise ParseError(
                    f"{path}:{lineno}: expected {ncols} fields, got {len(parts)}"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise ParseError(f"{path}: no points found")
    return np.array(rows)


def _read_bin(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(BIN_MAGIC))
        if magic != BIN_MAGIC:
            raise ParseError(f"{path}: bad magic {magic!r}")
        header = np.fromfile(fh, dtype="<u8", count=2)
        if header.size != 2:
            raise ParseError(f"{path}: truncated header")
        n, c = (int(v) for v in header)
        values = np.fromfile(fh, dtype="<f8")
    if values.size != n * c:
        raise ParseError(f"{path}: expected {n * c} values, found {values.size}")
    if n < 1 or c < 1:
        raise ParseError(f"{path}: empty cloud ({n} x {c})")
    return values.reshape(n, c)


# ---------------------------------------------------------------------------
# mesh sampling


def _off_tokens(path: str):
    """Significant (lineno, tokens) pairs of an OFF file, comments stripped."""
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].split()
            if body:
                out.append((lineno, body))
    return out


def sample_off_mesh(path: str, n: int = 1024, rng: np.random.Generator | None = None) -> PointSet:
    """Uniform surface samples of an OFF mesh, n points.

    Triangles (polygon faces are fan-triangulated) are drawn with
    probability proportional to area, then a point is placed uniformly
    inside each.  The header variant with counts glued onto the OFF
    keyword line is accepted.
    """
    if n < 1:
        raise InvalidArgument(f"sample_off_mesh: n must be >= 1, got {n}")
    rng = rng if rng is not None else np.random.default_rng(0)
    lines = _off_tokens(path)
    if not lines:
        raise ParseError(f"{path}: empty file")
    lineno, head = lines[0]
    if head[0] != "OFF" and not head[0].startswith("OFF"):
        raise ParseError(f"{path}:{lineno}: missing OFF header")
    if head[0] == "OFF":
        counts = head[1:]
    else:
        counts = [head[0][3:]] + head[1:]
    body = lines[1:]
    if not counts:
        if not body:
            raise ParseError(f"{path}: missing element counts")
        lineno, counts = body[0]
        body = body[1:]
    try:
        nv, nf = int(counts[0]), int(counts[1])
    except (IndexError, ValueError):
        raise ParseError(f"{path}:{lineno}: malformed element counts") from None
    if len(body) < nv + nf:
        raise ParseError(f"{path}: expected {nv} vertices and {nf} faces, file ends early")

    verts = np.empty((nv, 3))
    for i in range(nv):
        lineno, toks = body[i]
        try:
            verts[i] = [float(t) for t in toks[:3]]
        except (IndexError, ValueError):
            raise ParseError(f"{path}:{lineno}: malformed vertex") from None

    tris = []
    for i in range(nf):
        lineno, toks = body[nv + i]
        try:
            m = int(toks[0])
            idx = [int(t) for t in toks[1 : 1 + m]]
        except (IndexError, ValueError):
            raise ParseError(f"{path}:{lineno}: malformed face") from None
        if m < 3 or len(idx) != m:
            raise ParseError(f"{path}:{lineno}: face needs at least 3 vertices")
        if min(idx) < 0 or max(idx) >= nv:
            raise ParseError(f"{path}:{lineno}: vertex index out of range")
        for j in range(1, m - 1):
            tris.append((idx[0], idx[j], idx[j + 1]))

    tris = np.array(tris, dtype=int)
    a = verts[tris[:, 0]]
    ab = verts[tris[:, 1]] - a
    ac = verts[tris[:, 2]] - a
    areas = 0.5 * np.linalg.norm(np.cross(ab, ac), axis=1)
    total = areas.sum()
    if not total > 0.0:
        raise InvalidArgument(f"sample_off_mesh: {path} has zero total surface area")

    pick = rng.choice(len(tris), size=n, p=areas / total)
    u = rng.random(n)
    v = rng.random(n)
    # reflect points outside the triangle back in
    flip = u + v > 1.0
    u[flip], v[flip] = 1.0 - u[flip], 1.0 - v[flip]
    pts = a[pick] + u[:, None] * ab[pick] + v[:, None] * ac[pick]
    return PointSet(coords=pts, feats=pts.copy())


def normalize_unit_sphere(coords):
    """Translate to zero centroid, scale the farthest point to norm 1.

    Accepts an (N, 3) array or a PointSet (whose features are reset to
    the normalized geometry); a fully degenerate cloud collapses to the
    origin unscaled.
    """
    is_set = isinstance(coords, PointSet)
    xyz = np.asarray(coords.coords if is_set else coords, dtype=float)
    xyz = np.asarray(getattr(xyz, "data", xyz), dtype=float)
    if xyz.ndim != 2 or xyz.shape[0] < 1:
        raise InvalidArgument(f"normalize_unit_sphere: expected (N, C), got {xyz.shape}")
    centered = xyz - xyz.mean(axis=0)
    radius = float(np.sqrt((centered**2).sum(axis=1).max()))
    if radius > 1e-12:
        centered = centered / radius
    if is_set:
        return PointSet(coords=centered, feats=centered.copy())
    return centered


def rotate_z(coords: np.ndarray, angle: float) -> np.ndarray:
    """Rotate xyz coordinates about the z axis by angle radians."""
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return np.asarray(coords) @ rot.T


# ---------------------------------------------------------------------------
# manifests


@dataclass
class DatasetManifest:
    """Index of a dataset on disk: split file lists plus label metadata.

    Classification entries are {"file", "label"}; segmentation entries
    are {"file"} with per-point labels inside the files.  root holds the
    directory paths are relative to.
    """

    kind: str
    root: str
    points_per_cloud: int
    label_map: dict
    train: list = field(default_factory=list)
    test: list = field(default_factory=list)
    parts_per_category: dict | None = None

    def __post_init__(self):
        if self.points_per_cloud < 1:
            raise InvalidArgument("manifest: points_per_cloud must be positive")
        if not self.label_map:
            raise InvalidArgument("manifest: empty label map")
        ids = sorted(self.label_map.values())
        if ids != list(range(len(ids))):
            raise InvalidArgument(f"manifest: label ids must be 0..K-1, got {ids}")

    @property
    def num_classes(self) -> int:
        if self.parts_per_category is not None:
            return max(max(v) for v in self.parts_per_category.values()) + 1
        return len(self.label_map)

    @property
    def task(self) -> str:
        return "segmentation" if self.parts_per_category is not None else "classification"

    def save(self, path: str) -> None:
        doc = {
            "kind": self.kind,
            "points_per_cloud": self.points_per_cloud,
            "label_map": self.label_map,
            "train": self.train,
            "test": self.test,
            "parts_per_category": self.parts_per_category,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_manifest(path: str) -> DatasetManifest:
    """Parse and validate a manifest; referenced files must exist.

    Accepts either the manifest file itself or a dataset directory
    containing a manifest.json.
    """
    if os.path.isdir(path):
        path = os.path.join(path, "manifest.json")
    root = os.path.dirname(os.path.abspath(path))
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    try:
        manifest = DatasetManifest(
            kind=doc["kind"],
            root=root,
            points_per_cloud=int(doc["points_per_cloud"]),
            label_map={str(k): int(v) for k, v in doc["label_map"].items()},
            train=list(doc["train"]),
            test=list(doc["test"]),
            parts_per_category=(
                {str(k): [int(p) for p in v] for k, v in doc["parts_per_category"].items()}
                if doc.get("parts_per_category")
                else None
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed manifest ({exc})") from None
    k = manifest.num_classes
    for split in (manifest.train, manifest.test):
        for entry in split:
            try:
                fname = entry["file"]
                label = int(entry["label"]) if manifest.task == "classification" else 0
            except (KeyError, TypeError, ValueError):
                raise ParseError(f"{path}: malformed split entry {entry!r}") from None
            if not os.path.exists(os.path.join(root, fname)):
                raise ParseError(f"{path}: missing data file {fname}")
            if not 0 <= label < k:
                raise ParseError(f"{path}: label {label} out of range")
    return manifest


def load_split(manifest: DatasetManifest, split: str) -> list:
    """Materialize one split as (PointSet, label-or-labels) pairs."""
    entries = {"train": manifest.train, "test": manifest.test}.get(split)
    if entries is None:
        raise InvalidArgument(f"load_split: split must be train or test, got {split!r}")
    out = []
    for entry in entries:
        fpath = os.path.join(manifest.root, entry["file"])
        if manifest.task == "classification":
            out.append((load_points(fpath), int(entry["label"])))
        else:
            pts, labels = load_labeled_points(fpath)
            if labels.size and labels.max() >= manifest.num_classes:
                raise ParseError(f"{fpath}: part id {labels.max()} out of range")
            out.append((pts, labels))
    return out


# ---------------------------------------------------------------------------
# synthetic shapes


def _sphere(rng, n):
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v


def _cube(rng, n):
    # six faces of equal area: pick one, fix that axis at +-1
    face = rng.integers(0, 6, n)
    axis, sign = face // 2, np.where(face % 2 == 0, 1.0, -1.0)
    pts = rng.uniform(-1.0, 1.0, (n, 3))
    pts[np.arange(n), axis] = sign
    return pts


def _cylinder(rng, n, radius=0.6):
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    z = rng.uniform(-1.0, 1.0, n)
    return np.column_stack([radius * np.cos(theta), radius * np.sin(theta), z])


def _plane(rng, n):
    pts = rng.uniform(-1.0, 1.0, (n, 3))
    pts[:, 2] = 0.0
    return pts


_CLASSIFY4 = (("sphere", _sphere), ("cube", _cube), ("cylinder", _cylinder), ("plane", _plane))


def _capped_cylinder(rng, n, radius=0.6, half_height=0.8):
    """Closed cylinder surface; labels: 0 = side wall, 1 = end cap."""
    side_area = 2.0 * np.pi * radius * (2.0 * half_height)
    cap_area = 2.0 * np.pi * radius**2
    on_side = rng.random(n) < side_area / (side_area + cap_area)
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    r = np.where(on_side, radius, radius * np.sqrt(rng.random(n)))
    z = np.where(
        on_side,
        rng.uniform(-half_height, half_height, n),
        np.where(rng.random(n) < 0.5, half_height, -half_height),
    )
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta), z])
    labels = np.where(on_side, 0, 1)
    return pts, labels


SYNTH_KINDS = ("classify4", "segment2")


def _augment(rng, pts, jitter=0.01):
    # rotation about z keeps segment part labels intact
    return rotate_z(pts, rng.uniform(0.0, 2.0 * np.pi)) + rng.normal(0.0, jitter, pts.shape)


def synth_dataset(
    kind: str,
    per_class: int,
    n_points: int,
    seed: int,
    out_dir: str,
    test_per_class: int | None = None,
) -> DatasetManifest:
    """Generate a balanced synthetic dataset on disk and return its manifest.

    classify4 writes per_class training clouds (plus test_per_class,
    default 2/5 of that) for each of four shape classes; segment2 writes
    capped-cylinder clouds with per-point side/cap labels (default test
    count 1/5 of per_class).  Every cloud gets a random rotation about z
    and coordinate jitter (sigma 0.01).  Deterministic under seed.
    """
    if kind not in SYNTH_KINDS:
        raise InvalidArgument(f"synth_dataset: kind must be one of {SYNTH_KINDS}, got {kind!r}")
    if per_class < 2:
        raise InvalidArgument(f"synth_dataset: per_class must be >= 2, got {per_class}")
    if n_points < 8:
        raise InvalidArgument(f"synth_dataset: n_points must be >= 8, got {n_points}")
    rng = np.random.default_rng(seed)
    os.makedirs(out_dir, exist_ok=True)

    if kind == "classify4":
        n_test = test_per_class if test_per_class is not None else max(1, per_class * 2 // 5)
        label_map = {name: i for i, (name, _) in enumerate(_CLASSIFY4)}
        manifest = DatasetManifest(
            kind=kind, root=out_dir, points_per_cloud=n_points, label_map=label_map
        )
        for split, count in (("train", per_class), ("test", n_test)):
            for name, shape in _CLASSIFY4:
                for i in range(count):
                    pts = _augment(rng, shape(rng, n_points))
                    fname = f"{split}_{name}_{i:04d}.xyz"
                    save_points(pts, os.path.join(out_dir, fname))
                    getattr(manifest, split).append({"file": fname, "label": label_map[name]})
    else:
        n_test = test_per_class if test_per_class is not None else max(1, per_class // 5)
        manifest = DatasetManifest(
            kind=kind,
            root=out_dir,
            points_per_cloud=n_points,
            label_map={"capped_cylinder": 0},
            parts_per_category={"capped_cylinder": [0, 1]},
        )
        for split, count in (("train", per_class), ("test", n_test)):
            for i in range(count):
                pts, labels = _capped_cylinder(rng, n_points)
                pts = _augment(rng, pts)
                fname = f"{split}_{i:04d}.xyzl"
                save_labeled_points(pts, labels, os.path.join(out_dir, fname))
                getattr(manifest, split).append({"file": fname})

    manifest.save(os.path.join(out_dir, "manifest.json"))
    return manifest
