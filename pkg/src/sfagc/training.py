"""Run configuration, the training loop, and evaluation.

Configs are flat key=value text files ('#' starts a comment).  Training
is plain mini-batch Adam over whole-cloud samples: per batch, gradients
of the summed phase losses accumulate across items, are averaged, and
one optimizer step follows.  Every run writes a line-delimited metrics
log and a final checkpoint, and is deterministic under its seed.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from .autodiff import Adam, backward, no_grad
from .checkpoint import load_into, save_checkpoint
from .datasets import DatasetManifest, load_manifest, load_split, rotate_z
from .errors import InvalidArgument, ParseError
from .graphs import PointSet
from .models import Network, ablation_variant, hierarchical_loss, mean_class_accuracy, mean_iou, overall_accuracy, spec_by_name

__all__ = [
    "RunConfig",
    "parse_config",
    "load_config",
    "train_model",
    "evaluate_model",
    "evaluate_checkpoint",
]

_TASKS = ("classify", "segment")


@dataclass
class RunConfig:
    """Everything one training run needs; see parse_config for the keys."""

    task: str
    spec: str
    data: str
    out: str
    epochs: int = 30
    batch: int = 16
    lr: float = 0.001
    dropout: float | None = None
    seed: int = 0
    variant: str = "full"
    rotate_augment: bool = False
    init_checkpoint: str | None = None

    def __post_init__(self):
        if self.task not in _TASKS:
            raise InvalidArgument(f"config: task must be one of {_TASKS}, got {self.task!r}")
        if self.epochs < 1:
            raise InvalidArgument(f"config: epochs must be >= 1, got {self.epochs}")
        if self.batch < 1:
            raise InvalidArgument(f"config: batch must be >= 1, got {self.batch}")
        if not self.lr > 0.0:
            raise InvalidArgument(f"config: lr must be positive, got {self.lr}")
        if self.dropout is not None and not 0.0 <= self.dropout < 1.0:
            raise InvalidArgument(f"config: dropout {self.dropout} outside [0, 1)")


_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}

_CONFIG_KEYS = {
    "task": str,
    "spec": str,
    "data": str,
    "out": str,
    "epochs": int,
    "batch": int,
    "lr": float,
    "dropout": float,
    "seed": int,
    "variant": str,
    "rotate_augment": "bool",
    "init_checkpoint": str,
}
_REQUIRED_KEYS = ("task", "spec", "data", "out")


def parse_config(text: str, origin: str = "<config>") -> RunConfig:
    """Parse key=value lines into a RunConfig; unknown keys are errors."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(f"{origin}:{lineno}: expected key=value, got {body!r}")
        key, _, raw = body.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _CONFIG_KEYS:
            raise ParseError(f"{origin}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ParseError(f"{origin}:{lineno}: duplicate key {key!r}")
        kind = _CONFIG_KEYS[key]
        try:
            if kind == "bool":
                if raw.lower() not in _BOOL:
                    raise ValueError(f"not a boolean: {raw!r}")
                values[key] = _BOOL[raw.lower()]
            else:
                values[key] = kind(raw)
        except ValueError as exc:
            raise ParseError(f"{origin}:{lineno}: bad value for {key}: {exc}") from None
    missing = [k for k in _REQUIRED_KEYS if k not in values]
    if missing:
        raise ParseError(f"{origin}: missing required keys {missing}")
    return RunConfig(**values)


def load_config(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), origin=path)


# ---------------------------------------------------------------------------
# evaluation


def _category_parts(manifest: DatasetManifest):
    parts = sorted({p for v in manifest.parts_per_category.values() for p in v})
    return {0: parts}


def evaluate_model(net: Network, data, task: str, manifest: DatasetManifest | None = None) -> dict:
    """Metrics over (points, label) pairs: OA and mean class accuracy for
    classification, mIoU for segmentation.  Inference runs off-tape."""
    with no_grad():
        preds = [net.predict(pts) for pts, _ in data]
    labels = [lab for _, lab in data]
    if task == "classify":
        return {
            "oa": overall_accuracy(preds, labels),
            "macc": mean_class_accuracy(preds, labels),
        }
    parts = _category_parts(manifest) if manifest is not None else None
    cats = [0] * len(preds) if parts is not None else None
    return {"miou": mean_iou(preds, labels, shape_categories=cats, category_parts=parts)}


def _build_network(config: RunConfig, manifest: DatasetManifest, rng) -> Network:
    spec = spec_by_name(config.spec, num_classes=manifest.num_classes)
    want = "segment" if spec.task == "segmentation" else "classify"
    if want != config.task:
        raise InvalidArgument(
            f"config: task {config.task!r} does not match spec {config.spec!r}"
        )
    if manifest.task != spec.task:
        raise InvalidArgument(
            f"config: manifest holds {manifest.task} data but spec {config.spec!r} expects {spec.task}"
        )
    if config.dropout is not None:
        spec = replace(spec, dropout=config.dropout)
    spec = ablation_variant(spec, config.variant)
    net = Network(spec, rng)
    if config.init_checkpoint:
        load_into(net.parameters(), config.init_checkpoint)
    return net


def evaluate_checkpoint(checkpoint_path: str, manifest_path: str, spec_name: str, variant: str = "full") -> dict:
    """Restore a checkpoint and score it on the manifest's test split."""
    manifest = load_manifest(manifest_path)
    task = "segment" if manifest.task == "segmentation" else "classify"
    config = RunConfig(
        task=task,
        spec=spec_name,
        data=manifest_path,
        out=".",
        variant=variant,
        init_checkpoint=checkpoint_path,
    )
    net = _build_network(config, manifest, np.random.default_rng(0))
    data = load_split(manifest, "test")
    return evaluate_model(net, data, task, manifest)


# ---------------------------------------------------------------------------
# training


def _augmented(pts: PointSet, angle: float) -> PointSet:
    coords = rotate_z(np.asarray(pts.coords), angle)
    return PointSet(coords=coords, feats=coords.copy())


def train_model(config: RunConfig, quiet: bool = True) -> tuple[Network, list]:
    """Train per the config; returns the network and per-epoch records.

    Writes metrics.jsonl (one record per epoch) and final.ckpt into the
    output directory.
    """
    manifest = load_manifest(config.data)
    rng = np.random.default_rng(config.seed)
    net = _build_network(config, manifest, rng)
    train_data = load_split(manifest, "train")
    test_data = load_split(manifest, "test")
    if not train_data or not test_data:
        raise InvalidArgument("train: both splits must be non-empty")

    os.makedirs(config.out, exist_ok=True)
    params = net.parameters()
    opt = Adam(params, lr=config.lr)
    metric_key = "test_oa" if config.task == "classify" else "test_miou"
    history = []
    log_path = os.path.join(config.out, "metrics.jsonl")
    with open(log_path, "w") as log:
        for epoch in range(1, config.epochs + 1):
            started = time.monotonic()
            order = rng.permutation(len(train_data))
            epoch_loss = 0.0
            for lo in range(0, len(order), config.batch):
                batch = order[lo : lo + config.batch]
                opt.zero_grad()
                for idx in batch:
                    pts, label = train_data[idx]
                    if config.rotate_augment:
                        pts = _augmented(pts, rng.uniform(0.0, 2.0 * np.pi))
                    out = net.forward(pts, label=label, train=True, rng=rng)
                    loss = hierarchical_loss(out)
                    backward(loss, params, accumulate=True)
                    epoch_loss += loss.item()
                opt.step(scale=1.0 / len(batch))
            opt.zero_grad()
            scores = evaluate_model(net, test_data, config.task, manifest)
            record = {
                "epoch": epoch,
                "train_loss": epoch_loss / len(train_data),
                metric_key: scores["oa"] if config.task == "classify" else scores["miou"],
            }
            history.append(record)
            log.write(json.dumps(record) + "\n")
            log.flush()
            if not quiet:
                took = time.monotonic() - started
                print(
                    f"epoch {epoch:3d}  loss {record['train_loss']:.4f}  "
                    f"{metric_key} {record[metric_key]:.4f}  ({took:.1f}s)"
                )
    save_checkpoint(os.path.join(config.out, "final.ckpt"), params)
    return net, history
