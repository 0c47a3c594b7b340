"""Convert directories of images into the grid evaluator's file formats.

Each immediate subdirectory of the input directory is treated as one
grid (prompt); loose images in the input root form a grid named after
the directory itself. Every image gets a 2048-dim pooled Inception V3
feature; targets (exemplar images) come from a separate directory and
are referenced by every case. Output records are sorted by image id and
the files are consumed by the evaluator's loaders unmodified.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError
from torchvision import models

from .saliency import contrast_entropy

FEATURE_DIM = 2048
FEATURE_LAYER = "avgpool"
INPUT_SIZE = 299
NORM_MEAN = (0.485, 0.456, 0.406)
NORM_STD = (0.229, 0.224, 0.225)
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}
SCHEMA_VERSION = "1"
SALIENCY_MODES = ("uniform", "contrast-entropy")


class AdapterError(Exception):
    pass


@dataclass
class AdapterConfig:
    input_dir: Path
    out_embeddings: Path
    out_manifest: Path | None = None
    targets_dir: Path | None = None
    model_name: str = "inception_v3"
    weights: Path | None = None
    allow_random_init: bool = False
    saliency: str = "uniform"
    batch_size: int = 8
    seed: int = 0

    def __post_init__(self):
        self.input_dir = Path(self.input_dir)
        self.out_embeddings = Path(self.out_embeddings)
        if self.out_manifest is not None:
            self.out_manifest = Path(self.out_manifest)
        if self.targets_dir is not None:
            self.targets_dir = Path(self.targets_dir)
        if self.weights is not None:
            self.weights = Path(self.weights)
        if self.model_name != "inception_v3":
            raise AdapterError(f"unknown model {self.model_name!r}")
        if self.saliency not in SALIENCY_MODES:
            raise AdapterError(f"unknown saliency mode {self.saliency!r}")
        if self.batch_size < 1:
            raise AdapterError("batch size must be >= 1")
        if self.out_manifest is not None and self.targets_dir is None:
            raise AdapterError(
                "a manifest needs target exemplars: pass a targets directory"
            )


def build_model(config: AdapterConfig):
    """Instantiate the feature extractor and report weight provenance.

    Pretrained weights must be supplied as a local checkpoint; without
    one, the caller has to opt into a seeded random initialization
    explicitly, and that choice is recorded in the run metadata.
    """
    if config.weights is None and not config.allow_random_init:
        raise AdapterError(
            "no weights given: pass --weights PATH or opt in with "
            "--allow-random-init"
        )
    if config.weights is not None and not config.weights.is_file():
        raise AdapterError(f"weights file not found: {config.weights}")
    torch.manual_seed(config.seed)
    model = models.inception_v3(weights=None, init_weights=True)
    if config.weights is not None:
        state = torch.load(config.weights, map_location="cpu", weights_only=True)
        model.load_state_dict(state)
        provenance = str(config.weights)
    else:
        provenance = f"random-init(seed={config.seed})"
    # pooled 2048-dim features instead of logits
    model.fc = torch.nn.Identity()
    model.eval()
    return model, provenance


def preprocess(image: Image.Image) -> torch.Tensor:
    rgb = image.convert("RGB").resize(
        (INPUT_SIZE, INPUT_SIZE), Image.Resampling.BICUBIC
    )
    arr = np.asarray(rgb, dtype=np.float32) / np.float32(255.0)
    arr = (arr - np.asarray(NORM_MEAN, dtype=np.float32)) / np.asarray(
        NORM_STD, dtype=np.float32
    )
    return torch.from_numpy(arr.transpose(2, 0, 1).copy())


def _image_files(directory: Path):
    return sorted(
        p
        for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def discover_grids(input_dir: Path) -> dict:
    """Map prompt id -> list of image paths, one grid per subdirectory."""
    if not input_dir.is_dir():
        raise AdapterError(f"input directory not found: {input_dir}")
    grids = {}
    root_images = _image_files(input_dir)
    if root_images:
        grids[input_dir.name] = root_images
    for sub in sorted(p for p in input_dir.iterdir() if p.is_dir()):
        images = _image_files(sub)
        if images:
            grids[sub.name] = images
    if not grids:
        raise AdapterError(f"no images found under {input_dir}")
    return grids


class _BatchEmbedder:
    """Accumulates preprocessed tensors and flushes fixed-size batches."""

    def __init__(self, model, batch_size: int):
        self.model = model
        self.batch_size = batch_size
        self.pending = []
        self.ids = []
        self.vectors = {}

    def add(self, image_id: str, tensor: torch.Tensor):
        self.pending.append(tensor)
        self.ids.append(image_id)
        if len(self.pending) >= self.batch_size:
            self.flush()

    def flush(self):
        if not self.pending:
            return
        with torch.inference_mode():
            features = self.model(torch.stack(self.pending))
        for image_id, row in zip(self.ids, features):
            self.vectors[image_id] = row.numpy().copy()
        self.pending = []
        self.ids = []


def _embed_directory(embedder, paths, ids, config, skipped, saliencies=None):
    kept = []
    for path, image_id in zip(paths, ids):
        try:
            with Image.open(path) as img:
                if saliencies is not None:
                    if config.saliency == "contrast-entropy":
                        saliencies[image_id] = contrast_entropy(img)
                    else:
                        saliencies[image_id] = 1.0
                tensor = preprocess(img)
        except (UnidentifiedImageError, OSError) as exc:
            print(f"warning: skipping {path}: {exc}", file=sys.stderr)
            skipped.append(str(path))
            if saliencies is not None:
                saliencies.pop(image_id, None)
            continue
        embedder.add(image_id, tensor)
        kept.append(image_id)
    return kept


def _grid_shape(k: int):
    height = int(np.sqrt(k))
    while k % height:
        height -= 1
    return k // height, height


def write_embeddings(path: Path, vectors: dict):
    lines = []
    for image_id in sorted(vectors):
        vec = np.asarray(vectors[image_id], dtype=np.float64)
        record = {
            "dim": int(vec.size),
            "id": image_id,
            "values": [float(v) for v in vec],
        }
        lines.append(json.dumps(record, sort_keys=True))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_manifest(path: Path, grid_ids: dict, saliencies: dict, target_ids):
    cases = []
    for prompt_id in sorted(grid_ids):
        ids = grid_ids[prompt_id]
        width, height = _grid_shape(len(ids))
        cases.append(
            {
                "prompt_id": prompt_id,
                "width": width,
                "height": height,
                "images": [
                    {"image_id": i, "embedding_ref": i, "saliency": saliencies[i]}
                    for i in ids
                ],
                "targets": [{"embedding_ref": t} for t in target_ids],
            }
        )
    doc = {"schema_version": SCHEMA_VERSION, "cases": cases}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_metadata(config: AdapterConfig, provenance: str):
    meta = {
        "schema_version": SCHEMA_VERSION,
        "model": config.model_name,
        "layer": FEATURE_LAYER,
        "dim": FEATURE_DIM,
        "weights": provenance,
        "input_size": INPUT_SIZE,
        "normalization": {"mean": list(NORM_MEAN), "std": list(NORM_STD)},
        "saliency": config.saliency,
    }
    path = Path(str(config.out_embeddings) + ".meta.json")
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def extract(config: AdapterConfig) -> dict:
    """Run the adapter end to end; returns a summary of written records.

    Unreadable images are skipped with a warning and listed in a
    `.skipped.txt` sidecar next to the embeddings file; a run that
    embeds no grid images at all is an error.
    """
    grids = discover_grids(config.input_dir)
    target_paths = []
    if config.targets_dir is not None:
        if not config.targets_dir.is_dir():
            raise AdapterError(f"targets directory not found: {config.targets_dir}")
        target_paths = _image_files(config.targets_dir)
        if not target_paths:
            raise AdapterError(f"no target images under {config.targets_dir}")

    grid_entries = {
        prompt_id: [
            (p, p.relative_to(config.input_dir).as_posix()) for p in paths
        ]
        for prompt_id, paths in grids.items()
    }
    target_entries = [(p, f"targets/{p.name}") for p in target_paths]
    all_ids = [i for entries in grid_entries.values() for _, i in entries]
    all_ids += [i for _, i in target_entries]
    if len(set(all_ids)) != len(all_ids):
        raise AdapterError("image ids collide across grids and targets")

    model, provenance = build_model(config)
    torch.set_num_threads(1)  # keeps batched forwards bit-reproducible

    skipped = []
    saliencies = {}
    embedder = _BatchEmbedder(model, config.batch_size)
    kept_grids = {}
    for prompt_id, entries in grid_entries.items():
        paths = [p for p, _ in entries]
        ids = [i for _, i in entries]
        kept = _embed_directory(embedder, paths, ids, config, skipped, saliencies)
        if kept:
            kept_grids[prompt_id] = kept
    kept_targets = _embed_directory(
        embedder,
        [p for p, _ in target_entries],
        [i for _, i in target_entries],
        config,
        skipped,
    )
    embedder.flush()

    if not kept_grids:
        raise AdapterError("no images could be embedded")
    if config.out_manifest is not None and not kept_targets:
        raise AdapterError("no target images could be embedded")

    write_embeddings(config.out_embeddings, embedder.vectors)
    _write_metadata(config, provenance)
    if skipped:
        sidecar = Path(str(config.out_embeddings) + ".skipped.txt")
        sidecar.write_text("\n".join(skipped) + "\n", encoding="utf-8")
    if config.out_manifest is not None:
        write_manifest(config.out_manifest, kept_grids, saliencies, kept_targets)

    return {
        "images": sum(len(v) for v in kept_grids.values()),
        "targets": len(kept_targets),
        "grids": len(kept_grids),
        "skipped": len(skipped),
    }
