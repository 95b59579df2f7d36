"""Per-image feature extraction into the pipeline's feature-file format.

The extractor is pluggable: built-in deterministic image statistics for
tests and small corpora, or any torchvision model's named layer for real
CNN activations. Whatever the extractor, the output is the same manifest
plus little-endian float32 payload, rows ordered by sorted filename, and
an ingest record documenting which model and layer produced the rows.
"""

from __future__ import annotations

import json
import os
import warnings
from pathlib import Path
from typing import Callable

import numpy as np
from PIL import Image, UnidentifiedImageError

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".ppm", ".pgm", ".tif", ".tiff"}

Extractor = Callable[[Image.Image], np.ndarray]


def _pixel_grid_extractor(layer: str) -> Extractor:
    """Grayscale N x N downsample; layer name ``grayN`` selects the grid."""
    if not layer.startswith("gray"):
        raise ValueError(f"pixel-grid layers are named grayN, got {layer!r}")
    try:
        side = int(layer[4:])
    except ValueError as exc:
        raise ValueError(f"pixel-grid layers are named grayN, got {layer!r}") from exc
    if side < 1:
        raise ValueError("grid side must be >= 1")

    def extract(image: Image.Image) -> np.ndarray:
        gray = image.convert("L").resize((side, side), Image.BILINEAR)
        return (np.asarray(gray, dtype=np.float32) / 255.0).reshape(-1)

    return extract


def _pixel_stats_extractor(layer: str) -> Extractor:
    """Per-channel mean/std/min/max; the only layer is ``moments``."""
    if layer != "moments":
        raise ValueError(f"pixel-stats has a single layer 'moments', got {layer!r}")

    def extract(image: Image.Image) -> np.ndarray:
        rgb = np.asarray(image.convert("RGB"), dtype=np.float32) / 255.0
        channels = rgb.reshape(-1, 3)
        return np.concatenate(
            [channels.mean(0), channels.std(0), channels.min(0), channels.max(0)]
        ).astype(np.float32)

    return extract


def _torchvision_extractor(model_name: str, layer: str, pretrained: bool) -> Extractor:
    """Activations of one named submodule of a torchvision model."""
    try:
        import torch
        from torchvision import models, transforms
    except ImportError as exc:
        raise RuntimeError(
            "torchvision models need the optional [torch] dependencies"
        ) from exc

    weights = "DEFAULT" if pretrained else None
    model = models.get_model(model_name, weights=weights)
    model.eval()
    module = dict(model.named_modules()).get(layer)
    if module is None:
        raise ValueError(f"model {model_name!r} has no layer named {layer!r}")

    captured: dict[str, "torch.Tensor"] = {}

    def hook(_module, _inputs, output):
        captured["value"] = output

    module.register_forward_hook(hook)
    preprocess = transforms.Compose(
        [
            transforms.Resize(256),
            transforms.CenterCrop(224),
            transforms.ToTensor(),
            transforms.Normalize(
                mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]
            ),
        ]
    )

    def extract(image: Image.Image) -> np.ndarray:
        batch = preprocess(image.convert("RGB")).unsqueeze(0)
        with torch.no_grad():
            model(batch)
        return captured["value"].reshape(-1).numpy().astype(np.float32)

    return extract


def build_extractor(model_id: str, layer: str, pretrained: bool = True) -> Extractor:
    """Resolve a model identifier and layer name to an extractor callable."""
    if model_id == "pixel-grid":
        return _pixel_grid_extractor(layer)
    if model_id == "pixel-stats":
        return _pixel_stats_extractor(layer)
    if model_id.startswith("torchvision:"):
        return _torchvision_extractor(model_id.split(":", 1)[1], layer, pretrained)
    raise ValueError(
        f"unknown model {model_id!r}; use pixel-grid, pixel-stats or torchvision:<name>"
    )


def list_images(image_dir: str | Path) -> list[Path]:
    """Image files under one directory, ordered by filename."""
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise ValueError(f"not a directory: {image_dir}")
    return sorted(
        (p for p in image_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES),
        key=lambda p: p.name,
    )


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def extract_image_features(
    image_dir: str | Path,
    model_id: str,
    layer: str,
    out_prefix: str | Path,
    pretrained: bool = True,
) -> tuple[Path, Path]:
    """Extract one feature row per readable image into manifest + payload.

    Rows follow sorted filename order; image ids are filename stems.
    Unreadable or corrupt images are skipped with a warning and excluded
    from the ordering. Returns (manifest path, payload path).
    """
    extractor = build_extractor(model_id, layer, pretrained)
    paths = list_images(image_dir)
    if not paths:
        raise ValueError(f"no images found in {image_dir}")

    ids: list[str] = []
    rows: list[np.ndarray] = []
    for path in paths:
        try:
            with Image.open(path) as image:
                row = extractor(image)
        except (OSError, UnidentifiedImageError) as exc:
            warnings.warn(f"skipping unreadable image {path.name}: {exc}")
            continue
        if ids and row.shape != rows[0].shape:
            raise ValueError(
                f"{path.name}: extractor returned {row.shape}, expected {rows[0].shape}"
            )
        ids.append(path.stem)
        rows.append(row)
    if not rows:
        raise ValueError(f"no readable images in {image_dir}")
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate image ids after stripping extensions")

    out_prefix = Path(out_prefix)
    out_prefix.parent.mkdir(parents=True, exist_ok=True)
    manifest_path = out_prefix.with_name(out_prefix.name + ".json")
    payload_path = out_prefix.with_name(out_prefix.name + ".bin")
    record_path = out_prefix.with_name(out_prefix.name + ".ingest.json")

    data = np.stack(rows).astype("<f4")
    _atomic_write_bytes(payload_path, data.tobytes())
    manifest = {
        "num_images": int(data.shape[0]),
        "num_dims": int(data.shape[1]),
        "dtype": "f32le",
        "order": "row-major",
        "data": payload_path.name,
        "image_ids": ids,
    }
    _atomic_write_text(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    record = {
        "source_dir": str(image_dir),
        "model": model_id,
        "layer": layer,
        "image_ids": ids,
        "outputs": [manifest_path.name, payload_path.name],
    }
    _atomic_write_text(record_path, json.dumps(record, indent=2, sort_keys=True) + "\n")
    return manifest_path, payload_path
