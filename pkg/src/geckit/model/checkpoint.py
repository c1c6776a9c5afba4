"""Model checkpointing: a JSON manifest plus flat little-endian float32
parameter data in manifest order."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .transformer import ModelConfig, TransformerModel

MANIFEST_NAME = "manifest.json"
PARAMS_NAME = "params.bin"
_DTYPE = "<f4"


def save_checkpoint(
    model: TransformerModel,
    directory: str | Path,
    seed: int = 0,
    step: int = 0,
) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": asdict(model.config),
        "dtype": _DTYPE,
        "seed": seed,
        "step": step,
        "parameters": [
            {"name": name, "shape": list(t.data.shape)} for name, t in model.params.items()
        ],
    }
    (directory / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    flat = np.concatenate([t.data.reshape(-1) for t in model.params.values()])
    flat.astype(_DTYPE).tofile(directory / PARAMS_NAME)


def load_checkpoint(directory: str | Path) -> tuple[TransformerModel, dict]:
    """Rebuild a model; stored float32 values widen exactly when the
    configured parameter dtype is float64."""
    directory = Path(directory)
    manifest = json.loads((directory / MANIFEST_NAME).read_text(encoding="utf-8"))
    config = ModelConfig(**manifest["config"])
    flat = np.fromfile(directory / PARAMS_NAME, dtype=manifest["dtype"]).astype(config.np_dtype)
    params: dict[str, Tensor] = {}
    offset = 0
    for entry in manifest["parameters"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        params[entry["name"]] = Tensor(
            flat[offset : offset + size].reshape(shape), requires_grad=True
        )
        offset += size
    if offset != flat.size:
        raise ValueError(
            f"checkpoint size mismatch: manifest expects {offset} values, file has {flat.size}"
        )
    return TransformerModel(config, params=params), manifest
