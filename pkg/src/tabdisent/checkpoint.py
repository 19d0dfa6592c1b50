"""Checkpoints: model config + every parameter tensor, plus the
preprocessing state needed to score raw CSV rows later.

npz container, no pickling. Parameter arrays are stored verbatim, so a
round-trip is bit-exact.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .data import NormalizationStats
from .errors import ParseError
from .model import ModelConfig, ModelParams, _layer_shapes

FORMAT_VERSION = 1


@dataclass
class CheckpointBundle:
    params: ModelParams
    normalization: NormalizationStats  # or None
    patch_mode: str


def save_checkpoint(path, params, normalization=None, patch_mode="none"):
    """Write params (+ optional preprocessing state) to an npz file."""
    payload = {
        "format_version": np.array(FORMAT_VERSION, dtype=np.int64),
        "config_json": np.array(json.dumps(asdict(params.config), sort_keys=True)),
        "patch_mode": np.array(patch_mode),
    }
    for name, tensor in params.tensors.items():
        payload[f"param.{name}"] = tensor.data
    if normalization is not None:
        payload["norm_method"] = np.array(normalization.method)
        payload["norm_loc"] = np.asarray(normalization.loc, dtype=np.float64)
        payload["norm_scale"] = np.asarray(normalization.scale, dtype=np.float64)
    np.savez(path, **payload)


def load_checkpoint(path):
    """Rebuild the parameter tensors and preprocessing state."""
    with np.load(path, allow_pickle=False) as archive:
        version = int(archive["format_version"])
        if version != FORMAT_VERSION:
            raise ParseError(f"{path}: unsupported checkpoint format {version}")
        config = ModelConfig(**json.loads(str(archive["config_json"])))
        tensors = {}
        for layer, _, _ in _layer_shapes(config):
            for kind in ("weight", "bias"):
                key = f"param.{layer}.{kind}"
                if key not in archive:
                    raise ParseError(f"{path}: missing parameter {key}")
                tensors[f"{layer}.{kind}"] = ad.tensor(archive[key], requires_grad=True)
        normalization = None
        if "norm_method" in archive:
            normalization = NormalizationStats(
                method=str(archive["norm_method"]),
                loc=archive["norm_loc"],
                scale=archive["norm_scale"],
            )
        return CheckpointBundle(
            params=ModelParams(config=config, tensors=tensors),
            normalization=normalization,
            patch_mode=str(archive["patch_mode"]),
        )
