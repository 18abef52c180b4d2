"""Backbone construction and batched feature extraction.

Supported extractors and their embedding dims:

    inception-v3-pool3   2048   final pooled features, checkpoint required
    inception-random     2048   same architecture, seeded random weights
    clip-rn50            1024   needs open_clip_torch plus a checkpoint
    mae                   768   ViT-B/16 encoder class token, checkpoint required
    vicreg               2048   ResNet-50 trunk, checkpoint required

The extractor id written into FEAT1 headers records everything that shapes
the numbers: architecture (plus seed for random weights), resize, and
channel policy, e.g. "inception-random-seed0+r299+gray3".
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import MissingCheckpoint, MissingDependency, UnreadableImage
from .feat1 import write_feat1
from .images import list_images, load_gray, to_channels

EXTRACTOR_NAMES = ("inception-v3-pool3", "inception-random", "clip-rn50", "mae", "vicreg")

_DEFAULT_RESIZE = {
    "inception-v3-pool3": 299,
    "inception-random": 299,
    "clip-rn50": 224,
    "mae": 224,
    "vicreg": 224,
}


@dataclass(frozen=True)
class ExtractorSpec:
    name: str
    checkpoint: str | None = None
    resize: int | None = None
    channel_policy: str = "gray3"
    seed: int = 0
    batch_size: int = 16

    def __post_init__(self):
        if self.name not in EXTRACTOR_NAMES:
            raise ValueError(f"unknown extractor {self.name!r}, "
                             f"expected one of {EXTRACTOR_NAMES}")

    @property
    def input_side(self) -> int:
        return self.resize if self.resize is not None else _DEFAULT_RESIZE[self.name]

    @property
    def extractor_id(self) -> str:
        base = self.name
        if self.name == "inception-random":
            base = f"{base}-seed{self.seed}"
        return f"{base}+r{self.input_side}+{self.channel_policy}"


# Classification heads are replaced with Identity for feature export, so
# checkpoints may carry extra head weights (or lack aux-branch ones).
_HEAD_KEYS = ("fc.", "heads.", "AuxLogits.")


def _load_checkpoint(model: nn.Module, spec: ExtractorSpec) -> None:
    if spec.checkpoint is None:
        raise MissingCheckpoint(
            f"{spec.name} needs a weights file (--checkpoint); only "
            "inception-random runs without one"
        )
    path = Path(spec.checkpoint)
    if not path.exists():
        raise MissingCheckpoint(f"checkpoint {path} does not exist")
    state = torch.load(path, map_location="cpu", weights_only=True)
    if isinstance(state, dict) and "state_dict" in state:
        state = state["state_dict"]
    result = model.load_state_dict(state, strict=False)
    bad = [
        k for k in list(result.missing_keys) + list(result.unexpected_keys)
        if not k.startswith(_HEAD_KEYS)
    ]
    if bad:
        raise MissingCheckpoint(
            f"{path} does not match the {spec.name} architecture "
            f"(first mismatches: {bad[:4]})"
        )


def build_model(spec: ExtractorSpec) -> nn.Module:
    """Construct the backbone in inference mode with a 2-D feature head."""
    from torchvision import models

    if spec.name in ("inception-v3-pool3", "inception-random"):
        if spec.name == "inception-random":
            torch.manual_seed(spec.seed)
        model = models.inception_v3(weights=None, init_weights=True, aux_logits=True)
        model.fc = nn.Identity()
        if spec.name == "inception-v3-pool3":
            _load_checkpoint(model, spec)
    elif spec.name == "mae":
        model = models.vit_b_16(weights=None)
        model.heads = nn.Identity()
        _load_checkpoint(model, spec)
    elif spec.name == "vicreg":
        model = models.resnet50(weights=None)
        model.fc = nn.Identity()
        _load_checkpoint(model, spec)
    else:
        model = _build_clip_rn50(spec)
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model


def _build_clip_rn50(spec: ExtractorSpec) -> nn.Module:
    try:
        import open_clip
    except ImportError as exc:
        raise MissingDependency(
            "clip-rn50 needs the open_clip_torch package (extra 'clip')"
        ) from exc
    model = open_clip.create_model("RN50", pretrained=None)
    _load_checkpoint(model, spec)

    class _ImageTower(nn.Module):
        def __init__(self, clip_model):
            super().__init__()
            self.clip_model = clip_model

        def forward(self, x):
            return self.clip_model.encode_image(x)

    return _ImageTower(model)


def _fc_stateless(model: nn.Module, batch: torch.Tensor) -> torch.Tensor:
    with torch.inference_mode():
        return model(batch)


def extract_folder(folder, spec: ExtractorSpec, out_path) -> tuple[int, int]:
    """Run the backbone over every image in ``folder`` and write FEAT1.

    One row per file, ordered by file name; returns (count, dim). Inputs are
    scaled from [0, 1] to [-1, 1] after resizing and channel expansion, the
    same policy for every backbone so distances stay comparable across runs.
    """
    paths = list_images(folder)
    if not paths:
        raise UnreadableImage(f"no PNG/HTIL images in {folder}")
    model = build_model(spec)
    side = spec.input_side

    rows = []
    for start in range(0, len(paths), spec.batch_size):
        chunk = paths[start : start + spec.batch_size]
        tensors = []
        for path in chunk:
            channels = to_channels(load_gray(path), spec.channel_policy)
            x = torch.from_numpy(np.ascontiguousarray(channels)).unsqueeze(0)
            x = torch.nn.functional.interpolate(
                x, size=(side, side), mode="bilinear", align_corners=False,
                antialias=True,
            )
            tensors.append(x)
        batch = torch.cat(tensors, dim=0) * 2.0 - 1.0
        feats = _fc_stateless(model, batch)
        rows.append(feats.cpu().numpy().astype(np.float32))

    mat = np.vstack(rows)
    write_feat1(out_path, spec.extractor_id, mat, [p.name for p in paths])
    return mat.shape[0], mat.shape[1]
