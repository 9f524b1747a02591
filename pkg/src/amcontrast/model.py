"""Encoder, projection head, linear classifier, and checkpoint IO.

The encoder is a small 1-D conv stack over the two IQ rails with global
average pooling, so it accepts any segment length >= 4 and always emits a
fixed-width feature vector. The projection head used during contrastive
training is two affine layers with batch norm and LeakyReLU in between; it
is dropped for every downstream evaluation, which operates on the
concatenated features of an instance's two segments.

Checkpoints are a line-oriented UTF-8 header (specs, seed, epoch, tensor
table) followed by the raw little-endian float32 parameter blobs in the
declared order; integer buffers ride in the header itself.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .losses import l2_normalize
from .pairing import SegmentViewBatch

DEFAULT_WIDTHS = (32, 64, 64, 64)
DEFAULT_KERNEL = 5
MIN_INPUT_LEN = 4
CHECKPOINT_VERSION = 1
HEADER_END = "---"


class CheckpointFormatError(ValueError):
    """Checkpoint file is malformed, truncated, or of an unsupported version."""


class ConvEncoder(nn.Module):
    """Conv1d blocks (conv, batch norm, LeakyReLU, halving max pool) + GAP."""

    def __init__(self, in_channels: int = 2, widths: tuple[int, ...] = DEFAULT_WIDTHS,
                 kernel: int = DEFAULT_KERNEL):
        super().__init__()
        if kernel % 2 != 1:
            raise ValueError(f"kernel must be odd to preserve length, got {kernel}")
        self.in_channels = in_channels
        self.widths = tuple(widths)
        self.kernel = kernel
        blocks = []
        prev = in_channels
        for w in widths:
            blocks += [nn.Conv1d(prev, w, kernel, padding=kernel // 2),
                       nn.BatchNorm1d(w), nn.LeakyReLU(),
                       nn.MaxPool1d(2, ceil_mode=True)]
            prev = w
        self.blocks = nn.Sequential(*blocks)

    @property
    def feature_dim(self) -> int:
        return self.widths[-1]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ValueError(f"expected (N, {self.in_channels}, L) input, "
                             f"got {tuple(x.shape)}")
        if x.shape[2] < MIN_INPUT_LEN:
            raise ValueError(f"input length {x.shape[2]} < minimum {MIN_INPUT_LEN}")
        return self.blocks(x).mean(dim=2)


class ProjectionHead(nn.Module):
    """Two affine layers with batch norm and LeakyReLU between them."""

    def __init__(self, in_dim: int = 64, hidden_dim: int = 256, out_dim: int = 128):
        super().__init__()
        self.in_dim, self.hidden_dim, self.out_dim = in_dim, hidden_dim, out_dim
        self.net = nn.Sequential(nn.Linear(in_dim, hidden_dim),
                                 nn.BatchNorm1d(hidden_dim), nn.LeakyReLU(),
                                 nn.Linear(hidden_dim, out_dim))

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.net(z)


class LinearClassifier(nn.Module):
    """Single affine map from concatenated segment features to class scores."""

    def __init__(self, in_dim: int, num_classes: int):
        super().__init__()
        self.in_dim, self.num_classes = in_dim, num_classes
        self.linear = nn.Linear(in_dim, num_classes)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return self.linear(features)


def linear_classify(features: torch.Tensor, classifier: LinearClassifier) -> torch.Tensor:
    """Class scores for feature rows; argmax ties resolve to the lowest index."""
    return classifier(features)


def init_parameters(module: nn.Module, generator: torch.Generator) -> None:
    """Deterministic init: fan-in uniform weights, zero biases, identity norms."""
    for m in module.modules():
        if isinstance(m, (nn.Conv1d, nn.Linear)):
            fan_in = m.weight.shape[1] * (m.weight.shape[2] if m.weight.ndim == 3 else 1)
            bound = 1.0 / np.sqrt(fan_in)
            with torch.no_grad():
                m.weight.uniform_(-bound, bound, generator=generator)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, nn.BatchNorm1d):
            with torch.no_grad():
                m.weight.fill_(1.0)
                m.bias.zero_()


@dataclass
class EmbeddingBatch:
    """Encoder features and (normalized) projections for all 4B segment views."""

    z: torch.Tensor       # (B, 2, 2, feature_dim)
    h: torch.Tensor       # (B, 2, 2, proj_dim)
    h_norm: torch.Tensor  # (B, 2, 2, proj_dim), unit rows


def encode(views: SegmentViewBatch, encoder: ConvEncoder,
           projector: ProjectionHead, device: str = "cpu") -> EmbeddingBatch:
    """Run every segment view through the shared encoder and projector.

    When both segments have the same length all 4B views go through in one
    forward pass (so training-mode batch norm sees the whole contrastive
    batch); with an odd instance length the two segment slots are processed
    in two passes of 2B.
    """
    b = views.batch_size
    lead = torch.as_tensor(views.seg_lead, dtype=torch.float32, device=device)
    trail = torch.as_tensor(views.seg_trail, dtype=torch.float32, device=device)
    lead = lead.reshape(b * 2, lead.shape[2], lead.shape[3])
    trail = trail.reshape(b * 2, trail.shape[2], trail.shape[3])
    if lead.shape[-1] == trail.shape[-1]:
        z_all = encoder(torch.cat([lead, trail], dim=0))
        h_all = projector(z_all)
        z0, z1 = z_all[:2 * b], z_all[2 * b:]
        h0, h1 = h_all[:2 * b], h_all[2 * b:]
    else:
        z0, z1 = encoder(lead), encoder(trail)
        h0, h1 = projector(z0), projector(z1)
    feat, proj = z0.shape[-1], h0.shape[-1]
    z = torch.stack([z0.reshape(b, 2, feat), z1.reshape(b, 2, feat)], dim=2)
    h = torch.stack([h0.reshape(b, 2, proj), h1.reshape(b, 2, proj)], dim=2)
    return EmbeddingBatch(z=z, h=h, h_norm=l2_normalize(h))


def instance_features(samples: torch.Tensor, encoder: ConvEncoder) -> torch.Tensor:
    """Concatenate the two un-augmented segment features of each instance.

    samples is (N, 2, T); the result is (N, 2 * feature_dim). The projection
    head plays no part here by design.
    """
    t = samples.shape[-1]
    lead = t // 2
    z0 = encoder(samples[..., :lead])
    z1 = encoder(samples[..., lead:])
    return torch.cat([z0, z1], dim=1)


def state_hash(module: nn.Module) -> str:
    """SHA-256 over all parameters and buffers; order-stable and exact."""
    digest = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        digest.update(name.encode())
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def _module_spec_lines(name: str, module: nn.Module) -> list[str]:
    if isinstance(module, ConvEncoder):
        return [f"{name}.type=conv-encoder",
                f"{name}.in_channels={module.in_channels}",
                f"{name}.widths=" + ",".join(str(w) for w in module.widths),
                f"{name}.kernel={module.kernel}"]
    if isinstance(module, ProjectionHead):
        return [f"{name}.type=projection-head",
                f"{name}.in_dim={module.in_dim}",
                f"{name}.hidden_dim={module.hidden_dim}",
                f"{name}.out_dim={module.out_dim}"]
    if isinstance(module, LinearClassifier):
        return [f"{name}.type=linear-classifier",
                f"{name}.in_dim={module.in_dim}",
                f"{name}.num_classes={module.num_classes}"]
    raise CheckpointFormatError(f"cannot describe module type {type(module).__name__}")


def _build_module(fields: dict[str, str]) -> nn.Module:
    kind = fields["type"]
    if kind == "conv-encoder":
        return ConvEncoder(in_channels=int(fields["in_channels"]),
                           widths=tuple(int(w) for w in fields["widths"].split(",")),
                           kernel=int(fields["kernel"]))
    if kind == "projection-head":
        return ProjectionHead(in_dim=int(fields["in_dim"]),
                              hidden_dim=int(fields["hidden_dim"]),
                              out_dim=int(fields["out_dim"]))
    if kind == "linear-classifier":
        return LinearClassifier(in_dim=int(fields["in_dim"]),
                                num_classes=int(fields["num_classes"]))
    raise CheckpointFormatError(f"unknown module type {kind!r}")


def save_checkpoint(path: str, modules: dict[str, nn.Module], meta: dict) -> None:
    """Write header + float32 blobs; meta values are stringified key=value."""
    lines = [f"version={CHECKPOINT_VERSION}",
             "modules=" + ",".join(modules)]
    for key, value in sorted(meta.items()):
        lines.append(f"meta.{key}={value}")
    tensor_entries = []
    blobs = []
    for name, module in modules.items():
        lines += _module_spec_lines(name, module)
        for tname, tensor in module.state_dict().items():
            full = f"{name}.{tname}"
            if not tensor.is_floating_point():
                lines.append(f"intbuf.{full}={int(tensor)}")
                continue
            arr = tensor.detach().cpu().numpy().astype("<f4")
            tensor_entries.append(full + ":" + "x".join(str(s) for s in arr.shape))
            blobs.append(arr.tobytes())
    lines.append("tensors=" + ";".join(tensor_entries))
    blob = b"".join(blobs)
    lines.append(f"blob_bytes={len(blob)}")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n" + HEADER_END + "\n").encode("utf-8"))
        fh.write(blob)


def load_checkpoint(path: str) -> tuple[dict[str, nn.Module], dict[str, str]]:
    """Rebuild the saved modules and return them with the meta mapping."""
    with open(path, "rb") as fh:
        raw = fh.read()
    marker = (HEADER_END + "\n").encode("utf-8")
    try:
        header_end = raw.index(b"\n" + marker)
    except ValueError:
        raise CheckpointFormatError("missing header terminator") from None
    header = raw[:header_end].decode("utf-8")
    blob = raw[header_end + 1 + len(marker):]
    fields: dict[str, str] = {}
    for line in header.splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            fields[key] = value
    if int(fields.get("version", "-1")) != CHECKPOINT_VERSION:
        raise CheckpointFormatError(
            f"unsupported checkpoint version {fields.get('version')!r}")
    if len(blob) != int(fields["blob_bytes"]):
        raise CheckpointFormatError(
            f"blob holds {len(blob)} bytes, header says {fields['blob_bytes']}")
    modules: dict[str, nn.Module] = {}
    for name in fields["modules"].split(","):
        spec = {key.split(".", 1)[1]: value for key, value in fields.items()
                if key.startswith(name + ".")}
        modules[name] = _build_module(spec)
    offset = 0
    states = {name: {} for name in modules}
    if fields["tensors"]:
        for entry in fields["tensors"].split(";"):
            full, shape_text = entry.split(":")
            shape = tuple(int(s) for s in shape_text.split("x")) if shape_text else ()
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(blob, dtype="<f4", count=count,
                                offset=offset).reshape(shape)
            offset += count * 4
            owner, tname = full.split(".", 1)
            states[owner][tname] = torch.from_numpy(arr.copy())
    for key, value in fields.items():
        if key.startswith("intbuf."):
            owner, tname = key[len("intbuf."):].split(".", 1)
            states[owner][tname] = torch.tensor(int(value))
    for name, module in modules.items():
        module.load_state_dict(states[name])
    meta = {key[len("meta."):]: value for key, value in fields.items()
            if key.startswith("meta.")}
    return modules, meta
