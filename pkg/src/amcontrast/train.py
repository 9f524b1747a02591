"""Pretraining, linear-probe, and fine-tune pipelines.

Pretraining is label-blind: the training labels are wrapped in a guard that
raises on any read, and the only sanctioned exception is the corruption
probe's diagnostic channel, whose reads are counted and asserted against.

All randomness is owned: numpy streams derive from (seed, purpose) pairs and
torch initialization uses an explicit generator, so two runs with the same
config and seed produce byte-identical checkpoints on the same platform.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .augment import AugmentPolicy, apply_policy
from .config import ExperimentConfig
from .data import (BudgetViolationError, SignalDataset, DatasetManifest, Split,
                   check_budget_containment)
from .diagnostics import CorruptionSpec, corrupt_positive_pairs
from .losses import (NonFiniteLossError, consistency_losses, instance_nt_xent,
                     l2_normalize)
from .model import (ConvEncoder, LinearClassifier, ProjectionHead, encode,
                    init_parameters, instance_features, save_checkpoint,
                    state_hash)
from .pairing import make_views

CSV_HEADER = ["epoch", "step", "seed", "l_sc", "l_ac", "l_jc", "l_total",
              "acc_overall", "acc_per_snr_json", "wall_s"]

DIVERGENCE_FACTOR = 10.0
DIVERGENCE_PATIENCE = 100
CHECKPOINT_EVERY = 40

# Purpose tags for deriving independent numpy streams from one seed.
_STREAM_SHUFFLE = 11
_STREAM_AUGMENT_A = 13
_STREAM_AUGMENT_B = 14
_STREAM_CROP = 17
_STREAM_CORRUPTION = 19
_STREAM_PROBE = 23


class LabelLeakError(RuntimeError):
    """Training labels were read by a label-blind pipeline."""


class TrainingDivergedError(RuntimeError):
    """The optimized loss went non-finite or stayed >10x its initial value."""


class FrozenEncoderError(RuntimeError):
    """The encoder changed during a probe that promised to keep it frozen."""


class GuardedLabels:
    """Label array that raises on every access except a counted diagnostic one.

    The guard exists to make label-blindness a checked property instead of a
    convention: pretraining holds only this wrapper, and anything that would
    observe a label — indexing, iteration, casting to an array, comparison —
    raises. The corruption probe reads labels through diagnostic_read(),
    which increments a counter that pipelines assert on.
    """

    def __init__(self, labels: np.ndarray):
        self._labels = np.asarray(labels).copy()
        self._labels.setflags(write=False)
        self.diagnostic_reads = 0

    def diagnostic_read(self) -> np.ndarray:
        """Sanctioned access for the corruption probe; counted."""
        self.diagnostic_reads += 1
        return self._labels

    def _deny(self, *_args, **_kwargs):
        raise LabelLeakError("labels are guarded during label-blind training")

    __getitem__ = _deny
    __iter__ = _deny
    __len__ = _deny
    __array__ = _deny
    __eq__ = _deny  # type: ignore[assignment]
    __hash__ = None  # type: ignore[assignment]


@dataclass
class MetricsRecord:
    """One logged row; loss fields are None for rows that don't have them."""

    epoch: int
    step: int
    seed: int
    l_sc: float | None = None
    l_ac: float | None = None
    l_jc: float | None = None
    l_total: float | None = None
    acc_overall: float | None = None
    acc_per_snr: dict[int, float] | None = None
    wall_s: float = 0.0


def write_metrics_csv(path: str, records: list[MetricsRecord]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            per_snr = ("" if r.acc_per_snr is None else
                       json.dumps({str(k): v for k, v in sorted(r.acc_per_snr.items())}))
            row = [r.epoch, r.step, r.seed]
            row += ["" if v is None else repr(v)
                    for v in (r.l_sc, r.l_ac, r.l_jc, r.l_total, r.acc_overall)]
            row += [per_snr, repr(r.wall_s)]
            writer.writerow(row)


def read_metrics_csv(path: str) -> list[MetricsRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected metrics header: {header}")
        for row in reader:
            vals = dict(zip(CSV_HEADER, row))
            per_snr = (None if vals["acc_per_snr_json"] == "" else
                       {int(k): float(v)
                        for k, v in json.loads(vals["acc_per_snr_json"]).items()})
            records.append(MetricsRecord(
                epoch=int(vals["epoch"]), step=int(vals["step"]),
                seed=int(vals["seed"]),
                l_sc=None if vals["l_sc"] == "" else float(vals["l_sc"]),
                l_ac=None if vals["l_ac"] == "" else float(vals["l_ac"]),
                l_jc=None if vals["l_jc"] == "" else float(vals["l_jc"]),
                l_total=None if vals["l_total"] == "" else float(vals["l_total"]),
                acc_overall=(None if vals["acc_overall"] == ""
                             else float(vals["acc_overall"])),
                acc_per_snr=per_snr,
                wall_s=float(vals["wall_s"])))
    return records


def _stream(seed: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, purpose)))


def build_models(cfg: ExperimentConfig, seed: int) -> tuple[ConvEncoder, ProjectionHead]:
    """Seed-deterministic encoder + projector with the config's shape."""
    encoder = ConvEncoder(in_channels=2, widths=cfg.encoder_widths,
                          kernel=cfg.encoder_kernel)
    projector = ProjectionHead(encoder.feature_dim, cfg.projector_hidden,
                               cfg.projector_out)
    gen = torch.Generator().manual_seed(seed)
    init_parameters(encoder, gen)
    init_parameters(projector, gen)
    return encoder, projector


@dataclass
class PretrainResult:
    encoder: ConvEncoder
    projector: ProjectionHead
    records: list[MetricsRecord]
    label_reads: int
    checkpoint_path: str | None = None
    corruption_events: int = 0


class _DivergenceGuard:
    """Raises on non-finite losses or sustained blow-up past 10x initial."""

    def __init__(self):
        self._initial = None
        self._high = 0

    def check(self, value: float, step: int) -> None:
        if not math.isfinite(value):
            raise TrainingDivergedError(f"non-finite loss {value!r} at step {step}")
        if self._initial is None:
            self._initial = max(value, 1e-8)
            return
        if value > DIVERGENCE_FACTOR * self._initial:
            self._high += 1
            if self._high >= DIVERGENCE_PATIENCE:
                raise TrainingDivergedError(
                    f"loss {value:.4g} stayed above {DIVERGENCE_FACTOR}x its "
                    f"initial value {self._initial:.4g} for "
                    f"{DIVERGENCE_PATIENCE} consecutive steps (step {step})")
        else:
            self._high = 0


def _instance_views(batch: np.ndarray, policy_a: AugmentPolicy,
                    policy_b: AugmentPolicy, rng_a: np.random.Generator,
                    rng_b: np.random.Generator) -> np.ndarray:
    """Two augmented full-length views per instance, shape (B, 2, 2, T)."""
    views = np.empty((batch.shape[0], 2) + batch.shape[1:], dtype=batch.dtype)
    for n in range(batch.shape[0]):
        views[n, 0] = apply_policy(batch[n], policy_a, rng_a)
        views[n, 1] = apply_policy(batch[n], policy_b, rng_b)
    return views


def pretrain(dataset: SignalDataset, manifest: DatasetManifest, split: Split,
             cfg: ExperimentConfig, seed: int,
             out_dir: str | None = None) -> PretrainResult:
    """Self-supervised pretraining on the split's train portion.

    Dispatches on cfg.method: "segment-contrast" optimizes the configured
    subset of the three consistency terms over 4B segment views;
    "instance-contrast" optimizes the standard two-view objective over full
    instances. Labels are never consulted unless the corruption probe is
    active, and then only through the counted diagnostic channel.
    """
    if cfg.method not in ("segment-contrast", "instance-contrast"):
        raise ValueError(f"pretrain does not handle method {cfg.method!r}")
    samples = dataset.samples[split.train]
    guard = GuardedLabels(dataset.labels[split.train])
    n = samples.shape[0]
    if n < 2:
        raise ValueError("pretraining needs at least two instances")

    shuffle_rng = _stream(seed, _STREAM_SHUFFLE)
    rng_a = _stream(seed, _STREAM_AUGMENT_A)
    rng_b = _stream(seed, _STREAM_AUGMENT_B)
    crop_rng = _stream(seed, _STREAM_CROP)
    corruption_rng = _stream(seed, _STREAM_CORRUPTION)
    policy_a = AugmentPolicy(ops=cfg.augment_ops, activation_prob=cfg.activation_prob)
    policy_b = AugmentPolicy(ops=cfg.augment_ops, activation_prob=cfg.activation_prob)

    encoder, projector = build_models(cfg, seed)
    encoder.train()
    projector.train()
    params = list(encoder.parameters()) + list(projector.parameters())
    optimizer = torch.optim.Adam(params, lr=cfg.learning_rate)

    corruption = None
    if cfg.corruption_mode != "none":
        if cfg.method != "segment-contrast":
            raise ValueError("corruption applies only to segment-contrast")
        corruption = CorruptionSpec(mode=cfg.corruption_mode, p=cfg.corruption_p,
                                    freeze_assignments=cfg.corruption_freeze)
    frozen_plans: dict[int, list] = {}
    corruption_events = 0

    guard_ = _DivergenceGuard()
    records: list[MetricsRecord] = []
    start = time.perf_counter()
    gstep = 0
    for epoch in range(cfg.pretrain_epochs):
        perm = shuffle_rng.permutation(n)
        for pos, bstart in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[bstart:bstart + cfg.batch_size]
            if len(idx) < 2:
                continue  # a singleton tail has no in-batch negatives
            batch = samples[idx]
            optimizer.zero_grad()
            if cfg.method == "segment-contrast":
                views = make_views(batch, policy_a, policy_b, rng_a, rng_b,
                                   segment_len=cfg.segment_len,
                                   random_crop=cfg.random_crop, crop_rng=crop_rng)
                relations = None
                if corruption is not None:
                    batch_labels = guard.diagnostic_read()[idx]
                    replay = frozen_plans.get(pos) if corruption.freeze_assignments else None
                    views, relations, plan = corrupt_positive_pairs(
                        views, batch_labels, corruption, corruption_rng,
                        replay=replay)
                    if corruption.freeze_assignments and pos not in frozen_plans:
                        frozen_plans[pos] = plan
                    corruption_events += len(views.corruption_log)
                emb = encode(views, encoder, projector, device=cfg.device)
                try:
                    parts = consistency_losses(emb.h_norm, cfg.tau,
                                               relations=relations,
                                               symmetric=cfg.symmetric_anchors)
                except NonFiniteLossError as exc:
                    raise TrainingDivergedError(str(exc)) from exc
                total = sum(parts[c] for c in cfg.loss_components)
                rec = MetricsRecord(
                    epoch=epoch, step=gstep, seed=seed,
                    l_sc=parts["sc"].item(), l_ac=parts["ac"].item(),
                    l_jc=parts["jc"].item(), l_total=total.item(),
                    wall_s=time.perf_counter() - start)
            else:
                views = _instance_views(batch, policy_a, policy_b, rng_a, rng_b)
                b, _, c, t = views.shape
                xs = torch.as_tensor(views.reshape(b * 2, c, t), dtype=torch.float32,
                                     device=cfg.device)
                h = l2_normalize(projector(encoder(xs))).reshape(b, 2, -1)
                try:
                    total = instance_nt_xent(h, cfg.tau)
                except NonFiniteLossError as exc:
                    raise TrainingDivergedError(str(exc)) from exc
                rec = MetricsRecord(epoch=epoch, step=gstep, seed=seed,
                                    l_total=total.item(),
                                    wall_s=time.perf_counter() - start)
            guard_.check(rec.l_total, gstep)
            total.backward()
            optimizer.step()
            records.append(rec)
            gstep += 1
        if out_dir is not None and (epoch + 1) % CHECKPOINT_EVERY == 0 \
                and (epoch + 1) < cfg.pretrain_epochs:
            _save_pretrain_checkpoint(
                os.path.join(out_dir, f"checkpoint_epoch{epoch + 1:04d}.ckpt"),
                encoder, projector, cfg, seed, epoch + 1)

    if cfg.corruption_mode == "none" and guard.diagnostic_reads != 0:
        raise LabelLeakError(
            f"{guard.diagnostic_reads} label reads during label-blind pretraining")

    checkpoint_path = None
    if out_dir is not None:
        checkpoint_path = os.path.join(out_dir, "checkpoint_final.ckpt")
        _save_pretrain_checkpoint(checkpoint_path, encoder, projector, cfg,
                                  seed, cfg.pretrain_epochs)
        write_metrics_csv(os.path.join(out_dir, "metrics.csv"), records)
    encoder.eval()
    projector.eval()
    return PretrainResult(encoder=encoder, projector=projector, records=records,
                          label_reads=guard.diagnostic_reads,
                          checkpoint_path=checkpoint_path,
                          corruption_events=corruption_events)


def _save_pretrain_checkpoint(path, encoder, projector, cfg, seed, epoch):
    save_checkpoint(path, {"encoder": encoder, "projector": projector},
                    meta={"seed": seed, "epoch": epoch, "method": cfg.method,
                          "tau": cfg.tau})


def pretrain_instance_baseline(dataset, manifest, split, cfg, seed,
                               out_dir=None) -> PretrainResult:
    """Instance-level contrastive baseline under the same budget and encoder."""
    from dataclasses import replace
    return pretrain(dataset, manifest, split, replace(cfg, method="instance-contrast"),
                    seed, out_dir=out_dir)


@dataclass
class ProbeResult:
    classifier: LinearClassifier
    records: list[MetricsRecord]
    acc_overall: float
    acc_per_snr: dict[int, float]
    encoder_hash: str


def _accuracy(scores: torch.Tensor, labels: np.ndarray,
              snr: np.ndarray) -> tuple[float, dict[int, float]]:
    pred = scores.argmax(dim=1).cpu().numpy()
    correct = pred == labels
    overall = float(correct.mean())
    per_snr = {int(s): float(correct[snr == s].mean())
               for s in np.unique(snr)}
    return overall, per_snr


def _frozen_features(encoder: ConvEncoder, samples: np.ndarray,
                     device: str, chunk: int = 512) -> torch.Tensor:
    """Concatenated half-segment features with the encoder in eval mode."""
    encoder.eval()
    outs = []
    with torch.no_grad():
        for lo in range(0, samples.shape[0], chunk):
            xs = torch.as_tensor(samples[lo:lo + chunk], dtype=torch.float32,
                                 device=device)
            outs.append(instance_features(xs, encoder))
    return torch.cat(outs, dim=0)


def linear_probe(encoder: ConvEncoder, dataset: SignalDataset,
                 manifest: DatasetManifest, split: Split, cfg: ExperimentConfig,
                 seed: int, out_dir: str | None = None) -> ProbeResult:
    """Train a linear classifier on frozen features of the labeled subset.

    The encoder is hashed before and after; any drift raises
    FrozenEncoderError. Features are computed once in eval mode and cached,
    so probe epochs touch only the classifier.
    """
    check_budget_containment(split)
    if np.intersect1d(split.labeled, split.test).size:
        raise BudgetViolationError("labeled subset overlaps the test split")
    hash_before = state_hash(encoder)

    feats_train = _frozen_features(encoder, dataset.samples[split.labeled], cfg.device)
    feats_test = _frozen_features(encoder, dataset.samples[split.test], cfg.device)
    y_train = torch.as_tensor(dataset.labels[split.labeled], dtype=torch.long,
                              device=cfg.device)
    test_labels = dataset.labels[split.test]
    test_snr = dataset.snr_db[split.test]

    classifier = LinearClassifier(feats_train.shape[1], len(manifest.class_names))
    init_parameters(classifier, torch.Generator().manual_seed(seed))
    classifier.train()
    optimizer = torch.optim.Adam(classifier.parameters(), lr=cfg.learning_rate)
    loss_fn = torch.nn.CrossEntropyLoss()
    rng = _stream(seed, _STREAM_PROBE)

    records = []
    start = time.perf_counter()
    n = feats_train.shape[0]
    batch = min(cfg.batch_size, n)
    gstep = 0
    acc_overall, acc_per_snr = 0.0, {}
    for epoch in range(cfg.probe_epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        nb = 0
        for lo in range(0, n, batch):
            idx = torch.as_tensor(perm[lo:lo + batch], dtype=torch.long)
            optimizer.zero_grad()
            loss = loss_fn(classifier(feats_train[idx]), y_train[idx])
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item()
            nb += 1
            gstep += 1
        classifier.eval()
        with torch.no_grad():
            acc_overall, acc_per_snr = _accuracy(classifier(feats_test),
                                                 test_labels, test_snr)
        classifier.train()
        records.append(MetricsRecord(epoch=epoch, step=gstep, seed=seed,
                                     l_total=epoch_loss / max(nb, 1),
                                     acc_overall=acc_overall,
                                     acc_per_snr=acc_per_snr,
                                     wall_s=time.perf_counter() - start))
    classifier.eval()

    hash_after = state_hash(encoder)
    if hash_after != hash_before:
        raise FrozenEncoderError(
            f"encoder hash changed during probe: {hash_before} -> {hash_after}")
    if out_dir is not None:
        write_metrics_csv(os.path.join(out_dir, "probe_metrics.csv"), records)
        save_checkpoint(os.path.join(out_dir, "probe_classifier.ckpt"),
                        {"classifier": classifier},
                        meta={"seed": seed, "acc_overall": acc_overall})
    return ProbeResult(classifier=classifier, records=records,
                       acc_overall=acc_overall, acc_per_snr=acc_per_snr,
                       encoder_hash=hash_after)


@dataclass
class FineTuneResult:
    encoder: ConvEncoder
    classifier: LinearClassifier
    records: list[MetricsRecord]
    acc_overall: float
    acc_per_snr: dict[int, float]


def fine_tune(encoder: ConvEncoder | None, dataset: SignalDataset,
              manifest: DatasetManifest, split: Split, cfg: ExperimentConfig,
              seed: int, out_dir: str | None = None) -> FineTuneResult:
    """End-to-end cross-entropy training on the labeled subset.

    With encoder=None a freshly initialized encoder is used, which makes
    this the fully-supervised reference under the same label budget.
    """
    check_budget_containment(split)
    if encoder is None:
        encoder, _ = build_models(cfg, seed)
    else:
        encoder = copy.deepcopy(encoder)
    classifier = LinearClassifier(2 * encoder.feature_dim, len(manifest.class_names))
    init_parameters(classifier, torch.Generator().manual_seed(seed))
    encoder.train()
    classifier.train()
    params = list(encoder.parameters()) + list(classifier.parameters())
    optimizer = torch.optim.Adam(params, lr=cfg.learning_rate)
    loss_fn = torch.nn.CrossEntropyLoss()
    rng = _stream(seed, _STREAM_PROBE)

    x_train = dataset.samples[split.labeled]
    y_train = torch.as_tensor(dataset.labels[split.labeled], dtype=torch.long,
                              device=cfg.device)
    test_samples = dataset.samples[split.test]
    test_labels = dataset.labels[split.test]
    test_snr = dataset.snr_db[split.test]

    records = []
    start = time.perf_counter()
    n = x_train.shape[0]
    batch = min(cfg.batch_size, n)
    gstep = 0
    acc_overall, acc_per_snr = 0.0, {}
    for epoch in range(cfg.finetune_epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        nb = 0
        for lo in range(0, n, batch):
            idx = perm[lo:lo + batch]
            xs = torch.as_tensor(x_train[idx], dtype=torch.float32, device=cfg.device)
            optimizer.zero_grad()
            loss = loss_fn(classifier(instance_features(xs, encoder)), y_train[idx])
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item()
            nb += 1
            gstep += 1
        encoder.eval()
        classifier.eval()
        feats = _frozen_features(encoder, test_samples, cfg.device)
        with torch.no_grad():
            acc_overall, acc_per_snr = _accuracy(classifier(feats),
                                                 test_labels, test_snr)
        encoder.train()
        classifier.train()
        records.append(MetricsRecord(epoch=epoch, step=gstep, seed=seed,
                                     l_total=epoch_loss / max(nb, 1),
                                     acc_overall=acc_overall,
                                     acc_per_snr=acc_per_snr,
                                     wall_s=time.perf_counter() - start))
    encoder.eval()
    classifier.eval()
    if out_dir is not None:
        write_metrics_csv(os.path.join(out_dir, "finetune_metrics.csv"), records)
        save_checkpoint(os.path.join(out_dir, "finetune_final.ckpt"),
                        {"encoder": encoder, "classifier": classifier},
                        meta={"seed": seed, "acc_overall": acc_overall})
    return FineTuneResult(encoder=encoder, classifier=classifier, records=records,
                          acc_overall=acc_overall, acc_per_snr=acc_per_snr)


def evaluate(encoder: ConvEncoder, classifier: LinearClassifier,
             dataset: SignalDataset, indices: np.ndarray,
             device: str = "cpu") -> tuple[float, dict[int, float]]:
    """Accuracy overall and per SNR level on the given instance indices."""
    feats = _frozen_features(encoder, dataset.samples[indices], device)
    classifier.eval()
    with torch.no_grad():
        return _accuracy(classifier(feats), dataset.labels[indices],
                         dataset.snr_db[indices])
