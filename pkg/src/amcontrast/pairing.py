"""View construction and positive-pair bookkeeping for contrastive batches.

Every instance contributes four segment views per batch: two independently
augmented views of the full-length signal, each cut into a leading and a
trailing temporal segment. Indices are (n, v, s) with v, s in {0, 1}; the
flat layout used by the loss is n * 4 + v * 2 + s.

Three families of positives are enumerated over that index set:

* augmentation consistency ("ac"): same instance, other view, same segment,
  anchored at view 0 for both segments;
* segment consistency ("sc"): same instance, same view, other segment,
  anchored at segment 0 for both views;
* joint consistency ("jc"): same instance, other view, other segment,
  anchored at (view 0, segment 0).

The asymmetric anchor choice is deliberate; a symmetric variant that mirrors
every relation is available behind a flag and defaults to off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .augment import AugmentPolicy, apply_policy

TIERS = ("ac", "sc", "jc")


@dataclass(frozen=True)
class PositiveRelation:
    """One anchor -> positive assignment; indices are (n, v, s) triples."""

    tier: str
    anchor: tuple[int, int, int]
    positive: tuple[int, int, int]


@dataclass
class SegmentViewBatch:
    """All 4B segment views of a batch, plus provenance.

    seg_lead holds segment 0 (first L samples), seg_trail segment 1 (the
    remaining T - L, one longer when T is odd). Axes are (n, v, rail, time).
    corruption_log stays None unless a diagnostic corrupted this batch.
    """

    seg_lead: np.ndarray   # (B, 2, 2, L)
    seg_trail: np.ndarray  # (B, 2, 2, T - L)
    origin_ids: np.ndarray
    corruption_log: list | None = None

    @property
    def batch_size(self) -> int:
        return self.seg_lead.shape[0]

    def segment(self, n: int, v: int, s: int) -> np.ndarray:
        return (self.seg_lead if s == 0 else self.seg_trail)[n, v]


def flat_index(n: int, v: int, s: int) -> int:
    """Position of segment view (n, v, s) in the flattened 4B layout."""
    return n * 4 + v * 2 + s


def split_segments(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cut (…, T) at L = T // 2; the trailing piece keeps the odd sample."""
    t = x.shape[-1]
    lead = t // 2
    return x[..., :lead], x[..., lead:]


def _stack_instances(instances) -> np.ndarray:
    if isinstance(instances, np.ndarray):
        if instances.ndim != 3 or instances.shape[1] != 2:
            raise ValueError(f"expected (B, 2, T) instances, got {instances.shape}")
        return instances
    shapes = {np.asarray(inst).shape for inst in instances}
    if len(shapes) != 1:
        raise ValueError(f"instances have heterogeneous shapes: {sorted(shapes)}")
    return _stack_instances(np.stack([np.asarray(inst) for inst in instances]))


def make_views(instances, policy_a: AugmentPolicy, policy_b: AugmentPolicy,
               rng_a: np.random.Generator, rng_b: np.random.Generator,
               origin_ids: np.ndarray | None = None,
               segment_len: int | None = None, random_crop: bool = False,
               crop_rng: np.random.Generator | None = None) -> SegmentViewBatch:
    """Build the 4B segment views for a batch of raw instances.

    Args:
        instances: (B, 2, T) array or a sequence of equal-shape (2, T) arrays.
        policy_a / policy_b: Augmentations for view 0 and view 1.
        rng_a / rng_b: Independent streams; one is consumed per view so the
            two views of an instance are independently augmented.
        origin_ids: Instance identities carried along (defaults to 0..B-1).
        segment_len: When set, each instance is first cut to 2 * segment_len
            samples (leading samples, or a uniform random crop when
            random_crop is true) so both segments have that length.
        random_crop: Draw the crop start per instance from crop_rng.

    Returns:
        SegmentViewBatch with both views of both segments for every instance.
    """
    x = _stack_instances(instances)
    b, _, t = x.shape
    if segment_len is not None:
        if 2 * segment_len > t:
            raise ValueError(f"segment_len={segment_len} needs 2L <= T={t}")
        if random_crop:
            if crop_rng is None:
                raise ValueError("random_crop requires crop_rng")
            starts = crop_rng.integers(0, t - 2 * segment_len + 1, size=b)
        else:
            starts = np.zeros(b, dtype=int)
        x = np.stack([x[i, :, s:s + 2 * segment_len]
                      for i, s in enumerate(starts)])
        t = 2 * segment_len
    lead = t // 2
    seg_lead = np.empty((b, 2, 2, lead), dtype=x.dtype)
    seg_trail = np.empty((b, 2, 2, t - lead), dtype=x.dtype)
    for i in range(b):
        for v, (policy, rng) in enumerate(((policy_a, rng_a), (policy_b, rng_b))):
            view = apply_policy(x[i], policy, rng)
            seg_lead[i, v], seg_trail[i, v] = split_segments(view)
    if origin_ids is None:
        origin_ids = np.arange(b, dtype=np.int64)
    return SegmentViewBatch(seg_lead, seg_trail, np.asarray(origin_ids))


def enumerate_positives(batch_size: int, symmetric: bool = False) -> list[PositiveRelation]:
    """List every positive relation for a batch of the given size.

    The default asymmetric form yields 2B "ac" + 2B "sc" + B "jc" relations;
    the symmetric variant mirrors each relation (anchor and positive swapped)
    on top of those.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    relations = []
    for n in range(batch_size):
        for s in (0, 1):
            relations.append(PositiveRelation("ac", (n, 0, s), (n, 1, s)))
        for v in (0, 1):
            relations.append(PositiveRelation("sc", (n, v, 0), (n, v, 1)))
        relations.append(PositiveRelation("jc", (n, 0, 0), (n, 1, 1)))
    if symmetric:
        relations += [PositiveRelation(r.tier, r.positive, r.anchor)
                      for r in list(relations)]
    return relations
