"""Anatomy of the three-term segment-consistency loss on one small batch.

Builds the 4B segment views for a batch of B instances, embeds them with a
throwaway projection, and prints the three loss components next to a slow
pure-Python re-computation. Also shows the two analytic anchor points used
by the test suite: the all-equal-embeddings plateau ln(4B - 1) and the
instance-pair plateau ln(2B - 1).
"""

import numpy as np
import torch

from amcontrast.augment import AugmentPolicy
from amcontrast.losses import consistency_losses, instance_nt_xent, l2_normalize
from amcontrast.pairing import enumerate_positives, make_views
from amcontrast.reference import oracle_consistency_losses
from amcontrast.synth import synth_dataset

B = 6
TAU = 0.07


def embed(batch) -> torch.Tensor:
    """Stand-in encoder: one fixed random projection of the flat segments."""
    rng = np.random.default_rng(7)
    lead = batch.seg_lead.reshape(B, 2, -1)
    trail = batch.seg_trail.reshape(B, 2, -1)
    w = rng.normal(size=(lead.shape[-1], 16))
    h = np.stack([lead @ w, trail @ w], axis=2)  # (B, 2, 2, 16)
    return torch.as_tensor(h, dtype=torch.float64)


def main():
    dataset, _ = synth_dataset(["BPSK", "QPSK"], snr_grid_db=[10],
                               per_cell=B // 2, instance_len=64, master_seed=1)
    policy = AugmentPolicy(rng_seed=0)
    batch = make_views(dataset.samples, policy, policy,
                       np.random.default_rng(10), np.random.default_rng(11))
    print(f"batch: {batch.batch_size} instances -> "
          f"{4 * batch.batch_size} segment views "
          f"(lead {batch.seg_lead.shape}, trail {batch.seg_trail.shape})")

    rels = enumerate_positives(B)
    counts = {tier: sum(r.tier == tier for r in rels) for tier in ("ac", "sc", "jc")}
    print(f"positive relations at B={B}: {counts} (total {len(rels)})")

    h = l2_normalize(embed(batch))
    parts = consistency_losses(h, TAU)
    oracle = oracle_consistency_losses(h.numpy(), TAU)
    print("\ncomponent        vectorized      pure-python     |diff|")
    for key in ("ac", "sc", "jc", "total"):
        a, b = parts[key].item(), oracle[key]
        print(f"  l_{key:<5s}      {a:.12f}  {b:.12f}  {abs(a - b):.2e}")

    # Analytic plateaus: identical embeddings make every softmax uniform.
    flat = torch.nn.functional.normalize(torch.ones(B, 2, 2, 16, dtype=torch.float64), dim=-1)
    plateau = consistency_losses(flat, TAU)["total"].item() / 3
    print(f"\nall-equal embeddings: each component = {plateau:.12f}, "
          f"ln(4B - 1) = {np.log(4 * B - 1):.12f}")
    pair = torch.nn.functional.normalize(torch.ones(B, 2, 16, dtype=torch.float64), dim=-1)
    print(f"instance-pair counterpart = {instance_nt_xent(pair, TAU).item():.12f}, "
          f"ln(2B - 1) = {np.log(2 * B - 1):.12f}")


if __name__ == "__main__":
    main()
