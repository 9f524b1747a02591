"""Mechanism check: corrupt the positive pairing and watch accuracy respond.

If segment pairing works because paired segments share the modulation class,
then silently repointing positives at differing-class segments ("semantic"
corruption) should hurt downstream accuracy, while class-agnostic random
repointing should hurt less. This script runs that comparison at toy scale;
the acceptance suite repeats it at desk scale with tighter margins.
"""

import numpy as np

from amcontrast import train
from amcontrast.config import ExperimentConfig
from amcontrast.data import SplitSpec, stratified_split
from amcontrast.diagnostics import corruption_sweep
from amcontrast.synth import synth_dataset


def main():
    dataset, manifest = synth_dataset(["BPSK", "QPSK", "QAM16", "GFSK"],
                                      snr_grid_db=[0, 10], per_cell=40,
                                      instance_len=128, master_seed=9)
    split = stratified_split(dataset.labels, dataset.snr_db,
                             SplitSpec(seed=0, label_budget=10))
    cfg = ExperimentConfig(pretrain_epochs=6, probe_epochs=60, batch_size=64,
                           label_budget=10)

    rows = corruption_sweep(cfg, dataset, manifest, split,
                            modes=("random", "semantic"), p_grid=(0.0, 1.0),
                            seeds=(0,))
    print("mode      p     probe accuracy")
    for row in rows:
        print(f"{row['mode']:<9s} {row['p']:<5.2f} {row['acc_overall']:.4f}")

    by_key = {(r["mode"], r["p"]): r["acc_overall"] for r in rows}
    clean = by_key[("random", 0.0)]
    print(f"\np=0 rows match the clean run for both modes: "
          f"{by_key[('semantic', 0.0)] == clean} (corruption draws live on "
          f"an isolated stream, so p=0 is a bit-exact no-op)")
    print(f"semantic p=1 vs clean: {by_key[('semantic', 1.0)] - clean:+.4f}")
    print(f"random   p=1 vs clean: {by_key[('random', 1.0)] - clean:+.4f}")
    print("(single seed, 6 epochs: the direction of each drop is stable but "
          "the semantic-vs-random gap needs desk scale to resolve)")

    # The corrupted runs read labels only through the counted diagnostic
    # channel; a clean run reads none at all.
    res = train.pretrain(dataset, manifest, split, cfg, seed=0)
    print(f"\nlabel reads in a clean pretrain: {res.label_reads}")


if __name__ == "__main__":
    main()
