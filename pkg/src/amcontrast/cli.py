"""Command-line entry points.

Every training-style command materializes a run directory under the output
root (env var AMCONTRAST_RUNS, default ./runs) containing its metrics CSV,
checkpoints, and a run.txt manifest with the full config snapshot, the code
revision, the platform, and the headline results. `report` aggregates such
directories across seeds.

Errors surface as a single machine-parseable line on stderr
(`amcontrast: error: <Type>: <message>`) with a nonzero exit code.
"""

from __future__ import annotations

import argparse
import csv
import os
import platform
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .config import (ExperimentConfig, config_to_lines, load_config_file,
                     parse_config_text)
from .data import SplitSpec, load_dataset, save_dataset, stratified_split
from .diagnostics import (corruption_sweep, exact_mutual_information,
                          instance_joint, random_toy_model, segment_joint,
                          strict_symbol_dependence_model,
                          verify_information_bounds)
from .model import load_checkpoint
from .synth import ALL_SCHEME_NAMES, synth_dataset
from . import train as train_mod

RUNS_ENV = "AMCONTRAST_RUNS"
DEFAULT_RUNS_ROOT = "./runs"
RUN_MANIFEST_NAME = "run.txt"

ABLATION_AXES = {
    "loss-components": [("ac",), ("sc",), ("jc",), ("ac", "sc"), ("ac", "jc"),
                        ("sc", "jc"), ("ac", "sc", "jc")],
    "segment-length": [64, 32, 16, 8, 4],
    "temperature": [0.05, 0.07, 0.1, 0.2],
    "batch-size": [64, 128, 256, 512, 1024],
    "learning-rate": [0.0005, 0.001, 0.005, 0.01],
}


def _runs_root() -> str:
    return os.environ.get(RUNS_ENV, DEFAULT_RUNS_ROOT)


def _make_run_dir(kind: str, seed: int) -> str:
    stamp = time.strftime("%Y%m%d-%H%M%S", time.gmtime())
    base = os.path.join(_runs_root(), f"{kind}-{stamp}-s{seed}")
    path = base
    k = 1
    while os.path.exists(path):
        k += 1
        path = f"{base}-{k}"
    os.makedirs(path)
    return path


def _code_revision() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True,
                             text=True, timeout=10,
                             cwd=os.path.dirname(os.path.abspath(__file__)))
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def write_run_manifest(run_dir: str, kind: str, cfg: ExperimentConfig,
                       seed: int, data_path: str, artifacts: list[str],
                       results: dict[str, float]) -> str:
    """Write run.txt after checking that every listed artifact exists."""
    missing = [a for a in artifacts
               if not os.path.exists(os.path.join(run_dir, a))]
    if missing:
        raise RuntimeError(f"run artifacts missing from {run_dir}: {missing}")
    lines = [f"kind={kind}", f"seed={seed}", f"data={data_path}",
             f"finished_utc={time.strftime('%Y-%m-%dT%H:%M:%SZ', time.gmtime())}",
             f"revision={_code_revision()}",
             f"platform={platform.platform()}",
             f"python={platform.python_version()}",
             f"package_version={__version__}"]
    lines += [f"artifact={a}" for a in artifacts]
    lines += [f"result.{k}={v!r}" for k, v in sorted(results.items())]
    lines += [f"config.{line}" for line in config_to_lines(cfg)]
    path = os.path.join(run_dir, RUN_MANIFEST_NAME)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_run_manifest(run_dir: str) -> dict:
    path = os.path.join(run_dir, RUN_MANIFEST_NAME)
    info = {"artifacts": [], "results": {}, "config": {}}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or "=" not in line:
                continue
            key, value = line.split("=", 1)
            if key == "artifact":
                info["artifacts"].append(value)
            elif key.startswith("result."):
                info["results"][key[len("result."):]] = float(value)
            elif key.startswith("config."):
                info["config"][key[len("config."):]] = value
            else:
                info[key] = value
    return info


def _load_cfg(args) -> ExperimentConfig:
    cfg = (load_config_file(args.config) if getattr(args, "config", None)
           else ExperimentConfig())
    overrides = list(getattr(args, "set", None) or [])
    if getattr(args, "data", None):
        overrides.append(f"dataset={args.data}")
    if overrides:
        cfg = parse_config_text("\n".join(overrides), base=cfg)
    return cfg


def _load_data_and_split(cfg: ExperimentConfig):
    if not cfg.dataset:
        raise ValueError("no dataset: pass --data or set dataset= in the config")
    dataset, manifest = load_dataset(cfg.dataset)
    spec = SplitSpec(ratios=cfg.split_ratios, seed=cfg.split_seed,
                     label_budget=cfg.label_budget)
    split = stratified_split(dataset.labels, dataset.snr_db, spec)
    return dataset, manifest, split


def _seed_list(args, cfg: ExperimentConfig) -> list[int]:
    if getattr(args, "seeds", None):
        return [int(s) for s in args.seeds.split(",")]
    if getattr(args, "seed", None) is not None:
        return [args.seed]
    return list(cfg.seeds)


def _int_list(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip()]


# ------------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    dataset, manifest = synth_dataset(
        schemes, snr_grid_db=_int_list(args.snrs), per_cell=args.per_cell,
        instance_len=args.instance_len, master_seed=args.seed, sps=args.sps,
        pulse=args.pulse, rolloff=args.rolloff,
        random_phase=not args.fixed_phase, freq_offset_cps=args.freq_offset,
        fading=args.fading)
    save_dataset(dataset, manifest, args.out)
    print(f"synth wrote {manifest.num_instances} instances "
          f"({len(manifest.class_names)} classes x {len(manifest.snr_levels)} "
          f"SNRs x {args.per_cell}) to {args.out}")
    return 0


def cmd_convert(args) -> int:
    from .data import convert_radioml_archive
    manifest = convert_radioml_archive(args.src, args.out)
    print(f"convert wrote {manifest.num_instances} instances, classes="
          f"{','.join(manifest.class_names)} to {args.out}")
    return 0


def _run_pretrain(args, method: str | None) -> int:
    cfg = _load_cfg(args)
    if method is not None:
        cfg = replace(cfg, method=method)
    dataset, manifest, split = _load_data_and_split(cfg)
    exit_code = 0
    for seed in _seed_list(args, cfg):
        run_dir = _make_run_dir(cfg.method, seed)
        result = train_mod.pretrain(dataset, manifest, split, cfg, seed,
                                    out_dir=run_dir)
        artifacts = ["metrics.csv", "checkpoint_final.ckpt"]
        write_run_manifest(run_dir, "pretrain", cfg, seed, cfg.dataset,
                           artifacts,
                           {"final_l_total": result.records[-1].l_total,
                            "label_reads": float(result.label_reads),
                            "steps": float(len(result.records))})
        print(f"pretrain method={cfg.method} seed={seed} "
              f"final_l_total={result.records[-1].l_total:.6f} dir={run_dir}")
    return exit_code


def cmd_pretrain(args) -> int:
    return _run_pretrain(args, None)


def cmd_baseline(args) -> int:
    return _run_pretrain(args, "instance-contrast")


def _encoder_for_probe(args, cfg: ExperimentConfig, seed: int):
    if bool(args.checkpoint) == bool(args.random_init):
        raise ValueError("pass exactly one of --checkpoint or --random-init")
    if args.random_init:
        encoder, _ = train_mod.build_models(cfg, seed)
        return encoder, "random-init"
    modules, meta = load_checkpoint(args.checkpoint)
    if "encoder" not in modules:
        raise ValueError(f"checkpoint {args.checkpoint} holds no encoder")
    return modules["encoder"], meta.get("method", "unknown")


def cmd_probe(args) -> int:
    cfg = _load_cfg(args)
    dataset, manifest, split = _load_data_and_split(cfg)
    for seed in _seed_list(args, cfg):
        encoder, source = _encoder_for_probe(args, cfg, seed)
        run_dir = _make_run_dir("probe", seed)
        probe = train_mod.linear_probe(encoder, dataset, manifest, split, cfg,
                                       seed, out_dir=run_dir)
        results = {"acc_overall": probe.acc_overall}
        results.update({f"acc_snr_{k}": v for k, v in probe.acc_per_snr.items()})
        write_run_manifest(run_dir, "probe", cfg, seed, cfg.dataset,
                           ["probe_metrics.csv", "probe_classifier.ckpt"],
                           results)
        per_snr = " ".join(f"snr{k}={v:.4f}"
                           for k, v in sorted(probe.acc_per_snr.items()))
        print(f"probe source={source} seed={seed} "
              f"acc_overall={probe.acc_overall:.4f} {per_snr} dir={run_dir}")
    return 0


def cmd_finetune(args) -> int:
    cfg = _load_cfg(args)
    dataset, manifest, split = _load_data_and_split(cfg)
    encoder = None
    if args.checkpoint:
        modules, _ = load_checkpoint(args.checkpoint)
        encoder = modules["encoder"]
    for seed in _seed_list(args, cfg):
        run_dir = _make_run_dir("finetune", seed)
        result = train_mod.fine_tune(encoder, dataset, manifest, split, cfg,
                                     seed, out_dir=run_dir)
        results = {"acc_overall": result.acc_overall}
        results.update({f"acc_snr_{k}": v for k, v in result.acc_per_snr.items()})
        write_run_manifest(run_dir, "finetune", cfg, seed, cfg.dataset,
                           ["finetune_metrics.csv", "finetune_final.ckpt"],
                           results)
        start = "scratch" if encoder is None else "pretrained"
        print(f"finetune start={start} seed={seed} "
              f"acc_overall={result.acc_overall:.4f} dir={run_dir}")
    return 0


def cmd_corrupt_sweep(args) -> int:
    cfg = _load_cfg(args)
    dataset, manifest, split = _load_data_and_split(cfg)
    seeds = _seed_list(args, cfg)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    p_grid = [float(p) for p in args.p_grid.split(",") if p.strip()]
    run_dir = _make_run_dir("corrupt-sweep", seeds[0])
    out_csv = os.path.join(run_dir, "sweep.csv")
    rows = corruption_sweep(cfg, dataset, manifest, split, modes=modes,
                            p_grid=p_grid, seeds=seeds, out_csv=out_csv)
    write_run_manifest(run_dir, "corrupt-sweep", cfg, seeds[0], cfg.dataset,
                       ["sweep.csv"], {"rows": float(len(rows))})
    for row in rows:
        print(f"corrupt mode={row['mode']} p={row['p']} seed={row['seed']} "
              f"acc_overall={row['acc_overall']:.4f}")
    print(f"sweep dir={run_dir}")
    return 0


def cmd_mi_check(args) -> int:
    ln2 = np.log(2.0)
    rng = np.random.default_rng(args.seed)
    sizes = tuple(_int_list(args.sizes))
    worst = 0.0
    failures = 0
    for _ in range(args.models):
        model = random_toy_model(rng, sizes=sizes, num_obs=args.obs)
        maps = [rng.integers(0, max(2, args.obs // 8), size=args.obs)
                for _ in range(args.maps)]
        report = verify_information_bounds(model, representation_maps=maps)
        if not report.all_hold:
            failures += 1
        worst = max(worst,
                    report.i_segments - min(report.i_lead_shared,
                                            report.i_trail_shared),
                    max((i - report.i_segments
                         for i, _ in report.representation_results),
                        default=0.0))
    strict = strict_symbol_dependence_model()
    seg_bits = exact_mutual_information(segment_joint(strict)) / ln2
    inst_bits = exact_mutual_information(instance_joint(strict)) / ln2
    print(f"mi-check models={args.models} maps={args.maps} failures={failures} "
          f"worst_violation_bits={max(worst, 0.0) / ln2:.3e}")
    print(f"mi-check strict-model segment_bits={seg_bits:.12f} "
          f"instance_bits={inst_bits:.12f}")
    return 1 if failures else 0


def _parse_axis_values(axis: str, text: str):
    if axis == "loss-components":
        return [tuple(p.strip() for p in v.split("+") if p.strip())
                for v in text.split(",")]
    if axis in ("segment-length", "batch-size"):
        return _int_list(text)
    return [float(v) for v in text.split(",")]


def _axis_config(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    field = {"loss-components": "loss_components",
             "segment-length": "segment_len",
             "temperature": "tau",
             "batch-size": "batch_size",
             "learning-rate": "learning_rate"}[axis]
    return replace(cfg, **{field: value})


def cmd_ablate(args) -> int:
    cfg = _load_cfg(args)
    if args.axis not in ABLATION_AXES:
        raise ValueError(f"unknown axis {args.axis!r}; choose from "
                         f"{sorted(ABLATION_AXES)}")
    values = (ABLATION_AXES[args.axis] if args.values is None
              else _parse_axis_values(args.axis, args.values))
    dataset, manifest, split = _load_data_and_split(cfg)
    seeds = _seed_list(args, cfg)
    run_dir = _make_run_dir("ablate", seeds[0])
    rows = []
    for value in values:
        run_cfg = _axis_config(cfg, args.axis, value)
        label = "+".join(value) if isinstance(value, tuple) else str(value)
        for seed in seeds:
            result = train_mod.pretrain(dataset, manifest, split, run_cfg, seed)
            probe = train_mod.linear_probe(result.encoder, dataset, manifest,
                                           split, run_cfg, seed)
            rows.append({"axis": args.axis, "value": label, "seed": seed,
                         "acc_overall": probe.acc_overall,
                         "final_l_total": result.records[-1].l_total})
            print(f"ablate {args.axis}={label} seed={seed} "
                  f"acc_overall={probe.acc_overall:.4f}")
    out_csv = os.path.join(run_dir, "ablate.csv")
    with open(out_csv, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["axis", "value", "seed",
                                                "acc_overall", "final_l_total"])
        writer.writeheader()
        writer.writerows(rows)
    write_run_manifest(run_dir, "ablate", cfg, seeds[0], cfg.dataset,
                       ["ablate.csv"], {"rows": float(len(rows))})
    print(f"ablate dir={run_dir}")
    return 0


def cmd_report(args) -> int:
    infos = [read_run_manifest(d) for d in args.runs]
    if not infos:
        raise ValueError("no run directories given")
    # Identical configs required, except the seed axis being aggregated over.
    reference = {k: v for k, v in infos[0]["config"].items() if k != "seeds"}
    for d, info in zip(args.runs, infos):
        stripped = {k: v for k, v in info["config"].items() if k != "seeds"}
        if stripped != reference:
            diff = sorted(k for k in set(reference) | set(stripped)
                          if reference.get(k) != stripped.get(k))
            raise ValueError(f"run {d} config differs on {diff}; refusing to "
                             f"aggregate mixed configurations")
    kinds = sorted({info.get("kind", "?") for info in infos})
    seeds = [info.get("seed", "?") for info in infos]
    print(f"report kind={','.join(kinds)} runs={len(infos)} "
          f"seeds={','.join(seeds)}")
    common = set(infos[0]["results"])
    for info in infos[1:]:
        common &= set(info["results"])
    for metric in sorted(common):
        values = np.array([info["results"][metric] for info in infos])
        print(f"{metric} mean={values.mean():.6f} std={values.std():.6f} "
              f"n={len(values)}")
    return 0


# --------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amcontrast",
        description="Self-supervised modulation-recognition laboratory")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_seeds=True):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--data", help="dataset directory (overrides config)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="config override, repeatable")
        if with_seeds:
            g = p.add_mutually_exclusive_group()
            g.add_argument("--seed", type=int, help="single seed")
            g.add_argument("--seeds", help="comma-separated seeds")

    p = sub.add_parser("synth", help="synthesize a dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--schemes", required=True,
                   help=f"comma list from {','.join(ALL_SCHEME_NAMES)}")
    p.add_argument("--snrs", default="0,10", help="comma list of SNR dB levels")
    p.add_argument("--per-cell", type=int, default=250)
    p.add_argument("--instance-len", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sps", type=int, default=8)
    p.add_argument("--pulse", choices=["rrc", "rect"], default="rrc")
    p.add_argument("--rolloff", type=float, default=0.35)
    p.add_argument("--fading", choices=["none", "rayleigh"], default="none")
    p.add_argument("--freq-offset", type=float, default=0.0)
    p.add_argument("--fixed-phase", action="store_true",
                   help="disable the random per-instance phase offset")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("convert", help="convert a pickled RF archive")
    p.add_argument("--src", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("pretrain", help="self-supervised pretraining")
    add_common(p)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("baseline",
                       help="instance-level contrastive baseline pretraining")
    add_common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("probe", help="linear probe on a frozen encoder")
    add_common(p)
    p.add_argument("--checkpoint", help="pretraining checkpoint")
    p.add_argument("--random-init", action="store_true",
                   help="probe a freshly initialized encoder instead")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("finetune", help="end-to-end fine-tuning")
    add_common(p)
    p.add_argument("--checkpoint", help="warm start; omit for scratch")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("corrupt-sweep", help="positive-pair corruption sweep")
    add_common(p)
    p.add_argument("--modes", default="random,semantic")
    p.add_argument("--p-grid", default="0.0,0.25,0.5,0.75,1.0")
    p.set_defaults(func=cmd_corrupt_sweep)

    p = sub.add_parser("mi-check",
                       help="exact information bounds on discrete toy models")
    p.add_argument("--models", type=int, default=100)
    p.add_argument("--maps", type=int, default=3)
    p.add_argument("--sizes", default="4,4,2",
                   help="class,symbol,channel alphabet sizes")
    p.add_argument("--obs", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mi_check)

    p = sub.add_parser("ablate", help="one-axis ablation (pretrain + probe)")
    add_common(p)
    p.add_argument("--axis", required=True, choices=sorted(ABLATION_AXES))
    p.add_argument("--values", help="override the default value grid "
                                    "(loss-components values use '+', e.g. ac+jc)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="aggregate run directories across seeds")
    p.add_argument("runs", nargs="+", help="run directories to aggregate")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point
        message = str(exc).replace("\n", " ")
        print(f"amcontrast: error: {type(exc).__name__}: {message}",
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
