"""Dataset container, on-disk format, stratified splitting, and archive conversion.

A dataset is a directory with four files:

* ``manifest.txt``  -- UTF-8 ``key=value`` lines describing the arrays
* ``samples.f32``   -- little-endian float32, shape (num_instances, 2, T), row-major
* ``labels.i32``    -- little-endian int32, shape (num_instances,)
* ``snr.i16``       -- little-endian int16, shape (num_instances,)

Labels are 0-based indices into ``class_names``. The format is versioned
(``version=1``); readers reject other versions rather than guessing.
"""

from __future__ import annotations

import os
import pickle
from dataclasses import dataclass, field

import numpy as np

MANIFEST_NAME = "manifest.txt"
SAMPLES_NAME = "samples.f32"
LABELS_NAME = "labels.i32"
SNR_NAME = "snr.i16"
FORMAT_VERSION = 1


class DatasetVersionError(ValueError):
    """Container declares a format version this reader does not support."""


class TruncatedFileError(ValueError):
    """An array file holds fewer bytes than the manifest promises."""


class ManifestInconsistencyError(ValueError):
    """Manifest fields disagree with each other or with the array files."""


class ArchiveParseError(ValueError):
    """A source archive could not be interpreted; names the offending key."""


class SplitError(ValueError):
    """Split request cannot be satisfied (bad ratios or emaciated cells)."""


class BudgetViolationError(ValueError):
    """A labeled budget leaks outside the training split or exceeds it."""


@dataclass(frozen=True)
class DatasetManifest:
    """Static facts about a dataset, stored alongside the arrays.

    Attributes:
        num_instances: Number of rows in every array.
        instance_len: Samples per instance (T); every instance has this length.
        class_names: Ordered scheme names; label k means class_names[k].
        snr_levels: Ordered distinct SNR values (dB) present in the dataset.
        creation_seed: Master seed used by the synthesizer, or None for
            datasets converted from an external archive.
        version: On-disk format version.
    """

    num_instances: int
    instance_len: int
    class_names: tuple[str, ...]
    snr_levels: tuple[int, ...]
    creation_seed: int | None
    version: int = FORMAT_VERSION


@dataclass
class SignalDataset:
    """In-memory IQ dataset: stacked instances with labels and SNR tags."""

    samples: np.ndarray  # (N, 2, T) float32, rail 0 = I, rail 1 = Q
    labels: np.ndarray   # (N,) int32, 0-based class index
    snr_db: np.ndarray   # (N,) int16

    def __len__(self) -> int:
        return self.samples.shape[0]

    def subset(self, indices: np.ndarray) -> "SignalDataset":
        idx = np.asarray(indices)
        return SignalDataset(self.samples[idx], self.labels[idx], self.snr_db[idx])


def _validate_pair(dataset: SignalDataset, manifest: DatasetManifest) -> None:
    n, rails, t = dataset.samples.shape
    if rails != 2:
        raise ManifestInconsistencyError(f"samples must have 2 rails, found {rails}")
    if n != manifest.num_instances:
        raise ManifestInconsistencyError(
            f"manifest num_instances={manifest.num_instances} but samples hold {n}")
    if t != manifest.instance_len:
        raise ManifestInconsistencyError(
            f"manifest instance_len={manifest.instance_len} but samples have T={t}")
    if dataset.labels.shape != (n,) or dataset.snr_db.shape != (n,):
        raise ManifestInconsistencyError("labels/snr length differs from samples")
    if len(set(manifest.class_names)) != len(manifest.class_names):
        raise ManifestInconsistencyError("class_names contains duplicates")
    if n and (dataset.labels.min() < 0
              or dataset.labels.max() >= len(manifest.class_names)):
        raise ManifestInconsistencyError(
            f"labels outside [0, {len(manifest.class_names)}) range")
    if n and not set(np.unique(dataset.snr_db).tolist()) <= set(manifest.snr_levels):
        raise ManifestInconsistencyError("snr tags not covered by manifest snr_levels")
    if not np.isfinite(dataset.samples).all():
        raise ManifestInconsistencyError("samples contain NaN or Inf")


def save_dataset(dataset: SignalDataset, manifest: DatasetManifest, path: str) -> None:
    """Write the dataset directory; refuses inconsistent (dataset, manifest) pairs."""
    _validate_pair(dataset, manifest)
    os.makedirs(path, exist_ok=True)
    lines = [
        f"version={manifest.version}",
        f"num_instances={manifest.num_instances}",
        f"instance_len={manifest.instance_len}",
        "class_names=" + ",".join(manifest.class_names),
        "snr_levels=" + ",".join(str(s) for s in manifest.snr_levels),
        "creation_seed=" + ("null" if manifest.creation_seed is None
                            else str(manifest.creation_seed)),
    ]
    with open(os.path.join(path, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    dataset.samples.astype("<f4").tofile(os.path.join(path, SAMPLES_NAME))
    dataset.labels.astype("<i4").tofile(os.path.join(path, LABELS_NAME))
    dataset.snr_db.astype("<i2").tofile(os.path.join(path, SNR_NAME))


def _parse_manifest(path: str) -> DatasetManifest:
    pairs: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ManifestInconsistencyError(f"malformed manifest line: {line!r}")
            key, value = line.split("=", 1)
            pairs[key.strip()] = value.strip()
    required = ["version", "num_instances", "instance_len", "class_names",
                "snr_levels", "creation_seed"]
    missing = [k for k in required if k not in pairs]
    if missing:
        raise ManifestInconsistencyError(f"manifest missing keys: {missing}")
    try:
        version = int(pairs["version"])
    except ValueError as exc:
        raise ManifestInconsistencyError("version is not an integer") from exc
    if version != FORMAT_VERSION:
        raise DatasetVersionError(
            f"unsupported container version {version}, expected {FORMAT_VERSION}")
    try:
        num = int(pairs["num_instances"])
        t = int(pairs["instance_len"])
        snrs = tuple(int(s) for s in pairs["snr_levels"].split(",") if s != "")
    except ValueError as exc:
        raise ManifestInconsistencyError(f"non-integer manifest field: {exc}") from exc
    names = tuple(s for s in pairs["class_names"].split(",") if s != "")
    seed_text = pairs["creation_seed"]
    seed = None if seed_text == "null" else int(seed_text)
    return DatasetManifest(num_instances=num, instance_len=t, class_names=names,
                           snr_levels=snrs, creation_seed=seed, version=version)


def _read_array(path: str, dtype: str, shape: tuple[int, ...]) -> np.ndarray:
    expected = int(np.prod(shape)) * np.dtype(dtype).itemsize
    actual = os.path.getsize(path)
    if actual < expected:
        raise TruncatedFileError(
            f"{os.path.basename(path)} holds {actual} bytes, manifest needs {expected}")
    if actual > expected:
        raise ManifestInconsistencyError(
            f"{os.path.basename(path)} holds {actual} bytes, manifest says {expected}")
    return np.fromfile(path, dtype=dtype).reshape(shape)


def load_dataset(path: str) -> tuple[SignalDataset, DatasetManifest]:
    """Read a dataset directory back; validates version, sizes, and consistency."""
    manifest = _parse_manifest(os.path.join(path, MANIFEST_NAME))
    n, t = manifest.num_instances, manifest.instance_len
    samples = _read_array(os.path.join(path, SAMPLES_NAME), "<f4", (n, 2, t))
    labels = _read_array(os.path.join(path, LABELS_NAME), "<i4", (n,))
    snr = _read_array(os.path.join(path, SNR_NAME), "<i2", (n,))
    dataset = SignalDataset(samples.astype(np.float32),
                            labels.astype(np.int32), snr.astype(np.int16))
    _validate_pair(dataset, manifest)
    return dataset, manifest


@dataclass(frozen=True)
class SplitSpec:
    """How to partition a dataset and optionally budget labels.

    ``ratios`` are (train, val, test) fractions applied within every
    (class, SNR) cell; ``label_budget`` of None means all training labels
    are available downstream.
    """

    ratios: tuple[float, float, float] = (0.6, 0.1, 0.3)
    seed: int = 0
    label_budget: int | None = None


@dataclass(frozen=True)
class Split:
    """Index arrays into the parent dataset; labeled is always a train subset."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    labeled: np.ndarray


def _allocate(n: int, ratios: tuple[float, float, float]) -> list[int]:
    # Largest-remainder rounding keeps every part within 1 of n*ratio
    # while the parts still sum to n exactly.
    raw = [n * r for r in ratios]
    counts = [int(np.floor(x)) for x in raw]
    remainder = n - sum(counts)
    order = sorted(range(3), key=lambda i: raw[i] - counts[i], reverse=True)
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def stratified_split(labels: np.ndarray, snr_db: np.ndarray,
                     spec: SplitSpec) -> Split:
    """Partition instances per (class, SNR) cell into train/val/test.

    Every cell is shuffled with a generator derived from ``spec.seed`` and cut
    proportionally to ``spec.ratios`` (largest-remainder rounding, so each part
    stays within one instance of the exact proportion). When
    ``spec.label_budget`` is an integer N, the labeled subset takes the first
    N shuffled training indices of every cell; otherwise it is the whole
    training split.

    Raises:
        SplitError: ratios malformed, or a cell is too small to give every
            part at least one instance while a budget is requested.
        BudgetViolationError: N exceeds a cell's training count.
    """
    ratios = spec.ratios
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    if spec.label_budget is not None and spec.label_budget < 1:
        raise SplitError(f"label_budget must be positive, got {spec.label_budget}")
    labels = np.asarray(labels)
    snr_db = np.asarray(snr_db)
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    parts: dict[str, list[np.ndarray]] = {"train": [], "val": [], "test": [], "labeled": []}
    min_needed = int(np.ceil(1.0 / min(ratios)))
    # Cells visited in sorted (class, snr) order so the result only depends
    # on the seed, not on row order quirks.
    cells = sorted(set(zip(labels.tolist(), snr_db.tolist())))
    for cls, snr in cells:
        idx = np.where((labels == cls) & (snr_db == snr))[0]
        if spec.label_budget is not None and len(idx) < min_needed:
            raise SplitError(
                f"cell (class={cls}, snr={snr}) has {len(idx)} instances, "
                f"needs >= {min_needed} for budgeted splitting")
        idx = idx[rng.permutation(len(idx))]
        n_train, n_val, _ = _allocate(len(idx), ratios)
        train = idx[:n_train]
        parts["train"].append(train)
        parts["val"].append(idx[n_train:n_train + n_val])
        parts["test"].append(idx[n_train + n_val:])
        if spec.label_budget is None:
            parts["labeled"].append(train)
        else:
            if spec.label_budget > len(train):
                raise BudgetViolationError(
                    f"label budget {spec.label_budget} exceeds {len(train)} training "
                    f"instances in cell (class={cls}, snr={snr})")
            parts["labeled"].append(train[:spec.label_budget])
    return Split(**{k: np.sort(np.concatenate(v)).astype(np.int64) if v
                    else np.empty(0, dtype=np.int64) for k, v in parts.items()})


def check_budget_containment(split: Split) -> None:
    """Raise BudgetViolationError if labeled indices leak outside train."""
    labeled = set(split.labeled.tolist())
    train = set(split.train.tolist())
    if not labeled <= train:
        stray = sorted(labeled - train)[:5]
        raise BudgetViolationError(f"labeled indices outside train split: {stray}...")


def convert_radioml_archive(src_path: str, out_path: str) -> DatasetManifest:
    """Convert a pickled {(scheme, snr): (count, 2, T) float array} archive.

    Classes are ordered lexicographically and SNRs ascending; rows are laid
    out by (class, snr) in that order, preserving each block's stored row
    order. The resulting manifest has ``creation_seed`` of None since the
    instances were not synthesized here.
    """
    try:
        with open(src_path, "rb") as fh:
            archive = pickle.load(fh, encoding="latin1")
    except (pickle.UnpicklingError, EOFError, UnicodeDecodeError) as exc:
        raise ArchiveParseError(f"cannot unpickle archive {src_path}: {exc}") from exc
    if not isinstance(archive, dict) or not archive:
        raise ArchiveParseError("archive is not a non-empty mapping")
    entries: dict[tuple[str, int], np.ndarray] = {}
    t_len: int | None = None
    for key, value in archive.items():
        if (not isinstance(key, tuple) or len(key) != 2
                or not isinstance(key[0], str)):
            raise ArchiveParseError(f"bad archive key {key!r}, expected (scheme, snr)")
        scheme, snr = key
        try:
            snr = int(snr)
        except (TypeError, ValueError):
            raise ArchiveParseError(f"non-integer SNR in key {key!r}") from None
        block = np.asarray(value, dtype=np.float32)
        if block.ndim != 3 or block.shape[1] != 2:
            raise ArchiveParseError(
                f"key {key!r}: block shape {block.shape}, expected (count, 2, T)")
        if t_len is None:
            t_len = block.shape[2]
        elif block.shape[2] != t_len:
            raise ArchiveParseError(
                f"key {key!r}: instance length {block.shape[2]} differs from {t_len}")
        entries[(scheme, snr)] = block
    class_names = tuple(sorted({k[0] for k in entries}))
    snr_levels = tuple(sorted({k[1] for k in entries}))
    cls_index = {name: i for i, name in enumerate(class_names)}
    samples, labels, snrs = [], [], []
    for scheme in class_names:
        for snr in snr_levels:
            block = entries.get((scheme, snr))
            if block is None:
                continue
            samples.append(block)
            labels.append(np.full(len(block), cls_index[scheme], dtype=np.int32))
            snrs.append(np.full(len(block), snr, dtype=np.int16))
    stacked = np.concatenate(samples, axis=0)
    dataset = SignalDataset(stacked, np.concatenate(labels), np.concatenate(snrs))
    manifest = DatasetManifest(num_instances=len(dataset), instance_len=stacked.shape[2],
                               class_names=class_names, snr_levels=snr_levels,
                               creation_seed=None)
    save_dataset(dataset, manifest, out_path)
    return manifest
