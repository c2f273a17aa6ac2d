"""Dataset files, synthetic data generation, and train/test splitting.

Datasets are wide-format CSV (one row per query, one column group per
model) with the cascade itself described by a sidecar JSON config:

    query_id, conf_1, correct_1 [, cost_1], conf_2, correct_2 [, cost_2], ...

Raw-signal datasets replace conf_i with praw_i; their confidences must be
calibrated before density fitting. Costs fall back to each model's
expected cost when the cost_i columns are absent.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, replace

import numpy as np

from .cascade import Architecture, CascadeSpec, ModelProfile, QueryRecord
from .density import MarkovJointModel, sample_joint
from .errors import DataSchemaError


class SchemaMode(enum.Enum):
    CALIBRATED = "calibrated"  # conf_i columns hold calibrated probabilities
    RAW = "raw"  # praw_i columns hold raw token-level signals


class Split(enum.Enum):
    TRAIN = "train"
    TEST = "test"
    UNSPLIT = "unsplit"


@dataclass(frozen=True)
class ScoreDataset:
    """Per-query scores for one benchmark and cascade."""

    benchmark: str
    cascade: CascadeSpec
    records: tuple[QueryRecord, ...]
    mode: SchemaMode = SchemaMode.CALIBRATED
    split: Split = Split.UNSPLIT

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        k = self.cascade.k
        seen = set()
        for rec in self.records:
            if len(rec.confidences) != k:
                raise DataSchemaError(
                    f"record {rec.query_id!r} has {len(rec.confidences)} models, "
                    f"cascade has {k}"
                )
            if rec.query_id in seen:
                raise DataSchemaError(f"duplicate query_id {rec.query_id!r}")
            seen.add(rec.query_id)

    def __len__(self) -> int:
        return len(self.records)

    def confidence_matrix(self) -> np.ndarray:
        return np.array([r.confidences for r in self.records], dtype=float)

    def correct_matrix(self) -> np.ndarray:
        return np.array([r.correct for r in self.records], dtype=bool)

    def cost_matrix(self) -> np.ndarray:
        return np.array([r.costs for r in self.records], dtype=float)


def load_cascade_config(path) -> CascadeSpec:
    """Read the sidecar JSON: {"models": [{name, expected_cost}], "architecture"}."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        models = tuple(
            ModelProfile(m["name"], float(m["expected_cost"]), i + 1)
            for i, m in enumerate(doc["models"])
        )
        arch = Architecture(doc.get("architecture", "early"))
    except (KeyError, TypeError, ValueError) as e:
        raise DataSchemaError(f"bad cascade config {path}: {e}") from e
    return CascadeSpec(models, arch)


def _conf_column(mode: SchemaMode, i: int) -> str:
    return f"praw_{i}" if mode is SchemaMode.RAW else f"conf_{i}"


def load_dataset(
    path,
    cascade: CascadeSpec,
    mode: SchemaMode = SchemaMode.CALIBRATED,
    benchmark: str = "",
) -> ScoreDataset:
    """Read a wide-format CSV, validating every cell.

    Errors name the offending row (1-based, counting the header as row 1)
    and column.
    """
    k = cascade.k
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataSchemaError(f"{path}: empty file, expected a header row")
        required = ["query_id"]
        for i in range(1, k + 1):
            required += [_conf_column(mode, i), f"correct_{i}"]
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise DataSchemaError(f"{path}: missing columns {missing}")
        has_cost = [f"cost_{i}" in reader.fieldnames for i in range(1, k + 1)]
        for row_no, row in enumerate(reader, start=2):
            qid = row["query_id"]
            confs, corrects, costs = [], [], []
            for i in range(1, k + 1):
                col = _conf_column(mode, i)
                try:
                    v = float(row[col])
                except (TypeError, ValueError):
                    raise DataSchemaError(
                        f"{path} row {row_no}, column {col}: not a number ({row[col]!r})"
                    )
                if not 0.0 <= v <= 1.0:
                    raise DataSchemaError(
                        f"{path} row {row_no}, column {col}: value {v} outside [0, 1]"
                    )
                confs.append(v)
                cval = (row[f"correct_{i}"] or "").strip()
                if cval not in ("0", "1"):
                    raise DataSchemaError(
                        f"{path} row {row_no}, column correct_{i}: expected 0/1, "
                        f"got {row[f'correct_{i}']!r}"
                    )
                corrects.append(cval == "1")
                if has_cost[i - 1] and (row[f"cost_{i}"] or "").strip():
                    try:
                        c = float(row[f"cost_{i}"])
                    except ValueError:
                        raise DataSchemaError(
                            f"{path} row {row_no}, column cost_{i}: not a number"
                        )
                    if c < 0:
                        raise DataSchemaError(
                            f"{path} row {row_no}, column cost_{i}: negative cost {c}"
                        )
                    costs.append(c)
                else:
                    costs.append(cascade.models[i - 1].expected_cost)
            records.append(
                QueryRecord(qid, tuple(confs), tuple(corrects), tuple(costs))
            )
    return ScoreDataset(benchmark=benchmark, cascade=cascade, records=tuple(records), mode=mode)


def save_dataset(ds: ScoreDataset, path) -> None:
    """Write the wide-format CSV (always includes cost columns)."""
    k = ds.cascade.k
    header = ["query_id"]
    for i in range(1, k + 1):
        header += [_conf_column(ds.mode, i), f"correct_{i}", f"cost_{i}"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in ds.records:
            row = [rec.query_id]
            for i in range(k):
                row += [
                    repr(rec.confidences[i]),
                    "1" if rec.correct[i] else "0",
                    repr(rec.costs[i]),
                ]
            writer.writerow(row)


def generate_synthetic(
    cascade: CascadeSpec,
    joint: MarkovJointModel,
    n: int,
    seed: int,
    miscalibration: float = 0.0,
    mode: SchemaMode = SchemaMode.CALIBRATED,
    raw_transform: tuple[float, float] = (-2.0, 1.5),
    benchmark: str = "synthetic",
) -> ScoreDataset:
    """Sample a dataset from a ground-truth joint confidence model.

    Correctness labels are Bernoulli draws with success probability equal
    to the (possibly miscalibrated) confidence, so by construction the
    calibrated scores mean what they claim. miscalibration in [0, 1]
    shrinks the label probability toward a coin flip without touching the
    recorded confidence. In raw mode the sampled values are treated as raw
    signals and the recorded correctness follows the calibrated value
    implied by the (intercept, slope) raw_transform.
    """
    if not 0.0 <= miscalibration <= 1.0:
        raise ValueError(f"miscalibration {miscalibration} outside [0, 1]")
    if joint.k != cascade.k:
        raise ValueError(f"joint model k={joint.k}, cascade k={cascade.k}")
    rng = np.random.default_rng(seed)
    x = sample_joint(joint, n, seed=int(rng.integers(2**63)))
    if mode is SchemaMode.RAW:
        from .calibration import CalibrationModel, apply_calibration

        cal = CalibrationModel(intercept=raw_transform[0], slope=raw_transform[1])
        truth = apply_calibration(cal, x)
    else:
        truth = x
    label_p = (1.0 - miscalibration) * truth + miscalibration * 0.5
    correct = rng.random(x.shape) < label_p
    costs = tuple(m.expected_cost for m in cascade.models)
    records = tuple(
        QueryRecord(
            f"q{idx:06d}",
            tuple(float(v) for v in x[idx]),
            tuple(bool(b) for b in correct[idx]),
            costs,
        )
        for idx in range(n)
    )
    return ScoreDataset(benchmark=benchmark, cascade=cascade, records=records, mode=mode)


def split_dataset(ds: ScoreDataset, train_n: int, seed: int) -> tuple[ScoreDataset, ScoreDataset]:
    """Uniform shuffle by seed; first train_n records to train, rest to test."""
    if not 0 < train_n < len(ds):
        raise ValueError(
            f"train_n must be in 1..{len(ds) - 1} for a dataset of {len(ds)}, got {train_n}"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ds))
    train = tuple(ds.records[i] for i in order[:train_n])
    test = tuple(ds.records[i] for i in order[train_n:])
    return (
        replace(ds, records=train, split=Split.TRAIN),
        replace(ds, records=test, split=Split.TEST),
    )
