"""Command-line entry points.

Commands:
    synth: generate a synthetic score dataset from a ground-truth model
    fit: calibrate (raw mode) and fit the joint confidence model
    sweep: optimize thresholds over the preference grid, compare architectures
    pr: abstention-prediction precision-recall analysis
    route: trace one query through the cascade decision rule

All randomness flows through seeds recorded in the outputs; rerunning any
command with the same inputs and seed produces byte-identical files. The
run configuration lives in a single JSON document; flags override it.
Set CASCADE_TUNER_LOG to control log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import calibration as cal
from .abstention import (
    cost_savings_estimate,
    fit_abstention_classifier,
    label_abstentions,
    precision_recall,
)
from .cascade import (
    Architecture,
    CascadeSpec,
    ModelProfile,
    QueryRecord,
    ThresholdVector,
    route,
    validate_thresholds,
)
from .dataio import (
    SchemaMode,
    ScoreDataset,
    generate_synthetic,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .density import fit_markov_model, model_from_dict, model_to_dict
from .errors import (
    CascadeTunerError,
    DataSchemaError,
    DegenerateFitError,
    QuadratureError,
    ThresholdValidationError,
)
from .optimizer import (
    OptimizerOptions,
    PreferenceGrid,
    comparison_to_dict,
    compare_architectures,
    default_preference_grid,
    smooth_threshold_grid,
    sweep_preference_grid,
    sweep_result_to_dict,
)

log = logging.getLogger("cascade_tuner")

EXIT_CODES = {
    DataSchemaError: 3,
    DegenerateFitError: 4,
    ThresholdValidationError: 5,
    ValueError: 5,
    QuadratureError: 6,
}


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("wrote %s", path)


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _cascade_from_config(cfg: dict) -> CascadeSpec:
    try:
        models = tuple(
            ModelProfile(m["name"], float(m["expected_cost"]), i + 1)
            for i, m in enumerate(cfg["models"])
        )
        arch = Architecture(cfg.get("architecture", "early"))
    except (KeyError, TypeError) as e:
        raise DataSchemaError(f"config is missing cascade models: {e}") from e
    return CascadeSpec(models, arch)


def _grid_from_config(cfg: dict, spec: CascadeSpec, flag: str | None) -> PreferenceGrid:
    if flag:
        try:
            n_cost, n_abs = (int(v) for v in flag.lower().split("x"))
        except ValueError as e:
            raise ValueError(f"--grid expects ROWSxCOLS like 10x10, got {flag!r}") from e
        return default_preference_grid(spec, n_cost, n_abs)
    grid_cfg = cfg.get("grid")
    if grid_cfg is None:
        return default_preference_grid(spec)
    if "lambdas_cost" in grid_cfg:
        return PreferenceGrid(
            tuple(grid_cfg["lambdas_cost"]), tuple(grid_cfg["lambdas_abs"])
        )
    return default_preference_grid(
        spec, int(grid_cfg.get("n_cost", 10)), int(grid_cfg.get("n_abs", 10))
    )


def _opts_from_config(cfg: dict, seed: int) -> OptimizerOptions:
    oc = cfg.get("optimizer", {})
    return OptimizerOptions(
        n_starts=int(oc.get("n_starts", 12)),
        warm_n_starts=int(oc.get("warm_n_starts", 3)),
        seed=seed,
        max_iter=int(oc.get("max_iter", 150)),
        ftol=float(oc.get("ftol", 1e-12)),
    )


def _resolve_seed(args, cfg: dict) -> int:
    if args.seed is not None:
        return args.seed
    return int(cfg.get("seed", 0))


def _mode_from_config(cfg: dict) -> SchemaMode:
    return SchemaMode(cfg.get("data_mode", "calibrated"))


def _calibrate_records(
    ds: ScoreDataset, train: ScoreDataset
) -> tuple[list[cal.CalibrationModel | None], np.ndarray]:
    """Fit per-model calibration on the train split, apply to all of ds.

    Falls back to the clipped raw signal for a model whose training labels
    are single-class.
    """
    k = ds.cascade.k
    raw_all = ds.confidence_matrix()
    raw_train = train.confidence_matrix()
    correct_train = train.correct_matrix()
    models: list[cal.CalibrationModel | None] = []
    out = np.empty_like(raw_all)
    for i in range(k):
        pairs = list(zip(raw_train[:, i], correct_train[:, i]))
        try:
            m = cal.fit_calibration(pairs)
            out[:, i] = cal.apply_calibration(m, raw_all[:, i])
        except DegenerateFitError:
            log.warning(
                "model %d: single-class training labels, using clipped raw signal",
                i + 1,
            )
            m = None
            out[:, i] = np.clip(raw_all[:, i], cal.OUTPUT_CLAMP, 1 - cal.OUTPUT_CLAMP)
        models.append(m)
    return models, out


def _prepare_split(ds: ScoreDataset, cfg: dict, seed: int):
    split_cfg = cfg.get("split", {})
    train_n = int(split_cfg.get("train_n", min(300, max(1, len(ds) // 4))))
    split_seed = int(split_cfg.get("seed", seed))
    train, test = split_dataset(ds, train_n, split_seed)
    return train, test, {"train_n": train_n, "seed": split_seed}


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    seed = _resolve_seed(args, cfg)
    spec = _cascade_from_config(cfg)
    syn = cfg.get("synthetic", {})
    joint = model_from_dict(
        {"k": spec.k, "marginals": syn["marginals"], "copulas": syn["copulas"]}
    )
    ds = generate_synthetic(
        spec,
        joint,
        n=int(syn.get("n", 1300)),
        seed=seed,
        miscalibration=float(syn.get("miscalibration", 0.0)),
        mode=SchemaMode(syn.get("mode", "calibrated")),
        benchmark=cfg.get("label", "synthetic"),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out)
    log.info("wrote %d records to %s", len(ds), out)
    return 0


def cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    seed = _resolve_seed(args, cfg)
    spec = _cascade_from_config(cfg)
    mode = _mode_from_config(cfg)
    ds = load_dataset(args.data, spec, mode, benchmark=cfg.get("label", ""))
    train, _, split_meta = _prepare_split(ds, cfg, seed)
    calibration_meta = None
    if mode is SchemaMode.RAW:
        models, conf_all = _calibrate_records(ds, train)
        order = {r.query_id: i for i, r in enumerate(ds.records)}
        rows = [order[r.query_id] for r in train.records]
        conf = conf_all[rows]
        calibration_meta = [
            None
            if m is None
            else {"intercept": m.intercept, "slope": m.slope, "clamp_eps": m.clamp_eps}
            for m in models
        ]
    else:
        conf = train.confidence_matrix()
    m_override = args.components if args.components else cfg.get("components")
    model, diagnostics = fit_markov_model(
        conf, m=m_override, seed=seed
    )
    doc = model_to_dict(model)
    doc["diagnostics"] = diagnostics
    doc["calibration"] = calibration_meta
    doc["split"] = split_meta
    doc["seed"] = seed
    doc["data_mode"] = mode.value
    if m_override:
        doc["components_override"] = int(m_override)
    _write_json(Path(args.out), doc)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    seed = _resolve_seed(args, cfg)
    spec = _cascade_from_config(cfg)
    with open(args.model, encoding="utf-8") as fh:
        model_doc = json.load(fh)
    model = model_from_dict(model_doc)
    if model.k != spec.k:
        raise DataSchemaError(
            f"model file has k={model.k} but config cascade has k={spec.k}"
        )
    grid = _grid_from_config(cfg, spec, args.grid)
    opts = _opts_from_config(cfg, seed)
    smooth_r = args.smooth_r if args.smooth_r is not None else float(cfg.get("smooth_r", 10.0))
    test_records = None
    if args.data:
        mode = _mode_from_config(cfg)
        ds = load_dataset(args.data, spec, mode, benchmark=cfg.get("label", ""))
        split_cfg = dict(cfg.get("split", {}))
        split_cfg.setdefault("train_n", model_doc.get("split", {}).get("train_n", 300))
        split_cfg.setdefault("seed", model_doc.get("split", {}).get("seed", seed))
        train, test, _ = _prepare_split(ds, {"split": split_cfg}, seed)
        if mode is SchemaMode.RAW:
            _, conf_all = _calibrate_records(ds, train)
            order = {r.query_id: i for i, r in enumerate(ds.records)}
            test_records = [
                QueryRecord(
                    r.query_id,
                    tuple(conf_all[order[r.query_id]]),
                    r.correct,
                    r.costs,
                )
                for r in test.records
            ]
        else:
            test_records = list(test.records)
    out_dir = Path(args.out)
    if args.architecture == "both":
        cmp = compare_architectures(
            model,
            spec,
            grid,
            opts,
            smooth_r=smooth_r,
            test_data=test_records,
            label=cfg.get("label", ""),
        )
        early_doc = sweep_result_to_dict(cmp.early)
        final_doc = sweep_result_to_dict(cmp.final)
        cmp_doc = comparison_to_dict(cmp)
        for doc in (early_doc, final_doc, cmp_doc):
            doc["seed"] = seed
        _write_json(out_dir / "sweep_early.json", early_doc)
        _write_json(out_dir / "sweep_final.json", final_doc)
        _write_json(out_dir / "comparison.json", cmp_doc)
    else:
        arch = Architecture(args.architecture)
        arch_spec = CascadeSpec(spec.models, arch)
        result = sweep_preference_grid(model, arch_spec, grid, opts)
        if min(grid.shape) >= 2:
            result = smooth_threshold_grid(result, model, arch_spec, r=smooth_r)
        doc = sweep_result_to_dict(result)
        doc["seed"] = seed
        _write_json(out_dir / f"sweep_{arch.value}.json", doc)
    return 0


def cmd_pr(args) -> int:
    cfg = _load_config(args.config)
    seed = _resolve_seed(args, cfg)
    spec = _cascade_from_config(cfg)
    if spec.k < 2:
        raise ValueError("abstention prediction needs at least two models")
    mode = _mode_from_config(cfg)
    ds = load_dataset(args.data, spec, mode, benchmark=cfg.get("label", ""))
    train, test, split_meta = _prepare_split(ds, cfg, seed)
    raw_train = train.confidence_matrix()
    raw_test = test.confidence_matrix()
    if mode is SchemaMode.RAW:
        # labels come from calibrated final-model confidences; features stay raw
        models, conf_all = _calibrate_records(ds, train)
        order = {r.query_id: i for i, r in enumerate(ds.records)}
        rows_tr = [order[r.query_id] for r in train.records]
        rows_te = [order[r.query_id] for r in test.records]
        final_train = conf_all[rows_tr, -1]
        final_test = conf_all[rows_te, -1]
    else:
        final_train = raw_train[:, -1]
        final_test = raw_test[:, -1]
    rates = [float(r) for r in (args.rate or cfg.get("rates", [0.2, 0.3]))]
    cost_ratio = float(
        cfg.get(
            "cost_ratio",
            sum(spec.expected_costs[:-1]) / sum(spec.expected_costs)
            if sum(spec.expected_costs) > 0
            else 0.10,
        )
    )
    out_dir = Path(args.out)
    for rate in rates:
        labeling = label_abstentions(final_train, rate)
        clf = fit_abstention_classifier(raw_train[:, :-1], labeling)
        test_labels = final_test < labeling.xi_k
        curve = precision_recall(clf, raw_test[:, :-1], test_labels)
        doc = curve.to_dict()
        doc.update(
            {
                "rate": rate,
                "xi_k": labeling.xi_k,
                "realized_train_rate": labeling.realized_rate,
                "n_train": len(train),
                "n_test": len(test),
                "split": split_meta,
                "seed": seed,
            }
        )
        op = curve.precision_at_recall(0.2)
        factor, new_rate = cost_savings_estimate(
            curve.baseline, 0.2, max(op, 1e-9), cost_ratio
        )
        doc["cost_savings_at_recall_20"] = {
            "precision": op,
            "cost_ratio": cost_ratio,
            "total_cost_factor": factor,
            "new_abstention_rate": new_rate,
        }
        _write_json(out_dir / f"pr_rate{int(round(rate * 100))}.json", doc)
    return 0


def cmd_route(args) -> int:
    cfg = _load_config(args.config)
    spec = _cascade_from_config(cfg)
    conf = tuple(float(v) for v in args.confidences.split(","))
    phi = tuple(float(v) for v in args.phi.split(",")) if args.phi else ()
    xi = tuple(float(v) for v in args.xi.split(","))
    t = ThresholdVector(phi, xi)
    validate_thresholds(spec, t)
    if len(conf) != spec.k:
        raise ValueError(f"expected {spec.k} confidences, got {len(conf)}")
    rec = QueryRecord(
        "query", conf, tuple(True for _ in conf), spec.expected_costs
    )
    k = spec.k
    for i in range(k):
        c = conf[i]
        name = spec.models[i].name
        if i < k - 1:
            if c > phi[i]:
                print(f"[{i + 1}] {name}: confidence {c} > deferral {phi[i]} -> ANSWER")
                break
            if c < xi[i]:
                print(f"[{i + 1}] {name}: confidence {c} < abstention {xi[i]} -> ABSTAIN")
                break
            print(
                f"[{i + 1}] {name}: {xi[i]} <= confidence {c} <= {phi[i]} -> defer to "
                f"{spec.models[i + 1].name}"
            )
        else:
            if c < xi[i]:
                print(f"[{i + 1}] {name}: confidence {c} < abstention {xi[i]} -> ABSTAIN")
            else:
                print(f"[{i + 1}] {name}: confidence {c} >= abstention {xi[i]} -> ANSWER")
    outcome = route(spec, t, rec)
    print(
        f"outcome: {outcome.decision.value} at model {outcome.model_index}, "
        f"cumulative cost {outcome.cumulative_cost}"
    )
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cascade-tuner",
        description="Tune and evaluate LLM-cascade deferral and abstention thresholds.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic score dataset")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_synth)

    fp = sub.add_parser("fit", help="fit the joint confidence model")
    fp.add_argument("--data", required=True)
    fp.add_argument("--config", required=True)
    fp.add_argument("--out", required=True)
    fp.add_argument("--components", type=int)
    fp.add_argument("--seed", type=int)
    fp.set_defaults(func=cmd_fit)

    wp = sub.add_parser("sweep", help="optimize thresholds over the preference grid")
    wp.add_argument("--model", required=True)
    wp.add_argument("--config", required=True)
    wp.add_argument("--out", required=True)
    wp.add_argument("--data")
    wp.add_argument("--grid", help="grid size like 10x10 (defaults from config)")
    wp.add_argument("--smooth-r", type=float, dest="smooth_r")
    wp.add_argument(
        "--architecture", choices=["early", "final", "both"], default="both"
    )
    wp.add_argument("--seed", type=int)
    wp.set_defaults(func=cmd_sweep)

    pp = sub.add_parser("pr", help="abstention-prediction precision-recall analysis")
    pp.add_argument("--data", required=True)
    pp.add_argument("--config", required=True)
    pp.add_argument("--out", required=True)
    pp.add_argument("--rate", action="append", type=float)
    pp.add_argument("--seed", type=int)
    pp.set_defaults(func=cmd_pr)

    rp = sub.add_parser("route", help="trace one query through the decision rule")
    rp.add_argument("--config", required=True)
    rp.add_argument("--confidences", required=True, help="comma-separated, one per model")
    rp.add_argument("--phi", default="", help="deferral thresholds, comma-separated")
    rp.add_argument("--xi", required=True, help="abstention thresholds, comma-separated")
    rp.set_defaults(func=cmd_route)
    return p


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("CASCADE_TUNER_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CascadeTunerError as e:
        log.error("%s", e)
        for klass, code in EXIT_CODES.items():
            if isinstance(e, klass):
                return code
        return 1
    except ValueError as e:
        log.error("%s", e)
        return 5
    except OSError as e:
        log.error("%s", e)
        return 3
    except Exception as e:  # pragma: no cover - last resort
        log.exception("unexpected failure: %s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
