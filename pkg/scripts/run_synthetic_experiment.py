#!/usr/bin/env python3
"""End-to-end synthetic experiment: how much does early abstention help
as the correlation between model confidences grows?

For each correlation level this script generates a score dataset, fits
the joint confidence model on the train split, optimizes thresholds for
both abstention architectures over the preference grid, and runs the
abstention-prediction precision-recall analysis. Everything goes through
the CLI code paths, so the JSON artifacts under --out are exactly what
the report renderer consumes.

Usage:
    python scripts/run_synthetic_experiment.py --out runs/demo --seed 42
"""

import argparse
import json
import sys
from pathlib import Path

from cascade_tuner.cli import main as cli_main


def build_config(rho: float, seed: int, grid: str) -> dict:
    n_cost, n_abs = (int(v) for v in grid.split("x"))
    return {
        "label": f"synthetic rho={rho}",
        "seed": seed,
        "models": [
            {"name": "small", "expected_cost": 1.0},
            {"name": "large", "expected_cost": 10.0},
        ],
        "architecture": "early",
        "data_mode": "calibrated",
        "split": {"train_n": 300, "seed": seed},
        "grid": {"n_cost": n_cost, "n_abs": n_abs},
        "smooth_r": 10.0,
        "synthetic": {
            "n": 1300,
            "mode": "calibrated",
            "marginals": [
                {"weights": [0.6, 0.4], "alphas": [2.0, 8.0], "betas": [5.0, 2.0]},
                {"weights": [1.0], "alphas": [5.0], "betas": [1.6]},
            ],
            "copulas": [{"family": "gaussian", "rho": rho}],
        },
    }


def run(rho: float, out_dir: Path, seed: int, grid: str) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    config_path = out_dir / "config.json"
    config_path.write_text(json.dumps(build_config(rho, seed, grid), indent=2))
    data = out_dir / "data.csv"
    model = out_dir / "model.json"
    steps = [
        ["synth", "--config", str(config_path), "--out", str(data)],
        ["fit", "--data", str(data), "--config", str(config_path), "--out", str(model)],
        ["sweep", "--model", str(model), "--config", str(config_path),
         "--data", str(data), "--out", str(out_dir)],
        ["pr", "--data", str(data), "--config", str(config_path), "--out", str(out_dir)],
    ]
    for step in steps:
        code = cli_main(step)
        if code != 0:
            raise SystemExit(f"step {step[0]} failed with exit code {code}")
    with open(out_dir / "comparison.json", encoding="utf-8") as fh:
        return json.load(fh)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/synthetic")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--rhos", default="0.0,0.4,0.8",
                        help="comma-separated correlation levels")
    parser.add_argument("--grid", default="10x10")
    args = parser.parse_args()

    rhos = [float(v) for v in args.rhos.split(",")]
    rows = []
    for rho in rhos:
        out_dir = Path(args.out) / f"rho_{rho:g}"
        doc = run(rho, out_dir, args.seed, args.grid)
        o = doc["overall"]
        rows.append((rho, o["early_loss"], o["final_loss"], o["pct_delta_loss"]))
        print(f"rho={rho:g}: early={o['early_loss']:.4f} final={o['final_loss']:.4f} "
              f"delta={o['pct_delta_loss']:+.2f}%  (test basis, smoothed)")

    print()
    print(f"{'rho':>6} {'early':>9} {'final':>9} {'%delta':>8}")
    for rho, e, f, d in rows:
        print(f"{rho:>6g} {e:>9.4f} {f:>9.4f} {d:>+8.2f}")
    print(f"\nartifacts under {args.out}/rho_*/ "
          "(comparison.json, sweep_*.json, pr_rate*.json)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
