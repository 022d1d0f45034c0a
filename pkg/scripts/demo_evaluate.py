"""End-to-end robustness report from simulated classifiers.

Writes a fragile "baseline" and a sturdier "model" prediction table for one
dataset, then scores the model against the baseline. No training involved;
the point is to exercise the file formats and the report layout.
"""

import argparse
from pathlib import Path

from medcorrupt.metrics import write_predictions
from medcorrupt.pipeline import evaluate, write_report
from medcorrupt.registry import default_registry
from medcorrupt.synthetic import synthetic_predictions


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dataset", default="dermamnist")
    ap.add_argument("--output", default="demo-report")
    ap.add_argument("--images", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    registry = default_registry()
    profile = registry.profile(args.dataset)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    base = synthetic_predictions(profile, args.images, args.seed, skill=1.5, fragility=1.0)
    model = synthetic_predictions(profile, args.images, args.seed + 1, skill=2.5, fragility=0.6)
    write_predictions(out / "baseline.csv", base)
    write_predictions(out / "model.csv", model)

    report = evaluate(out / "model.csv", out / "baseline.csv", args.dataset, registry)
    write_report(report, out, "md")
    print(report.to_markdown())
    print(f"tables and report written to {out}/")


if __name__ == "__main__":
    main()
