#!/usr/bin/env python3
"""Run the desk-scale synthetic experiments and write result bundles.

Examples:
    python scripts/run_synthetic.py se1 --out results/se1
    python scripts/run_synthetic.py se3 --resamples 10 --workers 4
"""

import argparse
import sys
import time

from srff.harness import ExperimentConfig, emit_results, run_experiment, support_dims

PRESETS = {
    "se1": dict(dataset="se1", train_n=1000),
    "se1-10k": dict(dataset="se1", train_n=10_000),
    "se2": dict(dataset="se2", train_n=1000),
    "se3": dict(dataset="se3", train_n=1000),
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("preset", choices=sorted(PRESETS))
    parser.add_argument("--resamples", type=int, default=30)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=0)
    parser.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    config = ExperimentConfig(
        **PRESETS[args.preset],
        resamples=args.resamples,
        master_seed=args.seed,
        workers=args.workers,
        out_dir=args.out or f"results/{args.preset}",
    )
    started = time.perf_counter()
    result = run_experiment(config)
    elapsed = time.perf_counter() - started
    paths = emit_results(result, config.out_dir)
    print(open(paths["table"], "r", encoding="utf-8").read(), end="")
    if result.srff_gamma_median is not None:
        print(f"selected dims (10% of max): {sorted(support_dims(result.srff_gamma_median))}")
    print(f"elapsed: {elapsed:.0f}s; results in {paths['json']}")
    return 2 if result.failures else 0


if __name__ == "__main__":
    sys.exit(main())
