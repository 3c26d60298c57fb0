#!/usr/bin/env python3
"""Bar-plot the per-dimension median scales emitted by an experiment run.

Usage:
    python scripts/plot_gamma.py results/se1/gamma_median.tsv -o gamma.png
"""

import argparse
import sys


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("gamma_file")
    parser.add_argument("-o", "--out", default="gamma.png")
    parser.add_argument("--title", default="Learned per-dimension scales (median)")
    args = parser.parse_args(argv)

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    dims, values = [], []
    with open(args.gamma_file, "r", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            dim, value = line.split("\t")
            dims.append(int(dim))
            values.append(float(value))

    fig, ax = plt.subplots(figsize=(max(6, len(dims) * 0.12), 3))
    ax.bar(dims, values, width=0.8)
    ax.set_xlabel("input dimension")
    ax.set_ylabel("median scale")
    ax.set_title(args.title)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
