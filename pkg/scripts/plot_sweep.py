"""Plot an aggregate.csv written by ``fogplace sweep``.

    python scripts/plot_sweep.py results/batch_grid/aggregate.csv -o deployed.png

One panel per (q, beta); a line per algorithm with the chosen metric
against U. Needs matplotlib, which the package itself does not use.
"""
import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("aggregate")
    parser.add_argument("--metric", default="deployed",
                        help="column prefix, e.g. deployed, type1, orch_delay_ms")
    parser.add_argument("-o", "--output", default="sweep.png")
    args = parser.parse_args()

    with open(args.aggregate) as fh:
        rows = list(csv.DictReader(fh))
    panels = defaultdict(lambda: defaultdict(list))
    for r in rows:
        panels[(float(r["q"]), float(r["beta"]))][r["algorithm"]].append(
            (int(r["U"]), float(r[f"{args.metric}_mean"]), float(r[f"{args.metric}_std"])))

    keys = sorted(panels)
    fig, axes = plt.subplots(1, len(keys), figsize=(4 * len(keys), 3.5), squeeze=False)
    for ax, key in zip(axes[0], keys):
        for name, points in sorted(panels[key].items()):
            points.sort()
            U, mean, std = zip(*points)
            ax.errorbar(U, mean, yerr=std, marker="o", capsize=3, label=name)
        ax.set_title(f"q={key[0]}, beta={key[1]}")
        ax.set_xlabel("U")
        ax.set_ylabel(args.metric)
        ax.grid(alpha=0.3)
    axes[0][0].legend()
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)


if __name__ == "__main__":
    main()
