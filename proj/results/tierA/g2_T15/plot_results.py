#!/usr/bin/env python3
"""Plot fidelity sweeps written by `qtransfer sweep`.

usage: plot_results.py [--axis g2|kappa] [--out fig.png] LABEL=results.csv ...
"""
import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

XLABEL = {"g2": r"$g_2/2\pi$ (MHz)", "kappa": r"$\kappa^{-1}$ ($\mu$s)"}


def load(path):
    xs, ys = [], []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            if row["fidelity"] == "":
                continue
            xs.append(float(row["param"]))
            ys.append(float(row["fidelity"]))
    return xs, ys


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--axis", choices=sorted(XLABEL), default="g2")
    ap.add_argument("--out", default="fidelity.png")
    ap.add_argument("curves", nargs="+", help="LABEL=path or path")
    args = ap.parse_args()
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    for item in args.curves:
        label, _, path = item.rpartition("=")
        xs, ys = load(path or item)
        ax.plot(xs, ys, "o-", ms=3, label=label or path)
    ax.set_xlabel(XLABEL[args.axis])
    ax.set_ylabel("fidelity")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
