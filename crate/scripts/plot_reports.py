#!/usr/bin/env python3
"""Plot the CSV reports written by `qsurrogate`.

    python3 scripts/plot_reports.py out/reports [--output-dir plots]

Produces k_sweep.png (elbow, silhouette, Davies-Bouldin, downstream scores),
one <variant>_history.png per training history, and comparison.png.
"""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def number(v):
    return float(v) if v not in ("", None) else float("nan")


def plot_k_sweep(rows, out):
    ks = [int(r["k"]) for r in rows]
    panels = [
        ("wcss", "WCSS (elbow)"),
        ("silhouette", "silhouette"),
        ("davies_bouldin", "Davies-Bouldin"),
        ("nrmse", "NRMSE (range)"),
        ("r2", "R²"),
    ]
    fig, axes = plt.subplots(1, len(panels), figsize=(4 * len(panels), 3.2))
    for ax, (col, title) in zip(axes, panels):
        ax.plot(ks, [number(r[col]) for r in rows], "o-")
        ax.set_xlabel("k")
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out / "k_sweep.png", dpi=120)
    plt.close(fig)


def plot_history(path, out):
    rows = read_csv(path)
    epochs = [int(r["epoch"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.semilogy(epochs, [number(r["train_loss"]) for r in rows], label="train")
    ax.semilogy(epochs, [number(r["val_loss"]) for r in rows], label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title(path.stem.removesuffix("_history"))
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / f"{path.stem}.png", dpi=120)
    plt.close(fig)


def plot_comparison(rows, out):
    rows = [r for r in rows if r["r2"]]
    names = [r["model"] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.6))
    axes[0].bar(names, [number(r["r2"]) for r in rows])
    axes[0].set_title("held-out R²")
    axes[1].bar(names, [number(r["nrmse_range"]) for r in rows])
    axes[1].set_yscale("log")
    axes[1].set_title("NRMSE (range)")
    for ax in axes:
        ax.tick_params(axis="x", rotation=35)
    fig.tight_layout()
    fig.savefig(out / "comparison.png", dpi=120)
    plt.close(fig)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("reports", type=Path)
    parser.add_argument("--output-dir", type=Path)
    args = parser.parse_args()
    out = args.output_dir or args.reports
    out.mkdir(parents=True, exist_ok=True)

    written = []
    if (args.reports / "k_sweep.csv").exists():
        plot_k_sweep(read_csv(args.reports / "k_sweep.csv"), out)
        written.append("k_sweep.png")
    for path in sorted(args.reports.glob("*_history.csv")):
        plot_history(path, out)
        written.append(f"{path.stem}.png")
    if (args.reports / "comparison.csv").exists():
        plot_comparison(read_csv(args.reports / "comparison.csv"), out)
        written.append("comparison.png")
    print("wrote " + (", ".join(written) if written else "nothing"))


if __name__ == "__main__":
    main()
