"""Plot precision and recall against tau from a sweep CSV written by `songmood sweep`.

Needs matplotlib (``pip install .[plot]``).

    python3 scripts/plot_sweep.py out/reports/sweep.csv sweep.png
"""

import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("sweep_csv")
    ap.add_argument("output")
    args = ap.parse_args()
    with open(args.sweep_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    tau = [float(r["tau"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(tau, [float(r["precision"]) for r in rows], marker="o", label="precision")
    ax.plot(tau, [float(r["recall"]) for r in rows], marker="s", label="recall")
    ax.set_xlabel("tau")
    ax.set_ylim(0, 1.02)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)


if __name__ == "__main__":
    main()
