"""Plot a sweep or compare CSV written by the matchforge CLI.

    python scripts/plot_tradeoff.py sweep.csv -o sweep.png
    python scripts/plot_tradeoff.py compare.csv -o compare.png

Needs matplotlib (``pip install artifact[plot]``).
"""

import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _float(v):
    return float(v) if v not in ("", None) else None


def load(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_sweep(rows, ax):
    kind = next((r["label"] for r in rows if r["label"] != "da"), "travel")
    xcol = {"travel": "travel_reduction_pct", "min_matched": "matched",
            "couples": "couples_same_location"}[kind]
    pts = [(_float(r[xcol]), _float(r["bp_pct"])) for r in rows if r["status"] == "ok"]
    pts = sorted(p for p in pts if None not in p)
    ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-")
    ax.set_xlabel(xcol.replace("_", " "))
    ax.set_ylabel("blocking pairs (% of admissible)")


def plot_compare(rows, ax):
    ok = [r for r in rows if r["status"] == "ok"]
    for col, label in (("exact", "exact"), ("inverse", "inverse")):
        ax.plot([_float(r[f"{col}_travel"]) for r in ok],
                [_float(r[f"{col}_bp_pct"]) for r in ok], "o-", label=label)
    ax.set_xlabel("total travel (miles)")
    ax.set_ylabel("blocking pairs (% of admissible)")
    ax.legend()


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    ap.add_argument("-o", "--output", required=True)
    args = ap.parse_args(argv)
    rows = load(args.csv)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if rows and "budget" in rows[0]:
        plot_compare(rows, ax)
    else:
        plot_sweep(rows, ax)
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)


if __name__ == "__main__":
    main()
