"""Print a quality x cut-off pivot of one numeric column from a result CSV.

    python scripts/summarize.py results/fingerprint_quality/fingerprint_quality.csv phi2
"""
import argparse
import csv
import statistics
from collections import defaultdict


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    ap.add_argument("column")
    ap.add_argument("--rows", default="quality")
    ap.add_argument("--cols", default="c")
    args = ap.parse_args(argv)
    with open(args.csv) as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        cells = defaultdict(list)
        for r in reader:
            cells[r[args.rows], r[args.cols]].append(float(r[args.column]))
    rows = sorted({k[0] for k in cells}, key=lambda v: -float(v) if v.lstrip("-").isdigit() else 0)
    cols = list(dict.fromkeys(k[1] for k in cells))
    print(f"{args.rows:>8} " + " ".join(f"{c:>9}" for c in cols))
    for r in rows:
        vals = [statistics.median(cells[r, c]) if (r, c) in cells else float("nan") for c in cols]
        print(f"{r:>8} " + " ".join(f"{v:9.4f}" for v in vals))


if __name__ == "__main__":
    main()
