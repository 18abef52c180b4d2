#!/usr/bin/env python3
"""Replay the metric-agreement analysis on the bundled evaluation table.

Prints the Spearman rank-correlation matrix over all 13 reported metrics
and highlights how strongly the alternative Frechet-style scores track the
standard one. Run: python scripts/replay_agreement.py [--out FILE]
"""

import argparse

from heliometrics.records import meta_record, write_records
from heliometrics.reference_tables import reference_table
from heliometrics.statlab import spearman, spearman_matrix


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=None, help="optional JSONL output path")
    args = parser.parse_args()

    table = reference_table()
    names = table.metric_names
    mat = spearman_matrix(table)

    width = max(len(n) for n in names) + 2
    print(" " * width + "".join(n[:9].rjust(10) for n in names))
    for name, row in zip(names, mat):
        print(name.ljust(width) + "".join(f"{v:10.2f}" for v in row))

    fid = table.column("FID")
    print()
    for other in ("rFID", "CLIP-FID", "KID", "precision", "recall"):
        print(f"rho(FID, {other:9s}) = {spearman(fid, table.column(other)):+.3f}")

    if args.out:
        write_records(args.out, [
            meta_record("replay_agreement"),
            {"record": "spearman_matrix", "metrics": names,
             "rows": [[round(v, 6) for v in row] for row in mat.tolist()]},
        ])
        print(f"\nwrote {args.out}")


if __name__ == "__main__":
    main()
