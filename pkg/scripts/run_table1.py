#!/usr/bin/env python3
"""Reconstruct the in-plane microwave angle at the nine reference sensor
positions and print the comparison table."""

import argparse
import csv
import json
import sys
import tempfile
from pathlib import Path

from nvorient import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--current-ma", type=float, default=40.0)
    ap.add_argument("--out", default=None, help="output directory (default: temp)")
    args = ap.parse_args()

    out = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="table1-"))
    cfg = out / "config.json"
    out.mkdir(parents=True, exist_ok=True)
    cfg.write_text(json.dumps({
        "mode": "table1",
        "wire": {"current_ma": args.current_ma},
    }, indent=2))
    code = cli.run("table1", cfg, out)
    if code != 0:
        return code
    with open(out / "table1.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    widths = [10, 10, 14, 16, 12]
    for row in rows:
        print("".join(str(v).rjust(w) for v, w in zip(row, widths)))
    print(f"\nwrote {out / 'table1.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
