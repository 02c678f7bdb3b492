"""Compare descriptive statistics of user-supplied dataset exports to published values.

Expects a directory with ``<key>.csv`` (and optionally ``<key>.schema.json``)
for any of: neurodegenerative, swear, italian, german.

    python3 scripts/reproduce_descriptives.py /path/to/exports
"""

import argparse
import contextlib
import io
import json
import sys
import tempfile
from pathlib import Path

from semtraj import cli

PUBLISHED = {
    "neurodegenerative": (19.53, 12.39, 19.79, 12.64),
    "swear": (20.69, 7.88, 21.20, 8.10),
    "italian": (4.96, 1.86, 14.14, 6.81),
    "german": (5.49, 1.82, 14.31, 6.00),
}
TOLERANCE = 0.05


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("data_dir", type=Path)
    args = ap.parse_args()

    ok = True
    found = 0
    with tempfile.TemporaryDirectory() as tmp:
        for key, want in PUBLISHED.items():
            path = args.data_dir / f"{key}.csv"
            if not path.is_file():
                print(f"{key:<18} missing")
                continue
            found += 1
            schema = path.with_suffix(".schema.json")
            with contextlib.redirect_stdout(io.StringIO()):
                run = cli.cmd_ingest([path], schema if schema.is_file() else None, run=Path(tmp) / key)
            stats = json.loads((run / "stats.json").read_text())["datasets"]
            for s in stats:
                got = (s["properties_mean"], s["properties_sd"], s["words_mean"], s["words_sd"])
                good = all(abs(g - w) <= TOLERANCE for g, w in zip(got, want))
                ok &= good
                print(f"{key:<18} properties {got[0]:.2f} ± {got[1]:.2f} (want {want[0]} ± {want[1]})  "
                      f"words {got[2]:.2f} ± {got[3]:.2f} (want {want[2]} ± {want[3]})  "
                      f"{'ok' if good else 'MISMATCH'}")
    sys.exit(0 if ok and found else 1)


if __name__ == "__main__":
    main()
