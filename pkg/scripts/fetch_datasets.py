#!/usr/bin/env python3
"""Download Cora, PubMed and BlogCatalog and convert them to edges.txt / labels.txt.

    python scripts/fetch_datasets.py --data-dir data cora pubmed blogcatalog

Archive sha256 sums are kept in ``<data-dir>/checksums.json``: recorded on the
first download, verified afterwards.  Point ``GRAPHEMBED_DATA`` at the data
directory to enable the dataset acceptance checks.
"""
import argparse
import json
import logging
from pathlib import Path

from graphembed.datasets import SOURCES, fetch


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("names", nargs="*", help=f"any of {', '.join(SOURCES)} (default: all)")
    parser.add_argument("--data-dir", default="data")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    unknown = set(args.names) - set(SOURCES)
    if unknown:
        parser.error(f"unknown dataset(s): {', '.join(sorted(unknown))}")

    data = Path(args.data_dir)
    data.mkdir(parents=True, exist_ok=True)
    sums_path = data / "checksums.json"
    sums = json.loads(sums_path.read_text()) if sums_path.exists() else {}
    for name in args.names or list(SOURCES):
        out = fetch(name, data, sums)
        print(f"{name}: {out}/edges.txt {out}/labels.txt")
    sums_path.write_text(json.dumps(sums, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
