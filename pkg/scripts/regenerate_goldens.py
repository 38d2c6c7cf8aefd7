#!/usr/bin/env python3
"""
Rebuild the golden density tables.

Every catalog family gets one CSV table and one JSON sidecar under
goldens/, and goldens/digests.json records the pinned configuration hash
and the table digest of each. Each table is built twice; if the two
builds differ the script stops without writing digests.

Usage:
    python scripts/regenerate_goldens.py

    Optional flags:
        --dir PATH        Golden directory (default: goldens/ next to scripts/)
        --family NAME     Rebuild only this family (repeatable)
        --check           Compare against committed goldens instead of writing

See goldens/README.md for the layout.
"""

import argparse
import logging
import sys
from pathlib import Path

from wcp_prior.errors import WcpError
from wcp_prior.goldens import check_goldens, regenerate_goldens

DEFAULT_DIR = Path(__file__).resolve().parent.parent / "goldens"


def parse_args():
    parser = argparse.ArgumentParser(description="Regenerate golden density tables for the prior catalog.")
    parser.add_argument("--dir", default=str(DEFAULT_DIR), help=f"Golden directory (default: {DEFAULT_DIR})")
    parser.add_argument("--family", action="append", help="Rebuild only this family (repeatable)")
    parser.add_argument("--check", action="store_true", help="Report differences instead of writing")
    return parser.parse_args()


def main():
    args = parse_args()
    logging.basicConfig(level=logging.INFO, stream=sys.stderr)

    try:
        # --- Check mode: compare committed goldens with fresh builds ---
        if args.check:
            problems = check_goldens(args.dir)
            for problem in problems:
                print(f"  - {problem}")
            if problems:
                print(f"{len(problems)} golden problem(s) found.")
                sys.exit(1)
            print("Goldens match.")
            return

        records = regenerate_goldens(args.dir, args.family)
    except WcpError as exc:
        print(f"Error: {exc}")
        sys.exit(1)

    print()
    print(f"Goldens written to: {args.dir}")
    for name, record in records.items():
        print(f"  {name:<20} {record.table_digest[:16]}")


if __name__ == "__main__":
    main()
