#!/usr/bin/env python3
"""Materialize the built-in default configs as editable JSON files.

    python scripts/write_configs.py --out configs/

Edit a file and feed it back with `splinelab <name> --config configs/<name>.json`.
"""

import argparse
import json
from pathlib import Path

from splinelab.experiments import EXPERIMENT_NAMES, default_config


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="configs", help="target directory")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in EXPERIMENT_NAMES:
        path = out / f"{name}.json"
        path.write_text(json.dumps(default_config(name), indent=2, sort_keys=True) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
