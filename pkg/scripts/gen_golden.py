#!/usr/bin/env python3
"""Regenerate tests/golden/ (protocol transcripts, update messages and the
cross-language decoder vectors).  Run from the repository root after any
deliberate wire-format change, and commit the results."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from goldens import GOLDEN_DIR, write_golden_files

if __name__ == "__main__":
    for name in write_golden_files():
        print(f"wrote {GOLDEN_DIR / name}")
