#!/usr/bin/env python3
from __future__ import annotations

"""
CLI: synthetic scenes, oracle heatmaps, pose estimation and evaluation.

Usage:
  python scripts/pose_cli.py gen --seed 7 --out runs/seed7
  python scripts/pose_cli.py solve --data runs/seed7 --trace runs/seed7/trace.csv
  python scripts/pose_cli.py eval --estimate runs/seed7/estimate.json \
    --scene runs/seed7/scene.json --out runs/seed7/report.json
"""

import sys
from pathlib import Path

try:
    from src.curvpose.cli import main
except Exception:  # pragma: no cover - fallback for direct script runs
    # Ensure project root is on sys.path so `src` is importable
    ROOT = Path(__file__).resolve().parents[1]
    if str(ROOT) not in sys.path:
        sys.path.insert(0, str(ROOT))
    from src.curvpose.cli import main


if __name__ == "__main__":
    raise SystemExit(main())
