#!/usr/bin/env python3
"""Random-system soundness sweep: measured block correlations vs every bound.

Usage: python scripts/sweep_bounds.py [count] [threads]
"""
import sys

from rhomix.acceptance import _run_indexed, _sweep_one

count = int(sys.argv[1]) if len(sys.argv) > 1 else 200
threads = int(sys.argv[2]) if len(sys.argv) > 2 else None

rows = _run_indexed(_sweep_one, count, threads)
print(f"{count} random systems")
print(f"  worst nm slack     {min(r['nm_slack'] for r in rows):+.3e}")
print(f"  worst simple slack {min(r['simple_slack'] for r in rows):+.3e}")
print(f"  worst zz slack     {min(r['zz_slack'] for r in rows):+.3e}")
print(f"  worst event chain  {max(r['event_violation'] for r in rows):+.3e}  (<= 0 is sound)")
