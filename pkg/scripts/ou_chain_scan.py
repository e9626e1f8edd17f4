#!/usr/bin/env python3
"""Scan the damped-chain block correlation {eta : eta'} over the horizon t.

Usage: python scripts/ou_chain_scan.py [K]
"""
import sys

from rhomix import gaussian

K = int(sys.argv[1]) if len(sys.argv) > 1 else 16
print(f"K = {K}, defaults m = omega = c = T = lam = 1")
print(f"{'t':>8}  {'maxcorr':>12}  {'1-maxcorr':>12}  {'r':>10}  {'R':>12}")
for t in (0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0):
    rep = gaussian.ou_chain_joint(gaussian.OUChainParams(K=K, t=t))
    r, R = rep.qbar_range
    print(f"{t:8.2f}  {rep.maxcorr:12.8f}  {1 - rep.maxcorr:12.3e}  {r:10.4f}  {R:12.4f}")
