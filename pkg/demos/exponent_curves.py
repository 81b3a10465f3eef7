"""Exponent curves for a BSC: random-coding (Gallager) versus sequential decoding.

Run: python3 demos/exponent_curves.py [p]
"""
import sys

import numpy as np

from treecodes import channel as chm


def main(p: float = 0.1):
    ch = chm.make_bsc(p)
    r0, cap = chm.cutoff_rate(ch), chm.capacity(ch)
    print(f"BSC({p}): capacity {cap:.4f}, cutoff rate R0 {r0:.4f}, "
          f"critical rate {chm.critical_rate(ch):.4f}")
    print(f"{'R':>6} {'E_G':>8} {'E_J(R0,R)':>10} {'E_J(R,R)':>9} {'Pareto rho':>11}")
    for rate in np.linspace(0.05, 0.95 * cap, 12):
        r = float(rate)
        eg = chm.gallager_exponent(ch, r).value
        ej0 = chm.jelinek_exponent(ch, r0, r).value
        # a bias above R0 has no finite error-bound constant
        ejr = f"{chm.jelinek_exponent(ch, r, r).value:9.4f}" if r < r0 else f"{'-':>9}"
        print(f"{r:6.3f} {eg:8.4f} {ej0:10.4f} {ejr} {chm.pareto_exponent(ch, r):11.3f}")
    print("Below the critical rate the bias-R0 exponent coincides with E_G; "
          "a bias equal to the rate trades exponent for lighter decoding work (rho > 1 below R0).")


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else 0.1)
