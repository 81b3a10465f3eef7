"""Stabilizing the cart-stick plant over a noisy binary channel.

The sensor quantizes the measured position, tree-encodes the bits and sends
20 channel uses per step over a BSC(0.01). The controller re-decodes the whole
recent history each step, rebuilds the state and applies state feedback.

Run: python3 demos/control_loop.py
"""
import numpy as np

from treecodes import channel as chm
from treecodes import control as ct
from treecodes.treecode import sample_lti, subblock_expand


def run(k, delta, subblock, T=200, seed=3):
    plant = ct.cart_stick_plant()
    ch = chm.make_bsc(0.01)
    n, kc, group = subblock_expand(20, k) if subblock else (20, k, 1)
    rng = np.random.default_rng(seed)
    code = sample_lti(n, kc, T * group, rng=rng)
    cfg = ct.LoopConfig(chm.cutoff_rate(ch))
    return ct.run_closed_loop(plant, ct.QuantizerConfig(k, delta), code, ch, cfg, T, rng)


def main():
    plant = ct.cart_stick_plant()
    print(f"open-loop growth {plant.open_loop_radius():.3f}, "
          f"closed-loop radius {plant.closed_loop_radius():.3f}")
    for k, delta, sub in [(4, 0.4, False), (5, 0.2, False), (10, 0.1, True)]:
        tr = run(k, delta, sub)
        norms = tr.state_norms()
        tail = "diverged" if tr.diverged else f"last {norms[-1]:.3f}"
        print(f"k={k:2d} (R={k / 20:.2f}): peak |x| {tr.peak_norm():.3g}, LQR cost {tr.cost():.4g}, "
              f"{tail}, mean work {tr.work.mean():.2f}")


if __name__ == "__main__":
    main()
