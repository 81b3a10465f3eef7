"""Anytime behaviour of a random LTI tree code under stack decoding.

Estimates P_e(d), the chance that the oldest wrong block sits d steps back,
and compares the fitted decay with the sequential-decoding exponent.

Run: python3 demos/anytime_profile.py
"""
from treecodes import channel as chm
from treecodes import harness as hn


def main(trials: int = 5000):
    cfg = hn.CampaignConfig("anytime", p=0.05, n=4, k=1, horizon=14, trials=trials, codes=20,
                            d0=3, d_max=9)
    _, prof = hn.cmd_anytime(cfg, seed=1)
    ch = cfg.channel_model()
    exponent = chm.jelinek_exponent(ch, chm.cutoff_rate(ch), cfg.rate).value
    print(f"rate {cfg.rate}, BSC({cfg.p}), {trials} trials over {cfg.codes} codes")
    print(f"{'d':>3} {'events':>7} {'P_e(d)':>10} {'95% interval':>24}")
    for d, c, pe, (lo, hi) in zip(prof.delays, prof.counts, prof.pe, prof.intervals()):
        print(f"{d:3d} {c:7d} {pe:10.2e}   [{lo:9.2e}, {hi:9.2e}]")
    print(f"fitted beta {prof.beta_hat:.3f} bits/channel use; ensemble exponent {exponent:.3f}")
    print(f"mean decoder work {prof.mean_work:.2f} node expansions per {cfg.horizon}-block decode")


if __name__ == "__main__":
    main()
