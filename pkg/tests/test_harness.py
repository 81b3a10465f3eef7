import math

import numpy as np
import pytest

from treecodes import channel as chm
from treecodes import harness as hn
from treecodes.cli import main
from treecodes.seqdec import stack_decode, MetricConfig
from treecodes.treecode import sample_lti

from oracles import transmit


def test_seed_split():
    assert hn.seed_split(7, "a") == hn.seed_split(7, "a")
    assert hn.seed_split(7, "a") != hn.seed_split(7, "b")
    assert hn.seed_split(7, "a") != hn.seed_split(8, "a")
    assert 0 <= hn.seed_split(2**64 - 1, "x") < 2**64
    with pytest.raises(ValueError):
        hn.seed_split(-1, "a")
    a = hn.stream(3, "s").integers(0, 2**63, 4)
    b = hn.stream(3, "s").integers(0, 2**63, 4)
    np.testing.assert_array_equal(a, b)


def test_parse_keyvalue_and_matrix():
    raw = hn.parse_keyvalue("# comment\nkind = control\nA = 1 2; 3 4  # trailing\n\nks = 4, 5\n")
    assert raw == {"kind": "control", "A": "1 2; 3 4", "ks": "4, 5"}
    np.testing.assert_array_equal(hn.parse_matrix("1, 2; 3 4"), [[1, 2], [3, 4]])
    with pytest.raises(ValueError):
        hn.parse_matrix("1 2; 3")
    with pytest.raises(ValueError):
        hn.parse_keyvalue("novalue")
    with pytest.raises(ValueError):
        hn.parse_keyvalue("a = 1\na = 2")


def test_config_from_text():
    cfg = hn.CampaignConfig.from_text(
        "kind = control\np = 0.01\nks = 4,10\ndeltas = 0.4 0.1\nsubblock = no, yes\n"
        "K = 1 2 3\nbacktrack_window = inf\nnoise = off\n")
    assert cfg.ks == (4, 10) and cfg.deltas == (0.4, 0.1) and cfg.subblock == (False, True)
    assert cfg.K.shape == (1, 3) and cfg.backtrack_window == math.inf and cfg.noise is False
    np.testing.assert_array_equal(cfg.plant().K, [1, 2, 3])
    with pytest.raises(ValueError):
        hn.CampaignConfig.from_text("kind = control\nbogus = 1\n")
    with pytest.raises(ValueError):
        hn.CampaignConfig.from_text("kind = nothing\n")
    with pytest.raises(ValueError):
        hn.CampaignConfig.from_text("kind = control\nks = 4, 5\n")
    with pytest.raises(ValueError):
        hn.CampaignConfig.from_text("kind = anytime\nhorizon = 8\nd_max = 8\n")


def test_config_items_round_trip():
    cfg = hn.CampaignConfig.from_text("kind = control\nA = 3.3 1 0; -3.2 0 1; 0.98 0 0\nbias = 0.5\n")
    again = hn.CampaignConfig.from_mapping(dict(cfg.items()))
    assert again.items() == cfg.items()


def test_bias_resolution():
    ch = chm.make_bsc(0.05)
    assert hn.CampaignConfig("anytime", p=0.05).bias_value() == pytest.approx(chm.cutoff_rate(ch))
    assert hn.CampaignConfig("anytime", p=0.05, bias="R").bias_value() == pytest.approx(0.25)
    assert hn.CampaignConfig("anytime", bias="0.3").bias_value() == 0.3
    with pytest.raises(ValueError):
        hn.CampaignConfig("anytime", bias="high")


def test_csv_table_round_trip():
    table = hn.CsvTable(["a", "b"], meta=[("seed", "3"), ("note", "x: y")])
    table.add(1, 0.1)
    table.add(True, math.inf)
    back = hn.CsvTable.loads(table.dumps())
    assert back.columns == ["a", "b"] and back.rows == [["1", "0.1"], ["1", "inf"]]
    assert back.meta_value("note") == "x: y"
    with pytest.raises(ValueError):
        table.add(1)


def test_clopper_pearson():
    lo, hi = hn.clopper_pearson(0, 100)
    assert lo == 0.0 and hi == pytest.approx(1 - 0.025 ** (1 / 100), rel=1e-9)
    lo, hi = hn.clopper_pearson(100, 100)
    assert hi == 1.0 and lo == pytest.approx(0.025 ** (1 / 100), rel=1e-9)
    lo, hi = hn.clopper_pearson(10, 100)
    assert lo < 0.1 < hi


def test_exponents_table():
    cfg = hn.CampaignConfig("exponents", p=0.01)
    table = hn.cmd_exponents(cfg)
    rates = table.column("R")
    assert rates[0] == pytest.approx(0.005) and rates[-1] < chm.capacity(chm.make_bsc(0.01))
    row = rates.index(0.5)
    assert table.column("E_J_R0")[row] == pytest.approx(0.2382, abs=1e-3)
    cfg = hn.CampaignConfig("exponents", p=0.1)
    table = hn.cmd_exponents(cfg)
    eg = table.column("E_G")
    assert eg[-1] < 0.01 and all(a >= b - 1e-12 for a, b in zip(eg, eg[1:]))


def test_anytime_profile_round_trip():
    prof = hn.AnytimeProfile(4, 1000, [0, 1, 2, 3, 4], [50, 20, 8, 3, 1], 1, 4, mean_work=2.5)
    prof.beta_hat = prof.fit()
    # exact geometric decay gives back its slope
    geo = hn.AnytimeProfile(4, 10**7, list(range(6)), [int(10**6 * 2.0 ** (-0.5 * 4 * d)) for d in range(6)], 0, 5)
    assert geo.fit() == pytest.approx(0.5, abs=1e-3)
    back = hn.AnytimeProfile.from_table(hn.CsvTable.loads(prof.to_table().dumps()))
    assert back == prof
    with pytest.raises(ValueError):
        hn.AnytimeProfile(4, 10, [0, 1], [8, 8], 0, 1)


def test_anytime_noiseless_is_empty():
    cfg = hn.CampaignConfig("anytime", p=0.0, horizon=12, trials=50)
    table, prof = hn.cmd_anytime(cfg, seed=1)
    assert sum(prof.counts) == 0 and math.isnan(prof.beta_hat)
    assert hn.CsvTable.loads(table.dumps()).column("events", int) == [0] * 12


def test_anytime_matches_direct_loop():
    cfg = hn.CampaignConfig("anytime", p=0.1, horizon=10, trials=40, codes=3, d0=2, d_max=6)
    _, prof = hn.cmd_anytime(cfg, seed=5)
    ch = chm.make_bsc(0.1)
    codes = [sample_lti(4, 1, 10, rng=hn.stream(5, f"anytime/code/{j}")) for j in range(3)]
    counts = [0] * 10
    for i in range(40):
        rng = hn.stream(5, f"anytime/trial/{i}")
        msg = [int(b) for b in rng.integers(0, 2, 10)]
        z = transmit(codes[i % 3], ch, msg, rng)
        dec = stack_decode(codes[i % 3], ch, z, MetricConfig(chm.cutoff_rate(ch))).decoded
        d = next((10 - j for j, (a, b) in enumerate(zip(msg, dec), 1) if a != b), None)
        if d is not None:
            counts[d] += 1
    assert prof.counts == counts


def test_subtree_work():
    class Node:
        def __init__(self, path):
            self.path = path
            self.depth = len(path)

        def blocks(self):
            return list(self.path)

    truth = [0, 1, 1]
    expanded = [Node(()), Node((0,)), Node((1,)), Node((0, 0)), Node((0, 1)), Node((0, 0, 1)), Node((0, 1, 1))]
    # at depth 2: correct node (0,) plus wrong branches (0,0) and (0,0,1)
    assert hn.subtree_work(expanded, truth, 2) == 3
    assert hn.subtree_work(expanded, truth, 1) == 2  # the root and the wrong child (1,)
    with pytest.raises(ValueError):
        hn.subtree_work(expanded, truth, 0)


def test_complexity_noiseless():
    cfg = hn.CampaignConfig("complexity", p=0.0, horizon=12, trials=30, bias="R")
    table, summary = hn.cmd_complexity(cfg, seed=2)
    ccdf = dict(zip(table.column("m", int), table.column("ccdf")))
    assert ccdf[1] == 1.0 and ccdf[2] == 0.0 and summary["mean_w"] == 1.0


def test_tail_fit_on_pareto_sample():
    rng = np.random.default_rng(0)
    w = np.floor(rng.pareto(2.0, 200_000) + 1)
    rho, mask = hn.tail_fit(w, 2.0 ** np.arange(13), 10)
    assert rho == pytest.approx(2.0, abs=0.15) and mask.sum() >= 2


def test_determinism_and_workers():
    cfg = hn.CampaignConfig("anytime", p=0.1, horizon=10, trials=60, codes=4, d0=2, d_max=6)
    a, _ = hn.cmd_anytime(cfg, seed=9, workers=1)
    b, _ = hn.cmd_anytime(cfg, seed=9, workers=2)
    assert a.dumps() == b.dumps()
    c, _ = hn.cmd_anytime(cfg, seed=10, workers=1)
    assert c.dumps() != a.dumps()


def test_control_campaign_small():
    cfg = hn.CampaignConfig.from_text(
        "kind = control\nT = 30\nks = 4, 10\ndeltas = 0.4, 0.1\nsubblock = 0, 1\n"
        "codes = 2\ntrials_per_code = 2\ntrace_trials = 1\n")
    trials, trace, table = hn.cmd_control(cfg, seed=4)
    assert len(trials.rows) == 8 and len(table.rows) == 2
    assert len(trace.rows) == 2 * 2 * 30
    assert table.column("reference_lqr") == [206.0, 873.0]
    assert all(math.isfinite(c) for c in trials.column("lqr_cost"))
    again = hn.cmd_control(cfg, seed=4)
    assert [t.dumps() for t in again] == [trials.dumps(), trace.dumps(), table.dumps()]


def test_control_zero_noise_fine_quantizer():
    cfg = hn.CampaignConfig.from_text(
        "kind = control\np = 0\nnoise = 0\nn = 32\nT = 100\nks = 16\ndeltas = 0.001\nsubblock = 1\n"
        "codes = 1\ntrials_per_code = 1\n")
    _, _, table = hn.cmd_control(cfg, seed=0)
    assert table.column("mean_lqr")[0] < 1e-2


def test_cli_round_trip(tmp_path, capsys):
    cfg = tmp_path / "any.cfg"
    cfg.write_text("kind = anytime\np = 0.1\nhorizon = 8\ntrials = 30\nd0 = 2\nd_max = 6\n")
    out = tmp_path / "any.csv"
    assert main(["anytime", "--config", str(cfg), "--seed", "3", "--out", str(out)]) == 0
    first = out.read_text()
    main(["anytime", "--config", str(cfg), "--seed", "3", "--out", str(out), "--workers", "2"])
    assert out.read_text() == first
    table = hn.CsvTable.read(str(out))
    assert table.meta_value("seed") == "3" and table.meta_value("config.p") == "0.1"
    assert table.meta_value("codes").startswith("1 sha256:")
    assert "beta_hat" in capsys.readouterr().out

    out = tmp_path / "exp.csv"
    main(["exponents", "--out", str(out)])
    assert hn.CsvTable.read(str(out)).columns[0] == "R"

    bad = tmp_path / "bad.cfg"
    bad.write_text("kind = control\n")
    with pytest.raises(SystemExit):
        main(["anytime", "--config", str(bad), "--out", str(out)])


def test_cli_control_outputs(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("kind = control\nT = 20\nks = 4\ndeltas = 0.4\nsubblock = 0\ncodes = 1\n"
                   "trials_per_code = 2\n")
    out = tmp_path / "c.csv"
    main(["control", "--config", str(cfg), "--out", str(out)])
    assert (tmp_path / "c.trials.csv").exists() and (tmp_path / "c.trace.csv").exists()
    assert len(hn.CsvTable.read(str(tmp_path / "c.trials.csv")).rows) == 2
