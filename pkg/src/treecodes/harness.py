"""Experiment campaigns: exponent curves, anytime error profiles, decoding
complexity tails and closed-loop control.

Every campaign is driven by a :class:`CampaignConfig` read from a plain-text
``key = value`` file and a 64-bit master seed. Each trial draws its randomness
from its own stream (:func:`seed_split`), and results are merged by trial
index, so the CSV output does not depend on the number of workers.
"""
from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import channel as chmod
from .control import (LoopConfig, PlantModel, QuantizerConfig, cart_stick_plant,
                      run_closed_loop)
from .seqdec import COMPLETED, DecoderLimits, MetricConfig, fano_decode, first_error_delay, stack_decode
from .treecode import LtiCode, encode_prefix, sample_lti, subblock_expand

KINDS = ("exponents", "anytime", "complexity", "control")

# Average LQR costs published for the cart-stick experiment, by quantizer bits.
REFERENCE_LQR = {4: 206.0, 5: 86.4, 10: 873.0}


# ---------------------------------------------------------------------------
# seeds

def seed_split(master: int, label: str) -> int:
    """Derive a 64-bit stream seed from a master seed and a text label."""
    if not 0 <= int(master) < 2**64:
        raise ValueError("master seed must be an unsigned 64-bit integer")
    digest = hashlib.sha256(label.encode()).digest()
    key = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    words = np.random.SeedSequence(int(master), spawn_key=key).generate_state(2, np.uint32)
    return int(words[0]) | (int(words[1]) << 32)


def stream(master: int, label: str) -> np.random.Generator:
    return np.random.default_rng(seed_split(master, label))


# ---------------------------------------------------------------------------
# configuration

def parse_keyvalue(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected `key = value`")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_matrix(value: str) -> np.ndarray:
    """Row-major matrix: rows separated by ``;``, entries by commas or spaces."""
    rows = [r for r in (row.replace(",", " ").split() for row in value.split(";")) if r]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError(f"malformed matrix {value!r}")
    return np.array([[float(x) for x in r] for r in rows])


def format_matrix(a: np.ndarray) -> str:
    a = np.atleast_2d(a)
    return "; ".join(" ".join(repr(float(x)) for x in row) for row in a)


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_list(value: str, conv) -> tuple:
    return tuple(conv(x) for x in value.replace(",", " ").split())


def _parse_float(value: str) -> float:
    return math.inf if value.strip().lower() in ("inf", "infinity") else float(value)


@dataclass(frozen=True)
class CampaignConfig:
    """All campaign parameters. Unused fields are ignored by a given kind.

    ``bias`` is ``"R0"`` (the cutoff rate), ``"R"`` (the code rate) or a number.
    Anytime and complexity trials use code ``i % codes`` for trial ``i``.
    """

    kind: str
    p: float = 0.01
    channel: str = "bsc"
    n: int = 0  # 0 selects 20 for control campaigns and 4 otherwise
    k: int = 1
    horizon: int = 20
    affine: bool = False
    bias: str = "R0"
    delta: float = 0.0
    algorithm: str = "stack"
    max_nodes: int = 1_000_000
    max_stack: int = 10_000_000
    backtrack_window: float = math.inf
    trials: int = 1000
    codes: int = 1
    d0: int = 3
    d_max: int = 10
    node_depth: int = 0  # complexity campaign; 0 means horizon // 2
    min_tail_count: int = 10
    rate_step: float = 0.005
    # control campaign
    T: int = 500
    ks: tuple = (4, 5, 10)
    deltas: tuple = (0.4, 0.2, 0.1)
    subblock: tuple = (False, False, True)
    trials_per_code: int = 10
    window: int = 30
    loop_max_nodes: int = 20_000
    noise: bool = True
    peak_threshold: float = 15.0
    trace_trials: int = 1
    A: np.ndarray | None = None
    B: np.ndarray | None = None
    C: np.ndarray | None = None
    K: np.ndarray | None = None
    noise_sigma: float = 0.1
    noise_trunc: float = 0.025

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.n == 0:
            object.__setattr__(self, "n", 20 if self.kind == "control" else 4)
        if self.trials < 1 or self.codes < 1 or self.trials_per_code < 1:
            raise ValueError("trial and code counts must be at least 1")
        if self.channel not in ("bsc", "bec"):
            raise ValueError("channel must be 'bsc' or 'bec'")
        if self.kind in ("anytime", "complexity"):
            if not 1 <= self.d0 <= self.d_max < self.horizon:
                raise ValueError("delay grid must satisfy 1 <= d0 <= d_max < horizon")
        if self.kind == "control":
            if not len(self.ks) == len(self.deltas) == len(self.subblock):
                raise ValueError("ks, deltas and subblock must have equal length")
        self.bias_value()

    # derived objects
    def channel_model(self) -> chmod.ChannelModel:
        return chmod.make_bsc(self.p) if self.channel == "bsc" else chmod.make_bec(self.p)

    @property
    def rate(self) -> float:
        return self.k / self.n

    def bias_value(self, rate: float | None = None) -> float:
        rate = self.rate if rate is None else rate
        if self.bias == "R0":
            return chmod.cutoff_rate(self.channel_model())
        if self.bias == "R":
            return rate
        return float(self.bias)

    def limits(self) -> DecoderLimits:
        return DecoderLimits(self.max_nodes, self.max_stack, self.backtrack_window)

    def metric(self) -> MetricConfig:
        return MetricConfig(self.bias_value(), self.delta)

    def plant(self) -> PlantModel:
        base = cart_stick_plant()
        parts = {}
        for name in ("A", "B", "C", "K"):
            value = getattr(self, name)
            parts[name] = getattr(base, name) if value is None else value
        return PlantModel(parts["A"], parts["B"], parts["C"], parts["K"],
                          self.noise_sigma, self.noise_trunc)

    @property
    def depth(self) -> int:
        return self.node_depth or self.horizon // 2

    # text form
    @classmethod
    def from_mapping(cls, raw: dict) -> "CampaignConfig":
        kinds = {f.name: f for f in fields(cls)}
        kw = {}
        for key, value in raw.items():
            if key not in kinds:
                raise ValueError(f"unknown config key {key!r}")
            if not isinstance(value, str):
                kw[key] = value
                continue
            if key in ("A", "B", "C", "K"):
                kw[key] = parse_matrix(value)
            elif key in ("kind", "channel", "bias", "algorithm"):
                kw[key] = value
            elif key == "ks":
                kw[key] = _parse_list(value, int)
            elif key == "deltas":
                kw[key] = _parse_list(value, float)
            elif key == "subblock":
                kw[key] = _parse_list(value, _parse_bool)
            elif key in ("affine", "noise"):
                kw[key] = _parse_bool(value)
            elif key in ("p", "delta", "backtrack_window", "rate_step", "peak_threshold",
                         "noise_sigma", "noise_trunc"):
                kw[key] = _parse_float(value)
            else:
                kw[key] = int(value)
        return cls(**kw)

    @classmethod
    def from_text(cls, text: str) -> "CampaignConfig":
        return cls.from_mapping(parse_keyvalue(text))

    @classmethod
    def load(cls, path: str) -> "CampaignConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())

    def items(self) -> list[tuple[str, str]]:
        """Canonical ``(key, value)`` strings, used for the CSV config echo."""
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, np.ndarray):
                text = format_matrix(value)
            elif isinstance(value, tuple):
                text = ",".join(str(int(v)) if isinstance(v, bool) else repr(v) for v in value)
            elif isinstance(value, bool):
                text = str(int(value))
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            out.append((f.name, text))
        return out


# ---------------------------------------------------------------------------
# CSV tables

@dataclass
class CsvTable:
    """A CSV file with ``#`` metadata lines, one header row and string cells."""

    columns: list
    rows: list = field(default_factory=list)
    meta: list = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError("row length does not match the header")
        self.rows.append([_cell(v) for v in values])

    def column(self, name: str, conv=float) -> list:
        j = self.columns.index(name)
        return [conv(r[j]) for r in self.rows]

    def meta_value(self, key: str) -> str | None:
        for k, v in self.meta:
            if k == key:
                return v
        return None

    def dumps(self) -> str:
        buf = io.StringIO()
        for key, value in self.meta:
            buf.write(f"# {key}: {value}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows(self.rows)
        return buf.getvalue()

    def write(self, path: str):
        with open(path, "w", newline="") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "CsvTable":
        meta, body = [], []
        for line in text.splitlines():
            if line.startswith("# "):
                key, _, value = line[2:].partition(": ")
                meta.append((key, value))
            elif line.strip():
                body.append(line)
        reader = list(csv.reader(body))
        if not reader:
            raise ValueError("CSV has no header row")
        return cls(reader[0], reader[1:], meta)

    @classmethod
    def read(cls, path: str) -> "CsvTable":
        with open(path, newline="") as fh:
            return cls.loads(fh.read())


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def _float(s: str) -> float:
    return math.nan if s == "" else float(s)


def _metadata(command: str, cfg: CampaignConfig, seed: int, codes: Sequence[LtiCode] = ()) -> list:
    meta = [("command", command), ("seed", str(seed))]
    meta += [(f"config.{k}", v) for k, v in cfg.items()]
    if codes:
        digest = hashlib.sha256("".join(c.fingerprint() for c in codes).encode()).hexdigest()[:16]
        meta.append(("codes", f"{len(codes)} sha256:{digest}"))
    return meta


# ---------------------------------------------------------------------------
# trial execution

_SHARED: dict = {}


def _init_worker(shared):
    _SHARED.clear()
    _SHARED.update(shared)


def _run_chunk(args):
    fn, seed, label, lo, hi = args
    return [fn(_SHARED, i, stream(seed, f"{label}/trial/{i}")) for i in range(lo, hi)]


def run_trials(fn: Callable, shared: dict, count: int, seed: int, label: str,
               workers: int = 1) -> list:
    """Evaluate ``fn(shared, i, rng_i)`` for ``i < count`` and return results in index order."""
    workers = max(1, int(workers))
    if workers == 1 or count < 2:
        _init_worker(shared)
        return _run_chunk((fn, seed, label, 0, count))
    size = max(1, math.ceil(count / (workers * 8)))
    chunks = [(fn, seed, label, lo, min(lo + size, count)) for lo in range(0, count, size)]
    out: list = []
    with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(shared,)) as pool:
        for part in pool.map(_run_chunk, chunks):
            out.extend(part)
    return out


def sample_codes(cfg: CampaignConfig, seed: int, label: str, n: int, k: int, horizon: int,
                 count: int) -> list[LtiCode]:
    return [sample_lti(n, k, horizon, cfg.affine, stream(seed, f"{label}/code/{j}"))
            for j in range(count)]


# ---------------------------------------------------------------------------
# exponents

def cmd_exponents(cfg: CampaignConfig, seed: int = 0) -> CsvTable:
    """Exponent curves on the rate grid step, 2*step, ... below capacity."""
    ch = cfg.channel_model()
    r0 = chmod.cutoff_rate(ch)
    rcrit = chmod.critical_rate(ch)
    cap = chmod.capacity(ch)
    table = CsvTable(["R", "E_G", "rho_G", "E_J_R0", "E_J_R", "R0", "R_crit"],
                     meta=_metadata("exponents", cfg, seed))
    table.meta.append(("capacity", repr(cap)))
    count = int(math.floor(cap / cfg.rate_step + 1e-9))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for i in range(1, count + 1):
            rate = round(i * cfg.rate_step, 12)
            if rate >= cap:
                break
            eg = chmod.gallager_exponent(ch, rate)
            ej0 = chmod.jelinek_exponent(ch, r0, rate)
            ejr = chmod.jelinek_exponent(ch, rate, rate)
            table.add(rate, eg.value, eg.rho_star, ej0.value, ejr.value, r0, rcrit)
    return table


# ---------------------------------------------------------------------------
# anytime reliability

@dataclass
class AnytimeProfile:
    """First-error-event statistics per delay and the fitted exponent.

    ``beta_hat`` is minus the least-squares slope of log2 P_e(d) against n*d
    over delays d0..d_max that saw at least one event (nan if fewer than two).
    """

    n: int
    trials: int
    delays: list
    counts: list
    d0: int
    d_max: int
    beta_hat: float = math.nan
    mean_work: float = math.nan
    failures: int = 0

    def __post_init__(self):
        if len(self.delays) != len(self.counts):
            raise ValueError("delays and counts must align")
        if any(c < 0 for c in self.counts) or sum(self.counts) > self.trials:
            raise ValueError("event counts inconsistent with the trial count")

    @property
    def pe(self) -> list:
        return [c / self.trials for c in self.counts]

    def intervals(self, level: float = 0.95) -> list:
        return [clopper_pearson(c, self.trials, level) for c in self.counts]

    def fit(self) -> float:
        pts = [(self.n * d, math.log2(c / self.trials))
               for d, c in zip(self.delays, self.counts) if self.d0 <= d <= self.d_max and c > 0]
        if len(pts) < 2:
            return math.nan
        x, y = np.array(pts).T
        return float(-np.polyfit(x, y, 1)[0])

    def to_table(self, meta=()) -> CsvTable:
        table = CsvTable(["d", "trials", "events", "pe", "ci_low", "ci_high", "in_fit"], meta=list(meta))
        table.meta += [("n", str(self.n)), ("d0", str(self.d0)), ("d_max", str(self.d_max)),
                       ("beta_hat", repr(self.beta_hat)), ("mean_work", repr(self.mean_work)),
                       ("failures", str(self.failures))]
        for d, c, (lo, hi) in zip(self.delays, self.counts, self.intervals()):
            table.add(d, self.trials, c, c / self.trials, lo, hi, self.d0 <= d <= self.d_max and c > 0)
        return table

    @classmethod
    def from_table(cls, table: CsvTable) -> "AnytimeProfile":
        trials = table.column("trials", int)
        return cls(n=int(table.meta_value("n")), trials=trials[0] if trials else 0,
                   delays=table.column("d", int), counts=table.column("events", int),
                   d0=int(table.meta_value("d0")), d_max=int(table.meta_value("d_max")),
                   beta_hat=float(table.meta_value("beta_hat")),
                   mean_work=float(table.meta_value("mean_work")),
                   failures=int(table.meta_value("failures")))


def clopper_pearson(events: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    alpha = 1.0 - level
    lo = 0.0 if events == 0 else float(stats.beta.ppf(alpha / 2, events, trials - events + 1))
    hi = 1.0 if events == trials else float(stats.beta.ppf(1 - alpha / 2, events + 1, trials - events))
    return lo, hi


def _decoder(cfg_algorithm: str):
    return stack_decode if cfg_algorithm == "stack" else fano_decode


def _transmit(shared, i, rng):
    """Random message through code ``i % codes``; returns (message, code, received)."""
    codes = shared["codes"]
    code = codes[i % len(codes)]
    t = shared["t"]
    message = [int(b) for b in rng.integers(0, 1 << code.k, size=t)]
    blocks = encode_prefix(code, message)
    shifts = np.arange(code.n)
    bits = (np.array(blocks, dtype=np.int64)[:, None] >> shifts) & 1
    received = chmod.simulate(shared["channel"], bits, rng)
    return message, code, received


def _anytime_trial(shared, i, rng):
    message, code, received = _transmit(shared, i, rng)
    result = _decoder(shared["algorithm"])(code, shared["channel"], received, shared["metric"],
                                           shared["limits"])
    d = first_error_delay(message, result.decoded) if result.status == COMPLETED else None
    return (-1 if d is None else d, result.total_work, result.status != COMPLETED)


def cmd_anytime(cfg: CampaignConfig, seed: int = 0, workers: int = 1) -> tuple[CsvTable, AnytimeProfile]:
    """Estimate P_e(d) at the final time t = horizon over ``trials`` transmissions."""
    ch = cfg.channel_model()
    if cfg.rate >= chmod.cutoff_rate(ch):
        warnings.warn("rate at or above the cutoff rate: sequential decoding bounds do not apply",
                      RuntimeWarning, stacklevel=2)
    t = cfg.horizon
    codes = sample_codes(cfg, seed, "anytime", cfg.n, cfg.k, t, cfg.codes)
    shared = {"codes": codes, "channel": ch, "metric": cfg.metric(), "limits": cfg.limits(),
              "algorithm": cfg.algorithm, "t": t}
    results = run_trials(_anytime_trial, shared, cfg.trials, seed, "anytime", workers)
    counts = [0] * t
    failures = 0
    for d, _, failed in results:
        failures += failed
        if d >= 0:
            counts[d] += 1
    profile = AnytimeProfile(cfg.n, cfg.trials, list(range(t)), counts, cfg.d0, cfg.d_max,
                             mean_work=float(np.mean([w for _, w, _ in results])), failures=failures)
    profile.beta_hat = profile.fit()
    table = profile.to_table(_metadata("anytime", cfg, seed, codes))
    return table, profile


# ---------------------------------------------------------------------------
# decoding complexity

def subtree_work(expanded, truth: Sequence[int], depth: int) -> int:
    """Expansions charged to the correct node at ``depth``.

    Counts the correct node at depth ``depth - 1`` (if it was expanded) and
    every expanded node that descends from it through a wrong block at
    ``depth``, i.e. the incorrect subtree hanging off the correct path there.
    """
    if not 1 <= depth <= len(truth):
        raise ValueError("depth outside the message")
    prefix = list(truth[:depth - 1])
    total = 0
    for node in expanded:
        if node.depth < depth - 1:
            continue
        path = node.blocks()
        if path[:depth - 1] != prefix:
            continue
        if node.depth == depth - 1 or path[depth - 1] != truth[depth - 1]:
            total += 1
    return total


def _complexity_trial(shared, i, rng):
    message, code, received = _transmit(shared, i, rng)
    result = _decoder(shared["algorithm"])(code, shared["channel"], received, shared["metric"],
                                           shared["limits"], record=True)
    return (subtree_work(result.expanded, message, shared["depth"]), result.total_work,
            result.status != COMPLETED)


def tail_fit(values: np.ndarray, grid: np.ndarray, min_count: int) -> tuple[float, np.ndarray]:
    """Empirical CCDF on ``grid`` and the slope of its upper decade on log-log axes.

    The upper decade ends at the largest grid point with at least
    ``min_count`` exceedances and spans a factor of ten below it. Returns
    (rho_hat, mask of grid points used); rho_hat is nan if fewer than two
    points qualify.
    """
    values = np.asarray(values)
    exceed = np.array([(values >= m).sum() for m in grid])
    ok = np.nonzero(exceed >= min_count)[0]
    mask = np.zeros(len(grid), dtype=bool)
    if len(ok) == 0:
        return math.nan, mask
    top = grid[ok[-1]]
    mask = (exceed >= min_count) & (grid >= top / 10.0) & (grid <= top)
    if mask.sum() < 2:
        return math.nan, mask
    slope = np.polyfit(np.log(grid[mask]), np.log(exceed[mask] / len(values)), 1)[0]
    return float(-slope), mask


def cmd_complexity(cfg: CampaignConfig, seed: int = 0, workers: int = 1) -> tuple[CsvTable, dict]:
    """Tail of the work W charged to the correct node at ``cfg.depth``."""
    ch = cfg.channel_model()
    if cfg.rate >= chmod.cutoff_rate(ch):
        warnings.warn("rate at or above the cutoff rate: expected work is unbounded",
                      RuntimeWarning, stacklevel=2)
    t = cfg.horizon
    codes = sample_codes(cfg, seed, "complexity", cfg.n, cfg.k, t, cfg.codes)
    shared = {"codes": codes, "channel": ch, "metric": cfg.metric(), "limits": cfg.limits(),
              "algorithm": cfg.algorithm, "t": t, "depth": cfg.depth}
    results = run_trials(_complexity_trial, shared, cfg.trials, seed, "complexity", workers)
    w = np.array([r[0] for r in results])
    grid = 2.0 ** np.arange(13)
    rho_hat, mask = tail_fit(w, grid, cfg.min_tail_count)
    rho_theory = chmod.pareto_exponent(ch, cfg.rate)
    summary = {"mean_w": float(w.mean()), "rho_hat": rho_hat, "rho_theory": rho_theory,
               "failures": int(sum(r[2] for r in results)),
               "mean_total_work": float(np.mean([r[1] for r in results]))}
    table = CsvTable(["m", "exceed", "ccdf", "in_fit"], meta=_metadata("complexity", cfg, seed, codes))
    table.meta += [(k, repr(v) if isinstance(v, float) else str(v)) for k, v in summary.items()]
    for m, used in zip(grid, mask):
        count = int((w >= m).sum())
        table.add(int(m), count, count / len(w), bool(used))
    return table, summary


# ---------------------------------------------------------------------------
# closed-loop control

def _control_trial(shared, i, rng):
    j, trial = divmod(i, shared["per_code"])
    code = shared["codes"][j]
    trace = run_closed_loop(shared["plant"], shared["qc"], code, shared["channel"], shared["loop"],
                            shared["T"], rng, noise=shared["noise"],
                            perfect_link=shared.get("perfect", False))
    norms = trace.state_norms()
    keep = norms if trial < shared["trace_trials"] else None
    failures = sum(s != COMPLETED for s in trace.status)
    return (j, trial, trace.peak_norm(), trace.cost(), trace.diverged, trace.steps,
            int(trace.saturated.sum()), failures, float(trace.work.mean()) if trace.steps else 0.0,
            keep)


@dataclass
class ControlSummary:
    k: int
    delta: float
    rate: float
    peaks: np.ndarray
    costs: np.ndarray

    @property
    def mean_cost(self) -> float:
        return float(np.mean(self.costs))

    @property
    def median_peak(self) -> float:
        return float(np.median(self.peaks))

    def bounded_fraction(self, threshold: float) -> float:
        return float(np.mean(self.peaks <= threshold))

    @property
    def finite_fraction(self) -> float:
        return float(np.mean(np.isfinite(self.costs)))


def run_control_setting(cfg: CampaignConfig, k: int, delta: float, subblock: bool, seed: int,
                        codes: int, per_code: int, workers: int = 1, perfect_link: bool = False):
    """Run ``codes x per_code`` closed loops for one quantizer; returns (rows, summary)."""
    ch = cfg.channel_model()
    if subblock:
        n_code, k_code, group = subblock_expand(cfg.n, k)
    else:
        n_code, k_code, group = cfg.n, k, 1
    label = f"control/k{k}"
    code_list = sample_codes(cfg, seed, label, n_code, k_code, cfg.T * group, codes)
    loop = LoopConfig(cfg.bias_value(k / cfg.n), cfg.delta, cfg.algorithm, cfg.window,
                      cfg.loop_max_nodes, cfg.max_stack)
    shared = {"codes": code_list, "per_code": per_code, "plant": cfg.plant(),
              "qc": QuantizerConfig(k, delta), "channel": ch, "loop": loop, "T": cfg.T,
              "noise": cfg.noise, "trace_trials": cfg.trace_trials, "perfect": perfect_link}
    rows = run_trials(_control_trial, shared, codes * per_code, seed, label, workers)
    summary = ControlSummary(k, delta, k / cfg.n, np.array([r[2] for r in rows]),
                             np.array([r[3] for r in rows]))
    return rows, summary, code_list


def cmd_control(cfg: CampaignConfig, seed: int = 0, workers: int = 1):
    """Closed-loop campaign over the quantizer settings; returns (summary, trace, per-k table)."""
    meta = _metadata("control", cfg, seed)
    trials = CsvTable(["k", "delta", "rate", "code", "trial", "peak_norm", "lqr_cost", "diverged",
                       "steps", "saturated", "decoder_failures", "mean_work"], meta=list(meta))
    trace = CsvTable(["k", "code", "trial", "t", "state_norm"], meta=list(meta))
    table = CsvTable(["k", "delta", "rate", "runs", "mean_lqr", "median_lqr", "finite_fraction",
                      "bounded_fraction", "median_peak", "reference_lqr"], meta=list(meta))
    all_codes = []
    for k, delta, sub in zip(cfg.ks, cfg.deltas, cfg.subblock):
        rows, summary, codes = run_control_setting(cfg, k, delta, sub, seed, cfg.codes,
                                                   cfg.trials_per_code, workers)
        all_codes += codes
        for j, trial, peak, cost, diverged, steps, sat, fails, work, norms in rows:
            trials.add(k, delta, k / cfg.n, j, trial, peak, cost, diverged, steps, sat, fails, work)
            if norms is not None:
                for t, v in enumerate(norms, 1):
                    trace.add(k, j, trial, t, float(v))
        table.add(k, delta, k / cfg.n, len(rows), summary.mean_cost, float(np.median(summary.costs)),
                  summary.finite_fraction, summary.bounded_fraction(cfg.peak_threshold),
                  summary.median_peak, REFERENCE_LQR.get(k))
    digest = hashlib.sha256("".join(c.fingerprint() for c in all_codes).encode()).hexdigest()[:16]
    for t_ in (trials, trace, table):
        t_.meta.append(("codes", f"{len(all_codes)} sha256:{digest}"))
    return trials, trace, table


# ---------------------------------------------------------------------------
# output helpers

def write_outputs(out: str, tables: dict[str, CsvTable]) -> list[str]:
    """Write the main table to ``out`` and the others next to it as ``<stem>.<name>.csv``."""
    stem, ext = os.path.splitext(out)
    ext = ext or ".csv"
    paths = []
    for name, table in tables.items():
        path = out if name == "main" else f"{stem}.{name}{ext}"
        table.write(path)
        paths.append(path)
    return paths
