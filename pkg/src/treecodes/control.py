"""Networked control of a linear plant over a coded binary channel.

The observer quantizes each scalar measurement, encodes it with a tree code
and sends the code block over the channel. The controller re-decodes the
recent past every step, rebuilds the state from the last ``m`` decoded
measurements (a deadbeat observer) and applies state feedback.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channel as chmod
from .seqdec import (BUDGET_EXHAUSTED, COMPLETED, DecoderLimits, MetricConfig,
                     fano_decode, stack_decode)
from .treecode import EncoderState, LtiCode, encode_step, join_blocks, split_block


@dataclass(frozen=True, eq=False)
class PlantModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    K: np.ndarray
    noise_sigma: float = 0.1
    noise_trunc: float = 0.025

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        m = A.shape[0]
        B = np.asarray(self.B, dtype=float).reshape(m)
        C = np.asarray(self.C, dtype=float).reshape(m)
        K = np.asarray(self.K, dtype=float).reshape(m)
        if A.shape != (m, m):
            raise ValueError("A must be square")
        if C[0] != 1.0 or np.any(C[1:] != 0.0):
            raise ValueError("C must be [1, 0, ..., 0] (observer canonical form)")
        if self.noise_trunc <= 0 or self.noise_sigma < 0:
            raise ValueError("noise parameters must be positive")
        for name, arr in (("A", A), ("B", B), ("C", C), ("K", K)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def closed_loop_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A + np.outer(self.B, self.K)))))

    def open_loop_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))


def cart_stick_plant() -> PlantModel:
    """The cart-stick balancer in observer canonical form.

    The published gain [-55.6920, -32.3333, -19.0476] stabilizes the loop
    only under the convention u = -K x (A + BK has spectral radius 2.94,
    A - BK has 0.978). It is stored negated so that u = K x holds here.
    """
    A = [[3.3010, 1.0, 0.0],
         [-3.2750, 0.0, 1.0],
         [0.9801, 0.0, 0.0]]
    B = [-0.0300, -0.0072, 0.0376]
    C = [1.0, 0.0, 0.0]
    K = [55.6920, 32.3333, 19.0476]
    return PlantModel(np.array(A), np.array(B), np.array(C), np.array(K))


@dataclass(frozen=True)
class QuantizerConfig:
    """Saturating uniform quantizer with 2^k bins of width ``delta`` centred on 0."""

    k: int
    delta: float

    def __post_init__(self):
        if self.k < 1 or self.delta <= 0:
            raise ValueError("need k >= 1 and delta > 0")

    @property
    def limit(self) -> float:
        return self.delta * (1 << (self.k - 1))


def quantize(qc: QuantizerConfig, y: float) -> int:
    half = 1 << (qc.k - 1)
    idx = math.floor(y / qc.delta) + half
    return min(max(idx, 0), 2 * half - 1)


def dequantize(qc: QuantizerConfig, bits: int) -> float:
    return (bits - (1 << (qc.k - 1)) + 0.5) * qc.delta


def sample_truncated_gaussian(sigma: float, bound: float, rng: np.random.Generator,
                              size=None):
    """N(0, sigma^2) conditioned on [-bound, bound], by rejection."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    shape = () if size is None else size
    count = int(np.prod(shape))
    if sigma == 0:
        out = np.zeros(count)
    else:
        out = np.empty(count)
        filled = 0
        while filled < count:
            draw = rng.normal(0.0, sigma, size=max(8, 6 * (count - filled)))
            keep = draw[np.abs(draw) <= bound][: count - filled]
            out[filled:filled + keep.size] = keep
            filled += keep.size
    if size is None:
        return float(out[0])
    return out.reshape(shape)


def plant_step(plant: PlantModel, x: np.ndarray, u: float, rng: np.random.Generator | None):
    """One step of x' = A x + B u + w, y' = C x' + v. ``rng=None`` means no noise."""
    x = np.asarray(x, dtype=float)
    if x.shape != (plant.dim,):
        raise ValueError("state dimension mismatch")
    x_next = plant.A @ x + plant.B * u
    if rng is not None:
        x_next = x_next + sample_truncated_gaussian(plant.noise_sigma, plant.noise_trunc, rng,
                                                    size=plant.dim)
        v = sample_truncated_gaussian(plant.noise_sigma, plant.noise_trunc, rng)
    else:
        v = 0.0
    return x_next, float(plant.C @ x_next + v)


def control_input(plant: PlantModel, x_hat: np.ndarray) -> float:
    return float(plant.K @ np.asarray(x_hat, dtype=float))


class DeadbeatObserver:
    """Exact state reconstruction from the last m measurements and inputs.

    With s = t - m + 1, the measurements y_s..y_t determine x_s through the
    observability matrix; x_t then follows from the dynamics. Times before 1
    are padded with zero measurements and inputs (zero initial state).
    """

    def __init__(self, plant: PlantModel):
        A, B, C = plant.A, plant.B, plant.C
        m = plant.dim
        powers = [np.eye(m)]
        for _ in range(m):
            powers.append(powers[-1] @ A)
        obs = np.array([C @ powers[j] for j in range(m)])
        # input-to-output map: y_{s+j} gets sum_{i<j} C A^{j-1-i} B u_{s+i}
        toeplitz = np.zeros((m, m - 1))
        for j in range(m):
            for i in range(j):
                toeplitz[j, i] = C @ powers[j - 1 - i] @ B
        roll = np.column_stack([powers[m - 2 - i] @ B for i in range(m - 1)]) if m > 1 else np.zeros((m, 0))
        obs_inv = np.linalg.inv(obs)
        self.m = m
        self.gain_y = powers[m - 1] @ obs_inv
        self.gain_u = roll - self.gain_y @ toeplitz
        self.observability = obs

    def estimate(self, y_recent: np.ndarray, u_recent: np.ndarray) -> np.ndarray:
        """``y_recent`` = y_s..y_t (length m), ``u_recent`` = u_s..u_{t-1} (length m-1)."""
        return self.gain_y @ y_recent + self.gain_u @ u_recent


def reconstruct_state(plant: PlantModel, y_hat, inputs, observer: DeadbeatObserver | None = None):
    """Deadbeat estimate of x_t from decoded measurements y_1..y_t and inputs u_1..u_{t-1}."""
    observer = observer or DeadbeatObserver(plant)
    m = observer.m
    y_hat = np.asarray(y_hat, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    t = len(y_hat)
    if t < 1 or len(inputs) != t - 1:
        raise ValueError("need t >= 1 measurements and t - 1 inputs")
    y_pad = np.concatenate([np.zeros(max(0, m - t)), y_hat[-m:]])
    u_pad = np.concatenate([np.zeros(max(0, m - t)), inputs[max(0, t - m):]])
    return observer.estimate(y_pad, u_pad)


def lqr_cost(states: np.ndarray, inputs: np.ndarray, T: int | None = None) -> float:
    """(1/2T) * sum_{t=1..T} (|x_t|^2 + u_t^2)."""
    states = np.asarray(states, dtype=float)
    inputs = np.asarray(inputs, dtype=float).reshape(len(inputs), -1)
    T = len(inputs) if T is None else T
    if len(states) < T or len(inputs) < T:
        raise ValueError("trace shorter than T")
    return float((np.sum(states[:T] ** 2) + np.sum(inputs[:T] ** 2)) / (2 * T))


@dataclass
class ControlTrace:
    """Per-step record of a closed-loop run; row t-1 describes time t."""

    x: np.ndarray
    y: np.ndarray
    bits: np.ndarray
    z: np.ndarray
    y_hat: list
    x_hat: np.ndarray
    u: np.ndarray
    status: list
    saturated: np.ndarray
    work: np.ndarray
    diverged: bool = False

    @property
    def steps(self) -> int:
        return len(self.u)

    def peak_norm(self) -> float:
        return math.inf if self.diverged else float(self.state_norms().max())

    def state_norms(self) -> np.ndarray:
        return np.linalg.norm(self.x, axis=1)

    def cost(self, T: int | None = None) -> float:
        if self.diverged:
            return math.inf
        return lqr_cost(self.x, self.u, T)


@dataclass(frozen=True)
class LoopConfig:
    """Decoder settings for the closed loop.

    ``window`` is the number of past time steps the decoder may revise; older
    estimates are committed. ``max_nodes`` is the per-step expansion budget.
    """

    bias: float
    delta: float = 0.0
    algorithm: str = "stack"
    window: int = 30
    max_nodes: int = 20_000
    max_stack: int = 1_000_000

    def __post_init__(self):
        if self.algorithm not in ("stack", "fano"):
            raise ValueError("algorithm must be 'stack' or 'fano'")
        if self.window < 1:
            raise ValueError("window must be positive")


def run_closed_loop(plant: PlantModel, qc: QuantizerConfig, code: LtiCode, ch: chmod.ChannelModel,
                    cfg: LoopConfig, T: int, rng: np.random.Generator,
                    x0=None, noise: bool = True, force_zero_input: bool = False,
                    perfect_link: bool = False, divergence: float = 1e8) -> ControlTrace:
    """Simulate T steps of the networked loop.

    ``code`` may use sub-blocks: when ``code.k`` divides ``qc.k`` with
    g = qc.k / code.k, each time step carries g code steps and ``g * code.n``
    channel uses, sub-blocks most significant first. ``perfect_link``
    bypasses coding and channel entirely. A run whose state norm exceeds
    ``divergence`` is stopped; the trace is then shorter than T and flagged.
    """
    if qc.k % code.k:
        raise ValueError("code.k must divide the quantizer's bit count")
    group = qc.k // code.k
    if code.horizon < T * group:
        raise ValueError("code horizon shorter than the run")
    m = plant.dim
    observer = DeadbeatObserver(plant)
    metric = MetricConfig(cfg.bias, cfg.delta)
    limits = DecoderLimits(max_nodes=cfg.max_nodes, max_stack=cfg.max_stack)
    decode = stack_decode if cfg.algorithm == "stack" else fano_decode
    window = cfg.window * group

    x = np.zeros(m) if x0 is None else np.asarray(x0, dtype=float).copy()
    y = float(plant.C @ x)
    if noise:
        y += sample_truncated_gaussian(plant.noise_sigma, plant.noise_trunc, rng)
    step_rng = rng if noise else None

    xs = np.zeros((T, m))
    ys = np.zeros(T)
    bits = np.zeros(T, dtype=np.int64)
    received = np.zeros((T * group, code.n), dtype=np.int64)
    y_hats = []
    x_hats = np.zeros((T, m))
    us = np.zeros(T)
    statuses = []
    saturated = np.zeros(T, dtype=bool)
    work = np.zeros(T, dtype=np.int64)

    encoder = EncoderState.start(code)
    committed = EncoderState.start(code)
    estimates: list[int] = []  # sub-block estimates from the latest decode
    shifts = np.arange(code.n)

    steps = T
    for t in range(T):
        if not np.linalg.norm(x) <= divergence:
            steps = t
            break
        xs[t] = x
        ys[t] = y
        b = quantize(qc, y)
        bits[t] = b
        saturated[t] = not (-qc.limit <= y < qc.limit)
        if perfect_link:
            blocks_hat = [int(v) for v in bits[: t + 1]]
            statuses.append(COMPLETED)
        else:
            for j, sub in enumerate(split_block(b, group, code.k)):
                c, encoder = encode_step(code, encoder, sub)
                row = t * group + j
                received[row] = chmod.simulate(ch, (c >> shifts) & 1, rng)
            depth = (t + 1) * group
            while committed.depth < depth - window:
                c, committed = encode_step(code, committed, estimates[committed.depth])
            result = decode(code, ch, received[:depth], metric, limits, prefix=committed)
            statuses.append(result.status)
            work[t] = result.total_work
            sub_hat = list(result.decoded)
            if len(sub_hat) < depth:
                # budget ran out: reuse earlier estimates, zero-bin for the rest
                zero = split_block(quantize(qc, 0.0), group, code.k)
                for d in range(len(sub_hat), depth):
                    sub_hat.append(estimates[d] if d < len(estimates) else zero[d % group])
            estimates = sub_hat
            blocks_hat = [join_blocks(sub_hat[i * group:(i + 1) * group], code.k)
                          for i in range(t + 1)]
        y_hat = np.array([dequantize(qc, v) for v in blocks_hat])
        y_hats.append(y_hat)
        x_hat = reconstruct_state(plant, y_hat, us[:t], observer)
        x_hats[t] = x_hat
        u = 0.0 if force_zero_input else control_input(plant, x_hat)
        us[t] = u
        x, y = plant_step(plant, x, u, step_rng)

    return ControlTrace(xs[:steps], ys[:steps], bits[:steps], received[:steps * group], y_hats,
                        x_hats[:steps], us[:steps], statuses, saturated[:steps], work[:steps],
                        diverged=steps < T)
