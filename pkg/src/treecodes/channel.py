"""Binary-input output-symmetric channels and their error-exponent functions.

All rates and exponents are in bits per channel use (base-2 logarithms).
The one exception is :func:`jelinek_constant`, whose bound is evaluated with
natural exponentials exactly as the classical sequential-decoding bound is
stated; see its docstring.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class ChannelModel:
    """Finite-output MBIOS channel.

    ``w0[i]`` and ``w1[i]`` are the probabilities of output symbol ``alphabet[i]``
    given input bit 0 and 1. ``involution[i]`` is the index of the mirror symbol,
    so that ``w0[i] == w1[involution[i]]``.
    """

    alphabet: tuple
    w0: np.ndarray
    w1: np.ndarray
    involution: tuple

    def __post_init__(self):
        w0 = np.array(self.w0, dtype=float)
        w1 = np.array(self.w1, dtype=float)
        size = len(self.alphabet)
        if w0.shape != (size,) or w1.shape != (size,) or len(self.involution) != size:
            raise ValueError("alphabet, w0, w1 and involution must have equal length")
        if np.any(w0 < 0) or np.any(w1 < 0):
            raise ValueError("transition probabilities must be nonnegative")
        if abs(w0.sum() - 1.0) > 1e-12 or abs(w1.sum() - 1.0) > 1e-12:
            raise ValueError("transition probabilities must sum to 1")
        sigma = tuple(int(s) for s in self.involution)
        for z, s in enumerate(sigma):
            if not 0 <= s < size or sigma[s] != z:
                raise ValueError("involution must be a permutation of order two")
            if abs(w0[z] - w1[s]) > 1e-12:
                raise ValueError("channel is not output-symmetric under the involution")
        w0.flags.writeable = False
        w1.flags.writeable = False
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "w0", w0)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "involution", sigma)

    @property
    def size(self) -> int:
        return len(self.alphabet)

    def index(self, symbol) -> int:
        try:
            return self.alphabet.index(symbol)
        except ValueError:
            raise KeyError(f"unknown output symbol {symbol!r}") from None

    def transition(self, bit: int) -> np.ndarray:
        return self.w1 if bit else self.w0


@dataclass(frozen=True)
class ExponentResult:
    value: float
    rho_star: float


def make_bsc(p: float) -> ChannelModel:
    """Binary symmetric channel with crossover probability ``p``."""
    if not 0.0 <= p < 0.5:
        raise ValueError(f"crossover probability must lie in [0, 0.5), got {p}")
    return ChannelModel(("+", "-"), [1.0 - p, p], [p, 1.0 - p], (1, 0))


def make_bec(eps: float) -> ChannelModel:
    """Binary erasure channel; symbols are ``"0"``, ``"e"`` and ``"1"``."""
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"erasure probability must lie in [0, 1), got {eps}")
    return ChannelModel(("0", "e", "1"), [1.0 - eps, eps, 0.0], [0.0, eps, 1.0 - eps], (2, 1, 0))


def output_marginal(ch: ChannelModel, z) -> float:
    """Output probability of symbol ``z`` under equiprobable inputs."""
    i = ch.index(z)
    return 0.5 * (ch.w0[i] + ch.w1[i])


def e0(ch: ChannelModel, rho: float) -> float:
    """Gallager's function E_0(rho) for equiprobable inputs, in bits."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    s = 1.0 / (1.0 + rho)
    inner = ch.w0**s + ch.w1**s
    return 1.0 + rho - math.log2(float(np.sum(inner ** (1.0 + rho))))


def e0_array(ch: ChannelModel, rho) -> np.ndarray:
    """E_0 evaluated at every entry of ``rho`` (vectorized :func:`e0`)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be nonnegative")
    r = rho.reshape(-1, 1)
    inner = ch.w0 ** (1.0 / (1.0 + r)) + ch.w1 ** (1.0 / (1.0 + r))
    out = 1.0 + r[:, 0] - np.log2(np.sum(inner ** (1.0 + r), axis=1))
    return out.reshape(rho.shape)


def capacity(ch: ChannelModel) -> float:
    """Mutual information with uniform inputs (the capacity of an MBIOS channel)."""
    p = 0.5 * (ch.w0 + ch.w1)
    total = 0.0
    for w in (ch.w0, ch.w1):
        mask = w > 0
        total += 0.5 * float(np.sum(w[mask] * np.log2(w[mask] / p[mask])))
    return total


def _maximize_unit(f: Callable[[float], float], fgrid: Callable[[np.ndarray], np.ndarray],
                   step: float = 1e-3, tol: float = 1e-6):
    """Maximize a unimodal function on [0, 1]: coarse grid, then golden section.

    ``fgrid`` is the vectorized form of ``f`` used for the grid stage.
    Endpoints are returned exactly when they are at least as good as the
    interior refinement, so callers can test ``rho_star == 1``.
    """
    grid = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
    values = fgrid(grid)
    i = int(np.argmax(values))
    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, len(grid) - 1)])
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    best_x, best_f = (c, fc) if fc >= fd else (d, fd)
    for edge in (0.0, 1.0):
        fe = f(edge)
        if fe >= best_f:
            best_x, best_f = edge, fe
    return best_x, best_f


def gallager_exponent(ch: ChannelModel, rate: float) -> ExponentResult:
    """Random-coding exponent E_G(R) = max over rho in [0,1] of E_0(rho) - rho R."""
    rho, value = _maximize_unit(lambda r: e0(ch, r) - r * rate,
                                lambda r: e0_array(ch, r) - r * rate)
    if value <= 0.0:
        return ExponentResult(0.0, 0.0)
    return ExponentResult(value, rho)


def cutoff_rate(ch: ChannelModel) -> float:
    return e0(ch, 1.0)


def critical_rate(ch: ChannelModel, step: float = 1e-5) -> float:
    """E_0'(1) by a symmetric finite difference.

    Warns when the estimate moves by more than 1e-6 as the step grows tenfold.
    """
    def diff(h: float) -> float:
        return (e0(ch, 1.0 + h) - e0(ch, 1.0 - h)) / (2.0 * h)

    value = diff(step)
    if abs(diff(10.0 * step) - value) > 1e-6:
        warnings.warn("finite-difference estimate of the critical rate has not converged",
                      RuntimeWarning, stacklevel=2)
    return value


def jelinek_exponent(ch: ChannelModel, bias: float, rate: float) -> ExponentResult:
    """Sequential-decoding exponent E_J(B, R) for metric bias ``bias``.

    Maximizes rho/(1+rho) * (E_0(rho) + B - (1+rho) R) over rho in [0, 1].
    """
    if bias > cutoff_rate(ch) + 1e-12:
        # exponent still well defined; only the prefactor bound blows up
        warnings.warn("bias above the cutoff rate: the error-bound constant is infinite",
                      RuntimeWarning, stacklevel=2)

    def objective(r: float) -> float:
        return r / (1.0 + r) * (e0(ch, r) + bias - (1.0 + r) * rate)

    def grid_objective(r: np.ndarray) -> np.ndarray:
        return r / (1.0 + r) * (e0_array(ch, r) + bias - (1.0 + r) * rate)

    rho, value = _maximize_unit(objective, grid_objective)
    if value <= 0.0:
        return ExponentResult(0.0, 0.0)
    return ExponentResult(value, rho)


def jelinek_constant(ch: ChannelModel, rho: float, bias: float, delta: float = 0.0) -> float:
    """Time-independent upper bound on the prefactor A of the sequential-decoding bound.

    Returns exp(rho*delta/(1+rho)) / (1 - exp(-(E_0(rho) - rho*bias))). The
    exponentials are natural even though E_0 is measured in bits; this is the
    bound as classically printed. ``delta = 0`` is the stack-algorithm case.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    gap = e0(ch, rho) - rho * bias
    if gap <= 0:
        raise ValueError("E_0(rho) - rho*bias must be positive for a finite constant")
    return math.exp(rho * delta / (1.0 + rho)) / (1.0 - math.exp(-gap))


def certification_bound(eps: float, n: int, d0: int) -> float:
    """Probability that a random LTI code misses exponent E_G(R) - eps for some delay >= d0."""
    if eps <= 0 or n < 1 or d0 < 1:
        raise ValueError("need eps > 0, n >= 1 and d0 >= 1")
    return 2.0 ** (-eps * n * d0) / (1.0 - 2.0 ** (-eps * n))


def pareto_exponent(ch: ChannelModel, rate: float, tol: float = 1e-10) -> float:
    """Root rho > 0 of E_0(rho)/rho = R, the Pareto exponent of decoding work.

    Uses bisection; E_0(rho)/rho is decreasing in rho. Returns ``inf`` when
    no finite root exists (e.g. a noiseless channel, where E_0(rho) = rho).
    """
    if not 0.0 < rate < capacity(ch):
        raise ValueError("rate must lie strictly between 0 and capacity")

    def g(r: float) -> float:
        return e0(ch, r) / r - rate

    lo, hi = 1e-9, 1.0
    while g(hi) > 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            return math.inf
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def simulate(ch: ChannelModel, bits, rng: np.random.Generator) -> np.ndarray:
    """Pass ``bits`` (any shape, values 0/1) through the channel.

    Returns output symbol indices with the same shape.
    """
    bits = np.asarray(bits, dtype=np.int64)
    u = rng.random(bits.shape)
    cdf0 = np.cumsum(ch.w0)
    cdf1 = np.cumsum(ch.w1)
    out0 = np.searchsorted(cdf0, u, side="right")
    out1 = np.searchsorted(cdf1, u, side="right")
    out = np.where(bits == 1, out1, out0)
    return np.minimum(out, ch.size - 1)


def flip_symbols(ch: ChannelModel, symbols: Sequence[int]) -> np.ndarray:
    """Apply the output involution element-wise (maps outputs for bit 0 to bit 1)."""
    sigma = np.asarray(ch.involution)
    return sigma[np.asarray(symbols)]
