"""Sequential decoding of LTI tree codes: stack and Fano algorithms.

Path metrics use the generalized Fano metric, summed per branch:

    M(c_t) = sum_j [log2 w(z_j | c_j) - log2 p(z_j) - bias]

Within a branch the sum is evaluated from the (bit, output symbol) counts in
a fixed symbol order. Two branches with the same counts therefore get
bit-identical metrics, which keeps metric ties exact and the tie rule
deterministic.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import ChannelModel
from .treecode import EncoderState, LtiCode, bits_to_int, branch_extend

COMPLETED = "completed"
BUDGET_EXHAUSTED = "budget-exhausted"
FRONTIER_OVERFLOW = "frontier-overflow"


@dataclass(frozen=True)
class MetricConfig:
    bias: float
    delta: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.bias):
            raise ValueError("bias must be finite")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")


@dataclass(frozen=True)
class DecoderLimits:
    """Per-call resource limits.

    ``max_nodes`` caps node expansions, ``max_stack`` the frontier size (stack
    algorithm only). Nodes shallower than ``deepest - backtrack_window`` are
    never revisited.
    """

    max_nodes: int = 1_000_000
    max_stack: int = 10_000_000
    backtrack_window: float = math.inf

    def __post_init__(self):
        if self.max_nodes < 1 or self.max_stack < 1 or self.backtrack_window <= 0:
            raise ValueError("decoder limits must be positive")


class PathNode:
    """A node of the code tree reached by the decoder."""

    __slots__ = ("depth", "block", "parent", "metric", "sums")

    def __init__(self, depth, block, parent, metric, sums):
        self.depth = depth
        self.block = block
        self.parent = parent
        self.metric = metric
        self.sums = sums

    def blocks(self) -> list[int]:
        """Message blocks from the decoding root down to this node."""
        out = []
        node = self
        while node.parent is not None:
            out.append(node.block)
            node = node.parent
        out.reverse()
        return out


@dataclass
class DecodeResult:
    decoded: list
    work: np.ndarray
    status: str
    metric: float
    evaluations: int = 0
    start: int = 0
    expanded: list | None = field(default=None, repr=False)

    @property
    def total_work(self) -> int:
        return int(self.work.sum())


class BlockMetric:
    """Fano branch metric for one received block, as a function of the code block.

    ``masks[i]`` marks the positions that received symbol ``symbols[i]``;
    ``terms0``/``terms1`` are per-symbol metric terms indexed by symbol.
    """

    __slots__ = ("entries",)

    def __init__(self, masks, counts, symbols, terms0, terms1):
        self.entries = tuple((m, c, terms0[s], terms1[s])
                             for m, c, s in zip(masks, counts, symbols) if c)

    @classmethod
    def from_received(cls, ch: ChannelModel, z, bias: float) -> "BlockMetric":
        masks, counts = _symbol_masks(ch, np.asarray(z)[None, :])
        t0, t1 = symbol_terms(ch, bias)
        return cls(masks[:, 0].tolist(), counts[:, 0].tolist(), range(ch.size), t0, t1)

    def __call__(self, c: int) -> float:
        acc = 0.0
        for mask, count, t0, t1 in self.entries:
            ones = (c & mask).bit_count()
            if ones:
                acc += ones * t1
            if ones != count:
                acc += (count - ones) * t0
        return acc


def symbol_terms(ch: ChannelModel, bias: float) -> tuple[list, list]:
    """Per-symbol metric terms log2(w(z|b)/p(z)) - bias for b = 0 and b = 1."""
    p = 0.5 * (ch.w0 + ch.w1)
    t0 = [_log2(ch.w0[s]) - math.log2(p[s]) - bias if p[s] > 0 else 0.0 for s in range(ch.size)]
    t1 = [_log2(ch.w1[s]) - math.log2(p[s]) - bias if p[s] > 0 else 0.0 for s in range(ch.size)]
    return t0, t1


def _symbol_masks(ch: ChannelModel, z: np.ndarray):
    """Bit masks (symbol x time) of the positions holding each output symbol."""
    weights = np.left_shift(np.uint64(1), np.arange(z.shape[1], dtype=np.uint64))
    masks = np.empty((ch.size, z.shape[0]), dtype=np.uint64)
    counts = np.empty((ch.size, z.shape[0]), dtype=np.int64)
    for s in range(ch.size):
        hit = z == s
        masks[s] = (hit * weights).sum(axis=1, dtype=np.uint64)
        counts[s] = hit.sum(axis=1)
    return masks, counts


def _log2(x: float) -> float:
    return math.log2(x) if x > 0 else -math.inf


def branch_metric(ch: ChannelModel, c, z, cfg: MetricConfig) -> float:
    """Fano metric of code block ``c`` (int or bit sequence) against received symbols ``z``."""
    z = np.asarray(z)
    if not isinstance(c, (int, np.integer)):
        bits = list(c)
        if len(bits) != len(z):
            raise ValueError("code block and received block differ in length")
        c = bits_to_int(bits)
    elif int(c) >> len(z):
        raise ValueError("code block wider than received block")
    return BlockMetric.from_received(ch, z, cfg.bias)(int(c))


def _as_received(code: LtiCode, received) -> np.ndarray:
    z = np.asarray(received)
    if z.ndim != 2 or z.shape[1] != code.n:
        raise ValueError(f"received data must have shape (t, {code.n})")
    if z.shape[0] > code.horizon:
        raise ValueError("received length exceeds the code horizon")
    return z


class _Tree:
    """Lazily expanded code tree for one decode call."""

    def __init__(self, code, ch, received, cfg, prefix):
        self.code = code
        self.z = _as_received(code, received)
        self.t = self.z.shape[0]
        if prefix is None:
            prefix = EncoderState.start(code)
        elif not isinstance(prefix, EncoderState):
            state = EncoderState.start(code)
            for b in prefix:
                _, state = branch_state(code, state, int(b))
            prefix = state
        if prefix.depth > self.t:
            raise ValueError("committed prefix is longer than the received data")
        self.start = prefix.depth
        self.prefix = list(prefix.history)
        masks, counts = _symbol_masks(ch, self.z)
        self.masks = masks.T.tolist()
        self.counts = counts.T.tolist()
        self.terms = symbol_terms(ch, cfg.bias)
        self.symbols = range(ch.size)
        self.metrics = [None] * self.t
        self.memo = [dict() for _ in range(self.t)]
        self.evaluations = 0
        self.fanout = 1 << code.k
        root_sums = prefix.sums[: self.t - self.start]
        self.root = PathNode(self.start, None, None, 0.0, root_sums)

    def metric(self, depth: int, c: int) -> float:
        """Metric of code block ``c`` at 0-based time ``depth``."""
        memo = self.memo[depth]
        m = memo.get(c)
        if m is None:
            fn = self.metrics[depth]
            if fn is None:
                fn = self.metrics[depth] = BlockMetric(self.masks[depth], self.counts[depth],
                                                       self.symbols, *self.terms)
            m = memo[c] = fn(c)
            self.evaluations += 1
        return m

    def expand(self, node: PathNode) -> list[PathNode]:
        depth = node.depth
        prods = self.code.products
        length = self.t - depth
        sums = node.sums
        codes = (prods[:, 0] ^ sums[0]).tolist()
        tails = prods[:, 1:length] ^ sums[1:]
        metric = node.metric
        out = []
        for b in range(self.fanout):
            out.append(PathNode(depth + 1, b, node, metric + self.metric(depth, codes[b]), tails[b]))
        return out

    def full_path(self, node: PathNode) -> list[int]:
        return self.prefix + node.blocks()


def branch_state(code: LtiCode, state: EncoderState, b: int):
    c, sums = branch_extend(code, state.sums, state.depth, b)
    return c, EncoderState(state.depth + 1, state.history + [b], sums)


def stack_decode(code: LtiCode, ch: ChannelModel, received, cfg: MetricConfig,
                 limits: DecoderLimits = DecoderLimits(), prefix=None,
                 record: bool = False) -> DecodeResult:
    """Stack-algorithm decoding of the received blocks ``received`` (shape t x n).

    Repeatedly pops the best frontier node and replaces it with its 2^k
    children. Ties: higher metric, then greater depth, then smaller block
    value, then earlier insertion. ``prefix`` (an :class:`EncoderState` or a
    list of blocks) fixes already committed blocks. With ``record`` the
    expanded nodes are returned in expansion order.
    """
    tree = _Tree(code, ch, received, cfg, prefix)
    t, start = tree.t, tree.start
    work = np.zeros(t, dtype=np.int64)
    expanded = [] if record else None
    root = tree.root
    if start == t:
        return DecodeResult(tree.prefix, work, COMPLETED, 0.0, 0, start, expanded)
    window = limits.backtrack_window
    heap = [(-0.0, -start, 0, 0, root)]
    seq = 1
    expansions = 0
    best = root
    deepest = start
    status = None
    final = None
    while heap:
        _, _, _, _, node = heapq.heappop(heap)
        if node.depth == t:
            status, final = COMPLETED, node
            break
        if node.depth < deepest - window:
            continue
        if expansions >= limits.max_nodes:
            status = BUDGET_EXHAUSTED
            break
        expansions += 1
        work[node.depth] += 1
        if record:
            expanded.append(node)
        for child in tree.expand(node):
            heapq.heappush(heap, (-child.metric, -child.depth, child.block, seq, child))
            seq += 1
            if child.depth > best.depth or (child.depth == best.depth and child.metric > best.metric):
                best = child
        deepest = max(deepest, node.depth + 1)
        if len(heap) > limits.max_stack:
            status = FRONTIER_OVERFLOW
            break
    if final is None:
        final = best
        status = status or BUDGET_EXHAUSTED
    return DecodeResult(tree.full_path(final), work, status, final.metric,
                        tree.evaluations, start, expanded)


def fano_decode(code: LtiCode, ch: ChannelModel, received, cfg: MetricConfig,
                limits: DecoderLimits = DecoderLimits(), prefix=None,
                record: bool = False) -> DecodeResult:
    """Fano-algorithm decoding with threshold spacing ``cfg.delta``.

    Textbook variant: the threshold starts at 0, is tightened in steps of
    delta on the first visit of a node, and lowered by delta when neither a
    forward nor a backward move is possible. Work counts the computations of
    a node's children; a node revisited after backtracking is recomputed.
    """
    if cfg.delta <= 0:
        raise ValueError("the Fano algorithm needs delta > 0")
    tree = _Tree(code, ch, received, cfg, prefix)
    t, start = tree.t, tree.start
    work = np.zeros(t, dtype=np.int64)
    expanded = [] if record else None
    root = tree.root
    if start == t:
        return DecodeResult(tree.prefix, work, COMPLETED, 0.0, 0, start, expanded)
    delta = cfg.delta
    window = limits.backtrack_window
    threshold = 0.0
    path = [root]
    kids = [None]
    index = [0]
    expansions = 0
    best = root
    deepest = start
    status = None

    while True:
        node = path[-1]
        if kids[-1] is None:
            if expansions >= limits.max_nodes:
                status = BUDGET_EXHAUSTED
                break
            expansions += 1
            work[node.depth] += 1
            if record:
                expanded.append(node)
            children = tree.expand(node)
            children.sort(key=lambda c: (-c.metric, c.block))
            kids[-1] = children
        child = kids[-1][index[-1]]
        if child.metric >= threshold:
            # forward move
            path.append(child)
            kids.append(None)
            index.append(0)
            if child.depth > best.depth or (child.depth == best.depth and child.metric > best.metric):
                best = child
            deepest = max(deepest, child.depth)
            if child.depth == t:
                status = COMPLETED
                break
            if node.metric < threshold + delta:
                while child.metric >= threshold + delta:
                    threshold += delta
            continue
        # look back until a next-best sibling can be tried or the threshold drops
        while True:
            if len(path) == 1 or path[-2].depth < deepest - window:
                threshold -= delta
                index[-1] = 0
                break
            parent = path[-2]
            if parent.metric >= threshold:
                path.pop()
                kids.pop()
                index.pop()
                if index[-1] + 1 >= len(kids[-1]):
                    continue
                index[-1] += 1
                break
            threshold -= delta
            index[-1] = 0
            break

    final = path[-1] if status == COMPLETED else best
    return DecodeResult(tree.full_path(final), work, status, final.metric,
                        tree.evaluations, start, expanded)


def ml_decode_bruteforce(code: LtiCode, ch: ChannelModel, received) -> list[int]:
    """Exhaustive maximum-likelihood decoding (test oracle; k*t <= 24).

    Ties resolve to the lexicographically first message sequence, ordering
    sequences by (b_1, b_2, ...) as integers.
    """
    z = _as_received(code, received)
    t, k = z.shape[0], code.k
    if k * t > 24:
        raise ValueError("instance too large for exhaustive decoding (k*t > 24)")
    if t == 0:
        return []
    logw0 = np.array([_log2(x) for x in ch.w0])
    logw1 = np.array([_log2(x) for x in ch.w1])
    fan = 1 << k
    prods = code.products
    sums = code.offsets()[None, :t]
    total = np.zeros(1)
    for depth in range(t):
        length = t - depth
        # children enumerated parent-major so the flat index is lexicographic
        codes = (sums[:, 0][:, None] ^ prods[None, :, 0]).reshape(-1)
        sums = (sums[:, None, 1:] ^ prods[None, :, 1:length]).reshape(codes.shape[0], length - 1)
        ll = np.zeros(codes.shape[0])
        for s in range(ch.size):
            mask = sum(1 << int(j) for j in np.flatnonzero(z[depth] == s))
            if not mask:
                continue
            count = mask.bit_count()
            ones = np.bitwise_count(codes & np.uint64(mask)).astype(np.int64)
            zeros = count - ones
            with np.errstate(invalid="ignore"):
                ll += np.where(ones > 0, ones * logw1[s], 0.0)
                ll += np.where(zeros > 0, zeros * logw0[s], 0.0)
        total = (total[:, None] + ll.reshape(-1, fan)).reshape(-1)
    # per-depth sums round differently along different paths; compare with a tolerance
    best = int(np.flatnonzero(total >= total.max() - 1e-9)[0])
    mask = fan - 1
    return [(best >> (k * (t - 1 - i))) & mask for i in range(t)]


def first_error_delay(truth: Sequence[int], decoded: Sequence[int]) -> int | None:
    """Delay d of the first error event: t minus the (1-based) index of the oldest wrong block."""
    if len(truth) != len(decoded):
        raise ValueError("truth and decoded sequences differ in length")
    t = len(truth)
    for i, (b, bh) in enumerate(zip(truth, decoded), start=1):
        if b != bh:
            return t - i
    return None
