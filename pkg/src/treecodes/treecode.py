"""Linear time-invariant tree codes over GF(2).

Bit blocks are packed into Python ints: bit ``j`` of the int is entry ``j``
of the vector. A generator block ``G`` (n x k) is stored as ``k`` column
ints, so ``G @ b`` is the XOR of the columns selected by the set bits of
``b``.

The code block at time ``t`` is ``c_t = G_t b_1 + G_{t-1} b_2 + ... + G_1 b_t``
(plus ``v_t`` in affine mode). Encoders and decoders work with "partial sums":
for a message prefix ``b_1..b_s`` the array ``F[tau] = v_tau + sum_{i<=s}
G_{tau-i+1} b_i`` for every later time ``tau``. Extending the prefix by one
block is a single vector XOR, and the next code block is ``F[s+1] ^ G_1 b``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_N = 62
MAX_K = 16


def gf2_rank(columns: Sequence[int]) -> int:
    """Rank over GF(2) of the vectors packed in ``columns``."""
    pivots: list[int] = []
    for col in columns:
        v = int(col)
        for p in pivots:
            v = min(v, v ^ p)
        if v:
            pivots.append(v)
    return len(pivots)


def matvec(columns: Sequence[int], b: int) -> int:
    out = 0
    j = 0
    while b:
        if b & 1:
            out ^= columns[j]
        b >>= 1
        j += 1
    return out


def int_to_bits(value: int, length: int) -> np.ndarray:
    return np.array([(value >> j) & 1 for j in range(length)], dtype=np.int8)


def bits_to_int(bits: Iterable[int]) -> int:
    out = 0
    for j, bit in enumerate(bits):
        if bit & 1:
            out |= 1 << j
    return out


@dataclass(frozen=True, eq=False)
class LtiCode:
    """Block-lower-triangular Toeplitz tree code truncated at ``horizon`` steps.

    ``blocks[j]`` holds the columns of G_{j+1}; ``translation`` holds v_1..v_T
    when the code is affine.
    """

    n: int
    k: int
    horizon: int
    blocks: tuple
    translation: tuple | None = None
    products: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 1 <= self.k < self.n <= MAX_N:
            raise ValueError(f"need 1 <= k < n <= {MAX_N}, got n={self.n}, k={self.k}")
        if self.k > MAX_K:
            raise ValueError(f"k must be at most {MAX_K}")
        if self.horizon < 1 or len(self.blocks) != self.horizon:
            raise ValueError("need exactly `horizon` generator blocks")
        blocks = tuple(tuple(int(c) for c in g) for g in self.blocks)
        limit = 1 << self.n
        for g in blocks:
            if len(g) != self.k or any(not 0 <= c < limit for c in g):
                raise ValueError("generator blocks must be n x k")
        if gf2_rank(blocks[0]) != self.k:
            raise ValueError("G_1 must have full column rank")
        object.__setattr__(self, "blocks", blocks)
        if self.translation is not None:
            v = tuple(int(x) for x in self.translation)
            if len(v) != self.horizon or any(not 0 <= x < limit for x in v):
                raise ValueError("translation must hold `horizon` n-bit blocks")
            object.__setattr__(self, "translation", v)
        # products[b, j] = G_{j+1} b, laid out so a fixed b is a contiguous row
        cols = np.array(blocks, dtype=np.uint64).T
        prods = np.zeros((1 << self.k, self.horizon), dtype=np.uint64)
        for b in range(1, 1 << self.k):
            low = b & -b
            prods[b] = prods[b ^ low] ^ cols[low.bit_length() - 1]
        prods.flags.writeable = False
        object.__setattr__(self, "products", prods)

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def affine(self) -> bool:
        return self.translation is not None

    def offsets(self) -> np.ndarray:
        """Initial partial sums (the translation, or zeros)."""
        if self.translation is None:
            return np.zeros(self.horizon, dtype=np.uint64)
        return np.array(self.translation, dtype=np.uint64)

    def generator_matrix(self, depth: int | None = None) -> np.ndarray:
        """Unrolled (depth*n) x (depth*k) generator as a 0/1 array."""
        depth = self.horizon if depth is None else depth
        n, k = self.n, self.k
        out = np.zeros((depth * n, depth * k), dtype=np.int8)
        for t in range(depth):
            for i in range(t + 1):
                g = self.blocks[t - i]
                for col in range(k):
                    out[t * n:(t + 1) * n, i * k + col] = int_to_bits(g[col], n)
        return out

    def fingerprint(self) -> str:
        return hashlib.sha256(dumps(self).encode()).hexdigest()[:16]


def _random_columns(n: int, k: int, rng: np.random.Generator) -> tuple:
    return tuple(int(x) for x in rng.integers(0, 1 << n, size=k, dtype=np.uint64))


def sample_lti(n: int, k: int, horizon: int, affine: bool = False,
               rng: np.random.Generator | None = None) -> LtiCode:
    """Draw a code from the LTI ensemble.

    G_1 is uniform over full-rank n x k matrices (rejection sampling); G_2..G_T
    and, in affine mode, the translation bits are i.i.d. uniform.
    """
    if not 1 <= k < n:
        raise ValueError("need 1 <= k < n")
    if horizon < 1:
        raise ValueError("horizon must be positive")
    rng = np.random.default_rng() if rng is None else rng
    while True:
        g1 = _random_columns(n, k, rng)
        if gf2_rank(g1) == k:
            break
    blocks = [g1] + [_random_columns(n, k, rng) for _ in range(horizon - 1)]
    translation = None
    if affine:
        translation = tuple(int(x) for x in rng.integers(0, 1 << n, size=horizon, dtype=np.uint64))
    return LtiCode(n, k, horizon, tuple(blocks), translation)


@dataclass
class EncoderState:
    """Causal encoder state: the absorbed message blocks and their partial sums.

    ``sums[i]`` is the contribution of the absorbed prefix (plus translation)
    to code block ``depth + 1 + i``.
    """

    depth: int
    history: list
    sums: np.ndarray

    @classmethod
    def start(cls, code: LtiCode) -> "EncoderState":
        return cls(0, [], code.offsets())


def branch_extend(code: LtiCode, sums: np.ndarray, depth: int, b: int,
                  end: int | None = None) -> tuple[int, np.ndarray]:
    """Extend a prefix of length ``depth`` by block ``b``.

    ``sums`` are the partial sums for times depth+1..end (``end`` defaults to
    the horizon). Returns the code block at time depth+1 and the partial sums
    of the extended prefix for times depth+2..end.
    """
    end = code.horizon if end is None else end
    if len(sums) != end - depth or not 0 <= depth < end <= code.horizon:
        raise ValueError(f"partial sums of length {len(sums)} do not match depth {depth}, end {end}")
    row = code.products[b]
    c = int(sums[0] ^ row[0])
    return c, sums[1:] ^ row[1:end - depth]


def encode_step(code: LtiCode, state: EncoderState, b: int) -> tuple[int, EncoderState]:
    """Absorb message block ``b`` and emit the next code block (mutates ``state``)."""
    if state.depth >= code.horizon:
        raise ValueError(f"encoder already at the horizon ({code.horizon})")
    if not 0 <= b < (1 << code.k):
        raise ValueError("message block out of range")
    c, state.sums = branch_extend(code, state.sums, state.depth, b)
    state.history.append(int(b))
    state.depth += 1
    return c, state


def encode_prefix(code: LtiCode, message: Sequence[int]) -> list[int]:
    state = EncoderState.start(code)
    out = []
    for b in message:
        c, state = encode_step(code, state, int(b))
        out.append(c)
    return out


def subblock_expand(n: int, k: int) -> tuple[int, int, int]:
    """Reduced block dimensions ``(n/g, k/g, g)`` with ``g = gcd(n, k)``.

    A rate-k/n code can be run as a rate-k'/n' code whose time step carries
    ``g`` sub-blocks; the branching factor drops from 2^k to 2^k'.
    """
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    g = math.gcd(n, k)
    return n // g, k // g, g


def split_block(b: int, group: int, sub_k: int) -> list[int]:
    """Split a (group*sub_k)-bit block into ``group`` sub-blocks, most significant first.

    The first sub-block of a time step is followed by the most code bits
    within that step, so it is the best protected one.
    """
    mask = (1 << sub_k) - 1
    return [(b >> ((group - 1 - i) * sub_k)) & mask for i in range(group)]


def join_blocks(parts: Sequence[int], sub_k: int) -> int:
    out = 0
    for p in parts:
        out = (out << sub_k) | int(p)
    return out


def dumps(code: LtiCode) -> str:
    """Plain-text serialization.

    First line ``n k horizon affine``; then one line per G_t with its n rows as
    hex (bit c of a row is column c); then, for affine codes, one line with
    v_1..v_T in hex.
    """
    width = max(1, (code.k + 3) // 4)
    vwidth = max(1, (code.n + 3) // 4)
    lines = [f"{code.n} {code.k} {code.horizon} {int(code.affine)}"]
    for g in code.blocks:
        rows = []
        for r in range(code.n):
            row = 0
            for col in range(code.k):
                row |= ((g[col] >> r) & 1) << col
            rows.append(f"{row:0{width}x}")
        lines.append(" ".join(rows))
    if code.affine:
        lines.append(" ".join(f"{v:0{vwidth}x}" for v in code.translation))
    return "\n".join(lines) + "\n"


def loads(text: str) -> LtiCode:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty code file")
    head = lines[0].split()
    if len(head) != 4:
        raise ValueError("header must be `n k horizon affine`")
    n, k, horizon, affine = (int(x) for x in head)
    expected = 1 + horizon + (1 if affine else 0)
    if len(lines) != expected:
        raise ValueError(f"expected {expected} lines, found {len(lines)}")
    blocks = []
    for line in lines[1:1 + horizon]:
        rows = [int(tok, 16) for tok in line.split()]
        if len(rows) != n:
            raise ValueError("each generator line needs n rows")
        cols = []
        for col in range(k):
            cols.append(sum(((row >> col) & 1) << r for r, row in enumerate(rows)))
        blocks.append(tuple(cols))
    translation = None
    if affine:
        translation = tuple(int(tok, 16) for tok in lines[-1].split())
    return LtiCode(n, k, horizon, tuple(blocks), translation)
