import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treecodes import treecode as tc

from oracles import naive_encode


def make_code(blocks_as_bits, n, k):
    """Build a code from a list of G_t given as n x k 0/1 nested lists."""
    blocks = []
    for g in blocks_as_bits:
        cols = tuple(sum(int(g[r][c]) << r for r in range(n)) for c in range(k))
        blocks.append(cols)
    return tc.LtiCode(n, k, len(blocks), tuple(blocks))


def test_hand_convolution():
    code = make_code([[[1], [1]], [[0], [1]]], 2, 1)
    c = tc.encode_prefix(code, [1, 1])
    assert tc.int_to_bits(c[0], 2).tolist() == [1, 1]
    assert tc.int_to_bits(c[1], 2).tolist() == [1, 0]


def test_sample_lti_shapes_and_rank():
    rng = np.random.default_rng(0)
    for n, k in [(20, 10), (20, 4), (2, 1), (5, 1)]:
        code = tc.sample_lti(n, k, 30, rng=rng)
        assert (code.n, code.k, code.horizon) == (n, k, 30)
        assert tc.gf2_rank(code.blocks[0]) == k
        assert code.rate == pytest.approx(k / n)
    code = tc.sample_lti(2, 1, 5, rng=rng)
    assert code.blocks[0][0] != 0


def test_sample_lti_deterministic():
    a = tc.sample_lti(6, 2, 10, affine=True, rng=np.random.default_rng(5))
    b = tc.sample_lti(6, 2, 10, affine=True, rng=np.random.default_rng(5))
    assert tc.dumps(a) == tc.dumps(b)


@pytest.mark.parametrize("n,k,h", [(3, 3, 2), (0, 1, 2), (4, 1, 0)])
def test_sample_lti_rejects(n, k, h):
    with pytest.raises(ValueError):
        tc.sample_lti(n, k, h, rng=np.random.default_rng(0))


def test_lti_code_validation():
    with pytest.raises(ValueError):
        tc.LtiCode(4, 2, 1, ((1, 1),))  # rank-deficient G_1
    with pytest.raises(ValueError):
        tc.LtiCode(4, 1, 2, ((1,),))
    with pytest.raises(ValueError):
        tc.LtiCode(4, 1, 1, ((1 << 4,),))


def test_gf2_rank():
    assert tc.gf2_rank([0b011, 0b101, 0b110]) == 2
    assert tc.gf2_rank([0b001, 0b010, 0b100]) == 3
    assert tc.gf2_rank([0, 0]) == 0


def test_encode_matches_naive():
    rng = np.random.default_rng(1)
    for affine in (False, True):
        for _ in range(50):
            n, k = int(rng.integers(2, 9)), 0
            k = int(rng.integers(1, n))
            code = tc.sample_lti(n, k, 8, affine=affine, rng=rng)
            msg = [int(x) for x in rng.integers(0, 1 << k, size=8)]
            assert tc.encode_prefix(code, msg) == naive_encode(code, msg)


def test_zero_message():
    rng = np.random.default_rng(2)
    code = tc.sample_lti(6, 2, 10, rng=rng)
    assert tc.encode_prefix(code, [0] * 10) == [0] * 10
    aff = tc.sample_lti(6, 2, 10, affine=True, rng=rng)
    assert tc.encode_prefix(aff, [0] * 10) == list(aff.translation)


def test_encode_step_overflow():
    code = tc.sample_lti(4, 1, 2, rng=np.random.default_rng(0))
    state = tc.EncoderState.start(code)
    for b in (1, 0):
        _, state = tc.encode_step(code, state, b)
    assert state.depth == 2 and state.history == [1, 0]
    with pytest.raises(ValueError):
        tc.encode_step(code, state, 1)
    with pytest.raises(ValueError):
        tc.encode_step(code, tc.EncoderState.start(code), 2)


def test_branch_extend_matches_encode():
    rng = np.random.default_rng(3)
    code = tc.sample_lti(7, 3, 12, affine=True, rng=rng)
    for _ in range(1000):
        t = int(rng.integers(0, 12))
        msg = [int(x) for x in rng.integers(0, 8, size=t + 1)]
        state = tc.EncoderState.start(code)
        for b in msg[:-1]:
            _, state = tc.encode_step(code, state, b)
        c, _ = tc.branch_extend(code, state.sums, state.depth, msg[-1])
        assert c == tc.encode_prefix(code, msg)[-1]


def test_branch_extend_linearity_in_new_block():
    code = tc.sample_lti(7, 3, 6, rng=np.random.default_rng(4))
    state = tc.EncoderState.start(code)
    _, state = tc.encode_step(code, state, 5)
    c0, _ = tc.branch_extend(code, state.sums, 1, 0b010)
    c1, _ = tc.branch_extend(code, state.sums, 1, 0b011)
    assert c0 ^ c1 == code.blocks[0][0]
    with pytest.raises(ValueError):
        tc.branch_extend(code, state.sums, 2, 0)
    zero, _ = tc.branch_extend(code, code.offsets(), 0, 0)
    assert zero == 0


def test_branch_extend_truncated_end():
    code = tc.sample_lti(5, 2, 10, rng=np.random.default_rng(6))
    c_full, s_full = tc.branch_extend(code, code.offsets(), 0, 3)
    c_short, s_short = tc.branch_extend(code, code.offsets()[:4], 0, 3, end=4)
    assert c_full == c_short
    np.testing.assert_array_equal(s_full[:3], s_short)


def test_generator_matrix_toeplitz_from_unit_responses():
    rng = np.random.default_rng(7)
    code = tc.sample_lti(5, 2, 6, rng=rng)
    depth = 6
    G = np.zeros((depth * code.n, depth * code.k), dtype=np.int8)
    for i in range(depth):
        for col in range(code.k):
            msg = [0] * depth
            msg[i] = 1 << col
            out = tc.encode_prefix(code, msg)
            G[:, i * code.k + col] = np.concatenate([tc.int_to_bits(c, code.n) for c in out])
    np.testing.assert_array_equal(G, code.generator_matrix())
    n, k = code.n, code.k
    for t in range(depth):
        for i in range(depth):
            block = G[t * n:(t + 1) * n, i * k:(i + 1) * k]
            if i > t:
                assert not block.any()
            else:
                np.testing.assert_array_equal(block, G[(t - i) * n:(t - i + 1) * n, 0:k])


@pytest.mark.parametrize("k", [1, 4, 8, 12])
def test_g1_injective_exhaustive(k):
    code = tc.sample_lti(k + 3, k, 1, rng=np.random.default_rng(k))
    images = {tc.encode_prefix(code, [b])[0] for b in range(1 << k)}
    assert len(images) == 1 << k


def test_subblock_expand():
    assert tc.subblock_expand(20, 10) == (2, 1, 10)
    assert tc.subblock_expand(20, 4) == (5, 1, 4)
    assert tc.subblock_expand(3, 2) == (3, 2, 1)
    with pytest.raises(ValueError):
        tc.subblock_expand(0, 1)


def test_split_join():
    parts = tc.split_block(0b1101, 4, 1)
    assert parts == [1, 1, 0, 1]
    assert tc.join_blocks(parts, 1) == 0b1101
    assert tc.split_block(0x3A7, 3, 4) == [0x3, 0xA, 0x7]
    for b in range(1 << 10):
        assert tc.join_blocks(tc.split_block(b, 5, 2), 2) == b


def test_serialization_round_trip():
    rng = np.random.default_rng(8)
    for affine in (False, True):
        code = tc.sample_lti(20, 10, 15, affine=affine, rng=rng)
        text = tc.dumps(code)
        assert text.splitlines()[0] == f"20 10 15 {int(affine)}"
        back = tc.loads(text)
        assert back.blocks == code.blocks and back.translation == code.translation
        assert tc.dumps(back) == text
        assert back.fingerprint() == code.fingerprint()


def test_serialization_row_layout():
    # G_1 = [[1, 0], [1, 1], [0, 1]]: rows 0b01, 0b11, 0b10
    code = make_code([[[1, 0], [1, 1], [0, 1]]], 3, 2)
    assert tc.dumps(code).splitlines()[1] == "1 3 2"


def test_loads_rejects():
    with pytest.raises(ValueError):
        tc.loads("")
    with pytest.raises(ValueError):
        tc.loads("2 1 2 0\n3\n")
    with pytest.raises(ValueError):
        tc.loads("2 1\n3\n")


message_blocks = st.lists(st.integers(0, 7), min_size=1, max_size=10)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=message_blocks, data=st.data())
def test_linearity_property(seed, a, data):
    code = tc.sample_lti(6, 3, 10, rng=np.random.default_rng(seed))
    b = data.draw(st.lists(st.integers(0, 7), min_size=len(a), max_size=len(a)))
    ea, eb = tc.encode_prefix(code, a), tc.encode_prefix(code, b)
    esum = tc.encode_prefix(code, [x ^ y for x, y in zip(a, b)])
    assert esum == [x ^ y for x, y in zip(ea, eb)]


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), msg=message_blocks, shift=st.integers(0, 5))
def test_time_invariance_property(seed, msg, shift):
    code = tc.sample_lti(6, 3, 16, rng=np.random.default_rng(seed))
    assert tc.encode_prefix(code, [0] * shift + msg) == [0] * shift + tc.encode_prefix(code, msg)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), msg=message_blocks, pos=st.integers(0, 9), new=st.integers(0, 7))
def test_causality_property(seed, msg, pos, new):
    code = tc.sample_lti(6, 3, 10, affine=True, rng=np.random.default_rng(seed))
    pos = pos % len(msg)
    other = list(msg)
    other[pos] = new
    assert tc.encode_prefix(code, msg)[:pos] == tc.encode_prefix(code, other)[:pos]
    assert tc.encode_prefix(code, msg[:pos]) == tc.encode_prefix(code, msg)[:pos]
