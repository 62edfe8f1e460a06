import logging

import numpy as np
import pytest

import tlcpy as tlc
from tlcpy.trellis import _run


def test_octal_convention():
    gen = tlc.RationalGenerator.from_octal("5/7")
    assert gen.feedforward == (1, 0, 1)
    assert gen.feedback == (1, 1, 1)
    assert gen.memory == 2
    assert gen.is_recursive
    assert str(gen) == "5/7"

    gen = tlc.RationalGenerator.from_octal("1/3")
    assert gen.feedforward == (1,)
    assert gen.feedback == (1, 1)
    assert gen.memory == 1


def test_parse_generators():
    (gen,) = tlc.parse_generators("5/7")
    assert gen == tlc.RationalGenerator((1, 0, 1), (1, 1, 1))

    first, second = tlc.parse_generators("5,3/7")
    assert first.feedforward == (1, 0, 1)
    assert second.feedforward == (1, 1)
    assert first.feedback == second.feedback == (1, 1, 1)

    with pytest.raises(tlc.ConfigError, match="not a valid octal"):
        tlc.parse_generators("9/7")
    with pytest.raises(tlc.ConfigError, match="nonzero"):
        tlc.parse_generators("0/7")
    with pytest.raises(tlc.ConfigError, match="not a valid generator"):
        tlc.parse_generators("1,/7")
    with pytest.raises(tlc.ConfigError, match="memory"):
        tlc.parse_generators("1")


def test_build_trellis(rsc, bcc_trellis):
    assert rsc.state_count == 4
    assert rsc.input_arity == rsc.output_arity == 1
    assert rsc.port_count == 2
    assert rsc.memory == 2
    assert len(rsc.edges) == 8
    assert str(rsc) == "5/7"
    assert rsc.is_invertible()

    assert bcc_trellis.state_count == 4
    assert bcc_trellis.input_arity == 2
    assert bcc_trellis.output_arity == 1
    assert bcc_trellis.tail_row is None
    assert not bcc_trellis.is_invertible()
    assert str(bcc_trellis) == "5,3/7"

    with pytest.raises(tlc.ConfigError, match="at most two"):
        tlc.build_trellis(tlc.parse_generators("5,3/7") * 2)
    with pytest.raises(tlc.ConfigError, match="share the feedback"):
        tlc.build_trellis(tlc.parse_generators("5/7") + tlc.parse_generators("1/3"))


def test_non_recursive_warning(caplog):
    with caplog.at_level(logging.WARNING, logger="tlcpy.trellis"):
        tlc.build_trellis(tlc.parse_generators("5"))
    assert "is not recursive" in caplog.text


def test_impulse_response(rsc):
    out = tlc.encode(rsc, [1, 0, 0, 0, 0, 0, 0, 0])
    assert out.tolist() == [1, 1, 1, 0, 1, 1, 0, 1]


def test_shift_register(rsc):
    # Feedback 1+D+D², feedforward 1+D²; bit 0 of the state is w[t-1].
    table = rsc.transitions()
    for s in range(4):
        w1, w2 = s & 1, s >> 1
        for a in (0, 1):
            w = a ^ w1 ^ w2
            assert table[s][a] == (w | w1 << 1, w ^ w2)


@pytest.mark.parametrize("generator", ["5/7", "1/3", "5,3/7"])
def test_linearity(generator):
    trellis = tlc.default_trellis(generator)
    k = trellis.input_arity
    rng = np.random.default_rng(11)
    for _ in range(100):
        length = k * int(rng.integers(1, 65))
        a = rng.integers(0, 2, size=length, dtype=np.uint8)
        b = rng.integers(0, 2, size=length, dtype=np.uint8)
        assert (tlc.encode(trellis, a ^ b) == tlc.encode(trellis, a) ^ tlc.encode(trellis, b)).all()
        if k == 1:
            term = tlc.Termination.zero_tail(trellis)
            combined = tlc.encode(trellis, a ^ b, term)
            assert (combined == tlc.encode(trellis, a, term) ^ tlc.encode(trellis, b, term)).all()


def test_accumulator(accumulator):
    assert tlc.encode(accumulator, [1, 0, 1, 1, 0]).tolist() == [1, 1, 0, 1, 1]


def test_two_input_encoder(bcc_trellis):
    # The first input passes through (1+D²)/(1+D+D²), the second through
    # (1+D)/(1+D+D²); the output is their sum.
    first = tlc.default_trellis("5/7")
    second = tlc.default_trellis("3/7")
    rng = np.random.default_rng(3)
    a = rng.integers(0, 2, size=40, dtype=np.uint8)
    b = rng.integers(0, 2, size=40, dtype=np.uint8)
    bits = np.stack([a, b], axis=1).ravel()
    expected = tlc.encode(first, a) ^ tlc.encode(second, b)
    assert tlc.encode(bcc_trellis, bits).tolist() == expected.tolist()

    with pytest.raises(ValueError, match="divisible"):
        tlc.encode(bcc_trellis, [1, 0, 1])


def test_invert(rsc):
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, size=64, dtype=np.uint8)
    assert tlc.invert(rsc, tlc.encode(rsc, bits)).tolist() == bits.tolist()

    with pytest.raises(ValueError, match="not invertible"):
        tlc.invert(tlc.default_trellis("5,3/7"), [0, 1])


def test_zero_tail(rsc):
    term = tlc.Termination.zero_tail(rsc)
    assert term.mode == "zero-tail"
    assert term.length == 2
    table = rsc.transitions()
    for start, tail in enumerate(term.tails):
        state = start
        for a in tail:
            state = table[state][a][0]
        assert state == 0

    bits = [1, 1, 0, 1, 0, 0, 1]
    out = tlc.encode(rsc, bits, term)
    assert len(out) == len(bits) + 2
    _, state = _run(rsc, bits)
    assert out[:len(bits)].tolist() == tlc.encode(rsc, bits).tolist()
    assert out[len(bits):].tolist() == [table[state][term.tails[state][0]][1], out[-1]]

    with pytest.raises(tlc.ConfigError, match="single-input"):
        tlc.Termination.zero_tail(tlc.default_trellis("5,3/7"))
    with pytest.raises(tlc.ConfigError, match="termination mode"):
        tlc.Termination("tail-biting")


def test_reversed(rsc):
    rev = rsc.reversed()
    assert rev.is_reversed
    assert {(e.end, e.start) for e in rev.edges} == {(e.start, e.end) for e in rsc.edges}
    assert rev.reversed().edges == rsc.edges
    with pytest.raises(ValueError, match="no transition table"):
        rev.transitions()
