import dataclasses as dc
import functools
import logging
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ConfigError

__all__ = [
    "RationalGenerator",
    "Termination",
    "Trellis",
    "TrellisEdge",
    "build_trellis",
    "encode",
    "invert",
    "parse_generators",
]

logger = logging.getLogger(__name__)

TERMINATION_MODES = {"zero-tail", "unterminated"}


def _strip(coeffs):
    coeffs = list(coeffs)
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


def _from_octal(text, what):
    text = text.strip()
    try:
        value = int(text, 8)
    except ValueError:
        raise ConfigError(f"{text!r} is not a valid octal {what}", key="generator") from None
    if value <= 0:
        raise ConfigError(f"{what} must be a nonzero polynomial", key="generator")
    # The most significant bit is the coefficient of D^0.
    return tuple(int(c) for c in format(value, "b"))


def _to_octal(coeffs):
    return format(int("".join(map(str, coeffs)), 2), "o")


@dc.dataclass(frozen=True)
class RationalGenerator:
    """A rate-1 convolutional encoder with the transfer function
    *feedforward* / *feedback* over GF(2).

    Both polynomials are coefficient tuples, lowest degree first. Use
    :meth:`from_octal` to create a generator from the usual octal notation,
    where the most significant bit is the coefficient of D⁰::

        >>> RationalGenerator.from_octal("5/7")
        RationalGenerator(feedforward=(1, 0, 1), feedback=(1, 1, 1))
    """

    feedforward: Tuple[int, ...]
    feedback: Tuple[int, ...] = (1,)

    def __post_init__(self):
        for name in ("feedforward", "feedback"):
            coeffs = tuple(int(c) for c in getattr(self, name))
            if not coeffs or any(c not in (0, 1) for c in coeffs):
                raise ConfigError(f"{name} must be a nonempty sequence of binary coefficients", key="generator")
            object.__setattr__(self, name, _strip(coeffs))
        if self.feedback[0] != 1:
            raise ConfigError("feedback polynomial must have a constant term of 1", key="generator")
        if not any(self.feedforward):
            raise ConfigError("feedforward polynomial must be nonzero", key="generator")
        if self.memory < 1:
            raise ConfigError("generator memory must be at least 1", key="generator")

    @classmethod
    def from_octal(cls, text: str) -> "RationalGenerator":
        """Parse ``"F/B"`` (or a bare ``"F"`` for a feedforward encoder)."""
        ff, sep, fb = text.partition("/")
        feedback = _from_octal(fb, "feedback") if sep else (1,)
        return cls(_from_octal(ff, "feedforward"), feedback)

    @property
    def memory(self) -> int:
        return max(len(self.feedforward), len(self.feedback)) - 1

    @property
    def is_recursive(self) -> bool:
        return len(self.feedback) > 1

    def __str__(self):
        return f"{_to_octal(self.feedforward)}/{_to_octal(self.feedback)}"


def parse_generators(text: str) -> Tuple[RationalGenerator, ...]:
    """Parse ``"5/7"`` into one generator or ``"5,3/7"`` into the generators
    of a two-input encoder with the shared feedback ``7``."""
    ffs, sep, fb = text.partition("/")
    parts = [p for p in ffs.split(",")]
    if not all(p.strip() for p in parts):
        raise ConfigError(f"{text!r} is not a valid generator", key="generator")
    suffix = f"/{fb}" if sep else ""
    return tuple(RationalGenerator.from_octal(p + suffix) for p in parts)


class TrellisEdge(NamedTuple):
    start: int
    end: int
    input: int
    output: int


@dc.dataclass(frozen=True)
class Trellis:
    """The state-transition graph of a convolutional encoder.

    Input symbols are integers whose bit *j* is the bit on input port *j*;
    output symbols likewise. Create trellises with :func:`build_trellis`.
    """

    state_count: int
    input_arity: int
    output_arity: int
    edges: Tuple[TrellisEdge, ...]
    generators: Tuple[RationalGenerator, ...] = ()
    #: State bits whose parity is the input that clears the newest register;
    #: ``None`` if zero-tail termination is not available.
    tail_row: Optional[int] = None
    is_reversed: bool = False

    @property
    def memory(self) -> int:
        return self.state_count.bit_length() - 1

    @property
    def port_count(self) -> int:
        return self.input_arity + self.output_arity

    def transitions(self):
        """Return the ``(next_state, output)`` table indexed by
        ``[state][input]``."""
        if self.is_reversed:
            raise ValueError("a reversed trellis has no transition table")
        return _transition_table(self)

    def step(self, state, symbol):
        return _transition_table(self)[state][symbol]

    def reversed(self) -> "Trellis":
        """Return the time-reversed trellis, whose edges run from the end
        state to the start state."""
        edges = tuple(TrellisEdge(e.end, e.start, e.input, e.output) for e in self.edges)
        return dc.replace(self, edges=edges, is_reversed=not self.is_reversed, tail_row=None)

    def is_invertible(self) -> bool:
        """Whether the input symbol is determined by the state and the output
        symbol."""
        if self.is_reversed or self.input_arity != self.output_arity:
            return False
        for row in self.transitions():
            if len({out for _, out in row}) != len(row):
                return False
        return True

    def __str__(self):
        if not self.generators:
            return f"Trellis({self.state_count} states)"
        ffs = ",".join(_to_octal(g.feedforward) for g in self.generators)
        return f"{ffs}/{_to_octal(self.generators[0].feedback)}"


@functools.lru_cache(maxsize=None)
def _transition_table(trellis):
    table = [[None] * (1 << trellis.input_arity) for _ in range(trellis.state_count)]
    for e in trellis.edges:
        table[e.start][e.input] = (e.end, e.output)
    if any(entry is None for row in table for entry in row):
        raise ValueError("trellis is not deterministic")
    return tuple(tuple(row) for row in table)


def _parity(x):
    return bin(x).count("1") & 1


def _pad(coeffs, n):
    return tuple(coeffs) + (0,) * (n - len(coeffs))


def build_trellis(gens: Sequence[RationalGenerator]) -> Trellis:
    """Build the trellis of the encoder given by one or two generators.

    A single generator is realized in controllable canonical form, where the
    state holds the last *m* feedback-register values. Two generators must
    share their feedback polynomial and make a two-input, single-output
    encoder, realized in observer canonical form.
    """
    if isinstance(gens, RationalGenerator):
        gens = (gens,)
    gens = tuple(gens)
    if not gens:
        raise ConfigError("at least one generator is required", key="generator")
    if len(gens) > 2:
        raise ConfigError("at most two generators are supported", key="generator")
    if len({g.feedback for g in gens}) != 1:
        raise ConfigError("generators of a multi-input encoder must share the feedback", key="generator")
    for g in gens:
        if not g.is_recursive:
            logger.warning("generator %s is not recursive", g)

    m = max(g.memory for g in gens)
    if len(gens) == 1:
        edges, tail_row = _controllable_form(gens[0], m)
    else:
        edges, tail_row = _observer_form(gens, m), None
    return Trellis(
        state_count=1 << m,
        input_arity=len(gens),
        output_arity=1,
        edges=tuple(edges),
        generators=gens,
        tail_row=tail_row,
    )


def _controllable_form(gen, m):
    f = _pad(gen.feedforward, m + 1)
    g = _pad(gen.feedback, m + 1)
    # State bit i-1 holds w[t-i].
    fb_row = sum(g[i] << (i - 1) for i in range(1, m + 1))
    ff_row = sum(f[i] << (i - 1) for i in range(1, m + 1))
    mask = (1 << m) - 1
    edges = []
    for s in range(1 << m):
        for a in (0, 1):
            w = a ^ _parity(s & fb_row)
            y = (f[0] & w) ^ _parity(s & ff_row)
            edges.append(TrellisEdge(s, ((s << 1) | w) & mask, a, y))
    return edges, fb_row


def _observer_form(gens, m):
    fs = [_pad(g.feedforward, m + 1) for g in gens]
    g = _pad(gens[0].feedback, m + 1)
    edges = []
    for s in range(1 << m):
        for a in range(1 << len(gens)):
            u = [(a >> j) & 1 for j in range(len(gens))]
            y = (s & 1) ^ _parity(sum(fs[j][0] & u[j] for j in range(len(gens))))
            ns = 0
            for k in range(1, m + 1):
                # Register k sits at bit k-1; register m+1 is always zero.
                bit = (s >> k) & 1 if k < m else 0
                for j in range(len(gens)):
                    bit ^= fs[j][k] & u[j]
                bit ^= g[k] & y
                ns |= bit << (k - 1)
            edges.append(TrellisEdge(s, ns, a, y))
    return edges


@dc.dataclass(frozen=True)
class Termination:
    """How a trellis segment ends.

    Under ``"zero-tail"`` termination *tails* holds, for every state, the
    input symbols that drive the encoder from that state to state 0.
    """

    mode: str = "unterminated"
    tails: Tuple[Tuple[int, ...], ...] = ()

    def __post_init__(self):
        if self.mode not in TERMINATION_MODES:
            raise ConfigError(f"{self.mode!r} is not a valid termination mode", key="termination")

    @classmethod
    def unterminated(cls) -> "Termination":
        return cls("unterminated")

    @classmethod
    def zero_tail(cls, trellis: Trellis) -> "Termination":
        if trellis.tail_row is None:
            raise ConfigError("zero-tail termination requires a single-input trellis", key="termination")
        table = trellis.transitions()
        tails = []
        for start in range(trellis.state_count):
            state, seq = start, []
            for _ in range(trellis.memory):
                a = _parity(state & trellis.tail_row)
                seq.append(a)
                state = table[state][a][0]
            assert state == 0, "tail must end in state 0"
            tails.append(tuple(seq))
        return cls("zero-tail", tuple(tails))

    @classmethod
    def from_mode(cls, mode, trellis) -> "Termination":
        if mode == "zero-tail":
            return cls.zero_tail(trellis)
        return cls(mode)

    @property
    def length(self) -> int:
        return len(self.tails[0]) if self.tails else 0


def _symbols(bits, arity):
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size % arity:
        raise ValueError(f"input length {bits.size} is not divisible by the input arity {arity}")
    weights = 1 << np.arange(arity)
    return (bits.reshape(-1, arity) * weights).sum(axis=1).tolist()


def _run(trellis, symbols, state=0):
    table = trellis.transitions()
    out = []
    for a in symbols:
        state, y = table[state][a]
        out.append(y)
    return out, state


def _bits(symbols, arity):
    symbols = np.asarray(symbols, dtype=np.int64)
    return ((symbols[:, None] >> np.arange(arity)) & 1).astype(np.uint8).ravel()


def encode(trellis: Trellis, bits, termination: Termination = None, state=0) -> np.ndarray:
    """Encode *bits* starting from *state* and return the output bits.

    Input bits are grouped per section, port 0 first. Under zero-tail
    termination the outputs of the tail sections are appended.
    """
    symbols = _symbols(bits, trellis.input_arity)
    out, state = _run(trellis, symbols, state)
    if termination is not None and termination.mode == "zero-tail":
        tail_out, state = _run(trellis, termination.tails[state], state)
        out.extend(tail_out)
    return _bits(out, trellis.output_arity) if out else np.zeros(0, dtype=np.uint8)


def invert(trellis: Trellis, bits, state=0) -> np.ndarray:
    """Recover the input of an invertible encoder from its output bits by
    re-encoding, starting from *state*."""
    if not trellis.is_invertible():
        raise ValueError("trellis is not invertible")
    table = trellis.transitions()
    inverse = [{y: (a, ns) for a, (ns, y) in enumerate(row)} for row in table]
    inputs = []
    for y in _symbols(bits, trellis.output_arity):
        a, state = inverse[state][y]
        inputs.append(a)
    return _bits(inputs, trellis.input_arity) if inputs else np.zeros(0, dtype=np.uint8)
