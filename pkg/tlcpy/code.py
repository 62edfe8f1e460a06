"""Finite-length codes drawn from a compact graph, and their encoder."""

import dataclasses as dc
import functools
import logging
import math
from fractions import Fraction
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .exceptions import ConfigError, InconsistencyError, SingularFeedbackError
from .graph import CompactGraph
from .rng import _check_seed, derive_seed, make_rng
from .trellis import Termination, Trellis, _parity

__all__ = [
    "ConcreteCode",
    "ConcreteFactor",
    "ConcreteVariable",
    "codeword",
    "encode_code",
    "instantiate",
]

logger = logging.getLogger(__name__)

_seen_seeds: Dict[int, Tuple[str, int]] = {}


@dc.dataclass(frozen=True, eq=False)
class ConcreteVariable:
    name: str
    role: str
    offset: int
    length: int
    #: Sorted positions, within the variable, of the bits that are sent.
    transmitted: np.ndarray

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + self.length)


@dc.dataclass(frozen=True, eq=False)
class ConcreteFactor:
    name: str
    trellis: Trellis
    #: Global bit index per section and trellis port, inputs first.
    bits: np.ndarray
    #: Section ranges ``(start, stop)`` of the segments, tails included.
    segments: Tuple[Tuple[int, int], ...]
    #: Whether a section is a termination section.
    tail: np.ndarray
    terminated: bool

    @property
    def sections(self) -> int:
        return len(self.bits)


@dc.dataclass(frozen=True, eq=False)
class ConcreteCode:
    """A code of information length *N* drawn from *graph*.

    All bits of the code live in one global index space: the variables of the
    graph in order, followed by the termination bits of every factor.
    """

    graph: CompactGraph
    N: int
    seed: int
    termination: str
    variables: Tuple[ConcreteVariable, ...]
    factors: Tuple[ConcreteFactor, ...]
    #: Permutation arrays by ``"<factor>.<side><index>"``.
    permutations: Mapping[str, np.ndarray]

    @property
    def bit_count(self) -> int:
        last = self.variables[-1]
        return last.offset + last.length

    @functools.cached_property
    def transmitted(self) -> np.ndarray:
        """Global indices of the transmitted bits, in transmission order."""
        parts = [v.offset + v.transmitted for v in self.variables]
        return np.concatenate(parts).astype(np.int64)

    @functools.cached_property
    def info(self) -> np.ndarray:
        parts = [v.indices for v in self.variables if v.role == "information"]
        return np.concatenate(parts)

    @property
    def design_rate(self) -> Fraction:
        return self.graph.rate

    @property
    def effective_rate(self) -> Fraction:
        return Fraction(len(self.info), len(self.transmitted))

    def variable(self, name) -> ConcreteVariable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def bits_of(self, values, name) -> np.ndarray:
        """Return the part of the global bit array *values* that belongs to
        the variable *name*."""
        v = self.variable(name)
        return np.asarray(values)[v.offset:v.offset + v.length]

    @functools.cached_property
    def feedback(self):
        """The solution of the encoder's feedback equations, or ``None`` for
        a causal code. See :func:`encode_code`."""
        return _solve_feedback(self)


def _check_n(N):
    if isinstance(N, bool) or not isinstance(N, (int, np.integer)):
        raise TypeError(f"N must be an integer (got type {N.__class__.__name__})")
    if N < 1:
        raise ValueError("N must be positive")
    return int(N)


def _resolve_termination(graph, termination):
    if termination is None:
        if all(f.trellis.tail_row is not None for f in graph.factors):
            return "zero-tail"
        logger.info("%s has a multi-input trellis, leaving it unterminated", graph.name)
        return "unterminated"
    if termination not in ("zero-tail", "unterminated"):
        raise ConfigError(f"{termination!r} is not a valid termination mode", key="termination")
    return termination


def _note_seed(graph, N, seed):
    key = (graph.name, N)
    previous = _seen_seeds.setdefault(seed, key)
    if previous != key:
        logger.warning(
            "seed %d was already used for %s with N=%d; the two codes share their random draws",
            seed, previous[0], previous[1],
        )
        _seen_seeds[seed] = key


def _survivors(rng, rho, length):
    # Nearest integer, ties away from zero.
    count = min(length, math.floor(rho * length + 0.5))
    if count >= length:
        return np.arange(length)
    if count <= 0:
        return np.zeros(0, dtype=np.int64)
    return np.sort(rng.choice(length, size=count, replace=False))


def _port_permutation(port, size, seed, fi, pn):
    perm = port.permutation
    if perm == "identity":
        return np.arange(size)
    if perm == "uniform-random":
        return make_rng(seed, "permutation", fi, pn).permutation(size)
    if perm.size != size:
        raise ConfigError(f"permutation of size {perm.size} does not fit a port of length {size}", key="N")
    return perm.instantiate(derive_seed(seed, "permutation", fi, pn))


def instantiate(
    graph: CompactGraph,
    N: int,
    seed=0,
    termination: Optional[str] = None,
    encodable=False,
    attempts=16,
) -> ConcreteCode:
    """Draw a code of information length *N* from *graph*.

    Random permutations and puncturing patterns derive from *seed*.
    *termination* is ``"zero-tail"`` (the default when every trellis
    supports it) or ``"unterminated"``. With *encodable* set, seeds whose
    feedback equations are singular are replaced by derived seeds, up to
    *attempts* times, and the returned code is guaranteed to encode.
    """
    N = _check_n(N)
    seed = _check_seed(seed)
    if not encodable:
        return _instantiate(graph, N, seed, termination)

    current = seed
    for attempt in range(attempts):
        code = _instantiate(graph, N, current, termination)
        try:
            code.feedback
        except SingularFeedbackError as err:
            logger.warning("%s; resampling", err.message)
            current = derive_seed(seed, "resample", attempt + 1)
            continue
        return code
    raise SingularFeedbackError(
        f"no encodable code of {graph.name} with N={N} in {attempts} attempts", seed=seed,
    )


def _instantiate(graph, N, seed, termination):
    _note_seed(graph, N, seed)
    termination = _resolve_termination(graph, termination)

    variables = []
    offsets = {}
    pos = 0
    for vi, v in enumerate(graph.variables):
        length = v.multiplier * N
        rng = make_rng(seed, "puncture", vi)
        variables.append(ConcreteVariable(v.name, v.role, pos, length, _survivors(rng, v.rho, length)))
        offsets[v.name] = pos
        pos += length

    factors = []
    permutations = {}
    for fi, f in enumerate(graph.factors):
        trellis = f.trellis
        P = trellis.port_count
        size = f.multiplier * N
        terminated = termination == "zero-tail"
        if terminated:
            Termination.zero_tail(trellis)
        m = trellis.memory if terminated else 0

        # Rows of the data sections and of the tail sections, segment by segment.
        data_rows = []
        tail_rows = []
        segments = []
        row = 0
        for seg in f.segments:
            length = seg * N
            data_rows.append(np.arange(row, row + length))
            tail_rows.append(np.arange(row + length, row + length + m))
            segments.append((row, row + length + m))
            row += length + m
        data_rows = np.concatenate(data_rows)
        tail_rows = np.concatenate(tail_rows).astype(np.int64)

        bits = np.full((row, P), -1, dtype=np.int64)
        for port in f.ports:
            pn = f.port_number(port)
            mux = np.concatenate([
                offsets[name] + np.arange(graph.variable_map[name].multiplier * N) for name in port.variables
            ])
            perm = _port_permutation(port, size, seed, fi, pn)
            permutations[f"{f.name}.{port.side}{port.index}"] = perm
            bits[data_rows, pn] = mux[perm]

        tail = np.zeros(row, dtype=bool)
        tail[tail_rows] = True
        if len(tail_rows):
            count = len(tail_rows) * P
            bits[tail_rows] = (pos + np.arange(count)).reshape(-1, P)
            variables.append(ConcreteVariable(f"tail:{f.name}", "tail", pos, count, np.arange(count)))
            pos += count
        factors.append(ConcreteFactor(f.name, trellis, bits, tuple(segments), tail, terminated))

    return ConcreteCode(
        graph=graph,
        N=N,
        seed=seed,
        termination=termination,
        variables=tuple(variables),
        factors=tuple(factors),
        permutations=permutations,
    )


class _LinearTrellis:
    """The next-state and output maps of a trellis as XOR rules."""

    def __init__(self, trellis):
        table = trellis.transitions()
        m, k = trellis.memory, trellis.input_arity
        from_state = [table[1 << i][0] for i in range(m)]
        from_input = [table[0][1 << j] for j in range(k)]
        self.memory = m
        self.next_rules = [
            (
                [i for i in range(m) if (from_state[i][0] >> r) & 1],
                [j for j in range(k) if (from_input[j][0] >> r) & 1],
            )
            for r in range(m)
        ]
        self.out_rules = [
            (
                [i for i in range(m) if (from_state[i][1] >> o) & 1],
                [j for j in range(k) if (from_input[j][1] >> o) & 1],
            )
            for o in range(trellis.output_arity)
        ]
        self.tail_rule = (
            [i for i in range(m) if (trellis.tail_row >> i) & 1] if trellis.tail_row is not None else None
        )

    @staticmethod
    def _apply(rule, state, inputs):
        si, ii = rule
        x = 0
        for i in si:
            x ^= state[i]
        for j in ii:
            x ^= inputs[j]
        return x

    def step(self, state, inputs):
        outs = [self._apply(r, state, inputs) for r in self.out_rules]
        return [self._apply(r, state, inputs) for r in self.next_rules], outs

    def tail_input(self, state):
        x = 0
        for i in self.tail_rule:
            x ^= state[i]
        return x


def _unknown_bits(code):
    """Return the parity bits that some trellis consumes before they are
    produced, in order of first consumption."""
    stride = max(f.sections for f in code.factors) + 1
    produced = np.full(code.bit_count, -1, dtype=np.int64)
    for fi, f in enumerate(code.factors):
        k = f.trellis.input_arity
        rank = fi * stride + np.arange(f.sections)
        for p in range(k, f.trellis.port_count):
            produced[f.bits[:, p]] = rank
        produced[f.bits[f.tail, :k].ravel()] = np.repeat(rank[f.tail], k)
    late = []
    for fi, f in enumerate(code.factors):
        k = f.trellis.input_arity
        rank = fi * stride + np.arange(f.sections)
        data = ~f.tail
        consumed = f.bits[data, :k]
        mask = produced[consumed] >= rank[data][:, None]
        late.append(consumed[mask])
    late = np.concatenate(late) if late else np.zeros(0, dtype=np.int64)
    _, first = np.unique(late, return_index=True)
    return late[np.sort(first)]


def _solve_feedback(code):
    unknown = _unknown_bits(code)
    if not len(unknown):
        return None

    K = len(code.info)
    symbol = {int(b): 1 << i for i, b in enumerate(code.info)}
    for j, b in enumerate(unknown):
        symbol[int(b)] = 1 << (K + j)
    forms = {}
    pending = set(symbol)
    for f in code.factors:
        lin = _LinearTrellis(f.trellis)
        k = f.trellis.input_arity
        for start, stop in f.segments:
            state = [0] * lin.memory
            for t in range(start, stop):
                row = f.bits[t]
                if f.tail[t]:
                    inputs = [lin.tail_input(state)]
                    forms[int(row[0])] = inputs[0]
                else:
                    inputs = []
                    for b in row[:k]:
                        b = int(b)
                        inputs.append(forms[b] if b in forms and b not in pending else symbol[b])
                state, outs = lin.step(state, inputs)
                for o, b in enumerate(row[k:]):
                    b = int(b)
                    forms[b] = outs[o]
                    pending.discard(b)

    rows = [forms[int(b)] ^ (1 << (K + j)) for j, b in enumerate(unknown)]
    solution, deficiency = _eliminate(rows, K, len(unknown))
    if deficiency:
        raise SingularFeedbackError(
            f"feedback equations of {code.graph.name} with seed {code.seed} are singular",
            seed=code.seed,
            rank_deficiency=deficiency,
        )
    logger.debug("solved %d feedback bits of %s", len(unknown), code.graph.name)
    return unknown, solution


def _eliminate(rows, K, count):
    """Solve ``z = M u`` from GF(2) rows over ``u`` (bits below *K*) and
    ``z`` (bits from *K*). Return the masks of ``M`` and the rank
    deficiency of the system."""
    pivots = {}
    for row in rows:
        while True:
            z = row >> K
            if not z:
                break
            col = (z & -z).bit_length() - 1
            if col in pivots:
                row ^= pivots[col]
            else:
                pivots[col] = row
                break
    if len(pivots) < count:
        return None, count - len(pivots)
    low = (1 << K) - 1
    solution = [0] * count
    for col in sorted(pivots, reverse=True):
        row = pivots[col]
        mask = row & low
        z = (row >> K) & ~(1 << col)
        while z:
            c = (z & -z).bit_length() - 1
            mask ^= solution[c]
            z &= z - 1
        solution[col] = mask
    return solution, 0


def _as_message(code, u):
    u = np.asarray(u, dtype=np.uint8).ravel()
    if len(u) != len(code.info):
        raise ValueError(f"message length {len(u)} does not match the code's {len(code.info)} information bits")
    if (u > 1).any():
        raise ValueError("message must be binary")
    return u


def codeword(code: ConcreteCode, u) -> np.ndarray:
    """Return every bit of the codeword of *u*, in the global index space."""
    u = _as_message(code, u)
    values = np.zeros(code.bit_count, dtype=np.uint8)
    values[code.info] = u
    preset = {}
    if code.feedback is not None:
        unknown, masks = code.feedback
        packed = int.from_bytes(np.packbits(u, bitorder="little").tobytes(), "little")
        for b, mask in zip(unknown.tolist(), masks):
            preset[b] = _parity(mask & packed)
            values[b] = preset[b]
    vals = values.tolist()

    for f in code.factors:
        table = f.trellis.transitions()
        k = f.trellis.input_arity
        tail_row = f.trellis.tail_row
        rows = f.bits.tolist()
        tails = f.tail.tolist()
        for start, stop in f.segments:
            state = 0
            for t in range(start, stop):
                row = rows[t]
                if tails[t]:
                    a = _parity(state & tail_row)
                    vals[row[0]] = a
                else:
                    a = 0
                    for j in range(k):
                        a |= vals[row[j]] << j
                state, y = table[state][a]
                for o, b in enumerate(row[k:]):
                    bit = (y >> o) & 1
                    if b in preset and preset[b] != bit:
                        raise InconsistencyError(
                            f"feedback bit {b} was solved as {preset[b]} but encodes to {bit}", bit=b,
                        )
                    vals[b] = bit
    return np.asarray(vals, dtype=np.uint8)


def encode_code(code: ConcreteCode, u) -> np.ndarray:
    """Encode the message *u* and return the transmitted bits.

    Parity bits that the trellis consumes before producing them (feedback in
    an acausal self-concatenated or braided encoder) are solved once per code
    as GF(2) linear functions of the message. A singular system raises
    :class:`~tlcpy.SingularFeedbackError` naming the code's seed.
    """
    return codeword(code, u)[code.transmitted]
