import dataclasses as dc
import logging
from typing import NamedTuple, Tuple

import numpy as np

from .code import ConcreteCode
from .exceptions import InconsistencyError
from .settings import resolve
from .transfer import CONFLICT, ERASED, _decode_codes, knowledge_tables

__all__ = [
    "DecodeResult",
    "ErasureDecoder",
    "ErasureWord",
    "bp_decode",
]

logger = logging.getLogger(__name__)


@dc.dataclass(frozen=True, eq=False)
class ErasureWord:
    """A received word over the BEC: per transmitted bit 0, 1, or
    :data:`ERASED` (2)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.uint8).ravel()
        if (values > ERASED).any():
            raise ValueError("erasure word values must be 0, 1 or 2")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_bits(cls, bits, erased) -> "ErasureWord":
        """Erase the positions of *bits* where the boolean *erased* is set."""
        bits = np.asarray(bits, dtype=np.uint8)
        erased = np.asarray(erased, dtype=bool)
        if bits.shape != erased.shape:
            raise ValueError("bits and erasure mask must have the same length")
        return cls(np.where(erased, ERASED, bits))

    def __len__(self):
        return len(self.values)

    @property
    def erased_count(self) -> int:
        return int((self.values == ERASED).sum())


class DecodeResult(NamedTuple):
    #: Decoded information bits: 0, 1 or ERASED.
    u: np.ndarray
    iterations: int
    #: Per iteration, the erased fractions of the extrinsic messages leaving
    #: the trellises on input ports and on output ports.
    trace: Tuple[Tuple[float, float], ...]

    @property
    def erased(self) -> int:
        return int((self.u == ERASED).sum())


class _FactorLayout:
    def __init__(self, factor, start):
        self.factor = factor
        self.tables = knowledge_tables(factor.trellis)
        self.shape = factor.bits.shape
        self.slice = slice(start, start + factor.bits.size)
        self.weights = 3 ** np.arange(factor.trellis.port_count)
        self.end_mask = 1 if factor.terminated else self.tables.full_mask


class ErasureDecoder:
    """Flooding erasure BP on a concrete code.

    Every iteration runs the set-valued BCJR sweep of every trellis segment
    and then updates all variable nodes, where a known value beats an
    erasure. A bit that receives both values raises
    :class:`~tlcpy.InconsistencyError`.
    """

    def __init__(self, code: ConcreteCode):
        self.code = code
        self.bit_count = code.bit_count
        self.layouts = []
        edge_bits = []
        input_edges = []
        start = 0
        for f in code.factors:
            layout = _FactorLayout(f, start)
            self.layouts.append(layout)
            edge_bits.append(f.bits.ravel())
            k = f.trellis.input_arity
            is_input = np.zeros(f.bits.shape, dtype=bool)
            is_input[:, :k] = True
            # Tail sections are not part of the trace.
            is_input[f.tail] = False
            input_edges.append(is_input.ravel())
            start += f.bits.size
        self.edge_bits = np.concatenate(edge_bits)
        self.input_edges = np.concatenate(input_edges)
        data = np.concatenate([np.repeat(~f.tail, f.trellis.port_count) for f in code.factors])
        self.output_edges = data & ~self.input_edges

    def _votes(self, hits):
        votes = np.bincount(self.edge_bits, weights=hits.astype(float), minlength=self.bit_count)
        return votes.astype(np.int64)

    def _counts(self, channel, ext):
        c0 = (channel == 0) + self._votes(ext == 0)
        c1 = (channel == 1) + self._votes(ext == 1)
        bad = np.flatnonzero((c0 > 0) & (c1 > 0))
        if bad.size:
            bit = int(bad[0])
            raise InconsistencyError(f"bit {bit} received both 0 and 1", bit=bit)
        return c0, c1

    def _sweep(self, layout, vf):
        obs = vf[layout.slice].reshape(layout.shape)
        codes = (obs.astype(np.int64) @ layout.weights).tolist()
        out = []
        for start, stop in layout.factor.segments:
            out.extend(layout.tables.sweep(codes[start:stop], 1, layout.end_mask))
        ext = _decode_codes(out, layout.shape[1], 4)
        if (ext == CONFLICT).any():
            row = int(np.flatnonzero((ext == CONFLICT).any(axis=1))[0])
            raise InconsistencyError(
                f"trellis {layout.factor.name} found no path through section {row}",
                bit=int(layout.factor.bits[row, 0]),
            )
        return ext.astype(np.uint8).ravel()

    def decode(self, received: ErasureWord, max_iter=None) -> DecodeResult:
        code = self.code
        max_iter = resolve(max_iter, "decode_max_iter")
        if max_iter < 1:
            raise ValueError("max_iter must be positive")
        if len(received) != len(code.transmitted):
            raise ValueError(
                f"received word has length {len(received)}, expected {len(code.transmitted)}"
            )
        channel = np.full(self.bit_count, ERASED, dtype=np.uint8)
        channel[code.transmitted] = received.values
        ext = np.full(len(self.edge_bits), ERASED, dtype=np.uint8)
        trace = []
        iterations = 0
        c0, c1 = self._counts(channel, ext)
        for iterations in range(1, max_iter + 1):
            bits = self.edge_bits
            e0 = c0[bits] - (ext == 0)
            e1 = c1[bits] - (ext == 1)
            vf = np.where(e0 > 0, 0, np.where(e1 > 0, 1, ERASED)).astype(np.uint8)

            new = np.concatenate([self._sweep(layout, vf) for layout in self.layouts])
            changed = bool((new != ext).any())
            ext = new
            erased = ext == ERASED
            trace.append((
                float(erased[self.input_edges].mean()) if self.input_edges.any() else 0.0,
                float(erased[self.output_edges].mean()) if self.output_edges.any() else 0.0,
            ))

            c0, c1 = self._counts(channel, ext)
            info = code.info
            u = np.where(c0[info] > 0, 0, np.where(c1[info] > 0, 1, ERASED)).astype(np.uint8)
            if not (u == ERASED).any() or not changed:
                break
        logger.debug("decoded after %d iterations, %d information erasures", iterations, int((u == ERASED).sum()))
        return DecodeResult(u, iterations, tuple(trace))


def bp_decode(code: ConcreteCode, received: ErasureWord, max_iter=None) -> DecodeResult:
    """Decode *received* by erasure BP and return the decoded information
    bits and the number of iterations.

    Over the BEC the decoder never outputs a wrong bit: each information bit
    is either recovered or left erased.
    """
    return ErasureDecoder(code).decode(received, max_iter)
