"""Extrinsic erasure transfer functions of trellis decoding over the BEC.

Over the BEC, BCJR decoding keeps for every trellis boundary only the set of
states that are still possible. For the all-zero codeword and i.i.d.
erasures, these knowledge sets form a Markov chain whose stationary
distributions, combined with the erasure pattern of one section, give the
exact probability that an extrinsic estimate stays erased.
"""

import dataclasses as dc
import functools
import logging
from typing import Dict, Sequence, Tuple

import numpy as np

from .exceptions import ConvergenceError, InconsistencyError
from .rng import make_rng
from .settings import resolve
from .trellis import Trellis, _run

__all__ = [
    "ExactTransfer",
    "KnowledgeDistribution",
    "KnowledgeTables",
    "MonteCarloTransfer",
    "TransferPoint",
    "backward_chain",
    "exact_transfer",
    "forward_chain",
    "monte_carlo_transfer",
    "transfer",
    "transfer_grid",
]

logger = logging.getLogger(__name__)

#: Observation code of an erased bit. Known bits are coded by their value.
ERASED = 2
#: Extrinsic code of a bit whose consistent values are empty.
CONFLICT = 3


def _check_probability(name, value):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be between 0 and 1")
    return float(value)


def _port_erasures(trellis, y1, y2):
    y1 = _check_probability("y1", y1)
    y2 = _check_probability("y2", y2)
    return (y1,) * trellis.input_arity + (y2,) * trellis.output_arity


def _edge_bits(trellis):
    """Return per edge the tuple of port bits, input ports first."""
    k, n = trellis.input_arity, trellis.output_arity
    return [
        tuple((e.input >> j) & 1 for j in range(k)) + tuple((e.output >> j) & 1 for j in range(n))
        for e in trellis.edges
    ]


def _zero_consistent(bits, pattern):
    # A port that is not erased observed the value 0.
    return all(b == 0 or (pattern >> p) & 1 for p, b in enumerate(bits))


@dc.dataclass(frozen=True)
class KnowledgeDistribution:
    """A distribution over knowledge sets. Each set is a bitmask over the
    trellis states."""

    masks: Tuple[int, ...]
    probabilities: np.ndarray

    def as_dict(self) -> Dict[int, float]:
        return {m: float(p) for m, p in zip(self.masks, self.probabilities) if p > 0}

    def mass(self, predicate) -> float:
        """Return the total probability of the sets satisfying *predicate*."""
        return float(sum(p for m, p in zip(self.masks, self.probabilities) if predicate(m)))

    def singleton_mass(self) -> float:
        return self.mass(lambda m: m & (m - 1) == 0)


class _Chain:
    """Knowledge sets reachable from {0} and their transition matrices per
    erasure pattern."""

    def __init__(self, trellis):
        self.port_count = trellis.port_count
        bits = _edge_bits(trellis)
        patterns = range(1 << self.port_count)
        masks = [1]
        index = {1: 0}
        steps = []
        i = 0
        while i < len(masks):
            mask = masks[i]
            row = []
            for pat in patterns:
                nxt = 0
                for e, b in zip(trellis.edges, bits):
                    if (mask >> e.start) & 1 and _zero_consistent(b, pat):
                        nxt |= 1 << e.end
                if nxt not in index:
                    index[nxt] = len(masks)
                    masks.append(nxt)
                row.append(index[nxt])
            steps.append(row)
            i += 1

        self.masks = tuple(masks)
        self.index = index
        size = len(masks)
        self.matrices = np.zeros((len(patterns), size, size))
        for src, row in enumerate(steps):
            for pat, dst in enumerate(row):
                self.matrices[pat, src, dst] = 1.0

    def matrix(self, weights):
        return np.tensordot(weights, self.matrices, axes=1)


def _pattern_bits(port_count):
    pats = np.arange(1 << port_count)
    return ((pats[:, None] >> np.arange(port_count)) & 1).astype(bool)


def _pattern_weights(erasures, bits):
    e = np.asarray(erasures, dtype=float)
    return np.prod(np.where(bits, e, 1.0 - e), axis=1)


def _limit(P, tol, max_squarings):
    """Return the limit distribution of the chain *P* started in state 0."""
    for damped in (False, True):
        M = (P + np.eye(len(P))) / 2 if damped else P.copy()
        if damped:
            logger.warning("knowledge-set chain oscillates, switching to the lazy chain")
        v = M[0].copy()
        converged = False
        for _ in range(max_squarings):
            M = M @ M
            M /= M.sum(axis=1, keepdims=True)
            v_new = M[0]
            if np.abs(v_new - v).max() < tol:
                v = v_new
                converged = True
                break
            v = v_new.copy()
        residual = float(np.abs(v @ P - v).max())
        if converged and residual < max(tol * 1e3, 1e-9):
            v = np.clip(v, 0.0, None)
            return v / v.sum()
    raise ConvergenceError("knowledge-set chain did not reach a stationary distribution", residual=residual)


class ExactTransfer:
    """The exact extrinsic erasure transfer function of a trellis.

    Ports are numbered input ports first, then output ports. Calling the
    object with ``(y1, y2)`` applies *y1* to every input port and *y2* to every
    output port and returns the port-averaged ``(f1, f2)``.
    """

    def __init__(self, trellis: Trellis):
        self.trellis = trellis
        self.port_count = trellis.port_count
        self._forward = _Chain(trellis)
        self._backward = _Chain(trellis.reversed())
        self._bits = _pattern_bits(self.port_count)
        self._erased = self._erasure_tensors(trellis)

    def _erasure_tensors(self, trellis):
        bits = _edge_bits(trellis)
        fwd, bwd = self._forward.masks, self._backward.masks
        tensors = np.zeros((self.port_count, 1 << self.port_count, len(fwd), len(bwd)))
        for p in range(self.port_count):
            for pat in range(1 << self.port_count):
                if not (pat >> p) & 1:
                    continue
                for i, a in enumerate(fwd):
                    for j, b in enumerate(bwd):
                        for e, eb in zip(trellis.edges, bits):
                            if (
                                eb[p] and (a >> e.start) & 1 and (b >> e.end) & 1 and
                                _zero_consistent(eb, pat)
                            ):
                                tensors[p, pat, i, j] = 1.0
                                break
        return tensors

    def _distribution(self, chain, erasures, tol, max_squarings):
        erasures = [_check_probability("erasure probability", e) for e in erasures]
        if len(erasures) != self.port_count:
            raise ValueError(f"expected {self.port_count} erasure probabilities, got {len(erasures)}")
        weights = _pattern_weights(erasures, self._bits)
        probs = _limit(
            chain.matrix(weights),
            resolve(tol, "chain_tol"),
            resolve(max_squarings, "chain_max_squarings"),
        )
        return KnowledgeDistribution(chain.masks, probs)

    def forward(self, erasures, tol=None, max_squarings=None) -> KnowledgeDistribution:
        """Stationary distribution of the forward knowledge set."""
        return self._distribution(self._forward, erasures, tol, max_squarings)

    def backward(self, erasures, tol=None, max_squarings=None) -> KnowledgeDistribution:
        """Stationary distribution of the backward knowledge set."""
        return self._distribution(self._backward, erasures, tol, max_squarings)

    def extrinsic(self, erasures: Sequence[float]) -> np.ndarray:
        """Return the extrinsic erasure probability of every port, given the
        erasure probability of the messages entering every port."""
        alpha = self.forward(erasures).probabilities
        beta = self.backward(erasures).probabilities
        e = np.asarray(erasures, dtype=float)
        out = np.empty(self.port_count)
        for p in range(self.port_count):
            # The port's own message never counts: treat it as erased.
            own = e.copy()
            own[p] = 1.0
            weights = _pattern_weights(own, self._bits)
            out[p] = np.einsum("q,qij,i,j->", weights, self._erased[p], alpha, beta)
        return np.clip(out, 0.0, 1.0)

    def __call__(self, y1, y2) -> Tuple[float, float]:
        k = self.trellis.input_arity
        f = self.extrinsic(_port_erasures(self.trellis, y1, y2))
        return float(f[:k].mean()), float(f[k:].mean())


@functools.lru_cache(maxsize=None)
def exact_transfer(trellis: Trellis) -> ExactTransfer:
    """Return the shared :class:`ExactTransfer` of *trellis*."""
    return ExactTransfer(trellis)


def forward_chain(trellis: Trellis, y1, y2) -> KnowledgeDistribution:
    """Stationary distribution of the forward knowledge set when input bits
    are erased with probability *y1* and output bits with probability
    *y2*."""
    return exact_transfer(trellis).forward(_port_erasures(trellis, y1, y2))


def backward_chain(trellis: Trellis, y1, y2) -> KnowledgeDistribution:
    """Stationary distribution of the backward knowledge set, the mirror of
    :func:`forward_chain` on the time-reversed trellis."""
    return exact_transfer(trellis).backward(_port_erasures(trellis, y1, y2))


def transfer(trellis: Trellis, y1, y2) -> Tuple[float, float]:
    """Return the exact extrinsic erasure probabilities ``(f1, f2)`` toward
    the input edge and the parity edge of *trellis*."""
    return exact_transfer(trellis)(y1, y2)


@dc.dataclass(frozen=True)
class TransferPoint:
    y1: float
    y2: float
    f1: float
    f2: float

    def __post_init__(self):
        for name in ("y1", "y2", "f1", "f2"):
            _check_probability(name, getattr(self, name))


def transfer_grid(trellis: Trellis, points=21):
    """Evaluate :func:`transfer` on a *points* × *points* grid of the unit
    square, *y1* varying slowest."""
    grid = np.linspace(0.0, 1.0, points)
    func = exact_transfer(trellis)
    result = []
    for y1 in grid:
        for y2 in grid:
            f1, f2 = func(y1, y2)
            result.append(TransferPoint(float(y1), float(y2), f1, f2))
    return result


class _ObservationTable(dict):
    def __init__(self, compute):
        super().__init__()
        self.compute = compute

    def __missing__(self, key):
        value = self[key] = self.compute(key)
        return value


class KnowledgeTables:
    """Memoized set-valued BCJR steps on a trellis with actual bit values.

    Observations are coded per section as ``sum(obs[p] * 3**p)`` with
    ``obs[p]`` being 0, 1 or :data:`ERASED`. Extrinsic results are coded as
    ``sum(ext[p] * 4**p)`` with ``ext[p]`` being 0, 1, :data:`ERASED` or
    :data:`CONFLICT`.
    """

    def __init__(self, trellis: Trellis):
        self.trellis = trellis
        self.port_count = trellis.port_count
        self.code_count = 3 ** self.port_count
        self.mask_count = 1 << trellis.state_count
        self.full_mask = self.mask_count - 1
        self._edges = list(zip(trellis.edges, _edge_bits(trellis)))
        self.forward = _ObservationTable(self._forward)
        self.backward = _ObservationTable(self._backward)
        self.extrinsic = _ObservationTable(self._extrinsic)

    def _obs(self, code):
        obs = []
        for _ in range(self.port_count):
            code, o = divmod(code, 3)
            obs.append(o)
        return obs

    @staticmethod
    def _consistent(bits, obs, skip=-1):
        return all(o == ERASED or o == b or p == skip for p, (b, o) in enumerate(zip(bits, obs)))

    def _forward(self, key):
        mask, code = divmod(key, self.code_count)
        obs = self._obs(code)
        nxt = 0
        for e, bits in self._edges:
            if (mask >> e.start) & 1 and self._consistent(bits, obs):
                nxt |= 1 << e.end
        return nxt

    def _backward(self, key):
        mask, code = divmod(key, self.code_count)
        obs = self._obs(code)
        prev = 0
        for e, bits in self._edges:
            if (mask >> e.end) & 1 and self._consistent(bits, obs):
                prev |= 1 << e.start
        return prev

    def _extrinsic(self, key):
        rest, code = divmod(key, self.code_count)
        a, b = divmod(rest, self.mask_count)
        obs = self._obs(code)
        result = 0
        for p in range(self.port_count):
            values = set()
            for e, bits in self._edges:
                if (a >> e.start) & 1 and (b >> e.end) & 1 and self._consistent(bits, obs, skip=p):
                    values.add(bits[p])
            if not values:
                value = CONFLICT
            elif len(values) == 2:
                value = ERASED
            else:
                value = values.pop()
            result += value * 4 ** p
        return result

    def sweep(self, codes, start_mask=1, end_mask=None):
        """Run the forward and backward recursions over one segment and
        return the extrinsic code of every section."""
        if end_mask is None:
            end_mask = self.full_mask
        fwd, bwd, ext = self.forward, self.backward, self.extrinsic
        nc, nm = self.code_count, self.mask_count
        alphas = [start_mask]
        a = start_mask
        for c in codes:
            a = fwd[a * nc + c]
            alphas.append(a)
        betas = [end_mask] * (len(codes) + 1)
        b = end_mask
        for t in range(len(codes) - 1, -1, -1):
            b = bwd[b * nc + codes[t]]
            betas[t] = b
        return [ext[(alphas[t] * nm + betas[t + 1]) * nc + c] for t, c in enumerate(codes)]


@functools.lru_cache(maxsize=None)
def knowledge_tables(trellis: Trellis) -> KnowledgeTables:
    return KnowledgeTables(trellis)


def _decode_codes(codes, port_count, base):
    codes = np.asarray(codes, dtype=np.int64)
    return (codes[:, None] // base ** np.arange(port_count)) % base


def _simulate_extrinsic(trellis, erasures, sections, seed, batches=100):
    rng = make_rng(seed, "mc-transfer")
    k, n = trellis.input_arity, trellis.output_arity
    symbols = rng.integers(0, 1 << k, size=sections)
    outputs, _ = _run(trellis, symbols.tolist())
    values = np.concatenate([
        (symbols[:, None] >> np.arange(k)) & 1,
        (np.asarray(outputs)[:, None] >> np.arange(n)) & 1,
    ], axis=1)
    erased = rng.random((sections, k + n)) < np.asarray(erasures)
    obs = np.where(erased, ERASED, values)
    codes = (obs * 3 ** np.arange(k + n)).sum(axis=1).tolist()
    ext = _decode_codes(knowledge_tables(trellis).sweep(codes), k + n, 4)
    if (ext == CONFLICT).any():
        raise InconsistencyError("erasure BCJR produced a conflict on a valid codeword")
    hits = (ext == ERASED).astype(float)
    estimate = hits.mean(axis=0)
    # Extrinsic erasures of neighbouring sections are correlated, so the
    # standard error comes from batch means.
    usable = sections - sections % batches
    means = hits[:usable].reshape(batches, -1, k + n).mean(axis=1)
    stderr = means.std(axis=0, ddof=1) / np.sqrt(batches)
    return estimate, stderr


def monte_carlo_transfer(trellis: Trellis, y1, y2, sections=None, seed=0):
    """Estimate ``(f1, f2)`` by running erasure BCJR on one long trellis.

    Returns ``(f1, f2, (stderr1, stderr2))``. The same *seed* always gives the
    same result.
    """
    sections = resolve(sections, "mc_sections")
    if sections < 10_000:
        raise ValueError("sections must be at least 10000")
    k = trellis.input_arity
    estimate, stderr = _simulate_extrinsic(trellis, _port_erasures(trellis, y1, y2), sections, seed)
    return (
        float(estimate[:k].mean()),
        float(estimate[k:].mean()),
        (float(stderr[:k].mean()), float(stderr[k:].mean())),
    )


class MonteCarloTransfer:
    """A drop-in replacement of :class:`ExactTransfer` that estimates the
    per-port extrinsic erasure probabilities by simulation."""

    def __init__(self, trellis: Trellis, sections=None, seed=0):
        self.trellis = trellis
        self.port_count = trellis.port_count
        self.sections = resolve(sections, "mc_sections")
        self.seed = seed

    def extrinsic(self, erasures) -> np.ndarray:
        erasures = [_check_probability("erasure probability", e) for e in erasures]
        estimate, _ = _simulate_extrinsic(self.trellis, erasures, self.sections, self.seed)
        return estimate

    def __call__(self, y1, y2) -> Tuple[float, float]:
        k = self.trellis.input_arity
        f = self.extrinsic(_port_erasures(self.trellis, y1, y2))
        return float(f[:k].mean()), float(f[k:].mean())
