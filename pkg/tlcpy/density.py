"""Density evolution over the BEC and the BP and MAP thresholds it gives.

Two evolutions share the threshold searches: the closed form of the unified
family, driven by :class:`UnifiedParams`, and flooding message passing on the
erasure probabilities of any :class:`CompactGraph`.
"""

import dataclasses as dc
import logging
from typing import List, NamedTuple, Tuple

import numpy as np

from .exceptions import ConvergenceError
from .graph import CompactGraph, UnifiedParams, default_trellis
from .settings import get_settings, resolve
from .transfer import exact_transfer

__all__ = [
    "ChannelParam",
    "DERun",
    "DEState",
    "GraphDERun",
    "ThresholdResult",
    "bp_threshold",
    "de_run",
    "de_step",
    "exit_curve",
    "graph_bp_threshold",
    "graph_de_run",
    "graph_exit_curve",
    "graph_map_threshold",
    "map_threshold",
]

logger = logging.getLogger(__name__)


def _check_probability(name, value):
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must be between 0 and 1")
    return value


@dc.dataclass(frozen=True)
class ChannelParam:
    """The erasure probability ε of a BEC."""

    epsilon: float

    def __post_init__(self):
        object.__setattr__(self, "epsilon", _check_probability("epsilon", self.epsilon))

    def __float__(self):
        return self.epsilon


def _epsilon(value):
    if isinstance(value, ChannelParam):
        return value.epsilon
    return _check_probability("epsilon", value)


@dc.dataclass(frozen=True)
class DEState:
    """Extrinsic erasure probabilities leaving the trellis toward its input
    edge (*x1*) and its parity edge (*x2*) after *iteration* iterations, and
    the a-posteriori erasure probability *p_a* of the information bits."""

    x1: float = 1.0
    x2: float = 1.0
    iteration: int = 0
    p_a: float = 1.0

    def __post_init__(self):
        for name in ("x1", "x2", "p_a"):
            _check_probability(name, getattr(self, name))


class DERun(NamedTuple):
    converged: bool
    final: DEState
    trace: Tuple[DEState, ...]


class GraphDERun(NamedTuple):
    converged: bool
    #: Erasure probability of the message each edge of ``graph.edges``
    #: carries from its factor to its variable.
    erasures: np.ndarray
    iterations: int
    p_a: float
    trace: Tuple[np.ndarray, ...] = ()


@dc.dataclass(frozen=True)
class ThresholdResult:
    """A threshold estimate within the bracket ``[lo, hi]``.

    *flag* is ``"converges-everywhere"`` or ``"never-converges"`` for
    degenerate ensembles, and ``"bp"`` for a MAP search that fell back to the
    BP threshold.
    """

    threshold: float
    lo: float
    hi: float
    tolerance: float
    iterations: int
    method: str = "bp"
    flag: str = ""

    def __post_init__(self):
        if not self.lo <= self.threshold <= self.hi:
            raise ValueError("threshold must lie inside its bracket")
        if self.hi - self.lo > self.tolerance * (1 + 1e-9):
            raise ValueError("bracket is wider than the tolerance")

    def as_record(self) -> dict:
        return dc.asdict(self)


def _default_transfer():
    return exact_transfer(default_trellis())


class _UnifiedEvolution:
    def __init__(self, params: UnifiedParams, transfer=None):
        self.params = params
        self.transfer = transfer or _default_transfer()
        p = params
        rho2 = 0.0 if p.l2 == 0 else p.rho2
        self.sent = p.rho1 * p.l1 + rho2 * p.l2
        self.rho2 = rho2
        self.rate = 1.0 / (1.0 + self.sent)

    def start(self, eps):
        return DEState(1.0, 1.0, 0, eps)

    def step(self, eps, state):
        p = self.params
        q, l2 = p.q, p.l2
        ch1 = p.rho1 * eps + 1.0 - p.rho1
        ch2 = self.rho2 * eps + 1.0 - self.rho2
        y1 = (q * eps * state.x1 ** (q - 1) + l2 * ch2 * state.x2) / (q + l2)
        y2 = (l2 * ch2 * state.x1 + p.l1 * ch1) / (q + l2)
        x1, x2 = self.transfer(min(max(y1, 0.0), 1.0), min(max(y2, 0.0), 1.0))
        return DEState(x1, x2, state.iteration + 1, eps * x1 ** q)

    @staticmethod
    def delta(old, new):
        return abs(new.x1 - old.x1) + abs(new.x2 - old.x2)

    @staticmethod
    def p_a(state):
        return state.p_a

    def exit_value(self, state):
        p = self.params
        x1, x2 = state.x1, state.x2
        return (x1 ** p.q + p.rho1 * p.l1 * x2 + self.rho2 * p.l2 * x1 * x2) / (1.0 + self.sent)


class _GraphState(NamedTuple):
    messages: np.ndarray
    iteration: int
    p_a: float


class _GraphEvolution:
    def __init__(self, graph: CompactGraph, transfers=None):
        self.graph = graph
        transfers = dict(transfers or {})
        index = {v.name: i for i, v in enumerate(graph.variables)}
        self.rho = np.array([v.rho for v in graph.variables])
        self.weight = np.array([v.rho * v.multiplier for v in graph.variables])
        self.info = [i for i, v in enumerate(graph.variables) if v.role == "information"]
        self.var_edges = [[] for _ in graph.variables]
        self.factors = []
        e = 0
        for f in graph.factors:
            ports = []
            for port in f.ports:
                edges, weights = [], []
                for name in port.variables:
                    self.var_edges[index[name]].append(e)
                    edges.append(e)
                    weights.append(graph.variable_map[name].multiplier)
                    e += 1
                ports.append((f.port_number(port), edges, np.array(weights, dtype=float) / sum(weights)))
            transfer = transfers.get(f.name) or exact_transfer(f.trellis)
            self.factors.append((f.trellis.port_count, ports, transfer))
        self.edge_count = e
        self.edge_var = np.empty(e, dtype=int)
        for i, edges in enumerate(self.var_edges):
            self.edge_var[edges] = i
        self.rate = float(graph.rate)

    def _p_a(self, eps, messages):
        values = [eps * np.prod(messages[self.var_edges[i]]) for i in self.info]
        return float(np.mean(values))

    def start(self, eps):
        return _GraphState(np.ones(self.edge_count), 0, eps)

    def step(self, eps, state):
        msgs = state.messages
        channel = self.rho * eps + 1.0 - self.rho
        to_factor = np.empty(self.edge_count)
        for i, edges in enumerate(self.var_edges):
            for e in edges:
                others = [msgs[o] for o in edges if o != e]
                to_factor[e] = channel[i] * (np.prod(others) if others else 1.0)
        new = np.empty(self.edge_count)
        for port_count, ports, transfer in self.factors:
            inputs = np.empty(port_count)
            for number, edges, weights in ports:
                inputs[number] = min(max(float(weights @ to_factor[edges]), 0.0), 1.0)
            ext = transfer.extrinsic(inputs)
            for number, edges, _ in ports:
                new[edges] = ext[number]
        return _GraphState(new, state.iteration + 1, self._p_a(eps, new))

    @staticmethod
    def delta(old, new):
        return float(np.abs(new.messages - old.messages).sum())

    @staticmethod
    def p_a(state):
        return state.p_a

    def exit_value(self, state):
        ext = np.array([np.prod(state.messages[edges]) for edges in self.var_edges])
        return float(self.weight @ ext / self.weight.sum())


def _iterate(evo, eps, state, max_iter, tol, target=None, trace=None):
    """Iterate *evo* from *state* until the step size falls below *tol*,
    *max_iter* steps were made, or ``p_a`` falls below *target*."""
    for _ in range(max_iter):
        new = evo.step(eps, state)
        delta = evo.delta(state, new)
        state = new
        if trace is not None:
            trace.append(new)
        if target is not None and evo.p_a(state) < target:
            break
        if delta < tol:
            break
    return state


def _limits(max_iter, tol):
    max_iter = resolve(max_iter, "de_max_iter")
    tol = resolve(tol, "de_tol")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be positive")
    return max_iter, tol


def de_step(params: UnifiedParams, epsilon, state: DEState, transfer=None) -> DEState:
    """Apply one iteration of the unified-family density evolution."""
    return _UnifiedEvolution(params, transfer).step(_epsilon(epsilon), state)


def de_run(params: UnifiedParams, epsilon, transfer=None, max_iter=None, tol=None) -> DERun:
    """Run density evolution from ``x1 = x2 = 1`` until ``|Δx1| + |Δx2|``
    drops below *tol* or *max_iter* iterations were made.

    The run has converged if the final ``p_a`` is below the ``p_target``
    setting.
    """
    eps = _epsilon(epsilon)
    max_iter, tol = _limits(max_iter, tol)
    evo = _UnifiedEvolution(params, transfer)
    trace = []
    final = _iterate(evo, eps, evo.start(eps), max_iter, tol, trace=trace)
    converged = final.p_a < get_settings().p_target
    logger.debug("DE at eps=%.6f: %d iterations, p_a=%.3e", eps, final.iteration, final.p_a)
    return DERun(converged, final, tuple(trace))


def graph_de_run(graph: CompactGraph, epsilon, transfers=None, max_iter=None, tol=None, trace=False) -> GraphDERun:
    """Run flooding density evolution on *graph*.

    *transfers* optionally maps factor names to objects with an
    ``extrinsic(erasures)`` method (such as :class:`~tlcpy.MonteCarloTransfer`);
    the others use the exact transfer of their trellis.
    """
    eps = _epsilon(epsilon)
    max_iter, tol = _limits(max_iter, tol)
    evo = _GraphEvolution(graph, transfers)
    steps = [] if trace else None
    final = _iterate(evo, eps, evo.start(eps), max_iter, tol, trace=steps)
    converged = final.p_a < get_settings().p_target
    logger.debug("graph DE of %s at eps=%.6f: %d iterations, p_a=%.3e", graph.name, eps, final.iteration, final.p_a)
    return GraphDERun(
        converged,
        final.messages,
        final.iteration,
        final.p_a,
        tuple(s.messages for s in steps) if trace else (),
    )


def _converges(evo, eps, max_iter, tol, target):
    state = _iterate(evo, eps, evo.start(eps), max_iter, tol, target=target)
    return evo.p_a(state) < target


def _bp_search(evo, tol, max_iter=None, de_tol=None):
    tol = resolve(tol, "bp_tol")
    if tol <= 0:
        raise ValueError("tol must be positive")
    max_iter, de_tol = _limits(max_iter, de_tol)
    target = get_settings().p_target

    if _converges(evo, 1.0, max_iter, de_tol, target):
        return ThresholdResult(1.0, 1.0, 1.0, tol, 1, flag="converges-everywhere")
    if not _converges(evo, 0.0, max_iter, de_tol, target):
        return ThresholdResult(0.0, 0.0, 0.0, tol, 2, flag="never-converges")
    lo, hi = 0.0, 1.0
    steps = 2
    while hi - lo > tol:
        mid = (lo + hi) / 2
        steps += 1
        if _converges(evo, mid, max_iter, de_tol, target):
            lo = mid
        else:
            hi = mid
        logger.debug("BP bisection: [%.6f, %.6f]", lo, hi)
    return ThresholdResult((lo + hi) / 2, lo, hi, tol, steps)


def bp_threshold(params: UnifiedParams, transfer=None, tol=None) -> ThresholdResult:
    """Return the BP threshold of *params* by bisection of :func:`de_run`
    convergence on [0, 1]."""
    result = _bp_search(_UnifiedEvolution(params, transfer), tol)
    logger.info("BP threshold %.5f", result.threshold)
    return result


def graph_bp_threshold(graph: CompactGraph, transfers=None, tol=None) -> ThresholdResult:
    """Return the BP threshold of *graph* by bisection of
    :func:`graph_de_run` convergence."""
    result = _bp_search(_GraphEvolution(graph, transfers), tol)
    logger.info("%s: BP threshold %.5f", graph.name, result.threshold)
    return result


class _NonMonotone(Exception):
    pass


def _grid(grid):
    grid = resolve(grid, "map_grid")
    if not 0 < grid <= 1e-3:
        raise ValueError("grid must be positive and at most 1e-3")
    return grid


def _exit_points(evo, grid, max_iter, tol, target):
    """Yield ``(eps, h, state)`` from ε = 1 downward, warm-starting every
    point from the fixed point of the previous one. Stops after the first
    point where DE converges."""
    steps = int(round(1.0 / grid))
    state = evo.start(1.0)
    prev_h = None
    for k in range(steps + 1):
        eps = max(1.0 - k * grid, 0.0)
        state = _iterate(evo, eps, state, max_iter, tol, target=target)
        if evo.p_a(state) < target:
            yield eps, 0.0, state
            return
        h = evo.exit_value(state)
        if prev_h is not None and h > prev_h + 1e-8:
            raise _NonMonotone(eps)
        prev_h = h
        yield eps, h, state


def _area_search(evo, grid, tol, max_iter, de_tol, target):
    rate = evo.rate
    area = 0.0
    prev = None
    steps = 0
    for eps, h, state in _exit_points(evo, grid, max_iter, de_tol, target):
        steps += 1
        if prev is not None:
            b, h_b, state_b = prev
            cell = (b - eps) * (h + h_b) / 2
            if area + cell >= rate:
                return _refine(evo, area, rate, eps, b, h_b, state_b, tol, max_iter, de_tol, target, steps)
            area += cell
        prev = (eps, h, state)
        if h == 0.0:
            break
    return None


def _refine(evo, area, rate, a, b, h_b, state_b, tol, max_iter, de_tol, target, steps):
    """Find the root of the area balance inside the grid cell [a, b]."""
    lo, hi = a, b
    while hi - lo > tol:
        mid = (lo + hi) / 2
        steps += 1
        state = _iterate(evo, mid, state_b, max_iter, de_tol, target=target)
        h = 0.0 if evo.p_a(state) < target else evo.exit_value(state)
        if area + (b - mid) * (h + h_b) / 2 >= rate:
            lo = mid
        else:
            hi = mid
    return ThresholdResult((lo + hi) / 2, lo, hi, tol, steps, method="map")


def _map_search(evo, grid, tol):
    grid = _grid(grid)
    tol = resolve(tol, "map_tol")
    if tol <= 0:
        raise ValueError("tol must be positive")
    max_iter, de_tol = _limits(None, None)
    target = get_settings().p_target
    for _ in range(4):
        try:
            result = _area_search(evo, grid, tol, max_iter, de_tol, target)
            break
        except _NonMonotone as err:
            logger.warning("EXIT curve is not monotone near eps=%.4f, refining the grid", err.args[0])
            grid /= 2
    else:
        raise ConvergenceError("EXIT curve stays non-monotone after refining the grid")
    if result is None:
        # The area never reaches the rate above the BP jump.
        bp = _bp_search(evo, tol)
        return dc.replace(bp, method="map", flag="bp")
    return result


def map_threshold(params: UnifiedParams, transfer=None, grid=None, tol=None) -> ThresholdResult:
    """Return the MAP threshold of *params* from the area theorem.

    The BP EXIT function h(ε) is the extrinsic erasure probability at the DE
    fixed point, averaged over all transmitted bits (information, and the
    surviving fractions of v⁽¹⁾ and v⁽²⁾). The MAP threshold is the ε at
    which the area under h from ε to 1 equals the design rate. The curve is
    sampled from ε = 1 downward on a grid of step *grid*, and the root is
    refined by bisection inside its grid cell down to *tol*.
    """
    result = _map_search(_UnifiedEvolution(params, transfer), grid, tol)
    logger.info("MAP threshold %.5f", result.threshold)
    return result


def graph_map_threshold(graph: CompactGraph, transfers=None, grid=None, tol=None) -> ThresholdResult:
    """Return the MAP threshold of *graph* with the EXIT normalization of
    :func:`map_threshold`."""
    result = _map_search(_GraphEvolution(graph, transfers), grid, tol)
    logger.info("%s: MAP threshold %.5f", graph.name, result.threshold)
    return result


def _curve(evo, grid):
    grid = _grid(grid)
    max_iter, de_tol = _limits(None, None)
    target = get_settings().p_target
    points = [(eps, h) for eps, h, _ in _exit_points(evo, grid, max_iter, de_tol, target)]
    steps = int(round(1.0 / grid))
    # DE converges at every smaller ε too.
    points.extend((max(1.0 - k * grid, 0.0), 0.0) for k in range(len(points), steps + 1))
    return sorted(points)


def exit_curve(params: UnifiedParams, transfer=None, grid=None) -> List[Tuple[float, float]]:
    """Return the ``(eps, h)`` points of the BP EXIT curve used by
    :func:`map_threshold`, in increasing order of ε."""
    return _curve(_UnifiedEvolution(params, transfer), grid)


def graph_exit_curve(graph: CompactGraph, transfers=None, grid=None) -> List[Tuple[float, float]]:
    return _curve(_GraphEvolution(graph, transfers), grid)
