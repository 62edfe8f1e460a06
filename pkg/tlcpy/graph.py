"""Compact graphs of turbo-like code ensembles.

A compact graph has one factor node per trellis and one variable node per
bit sequence. Lengths are multipliers in units of the information length N,
so a graph describes a whole ensemble; :func:`tlcpy.instantiate` turns it
into a concrete code of a given length.
"""

import dataclasses as dc
import functools
import json
from collections import Counter
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Optional, Tuple, Union

from .exceptions import ConfigError
from .permutation import PermutationBlock, PermutationDescriptor, equivalent_permutation
from .trellis import Trellis, build_trellis, parse_generators
from .unset import ABSENT, AbsentType

__all__ = [
    "CLASSES",
    "CLASS_PARAMS",
    "CompactGraph",
    "DEFAULT_BCC_GENERATOR",
    "DEFAULT_GENERATOR",
    "DEFAULT_HCC_INNER",
    "Edge",
    "FactorNode",
    "FactorPort",
    "UnifiedParams",
    "VariableNode",
    "default_trellis",
    "design_rate",
    "original_ensemble",
    "rate_compatible_family",
    "repeat_accumulate",
    "self_concatenated_ensemble",
    "unified_ensemble",
]


DEFAULT_GENERATOR = "5/7"
DEFAULT_BCC_GENERATOR = "5,3/7"
ACCUMULATOR = "1/3"
DEFAULT_HCC_INNER = ACCUMULATOR

CLASSES = ("PCC", "SCC", "HCC", "BCC")
ROLES = {"information", "parity"}
PERMUTATION_KINDS = {"identity", "uniform-random"}


@functools.lru_cache(maxsize=None)
def default_trellis(generator=DEFAULT_GENERATOR) -> Trellis:
    """Return the (cached) trellis of the octal *generator*."""
    return build_trellis(parse_generators(generator))


def _fraction(value) -> Fraction:
    return Fraction(value).limit_denominator(1_000_000)


def _check_rho(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, float, Fraction)):
        raise ConfigError(f"{name} must be a number (got type {value.__class__.__name__})", key=name)
    if not 0 <= value <= 1:
        raise ConfigError(f"{name} must be between 0 and 1", key=name)
    return float(value)


@dc.dataclass(frozen=True)
class UnifiedParams:
    """One member of the unified turbo-like family.

    The trellis input is the information sequence repeated *q* times plus
    the feedback part v⁽²⁾ of the parity (multiplier *l2*); the parity, of
    multiplier *l*, splits into v⁽¹⁾ (*l1*) and v⁽²⁾ (*l2*). *rho1* and *rho2*
    are the fractions of v⁽¹⁾ and v⁽²⁾ that survive puncturing. *rho2* is
    :data:`~tlcpy.unset.ABSENT` when *l2* is 0.
    """

    l: int
    l1: int
    l2: int
    rho1: float
    rho2: Union[float, AbsentType] = ABSENT
    q: int = 2

    def __post_init__(self):
        for name in ("l", "l1", "l2", "q"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{name} must be an integer (got type {value.__class__.__name__})", key=name)
            if value < 0:
                raise ConfigError(f"{name} must be non-negative", key=name)
        if self.q < 1:
            raise ConfigError("q must be positive", key="q")
        if self.l != self.l1 + self.l2:
            raise ConfigError(f"l must equal l1 + l2 (got {self.l} != {self.l1} + {self.l2})", key="l")
        if self.l != self.q + self.l2:
            raise ConfigError(f"l must equal q + l2 (got {self.l} != {self.q} + {self.l2})", key="l")
        object.__setattr__(self, "rho1", _check_rho("rho1", self.rho1))
        if self.l2 == 0:
            object.__setattr__(self, "rho2", ABSENT)
        elif self.rho2 is ABSENT:
            raise ConfigError("rho2 is required when l2 is positive", key="rho2")
        else:
            object.__setattr__(self, "rho2", _check_rho("rho2", self.rho2))

    @property
    def rate(self) -> Fraction:
        return design_rate(self)

    @property
    def channel1(self):
        """Return a function mapping ε to the erasure probability of a v⁽¹⁾
        channel message."""
        return lambda eps: self.rho1 * eps + 1.0 - self.rho1

    @property
    def channel2(self):
        if self.rho2 is ABSENT:
            return lambda eps: 0.0
        return lambda eps: self.rho2 * eps + 1.0 - self.rho2


def design_rate(params: UnifiedParams) -> Fraction:
    """Return ``1 / (1 + ρ₁l₁ + ρ₂l₂)`` as an exact fraction."""
    total = 1 + _fraction(params.rho1) * params.l1
    if params.rho2 is not ABSENT:
        total += _fraction(params.rho2) * params.l2
    return 1 / total


#: The four classic ensembles as members of the unified family.
CLASS_PARAMS = {
    "PCC": UnifiedParams(l=2, l1=2, l2=0, rho1=1.0),
    "SCC": UnifiedParams(l=3, l1=2, l2=1, rho1=1.0, rho2=1.0),
    "BCC": UnifiedParams(l=4, l1=2, l2=2, rho1=0.0, rho2=1.0),
    "HCC": UnifiedParams(l=4, l1=2, l2=2, rho1=1.0, rho2=1.0),
}


@dc.dataclass(frozen=True)
class VariableNode:
    name: str
    role: str
    multiplier: int
    degree: int
    rho: float = 1.0

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigError(f"{self.role!r} is not a valid variable role", key="role")
        if self.multiplier <= 0:
            raise ConfigError(f"multiplier of {self.name!r} must be positive", key="multiplier")
        if self.degree < 1:
            raise ConfigError(f"degree of {self.name!r} must be at least 1", key="degree")
        object.__setattr__(self, "rho", _check_rho("rho", self.rho))


@dc.dataclass(frozen=True)
class FactorPort:
    """One input or output port of a trellis.

    The port sequence is the multiplex of *variables*, in order, reordered by
    *permutation*: either a kind name (``"identity"`` or
    ``"uniform-random"``) or a :class:`PermutationDescriptor` of a fixed
    length. For output ports the same relation holds from the trellis side:
    trellis output position *i* carries multiplex position ``p[i]``.
    """

    side: str
    index: int
    variables: Tuple[str, ...]
    permutation: Union[str, PermutationDescriptor] = "identity"

    def __post_init__(self):
        if self.side not in ("input", "output"):
            raise ConfigError(f"{self.side!r} is not a valid port side", key="side")
        object.__setattr__(self, "variables", tuple(self.variables))
        if not self.variables:
            raise ConfigError("a port needs at least one variable", key="variables")
        if isinstance(self.permutation, str) and self.permutation not in PERMUTATION_KINDS:
            raise ConfigError(f"{self.permutation!r} is not a valid permutation kind", key="permutation")

    @property
    def permutation_kind(self) -> str:
        if isinstance(self.permutation, str):
            return self.permutation
        return self.permutation.kind


@dc.dataclass(frozen=True)
class FactorNode:
    """A trellis of ``multiplier * N`` sections.

    *segments* splits the sections into consecutive trellises that each start
    in state 0; by default there is one segment.
    """

    name: str
    trellis: Trellis
    multiplier: int
    ports: Tuple[FactorPort, ...]
    segments: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "ports", tuple(self.ports))
        if self.multiplier <= 0:
            raise ConfigError(f"multiplier of {self.name!r} must be positive", key="multiplier")
        if self.segments is None:
            object.__setattr__(self, "segments", (self.multiplier,))
        object.__setattr__(self, "segments", tuple(self.segments))
        if sum(self.segments) != self.multiplier or min(self.segments) <= 0:
            raise ConfigError(f"segments of {self.name!r} must be positive and sum to its multiplier", key="segments")
        for side, arity in (("input", self.trellis.input_arity), ("output", self.trellis.output_arity)):
            indices = sorted(p.index for p in self.ports if p.side == side)
            if indices != list(range(arity)):
                raise ConfigError(f"{self.name!r} needs exactly one {side} port per trellis {side}", key="ports")

    def port(self, side, index) -> FactorPort:
        for p in self.ports:
            if p.side == side and p.index == index:
                return p
        raise KeyError((side, index))

    def port_number(self, port: FactorPort) -> int:
        """Return the trellis port number: inputs first, then outputs."""
        if port.side == "input":
            return port.index
        return self.trellis.input_arity + port.index


class Edge(NamedTuple):
    variable: str
    factor: str
    side: str
    port: int


@dc.dataclass(frozen=True)
class CompactGraph:
    name: str
    variables: Tuple[VariableNode, ...]
    factors: Tuple[FactorNode, ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "factors", tuple(self.factors))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ConfigError("variable names must be unique", key="variables")
        if len({f.name for f in self.factors}) != len(self.factors):
            raise ConfigError("factor names must be unique", key="factors")
        if not any(v.role == "information" for v in self.variables):
            raise ConfigError("a graph needs an information variable", key="variables")
        by_name = self.variable_map
        degrees = Counter()
        produced = Counter()
        for factor in self.factors:
            for port in factor.ports:
                total = 0
                for name in port.variables:
                    if name not in by_name:
                        raise ConfigError(f"edge of {factor.name!r} names an unknown variable {name!r}", key=name)
                    total += by_name[name].multiplier
                    degrees[name] += 1
                    if port.side == "output":
                        produced[name] += 1
                if total != factor.multiplier:
                    raise ConfigError(
                        f"{port.side} port {port.index} of {factor.name!r} carries {total}N bits, "
                        f"expected {factor.multiplier}N",
                        key="multiplier",
                    )
                if isinstance(port.permutation, PermutationDescriptor) and port.permutation.size % factor.multiplier:
                    raise ConfigError(
                        f"permutation size of {factor.name!r} does not match its length", key="permutation",
                    )
        for v in self.variables:
            if degrees[v.name] != v.degree:
                raise ConfigError(
                    f"degree of {v.name!r} is {v.degree} but it has {degrees[v.name]} edges", key="degree",
                )
            expected = 0 if v.role == "information" else 1
            if produced[v.name] != expected:
                raise ConfigError(f"{v.name!r} must be produced by exactly {expected} output ports", key="edges")

    @property
    def variable_map(self) -> Mapping[str, VariableNode]:
        return {v.name: v for v in self.variables}

    @property
    def edges(self) -> Tuple[Edge, ...]:
        return tuple(
            Edge(name, f.name, p.side, p.index)
            for f in self.factors
            for p in f.ports
            for name in p.variables
        )

    @property
    def rate(self) -> Fraction:
        info = sum(v.multiplier for v in self.variables if v.role == "information")
        sent = sum(_fraction(v.rho) * v.multiplier for v in self.variables)
        return Fraction(info) / sent

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "rate": str(self.rate),
            "variables": [dc.asdict(v) for v in self.variables],
            "factors": [
                {
                    "name": f.name,
                    "trellis": str(f.trellis),
                    "multiplier": f.multiplier,
                    "segments": list(f.segments),
                    "ports": [
                        {
                            "side": p.side,
                            "index": p.index,
                            "variables": list(p.variables),
                            "permutation": p.permutation_kind,
                        }
                        for p in f.ports
                    ],
                }
                for f in self.factors
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def _require_rate1(trellis, key="generator"):
    if trellis.input_arity != 1 or trellis.output_arity != 1:
        raise ConfigError(f"{trellis} is not a rate-1 trellis", key=key)
    return trellis


def unified_ensemble(params: UnifiedParams, trellis: Trellis = None, name=None) -> CompactGraph:
    """Return the single-trellis compact graph of *params*."""
    trellis = _require_rate1(trellis or default_trellis())
    inputs = ("u",) * params.q
    outputs = ("v1",)
    variables = [
        VariableNode("u", "information", 1, params.q),
        VariableNode("v1", "parity", params.l1, 1, params.rho1),
    ]
    if params.l2:
        inputs += ("v2",)
        outputs += ("v2",)
        variables.append(VariableNode("v2", "parity", params.l2, 2, params.rho2))
    factor = FactorNode(
        "T",
        trellis,
        params.l,
        (
            FactorPort("input", 0, inputs, "uniform-random"),
            FactorPort("output", 0, outputs, "uniform-random" if params.l2 else "identity"),
        ),
    )
    return CompactGraph(name or "unified", tuple(variables), (factor,))


def _perm(perms, key):
    if perms is None or key not in perms:
        return "uniform-random"
    value = perms[key]
    if isinstance(value, PermutationDescriptor):
        return value
    return PermutationDescriptor.explicit(value)


def _in(variables, perm="identity", index=0):
    return FactorPort("input", index, variables, perm)


def _out(name, index=0):
    return FactorPort("output", index, (name,), "identity")


def original_ensemble(
    cls: str,
    trellis: Trellis = None,
    bcc_trellis: Trellis = None,
    perms=None,
    inner_trellis: Trellis = None,
) -> CompactGraph:
    """Return the multi-trellis compact graph of the classic ensemble *cls*.

    *perms* optionally fixes component permutations by name (see
    :func:`tlcpy.equivalent_permutation`); the others are uniform-random.

    The HCC inner encoder is *inner_trellis*, by default the accumulator
    ``1/3``. Pass *trellis* again to get identical components, as the
    bit-exact equivalence with the self-concatenated encoder requires.
    """
    cls = _check_class(cls)
    trellis = _require_rate1(trellis or default_trellis())
    if cls == "PCC":
        variables = (
            VariableNode("u", "information", 1, 2),
            VariableNode("vU", "parity", 1, 1),
            VariableNode("vL", "parity", 1, 1),
        )
        factors = (
            FactorNode("TU", trellis, 1, (_in(("u",)), _out("vU"))),
            FactorNode("TL", trellis, 1, (_in(("u",), _perm(perms, "pi")), _out("vL"))),
        )
    elif cls == "SCC":
        variables = (
            VariableNode("u", "information", 1, 2),
            VariableNode("vO", "parity", 1, 2),
            VariableNode("vI", "parity", 2, 1),
        )
        factors = (
            FactorNode("TO", trellis, 1, (_in(("u",)), _out("vO"))),
            FactorNode("TI", trellis, 2, (_in(("u", "vO"), _perm(perms, "inner")), _out("vI"))),
        )
    elif cls == "HCC":
        inner = _require_rate1(inner_trellis or default_trellis(DEFAULT_HCC_INNER), key="hcc_inner")
        variables = (
            VariableNode("u", "information", 1, 2),
            VariableNode("vU", "parity", 1, 2),
            VariableNode("vL", "parity", 1, 2),
            VariableNode("vI", "parity", 2, 1),
        )
        factors = (
            FactorNode("TU", trellis, 1, (_in(("u",)), _out("vU"))),
            FactorNode("TL", trellis, 1, (_in(("u",), _perm(perms, "lower")), _out("vL"))),
            FactorNode("TI", inner, 2, (_in(("vU", "vL"), _perm(perms, "inner")), _out("vI"))),
        )
    else:
        bcc_trellis = bcc_trellis or default_trellis(DEFAULT_BCC_GENERATOR)
        if bcc_trellis.input_arity != 2 or bcc_trellis.output_arity != 1:
            raise ConfigError(f"{bcc_trellis} is not a rate-2 trellis", key="bcc_generator")
        variables = (
            VariableNode("u", "information", 1, 2),
            VariableNode("vU", "parity", 1, 2),
            VariableNode("vL", "parity", 1, 2),
        )
        factors = (
            FactorNode("TU", bcc_trellis, 1, (
                _in(("u",)),
                _in(("vL",), _perm(perms, "upper"), index=1),
                _out("vU"),
            )),
            FactorNode("TL", bcc_trellis, 1, (
                _in(("u",), _perm(perms, "pi")),
                _in(("vU",), _perm(perms, "lower"), index=1),
                _out("vL"),
            )),
        )
    return CompactGraph(f"original-{cls}", variables, factors)


def _check_class(cls):
    if not isinstance(cls, str) or cls.upper() not in CLASSES:
        raise ConfigError(f"{cls!r} is not a valid ensemble class", key="class")
    return cls.upper()


def self_concatenated_ensemble(
    cls: str,
    trellis: Trellis = None,
    bcc_trellis: Trellis = None,
    perms=None,
) -> CompactGraph:
    """Return the single-trellis graph of *cls*.

    Without *perms* this is the unified-family member of *cls* (for BCC, the
    rate-2 self-concatenated form with uniform-random permutations). With
    *perms*, the permutations are the structured reorderings of
    :func:`tlcpy.equivalent_permutation`, and the trellis is split into
    segments of the component lengths so that the encoder is bit-exact
    equivalent to the original one built from the same *perms*.
    """
    cls = _check_class(cls)
    if cls == "BCC":
        bcc_trellis = bcc_trellis or default_trellis(DEFAULT_BCC_GENERATOR)
        if bcc_trellis.input_arity != 2 or bcc_trellis.output_arity != 1:
            raise ConfigError(f"{bcc_trellis} is not a rate-2 trellis", key="bcc_generator")
        if perms is None:
            first, second, segments = "uniform-random", "uniform-random", None
        else:
            first = equivalent_permutation("BCC", perms, which=1)
            second = equivalent_permutation("BCC", perms, which=2)
            segments = (1, 1)
        factor = FactorNode("T", bcc_trellis, 2, (
            FactorPort("input", 0, ("u", "u"), first),
            FactorPort("input", 1, ("v",), second),
            FactorPort("output", 0, ("v",), "identity"),
        ), segments)
        variables = (
            VariableNode("u", "information", 1, 2),
            VariableNode("v", "parity", 2, 2),
        )
        return CompactGraph("self-concatenated-BCC", variables, (factor,))

    params = CLASS_PARAMS[cls]
    if perms is None:
        return unified_ensemble(params, trellis, name=f"self-concatenated-{cls}")

    trellis = _require_rate1(trellis or default_trellis())
    pin = equivalent_permutation(cls, perms)
    n = pin.size // params.l
    if cls == "PCC":
        pout = PermutationDescriptor.identity(2 * n)
        segments = (1, 1)
    elif cls == "SCC":
        # The outer part (first N sections) produces v2, the inner part v1.
        pout = PermutationDescriptor.from_blocks(3 * n, (
            PermutationBlock(0, 2 * n, n),
            PermutationBlock(n, 0, 2 * n),
        ))
        segments = (1, 2)
    else:
        pout = PermutationDescriptor.from_blocks(4 * n, (
            PermutationBlock(0, 2 * n, 2 * n),
            PermutationBlock(2 * n, 0, 2 * n),
        ))
        segments = (1, 1, 2)
    graph = unified_ensemble(params, trellis, name=f"self-concatenated-{cls}")
    (factor,) = graph.factors
    ports = (
        dc.replace(factor.port("input", 0), permutation=pin),
        dc.replace(factor.port("output", 0), permutation=pout),
    )
    return dc.replace(graph, factors=(dc.replace(factor, ports=ports, segments=segments),))


def rate_compatible_family(base: UnifiedParams, rhos: Iterable[Tuple[float, float]], trellis: Trellis = None):
    """Return the graphs of *base* punctured to every ``(rho1, rho2)`` pair of
    *rhos*. ``rho2`` is ignored when ``base.l2`` is 0."""
    graphs = []
    for rho1, rho2 in rhos:
        params = dc.replace(base, rho1=rho1, rho2=rho2 if base.l2 else ABSENT)
        graphs.append(unified_ensemble(params, trellis, name=f"unified-{rho1:g}-{rho2:g}"))
    return graphs


def repeat_accumulate(q=2, trellis: Trellis = None) -> CompactGraph:
    """Return the systematic repeat-accumulate ensemble: *q* repetitions of
    u, permuted and fed to the accumulator ``1/(1+D)``."""
    params = UnifiedParams(l=q, l1=q, l2=0, rho1=1.0, q=q)
    return unified_ensemble(params, trellis or default_trellis(ACCUMULATOR), name=f"repeat-accumulate-{q}")
