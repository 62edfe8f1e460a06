"""Run configuration of the command-line interface.

Configuration files are INI files with the sections ``[run]``,
``[ensemble]``, ``[analysis]`` and ``[simulation]``. Values are resolved in
the order: built-in defaults, the file, ``--set`` overrides, and finally the
dedicated command-line flags.
"""

import configparser
import dataclasses as dc
from typing import Iterable, Optional, Tuple

from .exceptions import ConfigError
from .graph import (
    CLASSES,
    CompactGraph,
    CLASS_PARAMS,
    UnifiedParams,
    original_ensemble,
    self_concatenated_ensemble,
    unified_ensemble,
)
from .settings import Settings, default_settings
from .trellis import Trellis, build_trellis, parse_generators
from .unset import ABSENT

__all__ = [
    "FORMS",
    "OPERATIONS",
    "RunConfig",
    "load_config",
]


OPERATIONS = (
    "threshold-bp",
    "threshold-map",
    "de-trace",
    "transfer-grid",
    "simulate",
    "table2",
    "exit-curve",
)
FORMS = ("unified", "original", "self-concatenated")

_SETTING_FIELDS = tuple(f.name for f in dc.fields(Settings))

DEFAULTS = {
    "run": {
        "operation": "",
        "epsilon": "",
        "seed": "0",
        "out": ".",
        "jobs": "1",
    },
    "ensemble": {
        "class": "PCC",
        "form": "unified",
        "l": "",
        "l1": "",
        "l2": "",
        "rho1": "",
        "rho2": "",
        "q": "2",
        "generator": "5/7",
        "bcc_generator": "5,3/7",
        "hcc_inner": "1/3",
    },
    "analysis": {
        **{
            name: str(getattr(default_settings, name))
            for name in _SETTING_FIELDS
            if name != "decode_max_iter"
        },
        "points": "21",
    },
    "simulation": {
        "N": "1000",
        "frames": "100",
        "decode_max_iter": str(default_settings.decode_max_iter),
        "termination": "",
        "messages": "zero",
    },
}


@dc.dataclass(frozen=True)
class RunConfig:
    """A fully resolved and validated run of the command-line interface."""

    operation: str
    ensemble: str = "PCC"
    form: str = "unified"
    params: Optional[UnifiedParams] = None
    generator: str = "5/7"
    bcc_generator: str = "5,3/7"
    hcc_inner: str = "1/3"
    epsilons: Tuple[float, ...] = ()
    points: int = 21
    N: int = 1000
    frames: int = 100
    termination: Optional[str] = None
    messages: str = "zero"
    seed: int = 0
    jobs: int = 1
    out: str = "."
    settings: Settings = dc.field(default_factory=default_settings.copy)

    def __post_init__(self):
        if self.operation not in OPERATIONS:
            raise ConfigError(f"{self.operation!r} is not a valid operation", key="operation")
        if self.ensemble != "custom" and self.ensemble not in CLASSES:
            raise ConfigError(f"{self.ensemble!r} is not a valid ensemble class", key="class")
        if self.form not in FORMS:
            raise ConfigError(f"{self.form!r} is not a valid ensemble form", key="form")
        if self.ensemble == "custom":
            if self.params is None:
                raise ConfigError("a custom ensemble needs l, l1, l2, rho1 and rho2", key="class")
            if self.form != "unified":
                raise ConfigError("a custom ensemble only has the unified form", key="form")
        elif self.params is None:
            object.__setattr__(self, "params", CLASS_PARAMS[self.ensemble])
        if self.operation in ("de-trace", "simulate") and not self.epsilons:
            raise ConfigError(f"{self.operation} needs at least one epsilon", key="epsilon")
        if self.operation == "de-trace" and self.form != "unified":
            raise ConfigError("de-trace needs the unified form", key="form")
        for eps in self.epsilons:
            if not 0.0 <= eps <= 1.0:
                raise ConfigError("epsilon must be between 0 and 1", key="epsilon")
        for name in ("points", "N", "frames", "jobs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive", key=name)
        if self.termination not in (None, "zero-tail", "unterminated"):
            raise ConfigError(f"{self.termination!r} is not a valid termination mode", key="termination")
        if self.messages not in ("zero", "random"):
            raise ConfigError(f"{self.messages!r} is not a valid message mode", key="messages")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer", key="seed")
        # Parse the generators now so that bad octals fail before any compute.
        self.trellis()
        table2 = self.operation == "table2"
        if table2 or (self.ensemble == "BCC" and self.form != "unified"):
            self.bcc_trellis()
        if table2 or (self.ensemble == "HCC" and self.form == "original"):
            self.inner_trellis()

    def trellis(self) -> Trellis:
        return build_trellis(parse_generators(self.generator))

    def bcc_trellis(self) -> Trellis:
        return build_trellis(parse_generators(self.bcc_generator))

    def inner_trellis(self) -> Trellis:
        try:
            trellis = build_trellis(parse_generators(self.hcc_inner))
        except ConfigError as err:
            raise ConfigError(err.message, key="hcc_inner") from None
        if trellis.input_arity != 1:
            raise ConfigError(f"{trellis} is not a rate-1 trellis", key="hcc_inner")
        return trellis

    def graph(self, form=None) -> CompactGraph:
        form = form or self.form
        if form == "unified":
            return unified_ensemble(self.params, self.trellis(), name=f"unified-{self.ensemble}")
        if form == "original":
            bcc = self.bcc_trellis() if self.ensemble == "BCC" else None
            inner = self.inner_trellis() if self.ensemble == "HCC" else None
            return original_ensemble(self.ensemble, self.trellis(), bcc, inner_trellis=inner)
        bcc = self.bcc_trellis() if self.ensemble == "BCC" else None
        return self_concatenated_ensemble(self.ensemble, self.trellis(), bcc)

    def as_dict(self) -> dict:
        """Return the resolved configuration as plain JSON-ready values."""
        params = dc.asdict(self.params)
        if params["rho2"] is ABSENT:
            params["rho2"] = None
        return {
            "run": {
                "operation": self.operation,
                "epsilon": list(self.epsilons),
                "seed": self.seed,
                "out": self.out,
                "jobs": self.jobs,
            },
            "ensemble": {
                "class": self.ensemble,
                "form": self.form,
                **params,
                "generator": self.generator,
                "bcc_generator": self.bcc_generator,
                "hcc_inner": self.hcc_inner,
            },
            "analysis": {
                **{name: getattr(self.settings, name) for name in _SETTING_FIELDS if name != "decode_max_iter"},
                "points": self.points,
            },
            "simulation": {
                "N": self.N,
                "frames": self.frames,
                "decode_max_iter": self.settings.decode_max_iter,
                "termination": self.termination or "",
                "messages": self.messages,
            },
        }


def _override(parser, item):
    key, sep, value = item.partition("=")
    if not sep:
        raise ConfigError(f"override {item!r} is not of the form key=value", key=item)
    key = key.strip()
    section, dot, name = key.rpartition(".")
    if not dot:
        sections = [s for s in DEFAULTS if name in DEFAULTS[s]]
        if not sections:
            raise ConfigError(f"unknown setting {name!r}", key=name)
        section = sections[0]
    elif section not in DEFAULTS or name not in DEFAULTS[section]:
        raise ConfigError(f"unknown setting {key!r}", key=key)
    parser[section][name] = value.strip()


def _read(parser, path):
    try:
        with open(path, encoding="utf-8") as f:
            parser.read_file(f)
    except OSError as err:
        raise ConfigError(f"cannot read config file: {err}", key="config") from None
    except configparser.Error as err:
        raise ConfigError(f"invalid config file: {err}", key="config") from None
    for section in parser.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown config section [{section}]", key=section)
        for name in parser[section]:
            if name not in DEFAULTS[section]:
                raise ConfigError(f"unknown setting {section}.{name}", key=name)


def _convert(section, name, text, kind):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"{section}.{name} has an invalid value {text!r}", key=name) from None


def _epsilons(text):
    return tuple(_convert("run", "epsilon", part, float) for part in text.replace(",", " ").split())


def _params(ensemble):
    names = ("l", "l1", "l2", "rho1", "rho2")
    if not any(ensemble[n] for n in names):
        return None
    missing = [n for n in ("l", "l1", "l2", "rho1") if not ensemble[n]]
    if missing:
        raise ConfigError(f"explicit ensemble parameters are missing {', '.join(missing)}", key=missing[0])
    rho2 = _convert("ensemble", "rho2", ensemble["rho2"], float) if ensemble["rho2"] else ABSENT
    return UnifiedParams(
        l=_convert("ensemble", "l", ensemble["l"], int),
        l1=_convert("ensemble", "l1", ensemble["l1"], int),
        l2=_convert("ensemble", "l2", ensemble["l2"], int),
        rho1=_convert("ensemble", "rho1", ensemble["rho1"], float),
        rho2=rho2,
        q=_convert("ensemble", "q", ensemble["q"], int),
    )


def load_config(path=None, overrides: Iterable[str] = (), **flags) -> RunConfig:
    """Build a :class:`RunConfig` from the INI file *path*, the ``key=value``
    *overrides* and the command-line *flags* (``operation``, ``seed``,
    ``out``, ``jobs``; ``None`` values are ignored)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_dict(DEFAULTS)
    if path is not None:
        _read(parser, path)
    for item in overrides:
        _override(parser, item)
    for name, value in flags.items():
        if value is not None:
            parser["run"][name] = str(value)

    run, ensemble = parser["run"], parser["ensemble"]
    analysis, simulation = parser["analysis"], parser["simulation"]

    settings = default_settings.copy()
    for name in _SETTING_FIELDS:
        section = simulation if name == "decode_max_iter" else analysis
        kind = type(getattr(default_settings, name))
        value = _convert(section.name, name, section[name], float if kind is float else lambda s: int(float(s)))
        setattr(settings, name, value)

    params = _params(ensemble)
    cls = ensemble["class"].strip()
    if params is not None:
        cls = "custom"
    elif cls.upper() in CLASSES:
        cls = cls.upper()

    return RunConfig(
        operation=run["operation"].strip(),
        ensemble=cls,
        form=ensemble["form"].strip(),
        params=params,
        generator=ensemble["generator"].strip(),
        bcc_generator=ensemble["bcc_generator"].strip(),
        hcc_inner=ensemble["hcc_inner"].strip(),
        epsilons=_epsilons(run["epsilon"]),
        points=_convert("analysis", "points", analysis["points"], int),
        N=_convert("simulation", "N", simulation["N"], int),
        frames=_convert("simulation", "frames", simulation["frames"], int),
        termination=simulation["termination"].strip() or None,
        messages=simulation["messages"].strip(),
        seed=_convert("run", "seed", run["seed"], int),
        jobs=_convert("run", "jobs", run["jobs"], int),
        out=run["out"],
        settings=settings,
    )
