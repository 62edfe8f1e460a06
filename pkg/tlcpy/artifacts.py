"""Writers of the CSV and JSON files produced by the command-line interface.

Every artifact embeds the resolved run configuration: CSV files start with
``# section.key=value`` comment lines, JSON documents carry a ``"config"``
key. Nothing time-dependent is written, so equal runs give equal bytes.
"""

import csv
import json
from pathlib import Path

from .exceptions import ConfigError
from .unset import AbsentType

__all__ = [
    "read_csv",
    "write_csv",
    "write_json",
    "write_jsonl",
]


def _default(value):
    if isinstance(value, AbsentType):
        return None
    if hasattr(value, "item"):
        # numpy scalars
        return value.item()
    if hasattr(value, "tolist"):
        return value.tolist()
    raise TypeError(f"{value.__class__.__name__} is not JSON serializable")


def _dumps(value, **kwargs):
    return json.dumps(value, default=_default, sort_keys=True, **kwargs)


def _flatten(config, prefix=""):
    for key in sorted(config):
        value = config[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _flatten(value, f"{name}.")
        else:
            yield name, _dumps(value)


def _open(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as err:
        raise ConfigError(f"cannot write {path}: {err}", key="out") from None


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header, rows, config) -> Path:
    """Write *rows* under the column names *header*."""
    with _open(path) as f:
        for name, value in _flatten(config):
            f.write(f"# {name}={value}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return Path(path)


def read_csv(path):
    """Return the header and the rows of a CSV artifact, skipping the
    configuration comments."""
    with open(path, encoding="utf-8", newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    header, *rows = list(csv.reader(lines))
    return header, rows


def write_json(path, payload, config) -> Path:
    with _open(path) as f:
        f.write(_dumps({"config": config, **payload}, indent=2))
        f.write("\n")
    return Path(path)


def write_jsonl(path, records, config) -> Path:
    """Write one JSON object per line, each with the configuration."""
    with _open(path) as f:
        for record in records:
            f.write(_dumps({"config": config, **record}))
            f.write("\n")
    return Path(path)
