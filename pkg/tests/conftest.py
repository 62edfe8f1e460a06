import subprocess
import sys
import textwrap
from pathlib import Path

import numpy as np
import pytest

import tlcpy as tlc

ROOT = Path(__file__).parent.parent


@pytest.fixture(scope="class")
def child_cli():
    return ChildCLI()


class ChildCLI:
    """Run the command-line interface in a separate interpreter."""

    def run(self, args, **kwargs):
        args = [sys.executable, "-m", "tlcpy", *map(str, args)]
        kwargs.setdefault("cwd", ROOT)
        return subprocess.run(args, capture_output=True, encoding="utf-8", **kwargs)

    def write_config(self, path, text):
        path.write_text(textwrap.dedent(text), encoding="utf-8")
        return path


@pytest.fixture()
def settings():
    with tlc.local_settings() as settings:
        yield settings


@pytest.fixture(scope="session")
def rsc():
    """The 5/7 recursive systematic convolutional trellis."""
    return tlc.default_trellis("5/7")


@pytest.fixture(scope="session")
def accumulator():
    return tlc.default_trellis("1/3")


@pytest.fixture(scope="session")
def bcc_trellis():
    return tlc.default_trellis("5,3/7")


def random_message(code, seed=1):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=len(code.info), dtype=np.uint8)


def random_perms(cls, n, seed=0):
    """Return explicit component permutations of the original encoder of
    *cls* with information length *n*."""
    rng = np.random.default_rng(seed)
    if cls == "PCC":
        return {"pi": rng.permutation(n)}
    if cls == "SCC":
        return {"inner": rng.permutation(2 * n)}
    if cls == "HCC":
        return {"lower": rng.permutation(n), "inner": rng.permutation(2 * n)}
    return {"pi": rng.permutation(n), "upper": rng.permutation(n), "lower": rng.permutation(n)}
