import dataclasses as dc
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from typing import List, Sequence

import numpy as np

from .code import ConcreteCode, encode_code
from .decoder import ErasureDecoder, ErasureWord
from .exceptions import InconsistencyError
from .rng import _check_seed, make_rng
from .settings import get_settings, local_settings, resolve
from .transfer import ERASED

__all__ = [
    "SimReport",
    "simulate",
    "simulate_sweep",
]

logger = logging.getLogger(__name__)

MESSAGE_MODES = {"zero", "random"}


@dc.dataclass(frozen=True)
class SimReport:
    """The outcome of a Monte Carlo run at one channel parameter.

    *ber* is the fraction of information bits left erased, *fer* the fraction
    of frames with at least one erased information bit.
    """

    epsilon: float
    N: int
    frames: int
    ber: float
    fer: float
    mean_iterations: float
    seed: int
    code: str = ""
    max_iter: int = 0
    messages: str = "zero"
    residual_bits: int = 0
    frame_errors: int = 0
    #: Seconds spent; not part of comparisons or of :meth:`as_record`.
    wall_time: float = dc.field(default=0.0, compare=False)

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("frames must be positive")
        for name in ("epsilon", "ber", "fer"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be between 0 and 1")

    def as_record(self) -> dict:
        record = dc.asdict(self)
        del record["wall_time"]
        return record

    def to_json(self) -> str:
        return json.dumps(self.as_record(), sort_keys=True)


def _check_frames(frames):
    if isinstance(frames, bool) or not isinstance(frames, (int, np.integer)):
        raise TypeError(f"frames must be an integer (got type {frames.__class__.__name__})")
    if frames < 1:
        raise ValueError("frames must be positive")
    return int(frames)


def _run_frames(code, epsilon, seed, max_iter, messages, frames, settings=None):
    """Return the sums ``(residual_bits, frame_errors, iterations)`` over the
    frame indices *frames*."""
    if settings is not None:
        # Worker processes start with default settings.
        with local_settings(settings):
            return _run_frames(code, epsilon, seed, max_iter, messages, frames)

    decoder = ErasureDecoder(code)
    n = len(code.transmitted)
    k = len(code.info)
    residual = errors = iterations = 0
    for frame in frames:
        erased = make_rng(seed, "channel", frame).random(n) < epsilon
        if messages == "random":
            u = make_rng(seed, "message", frame).integers(0, 2, size=k, dtype=np.uint8)
            bits = encode_code(code, u)
        else:
            u = np.zeros(k, dtype=np.uint8)
            bits = np.zeros(n, dtype=np.uint8)
        result = decoder.decode(ErasureWord.from_bits(bits, erased), max_iter)
        known = result.u != ERASED
        wrong = np.flatnonzero(known & (result.u != u))
        if wrong.size:
            bit = int(code.info[wrong[0]])
            raise InconsistencyError(f"decoder recovered a wrong value for bit {bit} in frame {frame}", bit=bit)
        missing = int((~known).sum())
        residual += missing
        errors += missing > 0
        iterations += result.iterations
    return residual, errors, iterations


def _chunks(frames, jobs):
    bounds = np.linspace(0, frames, min(frames, 4 * jobs) + 1).astype(int)
    return [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def simulate(
    code: ConcreteCode,
    epsilon: float,
    frames: int,
    seed=0,
    max_iter=None,
    jobs=1,
    messages="zero",
) -> SimReport:
    """Transmit *frames* codewords over a BEC with erasure probability
    *epsilon* and decode them.

    The erasure pattern of frame *i* depends only on *seed* and *i*, so the
    report is the same for any number of *jobs*. By default the all-zero
    codeword is sent; ``messages="random"`` encodes random messages instead.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be between 0 and 1")
    frames = _check_frames(frames)
    seed = _check_seed(seed)
    if messages not in MESSAGE_MODES:
        raise ValueError(f"{messages!r} is not a valid message mode")
    if jobs < 1:
        raise ValueError("jobs must be positive")
    max_iter = resolve(max_iter, "decode_max_iter")

    start = time.perf_counter()
    if jobs == 1:
        residual, errors, iterations = _run_frames(code, epsilon, seed, max_iter, messages, range(frames))
    else:
        settings = get_settings()
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            futures = [
                executor.submit(_run_frames, code, epsilon, seed, max_iter, messages, chunk, settings)
                for chunk in _chunks(frames, jobs)
            ]
            parts = [f.result() for f in futures]
        residual, errors, iterations = (sum(col) for col in zip(*parts))
    elapsed = time.perf_counter() - start

    k = len(code.info)
    report = SimReport(
        epsilon=float(epsilon),
        N=code.N,
        frames=frames,
        ber=residual / (frames * k),
        fer=errors / frames,
        mean_iterations=iterations / frames,
        seed=seed,
        code=code.graph.name,
        max_iter=max_iter,
        messages=messages,
        residual_bits=int(residual),
        frame_errors=int(errors),
        wall_time=elapsed,
    )
    logger.info(
        "%s N=%d eps=%.4f: ber=%.3e fer=%.3e (%d frames, %.1fs)",
        report.code, report.N, report.epsilon, report.ber, report.fer, frames, elapsed,
    )
    return report


def simulate_sweep(code: ConcreteCode, epsilons: Sequence[float], frames: int, seed=0, **kwargs) -> List[SimReport]:
    """Run :func:`simulate` at every channel parameter of *epsilons*. All
    points share the seed, so each frame sees nested erasure patterns."""
    return [simulate(code, eps, frames, seed, **kwargs) for eps in epsilons]
