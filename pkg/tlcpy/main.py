import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import tlcpy as tlc
from .artifacts import write_csv, write_json, write_jsonl
from .config import OPERATIONS, RunConfig, load_config
from .exceptions import Error, InconsistencyError
from .graph import CLASSES, CLASS_PARAMS, original_ensemble, unified_ensemble
from .settings import local_settings

__all__ = [
    "main",
    "run",
]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INCONSISTENT = 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tlcpy",
        description="Density evolution, thresholds and erasure simulations of turbo-like codes.",
    )
    parser.add_argument(
        "-V", "--version", action="version", version=version(),
    )
    parser.add_argument(
        "operation", nargs="?", choices=OPERATIONS,
        help="what to compute; overrides run.operation of the config file",
    )
    parser.add_argument(
        "--config", metavar="PATH",
        help="INI file with [run], [ensemble], [analysis] and [simulation] sections",
    )
    parser.add_argument(
        "--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides",
        help="override a config value, e.g. ensemble.class=SCC (repeatable)",
    )
    parser.add_argument("--out", metavar="DIR", help="directory of the output artifacts")
    parser.add_argument("--seed", metavar="U64", type=int, help="64-bit seed of all random draws")
    parser.add_argument("--jobs", metavar="K", type=int, help="number of worker processes")
    group = parser.add_mutually_exclusive_group()
    group.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    group.add_argument("-q", "--quiet", action="store_true", help="log warnings and errors only")
    options = parser.parse_args(argv)

    configure_logging(options.verbose, options.quiet)
    try:
        config = load_config(
            options.config,
            options.overrides,
            operation=options.operation,
            seed=options.seed,
            out=options.out,
            jobs=options.jobs,
        )
        return run(config)
    except InconsistencyError as err:
        show_error(f"internal inconsistency: {err.message}")
        return EXIT_INCONSISTENT
    except (Error, ValueError, TypeError) as err:
        show_error(f"error: {err}")
        return EXIT_INVALID


def version():
    python_version, _, _ = sys.version.partition(" ")
    return f"TurboLike.py {tlc.__version__}, Python {python_version}"


def configure_logging(verbose=False, quiet=False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def show_error(text):
    if sys.stderr is not None:
        print(text, file=sys.stderr, flush=True)


def run(config: RunConfig) -> int:
    """Run the operation of *config*, write its artifacts to ``config.out``
    and print one summary line per result."""
    settings = ", ".join(f"{k}={v}" for k, v in config.as_dict()["analysis"].items())
    print(f"# {config.operation}: {settings}, decode_max_iter={config.settings.decode_max_iter}")
    with local_settings(config.settings):
        OPERATION_HANDLERS[config.operation](config)
    return EXIT_OK


def _label(config):
    return f"{config.ensemble} {config.form}"


def _threshold(config, kind):
    bp = kind == "bp"
    if config.form == "unified":
        trellis = tlc.exact_transfer(config.trellis())
        search = tlc.bp_threshold if bp else tlc.map_threshold
        result = search(config.params, trellis)
    else:
        search = tlc.graph_bp_threshold if bp else tlc.graph_map_threshold
        result = search(config.graph())
    path = Path(config.out) / f"threshold-{kind}.json"
    write_json(path, {"result": result.as_record(), "rate": str(config.graph().rate)}, config.as_dict())
    name = "eps_BP" if bp else "eps_MAP"
    flag = f" ({result.flag})" if result.flag else ""
    print(f"{_label(config)}: {name} = {result.threshold:.5f} [{result.lo:.6f}, {result.hi:.6f}]{flag}")


def _threshold_bp(config):
    _threshold(config, "bp")


def _threshold_map(config):
    _threshold(config, "map")


def _de_trace(config):
    transfer = tlc.exact_transfer(config.trellis())
    for eps in config.epsilons:
        result = tlc.de_run(config.params, eps, transfer)
        rows = [(s.iteration, s.x1, s.x2, s.p_a) for s in result.trace]
        path = Path(config.out) / f"de-trace-{eps:g}.csv"
        write_csv(path, ("iteration", "x1", "x2", "p_a"), rows, config.as_dict())
        state = "converged" if result.converged else "stuck"
        print(
            f"{_label(config)} eps={eps:g}: {state} after {result.final.iteration} iterations, "
            f"p_a = {result.final.p_a:.3e}"
        )


def _transfer_grid(config):
    trellis = config.trellis()
    points = tlc.transfer_grid(trellis, config.points)
    rows = [(p.y1, p.y2, p.f1, p.f2) for p in points]
    write_csv(Path(config.out) / "transfer-grid.csv", ("y1", "y2", "f1", "f2"), rows, config.as_dict())
    print(f"{trellis}: {len(rows)} transfer points")


def _exit_curve(config):
    if config.form == "unified":
        points = tlc.exit_curve(config.params, tlc.exact_transfer(config.trellis()))
    else:
        points = tlc.graph_exit_curve(config.graph())
    write_csv(Path(config.out) / "exit-curve.csv", ("epsilon", "h"), points, config.as_dict())
    print(f"{_label(config)}: {len(points)} EXIT points")


def _simulate(config):
    code = tlc.instantiate(
        config.graph(),
        config.N,
        config.seed,
        termination=config.termination,
        encodable=config.messages == "random",
    )
    reports = []
    for eps in config.epsilons:
        report = tlc.simulate(code, eps, config.frames, config.seed, jobs=config.jobs, messages=config.messages)
        reports.append(report)
        print(
            f"{_label(config)} N={code.N} eps={eps:g}: ber={report.ber:.3e} fer={report.fer:.3e} "
            f"iterations={report.mean_iterations:.1f} ({report.wall_time:.1f}s)"
        )
    write_jsonl(Path(config.out) / "simulate.jsonl", [r.as_record() for r in reports], config.as_dict())


def _table2_row(cls, form, generator, bcc_generator, hcc_inner, settings):
    with local_settings(settings):
        trellis = tlc.default_trellis(generator)
        if form == "unified":
            graph = unified_ensemble(CLASS_PARAMS[cls], trellis, name=f"unified-{cls}")
            transfer = tlc.exact_transfer(trellis)
            bp = tlc.bp_threshold(CLASS_PARAMS[cls], transfer)
            map_ = tlc.map_threshold(CLASS_PARAMS[cls], transfer)
        else:
            bcc = tlc.default_trellis(bcc_generator) if cls == "BCC" else None
            inner = tlc.default_trellis(hcc_inner) if cls == "HCC" else None
            graph = original_ensemble(cls, trellis, bcc, inner_trellis=inner)
            bp = tlc.graph_bp_threshold(graph)
            map_ = tlc.graph_map_threshold(graph)
    return cls, form, str(graph.rate), bp.threshold, map_.threshold


def _table2(config):
    tasks = [(cls, form) for cls in CLASSES for form in ("unified", "original")]
    args = [
        (cls, form, config.generator, config.bcc_generator, config.hcc_inner, config.settings)
        for cls, form in tasks
    ]
    start = time.perf_counter()
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as executor:
            rows = list(executor.map(_table2_row, *zip(*args)))
    else:
        rows = [_table2_row(*a) for a in args]
    header = ("ensemble", "form", "rate", "eps_bp", "eps_map")
    write_csv(Path(config.out) / "table2.csv", header, rows, config.as_dict())
    write_json(
        Path(config.out) / "table2.json",
        {"rows": [dict(zip(header, row)) for row in rows]},
        config.as_dict(),
    )
    for cls, form, rate, bp, map_ in rows:
        print(f"{cls:4} {form:9} R={rate:4} eps_BP={bp:.4f} eps_MAP={map_:.4f}")
    logger.info("table2 took %.1fs", time.perf_counter() - start)


OPERATION_HANDLERS = {
    "threshold-bp": _threshold_bp,
    "threshold-map": _threshold_map,
    "de-trace": _de_trace,
    "transfer-grid": _transfer_grid,
    "simulate": _simulate,
    "table2": _table2,
    "exit-curve": _exit_curve,
}
