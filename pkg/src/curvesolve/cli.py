"""Command-line front end.

Exit codes: 0 success, 1 internal error, 2 scenario/configuration error,
3 barrier error, 4 path, foliation or monitor error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import pipeline
from .errors import (BarrierError, ConfigurationError, CurveSolveError, EllipticityError,
                     FoliationError, MonitorError, NonConvergence, ParticularSolutionError,
                     PathError)

EXIT_OK, EXIT_INTERNAL, EXIT_PARSE, EXIT_BARRIER, EXIT_PATH = 0, 1, 2, 3, 4
LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("curvesolve")


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, BarrierError):
        return EXIT_BARRIER
    if isinstance(exc, ConfigurationError):
        return EXIT_PARSE
    if isinstance(exc, (PathError, MonitorError, NonConvergence, FoliationError,
                        ParticularSolutionError, EllipticityError)):
        return EXIT_PATH
    return EXIT_INTERNAL


def _setup_logging() -> None:
    level = os.environ.get("CURVESOLVE_LOG", "quiet").strip().lower()
    logging.basicConfig(level=LOG_LEVELS.get(level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _progress(line: str) -> None:
    print(line, flush=True)


def _report_error(exc: BaseException) -> int:
    code = exit_code(exc)
    print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return code


def _guarded(fn, *args, **kwargs) -> int:
    try:
        fn(*args, **kwargs)
    except CurveSolveError as exc:
        return _report_error(exc)
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit 1
        log.debug("internal error", exc_info=True)
        return _report_error(exc)
    return EXIT_OK


def _default_out(path, out) -> Path:
    return Path(out) if out else Path("runs") / Path(path).stem


def cmd_run(args) -> int:
    out = _default_out(args.scenario, args.out)

    def go():
        art = pipeline.run_file(args.scenario, out, _progress, args.seed, args.grid_n)
        final = art["trace"]["steps"][-1]
        print(f"done: t={final['t']!r} residual={final['residual']:.3e} "
              f"checksum={art['checksum'][:16]} artifact={out / pipeline.ARTIFACT_NAME}")
    return _guarded(go)


def cmd_resume(args) -> int:
    def go():
        art = pipeline.resume(args.checkpoint, args.out, _progress)
        print(f"done: checksum={art['checksum'][:16]}")
    return _guarded(go)


def cmd_diagnose(args) -> int:
    def go():
        from .scenario import load
        sc = load(args.scenario)
        if args.seed is not None:
            sc = sc.with_seed(args.seed)
        if args.grid_n is not None:
            sc = sc.with_grid(args.grid_n)
        text = "\n".join(r.text() for r in pipeline.diagnose(sc))
        if args.out:
            pipeline.atomic_write(args.out, text)
        print(text, end="")
    return _guarded(go)


def cmd_export(args) -> int:
    def go():
        art = pipeline.load_json(args.artifact)
        text = pipeline.export_plotdata(art, args.what)
        if args.out:
            pipeline.atomic_write(args.out, text)
        else:
            sys.stdout.write(text)
    return _guarded(go)


def _suite_worker(job):
    path, out, seed, grid_n = job
    _setup_logging()
    try:
        art = pipeline.run_file(path, out, None, seed, grid_n)
        return path, EXIT_OK, art["checksum"][:16]
    except Exception as exc:  # noqa: BLE001
        return path, exit_code(exc), f"{type(exc).__name__}: {exc}"


def cmd_suite(args) -> int:
    paths = sorted(Path(args.directory).glob("*.scenario"))
    if not paths:
        print(f"error: no *.scenario files in {args.directory}", file=sys.stderr)
        return EXIT_PARSE
    root = Path(args.out) if args.out else Path("runs")
    jobs = [(str(p), root / p.stem, args.seed, args.grid_n) for p in paths]
    workers = args.workers or min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_suite_worker, jobs))
    else:
        results = [_suite_worker(j) for j in jobs]
    worst = EXIT_OK
    for path, code, info in results:
        print(f"{Path(path).name}\texit={code}\t{info}")
        worst = max(worst, code)
    return worst


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curvesolve", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        sp.add_argument("--grid-n", type=int, default=None, help="override the grid resolution")
        sp.add_argument("--out", default=None, help="output directory or file")

    sp = sub.add_parser("run", help="solve a scenario")
    sp.add_argument("scenario")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("diagnose", help="run the diagnostic experiments")
    sp.add_argument("scenario")
    common(sp)
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("suite", help="run every *.scenario in a directory")
    sp.add_argument("directory")
    sp.add_argument("--workers", type=int, default=None)
    common(sp)
    sp.set_defaults(func=cmd_suite)

    sp = sub.add_parser("export", help="write plot data from an artifact")
    sp.add_argument("artifact")
    sp.add_argument("--what", required=True, choices=pipeline.EXPORTS)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("resume", help="continue a run from a checkpoint")
    sp.add_argument("checkpoint")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_resume)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
