"""Command line entry point.

``mourrelab run CONFIG`` runs one experiment described by a YAML file and
writes a JSON report plus one CSV per series. ``mourrelab list`` prints the
catalog of experiment kinds.

Exit status: 0 when every declared check passes, 1 when a check fails,
2 on a configuration error, 3 on a numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import tempfile
from contextlib import nullcontext
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy
import yaml

from . import __version__
from ._accel import numba_enabled, set_threads
from .errors import ConfigError, NumericalFailure
from .experiments import KINDS, ExperimentConfig, ExperimentResult, Series, catalog, result_to_dict, run_experiment, validate_config

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    """Parse and validate a YAML config file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}", "config") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML parse error in {p}: {exc}", "config") from exc
    return validate_config(raw)


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def series_csv(series: Series) -> str:
    """CSV text with a ``name [unit]`` header and ``%.17e`` numbers."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = list(series.columns)
    w.writerow([f"{n} [{series.columns[n]}]" for n in names])
    cols = [np.asarray(series.data[n], dtype=np.float64) for n in names]
    for row in zip(*cols):
        w.writerow(["%.17e" % v for v in row])
    return buf.getvalue()


def build_report(cfg: ExperimentConfig, res: ExperimentResult, csv_names: dict[str, str], threads: int | None) -> dict:
    return {
        "tool": {"name": "mourrelab", "version": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                 "python": platform.python_version(), "numba_kernels": numba_enabled(), "threads": threads},
        "config": cfg.to_dict(),
        "result": result_to_dict(res),
        "series": [{"name": s.name, "file": csv_names[s.name], "columns": s.columns,
                    "length": len(next(iter(s.data.values()))) if s.data else 0} for s in res.series],
    }


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(out_dir: Path, cfg: ExperimentConfig, res: ExperimentResult, threads: int | None) -> Path:
    """Write CSVs then the report; each file goes through write-then-rename."""
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = cfg.output["name"]
    csv_names = {s.name: f"{stem}__{s.name}.csv" for s in res.series}
    for s in res.series:
        _atomic_write(out_dir / csv_names[s.name], series_csv(s))
    report = build_report(cfg, res, csv_names, threads)
    path = out_dir / f"{stem}.json"
    _atomic_write(path, json.dumps(_jsonable(report), indent=2, sort_keys=False) + "\n")
    return path


def _thread_limits(threads: int | None):
    if threads is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    set_threads(threads)
    return threadpool_limits(limits=threads)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative", "config")
            cfg = cfg.with_seed(args.seed)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be at least 1", "config")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.output_dir) if args.output_dir else Path(cfg.output["dir"])
    try:
        with _thread_limits(args.threads):
            res = run_experiment(cfg)
    except NumericalFailure as exc:
        print(f"numerical failure in {exc.operation or 'unknown'}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    path = write_outputs(out_dir, cfg, res, args.threads)
    for c in res.checks:
        tag = "PASS" if c.passed else ("WARN" if c.soft else "FAIL")
        print(f"{tag} {c.name}: {c.value:.6g} {c.relation} {c.threshold:.6g}" + (f"  ({c.note})" if c.note else ""))
    print(f"report: {path}")
    return EXIT_OK if res.passed else EXIT_CHECK_FAILED


def cmd_list(args: argparse.Namespace) -> int:
    cat = catalog()
    if args.json:
        print(json.dumps(_jsonable(cat), indent=2))
        return EXIT_OK
    for name, info in cat.items():
        print(f"{name}: {info['description']}")
        print(f"  models: {', '.join(info['models'])}")
        for model, params in info["models"].items():
            for key, p in params.items():
                print(f"    model.{model}.{key} = {p['default']!r}  [{p['range']}]  {p['doc']}")
        for key, p in info["numeric"].items():
            print(f"    numeric.{key} = {p['default']!r}  [{p['range']}]  {p['doc']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mourrelab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mourrelab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a YAML config")
    run.add_argument("config", help="path to the YAML config")
    run.add_argument("--output-dir", help="directory for the report and CSVs (overrides output.dir)")
    run.add_argument("--threads", type=int, help="thread limit for BLAS and numba")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.set_defaults(func=cmd_run)
    lst = sub.add_parser("list", help=f"list the {len(KINDS)} experiment kinds")
    lst.add_argument("--json", action="store_true", help="emit the catalog as JSON")
    lst.set_defaults(func=cmd_list)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which matches the config-error status
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
