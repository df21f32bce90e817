"""Command-line front end.

Subcommands: gcm, pcm (single tests), sweep, modality (hypothesis
families), simulate (Monte-Carlo experiments), bench (timing grid).
Every run requires an explicit --seed; nothing is ever seeded from the
clock.  Reports embed the full run configuration and tool version, and
are byte-identical across reruns with the same seed at any --threads
value: wall-clock measurements are printed to standard error and only
enter report files under --timings, which is documented to break
byte-reproducibility.

Exit codes: 0 success, 2 usage error (bad flags, malformed engine
JSON, missing files), 1 runtime error, echoing the failing seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .data import ColumnRoles, read_csv, select_blocks
from .errors import CovmetError
from .gcm import gcm_test
from .multiplicity import TestConfig, modality_select, variable_sweep
from .numkit import RngStream
from .pcm import pcm_test
from .regression import RegressorSpec, spec_from_json
from .simharness import DgpSpec, run_calibration, run_power, run_timing

__all__ = ["build_parser", "entrypoint", "main"]


class _UsageError(Exception):
    pass


def _columns(text: str, flag: str, required: bool) -> tuple[str, ...]:
    names = tuple(part.strip() for part in text.split(",") if part.strip())
    if required and not names:
        raise _UsageError(f"{flag} needs at least one column name")
    return names


def _engine(text: str | None, fallback: RegressorSpec | None = None):
    if text is None:
        return fallback
    try:
        return spec_from_json(text)
    except CovmetError as exc:
        raise _UsageError(str(exc)) from None


def _existing(path: str, flag: str) -> str:
    if not os.path.exists(path):
        raise _UsageError(f"{flag} file not found: {path}")
    return path


def _write_json(path: str, obj: dict) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(json.dumps(obj, sort_keys=True, indent=2))
        handle.write("\n")


def _ints(text: str, flag: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise _UsageError(f"{flag} must be a comma-separated integer list") from None
    if not values:
        raise _UsageError(f"{flag} needs at least one value")
    return values


_SLOT_FLAGS = {
    "yz": "engine_yz", "xz": "engine_xz",
    "g": "engine_g", "m": "engine_m", "v": "engine_v",
    "d1_yz": "engine_d1_yz", "d1_fz": "engine_d1_fz",
}


def _test_config(args, kind: str) -> TestConfig:
    base = _engine(getattr(args, "engine", None)) or RegressorSpec("random_forest")
    slots = ("yz", "xz") if kind == "gcm" else ("g", "m", "v", "d1_yz", "d1_fz")
    overrides = {}
    for slot in slots:
        text = getattr(args, _SLOT_FLAGS[slot], None)
        if text is not None:
            overrides[slot] = _engine(text)
    try:
        return TestConfig(
            kind=kind,
            base_engine=base,
            overrides=overrides,
            k=getattr(args, "k", 5),
            alpha=getattr(args, "alpha", 0.05),
        )
    except CovmetError as exc:
        raise _UsageError(str(exc)) from None


def _run_config(args, command: str, extra: dict | None = None) -> dict:
    # output destinations and execution details (thread count) are
    # excluded so reruns into different files, or with different
    # parallelism, still produce byte-identical report bodies
    skip = {"handler", "timings", "verbose", "out", "csv", "pvalues_csv", "threads"}
    config = {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in skip and not callable(value)
    }
    config["command"] = command
    if extra:
        config.update(extra)
    return config


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, required=True,
                     help="master random seed (required; runs never self-seed)")
    sub.add_argument("--threads", type=int, default=1,
                     help="worker-thread cap; never changes results")
    sub.add_argument("--out", default=None, help="report JSON path")
    sub.add_argument("--timings", action="store_true",
                     help="include wall-clock in reports (breaks byte-reproducibility)")
    sub.add_argument("--verbose", action="store_true", help="progress to stderr")


def _add_single_test_flags(sub: argparse.ArgumentParser, slots: tuple[str, ...]) -> None:
    sub.add_argument("--data", required=True, help="input CSV")
    sub.add_argument("--response", required=True, help="response column")
    sub.add_argument("--x", required=True, help="candidate columns, comma separated")
    sub.add_argument("--z", default="", help="conditioning columns, comma separated")
    sub.add_argument("--engine", default=None,
                     help='base engine JSON, e.g. {"kind":"random_forest"}')
    for slot in slots:
        flag = "--" + _SLOT_FLAGS[slot].replace("_", "-")
        sub.add_argument(flag, dest=_SLOT_FLAGS[slot], default=None,
                         help=f"engine JSON for the {slot} regression slot")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covmet",
        description="Covariance-measure conditional independence tests",
    )
    parser.add_argument("--version", action="version", version=f"covmet {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    gcm = subs.add_parser("gcm", help="generalised covariance measure test")
    _add_single_test_flags(gcm, ("yz", "xz"))
    gcm.add_argument("--rel-tol", type=float, default=1e-10,
                     help="relative eigenvalue cutoff for the covariance rank")
    _add_common(gcm)
    gcm.set_defaults(handler=_cmd_gcm)

    pcm = subs.add_parser("pcm", help="projected covariance measure test")
    _add_single_test_flags(pcm, ("g", "m", "v", "d1_yz", "d1_fz"))
    pcm.add_argument("--k", type=int, default=5, help="number of sample splits")
    pcm.add_argument("--bernoulli-variance", action="store_true",
                     help="use g(1-g) for the variance when the response is 0/1")
    _add_common(pcm)
    pcm.set_defaults(handler=_cmd_pcm)

    sweep = subs.add_parser("sweep", help="per-candidate significance sweep")
    sweep.add_argument("--data", required=True)
    sweep.add_argument("--response", required=True)
    sweep.add_argument("--candidates", default=None,
                       help="columns to sweep (default: all non-response columns)")
    sweep.add_argument("--test", choices=("gcm", "pcm"), default="gcm")
    sweep.add_argument("--engine", default=None)
    for slot in _SLOT_FLAGS.values():
        sweep.add_argument("--" + slot.replace("_", "-"), dest=slot, default=None)
    sweep.add_argument("--k", type=int, default=5)
    sweep.add_argument("--alpha", type=float, default=0.05)
    sweep.add_argument("--csv", default=None, help="also write the flat CSV report here")
    _add_common(sweep)
    sweep.set_defaults(handler=_cmd_sweep)

    modality = subs.add_parser("modality", help="modality (column-group) selection")
    modality.add_argument("--data", required=True)
    modality.add_argument("--response", required=True)
    modality.add_argument("--groups", required=True,
                          help='JSON file {"group": ["col", ...], ...}')
    modality.add_argument("--test", choices=("gcm", "pcm"), default="pcm")
    modality.add_argument("--engine", default=None)
    for slot in _SLOT_FLAGS.values():
        modality.add_argument("--" + slot.replace("_", "-"), dest=slot, default=None)
    modality.add_argument("--k", type=int, default=5)
    modality.add_argument("--alpha", type=float, default=0.05)
    modality.add_argument("--csv", default=None)
    _add_common(modality)
    modality.set_defaults(handler=_cmd_modality)

    simulate = subs.add_parser("simulate", help="Monte-Carlo calibration/power run")
    simulate.add_argument("--config", required=True, help="experiment JSON file")
    simulate.add_argument("--pvalues-csv", default=None,
                          help="flat per-replicate CSV for external plotting")
    _add_common(simulate)
    simulate.set_defaults(handler=_cmd_simulate)

    bench = subs.add_parser("bench", help="timing grid over (n, d)")
    bench.add_argument("--test", choices=("gcm", "pcm"), default="gcm")
    bench.add_argument("--n", default="500", help="comma-separated sample sizes")
    bench.add_argument("--d", default="1,4,8,32", help="comma-separated candidate widths")
    bench.add_argument("--repeats", type=int, default=5)
    bench.add_argument("--engine", default=None)
    bench.add_argument("--k", type=int, default=5)
    _add_common(bench)
    bench.set_defaults(handler=_cmd_bench)

    return parser


def _single_test_blocks(args):
    data_path = _existing(args.data, "--data")
    x_cols = _columns(args.x, "--x", required=True)
    z_cols = _columns(args.z, "--z", required=False)
    dataset = read_csv(data_path)
    roles = ColumnRoles(response=args.response, candidates=x_cols, conditioning=z_cols)
    return select_blocks(dataset, roles)


def _emit_single_test(args, command: str, result_dict: dict, p: float) -> int:
    report = dict(result_dict)
    report["version"] = __version__
    report["config"] = _run_config(args, command)
    if args.out:
        _write_json(args.out, report)
    print(f"p={repr(float(p))}")
    return 0


def _cmd_gcm(args) -> int:
    config = _test_config(args, "gcm")
    y, x, z = _single_test_blocks(args)
    result = gcm_test(
        y, x, z, config.slot("yz"), config.slot("xz"),
        rng=RngStream(seed=args.seed), rel_tol=args.rel_tol, threads=args.threads,
    )
    return _emit_single_test(args, "gcm", result.to_json_dict(), result.p)


def _cmd_pcm(args) -> int:
    config = _test_config(args, "pcm")
    y, x, z = _single_test_blocks(args)
    engines = config.pcm_engines()
    if args.bernoulli_variance:
        from dataclasses import replace as _replace

        engines = _replace(engines, bernoulli_variance=True)
    result = pcm_test(
        y, x, z, K=args.k, engines=engines,
        rng=RngStream(seed=args.seed), threads=args.threads,
    )
    return _emit_single_test(args, "pcm", result.to_json_dict(), result.p)


def _emit_family(args, command: str, report) -> int:
    body = report.to_json_dict(include_timings=args.timings)
    body["version"] = __version__
    body["config_run"] = _run_config(args, command)
    if args.out:
        _write_json(args.out, body)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as handle:
            handle.write(report.to_csv_text(include_timings=args.timings))
    worst = min((r.holm_p for r in report.rows if r.holm_p is not None), default=None)
    print(f"min_holm_p={'NA' if worst is None else repr(worst)}")
    return 0


def _cmd_sweep(args) -> int:
    config = _test_config(args, args.test)
    dataset = read_csv(_existing(args.data, "--data"))
    if args.candidates is None:
        candidates = tuple(n for n in dataset.names if n != args.response)
    else:
        candidates = _columns(args.candidates, "--candidates", required=True)
    report = variable_sweep(
        dataset, args.response, candidates, config,
        rng=RngStream(seed=args.seed), threads=args.threads,
    )
    return _emit_family(args, "sweep", report)


def _cmd_modality(args) -> int:
    config = _test_config(args, args.test)
    dataset = read_csv(_existing(args.data, "--data"))
    groups_path = _existing(args.groups, "--groups")
    with open(groups_path, "r", encoding="utf-8") as handle:
        try:
            groups = json.load(handle)
        except json.JSONDecodeError as exc:
            raise _UsageError(f"--groups JSON is malformed: {exc}") from None
    if not isinstance(groups, dict) or not all(
        isinstance(v, list) and all(isinstance(c, str) for c in v) for v in groups.values()
    ):
        raise _UsageError('--groups must map names to column lists, {"g": ["c1", ...]}')
    report = modality_select(
        dataset, args.response, groups, config,
        rng=RngStream(seed=args.seed), threads=args.threads,
    )
    return _emit_family(args, "modality", report)


def _cmd_simulate(args) -> int:
    with open(_existing(args.config, "--config"), "r", encoding="utf-8") as handle:
        try:
            spec = json.load(handle)
        except json.JSONDecodeError as exc:
            raise _UsageError(f"--config JSON is malformed: {exc}") from None
    try:
        mode = spec["mode"]
        dgp_obj = spec["dgp"]
        test_obj = spec.get("test", {})
        replicates = int(spec["replicates"])
        alpha = float(spec.get("alpha", 0.05))
        engines = test_obj.get("engines", {})
        base = _engine(json.dumps(engines["base"])) if "base" in engines else RegressorSpec("random_forest")
        overrides = {
            slot: _engine(json.dumps(obj))
            for slot, obj in engines.items()
            if slot != "base"
        }
        config = TestConfig(
            kind=test_obj.get("kind", "gcm"),
            base_engine=base,
            overrides=overrides,
            k=int(test_obj.get("k", 5)),
            alpha=alpha,
        )
        dgp = DgpSpec(
            name=dgp_obj["name"],
            n=int(dgp_obj["n"]),
            d_x=int(dgp_obj.get("d_x", 1)),
            d_z=int(dgp_obj.get("d_z", 1)),
            params=dgp_obj.get("params", {}),
        )
    except (KeyError, TypeError, ValueError, CovmetError) as exc:
        raise _UsageError(f"--config is invalid: {exc}") from None
    if mode not in ("calibration", "power"):
        raise _UsageError(f"--config mode must be calibration or power, got {mode!r}")

    runner = run_calibration if mode == "calibration" else run_power
    result = runner(dgp, config, replicates, alpha,
                    rng=RngStream(seed=args.seed), threads=args.threads)
    body = result.to_json_dict(include_timings=args.timings)
    body["version"] = __version__
    body["config_run"] = _run_config(args, "simulate")
    if args.out:
        _write_json(args.out, body)
    if args.pvalues_csv:
        with open(args.pvalues_csv, "w", encoding="utf-8") as handle:
            handle.write(result.pvalues_csv_text())
    print(f"rejection_rate={repr(result.rejection_rate)}")
    return 0


def _cmd_bench(args) -> int:
    config = _test_config(args, args.test)
    dims = [(n, d) for n in _ints(args.n, "--n") for d in _ints(args.d, "--d")]
    try:
        rows = run_timing(dims, config, repeats=args.repeats,
                          rng=RngStream(seed=args.seed))
    except CovmetError as exc:
        raise _UsageError(str(exc)) from None
    for row in rows:
        print(
            f"n={row['n']} d={row['d']} regressions={row['regressions_per_test']} "
            f"median_seconds={row['median_seconds']:.4f}",
            file=sys.stderr,
        )
    cells = [
        {k: v for k, v in row.items() if args.timings or k != "median_seconds"}
        for row in rows
    ]
    body = {
        "report": "bench",
        "cells": cells,
        "version": __version__,
        "config_run": _run_config(args, "bench"),
    }
    if args.out:
        _write_json(args.out, body)
    print(f"cells={len(cells)}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    if getattr(args, "seed", None) is not None and args.seed < 0:
        print("error: --seed must be >= 0", file=sys.stderr)
        return 2
    try:
        return args.handler(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc} (seed={getattr(args, 'seed', '?')})", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
