"""Command-line entry point.

Every command writes into ``--out`` and leaves a ``manifest.txt`` there: the
fully resolved configuration in the same key=value format the commands read,
plus the command name and the list of produced files.  Passing the manifest
back as ``--config`` reproduces the outputs.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .core import ArcSet
from .datagen import GenConfig, NoiseSpec, generate_dataset
from .features import CANDIDATE_POOL, DEFAULT_FEATURES, extract_dataset, feature_costs, rfe
from .io import (ArsdFormatError, ConfigError, format_config, read_arsd, read_config, write_arsd,
                 write_csv, write_index_list, write_pgm)
from .pipeline import (REPORT_HEADER, ExperimentConfig, aggregate_heatmap, accuracy_vs_arcs_sweep,
                       intra_grid, optimize_arcs, optimize_intra, optimize_point2d, run_full_baseline)
from .core import sample_stack

log = logging.getLogger("arcscan")

COMMANDS = ("gen", "bench-full", "rfe", "optimize-arcs", "optimize-intra", "optimize-2d", "sweep", "heatmap")

# keys that may appear in a config but are not experiment parameters
_META_KEYS = {"command", "artifacts", "version"}

_EXPERIMENT_KEYS = {
    "dataset": str, "sampling_mode": str, "arc_budget": int, "intra_rate": float,
    "point_budget": int, "noise": str, "split": str, "repetitions": int, "seed": int,
    "swarm_size": int, "iterations": int, "point2d_iterations": int, "inertia": float,
    "cognitive": float, "social": float, "velocity_clamp": float, "ridge": float, "features": str,
}
_COMMAND_KEYS = {
    "k_values": str, "noises": str, "intra_rates": str, "arcs": str, "min_features": int,
    "record_timing": str,
}
_DEFAULT_BENCH_NOISES = "clean,gauss:30,gauss:20,sp:0.1"


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.replace(",", " ").split()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


class Settings:
    """Resolved configuration for one command."""

    def __init__(self, command: str, raw: dict[str, str], seed_override: int | None):
        self.command = command
        self.raw = dict(raw)
        if seed_override is not None:
            self.raw["seed"] = str(seed_override)
        elif "seed" not in self.raw and os.environ.get("ARCSCAN_SEED"):
            self.raw["seed"] = os.environ["ARCSCAN_SEED"]
        self.values: dict[str, object] = {}

    def require(self, key: str) -> str:
        if key not in self.raw:
            raise ConfigError(f"missing config key: {key}")
        return self.raw[key]

    def get(self, key: str, default=None):
        return self.raw.get(key, default)


def _gen_config(s: Settings) -> GenConfig:
    known = set(GenConfig().as_dict())
    unknown = set(s.raw) - known - _META_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s) for gen: {', '.join(sorted(unknown))}")
    try:
        return GenConfig.from_mapping(s.raw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _experiment_config(s: Settings) -> ExperimentConfig:
    allowed = set(_EXPERIMENT_KEYS) | set(_COMMAND_KEYS) | _META_KEYS
    unknown = set(s.raw) - allowed
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    s.require("dataset")
    kw = {}
    for key, typ in _EXPERIMENT_KEYS.items():
        if key not in s.raw:
            continue
        raw = s.raw[key]
        try:
            if key == "noise":
                kw[key] = NoiseSpec.parse(raw)
            elif key == "split":
                kw[key] = tuple(_float_list(raw))
            elif key == "features":
                kw[key] = tuple(t.strip().upper() for t in raw.replace(",", " ").split())
            else:
                kw[key] = typ(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    try:
        return ExperimentConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _resolved_experiment(cfg: ExperimentConfig) -> dict[str, str]:
    return {
        "dataset": cfg.dataset, "sampling_mode": cfg.sampling_mode, "arc_budget": str(cfg.arc_budget),
        "intra_rate": repr(cfg.intra_rate), "point_budget": str(cfg.point_budget),
        "noise": _noise_text(cfg.noise), "split": ",".join(repr(x) for x in cfg.split),
        "repetitions": str(cfg.repetitions), "seed": str(cfg.seed), "swarm_size": str(cfg.swarm_size),
        "iterations": str(cfg.iterations), "point2d_iterations": str(cfg.point2d_iterations),
        "inertia": repr(cfg.inertia), "cognitive": repr(cfg.cognitive), "social": repr(cfg.social),
        "velocity_clamp": repr(cfg.velocity_clamp), "ridge": repr(cfg.ridge),
        "features": ",".join(cfg.features),
    }


def _noise_text(n: NoiseSpec) -> str:
    parts = []
    if n.gaussian_snr_db is not None:
        parts.append(f"gauss:{n.gaussian_snr_db!r}")
    if n.salt_pepper_fraction:
        parts.append(f"sp:{n.salt_pepper_fraction!r}")
    return "+".join(parts) or "clean"


class Run:
    """Output directory bookkeeping."""

    def __init__(self, out: Path):
        self.out = out
        out.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[str] = []

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.out / name

    def manifest(self, command: str, resolved: dict[str, str]) -> None:
        lines = {"command": command, "version": __version__}
        lines.update(resolved)
        lines["artifacts"] = ",".join(self.artifacts + ["manifest.txt"])
        (self.out / "manifest.txt").write_text(
            "# arcscan run manifest; pass as --config to reproduce\n" + format_config(lines))


def _timing(s: Settings, args) -> bool:
    return args.timing or _bool(s.get("record_timing", "false"))


def _report_rows(reports, timing: bool):
    for rep in reports:
        for row in rep.rows():
            if not timing:
                row[-1] = ""
            yield row


def _write_selections(run: Run, report, prefix: str):
    for i, sel in enumerate(report.selections):
        if isinstance(sel, ArcSet):
            write_index_list(run.path(f"{prefix}_rep{i:02d}.txt"), sel.indices)
        else:
            write_index_list(run.path(f"{prefix}_rep{i:02d}.txt"), sel.flat_indices())


def _write_heatmap(run: Run, reports, name: str = "heatmap"):
    hm = aggregate_heatmap(reports)
    if hm.mode == "arc":
        write_csv(run.path(f"{name}.csv"), ["column", "count"], enumerate(hm.counts.tolist()))
    else:
        write_csv(run.path(f"{name}.csv"), [f"c{c}" for c in range(hm.counts.shape[1])], hm.counts.tolist())
    write_pgm(run.path(f"{name}.pgm"), hm.grid())
    return hm


def cmd_gen(s: Settings, args, run: Run) -> dict[str, str]:
    cfg = _gen_config(s)
    images, labels = generate_dataset(cfg)
    write_arsd(run.path("dataset.arsd"), images, labels)
    log.info("wrote %d images", len(labels))
    return {k: repr(v) if isinstance(v, float) else str(v) for k, v in cfg.as_dict().items()}


def _load(cfg: ExperimentConfig):
    ds = read_arsd(cfg.dataset)
    return ds.images, ds.labels


def cmd_bench_full(s: Settings, args, run: Run, executor) -> dict[str, str]:
    cfg = _experiment_config(s)
    images, labels = _load(cfg)
    noises = [NoiseSpec.parse(t) for t in s.get("noises", _DEFAULT_BENCH_NOISES).split(",")]
    reports = [run_full_baseline(cfg.with_(noise=n), images, labels) for n in noises]
    for r in reports:
        log.info("full %s: mean accuracy %.4f", r.noise, r.mean_accuracy)
    write_csv(run.path("report.csv"), REPORT_HEADER, _report_rows(reports, _timing(s, args)))
    out = _resolved_experiment(cfg)
    out["noises"] = ",".join(_noise_text(n) for n in noises)
    return out


def cmd_rfe(s: Settings, args, run: Run, executor) -> dict[str, str]:
    cfg = _experiment_config(s)
    images, labels = _load(cfg)
    pool = cfg.features if "features" in s.raw else CANDIDATE_POOL
    min_features = int(s.get("min_features", len(DEFAULT_FEATURES)))
    matrix = extract_dataset(images, labels, None, pool, workers=args.threads)
    timing = _timing(s, args)
    costs = feature_costs(sample_stack(images, None), pool) if timing else None
    trace = rfe(matrix, min_features, cfg.seed, ridge=cfg.ridge, costs=costs)
    rows = [[t.step, len(t.active), t.removed or "", f"{t.accuracy:.6f}",
             f"{t.extraction_seconds:.6f}" if timing else ""] for t in trace]
    write_csv(run.path("rfe_trace.csv"), ["step", "n_features", "removed_feature", "accuracy",
                                          "extraction_seconds"], rows)
    (run.path("selected_features.txt")).write_text("\n".join(trace[-1].active) + "\n")
    out = _resolved_experiment(cfg)
    out["features"] = ",".join(pool)
    out["min_features"] = str(min_features)
    return out


def cmd_optimize_arcs(s: Settings, args, run: Run, executor) -> dict[str, str]:
    cfg = _experiment_config(s).with_(sampling_mode="latitude")
    images, labels = _load(cfg)
    rep = optimize_arcs(cfg, images, labels, executor)
    log.info("k=%d mean accuracy %.4f", cfg.arc_budget, rep.mean_accuracy)
    write_csv(run.path("report.csv"), REPORT_HEADER, _report_rows([rep], _timing(s, args)))
    _write_selections(run, rep, "arcs")
    _write_heatmap(run, [rep])
    return _resolved_experiment(cfg)


def cmd_optimize_intra(s: Settings, args, run: Run, executor) -> dict[str, str]:
    cfg = _experiment_config(s).with_(sampling_mode="intra_latitude")
    images, labels = _load(cfg)
    out = _resolved_experiment(cfg)
    if "arcs" in s.raw:
        arcs = ArcSet(_int_list(s.raw["arcs"]))
        cfg = cfg.with_(arc_budget=len(arcs))
        out["arcs"] = ",".join(map(str, arcs.indices))
        reports = []
    else:
        lat = optimize_arcs(cfg.with_(sampling_mode="latitude"), images, labels, executor)
        arcs = lat.selections
        reports = [lat]
        _write_selections(run, lat, "arcs")
    intra = optimize_intra(cfg, arcs, images, labels, executor)
    log.info("k=%d rate=%g mean accuracy %.4f", cfg.arc_budget, cfg.intra_rate, intra.mean_accuracy)
    write_csv(run.path("report.csv"), REPORT_HEADER, _report_rows(reports + [intra], _timing(s, args)))
    _write_selections(run, intra, "mask")
    _write_heatmap(run, [intra])
    return out


def cmd_optimize_2d(s: Settings, args, run: Run, executor) -> dict[str, str]:
    cfg = _experiment_config(s).with_(sampling_mode="point2d")
    images, labels = _load(cfg)
    rep = optimize_point2d(cfg, images, labels, executor)
    log.info("budget=%d mean accuracy %.4f", cfg.point_budget, rep.mean_accuracy)
    write_csv(run.path("report.csv"), REPORT_HEADER, _report_rows([rep], _timing(s, args)))
    _write_selections(run, rep, "mask")
    _write_heatmap(run, [rep])
    return _resolved_experiment(cfg)


def cmd_sweep(s: Settings, args, run: Run, executor) -> dict[str, str]:
    cfg = _experiment_config(s)
    images, labels = _load(cfg)
    k_values = _int_list(s.get("k_values", "1,2,3,4,5,6,7,8,9,10,11,12,13,14"))
    out = _resolved_experiment(cfg)
    out["k_values"] = ",".join(map(str, k_values))
    if "intra_rates" in s.raw:
        rates = _float_list(s.raw["intra_rates"])
        reports = intra_grid(cfg, k_values, rates, images, labels, executor)
        out["intra_rates"] = ",".join(repr(r) for r in rates)
    else:
        noises = [NoiseSpec.parse(t) for t in s.get("noises", _noise_text(cfg.noise)).split(",")]
        reports = accuracy_vs_arcs_sweep(cfg, k_values, noises, images, labels, executor)
        out["noises"] = ",".join(_noise_text(n) for n in noises)
    write_csv(run.path("sweep.csv"), REPORT_HEADER, _report_rows(reports, _timing(s, args)))
    summary = [[r.mode, r.k, f"{r.intra_rate:g}", r.noise, f"{r.mean_accuracy:.6f}", r.sampled_points]
               for r in reports]
    write_csv(run.path("summary.csv"), ["mode", "k", "intra_rate", "noise", "mean_accuracy", "points"], summary)
    return out


def cmd_heatmap(s: Settings, args, run: Run, executor) -> dict[str, str]:
    cfg = _experiment_config(s)
    images, labels = _load(cfg)
    if cfg.sampling_mode == "point2d":
        reports = [optimize_point2d(cfg, images, labels, executor)]
    elif cfg.sampling_mode == "latitude":
        reports = [optimize_arcs(cfg, images, labels, executor)]
    else:
        raise ConfigError("heatmap needs sampling_mode = latitude or point2d")
    hm = _write_heatmap(run, reports)
    log.info("heatmap over %d runs, %d selections", cfg.repetitions, hm.total)
    write_csv(run.path("report.csv"), REPORT_HEADER, _report_rows(reports, _timing(s, args)))
    return _resolved_experiment(cfg)


_HANDLERS = {
    "bench-full": cmd_bench_full, "rfe": cmd_rfe, "optimize-arcs": cmd_optimize_arcs,
    "optimize-intra": cmd_optimize_intra, "optimize-2d": cmd_optimize_2d, "sweep": cmd_sweep,
    "heatmap": cmd_heatmap,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arcscan", description="Compressed learning on ARS images.")
    parser.add_argument("--version", action="version", version=f"arcscan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="key=value config file")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        p.add_argument("--seed", type=int, help="overrides the config seed and ARCSCAN_SEED")
        p.add_argument("--dataset", help="overrides the config dataset path")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker threads for fitness evaluation")
        p.add_argument("--timing", action="store_true",
                       help="write wall-clock columns (makes outputs non-reproducible)")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.threads < 1:
        parser.print_usage(sys.stderr)
        print("arcscan: error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        raw = read_config(args.config) if args.config else {}
        if raw.get("command") not in (None, args.command):
            raise ConfigError(f"manifest was written by {raw['command']!r}, not {args.command!r}")
        if args.dataset:
            raw["dataset"] = args.dataset
        settings = Settings(args.command, raw, args.seed)
        run = Run(args.out)
        if args.command == "gen":
            resolved = cmd_gen(settings, args, run)
        else:
            executor = ThreadPoolExecutor(args.threads) if args.threads > 1 else None
            try:
                resolved = _HANDLERS[args.command](settings, args, run, executor)
            finally:
                if executor is not None:
                    executor.shutdown()
        if args.timing:
            resolved["record_timing"] = "true"
        run.manifest(args.command, resolved)
    except (ConfigError, ArsdFormatError, FileNotFoundError, ValueError, KeyError, RuntimeError) as exc:
        print(f"arcscan: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
