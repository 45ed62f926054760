"""Command-line front end.

Subcommands: partitions, simulate, fit, study, project.  File-producing
commands compute everything first and write artifacts only on success,
so a failed run never leaves partial outputs; each successful run drops
a JSON manifest embedding the fully resolved configuration, and a study
can be replayed bit-exactly by pointing --config at that manifest.

Exit codes: 0 success; 2 configuration/validation error; 3 resource
guard; 4 numerical failure; 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .dataio import (
    parse_config,
    read_dataset_csv,
    read_sites_csv,
    write_dataset_csv,
    write_manifest,
    write_resolved_config,
    write_sites_csv,
)
from .errors import (
    ConfigError,
    DomainError,
    InitializationError,
    MaxStableError,
    ModelValidityError,
    ResourceGuardError,
)
from .fit import FamilySpec, fit_model
from .likelihood import Dataset, build_scheme
from .partitions import (
    bell_number,
    build_partition_table,
    enumerate_partitions,
    enumerate_partitions_with_blocks,
    stirling2,
)
from .simulate import (
    RngSpec,
    sample_brown_resnick,
    sample_logistic,
    sample_mixture,
    sample_reich_shaby,
)
from .study import (
    StudyConfig,
    project_cost,
    read_timings,
    run_efficiency_study,
    run_truncation_study,
    uniform_knot_grid,
    write_raw_estimates,
    write_report,
    write_timings,
)

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_NUMERICAL = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxstable",
        description="Full and composite likelihood inference for "
                    "max-stable models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partitions", help="enumerate or count set partitions")
    p.add_argument("--n", type=int, required=True, help="ground-set size")
    p.add_argument("--blocks", type=int, default=None,
                   help="restrict to partitions with this many blocks")
    p.add_argument("--count-only", action="store_true",
                   help="print only the partition count")
    p.add_argument("--build-table", action="store_true",
                   help="build the packed subset-rank table and print its size")
    p.add_argument("--memory-cap", type=int, default=None,
                   help="table memory cap in bytes")
    p.add_argument("--out", type=Path, default=None, help="output directory")

    p = sub.add_parser("simulate", help="draw replicates from a model")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None,
                   help="output directory (overrides output.dir)")

    p = sub.add_parser("fit", help="maximize a composite likelihood")
    p.add_argument("--data", type=Path, required=True,
                   help="dataset CSV (replicate, site_1..site_Q)")
    p.add_argument("--sites", type=Path, default=None,
                   help="site CSV (id, x, y); required for spatial families "
                        "and truncation")
    p.add_argument("--model", required=True,
                   help="family spec, e.g. logistic, mixture:weights=0.6|0.4, "
                        "reich_shaby:knot_grid=6, brown_resnick")
    p.add_argument("--q", type=int, required=True, help="composite order")
    p.add_argument("--trunc", type=float, default=1.0,
                   help="fraction of subsets retained (by max set distance)")
    p.add_argument("--start", required=True,
                   help="comma-separated natural-scale start values")
    p.add_argument("--out", type=Path, default=None, help="output directory")

    p = sub.add_parser("study", help="run a Monte Carlo study from a config")
    p.add_argument("--config", type=Path, required=True,
                   help="key=value config or a manifest.json from a prior run")
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (results are identical for any value)")

    p = sub.add_parser("project", help="extrapolate likelihood cost to larger Q")
    p.add_argument("--timings", type=Path, required=True,
                   help="timings.csv from a study run")
    p.add_argument("--targets", required=True,
                   help="comma-separated q:Q pairs, e.g. 2:50,3:100")
    p.add_argument("--budget", type=float, default=None,
                   help="seconds per evaluation considered affordable")
    p.add_argument("--out", type=Path, default=None)
    return parser


def _parse_model_flag(text: str) -> FamilySpec:
    family, _, opts = text.partition(":")
    kwargs = {}
    for item in filter(None, opts.split(",")):
        key, _, value = item.partition("=")
        if not value:
            raise ConfigError(f"model option {item!r} is not key=value")
        if key == "weights":
            kwargs["weights"] = tuple(float(v) for v in value.split("|"))
        elif key == "knot_grid":
            kwargs["knots"] = uniform_knot_grid(int(value))
        elif key == "mvn_budget":
            kwargs["mvn_sample_budget"] = int(value)
        else:
            raise ConfigError(f"unknown model option {key!r}")
    return FamilySpec(family, **kwargs)


def _outdir(path: Path | None) -> Path:
    if path is None:
        raise ConfigError("this command writes files: pass --out DIRECTORY")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_partitions(args) -> int:
    n = args.n
    if args.count_only:
        count = stirling2(n, args.blocks) if args.blocks else bell_number(n)
        print(count)
        return EXIT_OK
    if args.build_table:
        t0 = time.perf_counter()
        table = build_partition_table(n, memory_cap=args.memory_cap)
        wall = time.perf_counter() - t0
        info = {"n": n, "partitions": int(table.row_ptr.shape[0] - 1),
                "table_bytes": table.memory_bytes()}
        print(f"n={n}: {info['partitions']} partitions, "
              f"{info['table_bytes']} bytes packed")
        if args.out is not None:
            out = _outdir(args.out)
            with open(out / "table_info.json", "w") as fh:
                json.dump(info, fh, indent=2)
                fh.write("\n")
            write_manifest(out / "manifest.json", "partitions",
                           {"n": str(n)}, ["table_info.json"], wall)
        return EXIT_OK
    parts = (enumerate_partitions_with_blocks(n, args.blocks) if args.blocks
             else enumerate_partitions(n))
    for part in parts:
        print("".join("{" + ",".join(map(str, b)) + "}" for b in part.blocks))
    return EXIT_OK


def _theta_from_config(cfg) -> tuple:
    family = cfg.get("model.family")
    if family == "logistic":
        return (cfg.get("model.alpha"),)
    if family == "mixture":
        return tuple(cfg.get("model.alphas"))
    if family == "reich_shaby":
        return (cfg.get("model.alpha"), cfg.get("model.tau"))
    return (cfg.get("model.lam"), cfg.get("model.nu"))


def _family_spec_from_config(cfg) -> FamilySpec:
    family = cfg.get("model.family")
    knots = None
    if cfg.get("model.knot_grid"):
        knots = uniform_knot_grid(cfg.get("model.knot_grid"))
    return FamilySpec(family, weights=tuple(cfg.get("model.weights") or ()),
                      knots=knots,
                      mvn_sample_budget=cfg.get("model.mvn_sample_budget"))


def _cmd_simulate(args) -> int:
    cfg = parse_config(args.config, "simulate")
    out = _outdir(args.out or (Path(cfg.get("output.dir"))
                               if cfg.get("output.dir") else None))
    t0 = time.perf_counter()

    rng = RngSpec(seed=cfg.get("rng.seed"), stream=cfg.get("rng.stream"),
                  algorithm=cfg.get("rng.algorithm"))
    gen = rng.generator()
    if cfg.get("sites.file"):
        sites = read_sites_csv(cfg.get("sites.file"))
    elif cfg.get("sites.count"):
        sites = gen.uniform(0.0, 1.0, (cfg.get("sites.count"), 2))
    else:
        raise ConfigError("simulate needs sites.count or sites.file",
                          key="sites.count")

    spec = _family_spec_from_config(cfg)
    theta = np.asarray(_theta_from_config(cfg), dtype=float)
    m = cfg.get("data.replicates")
    family = cfg.get("model.family")
    if family == "logistic":
        data = sample_logistic(len(sites), float(theta[0]), m, gen)
    elif family == "mixture":
        data = sample_mixture(len(sites), spec.build_model(theta, sites), m, gen)
    elif family == "reich_shaby":
        data = sample_reich_shaby(spec.build_model(theta, sites), m, gen)
    else:
        data = sample_brown_resnick(spec.build_model(theta, sites), m, gen)

    write_dataset_csv(out / "dataset.csv", data)
    write_sites_csv(out / "sites.csv", sites)
    with open(out / "params.json", "w") as fh:
        json.dump({"family": family,
                   "theta": {k: v for k, v in
                             zip(spec.parameter_names(), map(float, theta))},
                   "rng": {"seed": rng.seed, "stream": rng.stream,
                           "algorithm": rng.algorithm}},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_resolved_config(out / "resolved.cfg", cfg)
    write_manifest(out / "manifest.json", "simulate", cfg.resolved,
                   ["dataset.csv", "sites.csv", "params.json", "resolved.cfg"],
                   time.perf_counter() - t0)
    print(f"wrote {m} replicates at {len(sites)} sites to {out}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    t0 = time.perf_counter()
    data = read_dataset_csv(args.data)
    sites = read_sites_csv(args.sites) if args.sites else None
    if sites is not None:
        data = Dataset(values=data.values, locations=sites,
                       replicate_ids=data.replicate_ids)
    spec = _parse_model_flag(args.model)
    start = tuple(float(v) for v in args.start.split(","))
    scheme = build_scheme(data.Q, args.q, locations=sites, t=args.trunc)
    result = fit_model(data, spec, scheme, start)

    payload = {
        "family": spec.family,
        "theta_hat": {k: float(v) for k, v in
                      zip(spec.parameter_names(), result.theta_hat)},
        "objective": result.objective,
        "iterations": result.iterations,
        "evaluations": result.evaluations,
        "converged": result.converged,
        "wall_time_seconds": result.wall_time,
        "scheme": {"Q": scheme.Q, "q": scheme.q, "t": scheme.t,
                   "n_subsets": scheme.n_subsets},
        "telemetry": {
            "partial_evaluations": result.telemetry.n_partial_evaluations,
            "density_evaluations": result.telemetry.n_density_evaluations,
            "peak_table_bytes": result.telemetry.peak_table_bytes,
        },
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        out = _outdir(args.out)
        (out / "fit.json").write_text(text + "\n")
        write_manifest(out / "manifest.json", "fit",
                       {"data": str(args.data), "model": args.model,
                        "q": str(args.q), "trunc": repr(args.trunc),
                        "start": args.start,
                        **({"sites": str(args.sites)} if args.sites else {})},
                       ["fit.json"], time.perf_counter() - t0)
    return EXIT_OK


def _cmd_study(args) -> int:
    cfg = parse_config(args.config, "study")
    out = _outdir(args.out or (Path(cfg.get("output.dir"))
                               if cfg.get("output.dir") else None))
    threads = args.threads if args.threads is not None else cfg.get("resources.threads")
    if cfg.get("resources.memory_cap") is not None:
        # Worker processes inherit the environment, so the table guard
        # applies inside every fit as well.
        os.environ["MAXSTABLE_MEMORY_CAP"] = str(cfg.get("resources.memory_cap"))
    t0 = time.perf_counter()

    sites = read_sites_csv(cfg.get("sites.file")) if cfg.get("sites.file") else None
    knots = (uniform_knot_grid(cfg.get("model.knot_grid"))
             if cfg.get("model.knot_grid") else None)
    study_cfg = StudyConfig(
        family=cfg.get("model.family"),
        true_params=_theta_from_config(cfg),
        Q=cfg.get("sites.count"),
        m=cfg.get("data.replicates"),
        J=cfg.get("study.experiments"),
        q_list=cfg.get("study.q_list"),
        t_list=cfg.get("study.t_list"),
        seed=cfg.get("rng.seed"),
        knots=knots,
        mixture_weights=tuple(cfg.get("model.weights") or ()),
        sites=sites,
        n_jobs=threads,
        mvn_sample_budget=cfg.get("model.mvn_sample_budget"),
    )
    truncated = cfg.get("study.truncation_table") or len(study_cfg.t_list) > 1
    report = (run_truncation_study(study_cfg) if truncated
              else run_efficiency_study(study_cfg))

    outputs = ["report.csv", "raw_estimates.csv", "timings.csv", "resolved.cfg"]
    write_report(out / "report.csv", report.rows)
    write_raw_estimates(out / "raw_estimates.csv", study_cfg, report.raw)
    write_timings(out / "timings.csv", report.timings)
    if truncated:
        outputs.append("truncation_ratios.csv")
        with open(out / "truncation_ratios.csv", "w") as fh:
            fh.write("q,t,pct_of_untruncated,pct_best_prev_order_vs_full\n")
            for row in report.truncation_ratios:
                fh.write(f"{row['q']},{row['t']!r},{row['pct_of_untruncated']!r},"
                         f"{row['pct_best_prev_order_vs_full']!r}\n")
    write_resolved_config(out / "resolved.cfg", cfg)
    write_manifest(out / "manifest.json", "study", cfg.resolved, outputs,
                   time.perf_counter() - t0,
                   extra={"n_failures": report.n_failures,
                          "threads": threads})
    print(f"study complete: {len(report.raw)} fits, "
          f"{report.n_failures} failures -> {out}")
    return EXIT_OK


def _cmd_project(args) -> int:
    t0 = time.perf_counter()
    timings = read_timings(args.timings)
    measured = [(row.q, row.Q, row.mean_eval_seconds)
                for row in timings if row.t == 1.0
                and not math.isnan(row.mean_eval_seconds)]
    targets = []
    for item in args.targets.split(","):
        q_s, _, Q_s = item.partition(":")
        if not Q_s:
            raise ConfigError(f"target {item!r} is not q:Q")
        targets.append((int(q_s), int(Q_s)))
    rows = project_cost(measured, targets, budget=args.budget)

    header = "q,Q,Q_measured,measured_seconds,projected_seconds,t_for_budget,gap"
    lines = [header]
    for r in rows:
        lines.append(",".join([
            str(r.q), str(r.Q),
            "" if r.Q_measured is None else str(r.Q_measured),
            repr(r.measured_seconds), repr(r.projected_seconds),
            "" if r.t_for_budget is None else repr(r.t_for_budget),
            str(int(r.gap)),
        ]))
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out is not None:
        out = _outdir(args.out)
        (out / "projection.csv").write_text(text)
        write_manifest(out / "manifest.json", "project",
                       {"timings": str(args.timings), "targets": args.targets,
                        **({"budget": repr(args.budget)}
                           if args.budget is not None else {})},
                       ["projection.csv"], time.perf_counter() - t0)
    return EXIT_OK


_DISPATCH = {
    "partitions": _cmd_partitions,
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "study": _cmd_study,
    "project": _cmd_project,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ModelValidityError, InitializationError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MaxStableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
