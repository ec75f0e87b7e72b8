"""Command-line driver: generate data, sample chains, diagnose, export plot data.

Typical pipeline::

    mlda generate-data --output runs
    mlda sample --output runs --aem on
    mlda sample --output runs --aem off
    mlda diagnose runs/aem
"""

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .darcy import BACKEND, DarcyProblem, generate_synthetic_data, write_field_csv
from .diagnostics import acceptance_rate, effective_sample_size, move_rate, split_rhat
from .errors import ConfigurationError, EvaluationError, NumericalError
from .hierarchy import MLDASampler, MldaStats, ModelHierarchy
from .kernel import ProposalConfig

log = logging.getLogger("mlda")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
_DATA_STREAM = 0xDA7A


# -- setup helpers -----------------------------------------------------------------


def build_problem(config):
    return DarcyProblem.build(
        m0=config.m0, n_levels=config.n_levels, n_modes=config.n_modes, sigma=config.sigma,
        lam=config.lam, obs_per_side=config.obs_per_side, noise_std=config.noise_std,
        locations=config.locations,
    )


def proposal_config(config):
    return ProposalConfig(step_size=config.step_size, tune_interval=config.tune_interval,
                          tune_factor=config.tune_factor, coordinatewise=config.coordinatewise)


def _fmt(x):
    return f"{x:.17g}"


def write_data_csv(path, locations, d_obs):
    with open(path, "w", newline="") as fh:
        fh.write("x1,x2,d_obs\n")
        for (x1, x2), d in zip(locations, d_obs):
            fh.write(f"{_fmt(x1)},{_fmt(x2)},{_fmt(d)}\n")


def read_data_csv(path):
    """Returns ``(locations (M, 2), d_obs (M,))``."""
    try:
        with open(path) as fh:
            header = fh.readline().strip()
            table = np.loadtxt(fh, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read data file {path}: {exc}") from None
    if header != "x1,x2,d_obs" or table.shape[1] != 3:
        raise ConfigurationError(f"{path} is not a data file written by generate-data")
    return table[:, :2], table[:, 2]


def trace_header(n_modes):
    return [f"theta_{i + 1}" for i in range(n_modes)] + ["accepted", "loglik"]


def write_trace_csv(path, trace):
    """One row per post-burn-in sample, 17 significant digits."""
    header = trace_header(trace.samples.shape[1])
    lines = [",".join(header)]
    for theta, acc, ll in zip(trace.samples, trace.accepted, trace.log_likelihood):
        lines.append(",".join([*map(_fmt, theta), "1" if acc else "0", _fmt(ll)]))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace_csv(path):
    """Returns ``(header list, values (N, R + 2))``."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        values = np.loadtxt(fh, delimiter=",", ndmin=2)
    if values.size == 0:
        values = np.empty((0, len(header)))
    return header, values


def _json_dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- chain orchestration -----------------------------------------------------------


def run_chain(hierarchy, config, index):
    """One chain seeded ``base_seed + index``, started from a prior draw.

    Returns ``(trace, sampler, initial, seconds)``.
    """
    seed = config.base_seed + index
    rng = np.random.default_rng(seed)
    initial = rng.standard_normal(config.n_modes)
    sampler = MLDASampler(hierarchy, proposal=proposal_config(config), aem=config.aem,
                          freeze_aem_after_burnin=config.freeze_aem_after_burnin, rng=rng)
    start = time.perf_counter()
    trace = sampler.sample(config.n_samples, config.n_burnin, initial)
    return trace, sampler, initial, time.perf_counter() - start


def _chain_metadata(config, index, trace, sampler, initial, seconds):
    stats = sampler.run_stats
    top = config.n_levels - 1
    sampling = stats.sampling

    def rates(fn):
        out = []
        for level in range(config.n_levels):
            try:
                out.append(fn(sampling, level))
            except ValueError:
                out.append(None)
        return out

    return {
        "chain": index,
        "seed": config.base_seed + index,
        "config": config.to_dict(),
        "initial": initial.tolist(),
        "stats": stats.to_dict(),
        "acceptance_rate": rates(acceptance_rate),
        "move_rate_finest": rates(move_rate)[top],
        "step_size": sampler.config.step_size,
        "step_size_history": list(sampler.tuner.history),
        "aem": trace.bias,
        "wall_time": seconds,
        "backend": BACKEND,
        "version": __version__,
    }


def _n_threads(n_chains):
    raw = os.environ.get("MLDA_THREADS")
    if raw is None:
        return max(1, min(os.cpu_count() or 1, n_chains))
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigurationError(f"MLDA_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(cap, n_chains))


def sample_chains(config, data, out_dir):
    """Run all chains and write their trace files; returns the written paths.

    On failure a manifest listing the completed chains is written before the
    error propagates.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = build_problem(config)
    hierarchy = ModelHierarchy(problem.forward_maps, config.subchain_lengths, problem.noise, data)
    written, failures = {}, {}

    def job(index):
        trace, sampler, initial, seconds = run_chain(hierarchy, config, index)
        csv_path = out_dir / f"chain_{index:02d}.csv"
        write_trace_csv(csv_path, trace)
        _json_dump(csv_path.with_suffix(".json"),
                   _chain_metadata(config, index, trace, sampler, initial, seconds))
        log.info("chain %d done in %.1f s", index, seconds)
        return str(csv_path)

    def guarded(index):
        try:
            written[index] = job(index)
        except Exception as exc:
            failures[index] = exc

    threads = _n_threads(config.n_chains)
    if threads == 1:
        for index in range(config.n_chains):
            guarded(index)
            if failures:
                break
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(guarded, range(config.n_chains)))

    manifest = {
        "status": "failed" if failures else "complete",
        "config": config.to_dict(),
        "chains": {str(i): written[i] for i in sorted(written)},
        "failed": {str(i): f"{type(e).__name__}: {e}" for i, e in sorted(failures.items())},
    }
    _json_dump(out_dir / "manifest.json", manifest)
    if failures:
        raise failures[min(failures)]
    return [written[i] for i in range(config.n_chains)]


# -- diagnostics -------------------------------------------------------------------


def _expand_traces(paths):
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(p.glob("chain_*.csv")))
        else:
            out.append(p)
    if not out:
        raise ConfigurationError("no trace files found")
    for p in out:
        if not p.is_file():
            raise ConfigurationError(f"trace file not found: {p}")
    return out


def load_traces(paths):
    """Stack trace files into ``(header, draws (C, N, R), accepted (C, N))``."""
    files = _expand_traces(paths)
    header, draws, accepted = None, [], []
    for path in files:
        h, values = read_trace_csv(path)
        if header is None:
            header = h
        elif h != header:
            raise ConfigurationError(f"header of {path} differs from {files[0]}")
        if draws and values.shape[0] != draws[0].shape[0]:
            raise ConfigurationError(f"{path} has {values.shape[0]} rows, expected {draws[0].shape[0]}")
        draws.append(values[:, :-2])
        accepted.append(values[:, -2])
    return header, np.array(draws), np.array(accepted), files


def diagnose(paths):
    """Per-parameter ESS / R-hat rows plus a run summary from the sidecars."""
    header, draws, accepted, files = load_traces(paths)
    rows = []
    for r, name in enumerate(header[:-2]):
        rows.append((name, effective_sample_size(draws[:, :, r]), split_rhat(draws[:, :, r])))

    summary = {"n_chains": len(files), "n_samples": int(draws.shape[1]),
               "moved_fraction": float(accepted.mean()) if accepted.size else None}
    metas = [f.with_suffix(".json") for f in files]
    if all(m.is_file() for m in metas):
        total, wall = None, 0.0
        for m in metas:
            with open(m) as fh:
                meta = json.load(fh)
            stats = MldaStats.from_dict(meta["stats"]["sampling"])
            total = stats if total is None else total + stats
            wall += meta["wall_time"]
        summary["acceptance_rate"] = []
        for level in range(total.n_levels):
            try:
                summary["acceptance_rate"].append(acceptance_rate(total, level))
            except ValueError:
                summary["acceptance_rate"].append(None)
        summary["move_rate_finest"] = move_rate(total, total.n_levels - 1)
        summary["stats"] = total.to_dict()
        summary["forward_evaluations"] = total.evaluations.tolist()
        summary["wall_time"] = wall
    return rows, summary


def write_report(path, rows):
    with open(path, "w", newline="") as fh:
        fh.write("parameter,ess,rhat\n")
        for name, ess, rhat in rows:
            fh.write(f"{name},{_fmt(ess)},{_fmt(rhat)}\n")


def plot_rows(paths, parameters):
    header, draws, _, _ = load_traces(paths)
    names = header[:-2]
    for p in parameters:
        if p not in names:
            raise ConfigurationError(f"unknown parameter {p!r}; traces have {names[0]}..{names[-1]}")
    for p in parameters:
        col = names.index(p)
        for c in range(draws.shape[0]):
            series = draws[c, :, col]
            running = np.cumsum(series) / np.arange(1, series.size + 1)
            for i, (v, rm) in enumerate(zip(series, running)):
                yield c, i, p, v, rm


# -- commands ----------------------------------------------------------------------


def _config_from_args(args):
    config = load_config(args.config)
    changes = {"output": args.output, "base_seed": args.seed}
    if getattr(args, "aem", None) is not None:
        changes["aem"] = args.aem == "on"
    for attr, name in (("chains", "n_chains"), ("samples", "n_samples"), ("burnin", "n_burnin")):
        if getattr(args, attr, None) is not None:
            changes[name] = getattr(args, attr)
    return config.replace(**changes)


def cmd_generate_data(args):
    config = _config_from_args(args)
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(config)
    rng = np.random.default_rng([_DATA_STREAM, config.base_seed])
    theta_true = rng.standard_normal(config.n_modes)
    d_obs, clean = generate_synthetic_data(theta_true, problem.forward_maps[-1], problem.noise, rng)
    write_data_csv(out / "data.csv", problem.obs.locations, d_obs)
    _json_dump(out / "truth.json", {
        "theta_true": theta_true.tolist(),
        "seed": config.base_seed,
        "clean_output": clean.tolist(),
        "noise_std_realised": float(np.std(d_obs - clean, ddof=1)),
        "config": config.to_dict(),
    })
    for fm in problem.forward_maps:
        level = fm.grid.level
        write_field_csv(out / f"true_log_field_level{level}.csv", fm.log_permeability(theta_true), level,
                        "log_permeability")
        write_field_csv(out / f"true_pressure_level{level}.csv", fm.pressure(theta_true), level, "pressure")
    print(f"wrote {out / 'data.csv'} ({d_obs.size} observations)")
    return EXIT_OK


def cmd_sample(args):
    config = _config_from_args(args)
    data_path = Path(args.data) if args.data else Path(config.output) / "data.csv"
    locations, d_obs = read_data_csv(data_path)
    if d_obs.size != config.n_obs:
        raise ConfigurationError(f"{data_path} has {d_obs.size} observations, config expects {config.n_obs}")
    expected = build_problem(config).obs.locations
    if not np.allclose(locations, expected, rtol=0, atol=1e-12):
        raise ConfigurationError(f"observation locations in {data_path} do not match the config")
    out_dir = Path(config.output) / ("aem" if config.aem else "vanilla")
    paths = sample_chains(config, d_obs, out_dir)
    print(f"wrote {len(paths)} chains to {out_dir}")
    return EXIT_OK


def cmd_diagnose(args):
    rows, summary = diagnose(args.traces)
    first = _expand_traces(args.traces)[0].parent
    report = Path(args.report) if args.report else first / "diagnostics.csv"
    write_report(report, rows)
    _json_dump(report.with_name(report.stem + "_summary.json"), summary)
    for name, ess, rhat in rows[: args.show]:
        print(f"{name:>10}  ess={ess:9.1f}  rhat={rhat:6.3f}")
    if "acceptance_rate" in summary:
        rates = ", ".join("-" if r is None else f"{r:.3f}" for r in summary["acceptance_rate"])
        print(f"acceptance per level: {rates}; finest-level move rate {summary['move_rate_finest']:.3f}")
    print(f"wrote {report}")
    return EXIT_OK


def cmd_plot_data(args):
    rows = list(plot_rows(args.traces, args.parameters))
    out = Path(args.out) if args.out else _expand_traces(args.traces)[0].parent / "plot_data.csv"
    with open(out, "w", newline="") as fh:
        fh.write("chain,iteration,parameter,value,running_mean\n")
        for c, i, p, v, rm in rows:
            fh.write(f"{c},{i},{p},{_fmt(v)},{_fmt(rm)}\n")
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="mlda", description="Multilevel delayed acceptance on Darcy flow.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML config file (defaults reproduce the experiment)")
        p.add_argument("--output", help="output directory")
        p.add_argument("--seed", type=int, help="base seed, overrides the config")

    p = sub.add_parser("generate-data", help="draw a true parameter and write noisy observations")
    common(p)
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("sample", help="run independent MLDA chains")
    common(p)
    p.add_argument("--data", help="data file (default: OUTPUT/data.csv)")
    p.add_argument("--aem", choices=("on", "off"), help="adaptive error model")
    p.add_argument("--chains", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--burnin", type=int)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("diagnose", help="ESS and split R-hat per parameter")
    p.add_argument("traces", nargs="+", help="trace files or directories")
    p.add_argument("--report", help="report CSV (default: next to the traces)")
    p.add_argument("--show", type=int, default=5, help="parameters to print")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("plot-data", help="long-format trace series with running means")
    p.add_argument("traces", nargs="+", help="trace files or directories")
    p.add_argument("--parameters", nargs="+", default=["theta_1"])
    p.add_argument("--out", help="output CSV (default: next to the traces)")
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, EvaluationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
