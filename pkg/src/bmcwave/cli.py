"""Command-line entry point: simulation, estimation, bound validation and
the replicated error tables, bound together by one key=value config format."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import estimators, experiment, kernels, simulate, tree, wavelet
from .deviation import GF_DEMO_PARAMS, ErgodicityParams, validate_bounds
from .wavelet import WaveletSpec

# key -> (parser, default, validator, help)
_POS = lambda v: v > 0  # noqa: E731
_SCHEMA = {
    "model": (str, "gf", lambda v: v in ("gf", "bar"), "gf or bar"),
    "tau": (float, 2.0, _POS, "growth rate, > 0"),
    "spike_c": (float, 0.0, lambda v: v >= 0, "tent amplitude, >= 0"),
    "spike_j": (int, 0, lambda v: v >= 0, "tent scale, >= 0"),
    "bar.f0": (str, "tanh:1:1", None, "link preset, const:v or tanh:a:b"),
    "bar.f1": (str, "tanh:1:1", None, "link preset, const:v or tanh:a:b"),
    "bar.sigma0": (str, "const:1", None, "volatility preset, const:v"),
    "bar.sigma1": (str, "const:1", None, "volatility preset, const:v"),
    "c": (float, 10.0, lambda v: v >= 0, "threshold constant, >= 0"),
    "varpi": (float, 1e-3, _POS, "quotient floor, > 0"),
    "domain_lo": (float, 1.5, None, "left edge of the evaluation interval"),
    "domain_hi": (float, 4.8, None, "right edge of the evaluation interval"),
    "wavelet_order": (int, 8, lambda v: 1 <= v <= 10, "vanishing moments, 1..10"),
    "j0": (int, 2, lambda v: v >= 0, "coarsest pyramid level, >= 0"),
    "root": (str, "uniform:1.25:2.25", None, "root law, uniform:a:b or point:x"),
    "n": (int, 15, lambda v: v >= 0, "generations, >= 0"),
    "reps": (int, 100, _POS, "Monte Carlo replicates, > 0"),
    "base_seed": (int, 0, None, "seed of replicate 0"),
    "threads": (int, 0, lambda v: v >= 0, "worker processes, 0 = machine"),
    "out_dir": (str, ".", None, "output directory"),
    "R": (float, GF_DEMO_PARAMS.R, _POS, "ergodicity constant, > 0"),
    "rho": (float, GF_DEMO_PARAMS.rho, lambda v: 0.0 < v < 0.5, "must lie in (0, 0.5)"),
    "qd": (float, GF_DEMO_PARAMS.qd, lambda v: v >= 0, "transition density sup, >= 0"),
}


@dataclass
class RunConfig:
    """Validated configuration with record of explicitly set keys."""

    values: dict = field(default_factory=dict)
    explicit: set = field(default_factory=set)

    def __getitem__(self, key):
        return self.values[key]

    def was_set(self, key) -> bool:
        return key in self.explicit

    def set(self, key, raw):
        if key not in _SCHEMA:
            raise ValueError(f"unknown config key {key!r}")
        parse, _, check, hint = _SCHEMA[key]
        try:
            value = parse(raw)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"bad value for {key!r}: {raw!r} ({hint})") from exc
        if check is not None and not check(value):
            raise ValueError(f"{key} out of range: {raw!r} ({key} {hint})")
        self.values[key] = value
        self.explicit.add(key)


def parse_config(path=None) -> RunConfig:
    """Read a key=value config file; missing keys get documented defaults."""
    cfg = RunConfig(values={k: spec[1] for k, spec in _SCHEMA.items()})
    if path is not None:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key = value")
                key, raw = (s.strip() for s in line.split("=", 1))
                try:
                    cfg.set(key, raw)
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return cfg


def _build_kernel(cfg: RunConfig):
    if cfg["model"] == "gf":
        return kernels.GrowthFragModel(
            tau=cfg["tau"], spike_c=cfg["spike_c"], spike_j=cfg["spike_j"]
        )
    return kernels.bar_from_specs(
        cfg["bar.f0"], cfg["bar.f1"], cfg["bar.sigma0"], cfg["bar.sigma1"]
    )


def _apply_spike_name(cfg: RunConfig, name: str | None):
    if name is None:
        return
    rate = experiment.TRIAL_RATES[name]
    cfg.values["spike_c"] = rate.spike_c
    cfg.values["spike_j"] = rate.spike_j


def _est_config(cfg: RunConfig, target: str) -> estimators.EstimatorConfig:
    j0 = cfg["j0"] if cfg.was_set("j0") else (4 if target == "b" else 2)
    c = cfg["c"]
    if target == "b" and not cfg.was_set("c"):
        name = _spike_name(cfg)
        c = experiment.DEFAULT_C.get(name, experiment.DEFAULT_C["baseline"])
    return estimators.EstimatorConfig(
        target=target,
        c=c,
        varpi=cfg["varpi"],
        domain=(cfg["domain_lo"], cfg["domain_hi"]),
        tau=cfg["tau"],
        wavelet=WaveletSpec(order=cfg["wavelet_order"], j0=j0),
    )


def _spike_name(cfg: RunConfig) -> str:
    for name, rate in experiment.TRIAL_RATES.items():
        if (rate.spike_c, rate.spike_j) == (cfg["spike_c"], cfg["spike_j"]):
            return name
    return "custom"


def _out(cfg: RunConfig, path: str) -> str:
    if os.path.isabs(path):
        return path
    return os.path.join(cfg["out_dir"], path)


# -- subcommands -------------------------------------------------------

def _cmd_simulate(args, cfg: RunConfig) -> int:
    kernel = _build_kernel(cfg)
    root = simulate.RootLaw.from_spec(cfg["root"])
    sample = simulate.simulate_tree(kernel, root, cfg["n"], cfg["base_seed"])
    sample.save_csv(_out(cfg, args.out))
    return 0


def _cmd_autocorr(args, cfg: RunConfig) -> int:
    sample = tree.load_csv(args.infile)
    rows = simulate.generation_autocorr(sample, args.max_lag)
    with open(_out(cfg, args.out), "w", newline="") as fh:
        fh.write("lag,rho\n")
        for lag, rho in rows:
            fh.write(f"{int(lag)},{rho:.17g}\n")
    return 0


def _cmd_estimate(args, cfg: RunConfig) -> int:
    sample = tree.load_csv(args.infile)
    est_cfg = _est_config(cfg, args.target)
    if args.target == "nu":
        est = estimators.estimate_nu(sample, est_cfg)
    elif args.target == "q":
        est = estimators.estimate_q(sample, est_cfg)
    elif args.target == "p":
        est = estimators.estimate_p(sample, est_cfg)
    else:
        est = estimators.estimate_b(sample, est_cfg, index_set=args.index)
    wavelet.grid_to_csv(est, _out(cfg, args.out))
    if args.pyramid_out:
        wavelet.pyramid_to_csv(est.pyramid, _out(cfg, args.pyramid_out))
    return 0


def _cmd_deviation(args, cfg: RunConfig) -> int:
    if cfg["model"] != "gf":
        raise ValueError("bound validation is wired for the gf model")
    _apply_spike_name(cfg, args.spike)
    kernel = _build_kernel(cfg)
    params = ErgodicityParams(R=cfg["R"], rho=cfg["rho"], qd=cfg["qd"])
    kind, lo, hi = args.g.split(":")
    if kind != "indicator":
        raise ValueError(f"unsupported test function {args.g!r}")
    grid = np.linspace(args.delta_min, args.delta_max, args.deltas)
    report = validate_bounds(
        kernel,
        (float(lo), float(hi)),
        n=cfg["n"],
        reps=cfg["reps"],
        delta_grid=grid,
        params=params,
        root=simulate.RootLaw.from_spec(cfg["root"]),
        base_seed=cfg["base_seed"],
        threads=cfg["threads"] or os.cpu_count(),
    )
    variant = None if args.bound == "all" else args.bound
    report.to_csv(_out(cfg, args.out), variant=variant)
    return 0 if report.dominated_everywhere() else 1


def _table_config(args, cfg: RunConfig) -> experiment.TableConfig:
    index_sets = {
        "tree": ("tree",),
        "gen": ("generation",),
        "both": ("tree", "generation"),
    }[args.index]
    c = dict(experiment.DEFAULT_C)
    if cfg.was_set("c"):
        c = {name: cfg["c"] for name in c}
    return experiment.TableConfig(
        spikes=tuple(args.spike.split(",")),
        n_list=tuple(int(v) for v in args.n.split(",")),
        reps=cfg["reps"],
        index_sets=index_sets,
        estimators=("threshold", "oracle") if args.oracle else ("threshold",),
        c=c,
        varpi=cfg["varpi"],
        tau=cfg["tau"],
        domain=(cfg["domain_lo"], cfg["domain_hi"]),
        root=simulate.RootLaw.from_spec(cfg["root"]),
        base_seed=cfg["base_seed"],
        threads=cfg["threads"] or os.cpu_count(),
        wavelet=WaveletSpec(order=cfg["wavelet_order"], j0=cfg["j0"] if cfg.was_set("j0") else 4),
    )


def _cmd_table1(args, cfg: RunConfig) -> int:
    tbl = _table_config(args, cfg)
    stats, records = experiment.run_table(tbl)
    experiment.table_to_csv(stats, _out(cfg, args.out))
    stem, ext = os.path.splitext(args.out)
    experiment.replicates_to_csv(records, _out(cfg, f"{stem}_replicates{ext}"))
    return 0


def _cmd_ratesweep(args, cfg: RunConfig) -> int:
    result = experiment.rate_sweep(
        spike=args.spike,
        n_list=tuple(int(v) for v in args.n.split(",")),
        reps=cfg["reps"],
        base_seed=cfg["base_seed"],
        c=dict(experiment.DEFAULT_C) if not cfg.was_set("c") else {args.spike: cfg["c"]},
        varpi=cfg["varpi"],
        tau=cfg["tau"],
        domain=(cfg["domain_lo"], cfg["domain_hi"]),
        threads=cfg["threads"] or os.cpu_count(),
    )
    with open(_out(cfg, args.out), "w", newline="") as fh:
        fh.write("n,tree_size,mean_err\n")
        for n, size, err in zip(result.n_list, result.tree_sizes, result.mean_errors):
            fh.write(f"{n},{int(size)},{err:.17g}\n")
        fh.write(f"# slope,{result.slope:.17g}\n")
    return 0


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bmcwave",
        description="Simulation and adaptive wavelet estimation for bifurcating Markov chains",
    )
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--threads", type=int, help="worker processes (replicate-level)")
    p.add_argument("--seed", type=int, help="base seed (env BMC_SEED overrides)")
    p.add_argument("--out-dir", help="directory for output files")
    p.add_argument("--dry-run", action="store_true", help="print the resolved plan and exit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate one trait tree to CSV")
    s.add_argument("--model", choices=("gf", "bar"))
    s.add_argument("--spike", choices=tuple(experiment.TRIAL_RATES))
    s.add_argument("--n", type=int)
    s.add_argument("--seed", type=int, dest="sub_seed")
    s.add_argument("--out", default="tree.csv")

    s = sub.add_parser("autocorr", help="autocorrelation of ordered first-born traits")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--max-lag", type=int, default=20)
    s.add_argument("--out", default="autocorr.csv")

    s = sub.add_parser("estimate", help="run one estimator on a tree CSV")
    s.add_argument("--target", choices=("nu", "q", "p", "b"), required=True)
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--index", choices=("tree", "generation"), default="tree")
    s.add_argument("--c", type=float)
    s.add_argument("--varpi", type=float)
    s.add_argument("--out", default="est.csv")
    s.add_argument("--pyramid-out")

    s = sub.add_parser("deviation", help="Monte Carlo validation of the tail bounds")
    s.add_argument("--model", choices=("gf",))
    s.add_argument("--spike", choices=tuple(experiment.TRIAL_RATES))
    s.add_argument("--n", type=int)
    s.add_argument("--reps", type=int)
    s.add_argument("--g", default="indicator:1.5:2.0")
    s.add_argument("--bound", default="all", choices=("all",) + tuple(
        ("single-gen", "single-tree", "triplet-gen", "triplet-tree", "pairs")
    ))
    s.add_argument("--delta-min", type=float, default=0.01)
    s.add_argument("--delta-max", type=float, default=1.0)
    s.add_argument("--deltas", type=int, default=30)
    s.add_argument("--out", default="report.csv")

    s = sub.add_parser("table1", help="replicated splitting-rate error table")
    s.add_argument("--spike", default="large,high")
    s.add_argument("--n", default="12,15")
    s.add_argument("--reps", type=int)
    s.add_argument("--index", choices=("tree", "gen", "both"), default="both")
    s.add_argument("--seed", type=int, dest="sub_seed")
    s.add_argument("--no-oracle", dest="oracle", action="store_false")
    s.add_argument("--out", default="table.csv")

    s = sub.add_parser("ratesweep", help="error decay against tree size")
    s.add_argument("--spike", default="large")
    s.add_argument("--n", default="10,12,14")
    s.add_argument("--reps", type=int)
    s.add_argument("--seed", type=int, dest="sub_seed")
    s.add_argument("--out", default="sweep.csv")
    return p


_COMMANDS = {
    "simulate": _cmd_simulate,
    "autocorr": _cmd_autocorr,
    "estimate": _cmd_estimate,
    "deviation": _cmd_deviation,
    "table1": _cmd_table1,
    "ratesweep": _cmd_ratesweep,
}


def dispatch(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        for key, attr in (
            ("threads", "threads"),
            ("base_seed", "seed"),
            ("out_dir", "out_dir"),
        ):
            value = getattr(args, attr, None)
            if value is not None:
                cfg.set(key, value)
        for key, attr in (
            ("model", "model"),
            ("reps", "reps"),
            ("base_seed", "sub_seed"),
            ("c", "c"),
            ("varpi", "varpi"),
        ):
            value = getattr(args, attr, None)
            if value is not None:
                cfg.set(key, value)
        if isinstance(getattr(args, "n", None), int):
            cfg.set("n", args.n)
        if getattr(args, "spike", None) is not None and args.command == "simulate":
            _apply_spike_name(cfg, args.spike)
        env_seed = os.environ.get("BMC_SEED")
        if env_seed is not None:
            cfg.set("base_seed", env_seed)
        if args.dry_run:
            print(f"plan: {args.command}")
            for key in sorted(cfg.values):
                mark = "*" if cfg.was_set(key) else " "
                print(f"  {mark} {key} = {cfg.values[key]}")
            return 0
        return _COMMANDS[args.command](args, cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
