"""Replicated error tables, oracle comparison and rate sweeps for the
splitting-rate reconstruction experiment."""

from __future__ import annotations

import csv
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .estimators import EstimatorConfig, estimate_b, oracle_estimate, splitting_grid
from .kernels import GrowthFragModel, splitting_rate
from .simulate import RootLaw, simulate_tree
from .tree import TreeSample
from .wavelet import WaveletSpec


@dataclass(frozen=True)
class TrialRate:
    """Named splitting rate: baseline hazard plus an optional tent bump."""

    kind: str = "baseline"
    spike_c: float = 0.0
    spike_j: int = 0

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if np.any(x <= 0.0) or np.any(x >= 5.0):
            raise ValueError("splitting rate is defined on (0, 5) only")
        return splitting_rate(x, self.spike_c, self.spike_j)

    def model(self, tau: float = 2.0, **kwargs) -> GrowthFragModel:
        return GrowthFragModel(
            tau=tau, spike_c=self.spike_c, spike_j=self.spike_j, **kwargs
        )


TRIAL_RATES = {
    "baseline": TrialRate("baseline", 0.0, 0),
    "large": TrialRate("large", 3.0, 1),
    "high": TrialRate("high", 9.0, 4),
}

# threshold constants for the error tables, one per trial rate, calibrated
# against the reference error/compression levels in this package's
# coefficient normalisation (the literature values 10/15 belong to a
# different wavelet-coefficient scaling and zero every detail here)
DEFAULT_C = {"baseline": 0.6, "large": 0.6, "high": 2.2}


def trial_rate_eval(rate: TrialRate, x):
    return rate(x)


def relative_error(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Discrete relative L2 error ||est - truth|| / ||truth|| on a grid."""
    estimate = np.asarray(estimate, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if estimate.shape != truth.shape:
        raise ValueError(f"grid mismatch: {estimate.shape} vs {truth.shape}")
    denom = float(np.linalg.norm(truth))
    if denom == 0.0:
        raise ValueError("truth has zero norm")
    return float(np.linalg.norm(estimate - truth) / denom)


@dataclass
class ErrorStats:
    """Aggregated replicate errors of one table cell."""

    spike: str
    n: int
    index_set: str
    estimator: str
    errors: np.ndarray = field(repr=False)
    compressions: np.ndarray = field(repr=False)
    j_stars: np.ndarray = field(repr=False)
    failures: int = 0

    @property
    def mean(self) -> float:
        return float(self.errors.mean())

    @property
    def sd(self) -> float:
        return float(self.errors.std())

    @property
    def compression(self) -> float:
        """Mean percentage of detail coefficients zeroed by the threshold."""
        return float(np.nan) if self.compressions.size == 0 else float(self.compressions.mean())

    @property
    def j_star(self) -> int | None:
        """Most frequent oracle level across replicates."""
        if self.j_stars.size == 0:
            return None
        return int(Counter(self.j_stars.tolist()).most_common(1)[0][0])


@dataclass
class TableConfig:
    """Protocol of one error-table run."""

    spikes: tuple = ("large", "high")
    n_list: tuple = (12, 15)
    reps: int = 100
    index_sets: tuple = ("tree", "generation")
    estimators: tuple = ("threshold", "oracle")
    c: dict = field(default_factory=lambda: dict(DEFAULT_C))
    varpi: float = 1e-3
    tau: float = 2.0
    domain: tuple = (1.5, 4.8)
    root: RootLaw = field(default_factory=RootLaw)
    base_seed: int = 0
    j_max: int = 10
    threads: int = 1
    # coarse block of at least the filter length (16 taps at order 8),
    # the usual constraint for order-8 boundary treatments
    wavelet: WaveletSpec = field(default_factory=lambda: WaveletSpec(order=8, j0=4))


def _replicate_cells(args):
    """All cell results from one simulated tree (one replicate)."""
    cfg_t, spike, n, rep = args
    rate = TRIAL_RATES[spike]
    model = rate.model(tau=cfg_t.tau)
    seed = cfg_t.base_seed + rep
    tree = simulate_tree(model, cfg_t.root, n, seed)
    est_cfg = EstimatorConfig(
        target="b",
        c=cfg_t.c.get(spike, DEFAULT_C["baseline"]),
        varpi=cfg_t.varpi,
        domain=cfg_t.domain,
        tau=cfg_t.tau,
        wavelet=cfg_t.wavelet,
    )
    out = []
    grid = splitting_grid(cfg_t.domain, len(tree.traits))
    truth = rate(grid)
    for index_set in cfg_t.index_sets:
        for estimator in cfg_t.estimators:
            if estimator == "threshold":
                est = estimate_b(tree, est_cfg, index_set=index_set)
                err = relative_error(est.values, truth)
                comp = 100.0 * (1.0 - est.kept_fraction)
                j_star = None
            elif estimator == "oracle":
                res = oracle_estimate(
                    tree, truth, est_cfg, index_set=index_set, j_max=cfg_t.j_max
                )
                err = res.errors[res.j_star]
                comp = None
                j_star = res.j_star
            else:
                raise ValueError(f"unknown estimator {estimator!r}")
            out.append(
                {
                    "spike": spike,
                    "n": n,
                    "index": index_set,
                    "estimator": estimator,
                    "replicate": rep,
                    "seed": seed,
                    "error": err,
                    "compression": comp,
                    "J_star": j_star,
                }
            )
    return out


def run_table(cfg: TableConfig) -> tuple[list[ErrorStats], list[dict]]:
    """Replicated splitting-rate error table.

    Returns per-cell aggregated stats and the flat per-replicate records
    they were computed from.  Replicate ``i`` always uses seed
    ``base_seed + i``, so cells sharing (spike, n) share trees and runs
    are reproducible regardless of thread count.
    """
    if cfg.reps < 1:
        raise ValueError("need at least one replicate")
    tasks = [
        (cfg, spike, n, rep)
        for spike in cfg.spikes
        for n in cfg.n_list
        for rep in range(cfg.reps)
    ]
    records: list[dict] = []
    failures: Counter = Counter()
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            futures = [pool.submit(_replicate_cells, t) for t in tasks]
            for task, fut in zip(tasks, futures):
                try:
                    records.extend(fut.result())
                except Exception:
                    failures[(task[1], task[2])] += 1
    else:
        for task in tasks:
            try:
                records.extend(_replicate_cells(task))
            except Exception:
                failures[(task[1], task[2])] += 1
    stats = []
    for spike in cfg.spikes:
        for n in cfg.n_list:
            for index_set in cfg.index_sets:
                for estimator in cfg.estimators:
                    rows = [
                        r
                        for r in records
                        if (r["spike"], r["n"], r["index"], r["estimator"])
                        == (spike, n, index_set, estimator)
                    ]
                    stats.append(
                        ErrorStats(
                            spike=spike,
                            n=n,
                            index_set=index_set,
                            estimator=estimator,
                            errors=np.array([r["error"] for r in rows]),
                            compressions=np.array(
                                [r["compression"] for r in rows if r["compression"] is not None]
                            ),
                            j_stars=np.array(
                                [r["J_star"] for r in rows if r["J_star"] is not None],
                                dtype=np.int64,
                            ),
                            failures=failures[(spike, n)],
                        )
                    )
    return stats, records


@dataclass
class RateSweepResult:
    n_list: tuple
    tree_sizes: np.ndarray
    mean_errors: np.ndarray
    slope: float


def rate_sweep(
    spike: str = "large",
    n_list: tuple = (10, 12, 14),
    reps: int = 20,
    index_set: str = "tree",
    base_seed: int = 0,
    **table_kwargs,
) -> RateSweepResult:
    """Mean error per tree size and the fitted log-log slope."""
    if len(n_list) < 3:
        raise ValueError("need at least 3 tree sizes for a slope")
    cfg = TableConfig(
        spikes=(spike,),
        n_list=tuple(n_list),
        reps=reps,
        index_sets=(index_set,),
        estimators=("threshold",),
        base_seed=base_seed,
        **table_kwargs,
    )
    stats, _ = run_table(cfg)
    means = np.array([s.mean for s in stats])
    sizes = np.array([2.0 ** (n + 1) - 1 for n in n_list])
    slope = float(np.polyfit(np.log(sizes), np.log(means), 1)[0])
    return RateSweepResult(
        n_list=tuple(n_list), tree_sizes=sizes, mean_errors=means, slope=slope
    )


# -- CSV emission ------------------------------------------------------

def _cell_fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


TABLE_COLUMNS = ["spike", "n", "index", "estimator", "mean_err", "sd_err", "compression", "J_star"]


def table_to_csv(stats: list[ErrorStats], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE_COLUMNS)
        for s in stats:
            comp = None if s.compressions.size == 0 else s.compression
            w.writerow(
                [
                    s.spike,
                    s.n,
                    s.index_set,
                    s.estimator,
                    _cell_fmt(s.mean),
                    _cell_fmt(s.sd),
                    _cell_fmt(comp),
                    _cell_fmt(s.j_star),
                ]
            )


def replicates_to_csv(records: list[dict], path) -> None:
    cols = ["spike", "n", "index", "estimator", "replicate", "seed", "error", "compression", "J_star"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in records:
            w.writerow([_cell_fmt(r[c]) for c in cols])
