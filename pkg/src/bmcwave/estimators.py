"""Adaptive threshold estimators of the invariant density, the pair and
triplet transition densities, and the splitting rate, plus the oracle
benchmark and the minimax rate exponents used as diagnostics."""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, field, replace

import numpy as np

from .tree import TreeSample
from .wavelet import (
    DensityEstimate,
    WaveletSpec,
    bin_empirical,
    dwt_forward,
    dwt_inverse,
    evaluate_on_grid,
    hard_threshold,
    refine_scaling,
)


@dataclass
class EstimatorConfig:
    """Tuning of one estimator run.

    ``c`` scales the hard threshold, ``varpi`` floors quotient
    denominators, ``domain`` is the 1-d evaluation interval (products of it
    are used for the pair/triplet targets), and ``j_override`` pins the
    maximal resolution level instead of the sample-size rule.
    """

    target: str = "nu"
    c: float = 10.0
    varpi: float = 1e-3
    domain: tuple[float, float] = (1.5, 4.8)
    wavelet: WaveletSpec = field(default_factory=WaveletSpec)
    j_override: int | None = None
    tau: float = 2.0

    def __post_init__(self):
        if self.target not in ("nu", "q", "p", "b"):
            raise ValueError(f"unknown target {self.target!r}")
        if self.c < 0:
            raise ValueError("threshold constant must be >= 0")
        if self.varpi <= 0:
            raise ValueError("quotient floor must be > 0")
        if not self.domain[0] < self.domain[1]:
            raise ValueError("degenerate domain")


def resolution_level(n_samples: int, dim: int) -> int:
    """Maximal level floor(log2(N / log N) / d) of the estimators."""
    if n_samples < 3:
        raise ValueError("need at least 3 samples")
    return int(math.floor(math.log2(n_samples / math.log(n_samples)) / dim))


def resolution_level_nearest(n_samples: int, dim: int) -> int:
    """Same rule rounded to the nearest level instead of floored.

    The splitting-rate reconstruction uses this variant: with flooring,
    consecutive tree depths can share a level, which visibly kinks the
    error decay; rounding restores one level per two generations.
    """
    if n_samples < 3:
        raise ValueError("need at least 3 samples")
    return int(round(math.log2(n_samples / math.log(n_samples)) / dim))


def threshold_marginal(n_samples: int, c: float) -> float:
    """Threshold c * sqrt(log N / N) of the 1-d estimators."""
    return c * math.sqrt(math.log(n_samples) / n_samples)


def threshold_joint(n_samples: int, c: float) -> float:
    """Threshold c * sqrt((log N)^2 / N) of the pair/triplet estimators."""
    return c * math.log(n_samples) / math.sqrt(n_samples)


def _rel_l2(est: np.ndarray, truth: np.ndarray) -> float:
    return float(np.linalg.norm(est - truth) / np.linalg.norm(truth))


def _threshold_pipeline(
    points: np.ndarray,
    domain,
    J: int,
    eta: float,
    spec: WaveletSpec,
    config: dict,
) -> DensityEstimate:
    coeffs, out_fraction = bin_empirical(points, domain, J)
    if len(points) * (1.0 - out_fraction) < 2:
        raise ValueError("fewer than 2 samples inside the domain")
    pyramid = dwt_forward(coeffs, spec, domain=domain)
    pyramid = hard_threshold(pyramid, eta)
    config = dict(config, J=J, eta=eta)
    return evaluate_on_grid(pyramid, spec, out_fraction=out_fraction, config=config)


def _marginal_pipeline(
    points: np.ndarray,
    domain: tuple[float, float],
    J: int,
    eta: float,
    spec: WaveletSpec,
    config: dict,
    refine: int = 3,
) -> DensityEstimate:
    """1-d threshold pipeline with reflection at the domain boundary.

    The in-domain sample is mirrored around the right edge and the doubled
    signal transformed with the periodised filter bank; this removes the
    jump the plain periodic wrap-around would create when the density does
    not match at the two edges (it generally does not), while keeping the
    transform orthogonal.  The returned estimate lives on the original
    domain; its pyramid is the one of the folded signal.  ``refine`` sets
    how many levels finer than the estimator resolution the binning grid
    is: coefficient binning error and the evaluation mesh both shrink by
    that power of two.
    """
    a, b = domain
    pts = np.asarray(points, dtype=np.float64)
    inside = pts[(pts >= a) & (pts <= b)]
    if inside.shape[0] < 2:
        raise ValueError("fewer than 2 samples inside the domain")
    folded = np.concatenate([inside, 2.0 * b - inside])
    # bin on a grid `refine` levels finer than the estimator resolution:
    # coefficients at levels <= J are then pointwise-accurate, and the
    # final reconstruction samples the smooth expansion on the fine grid
    fine = J + 1 + refine
    coeffs, out_fraction = bin_empirical(
        folded, ((a, 2.0 * b - a),), fine, n_norm=2 * pts.shape[0]
    )
    pyramid = dwt_forward(coeffs, spec, domain=((a, 2.0 * b - a),))
    pyramid = hard_threshold(pyramid, eta)
    # the estimator keeps levels up to J (folded level J+1 matches the
    # binning width of level J on the unfolded domain); finer levels are
    # outside its index set and are dropped entirely
    kept = total = 0
    for (j, _), block in pyramid.details.items():
        if j > J:
            block[...] = 0.0
        else:
            kept += int(np.count_nonzero(block))
            total += block.size
    level = dwt_inverse(pyramid, spec)
    vol_scale = (2.0 * (b - a)) ** -0.5
    folded_values = 2.0 ** (fine / 2.0) * level * vol_scale
    side = 2 ** (fine - 1)
    values = 2.0 * folded_values[:side]
    axes = [a + (b - a) * (np.arange(side) + 0.5) / side]
    return DensityEstimate(
        values=values,
        axes=axes,
        domain=((a, b),),
        pyramid=pyramid,
        kept_fraction=0.0 if total == 0 else kept / total,
        out_fraction=out_fraction,
        config=dict(config, J=J, eta=eta, boundary="reflect"),
    )


def estimate_nu(tree: TreeSample, cfg: EstimatorConfig) -> DensityEstimate:
    """Invariant-density estimate from all observed traits."""
    n_samples = len(tree)
    J = cfg.j_override if cfg.j_override is not None else resolution_level(n_samples, 1)
    eta = threshold_marginal(n_samples, cfg.c)
    return _marginal_pipeline(
        tree.traits, cfg.domain, J, eta, cfg.wavelet, {"target": "nu", "c": cfg.c}
    )


def estimate_fq(tree: TreeSample, cfg: EstimatorConfig) -> DensityEstimate:
    """Joint density of (parent trait, own trait) over all non-root nodes."""
    n_rule = len(tree)
    J = cfg.j_override if cfg.j_override is not None else resolution_level(n_rule, 2)
    eta = threshold_joint(n_rule, cfg.c)
    xp, xc = tree.pairs()
    pts = np.column_stack([xp, xc])
    return _threshold_pipeline(
        pts, (cfg.domain, cfg.domain), J, eta, cfg.wavelet, {"target": "fq", "c": cfg.c}
    )


def estimate_q(tree: TreeSample, cfg: EstimatorConfig) -> DensityEstimate:
    """Mean-transition density: joint pair density over floored marginal."""
    joint = estimate_fq(tree, cfg)
    j2d = int(round(math.log2(joint.values.shape[0])))
    marg = estimate_nu(tree, replace(cfg, j_override=j2d))
    denom = np.maximum(marg.value_at(joint.axes[0]), cfg.varpi)
    values = joint.values / denom[:, None]
    return DensityEstimate(
        values=values,
        axes=joint.axes,
        domain=joint.domain,
        pyramid=joint.pyramid,
        kept_fraction=joint.kept_fraction,
        out_fraction=joint.out_fraction,
        config=dict(joint.config, target="q", varpi=cfg.varpi),
    )


def estimate_fp(tree: TreeSample, cfg: EstimatorConfig) -> DensityEstimate:
    """Joint density of (own, child 0, child 1) over nodes with offspring."""
    n_rule = len(tree)
    J = cfg.j_override if cfg.j_override is not None else resolution_level(n_rule, 3)
    eta = threshold_joint(n_rule, cfg.c)
    xu, y0, y1 = tree.triplets()
    pts = np.column_stack([xu, y0, y1])
    return _threshold_pipeline(
        pts,
        (cfg.domain,) * 3,
        J,
        eta,
        cfg.wavelet,
        {"target": "fp", "c": cfg.c},
    )


def estimate_p(tree: TreeSample, cfg: EstimatorConfig) -> DensityEstimate:
    """Offspring-pair transition density with floored marginal."""
    joint = estimate_fp(tree, cfg)
    j3d = int(round(math.log2(joint.values.shape[0])))
    marg = estimate_nu(tree, replace(cfg, j_override=j3d))
    denom = np.maximum(marg.value_at(joint.axes[0]), cfg.varpi)
    values = joint.values / denom[:, None, None]
    return DensityEstimate(
        values=values,
        axes=joint.axes,
        domain=joint.domain,
        pyramid=joint.pyramid,
        kept_fraction=joint.kept_fraction,
        out_fraction=joint.out_fraction,
        config=dict(joint.config, target="p", varpi=cfg.varpi),
    )


def splitting_grid(domain: tuple[float, float], n_samples: int) -> np.ndarray:
    """Regular evaluation grid with mesh 1/sqrt(sample size)."""
    a, b = domain
    dx = n_samples**-0.5
    count = int(math.ceil((b - a) / dx - 1e-9))
    return a + dx * np.arange(count)


def _index_points(tree: TreeSample, index_set: str) -> np.ndarray:
    if index_set == "tree":
        return tree.traits
    if index_set in ("generation", "gen"):
        return tree.generation_traits(tree.n)
    raise ValueError(f"unknown index set {index_set!r} (tree or generation)")


def estimate_b(
    tree: TreeSample, cfg: EstimatorConfig, index_set: str = "tree"
) -> DensityEstimate:
    """Splitting-rate estimate on the mesh-1/sqrt(N) grid of the domain.

    Numerator: tau*x/2 times the invariant-density estimate at x/2 (over
    the halved domain); denominator: exact fraction of traits in
    [x/2, x), floored at varpi.  ``index_set`` selects whether all traits
    or only the last generation enter both parts.
    """
    points = _index_points(tree, index_set)
    n_samples = len(points)
    # the level/threshold rules follow the size of the chosen index set;
    # the evaluation mesh stays tied to the full observation count
    J = cfg.j_override if cfg.j_override is not None else resolution_level_nearest(n_samples, 2)
    eta = threshold_marginal(n_samples, cfg.c)
    half_domain = (cfg.domain[0] / 2.0, cfg.domain[1] / 2.0)
    xs = splitting_grid(cfg.domain, len(tree.traits))
    nu = _marginal_pipeline(
        points, half_domain, J, eta, cfg.wavelet, {"target": "nu", "c": cfg.c}
    )
    order = np.sort(points)
    counts = np.searchsorted(order, xs, side="left") - np.searchsorted(
        order, xs / 2.0, side="left"
    )
    denom = np.maximum(counts / n_samples, cfg.varpi)
    values = (cfg.tau * xs / 2.0) * nu.value_at(xs / 2.0) / denom
    return DensityEstimate(
        values=values,
        axes=[xs],
        domain=(cfg.domain,),
        pyramid=nu.pyramid,
        kept_fraction=nu.kept_fraction,
        out_fraction=nu.out_fraction,
        config=dict(nu.config, target="b", index_set=index_set, varpi=cfg.varpi),
    )


OracleResult = namedtuple("OracleResult", ["estimate", "j_star", "errors"])


def oracle_estimate(
    tree: TreeSample,
    truth_values: np.ndarray,
    cfg: EstimatorConfig,
    eval_points: np.ndarray | None = None,
    index_set: str = "tree",
    j_max: int = 10,
) -> OracleResult:
    """Benchmark: best un-thresholded projection level against the truth.

    Sweeps the resolution level of the pyramid, computes the plain
    projection estimate (threshold disabled) and returns the one
    minimising the relative discrete L2 error on the evaluation grid,
    together with the argmin level and the whole error profile.  Levels
    are labelled by the scaling space of the reflected-domain pyramid;
    level j has spatial bin width |domain| / 2**(j-1), so the rule level
    J of the threshold estimators sits at pyramid level J + 1.
    """
    if cfg.target == "b":
        pts = splitting_grid(cfg.domain, len(tree.traits)) if eval_points is None else eval_points
    elif eval_points is None:
        raise ValueError("eval_points required for this target")
    else:
        pts = eval_points
    truth_values = np.asarray(truth_values, dtype=np.float64)
    if truth_values.shape != pts.shape[:1] and truth_values.shape != pts.shape:
        raise ValueError("truth and evaluation grid differ in length")
    if not np.any(truth_values):
        raise ValueError("truth is identically zero")
    errors = {}
    best = None
    for level in range(cfg.wavelet.j0 + 1, j_max + 1):
        sub = replace(cfg, c=0.0, j_override=level - 1)
        if cfg.target == "b":
            est = estimate_b(tree, sub, index_set=index_set)
            values = est.values
        elif cfg.target == "nu":
            est = estimate_nu(tree, sub)
            values = est.value_at(pts)
        else:
            raise ValueError(f"oracle sweep not defined for target {cfg.target!r}")
        errors[level] = _rel_l2(values, truth_values)
        if best is None or errors[level] < errors[best[1]]:
            best = (est, level)
    return OracleResult(estimate=best[0], j_star=best[1], errors=errors)


@dataclass(frozen=True)
class RateSpec:
    """Smoothness/loss configuration for the rate exponent."""

    s: float
    pi: float
    p: float
    d: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if self.p < 1:
            raise ValueError("loss exponent must be >= 1")
        if not self.s > self.d / self.pi:
            raise ValueError("need smoothness s > d / pi")


def rate_exponent(spec: RateSpec) -> float:
    """min{s/(2s+d), (s + d(1/p - 1/pi)) / (2s + d(1 - 2/pi))}."""
    s, d, p = spec.s, spec.d, spec.p
    inv_pi = 0.0 if math.isinf(spec.pi) else 1.0 / spec.pi
    dense = s / (2.0 * s + d)
    sparse = (s + d * (1.0 / p - inv_pi)) / (2.0 * s + d * (1.0 - 2.0 * inv_pi))
    return min(dense, sparse)
