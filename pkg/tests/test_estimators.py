"""Threshold estimators, quotients, the oracle sweep and rate exponents."""

import math

import numpy as np
import pytest

from bmcwave.estimators import (
    EstimatorConfig,
    RateSpec,
    estimate_b,
    estimate_fq,
    estimate_nu,
    estimate_p,
    estimate_q,
    oracle_estimate,
    rate_exponent,
    resolution_level,
    resolution_level_nearest,
    splitting_grid,
    threshold_joint,
    threshold_marginal,
)
from bmcwave.kernels import GrowthFragModel, bar_from_specs
from bmcwave.simulate import RootLaw, simulate_tree
from bmcwave.tree import TreeSample, sizes
from bmcwave.wavelet import WaveletSpec


@pytest.fixture(scope="module")
def gf_tree():
    return simulate_tree(GrowthFragModel(spike_c=3.0, spike_j=1), RootLaw(), 15, seed=2)


@pytest.fixture(scope="module")
def bar_tree():
    model = bar_from_specs("tanh:1:1", "tanh:1:1", "const:0.6", "const:0.6")
    return simulate_tree(model, RootLaw("point", 0.0), 15, seed=3)


@pytest.fixture(scope="module")
def iid_tree():
    """Independent standard normal traits, bypassing any kernel."""
    rng = np.random.default_rng(10)
    return TreeSample(n=13, traits=rng.normal(size=sizes(13)[1]))


class TestRules:
    def test_levels_at_reference_sizes(self):
        n_t = sizes(15)[1]
        assert n_t == 65535
        assert resolution_level(n_t, 1) == 12
        assert resolution_level(n_t, 2) == 6
        assert resolution_level(n_t, 3) == 4
        assert resolution_level_nearest(n_t, 2) == 6

    def test_thresholds_at_reference_sizes(self):
        n_t = 65535
        assert threshold_marginal(n_t, 1.0) == pytest.approx(
            math.sqrt(math.log(n_t) / n_t), abs=0
        )
        assert threshold_marginal(n_t, 1.0) == pytest.approx(0.01301, abs=5e-5)
        assert threshold_joint(n_t, 1.0) == pytest.approx(
            math.log(n_t) / math.sqrt(n_t), abs=0
        )
        assert threshold_joint(n_t, 1.0) == pytest.approx(0.04332, abs=5e-5)

    def test_splitting_grid_length(self):
        grid = splitting_grid((1.5, 4.8), 65535)
        assert grid.shape[0] == 845
        assert grid[0] == 1.5
        assert grid[-1] < 4.8
        assert np.allclose(np.diff(grid), 65535**-0.5)

    def test_config_validation(self):
        with pytest.raises(ValueError, match="target"):
            EstimatorConfig(target="z")
        with pytest.raises(ValueError, match="floor"):
            EstimatorConfig(varpi=0.0)
        with pytest.raises(ValueError, match="threshold"):
            EstimatorConfig(c=-1.0)


class TestInvariantDensity:
    def test_haar_no_threshold_is_histogram(self, gf_tree):
        cfg = EstimatorConfig(
            target="nu", c=0.0, domain=(0.0, 2.5), wavelet=WaveletSpec(order=1, j0=2), j_override=6
        )
        est = estimate_nu(gf_tree, cfg)
        hist = np.histogram(gf_tree.traits, bins=64, range=(0.0, 2.5))[0]
        hist = hist / len(gf_tree.traits) / (2.5 / 64)
        centres = 0.0 + 2.5 * (np.arange(64) + 0.5) / 64
        assert np.abs(est.value_at(centres) - hist).max() < 1e-10

    def test_level_rule_applied(self, gf_tree):
        cfg = EstimatorConfig(target="nu", domain=(0.0, 2.5))
        est = estimate_nu(gf_tree, cfg)
        assert est.config["J"] == 12
        assert est.config["eta"] == pytest.approx(10.0 * math.sqrt(math.log(65535) / 65535))

    def test_iid_uniform_flat_reconstruction(self):
        rng = np.random.default_rng(21)
        tree = TreeSample(n=15, traits=rng.uniform(1.5, 4.8, sizes(15)[1]))
        cfg = EstimatorConfig(target="nu", c=10.0, domain=(1.5, 4.8))
        est = estimate_nu(tree, cfg)
        truth = np.full_like(est.values, 1.0 / 3.3)
        err = np.linalg.norm(est.values - truth) / np.linalg.norm(truth)
        assert err < 0.05

    def test_empty_domain_rejected(self, gf_tree):
        cfg = EstimatorConfig(target="nu", domain=(4.0, 4.8))
        with pytest.raises(ValueError, match="fewer than 2"):
            estimate_nu(gf_tree, cfg)

    def test_deterministic(self, gf_tree):
        cfg = EstimatorConfig(target="nu", domain=(0.0, 2.5))
        a = estimate_nu(gf_tree, cfg)
        b = estimate_nu(gf_tree, cfg)
        assert np.array_equal(a.values, b.values)


class TestPairDensity:
    def test_level_and_threshold_rule(self, iid_tree):
        cfg = EstimatorConfig(target="q", domain=(-2.0, 2.0))
        est = estimate_fq(iid_tree, cfg)
        n_t = len(iid_tree)
        assert est.config["J"] == resolution_level(n_t, 2)
        assert est.config["eta"] == pytest.approx(threshold_joint(n_t, 10.0))
        assert est.values.shape == (2 ** est.config["J"],) * 2

    def test_marginal_consistency(self, gf_tree):
        """Integrating the pair density over the child coordinate recovers
        the parent histogram exactly, and the invariant-density estimate
        up to two-histogram sampling noise (0.065-0.075 across seeds at
        this depth; bound frozen at 0.10)."""
        cfg = EstimatorConfig(target="q", c=0.0, domain=(0.0, 2.5))
        joint = estimate_fq(gf_tree, cfg)
        j2 = int(round(math.log2(joint.values.shape[0])))
        marg_from_joint = joint.values.sum(axis=1) * joint.bin_widths()[1]
        xp, _ = gf_tree.pairs()
        parent_hist = np.histogram(xp, bins=2**j2, range=(0.0, 2.5))[0]
        parent_hist = parent_hist / len(xp) / (2.5 / 2**j2)
        assert np.abs(marg_from_joint - parent_hist).max() < 1e-12
        nu = estimate_nu(gf_tree, EstimatorConfig(target="nu", c=0.0, domain=(0.0, 2.5), j_override=j2))
        nu_vals = nu.value_at(joint.axes[0])
        l1 = float(np.sum(np.abs(marg_from_joint - nu_vals)) * joint.bin_widths()[0])
        assert l1 < 0.10

    def test_quotient_floor_active_where_marginal_small(self, iid_tree):
        cfg = EstimatorConfig(target="q", domain=(-6.0, 6.0), varpi=1e-3)
        est = estimate_q(iid_tree, cfg)
        j2 = int(round(math.log2(est.values.shape[0])))
        nu = estimate_nu(iid_tree, EstimatorConfig(target="nu", domain=(-6.0, 6.0), j_override=j2))
        joint = estimate_fq(iid_tree, cfg)
        floored = nu.value_at(joint.axes[0]) <= 1e-3
        assert floored.any()
        expected = joint.values[floored, :] / 1e-3
        assert np.array_equal(est.values[floored, :], expected)

    def test_iid_slices_agree(self, iid_tree):
        """When children are drawn independently of the parent the
        conditional density cannot depend on the first coordinate
        (measured worst slice distance ~0.15 at this depth; frozen 0.2)."""
        cfg = EstimatorConfig(target="q", c=0.6, domain=(-2.0, 2.0))
        est = estimate_q(iid_tree, cfg)
        dy = est.bin_widths()[1]
        j2 = int(round(math.log2(est.values.shape[0])))
        nu = estimate_nu(iid_tree, EstimatorConfig(target="nu", c=0.6, domain=(-2.0, 2.0), j_override=j2))
        solid = np.where(nu.value_at(est.axes[0]) > 0.05)[0]
        worst = 0.0
        for i in solid:
            for k in solid:
                dist = float(np.abs(est.values[i] - est.values[k]).sum() * dy)
                worst = max(worst, dist)
        assert worst < 0.2

    def test_conditional_mass_bounded(self, iid_tree):
        cfg = EstimatorConfig(target="q", c=0.6, domain=(-2.0, 2.0))
        est = estimate_q(iid_tree, cfg)
        j2 = int(round(math.log2(est.values.shape[0])))
        nu = estimate_nu(iid_tree, EstimatorConfig(target="nu", c=0.6, domain=(-2.0, 2.0), j_override=j2))
        dy = est.bin_widths()[1]
        for i in np.where(nu.value_at(est.axes[0]) > 2e-3)[0]:
            assert est.values[i].sum() * dy <= 1.1

    def test_quotient_safety(self, gf_tree):
        cfg = EstimatorConfig(target="q", c=0.0, domain=(0.0, 2.5), varpi=1e-3)
        est = estimate_q(gf_tree, cfg)
        joint = estimate_fq(gf_tree, cfg)
        assert np.all(np.isfinite(est.values))
        assert est.values.max() <= joint.values.max() / 1e-3 + 1e-9


class TestTripletDensity:
    def test_level_rule_and_shape(self, bar_tree):
        cfg = EstimatorConfig(target="p", domain=(-2.0, 2.0))
        est = estimate_p(bar_tree, cfg)
        assert est.values.shape == (16, 16, 16)
        assert est.config["J"] == 4

    def test_product_structure_for_independent_children(self, bar_tree):
        """Symmetric autoregression with independent noise factorises the
        offspring-pair density into the product of two child marginals.

        Compared without thresholding (the coarse protected blocks of the
        2-d and 3-d pyramids blur the product differently) and in relative
        mass: the distance integrates noise over the whole cube.
        """
        cfg = EstimatorConfig(target="p", c=0.0, domain=(-2.0, 2.0))
        p_est = estimate_p(bar_tree, cfg)
        q_est = estimate_q(
            bar_tree, EstimatorConfig(target="q", c=0.0, domain=(-2.0, 2.0), j_override=4)
        )
        prod = q_est.values[:, :, None] * q_est.values[:, None, :]
        vol = float(np.prod(p_est.bin_widths()))
        l1 = float(np.abs(p_est.values - prod).sum() * vol)
        mass = float(p_est.values.sum() * vol)
        assert l1 / mass < 0.3

    def test_quotient_safety(self, bar_tree):
        cfg = EstimatorConfig(target="p", domain=(-2.0, 2.0), varpi=1e-3)
        est = estimate_p(bar_tree, cfg)
        assert np.all(np.isfinite(est.values))


class TestSplittingRate:
    def test_denominator_floor(self, gf_tree):
        cfg = EstimatorConfig(target="b", varpi=0.5)
        est = estimate_b(gf_tree, cfg)
        xs = est.axes[0]
        order = np.sort(gf_tree.traits)
        counts = np.searchsorted(order, xs, "left") - np.searchsorted(order, xs / 2, "left")
        floored = counts / len(gf_tree.traits) < 0.5
        assert floored.any()
        nu_at = est.values[floored] / (cfg.tau * xs[floored] / 2.0) * 0.5
        assert np.all(np.isfinite(nu_at))

    def test_grid_is_mesh_rule(self, gf_tree):
        est = estimate_b(gf_tree, EstimatorConfig(target="b"))
        assert est.values.shape[0] == 845

    def test_generation_restriction_changes_rules(self, gf_tree):
        cfg = EstimatorConfig(target="b", c=0.6)
        est_t = estimate_b(gf_tree, cfg, index_set="tree")
        est_g = estimate_b(gf_tree, cfg, index_set="generation")
        assert est_t.config["J"] == resolution_level_nearest(65535, 2) == 6
        assert est_g.config["J"] == resolution_level_nearest(32768, 2) == 6
        assert est_g.config["eta"] == pytest.approx(threshold_marginal(32768, 0.6))
        assert est_g.config["eta"] > est_t.config["eta"]
        assert est_t.values.shape == est_g.values.shape

    def test_unknown_index_set(self, gf_tree):
        with pytest.raises(ValueError, match="index set"):
            estimate_b(gf_tree, EstimatorConfig(target="b"), index_set="leaves")


class TestOracle:
    def test_projection_of_itself_is_exact(self, gf_tree):
        cfg = EstimatorConfig(target="b", wavelet=WaveletSpec(order=8, j0=4))
        ref = estimate_b(gf_tree, EstimatorConfig(target="b", c=0.0, j_override=4,
                                                  wavelet=WaveletSpec(order=8, j0=4)))
        res = oracle_estimate(gf_tree, ref.values, cfg, j_max=8)
        assert res.errors[5] == pytest.approx(0.0, abs=1e-12)
        assert res.j_star == 5

    def test_zero_truth_rejected(self, gf_tree):
        cfg = EstimatorConfig(target="b")
        with pytest.raises(ValueError, match="zero"):
            oracle_estimate(gf_tree, np.zeros(845), cfg)


class TestRateExponent:
    def test_symmetric_case(self):
        assert rate_exponent(RateSpec(s=1, pi=2, p=2, d=1)) == pytest.approx(1 / 3)

    def test_unbounded_integrability_dense_regime(self):
        for p in (1.0, 2.0, 7.0):
            spec = RateSpec(s=1.5, pi=math.inf, p=p, d=1)
            assert rate_exponent(spec) == pytest.approx(1.5 / 4.0)

    def test_three_dimensional_case(self):
        assert rate_exponent(RateSpec(s=3, pi=2, p=2, d=3)) == pytest.approx(1 / 3)

    def test_sparse_regime_can_bind(self):
        spec = RateSpec(s=2, pi=1, p=10, d=1)
        dense = 2.0 / 5.0
        sparse = (2.0 + 0.1 - 1.0) / (4.0 + 1.0 - 2.0)
        assert rate_exponent(spec) == pytest.approx(sparse)
        assert rate_exponent(spec) < dense

    def test_smoothness_constraint(self):
        with pytest.raises(ValueError, match="smoothness"):
            RateSpec(s=0.4, pi=2, p=2, d=1)
