"""Filters, pyramid transforms, binning, thresholding, evaluation."""

import itertools
import math

import numpy as np
import pytest

from bmcwave.wavelet import (
    CoeffPyramid,
    WaveletSpec,
    bin_empirical,
    daubechies_filter,
    dwt_forward,
    dwt_inverse,
    evaluate_on_grid,
    grid_from_csv,
    grid_to_csv,
    hard_threshold,
    pyramid_from_csv,
    pyramid_to_csv,
    quadrature_mirror,
    refine_scaling,
)


class TestDaubechiesFilters:
    def test_haar(self):
        assert np.allclose(daubechies_filter(1), [1 / math.sqrt(2)] * 2, atol=0)

    def test_db2_closed_form(self):
        """Order 2 taps solve the constraints in radicals: (1 +- sqrt 3)
        and (3 +- sqrt 3) over 4 sqrt 2."""
        r3 = math.sqrt(3.0)
        ref = np.array([1 + r3, 3 + r3, 3 - r3, 1 - r3]) / (4 * math.sqrt(2.0))
        assert np.allclose(daubechies_filter(2), ref, atol=1e-12)

    @pytest.mark.parametrize("order", range(1, 11))
    def test_orthonormality(self, order):
        h = daubechies_filter(order)
        assert len(h) == 2 * order
        assert h.sum() == pytest.approx(math.sqrt(2.0), abs=1e-11)
        assert (h**2).sum() == pytest.approx(1.0, abs=1e-11)
        for m in range(1, order):
            assert abs(np.dot(h[: -2 * m], h[2 * m :])) < 1e-10

    def test_db8_vanishing_moments(self):
        g = quadrature_mirror(daubechies_filter(8))
        k = np.arange(16, dtype=float)
        for mom in range(8):
            assert abs(np.dot(g, k**mom)) < 1e-8

    @pytest.mark.parametrize("order", range(2, 11))
    def test_vanishing_moments_relative(self, order):
        g = quadrature_mirror(daubechies_filter(order))
        k = np.arange(2 * order, dtype=float)
        for mom in range(order):
            raw = abs(np.dot(g, k**mom))
            scale = np.dot(np.abs(g), k**mom) + 1.0
            assert raw / scale < 1e-12

    def test_unsupported_order(self):
        with pytest.raises(ValueError, match="unsupported"):
            daubechies_filter(11)


def _haar_matrix_16():
    """Forward transform matrix built from the recursive averaging and
    differencing definition, as an independent oracle."""
    mat = []
    for i in range(16):
        x = np.zeros(16)
        x[i] = 1.0
        levels = []
        a = x
        while len(a) > 1:
            pairs = a.reshape(-1, 2)
            d = (pairs[:, 0] - pairs[:, 1]) / math.sqrt(2.0)
            a = (pairs[:, 0] + pairs[:, 1]) / math.sqrt(2.0)
            levels.append(d)
        mat.append(np.concatenate([a] + levels[::-1]))
    return np.array(mat).T


class TestTransforms:
    @pytest.mark.parametrize("d,J", [(1, 12), (2, 6), (3, 4)])
    def test_round_trip(self, d, J):
        rng = np.random.default_rng(d)
        spec = WaveletSpec(order=8, j0=2)
        x = rng.normal(size=(2**J,) * d)
        pyr = dwt_forward(x, spec)
        assert pyr.coefficient_count() == x.size
        assert np.abs(dwt_inverse(pyr, spec) - x).max() < 1e-10

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_energy_conserved(self, d):
        rng = np.random.default_rng(d + 5)
        spec = WaveletSpec(order=8, j0=2)
        x = rng.normal(size=(2**4,) * d)
        pyr = dwt_forward(x, spec)
        energy = float(pyr.approx.ravel() @ pyr.approx.ravel()) + sum(
            float(v.ravel() @ v.ravel()) for v in pyr.details.values()
        )
        assert energy == pytest.approx(float(x.ravel() @ x.ravel()), abs=1e-10)

    def test_constant_input_zero_details(self):
        spec = WaveletSpec(order=8, j0=2)
        pyr = dwt_forward(np.full(256, 2.7), spec)
        assert pyr.max_detail() < 1e-12

    def test_haar_matches_brute_force_matrix(self):
        """The level-4 one-dimensional transform equals the explicit
        orthogonal matrix built from the averaging definition."""
        spec = WaveletSpec(order=1, j0=0)
        mat = _haar_matrix_16()
        for i in range(16):
            x = np.zeros(16)
            x[i] = 1.0
            pyr = dwt_forward(x, spec)
            flat = np.concatenate(
                [pyr.approx] + [pyr.details[(j, "d")] for j in range(4)]
            )
            assert np.abs(flat - mat[:, i]).max() < 1e-12

    def test_axis_order_commutes(self):
        """Applying the two axis passes of a 2-d level in either order
        yields the same coefficients."""
        from bmcwave.wavelet import _analysis_axis

        rng = np.random.default_rng(0)
        spec = WaveletSpec(order=4, j0=2)
        x = rng.normal(size=(32, 32))
        lo, hi = spec.lowpass, spec.highpass
        a = _analysis_axis(_analysis_axis(x, lo, hi, 0), lo, hi, 1)
        b = _analysis_axis(_analysis_axis(x, lo, hi, 1), lo, hi, 0)
        assert np.abs(a - b).max() < 1e-12

    def test_non_power_of_two_rejected(self):
        with pytest.raises(ValueError, match="power of two"):
            dwt_forward(np.ones(24), WaveletSpec())

    def test_level_must_exceed_coarsest(self):
        with pytest.raises(ValueError, match="coarsest"):
            dwt_forward(np.ones(4), WaveletSpec(order=1, j0=2))

    def test_refine_scaling_is_exact_for_haar(self):
        """Haar upsampling repeats each scaling coefficient over its two
        children, scaled to keep the represented function identical."""
        spec = WaveletSpec(order=1, j0=0)
        c = np.array([1.0, 2.0, 3.0, 4.0])
        up = refine_scaling(c, spec, 1)
        assert np.allclose(up, np.repeat(c, 2) / math.sqrt(2.0), atol=1e-14)


class TestThreshold:
    def _pyramid(self):
        rng = np.random.default_rng(7)
        return dwt_forward(rng.normal(size=64), WaveletSpec(order=8, j0=2))

    def test_zero_threshold_is_identity(self):
        pyr = self._pyramid()
        thr = hard_threshold(pyr, 0.0)
        for key in pyr.details:
            assert np.array_equal(thr.details[key], pyr.details[key])

    def test_huge_threshold_keeps_only_approx(self):
        pyr = self._pyramid()
        thr = hard_threshold(pyr, 1e9)
        assert thr.detail_kept_fraction() == 0.0
        assert np.array_equal(thr.approx, pyr.approx)

    def test_idempotent(self):
        pyr = self._pyramid()
        once = hard_threshold(pyr, 0.3)
        twice = hard_threshold(once, 0.3)
        for key in pyr.details:
            assert np.array_equal(once.details[key], twice.details[key])

    def test_zero_sets_nested_in_threshold(self):
        pyr = self._pyramid()
        small = hard_threshold(pyr, 0.2)
        big = hard_threshold(pyr, 0.7)
        for key in pyr.details:
            zero_small = small.details[key] == 0.0
            zero_big = big.details[key] == 0.0
            assert np.all(zero_big[zero_small])

    def test_boundary_kept_at_exact_threshold(self):
        pyr = dwt_forward(np.arange(16.0), WaveletSpec(order=1, j0=2))
        val = float(pyr.details[(3, "d")][0])
        thr = hard_threshold(pyr, abs(val))
        assert thr.details[(3, "d")][0] == val


class TestBinning:
    def test_single_bin_mass(self):
        pts = np.full(50, 0.55)
        c, out = bin_empirical(pts, [(0.0, 1.0)], 3)
        k = int(0.55 * 8)
        assert c[k] == pytest.approx(2.0 ** (3 / 2.0))
        assert np.count_nonzero(c) == 1
        assert out == 0.0

    def test_counting_identity(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(-0.5, 1.5, 400)
        c, out = bin_empirical(pts, [(0.0, 1.0)], 4)
        inside = np.mean((pts >= 0.0) & (pts <= 1.0))
        total = (2.0 ** (-4 / 2.0) * c).sum()
        assert total == pytest.approx(inside, abs=1e-12)
        assert out == pytest.approx(1.0 - inside, abs=1e-12)

    def test_uniform_concentration(self):
        rng = np.random.default_rng(11)
        pts = rng.uniform(0.0, 1.0, 1_000_000)
        c, _ = bin_empirical(pts, [(0.0, 1.0)], 8)
        props = 2.0 ** (-8 / 2.0) * c
        rel = np.abs(props - 2.0**-8) / 2.0**-8
        assert rel.max() < 5.0 * math.sqrt(2.0**8 / 1e6)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="no points"):
            bin_empirical(np.empty(0), [(0.0, 1.0)], 3)

    def test_2d_binning_shape(self):
        rng = np.random.default_rng(2)
        pts = rng.uniform(0, 1, size=(1000, 2))
        c, _ = bin_empirical(pts, [(0, 1), (0, 1)], 4)
        assert c.shape == (16, 16)


class TestEvaluate:
    def test_reproduces_histogram(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(1.0, 3.0, 5000)
        spec = WaveletSpec(order=8, j0=2)
        c, out = bin_empirical(pts, [(1.0, 3.0)], 6)
        est = evaluate_on_grid(dwt_forward(c, spec, domain=[(1.0, 3.0)]), spec)
        hist = np.histogram(pts, bins=64, range=(1.0, 3.0))[0] / 5000 / (2.0 / 64)
        assert np.abs(est.values - hist).max() < 1e-10

    def test_mass_equals_in_domain_fraction(self):
        rng = np.random.default_rng(4)
        pts = rng.uniform(0.0, 2.0, 3000)
        spec = WaveletSpec(order=6, j0=2)
        c, out = bin_empirical(pts, [(0.5, 1.5)], 5)
        est = evaluate_on_grid(dwt_forward(c, spec, domain=[(0.5, 1.5)]), spec)
        assert est.mass() == pytest.approx(1.0 - out, abs=1e-10)

    def test_threshold_flattens_uniform_noise(self):
        """At the sample-size threshold scale every noise detail dies, so
        a histogram of uniform draws reconstructs nearly flat."""
        rng = np.random.default_rng(9)
        n = 65_535
        pts = rng.uniform(0.0, 1.0, n)
        spec = WaveletSpec(order=8, j0=2)
        c, _ = bin_empirical(pts, [(0.0, 1.0)], 8)
        eta = 10.0 * math.sqrt(math.log(n) / n)
        est = evaluate_on_grid(hard_threshold(dwt_forward(c, spec), eta), spec)
        mean = est.values.mean()
        assert np.abs(est.values - mean).max() < 0.1 * mean

    def test_value_at_lookup(self):
        spec = WaveletSpec(order=1, j0=1)
        c, _ = bin_empirical(np.array([0.1, 0.6, 0.6, 0.9]), [(0.0, 1.0)], 2)
        est = evaluate_on_grid(dwt_forward(c, spec), spec)
        assert est.value_at(np.array([0.6]))[0] == pytest.approx(2.0, abs=1e-12)
        assert est.value_at(np.array([1.4]))[0] == 0.0


class TestCsv:
    @pytest.mark.parametrize("d,J", [(1, 5), (2, 4), (3, 3)])
    def test_pyramid_round_trip(self, tmp_path, d, J):
        rng = np.random.default_rng(d)
        spec = WaveletSpec(order=2, j0=2)
        domain = [(0.5 * k, 1.5 + k) for k in range(d)]
        pyr = dwt_forward(rng.normal(size=(2**J,) * d), spec, domain=domain)
        path = tmp_path / "pyr.csv"
        pyramid_to_csv(pyr, path)
        back = pyramid_from_csv(path)
        assert back.domain == pyr.domain and back.J == pyr.J and back.j0 == pyr.j0
        assert np.array_equal(back.approx, pyr.approx)
        for key in pyr.details:
            assert np.array_equal(back.details[key], pyr.details[key])
        pyramid_to_csv(back, tmp_path / "pyr2.csv")
        assert (tmp_path / "pyr.csv").read_bytes() == (tmp_path / "pyr2.csv").read_bytes()

    def test_grid_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        spec = WaveletSpec(order=2, j0=1)
        c, _ = bin_empirical(rng.uniform(0, 1, 100), [(0.0, 1.0)], 4)
        est = evaluate_on_grid(dwt_forward(c, spec), spec)
        grid_to_csv(est, tmp_path / "g.csv")
        pts, vals = grid_from_csv(tmp_path / "g.csv")
        assert np.array_equal(vals, est.values)
        assert np.array_equal(pts[:, 0], est.axes[0])
