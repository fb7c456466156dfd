"""Periodised orthogonal wavelet machinery in dimensions 1-3.

Pipeline pieces: Daubechies filters obtained by spectral factorisation,
binned empirical scaling coefficients, separable forward/inverse pyramid
transforms, hard thresholding of detail coefficients, and evaluation of
the reconstruction on the dyadic bin grid.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np


def daubechies_filter(order: int) -> np.ndarray:
    """Lowpass taps of the extremal-phase Daubechies filter.

    ``order`` is the number of vanishing moments (1..10); the filter has
    ``2 * order`` taps, sums to sqrt(2) and has unit energy.  Taps are
    produced by spectral factorisation: the roots of the Daubechies
    binomial polynomial are mapped to the z-plane and the minimum-phase
    half is kept.
    """
    if not 1 <= order <= 10:
        raise ValueError(f"unsupported filter order {order} (use 1..10)")
    if order == 1:
        return np.array([1.0, 1.0]) / math.sqrt(2.0)
    # P(y) = sum_k C(order-1+k, k) y^k, highest degree first for np.roots
    pcoef = [math.comb(order - 1 + k, k) for k in range(order)][::-1]
    zroots = []
    for y in np.roots(pcoef):
        # y = (2 - z - 1/z)/4  <=>  z^2 + (4y - 2) z + 1 = 0
        disc = np.sqrt(complex((1.0 - 2.0 * y) ** 2 - 1.0))
        z1 = (1.0 - 2.0 * y) + disc
        z2 = (1.0 - 2.0 * y) - disc
        zroots.append(z1 if abs(z1) < 1.0 else z2)
    poly = np.array([1.0 + 0.0j])
    for z in zroots:
        poly = np.polymul(poly, np.array([1.0, -z]))
    for _ in range(order):
        poly = np.polymul(poly, np.array([1.0, 1.0]))
    taps = np.real(poly)
    taps = taps / taps.sum() * math.sqrt(2.0)
    if abs(taps[0]) < abs(taps[-1]):
        taps = taps[::-1].copy()
    return taps


def quadrature_mirror(lowpass: np.ndarray) -> np.ndarray:
    """Highpass taps from the lowpass by the alternating-flip rule."""
    n = lowpass.shape[0]
    return np.array([(-1.0) ** k * lowpass[n - 1 - k] for k in range(n)])


@dataclass
class WaveletSpec:
    """Filter family and coarsest pyramid level used by the transforms."""

    order: int = 8
    j0: int = 2
    lowpass: np.ndarray = field(default=None, repr=False)
    highpass: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.j0 < 0:
            raise ValueError("coarsest level must be >= 0")
        if self.lowpass is None:
            self.lowpass = daubechies_filter(self.order)
        self.lowpass = np.asarray(self.lowpass, dtype=np.float64)
        if self.highpass is None:
            self.highpass = quadrature_mirror(self.lowpass)


HAAR = lambda j0=0: WaveletSpec(order=1, j0=j0)  # noqa: E731


@dataclass
class CoeffPyramid:
    """Multilevel coefficient container over a rectangular domain.

    ``approx`` holds the coarse block (side ``2**j0``); ``details`` maps
    ``(level, orientation)`` to a block of side ``2**level``, orientation
    being a per-axis pattern over {'a', 'd'} with at least one 'd'.
    """

    dim: int
    J: int
    j0: int
    domain: tuple
    approx: np.ndarray = field(repr=False)
    details: dict = field(repr=False)

    def copy(self) -> "CoeffPyramid":
        return CoeffPyramid(
            dim=self.dim,
            J=self.J,
            j0=self.j0,
            domain=self.domain,
            approx=self.approx.copy(),
            details={k: v.copy() for k, v in self.details.items()},
        )

    def coefficient_count(self) -> int:
        return self.approx.size + sum(v.size for v in self.details.values())

    def detail_kept_fraction(self) -> float:
        """Fraction of detail coefficients that are non-zero."""
        total = sum(v.size for v in self.details.values())
        if total == 0:
            return 1.0
        kept = sum(int(np.count_nonzero(v)) for v in self.details.values())
        return kept / total

    def max_detail(self) -> float:
        if not self.details:
            return 0.0
        return max(float(np.abs(v).max()) for v in self.details.values())


def _orientations(dim: int):
    for pattern in itertools.product("ad", repeat=dim):
        if "d" in pattern:
            yield "".join(pattern)


def _analysis_axis(data: np.ndarray, lo: np.ndarray, hi: np.ndarray, axis: int) -> np.ndarray:
    """One periodised filter-and-decimate pass along ``axis``.

    The output keeps the axis length, storing the lowpass half first.
    """
    x = np.moveaxis(data, axis, -1)
    n = x.shape[-1]
    half = n // 2
    idx = (2 * np.arange(half)[:, None] + np.arange(lo.shape[0])[None, :]) % n
    gathered = x[..., idx]
    out = np.concatenate([gathered @ lo, gathered @ hi], axis=-1)
    return np.moveaxis(out, -1, axis)


def _synthesis_axis(data: np.ndarray, lo: np.ndarray, hi: np.ndarray, axis: int) -> np.ndarray:
    """Exact adjoint of :func:`_analysis_axis`."""
    x = np.moveaxis(data, axis, -1)
    n = x.shape[-1]
    half = n // 2
    a, d = x[..., :half], x[..., half:]
    out = np.zeros_like(x)
    base = 2 * np.arange(half)
    for m in range(lo.shape[0]):
        pos = (base + m) % n  # distinct for fixed m, so fancy += is safe
        out[..., pos] += lo[m] * a + hi[m] * d
    return np.moveaxis(out, -1, axis)


def _check_cube(coeffs: np.ndarray) -> tuple[int, int]:
    d = coeffs.ndim
    if d not in (1, 2, 3):
        raise ValueError(f"dimension {d} unsupported (1, 2 or 3)")
    side = coeffs.shape[0]
    if any(s != side for s in coeffs.shape):
        raise ValueError(f"expected a cube, got shape {coeffs.shape}")
    J = side.bit_length() - 1
    if side != 2**J or side < 2:
        raise ValueError(f"side {side} is not a power of two >= 2")
    return d, J


def dwt_forward(coeffs: np.ndarray, spec: WaveletSpec, domain=None) -> CoeffPyramid:
    """Separable orthogonal pyramid transform down to level ``spec.j0``."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    d, J = _check_cube(coeffs)
    if J <= spec.j0:
        raise ValueError(f"need finest level J={J} > coarsest level {spec.j0}")
    if domain is None:
        domain = ((0.0, 1.0),) * d
    lo, hi = spec.lowpass, spec.highpass
    details = {}
    a = coeffs
    for j in range(J - 1, spec.j0 - 1, -1):
        for axis in range(d):
            a = _analysis_axis(a, lo, hi, axis)
        half = a.shape[0] // 2
        cuts = {"a": slice(0, half), "d": slice(half, 2 * half)}
        for pattern in _orientations(d):
            details[(j, pattern)] = a[tuple(cuts[ch] for ch in pattern)].copy()
        a = a[(cuts["a"],) * d].copy()
    return CoeffPyramid(dim=d, J=J, j0=spec.j0, domain=tuple(domain), approx=a, details=details)


def dwt_inverse(pyramid: CoeffPyramid, spec: WaveletSpec) -> np.ndarray:
    """Invert :func:`dwt_forward` back to level-J scaling coefficients."""
    lo, hi = spec.lowpass, spec.highpass
    d = pyramid.dim
    a = pyramid.approx
    for j in range(pyramid.j0, pyramid.J):
        side = 2 ** (j + 1)
        half = side // 2
        cuts = {"a": slice(0, half), "d": slice(half, side)}
        block = np.empty((side,) * d, dtype=np.float64)
        block[(cuts["a"],) * d] = a
        for pattern in _orientations(d):
            block[tuple(cuts[ch] for ch in pattern)] = pyramid.details[(j, pattern)]
        for axis in reversed(range(d)):
            block = _synthesis_axis(block, lo, hi, axis)
        a = block
    return a


def refine_scaling(level_j: np.ndarray, spec: WaveletSpec, extra_levels: int) -> np.ndarray:
    """Upsample level-J scaling coefficients by the two-scale cascade.

    Synthesising with zero detail blocks maps the scaling coefficients of
    a function to those of the same function at a finer level, so this
    evaluates the smooth reconstruction on a ``2**extra_levels`` finer
    dyadic grid.
    """
    out = np.asarray(level_j, dtype=np.float64)
    d = out.ndim
    lo, hi = spec.lowpass, spec.highpass
    for _ in range(extra_levels):
        side = 2 * out.shape[0]
        block = np.zeros((side,) * d, dtype=np.float64)
        block[(slice(0, side // 2),) * d] = out
        for axis in reversed(range(d)):
            block = _synthesis_axis(block, lo, hi, axis)
        out = block
    return out


def hard_threshold(pyramid: CoeffPyramid, eta: float) -> CoeffPyramid:
    """Zero every detail coefficient with magnitude < eta; keep the rest."""
    if eta < 0:
        raise ValueError("threshold must be >= 0")
    out = pyramid.copy()
    if eta > 0:
        for key, block in out.details.items():
            block[np.abs(block) < eta] = 0.0
    return out


def bin_empirical(points: np.ndarray, domain, J: int, n_norm: int | None = None) -> tuple[np.ndarray, float]:
    """Level-J scaling coefficients of the empirical measure, by binning.

    The domain is rescaled to the unit cube and the points histogrammed on
    ``2**J`` bins per axis; bin counts are converted to coefficients of
    the orthonormal periodised basis on the domain.  Points outside the
    domain are dropped but still counted in the normalisation; the dropped
    fraction is returned alongside.  ``n_norm`` overrides the
    normalisation count (used when the caller has already filtered or
    augmented the sample).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    n_total, d = pts.shape
    if n_norm is not None:
        n_total = n_norm
    if n_total == 0:
        raise ValueError("no points to bin")
    domain = tuple(tuple(map(float, ab)) for ab in domain)
    if len(domain) != d:
        raise ValueError(f"domain has {len(domain)} axes for {d}-d points")
    widths = [b - a for a, b in domain]
    if any(w <= 0 for w in widths):
        raise ValueError("degenerate domain")
    side = 2**J
    counts, _ = np.histogramdd(pts, bins=(side,) * d, range=domain)
    inside = float(counts.sum())
    vol_scale = float(np.prod([w ** -0.5 for w in widths]))
    coeffs = 2.0 ** (J * d / 2.0) * (counts / n_total) * vol_scale
    return coeffs, 1.0 - inside / n_total


@dataclass
class DensityEstimate:
    """Reconstructed function values on the dyadic grid of the domain."""

    values: np.ndarray = field(repr=False)
    axes: list = field(repr=False)
    domain: tuple
    pyramid: CoeffPyramid | None = field(default=None, repr=False)
    kept_fraction: float = 1.0
    out_fraction: float = 0.0
    config: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.domain)

    def bin_widths(self) -> list[float]:
        return [(b - a) / len(ax) for (a, b), ax in zip(self.domain, self.axes)]

    def value_at(self, points: np.ndarray) -> np.ndarray:
        """Piecewise-constant evaluation (nearest bin); zero off-domain."""
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1 and self.dim == 1:
            pts = pts[:, None]
        idx = []
        inside = np.ones(pts.shape[0], dtype=bool)
        for axis, (a, b) in enumerate(self.domain):
            n_bins = self.values.shape[axis]
            rel = (pts[:, axis] - a) / (b - a)
            inside &= (rel >= 0.0) & (rel <= 1.0)
            k = np.clip((rel * n_bins).astype(np.int64), 0, n_bins - 1)
            idx.append(k)
        out = self.values[tuple(idx)]
        return np.where(inside, out, 0.0)

    def mass(self) -> float:
        """Riemann integral of the reconstruction over the domain."""
        return float(self.values.sum() * np.prod(self.bin_widths()))


def evaluate_on_grid(pyramid: CoeffPyramid, spec: WaveletSpec, **info) -> DensityEstimate:
    """Invert the pyramid and convert scaling coefficients to densities.

    Applies the inverse of the binning normalisation, so values are in
    density units of the original domain and grid points are bin centres.
    """
    level_j = dwt_inverse(pyramid, spec)
    d = pyramid.dim
    side = level_j.shape[0]
    J = side.bit_length() - 1
    widths = [b - a for a, b in pyramid.domain]
    vol_scale = float(np.prod([w ** -0.5 for w in widths]))
    values = 2.0 ** (J * d / 2.0) * level_j * vol_scale
    axes = [
        a + (b - a) * (np.arange(side) + 0.5) / side for a, b in pyramid.domain
    ]
    return DensityEstimate(
        values=values,
        axes=axes,
        domain=pyramid.domain,
        pyramid=pyramid,
        kept_fraction=pyramid.detail_kept_fraction(),
        **info,
    )


# -- CSV round-trips ---------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.17g}"


def pyramid_to_csv(pyramid: CoeffPyramid, path) -> None:
    idx_cols = [f"i{k}" for k in range(pyramid.dim)]
    meta = " ".join(
        [f"dim={pyramid.dim}", f"J={pyramid.J}", f"j0={pyramid.j0}"]
        + [_fmt(v) for ab in pyramid.domain for v in ab]
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "orientation", *idx_cols, "value"])
        w.writerow([f"# {meta}"])
        blocks = [(pyramid.j0, "a" * pyramid.dim, pyramid.approx)]
        blocks += [(j, o, v) for (j, o), v in sorted(pyramid.details.items())]
        for level, orient, block in blocks:
            for idx in np.ndindex(block.shape):
                w.writerow([level, orient, *idx, _fmt(block[idx])])


def pyramid_from_csv(path) -> CoeffPyramid:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        dim = len(header) - 3
        meta = next(r)[0].lstrip("# ").split()
        fields = dict(kv.split("=") for kv in meta[:3])
        J, j0 = int(fields["J"]), int(fields["j0"])
        flat = [float(v) for v in meta[3:]]
        domain = tuple((flat[2 * k], flat[2 * k + 1]) for k in range(dim))
        approx = np.zeros((2**j0,) * dim)
        details = {
            (j, o): np.zeros((2**j,) * dim)
            for j in range(j0, J)
            for o in _orientations(dim)
        }
        for row in r:
            level, orient = int(row[0]), row[1]
            idx = tuple(int(v) for v in row[2 : 2 + dim])
            val = float(row[2 + dim])
            if orient == "a" * dim:
                approx[idx] = val
            else:
                details[(level, orient)][idx] = val
    return CoeffPyramid(dim=dim, J=J, j0=j0, domain=domain, approx=approx, details=details)


def grid_to_csv(est: DensityEstimate, path) -> None:
    cols = ["x", "y", "z"][: est.dim]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*cols, "value"])
        mesh = np.meshgrid(*est.axes, indexing="ij")
        flat = [m.ravel() for m in mesh]
        for k, v in enumerate(est.values.ravel()):
            w.writerow([*(_fmt(m[k]) for m in flat), _fmt(v)])


def grid_from_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a grid CSV back as (points, values)."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        d = len(header) - 1
        pts, vals = [], []
        for row in r:
            pts.append([float(v) for v in row[:d]])
            vals.append(float(row[d]))
    return np.array(pts), np.array(vals)
