"""Offspring transition kernels: growth-fragmentation and autoregressive.

A kernel draws the trait pair of both children given the parent trait, and
exposes the density of the child-marginal ("mean") transition when it has
one in closed or quadrature-computable form.  Sampling always goes through
explicit counter-based streams (see :mod:`bmcwave.rng`) so replicated
simulations are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .rng import NodeStreams, UniformStream

LOG2 = math.log(2.0)


class EnvelopeError(RuntimeError):
    """Raised when a proposal density fails to dominate the target."""


class KernelError(RuntimeError):
    """Raised when child sampling cannot complete."""


def tent(t):
    """Unit tent: 1 - |t| on [-1, 1], zero outside."""
    return np.maximum(0.0, 1.0 - np.abs(t))


def splitting_rate(w, spike_c: float = 0.0, spike_j: int = 0):
    """Division rate w/(5-w) plus an optional tent bump centred at 3.5.

    The bump has amplitude ``spike_c`` and support half-width ``2**-spike_j``.
    """
    w = np.asarray(w, dtype=np.float64)
    out = w / (5.0 - w)
    if spike_c:
        out = out + spike_c * tent((w - 3.5) * 2.0**spike_j)
    return out


@dataclass
class GrowthFragModel:
    """Size-at-birth kernel of the binary growth-fragmentation process.

    Cells grow exponentially at rate ``tau`` and split into two halves at
    size-dependent rate ``B``; both children inherit the same size at
    birth, whose conditional density given the parent size has an explicit
    hazard-rate form.  ``B`` is the baseline ``w/(5-w)`` on the state
    interval (0, 5) plus an optional tent perturbation of amplitude
    ``spike_c`` and scale ``spike_j``.
    """

    tau: float = 2.0
    spike_c: float = 0.0
    spike_j: int = 0
    class_r: float = 2.5
    class_L: float = field(default=0.9 * 2.0 * LOG2)
    envelope_slack: float = 1.05
    envelope_grid: int = 480

    support = (0.0, 5.0)
    child_support = (0.0, 2.5)
    _MAX_ROUNDS = 10_000

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.spike_c < 0:
            raise ValueError("spike amplitude must be >= 0")
        self._m = 3.5
        self._h = 2.0 ** -self.spike_j
        self._wl = self._m - self._h
        self._wr = self._m + self._h
        # piecewise-log primitives of the tent part of B(w)/w
        self._spike_left = float(self._spike_cum(np.array(self._m))[()])
        self._spike_total = float(self._spike_cum(np.array(self._wr))[()])
        self._envelope = self._compute_envelope()

    # -- splitting rate and hazard ------------------------------------

    def rate(self, w):
        return splitting_rate(w, self.spike_c, self.spike_j)

    def _spike_cum(self, w):
        """Cumulative integral of the tent part of B(w)/w from below."""
        if not self.spike_c:
            return np.zeros_like(np.asarray(w, dtype=np.float64))
        m, h = self._m, self._h
        wc = np.clip(w, self._wl, self._wr)
        s1 = lambda t: (1.0 - m / h) * np.log(t) + t / h
        s2 = lambda t: (1.0 + m / h) * np.log(t) - t / h
        left = s1(np.minimum(wc, m)) - s1(self._wl)
        right = np.where(wc > m, s2(np.maximum(wc, m)) - s2(m), 0.0)
        return self.spike_c * (left + right)

    def cum_hazard(self, x, y):
        """Integral of B(2z)/(tau z) over z in [x/2, y] (closed form)."""
        x = np.asarray(x, dtype=np.float64)
        w = 2.0 * np.asarray(y, dtype=np.float64)
        base = -np.log(5.0 - w) + np.log(5.0 - x)
        return (base + self._spike_cum(w) - self._spike_cum(x)) / self.tau

    def child_cdf(self, x, y):
        """CDF of the child size given parent size ``x``."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        yc = np.clip(y, x / 2.0, np.nextafter(2.5, 0.0))
        out = 1.0 - np.exp(-self.cum_hazard(x, yc))
        return np.where(y >= 2.5, 1.0, np.where(y <= x / 2.0, 0.0, out))

    def q_density_exact(self, x, y):
        """Child-size density via the closed-form hazard (vectorised)."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        ok = (y >= x / 2.0) & (y < 2.5) & (y > 0.0)
        ys = np.where(ok, y, 1.0)
        val = self.rate(2.0 * ys) / (self.tau * ys) * np.exp(
            -self.cum_hazard(x, ys)
        )
        return np.where(ok, val, 0.0)

    def q_density(self, x: float, y: float) -> float:
        """Child-size density at (x, y), inner integral by adaptive quadrature.

        Absolute quadrature tolerance 1e-10; the closed-form evaluation
        ``q_density_exact`` is checked against this in the test suite.
        """
        lo, hi = self.support
        if not (lo < x < hi):
            raise ValueError(f"parent size {x} outside ({lo}, {hi})")
        if not (lo < y < hi):
            raise ValueError(f"child size {y} outside ({lo}, {hi})")
        if y < x / 2.0 or y >= 2.5:
            return 0.0
        kinks = [
            z for z in (self._wl / 2.0, self._m / 2.0, self._wr / 2.0)
            if x / 2.0 < z < y
        ]
        val, err = quad(
            lambda z: float(self.rate(2.0 * z)) / (self.tau * z),
            x / 2.0,
            y,
            points=kinks or None,
            epsabs=1e-10,
            epsrel=1e-12,
            limit=400,
        )
        if err > 1e-8:
            raise KernelError(
                f"hazard quadrature did not converge at (x={x}, y={y}), "
                f"estimated error {err:.2e}"
            )
        return float(self.rate(2.0 * y)) / (self.tau * y) * math.exp(-val)

    # -- rejection sampling -------------------------------------------

    _Y_MAX = float(np.nextafter(2.5, 0.0))

    def _proposal_ppf(self, x, u):
        """Inverse CDF of the baseline child density.

        Clamped strictly below the support endpoint: for u within one ulp
        of 1 the closed form rounds to 2.5 exactly, where the rate pole
        sits.
        """
        return np.minimum(0.5 * (5.0 - (5.0 - x) * (1.0 - u) ** self.tau), self._Y_MAX)

    def _ratio(self, x, y):
        """Density ratio target/proposal (before envelope normalisation)."""
        w = 2.0 * np.asarray(y, dtype=np.float64)
        base = w / (5.0 - w)
        return (self.rate(w) / base) * np.exp(
            -(self._spike_cum(w) - self._spike_cum(np.asarray(x))) / self.tau
        )

    def _compute_envelope(self) -> float:
        if not self.spike_c:
            return 1.0
        g = self.envelope_grid
        xs = np.linspace(1e-3, 5.0 - 1e-3, g)
        ys = np.linspace(1e-3, 2.5 - 1e-6, g)
        ys = np.union1d(ys, [self._wl / 2.0, self._m / 2.0, self._wr / 2.0])
        xg, yg = np.meshgrid(xs, ys, indexing="ij")
        ratio = self._ratio(xg, yg)
        ratio[yg < xg / 2.0] = 0.0
        return self.envelope_slack * float(ratio.max())

    @property
    def envelope(self) -> float:
        return self._envelope

    def sample_children(
        self, xs: np.ndarray, streams: NodeStreams, node_ids: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised child sizes for the parents ``xs``; both children equal.

        Per node, rejection round ``r`` consumes the four uniforms of
        counter round ``r`` (two proposal/acceptance trials each).
        """
        xs = np.asarray(xs, dtype=np.float64)
        ids = np.asarray(node_ids, dtype=np.uint64)
        ys = np.empty_like(xs)
        pending = np.arange(xs.shape[0])
        for rnd in range(self._MAX_ROUNDS):
            u4 = streams.uniforms(ids[pending], rnd)
            for t in (0, 1):
                y = self._proposal_ppf(xs[pending], u4[:, 2 * t])
                if self.spike_c:
                    ratio = self._ratio(xs[pending], y) / self._envelope
                    if np.any(ratio > 1.0):
                        bad = int(np.argmax(ratio))
                        raise EnvelopeError(
                            "envelope too small: ratio "
                            f"{float(ratio[bad]):.6f} at (x={xs[pending][bad]:.6f}, "
                            f"y={y[bad]:.6f}), node {int(ids[pending][bad])}"
                        )
                    acc = u4[:, 2 * t + 1] <= ratio
                else:
                    acc = np.ones(y.shape, dtype=bool)
                ys[pending[acc]] = y[acc]
                pending = pending[~acc]
                u4 = u4[~acc]
                if pending.size == 0:
                    return ys, ys.copy()
        raise KernelError(
            f"rejection sampling exceeded {self._MAX_ROUNDS} rounds"
        )

    def _spike_cum_scalar(self, w: float) -> float:
        m, h, c = self._m, self._h, self.spike_c
        if w <= self._wl:
            return 0.0
        if w >= self._wr:
            return self._spike_total
        if w <= m:
            return c * ((1.0 - m / h) * math.log(w / self._wl) + (w - self._wl) / h)
        return self._spike_left + c * ((1.0 + m / h) * math.log(w / m) - (w - m) / h)

    def sample_child(self, x: float, stream: UniformStream) -> float:
        """Scalar fast path used by sequential chain simulation."""
        tau, c = self.tau, self.spike_c
        env = self._envelope
        u = stream.u
        if not c:
            return min(0.5 * (5.0 - (5.0 - x) * (1.0 - u()) ** tau), self._Y_MAX)
        sx = self._spike_cum_scalar(x)
        for _ in range(self._MAX_ROUNDS):
            y = min(0.5 * (5.0 - (5.0 - x) * (1.0 - u()) ** tau), self._Y_MAX)
            v = u()
            w = 2.0 * y
            base = w / (5.0 - w)
            bump = c * max(0.0, 1.0 - abs(w - self._m) / self._h)
            ratio = (
                (base + bump)
                / base
                * math.exp(-(self._spike_cum_scalar(w) - sx) / tau)
                / env
            )
            if ratio > 1.0:
                raise EnvelopeError(
                    f"envelope too small: ratio {ratio:.6f} at (x={x}, y={y})"
                )
            if v <= ratio:
                return y
        raise KernelError("rejection sampling exceeded round limit")

    def sample_pair(self, x: float, stream: UniformStream) -> tuple[float, float]:
        y = self.sample_child(x, stream)
        return y, y

    # -- admissibility -------------------------------------------------

    def class_membership(self) -> dict:
        """Numeric check of the admissibility constraints on B.

        Verifies that the rate integral B(w)/w diverges at the right edge
        of the state interval and stays below ``class_L`` up to ``class_r``.
        """
        kinks = [z for z in (self._wl, self._m, self._wr) if 0.0 < z < self.class_r]
        head, _ = quad(
            lambda w: float(self.rate(w)) / w,
            1e-12,
            self.class_r,
            points=kinks or None,
            limit=400,
        )
        tail = {}
        for d in (1e-2, 1e-4, 1e-6):
            kinks = [z for z in (self._wl, self._m, self._wr) if self.class_r < z < 5.0 - d]
            tail[d], _ = quad(
                lambda w: float(self.rate(w)) / w,
                self.class_r,
                5.0 - d,
                points=kinks or None,
                limit=400,
            )
        diverges = tail[1e-6] >= 5.0 and tail[1e-6] - tail[1e-4] >= 1.0
        return {
            "head_integral": head,
            "head_bound": self.class_L,
            "head_ok": head <= self.class_L,
            "tail_integrals": tail,
            "diverges": diverges,
            "ok": head <= self.class_L and diverges,
        }

    def config(self) -> dict:
        return {
            "model": "gf",
            "tau": self.tau,
            "spike_c": self.spike_c,
            "spike_j": self.spike_j,
        }


class GaussianNoise:
    """Independent standard normal pair, sampled by Box-Muller."""

    exchangeable = True

    def sample_pairs(self, u4: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        r = np.sqrt(-2.0 * np.log1p(-u4[:, 0]))
        theta = 2.0 * math.pi * u4[:, 1]
        return r * np.cos(theta), r * np.sin(theta)

    def sample_pair(self, stream: UniformStream) -> tuple[float, float]:
        r = math.sqrt(-2.0 * math.log1p(-stream.u()))
        theta = 2.0 * math.pi * stream.u()
        return r * math.cos(theta), r * math.sin(theta)

    def marginal_pdf(self, t):
        return np.exp(-0.5 * np.asarray(t) ** 2) / math.sqrt(2.0 * math.pi)


@dataclass
class BarModel:
    """Bifurcating autoregression: child trait = f_i(parent) + sigma_i(parent) * noise."""

    f0: callable
    f1: callable
    sigma0: callable
    sigma1: callable
    noise: GaussianNoise = field(default_factory=GaussianNoise)
    support = (-np.inf, np.inf)
    child_support = (-np.inf, np.inf)

    def sample_children(
        self, xs: np.ndarray, streams: NodeStreams, node_ids: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        xs = np.asarray(xs, dtype=np.float64)
        u4 = streams.uniforms(np.asarray(node_ids, dtype=np.uint64), 0)
        e0, e1 = self.noise.sample_pairs(u4)
        return self.f0(xs) + self.sigma0(xs) * e0, self.f1(xs) + self.sigma1(xs) * e1

    def sample_pair(self, x: float, stream: UniformStream) -> tuple[float, float]:
        e0, e1 = self.noise.sample_pair(stream)
        return (
            float(self.f0(x)) + float(self.sigma0(x)) * e0,
            float(self.f1(x)) + float(self.sigma1(x)) * e1,
        )

    def q_density(self, x, y):
        """Mean-transition density: average of the two child marginals.

        Returns None when the noise marginals are unavailable.
        """
        pdf = getattr(self.noise, "marginal_pdf", None)
        if pdf is None:
            return None
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        s0, s1 = self.sigma0(x), self.sigma1(x)
        out = 0.5 * (
            pdf((y - self.f0(x)) / s0) / s0 + pdf((y - self.f1(x)) / s1) / s1
        )
        return out if out.shape else float(out)

    def bounds_on(self, grid: np.ndarray) -> dict:
        """Sup of |f_i| and inf of sigma_i over a test grid."""
        f = np.maximum(np.abs(self.f0(grid)), np.abs(self.f1(grid)))
        s = np.minimum(self.sigma0(grid), self.sigma1(grid))
        return {"ell": float(f.max()), "sigma_min": float(s.min())}

    def config(self) -> dict:
        return {"model": "bar"}


# -- named presets for configuration files ----------------------------

def link_from_spec(spec: str):
    """Build a bounded link function from a named preset like 'tanh:1:0.5'."""
    parts = spec.split(":")
    kind, args = parts[0], [float(p) for p in parts[1:]]
    if kind == "const":
        (v,) = args or (0.0,)
        return lambda x: np.full_like(np.asarray(x, dtype=np.float64), v)
    if kind == "tanh":
        a, b = (args + [1.0, 1.0])[:2]
        return lambda x: a * np.tanh(b * np.asarray(x, dtype=np.float64))
    raise ValueError(f"unknown link preset {spec!r} (use const:v or tanh:a:b)")


def sigma_from_spec(spec: str):
    """Build a volatility function from a named preset like 'const:1'."""
    parts = spec.split(":")
    kind, args = parts[0], [float(p) for p in parts[1:]]
    if kind == "const":
        (v,) = args or (1.0,)
        if v <= 0:
            raise ValueError("volatility must be positive")
        return lambda x: np.full_like(np.asarray(x, dtype=np.float64), v)
    raise ValueError(f"unknown volatility preset {spec!r} (use const:v)")


def bar_from_specs(f0="tanh:1:1", f1="tanh:1:1", sigma0="const:1", sigma1="const:1"):
    return BarModel(
        f0=link_from_spec(f0),
        f1=link_from_spec(f1),
        sigma0=sigma_from_spec(sigma0),
        sigma1=sigma_from_spec(sigma1),
    )
