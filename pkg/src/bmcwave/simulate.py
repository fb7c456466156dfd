"""Forward simulation on the binary tree and along a tagged lineage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import KernelError
from .rng import ROOT_STREAM, TAGGED_STREAM, NodeStreams, UniformStream
from .tree import TreeSample, generation_ids, sizes


@dataclass(frozen=True)
class RootLaw:
    """Initial trait distribution: uniform(a, b), point(x) or empirical."""

    kind: str = "uniform"
    a: float = 1.25
    b: float = 2.25
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "uniform":
            if not self.a < self.b:
                raise ValueError("uniform root law needs a < b")
        elif self.kind == "point":
            pass
        elif self.kind == "empirical":
            if self.values is None or len(self.values) == 0:
                raise ValueError("empirical root law needs sample values")
        else:
            raise ValueError(f"unknown root law kind {self.kind!r}")

    def draw(self, streams: NodeStreams) -> float:
        u = float(streams.uniforms(np.array([ROOT_STREAM]), 0)[0, 0])
        if self.kind == "uniform":
            return self.a + (self.b - self.a) * u
        if self.kind == "point":
            return self.a
        return float(self.values[int(u * len(self.values))])

    @staticmethod
    def from_spec(spec: str) -> "RootLaw":
        parts = spec.split(":")
        if parts[0] == "uniform":
            return RootLaw("uniform", float(parts[1]), float(parts[2]))
        if parts[0] == "point":
            return RootLaw("point", float(parts[1]))
        raise ValueError(f"unknown root law spec {spec!r}")


def simulate_tree(kernel, root_law: RootLaw, n: int, seed: int) -> TreeSample:
    """Simulate traits down to generation ``n``, breadth first.

    The draws of node ``u`` come from the counter-based stream keyed by
    ``(seed, u)``, so the result is independent of evaluation order and
    bit-reproducible for a given seed.
    """
    if n < 0:
        raise ValueError("generation count must be >= 0")
    streams = NodeStreams(seed)
    traits = np.empty(sizes(n)[1], dtype=np.float64)
    traits[0] = root_law.draw(streams)
    for m in range(n):
        ids = generation_ids(m)
        try:
            y0, y1 = kernel.sample_children(traits[ids], streams, ids)
        except KernelError as exc:
            raise KernelError(f"generation {m}: {exc}") from exc
        traits[2 * ids + 1] = y0
        traits[2 * ids + 2] = y1
    return TreeSample(n=n, traits=traits)


def tagged_branch(kernel, x0: float, m: int, seed: int) -> np.ndarray:
    """Trait path of one uniformly random lineage, length ``m + 1``.

    Each step draws a fresh offspring pair and a fair coin to pick which
    child the lineage follows.
    """
    if m < 0:
        raise ValueError("path length must be >= 0")
    stream = UniformStream(seed, int(TAGGED_STREAM))
    path = np.empty(m + 1, dtype=np.float64)
    path[0] = x0
    x = float(x0)
    for k in range(1, m + 1):
        y, z = kernel.sample_pair(x, stream)
        x = y if stream.u() < 0.5 else z
        path[k] = x
    return path


def generation_autocorr(tree: TreeSample, max_lag: int) -> np.ndarray:
    """Sample autocorrelation of the ordered first-born traits of the last
    generation's parents.

    Takes the 0-children of generation ``n - 1`` in node-id order and
    returns rows ``(lag, rho)`` for lags 0..max_lag.
    """
    if tree.n < 2:
        raise ValueError("need at least two generations")
    parents = generation_ids(tree.n - 1)
    series = tree.traits[2 * parents + 1]
    return autocorrelation(series, max_lag)


def autocorrelation(series: np.ndarray, max_lag: int) -> np.ndarray:
    """Standard sample autocorrelation at lags 0..max_lag."""
    series = np.asarray(series, dtype=np.float64)
    if max_lag >= series.shape[0]:
        raise ValueError(
            f"max_lag {max_lag} >= series length {series.shape[0]}"
        )
    centred = series - series.mean()
    denom = float(np.dot(centred, centred))
    if denom == 0.0:
        raise ValueError("series is constant")
    out = np.empty((max_lag + 1, 2), dtype=np.float64)
    for lag in range(max_lag + 1):
        num = float(np.dot(centred[: len(centred) - lag], centred[lag:]))
        out[lag] = (lag, num / denom)
    return out
