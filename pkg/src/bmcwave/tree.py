"""Index arithmetic and flat storage for complete binary trait trees.

Nodes are addressed in heap order: the root is 0 and the children of node
``u`` are ``2u+1`` and ``2u+2``.  Generation ``m`` therefore occupies the
contiguous id range ``[2^m - 1, 2^{m+1} - 1)`` and a tree observed down to
generation ``n`` is a flat array of ``2^{n+1} - 1`` traits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


def parent(u: int) -> int:
    """Heap parent of node ``u``; the root has none."""
    if u <= 0:
        raise ValueError("root has no parent")
    return (u - 1) // 2


def children(u: int) -> tuple[int, int]:
    return 2 * u + 1, 2 * u + 2


def generation(u: int) -> int:
    """Generation (depth) of node ``u``: floor(log2(u+1))."""
    if u < 0:
        raise ValueError("node ids are non-negative")
    return (int(u) + 1).bit_length() - 1


def sizes(n: int) -> tuple[int, int]:
    """(#nodes in generation n, #nodes in the tree down to generation n)."""
    if n < 0:
        raise ValueError("generation count must be >= 0")
    return 2**n, 2 ** (n + 1) - 1


def generation_ids(m: int) -> np.ndarray:
    """Node ids of generation ``m`` in increasing order."""
    if m < 0:
        raise ValueError("generation count must be >= 0")
    return np.arange(2**m - 1, 2 ** (m + 1) - 1, dtype=np.int64)


def iter_generation(m: int):
    yield from range(2**m - 1, 2 ** (m + 1) - 1)


def iter_tree(n: int):
    yield from range(2 ** (n + 1) - 1)


@dataclass(frozen=True)
class TreeSample:
    """Traits of all nodes of a complete binary tree, root first.

    ``traits[u]`` is the trait of node ``u``; the array is treated as
    immutable after construction.
    """

    n: int
    traits: np.ndarray = field(repr=False)

    def __post_init__(self):
        traits = np.ascontiguousarray(self.traits, dtype=np.float64)
        if traits.shape != (sizes(self.n)[1],):
            raise ValueError(
                f"expected {sizes(self.n)[1]} traits for {self.n} generations, "
                f"got {traits.shape}"
            )
        if not np.all(np.isfinite(traits)):
            raise ValueError("traits must be finite")
        traits.flags.writeable = False
        object.__setattr__(self, "traits", traits)

    def __len__(self) -> int:
        return self.traits.shape[0]

    def generation_traits(self, m: int) -> np.ndarray:
        if not 0 <= m <= self.n:
            raise ValueError(f"generation {m} outside 0..{self.n}")
        return self.traits[2**m - 1 : 2 ** (m + 1) - 1]

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """(parent trait, own trait) for every non-root node, in id order."""
        if self.n < 1:
            raise ValueError("need at least one generation of offspring")
        u = np.arange(1, len(self), dtype=np.int64)
        return self.traits[(u - 1) // 2], self.traits[u]

    def triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(own, child 0, child 1) traits for every node with offspring."""
        if self.n < 1:
            raise ValueError("need at least one generation of offspring")
        u = np.arange(0, sizes(self.n - 1)[1], dtype=np.int64)
        return self.traits[u], self.traits[2 * u + 1], self.traits[2 * u + 2]

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node_id", "generation", "trait"])
            gen = 0
            nxt = 1
            for u, x in enumerate(self.traits):
                if u >= nxt:
                    gen += 1
                    nxt = 2 ** (gen + 1) - 1
                w.writerow([u, gen, f"{x:.17g}"])


def load_csv(path) -> TreeSample:
    """Read a tree written by :meth:`TreeSample.save_csv`."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != ["node_id", "generation", "trait"]:
            raise ValueError(f"unexpected tree CSV header: {header}")
        traits = []
        for i, row in enumerate(r):
            u, gen, x = int(row[0]), int(row[1]), float(row[2])
            if u != i or gen != generation(u):
                raise ValueError(f"row {i}: bad node id or generation")
            traits.append(x)
    size = len(traits)
    n = size.bit_length() - 1
    if size != 2 ** (n + 1) - 1:
        raise ValueError(f"{size} rows is not a complete tree")
    return TreeSample(n=n, traits=np.array(traits))
