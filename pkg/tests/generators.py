"""Seeded random data for property and acceptance tests."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from bltk.datum import BLDatum, ExponentVector
from bltk.linalg import EXACT, Matrix

from oracles import hand_rref_rank


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def random_surjection(rng, rows: int, n: int, height: int = 2) -> list[list[int]]:
    while True:
        L = rng.integers(-height, height + 1, size=(rows, n)).tolist()
        if hand_rref_rank(L) == rows:
            return L


def random_exponents(rng, dims, n, balanced: bool):
    """Reciprocals on a quarter grid; when balanced the last is solved for Σ n_j r_j = n."""
    grid = [Fraction(k, 4) for k in range(5)]
    for _ in range(200):
        r = [grid[int(rng.integers(len(grid)))] for _ in dims]
        if balanced:
            rest = n - sum(d * x for d, x in zip(dims[:-1], r[:-1]))
            last = Fraction(rest, dims[-1])
            if not 0 <= last <= 1:
                continue
            r[-1] = last
        return ExponentVector.from_reciprocals(r)
    # Σ n_j < n: no balanced choice exists
    return ExponentVector.from_reciprocals([grid[-1]] * len(dims))


def random_datum(rng, max_n: int = 4, balanced_share: float = 0.8) -> BLDatum:
    n = int(rng.integers(1, max_n + 1))
    m = int(rng.integers(2, 4))
    dims = [int(rng.integers(1, n + 1)) for _ in range(m)]
    maps = [Matrix(random_surjection(rng, k, n), EXACT, (k, n)) for k in dims]
    p = random_exponents(rng, dims, n, rng.uniform() < balanced_share)
    return BLDatum(n, maps, p)
