"""Symmetric derivative multi-indices over the base variables.

A multi-index sigma = (sigma_1, ..., sigma_n) counts how many times each
base variable is differentiated.  Storing counts (rather than ordered
letter sequences) bakes in the commutativity of partial derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence


class DimensionMismatch(ValueError):
    """Combination of multi-indices over incompatible base spaces."""


@dataclass(frozen=True)
class MultiIndex:
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if len(self.counts) < 1:
            raise ValueError("multi-index needs at least one base variable")
        if any(c < 0 for c in self.counts):
            raise ValueError(f"negative entry in multi-index {self.counts}")

    @staticmethod
    def zero(n: int) -> "MultiIndex":
        return MultiIndex((0,) * n)

    @property
    def dimension(self) -> int:
        return len(self.counts)

    def order(self) -> int:
        return sum(self.counts)

    def factorial(self) -> int:
        out = 1
        for c in self.counts:
            out *= math.factorial(c)
        return out

    def union(self, other: "MultiIndex") -> "MultiIndex":
        self._check_dim(other)
        return MultiIndex(tuple(a + b for a, b in zip(self.counts, other.counts)))

    def bump(self, axis: int) -> "MultiIndex":
        """The multi-index with one extra derivative along ``axis``."""
        c = list(self.counts)
        c[axis] += 1
        return MultiIndex(tuple(c))

    def contains(self, other: "MultiIndex") -> bool:
        self._check_dim(other)
        return all(a >= b for a, b in zip(self.counts, other.counts))

    def sub(self, other: "MultiIndex") -> "MultiIndex":
        if not self.contains(other):
            raise ValueError(f"{other.counts} is not contained in {self.counts}")
        return MultiIndex(tuple(a - b for a, b in zip(self.counts, other.counts)))

    def binom(self, other: "MultiIndex") -> int:
        """Product of the per-axis binomial coefficients C(sigma_a, rho_a)."""
        if not self.contains(other):
            return 0
        out = 1
        for a, b in zip(self.counts, other.counts):
            out *= math.comb(a, b)
        return out

    def subindices(self) -> Iterator["MultiIndex"]:
        """All rho with rho <= sigma componentwise, in graded-lex order."""
        subs = list(_boxed(self.counts))
        subs.sort(key=lambda c: (sum(c), tuple(-x for x in c)))
        for c in subs:
            yield MultiIndex(c)

    def render(self, base_names: Sequence[str]) -> str:
        """Juxtaposition of base-variable names, e.g. ``x1 x1 x2`` for (2, 1)."""
        parts = []
        for name, count in zip(base_names, self.counts):
            parts.extend([name] * count)
        return " ".join(parts)

    def _check_dim(self, other: "MultiIndex") -> None:
        if self.dimension != other.dimension:
            raise DimensionMismatch(
                f"multi-indices over incompatible base spaces: "
                f"dimension {self.dimension} vs {other.dimension}"
            )

    def __repr__(self):
        return f"MultiIndex{self.counts}"


def order(sigma: MultiIndex) -> int:
    return sigma.order()


def union(sigma: MultiIndex, rho: MultiIndex) -> MultiIndex:
    return sigma.union(rho)


def factorial(sigma: MultiIndex) -> int:
    return sigma.factorial()


def enumerate_up_to(n: int, k: int) -> list[MultiIndex]:
    """All multi-indices of dimension n with order <= k, graded-lex ordered.

    Within one total order, indices loading earlier axes come first:
    for n=2, k=1 the result is [(0,0), (1,0), (0,1)].  The list has
    exactly C(n+k, k) elements.
    """
    if n < 1:
        raise ValueError("base dimension must be >= 1")
    if k < 0:
        raise ValueError("maximal order must be >= 0")
    out: list[MultiIndex] = []
    for total in range(k + 1):
        out.extend(MultiIndex(c) for c in _compositions(total, n))
    return out


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _boxed(bounds: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    if len(bounds) == 1:
        for c in range(bounds[0] + 1):
            yield (c,)
        return
    for c in range(bounds[0] + 1):
        for rest in _boxed(bounds[1:]):
            yield (c,) + rest
