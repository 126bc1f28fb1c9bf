"""Hitting sets for low-variate polynomials via Kronecker substitution on a full grid.

x_j -> y^(w_j) with mixed-radix weights w_j = prod_{i<j} (delta_i + 1) sends distinct
monomials of per-variable degree <= delta_i to distinct powers of y, all below
G = prod (delta_i + 1).  A nonzero univariate of degree < G misses one of G
distinct values of y, so the points (y^w_1, ..., y^w_m) for y in {0..G-1} hit it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .algebra import DEFAULT_PRIME
from .errors import FieldTooSmall


@dataclass(frozen=True)
class SparseHittingSpec:
    degrees: tuple[int, ...]

    @classmethod
    def uniform(cls, m: int, delta: int) -> SparseHittingSpec:
        return cls((delta,) * m)

    def __post_init__(self):
        if any(d < 0 for d in self.degrees):
            raise ValueError("degree bounds must be nonnegative")

    @property
    def m(self) -> int:
        return len(self.degrees)

    @property
    def weights(self) -> tuple[int, ...]:
        out, w = [], 1
        for d in self.degrees:
            out.append(w)
            w *= d + 1
        return tuple(out)

    @property
    def grid_size(self) -> int:
        """Number of grid values: one more than the largest substituted degree."""
        g = 1
        for d in self.degrees:
            g *= d + 1
        return g

    def kronecker(self, e: Sequence[int]) -> int:
        return sum(w * k for w, k in zip(self.weights, e))


def hitting_points(spec: SparseHittingSpec, p: int = DEFAULT_PRIME, offset: Sequence[int] | None = None) -> list[tuple[int, ...]]:
    """Points (a_1 + y^w_1, ..., a_m + y^w_m) for y = 0..G-1, with a the optional offset."""
    G = spec.grid_size
    if G > p:
        raise FieldTooSmall(f"grid needs {G} distinct values but p = {p}")
    off = tuple(offset) if offset is not None else (0,) * spec.m
    ws = spec.weights
    return [tuple((a + pow(y, w, p)) % p for a, w in zip(off, ws)) for y in range(G)]


def low_variate_hitting(
    f: Callable[[Sequence[int]], int], m: int, delta: int | Sequence[int], p: int = DEFAULT_PRIME
) -> tuple[bool, tuple[int, ...] | None]:
    """(nonzero, witness) for an m-variate blackbox with per-variable degree <= delta."""
    degs = tuple(delta) if not isinstance(delta, int) else (delta,) * m
    for pt in hitting_points(SparseHittingSpec(degs), p):
        if f(pt) % p:
            return True, pt
    return False, None
