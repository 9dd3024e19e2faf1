"""Monomial bases for truncated multivariate polynomials.

Monomials are ordered by total degree, then lexicographically with the
first variable's exponent descending. For two variables at order 2 this gives

    (0,0) (1,0) (0,1) (2,0) (1,1) (0,2)

Because the ordering is graded, the basis at order ``j`` is a prefix of the
basis at any order ``k >= j``; truncation is a slice.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb

import numpy as np


def basis_size(nvars: int, order: int) -> int:
    """Number of monomials of degree <= order in nvars variables."""
    return comb(nvars + order, order)


def _exponents_of_degree(nvars: int, degree: int) -> list[tuple[int, ...]]:
    out = []
    for combo in combinations_with_replacement(range(nvars), degree):
        e = [0] * nvars
        for v in combo:
            e[v] += 1
        out.append(tuple(e))
    out.sort(reverse=True)
    return out


@dataclass(frozen=True, eq=False)
class Basis:
    nvars: int
    order: int
    exponents: np.ndarray      # (size, nvars)
    degrees: np.ndarray        # (size,)
    index: dict                # exponent tuple -> position
    parent: np.ndarray         # monomial[i] = monomial[parent[i]] * var[parent_var[i]]
    parent_var: np.ndarray
    mul_i: np.ndarray          # product table: c[mul_k] += a[mul_i] * b[mul_j]
    mul_j: np.ndarray
    mul_k: np.ndarray

    @property
    def size(self) -> int:
        return len(self.degrees)

    def degree_slice(self, degree: int) -> slice:
        return slice(basis_size(self.nvars, degree - 1) if degree > 0 else 0,
                     basis_size(self.nvars, degree))

    def variable_position(self, var: int) -> int:
        # degree-1 block is ordered var 0, var 1, ...
        return 1 + var


@lru_cache(maxsize=None)
def get_basis(nvars: int, order: int) -> Basis:
    if nvars < 1:
        raise ValueError(f"nvars must be >= 1, got {nvars}")
    if order < 0:
        raise ValueError(f"order must be >= 0, got {order}")
    exps: list[tuple[int, ...]] = []
    for d in range(order + 1):
        exps.extend(_exponents_of_degree(nvars, d))
    exponents = np.array(exps, dtype=np.int64).reshape(len(exps), nvars)
    degrees = exponents.sum(axis=1)
    index = {e: i for i, e in enumerate(exps)}

    parent = np.zeros(len(exps), dtype=np.int64)
    parent_var = np.zeros(len(exps), dtype=np.int64)
    for i, e in enumerate(exps[1:], start=1):
        v = next(j for j, p in enumerate(e) if p > 0)
        reduced = list(e)
        reduced[v] -= 1
        parent[i] = index[tuple(reduced)]
        parent_var[i] = v

    # Encode exponents as integers in base (order + 1) to build the product
    # table with array operations instead of a double loop.
    radix = (order + 1) ** np.arange(nvars, dtype=np.int64)
    keys = exponents @ radix
    order_of_keys = np.argsort(keys)
    sorted_keys = keys[order_of_keys]
    ii, jj = np.nonzero(degrees[:, None] + degrees[None, :] <= order)
    kk_keys = keys[ii] + keys[jj]
    kk = order_of_keys[np.searchsorted(sorted_keys, kk_keys)]

    for arr in (exponents, degrees, parent, parent_var, ii, jj, kk):
        arr.setflags(write=False)
    return Basis(nvars, order, exponents, degrees, index, parent, parent_var,
                 ii.astype(np.int64), jj.astype(np.int64), kk.astype(np.int64))


def multiply_coefficients(a: np.ndarray, b: np.ndarray, basis: Basis) -> np.ndarray:
    """Truncated Cauchy product of two dense coefficient vectors."""
    prod = a[basis.mul_i] * b[basis.mul_j]
    return np.bincount(basis.mul_k, weights=prod, minlength=basis.size)


def monomial_values(dx: np.ndarray, basis: Basis) -> np.ndarray:
    """Evaluate every basis monomial at a batch of points, shape (npts, size)."""
    npts = dx.shape[0]
    out = np.empty((npts, basis.size))
    out[:, 0] = 1.0
    parent, pvar = basis.parent, basis.parent_var
    for i in range(1, basis.size):
        np.multiply(out[:, parent[i]], dx[:, pvar[i]], out=out[:, i])
    return out
