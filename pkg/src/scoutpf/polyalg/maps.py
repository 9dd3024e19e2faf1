"""Vector-valued polynomial maps: composition, inversion, evaluation."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .basis import get_basis, monomial_values, multiply_coefficients
from .poly import TruncatedPolynomial

DEFAULT_MAX_CONDITION = 1e12


class MapInversionError(ValueError):
    """The map is not square or its linear part is singular/ill-conditioned."""


class PolynomialMap:
    """A vector of truncated polynomials sharing variables and order.

    ``coefficients`` has shape ``(dim_out, basis size)``. ``center_in`` is the
    point the deviation variables are measured from and ``center_out`` the
    codomain point deviations are measured to. Maps built with
    :meth:`from_polynomials` are deviation maps: the constant column is zero
    and the constants live in ``center_out``.
    """

    __slots__ = ("_c", "basis", "center_in", "center_out")

    def __init__(self, coefficients, nvars: int, order: int,
                 center_in=None, center_out=None):
        basis = get_basis(nvars, order)
        c = np.array(coefficients, dtype=float)
        if c.ndim != 2 or c.shape[1] != basis.size:
            raise ValueError(
                f"coefficients must have shape (dim_out, {basis.size}); got {c.shape}")
        c.setflags(write=False)
        self._c = c
        self.basis = basis
        cin = np.zeros(nvars) if center_in is None else np.array(center_in, dtype=float)
        cout = np.zeros(c.shape[0]) if center_out is None else np.array(center_out, dtype=float)
        if cin.shape != (nvars,) or cout.shape != (c.shape[0],):
            raise ValueError("center dimensions do not match the map")
        cin.setflags(write=False)
        cout.setflags(write=False)
        self.center_in = cin
        self.center_out = cout

    @classmethod
    def from_polynomials(cls, polys: Sequence[TruncatedPolynomial], center_in=None):
        """Deviation map from full polynomials; their constants become ``center_out``."""
        polys = list(polys)
        if not polys:
            raise ValueError("need at least one component")
        b = polys[0].basis
        if any(p.basis is not b for p in polys):
            raise ValueError("components must share nvars and order")
        c = np.stack([p.array for p in polys])
        center_out = c[:, 0].copy()
        c[:, 0] = 0.0
        return cls(c, b.nvars, b.order, center_in, center_out)

    @classmethod
    def identity(cls, n: int, order: int, center=None) -> "PolynomialMap":
        basis = get_basis(n, order)
        c = np.zeros((n, basis.size))
        c[np.arange(n), 1 + np.arange(n)] = 1.0
        return cls(c, n, order, center, center)

    @classmethod
    def linear(cls, matrix, order: int, center_in=None, center_out=None) -> "PolynomialMap":
        a = np.atleast_2d(np.asarray(matrix, dtype=float))
        basis = get_basis(a.shape[1], order)
        c = np.zeros((a.shape[0], basis.size))
        c[:, 1:1 + a.shape[1]] = a
        return cls(c, a.shape[1], order, center_in, center_out)

    # -- inspection ---------------------------------------------------------

    @property
    def coefficients(self) -> np.ndarray:
        return self._c

    @property
    def nvars(self) -> int:
        return self.basis.nvars

    @property
    def order(self) -> int:
        return self.basis.order

    @property
    def dim_out(self) -> int:
        return self._c.shape[0]

    @property
    def components(self) -> tuple[TruncatedPolynomial, ...]:
        return tuple(TruncatedPolynomial._wrap(row.copy(), self.basis) for row in self._c)

    def __len__(self):
        return self.dim_out

    def __getitem__(self, i) -> TruncatedPolynomial:
        return TruncatedPolynomial._wrap(self._c[i].copy(), self.basis)

    @property
    def is_deviation(self) -> bool:
        return not np.any(self._c[:, 0])

    def linear_part(self) -> np.ndarray:
        return linear_part(self)

    def rows(self, index) -> "PolynomialMap":
        """Sub-map made of the selected output components."""
        index = np.atleast_1d(np.asarray(index, dtype=int))
        return PolynomialMap(self._c[index], self.nvars, self.order,
                             self.center_in, self.center_out[index])

    def truncate(self, order: int) -> "PolynomialMap":
        basis = get_basis(self.nvars, order)
        return PolynomialMap(self._c[:, :basis.size], self.nvars, order,
                             self.center_in, self.center_out)

    # -- evaluation ---------------------------------------------------------

    def deviation(self, dx) -> np.ndarray:
        """Polynomial part only: shape (dim_out,) or (npts, dim_out)."""
        dx = np.asarray(dx, dtype=float)
        single = dx.ndim == 1
        pts = np.atleast_2d(dx)
        if pts.shape[1] != self.nvars:
            raise ValueError(f"deviation has {pts.shape[1]} entries, expected {self.nvars}")
        out = monomial_values(pts, self.basis) @ self._c.T
        return out[0] if single else out

    __call__ = deviation

    def evaluate(self, dx) -> np.ndarray:
        """``center_out`` plus the polynomial part at ``dx``."""
        return self.center_out + self.deviation(dx)

    def dump(self) -> str:
        return dump_map(self)

    def __repr__(self):
        return (f"PolynomialMap(dim_out={self.dim_out}, nvars={self.nvars}, "
                f"order={self.order})")


def stack_maps(maps: Sequence[PolynomialMap]) -> PolynomialMap:
    """Concatenate the outputs of maps that share variables, order and center."""
    first = maps[0]
    for m in maps[1:]:
        if m.basis is not first.basis:
            raise ValueError("maps must share nvars and order")
    return PolynomialMap(np.vstack([m.coefficients for m in maps]), first.nvars, first.order,
                         first.center_in, np.concatenate([m.center_out for m in maps]))


def linear_part(m: PolynomialMap) -> np.ndarray:
    """The ``dim_out x nvars`` matrix of first-order coefficients (the Jacobian)."""
    return np.array(m.coefficients[:, 1:1 + m.nvars])


def _monomial_polys(inner: np.ndarray, outer_basis, inner_basis) -> np.ndarray:
    """Coefficients of every outer-basis monomial evaluated on the inner polynomials."""
    vals = np.zeros((outer_basis.size, inner_basis.size))
    vals[0, 0] = 1.0
    parent, pvar = outer_basis.parent, outer_basis.parent_var
    for i in range(1, outer_basis.size):
        vals[i] = multiply_coefficients(vals[parent[i]], inner[pvar[i]], inner_basis)
    return vals


def compose(outer: PolynomialMap, inner: PolynomialMap) -> PolynomialMap:
    """Truncated expansion of ``outer o inner``.

    ``inner`` must be a deviation map whose output dimension equals the
    number of variables of ``outer``; both must share the truncation order.
    """
    if outer.nvars != inner.dim_out:
        raise ValueError(
            f"dimension mismatch: outer takes {outer.nvars} variables, "
            f"inner produces {inner.dim_out}")
    if outer.order != inner.order:
        raise ValueError(f"order mismatch: {outer.order} vs {inner.order}")
    if not inner.is_deviation:
        raise ValueError("inner map has nonzero constant parts")
    vals = _monomial_polys(inner.coefficients, outer.basis, inner.basis)
    c = outer.coefficients @ vals
    return PolynomialMap(c, inner.nvars, inner.order, inner.center_in, outer.center_out)


def invert(m: PolynomialMap, max_condition: float = DEFAULT_MAX_CONDITION) -> PolynomialMap:
    """Inverse of a square deviation map through its truncation order.

    With ``m = L + N`` (linear plus higher-order part) the inverse solves
    ``W = L^-1 (I - N o W)``. Starting from ``W = L^-1``, each pass fixes one
    more degree, so ``order - 1`` passes give an exact truncated inverse.
    """
    if m.dim_out != m.nvars:
        raise MapInversionError(
            f"map is not square: {m.dim_out} outputs, {m.nvars} variables")
    if not m.is_deviation:
        raise MapInversionError("only deviation maps (zero constant part) can be inverted")
    lin = linear_part(m)
    cond = np.linalg.cond(lin)
    if not np.isfinite(cond) or cond > max_condition:
        raise MapInversionError(f"linear part is singular or ill-conditioned (cond={cond:.3g})")
    lin_inv = np.linalg.inv(lin)
    n, order = m.nvars, m.order
    nonlinear = m.coefficients.copy()
    nonlinear[:, 1:1 + n] = 0.0
    nonlinear_map = PolynomialMap(nonlinear, n, order)

    w = PolynomialMap.linear(lin_inv, order)
    ident = PolynomialMap.identity(n, order).coefficients
    for _ in range(order - 1):
        nw = compose(nonlinear_map, w).coefficients
        w = PolynomialMap(lin_inv @ (ident - nw), n, order)
    return PolynomialMap(w.coefficients, n, order, m.center_out, m.center_in)


def condition_number(m: PolynomialMap) -> float:
    return float(np.linalg.cond(linear_part(m)))


def dump_map(m: PolynomialMap) -> str:
    """Plain-text coefficient listing, one ``exponents: value`` line per coefficient."""
    lines = [f"# nvars {m.nvars} order {m.order} dim_out {m.dim_out}"]
    exps = m.basis.exponents
    for k in range(m.dim_out):
        lines.append(f"# component {k} center_out {m.center_out[k]:.16e}")
        for i in np.flatnonzero(m.coefficients[k]):
            e = " ".join(str(int(v)) for v in exps[i])
            lines.append(f"{e}: {m.coefficients[k, i]:.16e}")
    return "\n".join(lines) + "\n"


def parse_dump(text: str) -> PolynomialMap:
    """Inverse of :func:`dump_map` (centers in are not recorded and come back as zero)."""
    header, *rest = text.strip().splitlines()
    parts = header.split()
    nvars, order, dim_out = int(parts[2]), int(parts[4]), int(parts[6])
    basis = get_basis(nvars, order)
    c = np.zeros((dim_out, basis.size))
    center_out = np.zeros(dim_out)
    k = -1
    for line in rest:
        if line.startswith("# component"):
            toks = line.split()
            k = int(toks[2])
            center_out[k] = float(toks[4])
            continue
        lhs, rhs = line.split(":")
        c[k, basis.index[tuple(int(v) for v in lhs.split())]] = float(rhs)
    return PolynomialMap(c, nvars, order, None, center_out)

