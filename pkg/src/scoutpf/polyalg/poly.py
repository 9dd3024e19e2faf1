"""Truncated multivariate Taylor polynomials and their elementary functions."""

from __future__ import annotations

import math
from numbers import Real

import numpy as np

from .basis import Basis, get_basis, monomial_values, multiply_coefficients


class SingularExpansionError(ValueError):
    """The expansion point lies outside the domain of an intrinsic function."""


class TruncatedPolynomial:
    """Taylor polynomial in ``nvars`` deviation variables truncated at ``order``.

    Coefficients are held densely in the canonical graded-lex order of
    :func:`~scoutpf.polyalg.basis.get_basis`. Instances are immutable.
    Arithmetic with Python/NumPy scalars is supported through the usual
    operators, so model functions written with ``+ - * /`` and the intrinsics
    in this module run unchanged on floats, arrays and polynomials.
    """

    __slots__ = ("_c", "basis")
    __array_ufunc__ = None  # numpy defers to our reflected operators

    def __init__(self, coefficients, nvars: int, order: int):
        basis = get_basis(nvars, order)
        c = np.array(coefficients, dtype=float)
        if c.shape != (basis.size,):
            raise ValueError(
                f"expected {basis.size} coefficients for nvars={nvars}, "
                f"order={order}; got shape {c.shape}")
        c.setflags(write=False)
        self._c = c
        self.basis = basis

    @classmethod
    def _wrap(cls, c: np.ndarray, basis: Basis) -> "TruncatedPolynomial":
        obj = cls.__new__(cls)
        c.setflags(write=False)
        obj._c = c
        obj.basis = basis
        return obj

    # -- construction -------------------------------------------------------

    @classmethod
    def constant(cls, value: float, nvars: int, order: int) -> "TruncatedPolynomial":
        basis = get_basis(nvars, order)
        c = np.zeros(basis.size)
        c[0] = value
        return cls._wrap(c, basis)

    @classmethod
    def from_dict(cls, terms: dict, nvars: int, order: int) -> "TruncatedPolynomial":
        """Build from ``{exponent tuple: coefficient}``; terms above order are dropped."""
        basis = get_basis(nvars, order)
        c = np.zeros(basis.size)
        for exps, value in terms.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars or min(exps) < 0:
                raise ValueError(f"bad multi-index {exps} for nvars={nvars}")
            if sum(exps) <= order:
                c[basis.index[exps]] += value
        return cls._wrap(c, basis)

    # -- inspection ---------------------------------------------------------

    @property
    def nvars(self) -> int:
        return self.basis.nvars

    @property
    def order(self) -> int:
        return self.basis.order

    @property
    def array(self) -> np.ndarray:
        """Dense read-only coefficient vector in canonical order."""
        return self._c

    @property
    def coeffs(self) -> dict:
        """Nonzero coefficients keyed by exponent tuple, in canonical order."""
        nz = np.flatnonzero(self._c)
        exps = self.basis.exponents
        return {tuple(int(e) for e in exps[i]): float(self._c[i]) for i in nz}

    @property
    def const(self) -> float:
        return float(self._c[0])

    def coefficient(self, exponents) -> float:
        i = self.basis.index.get(tuple(exponents))
        return 0.0 if i is None else float(self._c[i])

    def degree(self) -> int:
        nz = np.flatnonzero(self._c)
        return int(self.basis.degrees[nz].max()) if len(nz) else 0

    def truncate(self, order: int) -> "TruncatedPolynomial":
        """Drop every term above ``order`` and return the lower-order polynomial."""
        if order > self.order:
            raise ValueError(f"cannot raise truncation order {self.order} -> {order}")
        basis = get_basis(self.nvars, order)
        return TruncatedPolynomial._wrap(self._c[:basis.size].copy(), basis)

    def deviation(self) -> "TruncatedPolynomial":
        """Copy with the constant term removed."""
        c = self._c.copy()
        c[0] = 0.0
        return TruncatedPolynomial._wrap(c, self.basis)

    def evaluate(self, dx):
        """Value at deviation ``dx`` (length nvars) or a batch of shape (npts, nvars)."""
        dx = np.asarray(dx, dtype=float)
        single = dx.ndim == 1
        pts = np.atleast_2d(dx)
        if pts.shape[1] != self.nvars:
            raise ValueError(f"deviation has {pts.shape[1]} entries, expected {self.nvars}")
        vals = monomial_values(pts, self.basis) @ self._c
        return float(vals[0]) if single else vals

    __call__ = evaluate

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, TruncatedPolynomial):
            if other.basis is not self.basis:
                raise ValueError(
                    f"shape mismatch: (nvars={self.nvars}, order={self.order}) vs "
                    f"(nvars={other.nvars}, order={other.order})")
            return other._c
        if isinstance(other, (Real, np.number)) or (
                isinstance(other, np.ndarray) and other.ndim == 0):
            return None
        return NotImplemented

    def __add__(self, other):
        oc = self._coerce(other)
        if oc is NotImplemented:
            return NotImplemented
        if oc is None:
            c = self._c.copy()
            c[0] += float(other)
        else:
            c = self._c + oc
        return TruncatedPolynomial._wrap(c, self.basis)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedPolynomial._wrap(-self._c, self.basis)

    def __pos__(self):
        return self

    def __sub__(self, other):
        oc = self._coerce(other)
        if oc is NotImplemented:
            return NotImplemented
        if oc is None:
            c = self._c.copy()
            c[0] -= float(other)
        else:
            c = self._c - oc
        return TruncatedPolynomial._wrap(c, self.basis)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        oc = self._coerce(other)
        if oc is NotImplemented:
            return NotImplemented
        if oc is None:
            return TruncatedPolynomial._wrap(self._c * float(other), self.basis)
        return TruncatedPolynomial._wrap(
            multiply_coefficients(self._c, oc, self.basis), self.basis)

    __rmul__ = __mul__

    def __truediv__(self, other):
        oc = self._coerce(other)
        if oc is NotImplemented:
            return NotImplemented
        if oc is None:
            return TruncatedPolynomial._wrap(self._c / float(other), self.basis)
        return self * reciprocal(other)

    def __rtruediv__(self, other):
        return reciprocal(self) * float(other)

    def __pow__(self, exponent):
        if isinstance(exponent, (int, np.integer)) and exponent >= 0:
            result = TruncatedPolynomial.constant(1.0, self.nvars, self.order)
            base = self
            e = int(exponent)
            while e:
                if e & 1:
                    result = result * base
                e >>= 1
                if e:
                    base = base * base
            return result
        return power(self, float(exponent))

    def __repr__(self):
        terms = " + ".join(f"{v:.6g}*{k}" for k, v in self.coeffs.items()) or "0"
        return f"TruncatedPolynomial(nvars={self.nvars}, order={self.order}: {terms})"


def make_variable(index: int, nvars: int, order: int) -> TruncatedPolynomial:
    """The deviation variable ``dx[index]`` as a polynomial."""
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if not 0 <= index < nvars:
        raise ValueError(f"variable index {index} out of range for nvars={nvars}")
    basis = get_basis(nvars, order)
    c = np.zeros(basis.size)
    c[basis.variable_position(index)] = 1.0
    return TruncatedPolynomial._wrap(c, basis)


def make_variables(center, order: int, nvars: int | None = None, offset: int = 0):
    """State polynomials ``center[i] + dx[offset + i]``."""
    center = np.asarray(center, dtype=float)
    nvars = len(center) if nvars is None else nvars
    return [make_variable(offset + i, nvars, order) + float(x) for i, x in enumerate(center)]


# -- univariate Taylor tables -------------------------------------------------
#
# Each table holds f^(k)(c)/k! for k = 0..order. The multivariate result is
# obtained by Horner evaluation of the table on the nilpotent part of p.

def _series_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = len(a)
    return np.convolve(a, b)[:n]


def _series_pow(a: np.ndarray, alpha: float) -> np.ndarray:
    """Coefficients of a(t)**alpha for a univariate series with a[0] > 0."""
    n = len(a)
    b = np.zeros(n)
    b[0] = a[0] ** alpha
    for m in range(1, n):
        k = np.arange(1, m + 1)
        b[m] = np.sum(((alpha + 1.0) * k - m) * a[k] * b[m - k]) / (m * a[0])
    return b


def _table_exp(c: float, order: int) -> np.ndarray:
    return math.exp(c) / np.array([math.factorial(k) for k in range(order + 1)], dtype=float)


def _table_log(c: float, order: int) -> np.ndarray:
    if c <= 0:
        raise SingularExpansionError(f"log expansion point must be > 0, got {c}")
    k = np.arange(1, order + 1)
    return np.concatenate([[math.log(c)], (-1.0) ** (k + 1) / (k * c ** k)])


def _table_pow(c: float, alpha: float, order: int) -> np.ndarray:
    # binomial series; callers guarantee c > 0, or c != 0 with integer alpha
    out = np.empty(order + 1)
    binom = 1.0
    for k in range(order + 1):
        out[k] = binom * c ** (alpha - k)
        binom *= (alpha - k) / (k + 1)
    return out


def _table_sin(c: float, order: int) -> np.ndarray:
    cyc = (math.sin(c), math.cos(c), -math.sin(c), -math.cos(c))
    return np.array([cyc[k % 4] / math.factorial(k) for k in range(order + 1)])


def _table_cos(c: float, order: int) -> np.ndarray:
    cyc = (math.cos(c), -math.sin(c), -math.cos(c), math.sin(c))
    return np.array([cyc[k % 4] / math.factorial(k) for k in range(order + 1)])


def _integrate_derivative(f0: float, dseries: np.ndarray, order: int) -> np.ndarray:
    out = np.empty(order + 1)
    out[0] = f0
    out[1:] = dseries[:order] / np.arange(1, order + 1)
    return out


def _table_arctan(c: float, order: int) -> np.ndarray:
    # d/dx arctan = (1 + x^2)^-1, expanded about c
    a = np.zeros(max(order, 1))
    a[0] = 1.0 + c * c
    if order > 1:
        a[1] = 2.0 * c
    if order > 2:
        a[2] = 1.0
    return _integrate_derivative(math.atan(c), _series_pow(a, -1.0), order)


def _table_arcsin(c: float, order: int) -> np.ndarray:
    if abs(c) >= 1.0:
        raise SingularExpansionError(f"arcsin expansion point must satisfy |c| < 1, got {c}")
    a = np.zeros(max(order, 1))
    a[0] = 1.0 - c * c
    if order > 1:
        a[1] = -2.0 * c
    if order > 2:
        a[2] = -1.0
    return _integrate_derivative(math.asin(c), _series_pow(a, -0.5), order)


def _compose_table(table: np.ndarray, p: TruncatedPolynomial) -> TruncatedPolynomial:
    dev = p.deviation()._c
    basis = p.basis
    acc = np.zeros(basis.size)
    acc[0] = table[-1]
    for coef in table[-2::-1]:
        acc = multiply_coefficients(acc, dev, basis)
        acc[0] += coef
    return TruncatedPolynomial._wrap(acc, basis)


def _is_poly(x) -> bool:
    return isinstance(x, TruncatedPolynomial)


def exp(x):
    if _is_poly(x):
        return _compose_table(_table_exp(x.const, x.order), x)
    return np.exp(x)


def log(x):
    if _is_poly(x):
        return _compose_table(_table_log(x.const, x.order), x)
    return np.log(x)


def sqrt(x):
    if _is_poly(x):
        if x.const <= 0:
            raise SingularExpansionError(
                f"sqrt expansion point must be > 0, got {x.const}")
        return _compose_table(_table_pow(x.const, 0.5, x.order), x)
    return np.sqrt(x)


def reciprocal(x):
    if _is_poly(x):
        if x.const == 0:
            raise SingularExpansionError("reciprocal of a polynomial with zero constant part")
        return _compose_table(_table_pow(x.const, -1.0, x.order), x)
    return 1.0 / x


def power(x, alpha: float):
    if _is_poly(x):
        if float(alpha).is_integer() and alpha >= 0:
            return x ** int(alpha)
        if x.const <= 0:
            raise SingularExpansionError(
                f"power {alpha} expansion point must be > 0, got {x.const}")
        return _compose_table(_table_pow(x.const, float(alpha), x.order), x)
    return np.power(x, alpha)


def sin(x):
    if _is_poly(x):
        return _compose_table(_table_sin(x.const, x.order), x)
    return np.sin(x)


def cos(x):
    if _is_poly(x):
        return _compose_table(_table_cos(x.const, x.order), x)
    return np.cos(x)


def arctan(x):
    if _is_poly(x):
        return _compose_table(_table_arctan(x.const, x.order), x)
    return np.arctan(x)


def arcsin(x):
    if _is_poly(x):
        return _compose_table(_table_arcsin(x.const, x.order), x)
    return np.arcsin(x)


def atan2(y, x):
    """Two-argument arctangent.

    For polynomials the expansion is taken about ``atan2(y0, x0)`` using
    ``theta0 + arctan((x0*y - y0*x) / (x0*x + y0*y))``, whose argument has a
    zero constant part, so no quadrant logic is needed away from the origin.
    """
    if _is_poly(y) or _is_poly(x):
        y0 = y.const if _is_poly(y) else float(y)
        x0 = x.const if _is_poly(x) else float(x)
        if x0 == 0.0 and y0 == 0.0:
            raise SingularExpansionError("atan2 expanded at the origin")
        num = x0 * y - y0 * x
        den = x0 * x + y0 * y
        return arctan(num / den) + math.atan2(y0, x0)
    return np.arctan2(y, x)


INTRINSICS = {
    "sin": sin, "cos": cos, "exp": exp, "log": log, "sqrt": sqrt,
    "arctan": arctan, "arcsin": arcsin, "reciprocal": reciprocal,
}


def intrinsic(name: str, p, *args):
    """Apply an intrinsic by tag; ``atan2`` takes the second argument in ``args``."""
    if name in ("atan2", "atan2-pair"):
        return atan2(p, *args)
    try:
        fn = INTRINSICS[name]
    except KeyError:
        raise ValueError(f"unknown intrinsic {name!r}; known: {sorted(INTRINSICS) + ['atan2']}")
    return fn(p, *args)
