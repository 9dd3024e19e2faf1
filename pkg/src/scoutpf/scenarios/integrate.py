"""Fixed-step RK4 over numeric or polynomial-valued states (jet transport)."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from ..polyalg import PolynomialMap, TruncatedPolynomial

# rhs(t, components) -> components; each component is a float, an array of
# particle values, or a TruncatedPolynomial.
RHS = Callable[[float, Sequence], Sequence]


class IntegrationError(RuntimeError):
    """Non-finite state or polynomial coefficients during integration."""


def rk4(rows_rhs: Callable[[float, np.ndarray], np.ndarray], y: np.ndarray,
        t0: float, t1: float, n_steps: int) -> np.ndarray:
    """Classical RK4 on a 2-D state whose rows are the state components."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    h = (t1 - t0) / n_steps
    y = np.array(y, dtype=float)
    for i in range(n_steps):
        t = t0 + i * h
        k1 = rows_rhs(t, y)
        k2 = rows_rhs(t + 0.5 * h, y + (0.5 * h) * k1)
        k3 = rows_rhs(t + 0.5 * h, y + (0.5 * h) * k2)
        k4 = rows_rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y)):
        raise IntegrationError("integration produced non-finite values")
    return y


def steps_for(t0: float, t1: float, max_step: float) -> int:
    return max(1, int(math.ceil(abs(t1 - t0) / max_step - 1e-9)))


def integrate_points(rhs: RHS, x: np.ndarray, t0: float, t1: float, max_step: float) -> np.ndarray:
    """Propagate a batch of states, shape (npts, n), through ``rhs``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    npts = x.shape[0]

    def rows_rhs(t, y):
        out = rhs(t, list(y))
        return np.stack([np.broadcast_to(np.asarray(v, dtype=float), (npts,)) for v in out])

    return rk4(rows_rhs, x.T, t0, t1, steps_for(t0, t1, max_step)).T


def jet_integrate(rhs: RHS, x0: PolynomialMap, t0: float, t1: float,
                  max_step: float) -> PolynomialMap:
    """Flow expansion of ``rhs`` over [t0, t1] starting from the polynomial state ``x0``.

    ``x0`` holds the initial state as ``center_out + polynomial part``; the
    result is the polynomial state transition map with the same variables.
    """
    basis = x0.basis
    nvars, order = x0.nvars, x0.order
    y0 = np.array(x0.coefficients)
    y0[:, 0] += x0.center_out

    def rows_rhs(t, y):
        comps = [TruncatedPolynomial._wrap(row.copy(), basis) for row in y]
        out = rhs(t, comps)
        rows = []
        for v in out:
            if isinstance(v, TruncatedPolynomial):
                rows.append(v.array)
            else:
                r = np.zeros(basis.size)
                r[0] = float(v)
                rows.append(r)
        return np.stack(rows)

    y = rk4(rows_rhs, y0, t0, t1, steps_for(t0, t1, max_step))
    polys = [TruncatedPolynomial(row, nvars, order) for row in y]
    return PolynomialMap.from_polynomials(polys, x0.center_in)
