"""Dynamics and measurement models usable on numbers, arrays and polynomials.

Model functions take a list of state components and return a list of
outputs. Written with ordinary operators plus the intrinsics from
:mod:`scoutpf.polyalg`, the same function serves truth simulation
(floats), particle propagation (arrays of particle values) and jet
transport (polynomials).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..polyalg import PolynomialMap, make_variable, make_variables
from .integrate import integrate_points, jet_integrate


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2.0 * np.pi)


def _state_polys(center, order: int, noise_dim: int):
    n = len(center)
    nvars = n + noise_dim
    x = make_variables(center, order, nvars=nvars)
    nu = [make_variable(n + j, nvars, order) for j in range(noise_dim)]
    return x, nu


@dataclass(frozen=True)
class StaticDynamics:
    """The state does not move between observations."""

    n: int
    is_static: bool = field(default=True, init=False)

    def propagate(self, x, t0, t1, k):
        return np.array(x, dtype=float, copy=True)

    def pstm(self, center, t0, t1, k, order, noise_dim=0):
        x, nu = _state_polys(center, order, noise_dim)
        if noise_dim:
            x = [xi + ni for xi, ni in zip(x, nu)]
        return PolynomialMap.from_polynomials(x, np.concatenate([center, np.zeros(noise_dim)]))


@dataclass(frozen=True)
class DiscreteDynamics:
    """``x_next = f(x, k) + noise`` with ``f(components, k) -> components``."""

    n: int
    f: Callable[[Sequence, int], Sequence]
    is_static: bool = field(default=False, init=False)

    def propagate(self, x, t0, t1, k):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = self.f(list(x.T), k)
        return np.stack([np.broadcast_to(np.asarray(v, dtype=float), (x.shape[0],))
                         for v in out], axis=1)

    def pstm(self, center, t0, t1, k, order, noise_dim=0):
        x, nu = _state_polys(center, order, noise_dim)
        out = list(self.f(x, k))
        if noise_dim:
            out = [o + ni for o, ni in zip(out, nu)]
        return PolynomialMap.from_polynomials(out, np.concatenate([center, np.zeros(noise_dim)]))


@dataclass(frozen=True)
class ContinuousDynamics:
    """``dx/dt = rhs(t, x)`` integrated with fixed-step RK4.

    Intervals up to ``fine_threshold`` seconds use ``fine_step``; longer
    ones (the long gaps between passes) use ``coarse_step``.
    """

    n: int
    rhs: Callable[[float, Sequence], Sequence]
    fine_step: float = 10.0
    coarse_step: float = 60.0
    fine_threshold: float = 600.0
    is_static: bool = field(default=False, init=False)

    def max_step(self, t0, t1) -> float:
        return self.fine_step if abs(t1 - t0) <= self.fine_threshold else self.coarse_step

    def propagate(self, x, t0, t1, k):
        if t1 == t0:
            return np.array(x, dtype=float, copy=True)
        return integrate_points(self.rhs, x, t0, t1, self.max_step(t0, t1))

    def pstm(self, center, t0, t1, k, order, noise_dim=0):
        center = np.asarray(center, dtype=float)
        x, nu = _state_polys(center, order, noise_dim)
        x0 = PolynomialMap.from_polynomials(x, np.concatenate([center, np.zeros(noise_dim)]))
        if t1 == t0:
            flow = x0
        else:
            flow = jet_integrate(self.rhs, x0, t0, t1, self.max_step(t0, t1))
        if noise_dim:
            c = np.array(flow.coefficients)
            c[np.arange(self.n), 1 + self.n + np.arange(noise_dim)] += 1.0
            flow = PolynomialMap(c, flow.nvars, flow.order, flow.center_in, flow.center_out)
        return flow


@dataclass(frozen=True)
class MeasurementModel:
    """``y = h(x) + noise``.

    ``angles`` lists output components that are angles (residuals wrapped to
    (-pi, pi]). ``augmentation``, if given, is the fictitious measurement
    function used to square the map when there are fewer measurements than
    states; ``augmentation_angles`` flags its angle outputs.
    """

    dim: int
    h: Callable[[Sequence], Sequence]
    angles: tuple = ()
    augmentation: Callable[[Sequence], Sequence] | None = None
    augmentation_angles: tuple = ()

    @property
    def angle_mask(self) -> np.ndarray:
        mask = np.zeros(self.dim, dtype=bool)
        mask[list(self.angles)] = True
        return mask

    def __call__(self, x) -> np.ndarray:
        """Exact measurement for one state (n,) or a batch (npts, n)."""
        x = np.asarray(x, dtype=float)
        pts = np.atleast_2d(x)
        out = self.h(list(pts.T))
        y = np.stack([np.broadcast_to(np.asarray(v, dtype=float), (pts.shape[0],))
                      for v in out], axis=1)
        return y[0] if x.ndim == 1 else y

    def residual(self, y, y_ref) -> np.ndarray:
        r = np.asarray(y, dtype=float) - np.asarray(y_ref, dtype=float)
        if self.angles:
            r = np.array(r)
            r[..., self.angle_mask] = wrap_angle(r[..., self.angle_mask])
        return r

    def polynomial_map(self, center, order: int) -> PolynomialMap:
        x = make_variables(center, order)
        return PolynomialMap.from_polynomials(list(self.h(x)), center)

    def augmentation_map(self, center, order: int) -> PolynomialMap:
        if self.augmentation is None:
            raise ValueError("measurement model has no custom augmentation function")
        x = make_variables(center, order)
        return PolynomialMap.from_polynomials(list(self.augmentation(x)), center)
