"""Densities, seeded random streams and log-domain weight arithmetic."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

LOG_2PI = float(np.log(2.0 * np.pi))


class DegeneracyError(RuntimeError):
    """Every particle weight vanished, or the particle set collapsed."""


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream)``.

    Streams with different ids are statistically independent; the same pair
    always yields the same sequence (numpy's SeedSequence + PCG64 are
    platform independent).
    """

    seed: int
    stream: tuple = ()

    def __post_init__(self):
        s = self.stream if isinstance(self.stream, tuple) else (self.stream,)
        object.__setattr__(self, "stream", tuple(int(v) for v in s))

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.stream + tuple(ids))

    def derived_seed(self) -> int:
        """A 63-bit integer summarising this stream, recorded for replay."""
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.stream)))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Lower factor L with L L^T = cov; falls back to an eigen-factor for PSD input."""
    if not np.any(cov):
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        scale = max(float(np.max(np.abs(w))), 1e-300)
        if w.min() < -1e-10 * scale:
            raise np.linalg.LinAlgError(
                f"covariance is not positive semidefinite (min eigenvalue {w.min():.3g})")
        w = np.clip(w, 0.0, None)
        # QR of (V sqrt(W))^T gives a lower-triangular factor up to column signs
        _, r = np.linalg.qr((v * np.sqrt(w)).T)
        return r.T


@dataclass(frozen=True)
class GaussianDensity:
    """N(mean, cov) with its factorization computed once."""

    mean: np.ndarray
    cov: np.ndarray
    factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float)).copy()
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float)).copy()
        if cov.shape != (len(mean), len(mean)):
            raise ValueError(f"cov shape {cov.shape} does not match mean length {len(mean)}")
        asym = np.max(np.abs(cov - cov.T)) if cov.size else 0.0
        if asym > 1e-12 * max(1.0, np.max(np.abs(cov))):
            raise ValueError(f"covariance is not symmetric (max asymmetry {asym:.3g})")
        cov = 0.5 * (cov + cov.T)
        factor = _psd_factor(cov)
        for a in (mean, cov, factor):
            a.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "factor", factor)

    @property
    def dim(self) -> int:
        return len(self.mean)

    def sample(self, n: int, rng) -> np.ndarray:
        return sample_gaussian(self, n, rng)

    def logpdf(self, x) -> np.ndarray:
        return logpdf_gaussian(self, x)


@dataclass(frozen=True)
class UniformBoxDensity:
    """Uniform density over the axis-aligned box ``center +- half_widths``."""

    center: np.ndarray
    half_widths: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float)).copy()
        h = np.atleast_1d(np.asarray(self.half_widths, dtype=float)).copy()
        if h.shape != c.shape:
            raise ValueError("center and half_widths must have the same length")
        if not np.all(h > 0):
            raise ValueError(f"half widths must be positive, got {h}")
        c.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_widths", h)

    @property
    def dim(self) -> int:
        return len(self.center)

    def sample(self, n: int, rng) -> np.ndarray:
        return sample_uniform_box(self, n, rng)

    def logpdf(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.all(np.abs(x - self.center) <= self.half_widths, axis=1)
        value = -float(np.sum(np.log(2.0 * self.half_widths)))
        return np.where(inside, value, -np.inf)


def sample_gaussian(d: GaussianDensity, n: int, rng) -> np.ndarray:
    """``n`` i.i.d. draws from ``d``, shape (n, dim)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    z = as_generator(rng).standard_normal((n, d.dim))
    return d.mean + z @ d.factor.T


def logpdf_gaussian(d: GaussianDensity, x) -> np.ndarray | float:
    """Full log-density; accepts one point or a batch of shape (npts, dim)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1 and not (x.ndim == 1 and d.dim == 1 and x.shape[0] != 1)
    pts = x.reshape(-1, d.dim)
    try:
        chol = np.linalg.cholesky(d.cov)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("log-density of a singular Gaussian") from exc
    z = linalg.solve_triangular(chol, (pts - d.mean).T, lower=True)
    maha = np.sum(z * z, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    out = -0.5 * (maha + logdet + d.dim * LOG_2PI)
    return float(out[0]) if single else out


def sample_uniform_box(d: UniformBoxDensity, n: int, rng) -> np.ndarray:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    u = as_generator(rng).uniform(-1.0, 1.0, (n, d.dim))
    return d.center + u * d.half_widths


def normalize_logweights(b) -> np.ndarray:
    """Normalized weights ``w_i = 1 / sum_j exp(b_j - b_i)``.

    Only differences of log-weights are exponentiated, so the result is
    exact even when every ``b_i`` is hugely negative. The sum is taken
    relative to the largest entry, which is the same formula evaluated once
    with a shared pivot: ``w_i = exp(b_i - b_max) / sum_j exp(b_j - b_max)``.
    """
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.size == 0:
        raise ValueError("log-weights must be a non-empty vector")
    if np.any(np.isnan(b)) or np.any(b == np.inf):
        raise ValueError("log-weights contain NaN or +inf")
    top = b.max()
    if top == -np.inf:
        raise DegeneracyError("all particle weights are zero (every log-weight is -inf)")
    e = np.exp(b - top)
    return e / e.sum()


def effective_sample_size(w) -> tuple[float, float]:
    """``(N_eff, psi)`` with ``N_eff = 1/sum w^2`` and ``psi = 100 N_eff / N`` percent."""
    w = np.asarray(w, dtype=float)
    n_eff = 1.0 / float(np.sum(w * w))
    n_eff = min(max(n_eff, 1.0), float(len(w)))
    return n_eff, 100.0 * n_eff / len(w)


def weighted_moments(particles: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weighted mean and (biased, weight-normalized) covariance."""
    mean = w @ particles
    d = particles - mean
    cov = (d * w[:, None]).T @ d
    return mean, 0.5 * (cov + cov.T)
