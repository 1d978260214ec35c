"""Stationary isotropic covariance functions.

All distances are Euclidean and computed on inputs that have already been
mapped to the unit hypercube, so a single length-scale is comparable across
problems.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

SQRT3 = np.sqrt(3.0)
SQRT5 = np.sqrt(5.0)

# Relative diagonal jitter added before every factorization.
NUGGET = 1e-8


class KernelFamily(str, enum.Enum):
    SE = "se"
    MATERN32 = "matern32"
    MATERN52 = "matern52"

    @classmethod
    def parse(cls, name: "str | KernelFamily") -> "KernelFamily":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            valid = ", ".join(f.value for f in cls)
            raise ValueError(f"unknown kernel family {name!r} (expected one of {valid})") from None


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family with its process variance and length-scale."""

    family: KernelFamily
    process_variance: float
    length_scale: float

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily.parse(self.family))
        if not (self.process_variance > 0 and np.isfinite(self.process_variance)):
            raise ValueError(f"process_variance must be positive, got {self.process_variance}")
        if not (self.length_scale > 0 and np.isfinite(self.length_scale)):
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")

    @property
    def nugget(self) -> float:
        return NUGGET * self.process_variance

    def __call__(self, d):
        return kernel_value(self, d)


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"points must be a 2-D array, got shape {arr.shape}")
    return arr


def distance(a, b) -> float:
    """Euclidean distance between two points of equal dimension."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def pairwise_distances(a, b) -> np.ndarray:
    """Matrix of Euclidean distances between the rows of ``a`` and ``b``."""
    a = _as_points(a)
    b = _as_points(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    sq = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1)
    return np.sqrt(sq)


def correlation(family: KernelFamily, d, length_scale: float) -> np.ndarray:
    """Unit-variance kernel evaluated at distance(s) ``d``."""
    d = np.asarray(d, dtype=float)
    family = KernelFamily.parse(family)
    if family is KernelFamily.SE:
        return np.exp(-0.5 * (d / length_scale) ** 2)
    if family is KernelFamily.MATERN32:
        a = SQRT3 * d / length_scale
        return (1.0 + a) * np.exp(-a)
    a = SQRT5 * d / length_scale
    return (1.0 + a + a * a / 3.0) * np.exp(-a)


def correlation_dlog_length(family: KernelFamily, d, length_scale: float) -> np.ndarray:
    """Derivative of :func:`correlation` with respect to ``log(length_scale)``."""
    d = np.asarray(d, dtype=float)
    family = KernelFamily.parse(family)
    if family is KernelFamily.SE:
        r2 = (d / length_scale) ** 2
        return r2 * np.exp(-0.5 * r2)
    if family is KernelFamily.MATERN32:
        a = SQRT3 * d / length_scale
        return a * a * np.exp(-a)
    a = SQRT5 * d / length_scale
    return a * a * (1.0 + a) / 3.0 * np.exp(-a)


def kernel_value(spec: KernelSpec, d):
    """Covariance at distance ``d`` (scalar or array); ``d`` must be nonnegative."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < 0) or np.any(np.isnan(d_arr)):
        raise ValueError("distance must be nonnegative")
    out = spec.process_variance * correlation(spec.family, d_arr, spec.length_scale)
    return float(out) if out.ndim == 0 else out


def covariance_matrix(spec: KernelSpec, points) -> np.ndarray:
    """p x p covariance matrix over ``points`` (no nugget)."""
    pts = _as_points(points)
    if pts.shape[0] == 0:
        raise ValueError("covariance_matrix needs at least one point")
    K = spec.process_variance * correlation(spec.family, pairwise_distances(pts, pts), spec.length_scale)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, spec.process_variance)
    return K


def cross_covariance(spec: KernelSpec, points, query) -> np.ndarray:
    """Covariances between a single ``query`` and each of ``points``."""
    pts = _as_points(points)
    q = np.atleast_1d(np.asarray(query, dtype=float))
    if q.ndim != 1 or q.shape[0] != pts.shape[1]:
        raise ValueError(f"dimension mismatch: query {q.shape} vs points of dim {pts.shape[1]}")
    d = np.sqrt(np.sum((pts - q) ** 2, axis=1))
    return spec.process_variance * correlation(spec.family, d, spec.length_scale)
