"""Ordinary and stochastic kriging with a constant GLS trend.

Both models share one code path: the stochastic model adds the diagonal
matrix of sample-mean variances to the kernel matrix, the ordinary model
adds nothing. Responses are standardized internally (centered, unit
variance) and all reported quantities are mapped back to response units.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize

from .design import Domain, latin_hypercube, scale_to_unit, unit_domain
from .kernels import NUGGET, KernelFamily, KernelSpec, correlation, correlation_dlog_length, pairwise_distances

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)

# Search box in standardized response units / unit-box input units.
LOG_VARIANCE_BOUNDS = (math.log(1e-6), math.log(1e3))
LOG_LENGTH_BOUNDS = (math.log(0.01), math.log(10.0))

MSE_CLAMP = 1e-8
COINCIDENT = 1e-12


class NoiseMode(str, enum.Enum):
    DETERMINISTIC = "deterministic"
    STOCHASTIC = "stochastic"


class FitError(RuntimeError):
    pass


class KrigingNumericalError(ArithmeticError):
    pass


class SingleReplicationWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design points with the raw replication outputs observed at each.

    ``outputs[i]`` holds the replications at ``points[i]``; replication
    counts may differ between points.
    """

    points: np.ndarray
    outputs: tuple

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        outs = tuple(np.atleast_1d(np.asarray(o, dtype=float)) for o in self.outputs)
        if pts.shape[0] < 1:
            raise ValueError("dataset needs at least one point")
        if len(outs) != pts.shape[0]:
            raise ValueError(f"{pts.shape[0]} points but {len(outs)} output sequences")
        if any(o.size < 1 for o in outs):
            raise ValueError("every point needs at least one replication")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "outputs", outs)

    @classmethod
    def from_means(cls, points, means) -> "Dataset":
        """Single-replication dataset, e.g. for a deterministic simulator."""
        return cls(points, tuple([m] for m in np.asarray(means, dtype=float).ravel()))

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @cached_property
    def replications(self) -> np.ndarray:
        return np.array([o.size for o in self.outputs])

    @cached_property
    def sample_means(self) -> np.ndarray:
        return np.array([o.mean() for o in self.outputs])

    @cached_property
    def sample_variances_of_mean(self) -> np.ndarray:
        return np.array([o.var(ddof=1) / o.size if o.size > 1 else 0.0 for o in self.outputs])


def intrinsic_variance_matrix(dataset: Dataset) -> np.ndarray:
    """Diagonal of the intrinsic-noise matrix: s_i^2 / n_i per design point.

    Points with a single replication get 0 and trigger a warning, since that
    silently treats them as noiseless.
    """
    single = np.flatnonzero(dataset.replications == 1)
    if single.size:
        warnings.warn(
            f"{single.size} design point(s) have a single replication; their intrinsic variance is set to 0",
            SingleReplicationWarning,
            stacklevel=2,
        )
    return dataset.sample_variances_of_mean.copy()


@dataclass(frozen=True)
class FitConfig:
    n_starts: int = 8
    max_evals: int = 200
    seed: int = 0
    # (process_variance, length_scale) in response / unit-box units; skips the search
    fixed_params: Optional[tuple] = None


@dataclass(frozen=True)
class Prediction:
    mean: float
    mse: float

    @property
    def sd(self) -> float:
        return math.sqrt(self.mse)


def estimate_beta0(factored_system, responses) -> float:
    """GLS estimate of the constant trend, ``(1' C^-1 f) / (1' C^-1 1)``.

    ``factored_system`` is a ``scipy.linalg.cho_factor`` result.
    """
    f = np.asarray(responses, dtype=float)
    ones = np.ones_like(f)
    ci_one = cho_solve(factored_system, ones)
    denom = float(ones @ ci_one)
    if not (denom > 0 and np.isfinite(denom)):
        raise KrigingNumericalError(f"covariance system is numerically singular (1'C^-1 1 = {denom})")
    return float(ci_one @ f) / denom


def _factor(C: np.ndarray):
    try:
        cf = cho_factor(C, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        cond = np.linalg.cond(C) if np.all(np.isfinite(C)) else np.inf
        raise KrigingNumericalError(f"Cholesky factorization failed (condition number {cond:.3e})") from exc
    return cf


def _system(x_unit, noise, family, variance, length):
    dist = pairwise_distances(x_unit, x_unit)
    R = correlation(family, dist, length)
    np.fill_diagonal(R, 1.0)
    C = variance * (R + NUGGET * np.eye(len(R))) + np.diag(noise)
    return dist, R, C


def _lml_and_grad(log_params, x_unit, y, noise, family, with_grad=True):
    """Profile log-likelihood (trend concentrated out) and its gradient.

    Gradient is with respect to ``(log variance, log length_scale)``; the
    concentrated trend contributes nothing to it since the GLS estimate is
    the stationary point of the quadratic form.
    """
    variance, length = math.exp(log_params[0]), math.exp(log_params[1])
    dist, R, C = _system(x_unit, noise, family, variance, length)
    cf = _factor(C)
    beta = estimate_beta0(cf, y)
    resid = y - beta
    alpha = cho_solve(cf, resid)
    logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
    n = len(y)
    value = -0.5 * float(resid @ alpha) - 0.5 * logdet - 0.5 * n * LOG_2PI
    if not np.isfinite(value):
        raise KrigingNumericalError("non-finite log-likelihood")
    if not with_grad:
        return value, None
    c_inv = cho_solve(cf, np.eye(n))
    dC_var = variance * (R + NUGGET * np.eye(n))
    dR_len = correlation_dlog_length(family, dist, length)
    dC_len = variance * dR_len
    grad = np.array([
        0.5 * float(alpha @ dC_var @ alpha) - 0.5 * float(np.sum(c_inv * dC_var)),
        0.5 * float(alpha @ dC_len @ alpha) - 0.5 * float(np.sum(c_inv * dC_len)),
    ])
    return value, grad


def log_marginal_likelihood(kernel_params, dataset: Dataset, noise_mode="deterministic", family="se",
                            domain: Optional[Domain] = None) -> float:
    """Gaussian log-density of the sample means under the GLS-trend kriging model.

    ``kernel_params`` is ``(process_variance, length_scale)`` in response units
    and unit-box units. The covariance is ``K (+ K_eps) + nugget``.
    """
    variance, length = kernel_params
    if variance <= 0 or length <= 0:
        raise ValueError("kernel parameters must be positive")
    x_unit = _unit_points(dataset, domain)
    noise = _noise(dataset, NoiseMode(noise_mode))
    value, _ = _lml_and_grad((math.log(variance), math.log(length)), x_unit, dataset.sample_means, noise,
                             KernelFamily.parse(family), with_grad=False)
    return value


def _unit_points(dataset: Dataset, domain: Optional[Domain]) -> np.ndarray:
    domain = domain or unit_domain(dataset.dim)
    return scale_to_unit(domain, dataset.points)


def _noise(dataset: Dataset, mode: NoiseMode) -> np.ndarray:
    if mode is NoiseMode.DETERMINISTIC:
        return np.zeros(dataset.size)
    return intrinsic_variance_matrix(dataset)


@dataclass(frozen=True, eq=False)
class KrigingModel:
    """Fitted kriging model.

    ``kernel`` holds hyperparameters in standardized response units;
    ``process_variance`` and ``beta0_hat`` are reported in response units.
    """

    kernel: KernelSpec
    noise_mode: NoiseMode
    domain: Domain
    dataset: Dataset
    x_unit: np.ndarray
    y_shift: float
    y_scale: float
    noise_std: np.ndarray
    factored_system: tuple
    beta0_std: float
    alpha: np.ndarray
    ci_one: np.ndarray
    log_likelihood: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def family(self) -> KernelFamily:
        return self.kernel.family

    @property
    def process_variance(self) -> float:
        return self.kernel.process_variance * self.y_scale ** 2

    @property
    def length_scale(self) -> float:
        return self.kernel.length_scale

    @property
    def beta0_hat(self) -> float:
        return self.beta0_std * self.y_scale + self.y_shift

    @property
    def intrinsic_variances(self) -> np.ndarray:
        return self.noise_std * self.y_scale ** 2

    def covariance(self) -> np.ndarray:
        """The factored system ``K + K_eps + nugget`` in response units."""
        L = np.tril(self.factored_system[0])
        return (L @ L.T) * self.y_scale ** 2

    def predict_unit(self, q_unit) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized mean and MSE for queries already on the unit box."""
        q = np.asarray(q_unit, dtype=float)
        if q.ndim == 1:
            q = q[None, :]
        if q.shape[1] != self.x_unit.shape[1]:
            raise ValueError(f"query dimension {q.shape[1]} does not match model dimension {self.x_unit.shape[1]}")
        var = self.kernel.process_variance
        dist = pairwise_distances(q, self.x_unit)
        k = var * correlation(self.family, dist, self.kernel.length_scale)
        # the nugget acts as a zero-lag white-noise term, so it also enters coincident
        # cross-covariances and the prior variance; design points are then reproduced exactly
        k[dist <= COINCIDENT] += NUGGET * var
        mean = self.beta0_std + k @ self.alpha
        v = solve_triangular(self.factored_system[0], k.T, lower=True, check_finite=False)
        explained = np.sum(v * v, axis=0)
        gamma = 1.0 - k @ self.ci_one
        mse = var * (1.0 + NUGGET) - explained + gamma ** 2 / float(np.sum(self.ci_one))
        if np.any(mse < -MSE_CLAMP * var):
            raise KrigingNumericalError(f"negative MSE {mse.min():.3e} beyond clamping tolerance")
        mse = np.maximum(mse, 0.0)
        return mean * self.y_scale + self.y_shift, mse * self.y_scale ** 2

    def predict_many(self, queries) -> tuple[np.ndarray, np.ndarray]:
        q = np.asarray(queries, dtype=float)
        if q.ndim == 1:
            q = q[:, None] if self.x_unit.shape[1] == 1 else q[None, :]
        return self.predict_unit(scale_to_unit(self.domain, q))

    def predict(self, query) -> Prediction:
        q = np.atleast_1d(np.asarray(query, dtype=float))
        if q.ndim != 1 or q.shape[0] != self.x_unit.shape[1]:
            raise ValueError(f"query must be a point of dimension {self.x_unit.shape[1]}")
        mean, mse = self.predict_many(q[None, :])
        return Prediction(float(mean[0]), float(mse[0]))


def _standardize(y: np.ndarray) -> tuple[float, float]:
    shift = float(np.mean(y))
    scale = float(np.std(y))
    if not scale > 1e-12 * max(1.0, abs(shift)):
        scale = 1.0
    return shift, scale


def _search(x_unit, y, noise, family, config: FitConfig):
    bounds = np.array([LOG_VARIANCE_BOUNDS, LOG_LENGTH_BOUNDS])
    box = Domain(lower=tuple(bounds[:, 0]), upper=tuple(bounds[:, 1]))
    starts = latin_hypercube(config.n_starts, box, seed=config.seed)

    def objective(theta):
        try:
            value, grad = _lml_and_grad(theta, x_unit, y, noise, family)
        except KrigingNumericalError:
            return 1e25, np.zeros(2)
        return -value, -grad

    results = []
    for start in starts:
        try:
            res = minimize(objective, start, jac=True, method="L-BFGS-B", bounds=bounds,
                           options={"maxfun": config.max_evals, "ftol": 1e-13, "gtol": 1e-9})
        except (ValueError, FloatingPointError) as exc:
            results.append({"start": start.tolist(), "ok": False, "message": str(exc)})
            continue
        ok = bool(np.isfinite(res.fun) and res.fun < 1e24)
        results.append({"start": start.tolist(), "theta": np.asarray(res.x), "lml": -float(res.fun), "ok": ok,
                        "nfev": int(res.nfev), "message": str(res.message)})
    good = [r for r in results if r["ok"]]
    if not good:
        raise FitError("all likelihood restarts failed: " + "; ".join(str(r.get("message")) for r in results))
    best = good[0]
    for r in good[1:]:
        gap = r["lml"] - best["lml"]
        tol = 1e-9 * max(1.0, abs(best["lml"]))
        if gap > tol or (abs(gap) <= tol and r["theta"][1] < best["theta"][1]):
            best = r
    return best["theta"], results


def fit(dataset: Dataset, family="se", config: Optional[FitConfig] = None, noise_mode="deterministic",
        domain: Optional[Domain] = None) -> KrigingModel:
    """Fit a kriging model by multi-start maximum likelihood."""
    config = config or FitConfig()
    mode = NoiseMode(noise_mode)
    family = KernelFamily.parse(family)
    domain = domain or unit_domain(dataset.dim)
    x_unit = scale_to_unit(domain, dataset.points)
    if dataset.size >= 2:
        d = pairwise_distances(x_unit, x_unit)
        np.fill_diagonal(d, np.inf)
        if d.min() <= COINCIDENT:
            raise ValueError("design points must be distinct")
    y = dataset.sample_means
    shift, scale = _standardize(y)
    y_std = (y - shift) / scale
    noise_std = _noise(dataset, mode) / scale ** 2

    if config.fixed_params is not None:
        variance, length = config.fixed_params
        theta = np.array([math.log(variance / scale ** 2), math.log(length)])
        restarts = []
    else:
        if dataset.size < 2:
            raise FitError("fitting hyperparameters needs at least 2 design points")
        theta, restarts = _search(x_unit, y_std, noise_std, family, config)

    kernel = KernelSpec(family, math.exp(theta[0]), math.exp(theta[1]))
    _, _, C = _system(x_unit, noise_std, family, kernel.process_variance, kernel.length_scale)
    cf = _factor(C)
    beta = estimate_beta0(cf, y_std)
    alpha = cho_solve(cf, y_std - beta)
    ci_one = cho_solve(cf, np.ones(dataset.size))
    lml_std, _ = _lml_and_grad(theta, x_unit, y_std, noise_std, family, with_grad=False)
    lml = lml_std - dataset.size * math.log(scale)
    logger.debug("fitted %s: var=%.4g l=%.4g lml=%.6g", family.value, kernel.process_variance * scale ** 2,
                 kernel.length_scale, lml)
    return KrigingModel(
        kernel=kernel, noise_mode=mode, domain=domain, dataset=dataset, x_unit=x_unit,
        y_shift=shift, y_scale=scale, noise_std=noise_std, factored_system=cf, beta0_std=beta,
        alpha=alpha, ci_one=ci_one, log_likelihood=lml,
        diagnostics={"restarts": len(restarts), "restart_results": restarts},
    )


def fit_ok(dataset: Dataset, family="se", config: Optional[FitConfig] = None,
           domain: Optional[Domain] = None) -> KrigingModel:
    """Ordinary (interpolating) kriging on the sample means; replication spread is ignored."""
    return fit(dataset, family, config, NoiseMode.DETERMINISTIC, domain)


def fit_sk(dataset: Dataset, family="se", config: Optional[FitConfig] = None,
           domain: Optional[Domain] = None) -> KrigingModel:
    """Stochastic kriging with plug-in sample-mean variances on the diagonal."""
    return fit(dataset, family, config, NoiseMode.STOCHASTIC, domain)


def predict_ok(model: KrigingModel, query) -> Prediction:
    if model.noise_mode is not NoiseMode.DETERMINISTIC:
        raise ValueError("predict_ok needs a model fitted in deterministic mode")
    return model.predict(query)


def predict_sk(model: KrigingModel, query) -> Prediction:
    if model.noise_mode is not NoiseMode.STOCHASTIC:
        raise ValueError("predict_sk needs a model fitted in stochastic mode")
    return model.predict(query)


def points_distinct(points: Sequence, domain: Optional[Domain] = None) -> bool:
    pts = np.asarray(points, dtype=float)
    if len(pts) < 2:
        return True
    x = scale_to_unit(domain or unit_domain(pts.shape[1]), pts)
    d = pairwise_distances(x, x)
    np.fill_diagonal(d, np.inf)
    return bool(d.min() > COINCIDENT)
