"""Closed-form infill criteria and their exact maximization over a candidate set."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .design import scale_to_unit
from .kernels import pairwise_distances
from .kriging import KrigingModel, NoiseMode

SD_FLOOR = 1e-12
CRITERIA = ("pi", "ei", "mei", "aei", "lcb")

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class CandidatesExhausted(RuntimeError):
    pass


def norm_cdf(z):
    return ndtr(z)


def norm_pdf(z):
    z = np.asarray(z, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


@dataclass(frozen=True)
class AcquisitionContext:
    """What a criterion needs besides the query.

    ``f_min`` is the improvement threshold: the best observed output for
    PI/EI, or the model prediction at ``x_min`` for MEI/AEI.
    """

    model: KrigingModel
    f_min: float
    x_min: Optional[np.ndarray] = None
    tau2: float = 0.0
    heteroscedastic: bool = False


def deterministic_context(model: KrigingModel, f_min: Optional[float] = None) -> AcquisitionContext:
    if f_min is None:
        f_min = float(np.min(model.dataset.sample_means))
    return AcquisitionContext(model=model, f_min=float(f_min))


def stochastic_context(model: KrigingModel, tau2: Optional[float] = None,
                       heteroscedastic: bool = False) -> AcquisitionContext:
    """Reference point is the observed design point with the lowest SK prediction."""
    means, _ = model.predict_unit(model.x_unit)
    i = int(np.argmin(means))
    if tau2 is None:
        tau2 = float(np.mean(model.intrinsic_variances))
    return AcquisitionContext(model=model, f_min=float(means[i]), x_min=model.dataset.points[i].copy(),
                              tau2=float(tau2), heteroscedastic=heteroscedastic)


def pi_from_moments(f_min, mu, sd):
    f_min, mu, sd = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (f_min, mu, sd)))
    out = np.where(mu < f_min, 1.0, 0.0)
    ok = sd >= SD_FLOOR
    out[ok] = norm_cdf((f_min[ok] - mu[ok]) / sd[ok])
    return out


def ei_from_moments(f_min, mu, sd):
    f_min, mu, sd = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (f_min, mu, sd)))
    gain = f_min - mu
    out = np.array(np.maximum(gain, 0.0))
    ok = sd >= SD_FLOOR
    z = gain[ok] / sd[ok]
    out[ok] = np.maximum(gain[ok] * norm_cdf(z) + sd[ok] * norm_pdf(z), 0.0)
    return out


def aei_factor(tau2, mse):
    tau2 = np.asarray(tau2, dtype=float)
    mse = np.asarray(mse, dtype=float)
    total = tau2 + mse
    with np.errstate(invalid="ignore", divide="ignore"):
        factor = 1.0 - np.sqrt(tau2) / np.sqrt(total)
    return np.where(total > 0, factor, 1.0)


def _moments(ctx: AcquisitionContext, q_unit):
    mu, mse = ctx.model.predict_unit(q_unit)
    return mu, mse


def _nearest_noise(ctx: AcquisitionContext, q_unit) -> np.ndarray:
    d = pairwise_distances(q_unit, ctx.model.x_unit)
    return ctx.model.intrinsic_variances[np.argmin(d, axis=1)]


def criterion_values(name: str, ctx: AcquisitionContext, q_unit, kappa: float = 2.0) -> np.ndarray:
    """Criterion over queries given on the unit box (vectorized)."""
    name = name.lower()
    q_unit = np.atleast_2d(np.asarray(q_unit, dtype=float))
    mu, mse = _moments(ctx, q_unit)
    sd = np.sqrt(mse)
    if name == "pi":
        return pi_from_moments(ctx.f_min, mu, sd)
    if name in ("ei", "mei"):
        return ei_from_moments(ctx.f_min, mu, sd)
    if name == "aei":
        tau2 = _nearest_noise(ctx, q_unit) if ctx.heteroscedastic else ctx.tau2
        return ei_from_moments(ctx.f_min, mu, sd) * aei_factor(tau2, mse)
    if name == "lcb":
        if kappa < 0:
            raise ValueError("kappa must be nonnegative")
        return mu - kappa * sd
    raise ValueError(f"unknown criterion {name!r} (expected one of {', '.join(CRITERIA)})")


def _single(name, ctx, query, **kw) -> float:
    q_unit = scale_to_unit(ctx.model.domain, np.atleast_1d(np.asarray(query, dtype=float))[None, :])
    return float(criterion_values(name, ctx, q_unit, **kw)[0])


def _require_mode(ctx: AcquisitionContext, mode: NoiseMode, name: str):
    if ctx.model.noise_mode is not mode:
        raise ValueError(f"{name} needs a {mode.value}-mode model")


def probability_of_improvement(ctx: AcquisitionContext, query) -> float:
    return _single("pi", ctx, query)


def expected_improvement(ctx: AcquisitionContext, query) -> float:
    return _single("ei", ctx, query)


def modified_expected_improvement(ctx: AcquisitionContext, query) -> float:
    _require_mode(ctx, NoiseMode.STOCHASTIC, "MEI")
    return _single("mei", ctx, query)


def augmented_expected_improvement(ctx: AcquisitionContext, query) -> float:
    _require_mode(ctx, NoiseMode.STOCHASTIC, "AEI")
    return _single("aei", ctx, query)


def lower_confidence_bound(ctx: AcquisitionContext, query, kappa: float = 2.0) -> float:
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    return _single("lcb", ctx, query, kappa=kappa)


def argbest(values: np.ndarray, unvisited: np.ndarray, minimize: bool = False) -> int:
    """Index of the best unvisited value; exact ties go to the lowest index."""
    vals = np.asarray(values, dtype=float)
    idx = np.flatnonzero(unvisited)
    if idx.size == 0:
        raise CandidatesExhausted("every candidate has already been evaluated")
    sub = vals[idx]
    if minimize:
        sub = np.where(np.isnan(sub), np.inf, sub)
        return int(idx[np.argmin(sub)])
    sub = np.where(np.isnan(sub), -np.inf, sub)
    return int(idx[np.argmax(sub)])


def visited_mask(candidates: np.ndarray, visited) -> np.ndarray:
    seen = {tuple(np.asarray(p, dtype=float).ravel()) for p in visited}
    return np.array([tuple(c) not in seen for c in candidates], dtype=bool)


def select_infill(criterion: str, ctx: AcquisitionContext, candidates, visited=(), kappa: float = 2.0,
                  candidates_unit=None, unvisited: Optional[np.ndarray] = None) -> tuple[int, np.ndarray]:
    """Pick the unvisited candidate with the best criterion value.

    Returns ``(index, point)``. LCB is minimized, the other criteria maximized.
    ``unvisited`` (boolean mask) takes precedence over ``visited`` when given.
    """
    cands = np.asarray(candidates, dtype=float)
    if cands.ndim == 1:
        cands = cands[:, None]
    if unvisited is None:
        unvisited = visited_mask(cands, visited)
    if not np.any(unvisited):
        raise CandidatesExhausted("every candidate has already been evaluated")
    if candidates_unit is None:
        candidates_unit = scale_to_unit(ctx.model.domain, cands)
    values = criterion_values(criterion, ctx, candidates_unit, kappa=kappa)
    i = argbest(values, unvisited, minimize=criterion.lower() == "lcb")
    return i, cands[i]
