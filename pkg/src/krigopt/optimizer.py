"""Sequential surrogate-based optimization over a finite candidate set.

Three algorithms share one loop:

* ``SK_MEI``   stochastic kriging + modified expected improvement
* ``OK_EI``    ordinary kriging on sample means + expected improvement
* ``POLY_REG`` full quadratic least-squares fit, next point = predicted minimum
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Optional

import numpy as np

from .acquisition import CandidatesExhausted, argbest, deterministic_context, select_infill, stochastic_context
from .design import latin_hypercube, scale_to_unit
from .kriging import Dataset, FitConfig, FitError, KrigingNumericalError, fit_ok, fit_sk
from .simulators import Evaluation, Problem, SeedStream, substream

logger = logging.getLogger(__name__)

# first element of every substream key
TAG_DESIGN, TAG_EVAL, TAG_FIT, TAG_POLY = 1, 2, 3, 4
INITIAL_SLOT = 0


class Algorithm(str, enum.Enum):
    SK_MEI = "sk_mei"
    OK_EI = "ok_ei"
    POLY_REG = "poly_reg"

    @classmethod
    def parse(cls, name) -> "Algorithm":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("/", "_").replace("-", "_")
        aliases = {"sk": "sk_mei", "ok": "ok_ei", "poly": "poly_reg", "polynomial": "poly_reg",
                   "polynomial_regression": "poly_reg"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown algorithm {name!r} (sk_mei, ok_ei, poly_reg)") from None

    @property
    def slot(self) -> int:
        return {"sk_mei": 1, "ok_ei": 2, "poly_reg": 3}[self.value]

    @property
    def label(self) -> str:
        return {"sk_mei": "SK/MEI", "ok_ei": "OK/EI", "poly_reg": "Polynomial Regression"}[self.value]


class RunAborted(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    algorithm: Algorithm = Algorithm.SK_MEI
    kernel: str = "se"
    acquisition: Optional[str] = None
    kappa: float = 2.0
    n_initial: int = 10
    n_infill: int = 100
    reps_per_point: int = 5
    master_seed: int = 0
    macrorep: int = 0
    n_starts: int = 8
    # optional early stop, called with the history after every iteration
    stop_rule: Optional[Callable[["RunHistory"], bool]] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm.parse(self.algorithm))
        if self.n_initial < 1 or self.n_infill < 0 or self.reps_per_point < 1:
            raise ValueError("n_initial and reps_per_point must be positive, n_infill nonnegative")

    @property
    def criterion(self) -> str:
        if self.acquisition:
            return self.acquisition.lower()
        return "mei" if self.algorithm is Algorithm.SK_MEI else "ei"


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    point: tuple
    mean: float
    var_of_mean: float
    incumbent: float
    seconds: float
    outputs: tuple = ()


@dataclass
class RunHistory:
    """Evaluated points in order. Initial-design rows carry iteration 0, the j-th infill iteration j."""

    records: list = field(default_factory=list)
    coord_names: tuple = ("x1",)
    algorithm: str = ""
    diagnostics: list = field(default_factory=list)

    def append(self, iteration, point, evaluation: Evaluation, seconds: float):
        prev = self.records[-1].incumbent if self.records else np.inf
        self.records.append(IterationRecord(
            iteration=int(iteration), point=tuple(float(v) for v in point), mean=evaluation.sample_mean,
            var_of_mean=evaluation.variance_of_mean, incumbent=min(prev, evaluation.sample_mean),
            seconds=float(seconds), outputs=tuple(evaluation.outputs)))

    def __len__(self):
        return len(self.records)

    @property
    def points(self) -> np.ndarray:
        return np.array([r.point for r in self.records], dtype=float)

    @property
    def means(self) -> np.ndarray:
        return np.array([r.mean for r in self.records])

    def dataset(self) -> Dataset:
        return Dataset(self.points, tuple(r.outputs or (r.mean,) for r in self.records))

    def incumbent_trace(self) -> np.ndarray:
        """Incumbent best sample mean after the initial design (index 0) and after each infill."""
        n_init = sum(1 for r in self.records if r.iteration == 0)
        inc = [r.incumbent for r in self.records]
        return np.array(inc[n_init - 1:])

    @property
    def best(self) -> tuple:
        return identify_best(self)

    def to_csv(self, include_timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["iter", *self.coord_names, "mean", "var_of_mean", "incumbent"]
        if include_timing:
            header.append("seconds")
        w.writerow(header)
        for r in self.records:
            row = [r.iteration, *(_fmt_coord(v) for v in r.point), repr(r.mean), repr(r.var_of_mean),
                   repr(r.incumbent)]
            if include_timing:
                row.append(f"{r.seconds:.6f}")
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RunHistory":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        i_mean = header.index("mean")
        coord_names = tuple(header[1:i_mean])
        has_time = "seconds" in header
        hist = cls(coord_names=coord_names)
        for row in body:
            point = [float(v) for v in row[1:i_mean]]
            hist.records.append(IterationRecord(
                iteration=int(row[0]), point=tuple(point), mean=float(row[i_mean]),
                var_of_mean=float(row[i_mean + 1]), incumbent=float(row[i_mean + 2]),
                seconds=float(row[i_mean + 3]) if has_time else 0.0))
        return hist


def _fmt_coord(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def identify_best(history: RunHistory) -> tuple:
    """Evaluated point with the smallest sample mean; the earliest wins ties."""
    if not history.records:
        raise ValueError("empty history")
    i = int(np.argmin(history.means))
    return np.array(history.records[i].point), history.records[i].mean


# -- polynomial regression baseline ------------------------------------------

def quadratic_basis(points) -> np.ndarray:
    """Columns: 1, x_k, x_k^2 for each k, then x_j x_k for j < k."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    cols = [np.ones(len(x))]
    cols += [x[:, k] for k in range(x.shape[1])]
    cols += [x[:, k] ** 2 for k in range(x.shape[1])]
    cols += [x[:, j] * x[:, k] for j, k in combinations(range(x.shape[1]), 2)]
    return np.column_stack(cols)


def fit_quadratic(points, sample_means) -> np.ndarray:
    """Ordinary least-squares coefficients of the full quadratic (see :func:`quadratic_basis`)."""
    A = quadratic_basis(points)
    y = np.asarray(sample_means, dtype=float)
    if A.shape[0] < A.shape[1] or np.linalg.matrix_rank(A) < A.shape[1]:
        raise FitError(f"quadratic design matrix is rank deficient ({A.shape[0]} points, {A.shape[1]} terms)")
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef


def poly_predict(coefficients, points) -> np.ndarray:
    return quadratic_basis(points) @ np.asarray(coefficients)


def poly_select_infill(coefficients, candidates, unvisited) -> int:
    """Index of the unvisited candidate with the lowest fitted value."""
    return argbest(poly_predict(coefficients, candidates), unvisited, minimize=True)


# -- main loop ---------------------------------------------------------------

def maximin_index(cand_unit: np.ndarray, visited_unit: np.ndarray, unvisited: np.ndarray) -> int:
    """Unvisited candidate farthest from every visited point."""
    d = np.sqrt(((cand_unit[:, None, :] - visited_unit[None, :, :]) ** 2).sum(-1)).min(axis=1)
    return argbest(d, unvisited)


def _seed_int(master: int, *key: int) -> int:
    return int(substream(master, *key).generate_state(1)[0])


@dataclass(frozen=True)
class InitialDesign:
    points: np.ndarray
    evaluations: tuple


def initial_design(config: OptimizerConfig, problem: Problem, slot: int = INITIAL_SLOT) -> InitialDesign:
    """LHS design and its evaluations.

    With the default ``slot`` the design depends on the master seed and the
    macroreplication only, so every algorithm of a macroreplication shares it.
    """
    pts = latin_hypercube(config.n_initial, problem.domain,
                          seed=substream(config.master_seed, TAG_DESIGN, config.macrorep, slot))
    evals = tuple(
        problem.evaluate(p, config.reps_per_point,
                         SeedStream(config.master_seed, (TAG_EVAL, config.macrorep, slot, i)))
        for i, p in enumerate(pts))
    return InitialDesign(pts, evals)


def _coord_names(problem: Problem) -> tuple:
    if problem.name == "inventory":
        return ("s", "S")
    if problem.domain.dim == 1:
        return ("x",)
    return tuple(f"x{k + 1}" for k in range(problem.domain.dim))


def _fit_surrogate(config: OptimizerConfig, history: RunHistory, problem: Problem, iteration: int):
    fitter = fit_sk if config.algorithm is Algorithm.SK_MEI else fit_ok
    data = history.dataset()
    last_exc = None
    for attempt in range(2):
        seed = _seed_int(config.master_seed, TAG_FIT, config.macrorep, iteration, attempt)
        try:
            return fitter(data, config.kernel, FitConfig(n_starts=config.n_starts, seed=seed), problem.domain)
        except (FitError, KrigingNumericalError) as exc:
            last_exc = exc
            history.diagnostics.append(f"iteration {iteration}: fit attempt {attempt} failed: {exc}")
    raise RunAborted(f"metamodel fit failed twice at iteration {iteration}: {last_exc}")


def run(config: OptimizerConfig, problem: Problem, initial: Optional[InitialDesign] = None) -> RunHistory:
    """Initial LHS design, then one infill per iteration until the budget is spent."""
    alg = config.algorithm
    history = RunHistory(coord_names=_coord_names(problem), algorithm=alg.value)
    candidates = np.asarray(problem.candidates, dtype=float)
    cand_unit = scale_to_unit(problem.domain, candidates)
    index_of = {tuple(c): i for i, c in enumerate(candidates)}
    unvisited = np.ones(len(candidates), dtype=bool)

    t0 = time.perf_counter()
    if initial is None:
        initial = initial_design(config, problem)
    for p, ev in zip(initial.points, initial.evaluations):
        history.append(0, p, ev, time.perf_counter() - t0)
        i = index_of.get(tuple(np.asarray(p, dtype=float)))
        if i is not None:
            unvisited[i] = False

    criterion = config.criterion
    for it in range(1, config.n_infill + 1):
        if config.stop_rule is not None and config.stop_rule(history):
            break
        t_iter = time.perf_counter()
        if not unvisited.any():
            history.diagnostics.append(f"iteration {it}: candidate set exhausted")
            break
        x_unit = scale_to_unit(problem.domain, history.points)
        means = history.means
        if alg is Algorithm.POLY_REG:
            try:
                coef = fit_quadratic(x_unit, means)
                idx = poly_select_infill(coef, cand_unit, unvisited)
            except FitError as exc:
                history.diagnostics.append(f"iteration {it}: {exc}; random infill")
                rng = np.random.default_rng(substream(config.master_seed, TAG_POLY, config.macrorep, it))
                idx = int(rng.choice(np.flatnonzero(unvisited)))
        elif np.ptp(means) == 0.0:
            history.diagnostics.append(f"iteration {it}: flat responses; space-filling infill")
            idx = maximin_index(cand_unit, x_unit, unvisited)
        else:
            model = _fit_surrogate(config, history, problem, it)
            ctx = stochastic_context(model) if criterion in ("mei", "aei") else deterministic_context(model)
            try:
                idx, _ = select_infill(criterion, ctx, candidates, kappa=config.kappa, candidates_unit=cand_unit,
                                       unvisited=unvisited)
            except CandidatesExhausted:
                break
        unvisited[idx] = False
        point = candidates[idx]
        ev = problem.evaluate(point, config.reps_per_point,
                              SeedStream(config.master_seed, (TAG_EVAL, config.macrorep, alg.slot,
                                                              config.n_initial + it - 1)))
        history.append(it, point, ev, time.perf_counter() - t_iter)
    return history
