"""Macroreplication benchmark: run every (algorithm, macroreplication) cell,
summarize incumbent traces with 95% t-intervals and write CSV/SVG artifacts.

Output directory layout::

    manifest.txt               config echo, package version, master seed, file list
    histories/<alg>_mNN.csv    one RunHistory per cell (no timing column)
    convergence.csv            iter, then <alg>_mean, <alg>_lo, <alg>_hi per algorithm
    convergence.svg            line + band chart
    timing.csv                 wall-clock seconds per cell (only non-reproducible file)
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from . import __version__
from .optimizer import Algorithm, InitialDesign, OptimizerConfig, RunAborted, RunHistory, initial_design, run
from .simulators import get_problem

logger = logging.getLogger(__name__)


class SummaryError(ValueError):
    pass


@dataclass(frozen=True)
class BenchmarkConfig:
    algorithms: tuple = (Algorithm.SK_MEI, Algorithm.OK_EI, Algorithm.POLY_REG)
    macroreps: int = 25
    n_initial: int = 10
    n_infill: int = 100
    reps: int = 5
    kernel: str = "se"
    problem: str = "inventory"
    master_seed: int = 0
    shared_initial_design: bool = True
    n_starts: int = 8
    workers: int = 1
    problem_options: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(Algorithm.parse(a) for a in self.algorithms))
        if self.macroreps < 1:
            raise ValueError("macroreps must be positive")

    def optimizer_config(self, algorithm, macrorep: int) -> OptimizerConfig:
        return OptimizerConfig(algorithm=algorithm, kernel=self.kernel, n_initial=self.n_initial,
                               n_infill=self.n_infill, reps_per_point=self.reps, master_seed=self.master_seed,
                               macrorep=macrorep, n_starts=self.n_starts)

    def echo(self) -> dict:
        return {
            "algorithms": ",".join(a.value for a in self.algorithms),
            "macroreps": self.macroreps,
            "n_initial": self.n_initial,
            "n_infill": self.n_infill,
            "reps": self.reps,
            "kernel": self.kernel,
            "problem": self.problem,
            "master_seed": self.master_seed,
            "shared_initial_design": str(self.shared_initial_design).lower(),
            "n_starts": self.n_starts,
            **{f"problem.{k}": v for k, v in sorted(self.problem_options.items())},
        }


@dataclass
class BenchmarkResult:
    config: BenchmarkConfig
    histories: dict  # (algorithm value, macrorep) -> RunHistory
    failures: dict  # (algorithm value, macrorep) -> message
    seconds: dict = field(default_factory=dict)

    def traces(self) -> dict:
        """algorithm value -> (macroreps x (n_infill + 1)) incumbent matrix, NaN rows for failed cells."""
        n = self.config.n_infill + 1
        out = {}
        for alg in self.config.algorithms:
            mat = np.full((self.config.macroreps, n), np.nan)
            for m in range(self.config.macroreps):
                h = self.histories.get((alg.value, m))
                if h is None:
                    continue
                tr = h.incumbent_trace()
                # a run that stopped early keeps its last incumbent
                mat[m, :len(tr)] = tr[:n]
                mat[m, len(tr):] = tr[-1]
            out[alg.value] = mat
        return out

    def raw_matrix(self) -> np.ndarray:
        """algorithm x macroreplication x iteration array of incumbents."""
        tr = self.traces()
        return np.stack([tr[a.value] for a in self.config.algorithms])


def _run_cell(args):
    cfg, alg, m, initial = args
    import time

    problem = get_problem(cfg.problem, **cfg.problem_options)
    t0 = time.perf_counter()
    try:
        hist = run(cfg.optimizer_config(alg, m), problem, initial)
        return alg.value, m, hist, None, time.perf_counter() - t0
    except (RunAborted, ArithmeticError, ValueError, RuntimeError) as exc:
        return alg.value, m, None, f"{type(exc).__name__}: {exc}", time.perf_counter() - t0


def _make_initial(args) -> InitialDesign:
    cfg, m = args
    problem = get_problem(cfg.problem, **cfg.problem_options)
    return initial_design(cfg.optimizer_config(cfg.algorithms[0], m), problem)


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_benchmark(config: BenchmarkConfig, out_dir: Optional[os.PathLike] = None,
                  workers: Optional[int] = None) -> BenchmarkResult:
    """Run all cells; failed cells are recorded and skipped, never fatal."""
    workers = config.workers if workers is None else workers
    if config.shared_initial_design:
        initials = _map(_make_initial, [(config, m) for m in range(config.macroreps)], workers)
    else:
        initials = [None] * config.macroreps
    cells = [(config, alg, m, initials[m]) for m in range(config.macroreps) for alg in config.algorithms]
    if not config.shared_initial_design:
        problem = get_problem(config.problem, **config.problem_options)
        cells = [(c, a, m, initial_design(c.optimizer_config(a, m), problem, slot=a.slot)) for c, a, m, _ in cells]
    histories, failures, seconds = {}, {}, {}
    for alg, m, hist, err, secs in _map(_run_cell, cells, workers):
        seconds[(alg, m)] = secs
        if err is None:
            histories[(alg, m)] = hist
        else:
            logger.warning("cell %s/m%02d failed: %s", alg, m, err)
            failures[(alg, m)] = err
    result = BenchmarkResult(config, histories, failures, seconds)
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


# -- statistics ---------------------------------------------------------------

def t_quantile(prob: float, df: int) -> float:
    """Student-t quantile."""
    if df < 1:
        raise SummaryError("need at least one degree of freedom")
    return float(stats.t.ppf(prob, df))


@dataclass(frozen=True)
class ConvergenceSummary:
    iterations: np.ndarray
    mean: dict  # algorithm value -> per-iteration mean incumbent
    half_width: dict  # algorithm value -> 95% t half-width
    n_macroreps: dict

    @property
    def algorithms(self) -> list:
        return list(self.mean)

    def lower(self, alg: str) -> np.ndarray:
        return self.mean[alg] - self.half_width[alg]

    def upper(self, alg: str) -> np.ndarray:
        return self.mean[alg] + self.half_width[alg]


def summarize(traces: dict, confidence: float = 0.95) -> ConvergenceSummary:
    """Cross-macroreplication mean and t-interval half-width per iteration.

    ``traces`` maps algorithm name to a (macroreps x iterations) matrix;
    rows containing NaN (failed cells) are dropped.
    """
    if isinstance(traces, BenchmarkResult):
        traces = traces.traces()
    means, halves, counts = {}, {}, {}
    n_iter = None
    for alg, mat in traces.items():
        mat = np.asarray(mat, dtype=float)
        mat = mat[~np.isnan(mat).any(axis=1)]
        m = mat.shape[0]
        if m < 2:
            raise SummaryError(f"{alg}: need at least 2 complete macroreplications, got {m}")
        t = t_quantile(0.5 + confidence / 2.0, m - 1)
        means[alg] = mat.mean(axis=0)
        halves[alg] = t * mat.std(axis=0, ddof=1) / np.sqrt(m)
        counts[alg] = m
        n_iter = mat.shape[1]
    return ConvergenceSummary(np.arange(n_iter), means, halves, counts)


def paired_one_sided_pvalue(a, b) -> float:
    """p-value of the paired t-test of H1: mean(a - b) < 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = a - b
    if np.all(diff == diff[0]):
        return 0.0 if diff[0] < 0 else 1.0
    return float(stats.ttest_rel(a, b, alternative="less").pvalue)


def first_iteration_below(series, threshold: float) -> Optional[int]:
    """First index whose value is strictly below ``threshold``; None if never."""
    hits = np.flatnonzero(np.asarray(series) < threshold)
    return int(hits[0]) if hits.size else None


# -- artifacts ----------------------------------------------------------------

def _num(v: float) -> str:
    return repr(float(v))


def convergence_csv(summary: ConvergenceSummary) -> str:
    header = ["iter"]
    for alg in summary.algorithms:
        header += [f"{alg}_mean", f"{alg}_lo", f"{alg}_hi"]
    lines = [",".join(header)]
    for i in summary.iterations:
        row = [str(int(i))]
        for alg in summary.algorithms:
            row += [_num(summary.mean[alg][i]), _num(summary.lower(alg)[i]), _num(summary.upper(alg)[i])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _nice_ticks(lo: float, hi: float, target: int = 6) -> list:
    if hi <= lo:
        span = abs(lo) if lo else 1.0
        lo, hi = lo - 0.05 * span, hi + 0.05 * span
    raw = (hi - lo) / target
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = np.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(float(v), 10))
        v += step
    return ticks


def render_convergence(summary: ConvergenceSummary, labels: Optional[dict] = None,
                       title: str = "Convergence of the incumbent (mean and 95% t-interval)") -> str:
    """Standalone SVG line chart with one shaded band per algorithm."""
    labels = labels or {}
    W, H = 800, 500
    left, right, top, bottom = 80, 200, 40, 60
    pw, ph = W - left - right, H - top - bottom
    xs = summary.iterations.astype(float)
    lo = min(float(np.min(summary.lower(a))) for a in summary.algorithms)
    hi = max(float(np.max(summary.upper(a))) for a in summary.algorithms)
    if hi - lo < 1e-12:
        pad = max(abs(hi) * 0.05, 1.0)
        lo, hi = lo - pad, hi + pad
    else:
        pad = 0.05 * (hi - lo)
        lo, hi = lo - pad, hi + pad
    x_max = max(float(xs[-1]), 1.0)

    def px(x):
        return left + pw * x / x_max

    def py(y):
        return top + ph * (hi - y) / (hi - lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{left + pw / 2:.2f}" y="24" font-family="sans-serif" font-size="15" '
        f'text-anchor="middle">{title}</text>',
    ]
    for t in _nice_ticks(lo, hi):
        y = py(t)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" stroke="#dddddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" font-family="sans-serif" font-size="11" '
                   f'text-anchor="end">{t:g}</text>')
    for t in (v for v in _nice_ticks(0.0, x_max) if float(v).is_integer()):
        x = px(t)
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 18}" font-family="sans-serif" font-size="11" '
                   f'text-anchor="middle">{t:g}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{H - 15}" font-family="sans-serif" font-size="13" '
               f'text-anchor="middle">iteration</text>')
    out.append(f'<text x="20" y="{top + ph / 2:.2f}" font-family="sans-serif" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 20 {top + ph / 2:.2f})">best expected total cost</text>')
    for k, alg in enumerate(summary.algorithms):
        color = _COLORS[k % len(_COLORS)]
        upper = summary.upper(alg)
        lower = summary.lower(alg)
        band = [f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, upper)]
        band += [f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs[::-1], lower[::-1])]
        out.append(f'<polygon points="{" ".join(band)}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        line = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, summary.mean[alg]))
        out.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = top + 20 + 22 * k
        out.append(f'<line x1="{left + pw + 15}" y1="{ly}" x2="{left + pw + 40}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="3"/>')
        out.append(f'<text x="{left + pw + 46}" y="{ly + 4}" font-family="sans-serif" font-size="12">'
                   f'{labels.get(alg, alg)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _labels(algorithms) -> dict:
    return {a.value: a.label for a in algorithms}


def history_filename(alg: str, m: int) -> str:
    return f"{alg}_m{m:02d}.csv"


def write_outputs(result: BenchmarkResult, out_dir) -> Path:
    out = Path(out_dir)
    (out / "histories").mkdir(parents=True, exist_ok=True)
    cfg = result.config
    files = []
    for alg in cfg.algorithms:
        for m in range(cfg.macroreps):
            hist = result.histories.get((alg.value, m))
            if hist is None:
                continue
            name = f"histories/{history_filename(alg.value, m)}"
            (out / name).write_text(hist.to_csv(include_timing=False))
            files.append(name)
    summary = None
    try:
        summary = summarize(result.traces())
    except SummaryError as exc:
        logger.warning("no convergence summary: %s", exc)
    if summary is not None:
        (out / "convergence.csv").write_text(convergence_csv(summary))
        (out / "convergence.svg").write_text(render_convergence(summary, _labels(cfg.algorithms)))
        files += ["convergence.csv", "convergence.svg"]
    timing = ["algorithm,macrorep,seconds"]
    timing += [f"{a},{m},{s:.3f}" for (a, m), s in sorted(result.seconds.items())]
    (out / "timing.csv").write_text("\n".join(timing) + "\n")

    lines = [f"code_version = {__version__}"]
    lines += [f"{k} = {v}" for k, v in cfg.echo().items()]
    lines.append(f"cells = {len(cfg.algorithms) * cfg.macroreps}")
    lines.append(f"failed_cells = {len(result.failures)}")
    for (a, m), msg in sorted(result.failures.items()):
        lines.append(f"failed.{a}.m{m:02d} = {msg}")
    lines.append(f"history_files = {sum(1 for f in files if f.startswith('histories/'))}")
    lines += [f"file = {f}" for f in files]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")
    return out


def load_traces(out_dir, algorithms, macroreps: int, n_infill: int) -> dict:
    """Rebuild incumbent matrices from the history CSVs of an output directory."""
    out = Path(out_dir)
    traces = {}
    for alg in algorithms:
        alg = Algorithm.parse(alg).value
        mat = np.full((macroreps, n_infill + 1), np.nan)
        for m in range(macroreps):
            path = out / "histories" / history_filename(alg, m)
            if path.exists():
                tr = RunHistory.from_csv(path.read_text()).incumbent_trace()
                mat[m, :len(tr)] = tr
                mat[m, len(tr):] = tr[-1]
        traces[alg] = mat
    return traces
