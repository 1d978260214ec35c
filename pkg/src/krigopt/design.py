"""Problem domains, Latin hypercube designs, candidate grids and input scaling."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np


class DesignError(RuntimeError):
    pass


@dataclass(frozen=True)
class Domain:
    """Box-bounded decision space, optionally integral and constrained.

    ``feasible`` must be a pure, picklable predicate on a point given in
    problem units.
    """

    lower: tuple
    upper: tuple
    integer: tuple = ()
    feasible: Optional[Callable[[np.ndarray], bool]] = None

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) != len(upper) or not lower:
            raise ValueError("lower and upper must be nonempty and of equal length")
        if any(lo >= hi for lo, hi in zip(lower, upper)):
            raise ValueError("every lower bound must be strictly below its upper bound")
        integer = tuple(bool(v) for v in self.integer) or (False,) * len(lower)
        if len(integer) != len(lower):
            raise ValueError("integer flags must match the dimension")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "integer", integer)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lower_array(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def width(self) -> np.ndarray:
        return np.array(self.upper) - np.array(self.lower)

    def is_feasible(self, point) -> bool:
        return True if self.feasible is None else bool(self.feasible(np.asarray(point)))


def s_below_S(point) -> bool:
    """Feasibility predicate of the (s, S) inventory problem."""
    return point[0] < point[1]


def inventory_domain(low: int = 1, high: int = 100) -> Domain:
    return Domain(lower=(low, low), upper=(high, high), integer=(True, True), feasible=s_below_S)


def unit_domain(dim: int = 1) -> Domain:
    return Domain(lower=(0.0,) * dim, upper=(1.0,) * dim)


def _check_inside(domain: Domain, pts: np.ndarray, lo, hi):
    if pts.shape[-1] != domain.dim:
        raise ValueError(f"point dimension {pts.shape[-1]} does not match domain dimension {domain.dim}")
    tol = 1e-12
    if np.any(pts < np.asarray(lo) - tol) or np.any(pts > np.asarray(hi) + tol):
        raise ValueError("point outside domain bounds")


def scale_to_unit(domain: Domain, points) -> np.ndarray:
    """Affine map from problem units onto the unit hypercube."""
    pts = np.asarray(points, dtype=float)
    _check_inside(domain, pts, domain.lower, domain.upper)
    return (pts - domain.lower_array) / domain.width


def unscale(domain: Domain, points) -> np.ndarray:
    """Inverse of :func:`scale_to_unit`."""
    pts = np.asarray(points, dtype=float)
    _check_inside(domain, pts, np.zeros(domain.dim), np.ones(domain.dim))
    return domain.lower_array + pts * domain.width


def _stratum_values(rng: np.random.Generator, strata: np.ndarray, n: int, lo: float, hi: float, integral: bool):
    """Draw one value inside each requested stratum of ``[lo, hi]``."""
    w = (hi - lo) / n
    if not integral:
        return lo + (strata + rng.random(strata.shape[0])) * w
    out = np.empty(strata.shape[0])
    for k, j in enumerate(strata):
        a = math.ceil(lo + j * w - 1e-9)
        b = math.ceil(lo + (j + 1) * w - 1e-9) - 1 if j < n - 1 else math.floor(hi)
        if b < a:
            # stratum narrower than one integer: fall back to rounding the jittered value
            out[k] = round(lo + (j + rng.random()) * w)
        else:
            out[k] = a + rng.integers(0, b - a + 1)
    return out


def latin_hypercube(n: int, domain: Domain, seed=None, max_attempts: int = 100) -> np.ndarray:
    """Latin hypercube sample of ``n`` points in problem units.

    Each dimension is split into ``n`` equal-width strata and every stratum is
    hit exactly once. Integral dimensions draw an integer lying inside the
    stratum. Infeasible points (per ``domain.feasible``) and duplicates are
    repaired by redrawing inside their cells, then by swapping coordinates
    between points, which keeps the stratification intact.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    d = domain.dim
    strata = np.stack([rng.permutation(n) for _ in range(d)], axis=1)
    pts = np.empty((n, d))
    for k in range(d):
        pts[:, k] = _stratum_values(rng, strata[:, k], n, domain.lower[k], domain.upper[k], domain.integer[k])

    def bad_rows():
        bad = [i for i in range(n) if not domain.is_feasible(pts[i])]
        seen = {}
        for i in range(n):
            key = tuple(pts[i])
            if key in seen:
                bad.append(i)
            seen.setdefault(key, i)
        return sorted(set(bad))

    def draw(cell):
        return np.array([_stratum_values(rng, np.array([cell[k]]), n, domain.lower[k], domain.upper[k],
                                          domain.integer[k])[0] for k in range(d)])

    for _ in range(max_attempts):
        bad = bad_rows()
        if not bad:
            return pts
        for i in bad:
            pts[i] = draw(strata[i])

    # Cell redraws alone cannot help when a point's cell holds no feasible point.
    # Swap coordinates (with their strata) between points until every cell is
    # feasible, preferring swaps that lower the count of infeasible cells and
    # otherwise taking a random neutral swap.
    cell_ok: dict = {}

    def feasible_cell(cell) -> bool:
        key = tuple(int(c) for c in cell)
        if key not in cell_ok:
            cell_ok[key] = any(domain.is_feasible(draw(key)) for _ in range(max_attempts))
        return cell_ok[key]

    def n_bad_cells():
        return sum(not feasible_cell(strata[i]) for i in range(n))

    for _ in range(max_attempts * n):
        current = n_bad_cells()
        if current == 0:
            break
        i = next(i for i in range(n) if not feasible_cell(strata[i]))
        neutral = []
        improved = False
        for k, j in itertools.product(range(d), range(n)):
            if j == i:
                continue
            strata[[i, j], k] = strata[[j, i], k]
            count = n_bad_cells()
            if count < current:
                improved = True
                break
            if count == current:
                neutral.append((k, j))
            strata[[i, j], k] = strata[[j, i], k]
        if not improved and neutral:
            k, j = neutral[rng.integers(len(neutral))]
            strata[[i, j], k] = strata[[j, i], k]
    pts = np.array([draw(cell) for cell in strata])
    for _ in range(max_attempts):
        bad = bad_rows()
        if not bad:
            return pts
        for i in bad:
            pts[i] = draw(strata[i])
    raise DesignError(f"could not repair Latin hypercube of size {n} into the feasible region")


def candidate_grid(domain: Domain) -> np.ndarray:
    """Full integer lattice of an integral domain, filtered and in lexicographic order."""
    if not all(domain.integer):
        raise ValueError("candidate_grid needs an all-integer domain; load continuous candidates from a file")
    axes = [range(math.ceil(lo), math.floor(hi) + 1) for lo, hi in zip(domain.lower, domain.upper)]
    cands = [p for p in itertools.product(*axes) if domain.is_feasible(np.array(p, dtype=float))]
    if not cands:
        raise DesignError("no lattice point satisfies the feasibility predicate")
    return np.array(cands, dtype=float)


def uniform_grid_1d(n: int, lower: float = 0.0, upper: float = 1.0) -> np.ndarray:
    return np.linspace(lower, upper, n)[:, None]


def load_candidates(path) -> np.ndarray:
    """Read a candidate set from CSV, one point per row; a non-numeric header row is skipped."""
    rows: list[Sequence[float]] = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if i == 0:
                    continue
                raise
    if not rows:
        raise DesignError(f"no candidates in {path}")
    return np.array(rows, dtype=float)
