"""Black-box evaluators: the periodic-review (s, S) inventory simulation and
synthetic 1-D test functions.

Randomness
----------
Every random number derives from one master seed. A stream is identified by
an integer key path, e.g. ``(tag, macrorep, algorithm, point, replication)``;
``substream(master, *key)`` maps it to ``SeedSequence(master, spawn_key=key)``
and each replication runs on a Philox (counter-based) generator built from
that sequence. Distinct keys give independent streams; equal keys give
byte-identical results on every platform.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .design import Domain, candidate_grid, inventory_domain, uniform_grid_1d, unit_domain


def substream(master_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class SeedStream:
    """Key prefix for the replications of one design point; replication ``r`` gets key ``prefix + (r,)``."""

    master_seed: int
    key: tuple = ()

    def child(self, *key: int) -> "SeedStream":
        return SeedStream(self.master_seed, self.key + tuple(int(k) for k in key))

    def replication(self, r: int) -> np.random.SeedSequence:
        return substream(self.master_seed, *self.key, r)


# -- inventory model ---------------------------------------------------------

@dataclass(frozen=True)
class InventoryParams:
    review_period: float = 1.0
    horizon: float = 120.0
    interdemand_mean: float = 0.1
    demand_sizes: tuple = (1, 2, 3, 4)
    demand_probs: tuple = (1 / 6, 1 / 3, 1 / 3, 1 / 6)
    lead_time_min: float = 0.5
    lead_time_max: float = 1.0
    order_fixed_cost: float = 32.0
    holding_cost: float = 1.0
    backlog_cost: float = 5.0
    # None starts at the order-up-to level S
    initial_inventory: Optional[int] = None

    def __post_init__(self):
        if abs(sum(self.demand_probs) - 1.0) > 1e-12 or len(self.demand_sizes) != len(self.demand_probs):
            raise ValueError("demand pmf must have matching sizes and sum to 1")
        if self.review_period <= 0 or self.horizon <= 0:
            raise ValueError("review_period and horizon must be positive")
        periods = self.horizon / self.review_period
        if abs(periods - round(periods)) > 1e-9:
            raise ValueError("horizon must be a multiple of review_period")
        if abs(self.horizon - round(self.horizon)) > 1e-9:
            raise ValueError("horizon must be a whole number of months")
        if min(self.order_fixed_cost, self.holding_cost, self.backlog_cost) < 0:
            raise ValueError("costs must be nonnegative")
        if not 0 <= self.lead_time_min <= self.lead_time_max:
            raise ValueError("invalid lead-time range")
        if self.interdemand_mean <= 0:
            raise ValueError("interdemand_mean must be positive")

    @property
    def mean_monthly_demand(self) -> float:
        return float(np.dot(self.demand_sizes, self.demand_probs)) / self.interdemand_mean

    def with_overrides(self, **values) -> "InventoryParams":
        return replace(self, **values)


@dataclass(frozen=True)
class SimulationOutput:
    avg_monthly_total_cost: float
    ordering: float
    holding: float
    backlog: float
    total_cost: float
    months: int
    n_orders: int
    units_ordered: int
    units_demanded: int
    units_in_transit: int
    initial_net_inventory: int
    final_net_inventory: int
    seed: str = ""


_EV_DELIVERY, _EV_DEMAND, _EV_MONTH_END, _EV_REVIEW = 0, 1, 2, 3


def simulate_inventory(s: int, S: int, params: InventoryParams = InventoryParams(), seed=0) -> SimulationOutput:
    """One replication of the periodic-review (s, S) system with backlogging.

    Inventory position (net stock plus outstanding orders) is reviewed every
    ``review_period`` months starting at time 0; at or below ``s`` an order
    brings it up to ``S`` after a uniform lead time. Holding and backlog are
    charged on end-of-month levels. Costs are averaged per month.
    """
    s, S = int(s), int(S)
    if not s < S:
        raise ValueError(f"need s < S, got s={s}, S={S}")
    seed_seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    demand_seq, lead_seq = seed_seq.spawn(2)
    demand_rng = make_rng(demand_seq)
    lead_rng = make_rng(lead_seq)

    horizon = float(params.horizon)
    months = int(round(horizon))
    sizes = np.asarray(params.demand_sizes, dtype=np.int64)
    probs = np.asarray(params.demand_probs, dtype=float)
    batch = max(64, int(1.2 * horizon / params.interdemand_mean) + 64)

    def demand_batch(t0):
        gaps = demand_rng.exponential(params.interdemand_mean, batch)
        times = t0 + np.cumsum(gaps)
        qty = sizes[demand_rng.choice(len(sizes), size=batch, p=probs)]
        return times.tolist(), qty.tolist()

    net = S if params.initial_inventory is None else int(params.initial_inventory)
    initial_net = net
    on_order = 0
    n_orders = units_ordered = units_demanded = 0
    holding = backlog = 0.0

    times, qtys = demand_batch(0.0)
    di = 0
    deliveries: list = []
    next_month = 1.0
    next_review = 0.0
    n_reviews = int(round(horizon / params.review_period))
    reviews_done = 0
    inf = math.inf

    while True:
        t_dem = times[di]
        t_del = deliveries[0][0] if deliveries else inf
        t_rev = next_review if reviews_done < n_reviews else inf
        t_mon = next_month if next_month <= horizon + 1e-12 else inf
        # tie order at equal times: delivery, demand, month end, review
        t_min = min(t_del, t_dem, t_mon, t_rev)
        if t_min == inf or t_min > horizon + 1e-12:
            break
        if t_del == t_min:
            _, qty = heapq.heappop(deliveries)
            net += qty
            on_order -= qty
        elif t_dem == t_min:
            if t_dem >= horizon:
                break
            q = qtys[di]
            net -= q
            units_demanded += q
            di += 1
            if di == len(times):
                times, qtys = demand_batch(t_dem)
                di = 0
        elif t_mon == t_min:
            if net > 0:
                holding += params.holding_cost * net
            else:
                backlog += params.backlog_cost * (-net)
            next_month += 1.0
        else:
            position = net + on_order
            if position <= s:
                qty = S - position
                lead = lead_rng.uniform(params.lead_time_min, params.lead_time_max)
                heapq.heappush(deliveries, (t_rev + lead, qty))
                on_order += qty
                n_orders += 1
                units_ordered += qty
            reviews_done += 1
            next_review = reviews_done * params.review_period

    ordering = params.order_fixed_cost * n_orders / months
    holding /= months
    backlog /= months
    return SimulationOutput(
        avg_monthly_total_cost=ordering + holding + backlog,
        ordering=ordering,
        holding=holding,
        backlog=backlog,
        total_cost=(ordering + holding + backlog) * months,
        months=months,
        n_orders=n_orders,
        units_ordered=units_ordered,
        units_demanded=units_demanded,
        units_in_transit=on_order,
        initial_net_inventory=initial_net,
        final_net_inventory=net,
        seed=f"{seed_seq.entropy}:{'.'.join(map(str, seed_seq.spawn_key))}",
    )


# -- synthetic 1-D functions -------------------------------------------------

SYNTHETIC_MINIMIZER = 0.7
SYNTHETIC_MINIMUM = -0.3


def synthetic_1d(x: float) -> float:
    """Multimodal test function on [0, 1]: ``2 (x - 0.7)^2 - 0.3 cos(6 pi (x - 0.7))``.

    Global minimizer x = 0.7 with value -0.3; the nearest rival local minima
    sit near 0.7 +/- 1/3 at about -0.08.
    """
    x = float(np.asarray(x, dtype=float).ravel()[0]) if np.ndim(x) else float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    u = x - SYNTHETIC_MINIMIZER
    return 2.0 * u * u - 0.3 * math.cos(6.0 * math.pi * u)


def synthetic_noise_sd(x: float, noise_scale: float = 1.0) -> float:
    """Heteroscedastic noise level: grows linearly from 0.05 at x=0 to 0.30 at x=1."""
    return noise_scale * (0.05 + 0.25 * x)


def synthetic_1d_noisy(x: float, seed=None, noise_scale: float = 1.0) -> float:
    value = synthetic_1d(x)
    sd = synthetic_noise_sd(float(np.ravel(x)[0]), noise_scale)
    if sd == 0.0:
        return value
    return value + sd * float(make_rng(seed if seed is not None else 0).standard_normal())


# -- problems and replicated evaluation --------------------------------------

@dataclass(frozen=True)
class Evaluation:
    sample_mean: float
    variance_of_mean: float
    outputs: tuple


@dataclass(frozen=True)
class Problem:
    """Evaluator + domain + candidate set. ``replicate(point, seed_sequence)`` returns one output."""

    name: str
    domain: Domain
    candidates: np.ndarray = field(repr=False)
    replicate: Callable = field(repr=False)

    def evaluate(self, point, n_reps: int, stream: SeedStream) -> Evaluation:
        return evaluate(self.replicate, point, n_reps, stream)


def evaluate(replicate: Callable, point, n_reps: int, stream: SeedStream) -> Evaluation:
    """Run ``n_reps`` replications on consecutive substreams; return the mean and s^2/n."""
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    outs = np.array([replicate(point, stream.replication(r)) for r in range(n_reps)], dtype=float)
    var_of_mean = float(outs.var(ddof=1) / n_reps) if n_reps > 1 else 0.0
    return Evaluation(float(outs.mean()), var_of_mean, tuple(outs.tolist()))


@dataclass(frozen=True)
class InventoryReplicate:
    params: InventoryParams = InventoryParams()

    def __call__(self, point, seed) -> float:
        return simulate_inventory(int(point[0]), int(point[1]), self.params, seed).avg_monthly_total_cost


@dataclass(frozen=True)
class SyntheticReplicate:
    noise_scale: float = 0.0

    def __call__(self, point, seed) -> float:
        x = float(np.ravel(point)[0])
        if self.noise_scale == 0.0:
            return synthetic_1d(x)
        return synthetic_1d_noisy(x, seed, self.noise_scale)


def inventory_problem(params: InventoryParams = InventoryParams()) -> Problem:
    dom = inventory_domain()
    return Problem("inventory", dom, candidate_grid(dom), InventoryReplicate(params))


def synthetic_problem(noise_scale: float = 0.0, n_candidates: int = 1001) -> Problem:
    name = "synthetic1d" if noise_scale == 0.0 else "synthetic1d_noisy"
    return Problem(name, unit_domain(1), uniform_grid_1d(n_candidates), SyntheticReplicate(noise_scale))


def get_problem(name: str, **overrides) -> Problem:
    name = name.lower()
    if name == "inventory":
        return inventory_problem(InventoryParams(**overrides))
    if name == "synthetic1d":
        return synthetic_problem(0.0)
    if name == "synthetic1d_noisy":
        return synthetic_problem(float(overrides.get("noise_scale", 1.0)))
    raise ValueError(f"unknown problem {name!r} (inventory, synthetic1d, synthetic1d_noisy)")
