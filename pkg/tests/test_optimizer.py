import dataclasses

import numpy as np
import pytest

from krigopt.kriging import FitError
from krigopt.optimizer import (Algorithm, OptimizerConfig, RunHistory, fit_quadratic, identify_best,
                               initial_design, maximin_index, poly_predict, poly_select_infill,
                               quadratic_basis, run)
from krigopt.simulators import (SYNTHETIC_MINIMUM, Evaluation, Problem, get_problem, synthetic_problem)

pytestmark = pytest.mark.filterwarnings("ignore::krigopt.kriging.SingleReplicationWarning")


class CountingReplicate:
    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    def __call__(self, point, seed):
        self.calls += 1
        return self.inner(point, seed)


def counted(problem: Problem) -> tuple[Problem, CountingReplicate]:
    rep = CountingReplicate(problem.replicate)
    return dataclasses.replace(problem, replicate=rep), rep


def test_algorithm_parsing():
    assert Algorithm.parse("SK/MEI") is Algorithm.SK_MEI
    assert Algorithm.parse("ok") is Algorithm.OK_EI
    assert Algorithm.parse("polynomial") is Algorithm.POLY_REG
    with pytest.raises(ValueError):
        Algorithm.parse("random_search")
    with pytest.raises(ValueError):
        OptimizerConfig(n_initial=0)
    assert OptimizerConfig("sk_mei").criterion == "mei"
    assert OptimizerConfig("ok_ei", acquisition="LCB").criterion == "lcb"


def test_zero_infill_budget():
    problem = synthetic_problem()
    h = run(OptimizerConfig("ok_ei", n_infill=0, reps_per_point=1, master_seed=4), problem)
    assert len(h) == 10
    assert all(r.iteration == 0 for r in h.records)
    assert h.incumbent_trace().tolist() == [h.means.min()]
    assert h.best[1] == h.means.min()


@pytest.mark.slow
def test_ok_ei_finds_synthetic_minimum():
    problem = synthetic_problem()
    hits = 0
    for seed in range(20):
        h = run(OptimizerConfig("ok_ei", n_infill=20, reps_per_point=1, master_seed=seed), problem)
        hits += abs(h.best[1] - SYNTHETIC_MINIMUM) <= 1e-2
    assert hits >= 18


@pytest.mark.parametrize("alg", ["sk_mei", "ok_ei", "poly_reg"])
def test_inventory_candidate_discipline(alg):
    problem, rep = counted(get_problem("inventory"))
    cfg = OptimizerConfig(alg, n_infill=6, reps_per_point=2, master_seed=11, n_starts=4)
    h = run(cfg, problem)
    pts = h.points
    assert len(h) == 16
    assert np.all(pts == np.round(pts))
    assert np.all((1 <= pts[:, 0]) & (pts[:, 0] < pts[:, 1]) & (pts[:, 1] <= 100))
    assert len({tuple(p) for p in pts}) == len(pts)
    assert rep.calls == (cfg.n_initial + cfg.n_infill) * cfg.reps_per_point
    inc = h.incumbent_trace()
    assert np.all(np.diff(inc) <= 0)
    assert np.array_equal([r.incumbent for r in h.records], np.minimum.accumulate(h.means))


def test_run_is_deterministic():
    problem = synthetic_problem(noise_scale=1.0)
    cfg = OptimizerConfig("sk_mei", n_infill=5, reps_per_point=3, master_seed=2)
    a, b = run(cfg, problem), run(cfg, problem)
    assert a.to_csv(include_timing=False) == b.to_csv(include_timing=False)


def test_zero_noise_sk_mei_matches_ok_ei():
    problem = synthetic_problem()
    for seed in (0, 1, 2):
        ok = run(OptimizerConfig("ok_ei", n_infill=8, reps_per_point=2, master_seed=seed), problem)
        sk = run(OptimizerConfig("sk_mei", n_infill=8, reps_per_point=2, master_seed=seed), problem)
        assert np.array_equal(ok.points, sk.points)


def test_shared_initial_design_keyed_by_macrorep():
    problem = get_problem("inventory")
    a = initial_design(OptimizerConfig("sk_mei", master_seed=3, macrorep=1, reps_per_point=1), problem)
    b = initial_design(OptimizerConfig("poly_reg", master_seed=3, macrorep=1, reps_per_point=1), problem)
    c = initial_design(OptimizerConfig("sk_mei", master_seed=3, macrorep=2, reps_per_point=1), problem)
    assert np.array_equal(a.points, b.points) and a.evaluations == b.evaluations
    assert not np.array_equal(a.points, c.points)


def test_flat_responses_fall_back_to_space_filling():
    flat = Problem("flat", synthetic_problem().domain, synthetic_problem(n_candidates=11).candidates,
                   lambda point, seed: 1.0)
    h = run(OptimizerConfig("ok_ei", n_initial=3, n_infill=2, reps_per_point=1), flat)
    assert len(h) == 5
    assert any("space-filling" in d for d in h.diagnostics)


def test_exhaustion_stops_the_run():
    # the continuous LHS design does not consume grid candidates
    small = synthetic_problem(n_candidates=3)
    h = run(OptimizerConfig("ok_ei", n_initial=10, n_infill=5, reps_per_point=1), small)
    assert len(h) == 13
    assert any("exhausted" in d for d in h.diagnostics)


def test_stop_rule_hook():
    cfg = OptimizerConfig("ok_ei", n_infill=10, reps_per_point=1, stop_rule=lambda hist: len(hist) >= 12)
    assert len(run(cfg, synthetic_problem())) == 12


# quadratic baseline

def test_quadratic_basis_columns():
    A = quadratic_basis([[2.0, 3.0]])
    assert A.tolist() == [[1.0, 2.0, 3.0, 4.0, 9.0, 6.0]]


def test_fit_quadratic_exact_recovery(rng):
    coef = np.array([1.5, -2.0, 0.5, 3.0, 1.0, -0.75])
    x = rng.random((15, 2))
    y = quadratic_basis(x) @ coef
    assert np.allclose(fit_quadratic(x, y), coef, atol=1e-8)


def test_fit_quadratic_constant_and_orthogonality(rng):
    x = rng.random((12, 2))
    c = fit_quadratic(x, np.full(12, 4.25))
    assert c[0] == pytest.approx(4.25, abs=1e-8)
    assert np.allclose(c[1:], 0.0, atol=1e-8)
    y = rng.normal(size=12)
    A = quadratic_basis(x)
    resid = y - A @ fit_quadratic(x, y)
    assert np.allclose(A.T @ resid, 0.0, atol=1e-8)


def test_fit_quadratic_rank_deficient():
    with pytest.raises(FitError):
        fit_quadratic(np.random.default_rng(0).random((5, 2)), np.zeros(5))
    diag = np.array([[t, t] for t in np.linspace(0, 1, 10)])
    with pytest.raises(FitError):
        fit_quadratic(diag, diag[:, 0] ** 2)


def test_poly_select_bowl_and_saddle():
    cands = np.array([[i / 10, j / 10] for i in range(11) for j in range(11)])
    free = np.ones(len(cands), bool)
    # bowl centred on (0.3, 0.6)
    bowl = np.array([0.45, -0.6, -1.2, 1.0, 1.0, 0.0])
    i = poly_select_infill(bowl, cands, free)
    assert np.allclose(cands[i], [0.3, 0.6])
    saddle = np.array([0.0, 0.0, 0.0, 1.0, -1.0, 0.0])
    i = poly_select_infill(saddle, cands, free)
    assert i == int(np.argmin(poly_predict(saddle, cands)))
    assert np.allclose(cands[i], [0.0, 1.0])
    free[i] = False
    assert poly_select_infill(saddle, cands, free) != i


def test_poly_select_tie_goes_to_lower_index():
    cands = np.array([[0.2, 0.0], [0.8, 0.0], [0.5, 0.0]])
    sym = np.array([0.0, -1.0, 0.0, 1.0, 0.0, 0.0])  # (x - 0.5)^2 - 0.25
    vals = poly_predict(sym, cands)
    assert vals[0] == pytest.approx(vals[1])
    free = np.array([True, True, False])
    assert poly_select_infill(np.array([0.0, 0.0, 0.0, 0.0, 0.0, 0.0]), cands, free) == 0


def test_maximin_index():
    cands = np.linspace(0, 1, 11)[:, None]
    free = np.ones(11, bool)
    free[[0, 10]] = False
    assert maximin_index(cands, np.array([[0.0], [1.0]]), free) == 5


# history and identification

def _history(means):
    h = RunHistory(coord_names=("x",))
    for i, m in enumerate(means):
        h.append(0 if i < 2 else i - 1, [i / 10], Evaluation(m, 0.0, (m,)), 0.0)
    return h


def test_identify_best_examples():
    h = _history([3.0])
    p, v = identify_best(h)
    assert v == 3.0 and p.tolist() == [0.0]
    h = _history([5.0, 4.0, 3.0, 2.0, 1.0])
    assert identify_best(h)[1] == 1.0 and identify_best(h)[0].tolist() == [0.4]
    h = _history([2.0, 1.0, 1.0])
    assert identify_best(h)[0].tolist() == [0.1]
    with pytest.raises(ValueError):
        identify_best(RunHistory())


def test_history_csv_replay():
    problem = get_problem("inventory")
    h = run(OptimizerConfig("poly_reg", n_infill=5, reps_per_point=2, master_seed=9), problem)
    text = h.to_csv()
    assert text.splitlines()[0] == "iter,s,S,mean,var_of_mean,incumbent,seconds"
    back = RunHistory.from_csv(text)
    assert np.array_equal(back.points, h.points)
    assert np.array_equal(back.means, h.means)
    # replay: running minimum of the mean column and the optimum agree with the record
    assert np.array_equal(np.minimum.accumulate(back.means), [r.incumbent for r in back.records])
    p, v = identify_best(back)
    assert v == h.best[1] and np.array_equal(p, h.best[0])
    assert "seconds" not in h.to_csv(include_timing=False)
