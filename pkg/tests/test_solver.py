import json
import math

import numpy as np
import pytest

from agecodec.codec import LengthAssignment, kraft_sum, shannon_lengths
from agecodec.pmf import entropy, group_equal_probs, kl_divergence, new_pmf, uniform, zipf
from agecodec.solver import (
    DELAY_MARGIN,
    DelayInfeasibleError,
    SolverOptions,
    _alternation,
    _Dual,
    delay_condition_holds,
    delay_z_bound,
    direct_oracle,
    primal_cost,
    saddle_check,
    solve_age,
    solve_delay,
    summarize,
    z_bound,
)
from agecodec.varform import age_objective
from conftest import head_tail_alt, head_tail_pmf, random_pmf

# minimum age cost of Zipf(1, 8), frozen from the independent direct oracle
ZIPF_1_8_COST = 4.083382646878876


def test_z_bound():
    assert z_bound(uniform(256)) == pytest.approx(16.0)
    assert z_bound(uniform(4)) == pytest.approx(2.0)
    rng = np.random.default_rng(3)
    for _ in range(100):
        assert z_bound(random_pmf(rng, 50)) >= 1.0


def test_delay_bounds():
    p = uniform(4)
    assert delay_condition_holds(p, 1 / 3)
    assert not delay_condition_holds(p, 1 / 2.5)
    assert delay_z_bound(p, 1 / 2.5) == math.inf
    lp = 2 + DELAY_MARGIN
    assert delay_z_bound(p, 0.25) == pytest.approx(2 * lp / (4 - lp))


def test_options_validation():
    for bad in ({"z_grid_points": 0}, {"inner_tol": 0.1}, {"inner_tol": 0}, {"inner_method": "x"}, {"z_tol": 0}):
        with pytest.raises(ValueError):
            SolverOptions(**bad)


@pytest.mark.parametrize("k", [1, 2, 5, 8])
def test_uniform_age(k):
    p = uniform(2**k)
    res = solve_age(p)
    assert res.lengths.lengths == pytest.approx(np.full(2**k, float(k)), abs=1e-9)
    assert res.value == pytest.approx(1.5 * k - 0.5, abs=1e-9)
    assert res.p_star.probs == pytest.approx(p.probs, abs=1e-12)
    assert res.z_star == pytest.approx(1.0, abs=1e-6)
    assert res.q_star == pytest.approx(p.probs, abs=1e-12)
    assert res.converged
    diag = saddle_check(p, res)
    assert diag.passed, diag.failures()


@pytest.mark.parametrize("k,l_th", [(2, 3.0), (3, 5.0), (6, 7.0)])
def test_uniform_delay(k, l_th):
    p = uniform(2**k)
    res = solve_delay(p, 1 / l_th)
    assert res.lengths.lengths == pytest.approx(np.full(2**k, float(k)), abs=1e-8)
    assert res.cost == pytest.approx(k * k / (2 * (l_th - k)) + k, rel=1e-10)
    _, oc = direct_oracle(p, "delay", 1 / l_th)
    assert oc == pytest.approx(res.cost, abs=1e-9)


def test_zipf_1_8_regression():
    p = zipf(1, 8)
    res = solve_age(p)
    assert res.cost == pytest.approx(ZIPF_1_8_COST, abs=1e-9)
    # P* flattens P
    assert res.p_star.probs.max() < p.probs.max()
    assert res.p_star.probs.min() > p.probs.min()
    assert saddle_check(p, res).passed
    assert res.lengths.lengths == pytest.approx(-np.log2(res.p_star.probs))
    assert abs(kraft_sum(res.lengths) - 1) < 1e-12


def test_result_invariants(rng):
    for _ in range(15):
        p = random_pmf(rng, 40)
        res = solve_age(p)
        g = (1 - res.z_star**2 / 2) * p.probs + res.z_star * np.sqrt(res.q_star * p.probs)
        assert res.p_star.probs == pytest.approx(g / g.sum(), rel=1e-9, abs=1e-15)
        assert res.duality_gap <= 1e-6
        assert res.cost == pytest.approx(primal_cost(p, res.lengths), rel=1e-12)
        # Q is constant on equal-probability groups
        for grp in group_equal_probs(p).groups:
            assert np.ptp(res.q_star[grp]) == 0.0
        h = entropy(p)
        assert 1.5 * h - 1e-9 <= res.cost <= 1.5 * math.log2(len(p)) + 1.5 + 1e-9
        assert res.cost <= 1.5 * math.ceil(math.log2(len(p))) + 1e-9


def test_group_symmetric_q():
    p = new_pmf([4, 2, 2, 1, 1, 1, 1])
    res = solve_age(p)
    assert res.q_star[1] == res.q_star[2]
    assert len(set(res.q_star[3:].tolist())) == 1
    assert res.diagnostics["groups"] == 3


def test_head_tail_ordering():
    n = 16
    p = head_tail_pmf(n)
    res = solve_age(p)
    alt = primal_cost(p, shannon_lengths(head_tail_alt(n)))
    plain = primal_cost(p, shannon_lengths(p))
    assert res.cost < alt < plain


def test_matches_oracle(rng):
    for _ in range(10):
        p = random_pmf(rng, 24)
        res = solve_age(p)
        _, oc = direct_oracle(p)
        assert res.cost <= oc + 1e-6
        lam = 1 / (entropy(p) + DELAY_MARGIN + rng.uniform(0.1, 4))
        rd = solve_delay(p, lam)
        _, od = direct_oracle(p, "delay", lam)
        assert rd.cost <= od + 1e-6


def test_exponentiated_gradient_inner_agrees():
    p = zipf(1.2, 20)
    a = solve_age(p)
    b = solve_age(p, SolverOptions(inner_method="eg"))
    assert b.cost == pytest.approx(a.cost, abs=1e-8)


def test_deterministic_given_seed():
    p = zipf(0.7, 30)
    a, b = solve_age(p), solve_age(p)
    assert a.to_json() == b.to_json()


def test_delay_infeasible_raises_and_falls_back():
    p = zipf(1, 8)
    h = entropy(p)
    lam = 1 / (h + 0.5)
    with pytest.raises(DelayInfeasibleError, match=r"log2\(1 \+ 1/sqrt\(2\)\)"):
        solve_delay(p, lam)
    res = solve_delay(p, lam, fallback=True)
    assert not res.guarantee
    assert res.path == "oracle"
    assert math.isfinite(res.cost)
    with pytest.raises(DelayInfeasibleError):
        solve_delay(p, 1 / (h - 0.1), fallback=True)


def test_delay_guarantees(rng):
    for _ in range(20):
        p = random_pmf(rng, 40)
        lam = 1 / (entropy(p) + DELAY_MARGIN + rng.uniform(0.01, 3))
        res = solve_delay(p, lam)
        assert kl_divergence(p, res.p_star) <= DELAY_MARGIN + 1e-9
        assert summarize(p, res)["mean_length"] <= entropy(p) + DELAY_MARGIN + 1e-9


def test_delay_cost_increasing_in_rate():
    p = new_pmf([0.5] + [0.5 / 255] * 255)
    lams = [0.02, 0.05, 0.1, 0.15]
    costs = [solve_delay(p, lam).cost for lam in lams]
    assert all(a < b for a, b in zip(costs, costs[1:]))


def test_saddle_negative_control(rng):
    p = zipf(1, 8)
    res = solve_age(p)
    noisy = LengthAssignment(res.lengths.lengths + rng.normal(0, 0.05, size=8).clip(0))
    diag = saddle_check(p, res, lengths=noisy)
    assert not diag.lengths_optimal
    assert not diag.passed
    assert diag.failures()


def test_alternation_monotone(rng):
    for _ in range(10):
        p = random_pmf(rng, 30)
        dual = _Dual(p, "age", None, 1e-12)
        _, history, _ = _alternation(dual, -np.log2(dual.ps), SolverOptions())
        assert np.all(np.diff(history) <= 1e-12 * np.abs(history[:-1]))
        lam = 1 / (entropy(p) + 2)
        dual = _Dual(p, "delay", 1 / lam, 1e-12)
        _, history, _ = _alternation(dual, -np.log2(dual.ps), SolverOptions())
        assert np.all(np.diff(history) <= 1e-12 * np.abs(history[:-1]))


def test_integer_lengths_and_codebook():
    p = new_pmf([0.999999, 5e-7, 5e-7])
    res = solve_age(p)
    ints = res.integer_lengths
    assert ints.integral and ints.lengths.min() >= 1
    book = res.codebook()
    assert [len(w) for w in book.codewords] == ints.as_ints()


def test_json_shape():
    res = solve_age(zipf(1, 8))
    d = json.loads(res.to_json())
    assert set(d) == {
        "mode", "z_star", "q_star", "p_star", "lengths", "cost",
        "average_age_or_delay", "converged", "duality_gap", "diagnostics",
    }
    assert d["average_age_or_delay"] == pytest.approx(d["cost"] - 0.5)


def test_dual_value_below_primal(rng):
    p = random_pmf(rng, 10)
    res = solve_age(p)
    assert age_objective(p, res.z_star, res.q_star) <= res.cost + 1e-9
    assert res.dual_value == pytest.approx(res.cost, abs=1e-6)
