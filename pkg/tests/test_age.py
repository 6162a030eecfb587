import json
import math

import numpy as np
import pytest

from agecodec.age import (
    AgeError,
    RandomizedScheme,
    age_bounds,
    age_cost,
    age_report,
    average_age,
    average_age_erasure,
    average_age_erasure_exact,
    average_age_randomized,
    average_delay,
    randomized_moments,
    shannon_age_certificate,
)
from agecodec.codec import canonical_code, shannon_lengths
from agecodec.pmf import new_pmf, uniform
from agecodec.solver import solve_age
from conftest import head_tail_alt, head_tail_pmf, random_pmf, skip_example_pmf


@pytest.mark.parametrize("k", range(1, 11))
def test_fixed_length_age(k):
    assert average_age(uniform(2**k), [k] * 2**k) == pytest.approx(1.5 * k - 0.5, abs=1e-12)


def test_average_age_small_example():
    assert average_age(new_pmf([0.5, 0.5]), [1, 2]) == pytest.approx(1.5 + 2.5 / 3 - 0.5)


def test_average_age_accepts_codebook():
    book = canonical_code([1, 2, 2])
    p = new_pmf([0.5, 0.25, 0.25])
    assert average_age(p, book) == average_age(p, [1, 2, 2])


def test_zero_mean_length_rejected():
    with pytest.raises(AgeError):
        average_age(uniform(2), [0, 0])


def test_head_tail_shannon_for_alternative_is_better():
    n = 16
    p = head_tail_pmf(n)
    a_p = average_age(p, shannon_lengths(p))
    a_alt = average_age(p, shannon_lengths(head_tail_alt(n)))
    assert a_alt < a_p
    assert a_p == pytest.approx(10.187590405486604, rel=1e-12)
    assert a_alt == pytest.approx(7.534619311960405, rel=1e-12)


def test_randomized_reduces_to_deterministic(rng):
    for _ in range(50):
        p = random_pmf(rng, 20)
        ell = shannon_lengths(p, integer=True)
        for skip in (None, 0.0, 7.0):
            sch = RandomizedScheme(np.ones(len(p)), skip)
            assert average_age_randomized(p, ell, sch) == average_age(p, ell)


def test_skip_example():
    p = skip_example_pmf()
    theta = np.r_[np.ones(3), np.zeros(61)]
    ell = [2] * 64
    sch = RandomizedScheme(theta)
    e_theta, m1, m2 = randomized_moments(p, ell, sch)
    assert (e_theta, m1, m2) == pytest.approx((0.75, 2.0, 4.0))
    assert average_age_randomized(p, ell, sch) == pytest.approx(19 / 6, abs=1e-12)
    assert round(average_age_randomized(p, ell, sch), 2) == 3.17
    assert round(age_bounds(p)[0], 3) == 4.724


def test_skip_length_defaults_to_shortest_word():
    sch = RandomizedScheme(np.array([1.0, 0.0, 1.0]))
    assert sch.resolved_skip_length([3, 1, 2]) == 1.0
    assert RandomizedScheme(np.array([1.0, 0.0]), 5.0).resolved_skip_length([1, 2]) == 5.0


def test_effective_kraft_includes_idle_word():
    sch = RandomizedScheme(np.r_[np.ones(3), np.zeros(61)], 2.0)
    assert sch.effective_kraft([2] * 64) == 1.0
    assert sch.effective_lengths([2] * 64).tolist() == [2, 2, 2, 2]
    assert RandomizedScheme(np.ones(4), 1.0).effective_kraft([2] * 4) == 1.5


def test_scheme_validation():
    with pytest.raises(AgeError):
        RandomizedScheme(np.array([0.5, 1.5]))
    with pytest.raises(AgeError):
        RandomizedScheme(np.array([0.5, 0.5]), -1.0)
    with pytest.raises(AgeError):
        average_age_randomized(uniform(2), [1, 1], RandomizedScheme(np.zeros(2)))
    with pytest.raises(AgeError):
        average_age_randomized(uniform(2), [1, 1], RandomizedScheme(np.ones(3)))


def test_erasure_formula():
    assert average_age_erasure(3.0, 0.0) == 3.0
    assert average_age_erasure(11.5, 0.5) == pytest.approx(23.5)
    eps = np.linspace(0, 0.95, 40)
    vals = [average_age_erasure(2.0, e) for e in eps]
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(AgeError):
        average_age_erasure(1.0, 1.0)


def test_exact_erasure_form_from_moments():
    # per-bit repetition: D = L + NegBin(L, 1-eps)
    p = new_pmf([0.5, 0.3, 0.2])
    ell = np.array([1.0, 2.0, 3.0])
    eps = 0.3
    d1 = ell / (1 - eps)
    d2 = ell * eps / (1 - eps) ** 2 + d1**2
    direct = age_cost(float(p.probs @ d1), float(p.probs @ d2)) - 0.5
    assert average_age_erasure_exact(average_age(p, ell), eps) == pytest.approx(direct, rel=1e-13)
    assert average_age_erasure_exact(3.0, 0.0) == 3.0


def test_age_bounds():
    assert age_bounds(uniform(256)) == (11.5, 13.0)
    for n in (2, 5, 64):
        lo, hi = age_bounds(new_pmf(np.arange(1, n + 1)))
        assert lo <= hi


def test_age_report_json():
    rep = age_report(uniform(4), [2, 2, 2, 2])
    d = json.loads(rep.to_json())
    assert d == {
        "mean_length": 2.0,
        "second_moment": 4.0,
        "average_age": 2.5,
        "lower_bound": 2.5,
        "upper_bound": 4.0,
    }


def test_age_at_least_jensen_bound(rng):
    for _ in range(300):
        p = random_pmf(rng, 40)
        ell = rng.uniform(0.1, 20, size=len(p))
        m1 = float(p.probs @ ell)
        assert average_age(p, ell) >= 1.5 * m1 - 0.5 - 1e-12


def test_lower_bound_holds_for_feasible_codes(rng):
    for _ in range(40):
        p = random_pmf(rng, 32)
        lo, _ = age_bounds(p)
        k = math.ceil(math.log2(len(p)))
        assert average_age(p, [k] * len(p)) >= lo - 1e-9
        assert average_age(p, shannon_lengths(p, integer=True)) >= lo - 1e-9
        assert solve_age(p).value >= lo - 1e-9


def test_shannon_certificate():
    for k in range(1, 11):
        expect = k + 1 - (1 - 1 / (2 * math.log(2))) * k
        assert shannon_age_certificate(uniform(2**k)) == pytest.approx(expect, abs=1e-12)
        assert expect > 0
    assert shannon_age_certificate(head_tail_pmf(16)) >= 0


def test_shannon_certificate_random(rng):
    for _ in range(300):
        assert shannon_age_certificate(random_pmf(rng, 1024)) >= 0


def test_delay_formula():
    p = uniform(4)
    assert average_delay(p, [2] * 4, 0.2) == pytest.approx(4 / 6 + 2)
    assert average_delay(p, [2] * 4, 0.5) == math.inf
    assert average_delay(p, [2] * 4, 1e-9) == pytest.approx(2.0, abs=1e-7)
    with pytest.raises(AgeError):
        average_delay(p, [2] * 4, 0.0)


def test_delay_increasing_in_rate():
    p = new_pmf([0.5, 0.25, 0.25])
    ell = [1, 2, 2]
    lams = np.linspace(0.01, 0.66, 60)
    vals = [average_delay(p, ell, lam) for lam in lams]
    assert all(math.isfinite(v) for v in vals)
    assert np.all(np.diff(vals) > 0)
