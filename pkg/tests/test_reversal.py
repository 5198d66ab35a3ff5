import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from zrpgap.errors import CapacityError
from zrpgap.reversal import (
    MERGED,
    DriftParams,
    balance_residuals,
    balanced_states,
    build_tagged_pair_chain,
    drift_check,
    occupation_time_inequality,
    reverse_chain,
    reversed_attempt_rates,
    reversed_rate_bounds_hold,
    sample_hitting_times,
    simulate_reversed_hitting,
    survival_agreement,
)
from zrpgap.stats import fit_exponential_tail


def brute_force_states(n, high_count):
    """Independent enumeration: every occupancy/tag triple that is legal."""
    total = high_count + 2
    out = set()
    for occ in product(range(total + 1), repeat=n):
        if sum(occ) != total:
            continue
        for s in range(n):
            for t in range(n):
                if s != t and occ[s] >= 1 and occ[t] >= 1:
                    out.add((occ, s, t))
    return out


@pytest.mark.parametrize("n,j", [(3, 0), (3, 1), (4, 0), (4, 1)])
def test_state_enumeration_matches_brute_force(n, j):
    chain = build_tagged_pair_chain(n, j)
    proper = set(chain.states) - {MERGED}
    assert proper == brute_force_states(n, j)
    assert chain.size == n * (n - 1) * math.comb(n + j - 1, j) + 1


def test_rate_structure_bounds():
    for n, j in [(3, 1), (4, 1), (3, 2)]:
        chain = build_tagged_pair_chain(n, j)
        for i, state in enumerate(chain.states):
            row = chain.rates[i]
            assert all(q > 0 for q in row.values())
            if state != MERGED:
                assert len(row) <= (n - 1) * (j + 2)
                # one unit of exit rate per occupied vertex
                occupied = sum(1 for k in state[0] if k > 0)
                assert chain.exit_rate(i) == Fraction(occupied)


@pytest.mark.parametrize("n", [3, 4])
@pytest.mark.parametrize("j", [0, 1])
def test_balance_equations_exact(n, j):
    chain = build_tagged_pair_chain(n, j)
    residuals = balance_residuals(chain)
    assert all(x == 0 for x in residuals)


def test_perturbed_weights_break_balance():
    chain = build_tagged_pair_chain(3, 1)
    residuals = balance_residuals(chain, weights=[1] * chain.size)
    assert any(x != 0 for x in residuals)


def test_reversal_identity_between_equal_weights():
    chain = build_tagged_pair_chain(3, 0)
    rev = reverse_chain(chain)
    for i, row in enumerate(chain.rates):
        for j, q in row.items():
            if chain.pi[i] == chain.pi[j]:
                assert rev.rates[j][i] == q


def test_double_reversal_is_identity():
    for n, j in [(3, 0), (3, 1), (4, 1)]:
        chain = build_tagged_pair_chain(n, j)
        twice = reverse_chain(reverse_chain(chain))
        assert all(twice.rates[i] == chain.rates[i] for i in range(chain.size))


@pytest.mark.parametrize("n,j", [(3, 0), (3, 1), (4, 1)])
def test_reversed_rates_match_attempt_description(n, j):
    suppressed = reverse_chain(build_tagged_pair_chain(n, j), suppress_merged=True)
    closed_form = reversed_attempt_rates(n, j)
    for i in range(suppressed.size):
        assert suppressed.rates[i] == closed_form.rates[i]


def test_reversed_vertex_rate_bounds():
    assert reversed_rate_bounds_hold(3, 1)
    assert reversed_rate_bounds_hold(4, 1)
    assert reversed_rate_bounds_hold(3, 2)


def test_capacity_guard():
    with pytest.raises(CapacityError):
        build_tagged_pair_chain(10, 8, max_states=500)


def test_drift_parameter_values():
    params = DriftParams(density=0.0, c_const=32.0)  # scale 64*1/32 = 2
    assert params.scale == pytest.approx(2.0)
    assert params.alpha == pytest.approx(1.0 / 6.0)
    assert params.rung(2) == pytest.approx(-0.5)
    assert params.rung(3) == pytest.approx(-1.0 / 6.0)
    assert params.ladder(3) == pytest.approx(-2.0 / 3.0)
    assert params.ladder(1) == 0.0
    # rungs are nonpositive and the ladder never increases
    prev = 0.0
    for k in range(2, 12):
        assert params.rung(k) < 0
        assert params.ladder(k) <= prev
        prev = params.ladder(k)
    with pytest.raises(ValueError):
        params.rung(1)


def test_hitting_from_balanced_state_is_zero():
    chain = build_tagged_pair_chain(3, 1)
    inside = next(
        s for s in chain.states if s != MERGED and s[0][s[1]] == s[0][s[2]]
    )
    run = simulate_reversed_hitting(chain, seed=4, horizon=100.0, c_const=0.3,
                                    start=inside)
    assert run.hit and run.stop_time == 0.0
    merged_run = simulate_reversed_hitting(chain, seed=4, horizon=100.0,
                                           c_const=0.3, start=MERGED)
    assert merged_run.hit and merged_run.stop_time == 0.0


def test_reversed_simulation_requires_forward_chain():
    chain = build_tagged_pair_chain(3, 1)
    with pytest.raises(ValueError):
        simulate_reversed_hitting(reverse_chain(chain), seed=1, horizon=10.0,
                                  c_const=0.3)


def test_drift_bookkeeping_identity():
    chain = build_tagged_pair_chain(4, 2)
    for seed in range(200):
        simulate_reversed_hitting(chain, seed=seed, horizon=1e4, c_const=0.3,
                                  check_identity=True)


def test_hitting_time_tail_is_exponential():
    runs = sample_hitting_times(4, 1, 10_000, seed=12, horizon=1e6, c_const=0.3)
    assert all(run.hit for run in runs)
    times = [run.stop_time for run in runs if run.stop_time > 0]
    fit = fit_exponential_tail(times, bootstrap=0)
    assert fit.r_squared > 0.95


def test_drift_check_nonnegative():
    check = drift_check(4, 1, replicas=2000, seed=13, c_const=0.3, t_ref=5.0)
    assert check.nonnegative_within_2se
    assert check.mean_rate > 0


@pytest.mark.parametrize("n,j", [(3, 0), (3, 1), (4, 1)])
def test_forward_reversed_survival_agreement(n, j):
    chain = build_tagged_pair_chain(n, j)
    agreement = survival_agreement(chain, [0.5, 1.0, 2.0])
    assert agreement.sup_difference <= 1e-10


def test_survival_at_time_zero_is_mass_outside_hitting_set():
    chain = build_tagged_pair_chain(3, 1)
    agreement = survival_agreement(chain, [0.0])
    absorbed = set(balanced_states(chain))
    outside = sum(chain.pi[i] for i in range(chain.size) if i not in absorbed)
    expected = outside / sum(chain.pi)
    assert agreement.forward[0] == pytest.approx(expected, abs=1e-12)
    assert agreement.backward[0] == pytest.approx(expected, abs=1e-12)


def test_two_tags_only_is_everywhere_balanced():
    # with no high particles every proper state has both tags alone, so the
    # survival of the balanced-set hitting time vanishes identically
    chain = build_tagged_pair_chain(3, 0)
    assert set(balanced_states(chain)) == set(range(chain.size))
    agreement = survival_agreement(chain, [0.5, 1.0])
    assert agreement.forward == (0.0, 0.0)
    assert agreement.backward == (0.0, 0.0)


def test_occupation_time_inequality_threshold_zero_is_sure():
    chain = build_tagged_pair_chain(3, 0)
    report = occupation_time_inequality(
        chain, 0.0, chain.states[1], chain.states[2], replicas=1000, seed=2,
        horizon=0.5,
    )
    assert report.forward.value == 1.0
    assert report.reversed_max.value == 1.0
    assert report.constant >= 1.0
    assert report.bound_holds_within_2se


def test_occupation_time_inequality_nontrivial():
    chain = build_tagged_pair_chain(3, 0)
    x_state = chain.states[1]
    for start in chain.states[1:4]:
        report = occupation_time_inequality(
            chain, 0.2, x_state, start, replicas=4000, seed=9, horizon=1.0
        )
        assert report.bound_holds_within_2se
