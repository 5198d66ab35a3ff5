import math
from fractions import Fraction

import numpy as np
import pytest

from zrpgap.configurations import enumerate_configurations
from zrpgap.seeding import derive_seed, make_generator, splitmix64
from zrpgap.stats import (
    empty_probability_exact,
    estimate_window_constant,
    fit_exponential_tail,
    occupancy_marginal_moments,
    occupancy_stats,
    poisson_concentration,
    rw_no_return_probability,
    skellam_tail,
    skellam_tail_bessel,
    skellam_table,
)


def test_seed_derivation_is_stable():
    # pinned values guard cross-platform reproducibility of every stream
    assert splitmix64(0) == 16294208416658607535
    assert derive_seed(12345, 0) != derive_seed(12345, 1)
    g1 = make_generator(7, 3)
    g2 = make_generator(7, 3)
    assert g1.integers(0, 1 << 30) == g2.integers(0, 1 << 30)


def test_empty_probability_values():
    assert empty_probability_exact(5, 0) == 1
    assert empty_probability_exact(2, 1) == Fraction(1, 2)
    assert empty_probability_exact(3, 3) == Fraction(2, 5)


def test_empty_probability_matches_enumeration():
    n, r = 3, 3
    configs = enumerate_configurations(n, r)
    count = sum(1 for occ in configs if occ[0] == 0)
    assert empty_probability_exact(n, r) == Fraction(count, len(configs))
    assert count == 4 and len(configs) == 10


def test_occupancy_moments_match_enumeration():
    for n, r in [(3, 2), (4, 3), (2, 5)]:
        configs = enumerate_configurations(n, r)
        e1 = Fraction(sum(occ[0] for occ in configs), len(configs))
        e2 = Fraction(sum(occ[0] ** 2 for occ in configs), len(configs))
        assert occupancy_marginal_moments(n, r) == (e1, e2)


def test_occupancy_zero_particles_always_empty():
    trace = occupancy_stats(3, 0, 50.0, seed=1)
    assert trace.empty_time == (50.0, 50.0, 50.0)
    assert trace.empty_fraction == 1.0


def test_occupancy_accumulator_matches_grid_resimulation():
    trace, path = occupancy_stats(3, 2, 40.0, seed=9, record_path=True)
    delta = 1e-3
    grid = np.zeros(3)
    times = [t for t, _ in path] + [trace.horizon]
    occs = [occ for _, occ in path]
    k = 0
    t = 0.0
    while t < trace.horizon:
        while k + 1 < len(occs) and times[k + 1] <= t:
            k += 1
        for v in range(3):
            if occs[k][v] == 0:
                grid[v] += delta
        t += delta
    tolerance = 3 * delta * (len(path) + 1)
    assert np.abs(grid - np.array(trace.empty_time)).max() <= tolerance


def test_occupancy_windows_truncated():
    trace = occupancy_stats(4, 4, 100.0, seed=3)
    assert trace.window_length == pytest.approx(4.0)
    assert trace.truncation == pytest.approx(2.0)
    assert len(trace.window_means) == 25
    assert all(0.0 <= x <= trace.truncation for x in trace.window_means)


def test_long_run_empty_fraction_scaling():
    # long-run empty fraction stays above a constant multiple of 1/(rho+1)
    for rho in (1, 2, 4):
        trace = occupancy_stats(8, 8 * rho, 2000.0, seed=17 + rho)
        scaled = trace.empty_fraction * (rho + 1.0)
        assert scaled > 0.5


def test_skellam_values():
    assert skellam_tail(1.0, 0) == pytest.approx(0.6542541612768356, abs=1e-12)
    assert skellam_tail(1.0, 0) - skellam_tail(1.0, 1) == pytest.approx(
        0.3085083225536709, abs=1e-12
    )
    # tail of everything
    assert skellam_tail(1.0, -50) == pytest.approx(1.0, abs=1e-12)


def test_skellam_symmetry_identities():
    for lam in (0.5, 1.0, 7.0):
        p0 = skellam_tail(lam, 0)
        p1 = skellam_tail(lam, 1)
        atom = p0 - p1
        # P(D >= 1) = (1 - P(D = 0)) / 2 by symmetry of the difference
        assert p1 == pytest.approx((1.0 - atom) / 2.0, abs=1e-12)
        for m in (1, 3):
            assert skellam_tail(lam, m) + skellam_tail(lam, -m + 1) == pytest.approx(
                1.0, abs=1e-12
            )


def test_skellam_monotone_in_threshold():
    values = [skellam_tail(5.0, m) for m in range(-10, 11)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert all(0.0 <= v <= 1.0 for v in values)


def test_skellam_bessel_cross_check():
    for lam in (1.0, 4.0, 40.0):
        for m in (-3, 0, 1, 5):
            assert skellam_tail(lam, m) == pytest.approx(
                skellam_tail_bessel(lam, m), abs=1e-12
            )


def test_skellam_table_structure():
    table = skellam_table(2.0, [0, 1, 2])
    assert table.concentration == pytest.approx(poisson_concentration(2.0))
    ms = [m for m, _ in table.tails]
    assert ms == [0, 1, 2]


def test_vacuous_bound_at_alpha_zero():
    # exp(0) = 1 dominates every probability
    assert skellam_tail(50.0, 0) <= 1.0 == math.exp(0.0)


def test_poisson_concentration_decays_exponentially():
    rates = []
    for lam in (20, 60, 100, 140, 200):
        p = poisson_concentration(lam)
        rates.append(-math.log(p) / lam)
    assert min(rates) > 0.1


def test_skellam_quadratic_tail_rate_positive():
    worst = math.inf
    for lam in range(20, 201, 20):
        for a_num in range(1, 6):
            alpha = Fraction(a_num, 10)
            m = math.ceil(alpha * lam)
            p = skellam_tail(float(lam), m)
            worst = min(worst, -math.log(p) / (float(alpha) ** 2 * lam))
    assert worst > 0.25


def test_rw_no_return_r1_closed_form():
    # the window [1, 1] only constrains the time-1 state
    est = rw_no_return_probability(1, 60_000, seed=5)
    exact = 1.0 - 0.3085083225536709
    assert abs(est.value - exact) <= 3 * est.stderr


def test_rw_no_return_decreasing_in_r():
    values = [rw_no_return_probability(r, 30_000, seed=40 + r).value for r in (1, 2, 4)]
    assert values[0] > values[1] > values[2]


def test_rw_no_return_scaled_lower_bound():
    worst = math.inf
    for r in range(1, 9):
        est = rw_no_return_probability(r, 30_000, seed=60 + r)
        worst = min(worst, est.ci_low * r)
    assert worst > 0.0


def test_fit_recovers_synthetic_rate():
    rng = make_generator(321)
    fit = fit_exponential_tail(rng.exponential(0.5, 50_000), bootstrap=150)
    assert fit.gamma == pytest.approx(2.0, rel=0.05)
    assert fit.ci_low < fit.gamma < fit.ci_high
    assert not fit.heavy_tail_flag


def test_fit_scale_equivariance():
    rng = make_generator(322)
    samples = rng.exponential(1.0, 20_000)
    base = fit_exponential_tail(samples, bootstrap=0)
    scaled = fit_exponential_tail(samples * 4.0, bootstrap=0)
    assert scaled.gamma == pytest.approx(base.gamma / 4.0, rel=1e-9)


def test_fit_flags_heavy_tails():
    rng = make_generator(323)
    pareto = (1.0 / (1.0 - rng.random(30_000))) ** (1.0 / 1.2)
    fit = fit_exponential_tail(pareto, bootstrap=0)
    assert fit.heavy_tail_flag


def test_fit_with_censoring():
    rng = make_generator(324)
    samples = rng.exponential(1.0, 30_000)
    horizon = np.quantile(samples, 0.995)
    kept = samples[samples < horizon]
    fit = fit_exponential_tail(kept, n_censored=samples.size - kept.size,
                               bootstrap=0, window=(0.5, 0.95))
    assert fit.gamma == pytest.approx(1.0, rel=0.05)
    assert fit.n_censored > 0


def test_fit_input_validation():
    with pytest.raises(ValueError):
        fit_exponential_tail([])
    with pytest.raises(ValueError):
        fit_exponential_tail([1.0, 2.0, 3.0])  # far too few points


def test_window_constant_estimate_positive():
    c = estimate_window_constant(grid=((4, 1), (6, 2)), replicas=60, seed=77)
    assert 0.05 < c < 2.0
