"""Occupancy-time statistics, exact Poisson-difference tails, random-walk
no-return estimates, and exponential tail fitting.

The simulation pieces all run on the complete graph in the attempt
formalism: every ordered vertex pair (u, v) attempts a move at rate
1/(n-1), and the attempt fails when the source is empty.  That keeps every
vertex's attempt rate at exactly 1 in each direction and makes empty-time
bookkeeping exact between events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import special
from scipy import stats as sps

from .configurations import random_configuration, validate_configuration
from .seeding import derive_seed, make_generator


# ---------------------------------------------------------------------------
# Exact stationary occupancy facts (uniform law over configurations)
# ---------------------------------------------------------------------------

def empty_probability_exact(n: int, r: int) -> Fraction:
    """P(a given vertex is empty) under the uniform configuration law.

    Equals #{eta : eta(v) = 0} / #configurations = (n-1)/(n+r-1).
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if r < 0:
        raise ValueError("need r >= 0")
    count_empty = math.comb(n - 2 + r, r)
    count_all = math.comb(n - 1 + r, r)
    value = Fraction(count_empty, count_all)
    assert value == Fraction(n - 1, n + r - 1)
    return value


def occupancy_marginal_moments(n: int, r: int) -> tuple[Fraction, Fraction]:
    """Exact (E[eta(v)], E[eta(v)^2]) for one vertex under the uniform law."""
    if n < 2:
        raise ValueError("need n >= 2")
    total = math.comb(n + r - 1, r)
    e1 = Fraction(0)
    e2 = Fraction(0)
    for k in range(1, r + 1):
        ways = math.comb(n - 2 + r - k, r - k)
        e1 += Fraction(k * ways, total)
        e2 += Fraction(k * k * ways, total)
    return e1, e2


# ---------------------------------------------------------------------------
# Event-driven occupancy traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OccupancyTrace:
    """Per-vertex empty time accumulated by an exact event-driven run."""

    n: int
    r: int
    horizon: float
    seed: int
    start: tuple[int, ...]
    empty_time: tuple[float, ...]
    window_length: float
    truncation: float
    window_means: tuple[float, ...]
    events: int

    @property
    def mean_empty_time(self) -> float:
        return float(np.mean(self.empty_time))

    @property
    def empty_fraction(self) -> float:
        return self.mean_empty_time / self.horizon

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "horizon": self.horizon,
            "seed": self.seed,
            "start": list(self.start),
            "empty_time": list(self.empty_time),
            "empty_fraction": self.empty_fraction,
            "window_length": self.window_length,
            "truncation": self.truncation,
            "window_means": list(self.window_means),
            "events": self.events,
        }


def occupancy_stats(
    n: int,
    r: int,
    horizon: float,
    seed: int,
    start="stationary",
    m_param: float = 1.0,
    record_path: bool = False,
):
    """Simulate the process on K_n and accumulate exact per-vertex empty time.

    Also reports windowed, truncated empty-time averages: the horizon is cut
    into windows of length (rho+1)^2 and each vertex's empty time within a
    window is capped at m_param*(rho+1) before averaging over vertices.

    With ``record_path`` the full event path [(time, occupancy), ...] is
    returned alongside the trace, for cross-checking accumulators.
    """
    if n < 2 or r < 0:
        raise ValueError("need n >= 2 and r >= 0")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rng = make_generator(seed)
    if start == "stationary":
        occ = list(random_configuration(n, r, rng))
    else:
        occ = list(validate_configuration(start))
        if len(occ) != n or sum(occ) != r:
            raise ValueError("start configuration does not match (n, r)")
    start_occ = tuple(occ)

    rho = r / n
    window_length = (rho + 1.0) ** 2
    truncation = m_param * (rho + 1.0)

    empty = np.zeros(n)
    window_empty = np.zeros(n)
    window_means: list[float] = []
    next_boundary = window_length
    path = [(0.0, tuple(occ))] if record_path else None

    t = 0.0
    events = 0
    # attempt formalism: total attempt rate n, source/destination uniform
    inv_rate = 1.0 / n
    chunk = 8192
    buf_v = buf_u = buf_e = None
    bi = blen = 0
    empty_mask = np.array([k == 0 for k in occ])

    def _accumulate(dt: float):
        nonlocal next_boundary
        # split the constant-state interval across window boundaries
        remaining = dt
        while remaining > 0.0:
            room = next_boundary - t_accum[0]
            if room > remaining:
                empty[empty_mask] += remaining
                window_empty[empty_mask] += remaining
                t_accum[0] += remaining
                return
            empty[empty_mask] += room
            window_empty[empty_mask] += room
            t_accum[0] += room
            remaining -= room
            window_means.append(
                float(np.mean(np.minimum(window_empty, truncation)))
            )
            window_empty[:] = 0.0
            next_boundary += window_length

    t_accum = [0.0]
    while True:
        if bi == blen:
            buf_v = rng.integers(0, n, chunk).tolist()
            buf_u = rng.integers(0, n - 1, chunk).tolist()
            buf_e = (rng.standard_exponential(chunk) * inv_rate).tolist()
            bi = 0
            blen = chunk
        dt = buf_e[bi]
        v = buf_v[bi]
        u = buf_u[bi]
        bi += 1
        w = u + 1 if u >= v else u
        if t + dt >= horizon:
            _accumulate(horizon - t)
            t = horizon
            break
        _accumulate(dt)
        t += dt
        events += 1
        if occ[v] > 0:
            occ[v] -= 1
            occ[w] += 1
            empty_mask[v] = occ[v] == 0
            empty_mask[w] = False
            if record_path:
                path.append((t, tuple(occ)))

    trace = OccupancyTrace(
        n=n,
        r=r,
        horizon=float(horizon),
        seed=seed,
        start=start_occ,
        empty_time=tuple(float(x) for x in empty),
        window_length=window_length,
        truncation=truncation,
        window_means=tuple(window_means),
        events=events,
    )
    if record_path:
        return trace, path
    return trace


def estimate_window_constant(
    grid=((4, 1), (4, 2), (8, 1), (8, 2)),
    m_param: float = 1.0,
    replicas: int = 200,
    seed: int = 20260809,
) -> float:
    """Empirical lower constant for truncated window empty times.

    For each (n, rho) grid point, runs ``replicas`` windows of length
    (rho+1)^2 from stationary starts and averages min(empty time,
    m_param*(rho+1))/(rho+1) over vertices whose initial occupancy is at
    most 2(rho+1).  Returns the grid minimum: the best constant C such that
    the truncated mean empty time is >= C*(rho+1) held on the whole grid.
    """
    best = math.inf
    case = 0
    for n, rho in grid:
        r = int(round(rho * n))
        cap = 2.0 * (rho + 1.0)
        values = []
        for i in range(replicas):
            trace = occupancy_stats(
                n, r, (rho + 1.0) ** 2, derive_seed(seed, case * 100_003 + i)
            )
            for v in range(n):
                if trace.start[v] <= cap:
                    values.append(
                        min(trace.empty_time[v], trace.truncation) / (rho + 1.0)
                    )
        case += 1
        best = min(best, float(np.mean(values)))
    return best


# ---------------------------------------------------------------------------
# Poisson-difference (Skellam) tables
# ---------------------------------------------------------------------------

def skellam_tail(lam: float, m: int, tol: float = 1e-14) -> float:
    """Exact P(X - Y >= m) for independent X, Y ~ Poisson(lam).

    Direct double series: sum_x P(X=x) P(Y <= x-m), truncated where the
    Poisson tail drops below ``tol``.  Bessel evaluation is available as a
    cross-check in :func:`skellam_tail_bessel`.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    kmax = int(sps.poisson.isf(tol / 4.0, lam)) + 2
    if kmax > 10_000_000:
        raise ValueError("truncation budget exceeded")
    xs = np.arange(kmax + 1)
    px = sps.poisson.pmf(xs, lam)
    cdf = sps.poisson.cdf(xs - m, lam)
    return float(np.sum(px * cdf))


def skellam_tail_bessel(lam: float, m: int) -> float:
    """Bessel-series oracle for P(X - Y >= m); P(X-Y=k) = e^{-2 lam} I_k(2 lam)."""
    if m == 0:
        # half the off-atom mass plus the atom, by symmetry of the difference
        return 0.5 * (1.0 + float(special.ive(0, 2.0 * lam)))
    if m < 0:
        # P(D >= m) = 1 - P(D <= m-1) = 1 - P(D >= 1-m)
        return 1.0 - skellam_tail_bessel(lam, 1 - m)
    total = 0.0
    k = m
    while True:
        term = float(special.ive(k, 2.0 * lam))
        total += term
        if term < 1e-18 and k > 2 * lam + m:
            return total
        k += 1


def poisson_concentration(lam: float) -> float:
    """Exact P(|X - lam| >= lam/2) for X ~ Poisson(lam)."""
    if lam <= 0:
        raise ValueError("lam must be positive")
    lo = math.floor(lam / 2.0)
    hi = math.ceil(1.5 * lam)
    return float(sps.poisson.cdf(lo, lam) + sps.poisson.sf(hi - 1, lam))


@dataclass(frozen=True)
class SkellamTable:
    lam: float
    tails: tuple[tuple[int, float], ...]
    concentration: float

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "tails": [{"m": m, "probability": p} for m, p in self.tails],
            "concentration_half": self.concentration,
        }


def skellam_table(lam: float, ms) -> SkellamTable:
    tails = tuple((int(m), skellam_tail(lam, int(m))) for m in ms)
    return SkellamTable(lam=lam, tails=tails, concentration=poisson_concentration(lam))


# ---------------------------------------------------------------------------
# Continuous-time simple random walk: no-return probability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    ci_low: float
    ci_high: float
    replicas: int
    seed: int

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "ci95": [self.ci_low, self.ci_high],
            "replicas": self.replicas,
            "seed": self.seed,
        }


def rw_no_return_probability(r: float, replicas: int, seed: int) -> MCEstimate:
    """Monte Carlo estimate of P_0(X_t != 0 for all t in [1, r^2]).

    X is the continuous-time simple symmetric walk on the integers jumping
    in each direction at rate 1.  The event fails as soon as some holding
    interval with X = 0 intersects [1, r^2].
    """
    if r < 1:
        raise ValueError("need r >= 1")
    if replicas < 1:
        raise ValueError("need at least one replica")
    rng = make_generator(seed)
    r2 = float(r) * float(r)
    pos = np.zeros(replicas, dtype=np.int64)
    last_t = np.zeros(replicas)
    survived = 0
    while pos.size:
        m = pos.size
        next_t = last_t + rng.exponential(0.5, m)
        step = rng.integers(0, 2, m).astype(np.int64) * 2 - 1
        # interval [last_t, next_t) held pos; it kills the event when pos == 0
        # and the interval meets [1, r^2]
        dead = (pos == 0) & (next_t > 1.0) & (last_t <= r2)
        done = ~dead & (next_t > r2)
        survived += int(np.count_nonzero(done))
        keep = ~dead & ~done
        pos = pos[keep] + step[keep]
        last_t = next_t[keep]
    p = survived / replicas
    se = math.sqrt(max(p * (1.0 - p), 1e-300) / replicas)
    return MCEstimate(
        value=p,
        stderr=se,
        ci_low=p - 1.96 * se,
        ci_high=p + 1.96 * se,
        replicas=replicas,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Exponential tail fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailFit:
    """Least-squares exponential decay rate of an empirical survival tail."""

    gamma: float
    ci_low: float
    ci_high: float
    window_low: float
    window_high: float
    r_squared: float
    n_uncensored: int
    n_censored: int
    heavy_tail_flag: bool

    def as_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "gamma_ci95": [self.ci_low, self.ci_high],
            "fit_window": [self.window_low, self.window_high],
            "r_squared": self.r_squared,
            "n_uncensored": self.n_uncensored,
            "n_censored": self.n_censored,
            "heavy_tail_flag": self.heavy_tail_flag,
        }


def _survival_slope(values, n_censored, q_low, q_high):
    values = np.sort(values)
    m = values.size
    total = m + n_censored
    lo = float(np.quantile(values, q_low))
    hi = float(np.quantile(values, q_high))
    # survival just above each sorted point; censored samples (all at the
    # horizon, beyond any fit point) count as "still running"
    surv = (m - 1 - np.arange(m) + n_censored) / total
    mask = (values >= lo) & (values <= hi) & (surv > 0)
    ts = values[mask]
    ys = np.log(surv[mask])
    if ts.size < 10 or ts.max() <= ts.min():
        raise ValueError("fit window too narrow; need more samples")
    slope, intercept = np.polyfit(ts, ys, 1)
    fitted = slope * ts + intercept
    ss_res = float(np.sum((ys - fitted) ** 2))
    ss_tot = float(np.sum((ys - np.mean(ys)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return -slope, r2, lo, hi


def fit_exponential_tail(
    samples,
    n_censored: int = 0,
    window=(0.5, 0.99),
    bootstrap: int = 1000,
    seed: int = 0,
    r2_threshold: float = 0.98,
) -> TailFit:
    """Fit an exponential rate to the upper tail of positive samples.

    The empirical log-survival curve is fitted by least squares over the
    [q50, q99] sample-quantile window (by default); earlier times are
    transient-dominated and later ones noise-dominated.  ``n_censored``
    right-censored observations (at a horizon beyond the fit window) enter
    the survival denominator.  The confidence interval is a nonparametric
    bootstrap percentile interval, and a heavy-tail flag is raised when the
    window fit explains less than ``r2_threshold`` of the variance.
    """
    values = np.asarray(samples, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("samples must be a non-empty 1-d array")
    q_low, q_high = window
    gamma, r2, lo, hi = _survival_slope(values, n_censored, q_low, q_high)

    gammas = []
    if bootstrap > 0:
        rng = make_generator(derive_seed(seed, 0xB0075))
        m = values.size
        for _ in range(bootstrap):
            resample = values[rng.integers(0, m, m)]
            try:
                g, _, _, _ = _survival_slope(resample, n_censored, q_low, q_high)
            except ValueError:
                continue
            gammas.append(g)
    if gammas:
        ci_low, ci_high = np.quantile(gammas, [0.025, 0.975])
    else:
        ci_low = ci_high = gamma

    return TailFit(
        gamma=float(gamma),
        ci_low=float(ci_low),
        ci_high=float(ci_high),
        window_low=lo,
        window_high=hi,
        r_squared=float(r2),
        n_uncensored=int(values.size),
        n_censored=int(n_censored),
        heavy_tail_flag=bool(r2 < r2_threshold),
    )
