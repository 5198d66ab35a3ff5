"""Generator construction and spectral analysis on the configuration space.

The process generator is a sparse symmetric matrix over all configurations
(symmetry comes from the constant rate on a regular graph), so the uniform
distribution is stationary and the spectrum is real.  The spectral gap is
the smallest nonzero eigenvalue of the negated generator; its inverse, the
relaxation time, is the asymptotic rate in

    gap = min_x lim_t -(1/t) log || P_t(x, .) - Uniform ||_TV,

which :func:`tv_curve` plus :func:`fit_decay_rate` verify numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy import stats as sps
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .configurations import (
    DEFAULT_MAX_CONFIGURATIONS,
    configuration_count,
    enumerate_configurations,
    random_configuration,
    transitions,
    validate_configuration,
)
from .errors import CapacityError, SolverConvergenceError
from .graphs import GraphSpec, Torus
from .seeding import make_generator
from .stats import empty_probability_exact, occupancy_marginal_moments

DENSE_THRESHOLD = 2000
UNIFORMIZATION_TAIL = 1e-12


@dataclass
class Generator:
    """Sparse symmetric rate matrix over the enumerated configuration space."""

    graph: GraphSpec
    particles: int
    configurations: list[tuple[int, ...]]
    matrix: sparse.csr_matrix
    _index: dict | None = None

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def config_index(self, occ) -> int:
        if self._index is None:
            self._index = {c: i for i, c in enumerate(self.configurations)}
        occ = validate_configuration(occ, self.graph)
        try:
            return self._index[occ]
        except KeyError:
            raise ValueError(f"{occ} is not a configuration of this generator")


def build_generator(graph: GraphSpec, r: int, max_states: int = DEFAULT_MAX_CONFIGURATIONS) -> Generator:
    """Assemble the generator of the r-particle process on ``graph``."""
    n = graph.vertex_count
    configs = enumerate_configurations(n, r, limit=max_states)
    index = {c: i for i, c in enumerate(configs)}
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for i, occ in enumerate(configs):
        acc: dict[int, float] = {}
        for target, rate in transitions(graph, occ):
            j = index[target]
            acc[j] = acc.get(j, 0.0) + rate
        total = 0.0
        for j, q in acc.items():
            rows.append(i)
            cols.append(j)
            vals.append(q)
            total += q
        rows.append(i)
        cols.append(i)
        vals.append(-total)
    matrix = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(configs), len(configs))
    )
    return Generator(
        graph=graph, particles=r, configurations=configs, matrix=matrix, _index=index
    )


@dataclass(frozen=True)
class SpectralReport:
    gap: float
    relaxation_time: float
    method: str
    residual: float
    dimension: int

    def as_dict(self) -> dict:
        return {
            "gap": self.gap,
            "relaxation_time": self.relaxation_time,
            "method": self.method,
            "residual": self.residual,
            "dimension": self.dimension,
        }


def exact_gap(
    gen: Generator, method: str = "auto", dense_threshold: int = DENSE_THRESHOLD
) -> SpectralReport:
    """Smallest nonzero eigenvalue of the negated generator.

    Dense symmetric eigendecomposition below ``dense_threshold`` states;
    above it, a shift-invert Lanczos solve for the two eigenvalues nearest
    zero (the known zero mode plus the gap).  The 2-norm residual of the
    computed eigenpair is reported either way.
    """
    dim = gen.matrix.shape[0]
    if dim < 2:
        raise ValueError("gap undefined on a single-configuration space")
    if method == "auto":
        method = "dense" if dim <= dense_threshold else "iterative"
    neg = -gen.matrix
    if method == "dense":
        values, vectors = np.linalg.eigh(neg.toarray())
        gap = float(values[1])
        vec = vectors[:, 1]
    elif method == "iterative":
        try:
            values, vectors = eigsh(neg.tocsc(), k=2, sigma=-0.05, which="LM")
        except ArpackNoConvergence as exc:
            raise SolverConvergenceError(
                f"eigensolver did not converge on dimension {dim}: {exc}",
            ) from exc
        order = np.argsort(values)
        gap = float(values[order[1]])
        vec = vectors[:, order[1]]
    else:
        raise ValueError(f"unknown method {method!r}")
    residual = float(np.linalg.norm(neg @ vec - gap * vec))
    if gap <= 0:
        raise SolverConvergenceError(
            f"computed gap {gap} is not positive (dimension {dim})",
            residual=residual,
        )
    return SpectralReport(
        gap=gap,
        relaxation_time=1.0 / gap,
        method=method,
        residual=residual,
        dimension=dim,
    )


# ---------------------------------------------------------------------------
# Transient analysis by uniformization
# ---------------------------------------------------------------------------

def transient_distribution(
    gen: Generator,
    start,
    times,
    tail_tol: float = UNIFORMIZATION_TAIL,
    max_terms: int = 1_000_000,
) -> np.ndarray:
    """Distribution at each requested time from a point start.

    Uniformization: with rate Lambda = max exit rate, the continuous-time
    law is the Poisson(Lambda*t) mixture of powers of the discrete kernel
    I + Q/Lambda.  The series is truncated once the remaining Poisson mass
    drops below ``tail_tol`` (the result is left unnormalized, biasing each
    probability by at most that much).
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    start_idx = start if isinstance(start, int) else gen.config_index(start)
    dim = gen.dimension
    exit_rates = -gen.matrix.diagonal()
    lam = float(exit_rates.max()) if dim else 0.0
    out = np.zeros((times.size, dim))
    if lam <= 0.0:
        out[:, start_idx] = 1.0
        return out
    kernel = sparse.identity(dim, format="csr") + gen.matrix / lam
    kmax = int(sps.poisson.isf(tail_tol, lam * float(times.max()))) + 1
    if kmax > max_terms:
        raise CapacityError(
            f"uniformization needs {kmax} terms, exceeding the {max_terms} budget"
        )
    weights = sps.poisson.pmf(
        np.arange(kmax + 1)[:, None], lam * times[None, :]
    )
    mu = np.zeros(dim)
    mu[start_idx] = 1.0
    for k in range(kmax + 1):
        out += weights[k][:, None] * mu[None, :]
        if k < kmax:
            mu = kernel.T @ mu
    return out


@dataclass(frozen=True)
class TVCurve:
    times: tuple[float, ...]
    values: tuple[float, ...]
    start: tuple[int, ...]

    def as_dict(self) -> dict:
        return {
            "start": list(self.start),
            "points": [{"time": t, "tv": v} for t, v in zip(self.times, self.values)],
        }

    def to_csv(self) -> str:
        lines = ["time,tv"]
        lines.extend(f"{t!r},{v!r}" for t, v in zip(self.times, self.values))
        return "\n".join(lines) + "\n"


def tv_curve(gen: Generator, start, times, tail_tol: float = UNIFORMIZATION_TAIL) -> TVCurve:
    """Total variation distance to uniform at each time, from a point start."""
    start = validate_configuration(start, gen.graph)
    dists = transient_distribution(gen, start, times, tail_tol=tail_tol)
    uniform = 1.0 / gen.dimension
    tv = 0.5 * np.abs(dists - uniform).sum(axis=1)
    return TVCurve(
        times=tuple(float(t) for t in np.asarray(times, dtype=float)),
        values=tuple(float(v) for v in tv),
        start=start,
    )


def fit_decay_rate(curve: TVCurve, t_min: float, t_max: float) -> float:
    """Least-squares slope of -log TV(t) over the window [t_min, t_max]."""
    ts = np.asarray(curve.times)
    vs = np.asarray(curve.values)
    mask = (ts >= t_min) & (ts <= t_max) & (vs > 0)
    if mask.sum() < 2:
        raise ValueError("need at least two positive TV points in the window")
    slope, _ = np.polyfit(ts[mask], -np.log(vs[mask]), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# Variational bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """A real statistic of configurations used in the variational bound."""

    name: str
    fn: object  # callable configuration -> float

    def __call__(self, occ) -> float:
        return self.fn(occ)


def evaluate_on_space(gen: Generator, f) -> np.ndarray:
    if isinstance(f, TestFunction) or callable(f):
        return np.array([float(f(c)) for c in gen.configurations])
    values = np.asarray(f, dtype=float)
    if values.shape != (gen.dimension,):
        raise ValueError("test-function vector has the wrong length")
    return values


def rayleigh_quotient(gen: Generator, f) -> float:
    """Dirichlet form over variance of ``f`` under the uniform law.

    Equals (1/2) sum_{x != y} pi(x) q(x, y) (f(y) - f(x))^2 / Var(f); by the
    variational principle this is an upper bound on the spectral gap, with
    equality at the second eigenvector.
    """
    values = evaluate_on_space(gen, f)
    centered = values - values.mean()
    variance = float(centered @ centered) / gen.dimension
    if variance <= 1e-300:
        raise ValueError("test function has zero variance under the uniform law")
    dirichlet = -float(centered @ (gen.matrix @ centered)) / gen.dimension
    return dirichlet / variance


WILSON_VARIANTS = ("half_wave", "full_wave")


def wilson_profile(graph: Torus, variant: str) -> np.ndarray:
    """Per-vertex cosine weights along the first torus axis.

    half_wave uses cos(pi x1 / L) (discontinuous across the wrap edge);
    full_wave uses cos(2 pi x1 / L), the periodic choice.  Both are kept and
    reported side by side.
    """
    if not isinstance(graph, Torus):
        raise ValueError("wilson profiles are defined on the torus family")
    if variant not in WILSON_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    factor = math.pi if variant == "half_wave" else 2.0 * math.pi
    return np.array(
        [math.cos(factor * graph.coords(v)[0] / graph.L) for v in range(graph.vertex_count)]
    )


def wilson_test_function(graph: Torus, variant: str) -> TestFunction:
    phi = wilson_profile(graph, variant)
    return TestFunction(
        name=f"wilson_{variant}",
        fn=lambda occ: float(np.dot(phi, occ)),
    )


@dataclass(frozen=True)
class WilsonBound:
    variant: str
    mode: str
    quotient: float
    dirichlet: float
    variance: float
    stderr: float | None = None
    samples: int | None = None

    def as_dict(self) -> dict:
        out = {
            "variant": self.variant,
            "mode": self.mode,
            "gap_upper_bound": self.quotient,
            "relaxation_lower_bound": 1.0 / self.quotient,
            "dirichlet": self.dirichlet,
            "variance": self.variance,
        }
        if self.stderr is not None:
            out["stderr"] = self.stderr
            out["samples"] = self.samples
        return out


def _linear_statistic_variance(graph: GraphSpec, r: int, phi: np.ndarray) -> float:
    """Exact Var(sum_v phi(v) eta(v)) under the uniform configuration law.

    Site occupancies are exchangeable with pairwise covariance
    -Var(eta(v))/(n-1), forced by the conservation of the particle total.
    """
    n = graph.vertex_count
    e1, e2 = occupancy_marginal_moments(n, r)
    var_site = float(e2 - e1 * e1)
    cov = -var_site / (n - 1)
    sum_sq = float(np.dot(phi, phi))
    total = float(phi.sum())
    return var_site * sum_sq + cov * (total * total - sum_sq)


def _profile_dirichlet_sum(graph: GraphSpec, phi: np.ndarray) -> float:
    total = 0.0
    for v in range(graph.vertex_count):
        for w in graph.neighbors(v):
            diff = phi[w] - phi[v]
            total += diff * diff
    return total / (2.0 * graph.degree)


def wilson_bound(
    graph: Torus,
    r: int,
    variant: str = "full_wave",
    mode: str = "auto",
    samples: int = 20_000,
    seed: int | None = None,
    max_states: int = DEFAULT_MAX_CONFIGURATIONS,
) -> WilsonBound:
    """Rayleigh quotient of the chosen cosine test function: a gap upper
    bound, hence a relaxation-time lower bound.

    Modes: ``enumerate`` evaluates the quotient over the whole configuration
    space; ``closed_form`` uses the exact occupancy-marginal formulas valid
    for any linear statistic (the Dirichlet sum only sees which vertices are
    occupied, and P(eta(v) > 0) = r/(n+r-1)); ``monte_carlo`` estimates both
    pieces from uniform configuration samples and reports a standard error.
    ``auto`` enumerates small spaces and otherwise uses the closed form.
    """
    if r < 1:
        raise ValueError("need at least one particle")
    phi = wilson_profile(graph, variant)
    n = graph.vertex_count
    if mode == "auto":
        mode = "enumerate" if configuration_count(n, r) <= max_states else "closed_form"

    if mode == "enumerate":
        gen = build_generator(graph, r, max_states=max_states)
        values = np.array([float(np.dot(phi, c)) for c in gen.configurations])
        centered = values - values.mean()
        variance = float(centered @ centered) / gen.dimension
        if variance <= 1e-300:
            raise ValueError("zero-variance test function")
        dirichlet = -float(centered @ (gen.matrix @ centered)) / gen.dimension
        return WilsonBound(variant, mode, dirichlet / variance, dirichlet, variance)

    if mode == "closed_form":
        occupied = float(1 - empty_probability_exact(n, r))
        dirichlet = occupied * _profile_dirichlet_sum(graph, phi)
        variance = _linear_statistic_variance(graph, r, phi)
        if variance <= 1e-300:
            raise ValueError("zero-variance test function")
        return WilsonBound(variant, mode, dirichlet / variance, dirichlet, variance)

    if mode == "monte_carlo":
        if seed is None:
            raise ValueError("monte_carlo mode needs a seed")
        rng = make_generator(seed)
        per_vertex = np.zeros(n)
        for v in range(n):
            acc = 0.0
            for w in graph.neighbors(v):
                diff = phi[w] - phi[v]
                acc += diff * diff
            per_vertex[v] = acc / (2.0 * graph.degree)
        dir_samples = np.empty(samples)
        f_samples = np.empty(samples)
        for i in range(samples):
            occ = np.array(random_configuration(n, r, rng))
            dir_samples[i] = float(per_vertex[occ > 0].sum())
            f_samples[i] = float(np.dot(phi, occ))
        dirichlet = float(dir_samples.mean())
        variance = float(f_samples.var(ddof=1))
        if variance <= 1e-300:
            raise ValueError("zero-variance test function")
        quotient = dirichlet / variance
        se_d = float(dir_samples.std(ddof=1)) / math.sqrt(samples)
        centered = f_samples - f_samples.mean()
        se_v = float((centered**2).std(ddof=1)) / math.sqrt(samples)
        stderr = quotient * math.sqrt(
            (se_d / dirichlet) ** 2 + (se_v / variance) ** 2
        )
        return WilsonBound(
            variant, mode, quotient, dirichlet, variance, stderr=stderr, samples=samples
        )

    raise ValueError(f"unknown mode {mode!r}")
