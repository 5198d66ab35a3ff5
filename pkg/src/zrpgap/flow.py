"""Multicommodity-flow comparison between the torus and the complete graph.

One unit of flow is routed between every ordered pair of distinct torus
vertices, spread evenly over all shortest paths.  The per-edge load of that
flow controls the congestion constant in the relaxation-time comparison

    tau_torus <= 2d * congestion * length * tau_complete <= 2 d^2 L^2 tau_complete,

where congestion is the maximum (undirected) edge load normalized by
L^d - 1 and length is the longest flow-carrying path, bounded by the
diameter <= dL.  All loads are exact rationals: the flow share of a
directed edge (a, b) for the pair (u, v) is N(u,a) N(b,v) / N(u,v) in
shortest-path counts, so no path enumeration is needed for the loads
themselves.  The configuration-level check below *does* enumerate paths, as
an independent route to the same numbers.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .configurations import enumerate_configurations
from .errors import CapacityError
from .graphs import Torus, bfs_distance_counts


def _all_pairs(graph):
    dists = []
    counts = []
    for u in range(graph.vertex_count):
        d, c = bfs_distance_counts(graph, u)
        dists.append(d)
        counts.append(c)
    return dists, counts


def _directed_edges(graph):
    out = []
    for a in range(graph.vertex_count):
        for b in set(graph.neighbors(a)):
            out.append((a, b))
    return out


@dataclass(frozen=True)
class EdgeLoadReport:
    graph: Torus
    directed: dict
    undirected: dict
    max_directed: Fraction
    max_undirected: Fraction
    uniform: bool
    bound: int

    def as_dict(self) -> dict:
        return {
            "graph": self.graph.as_json(),
            "max_directed_load": _frac_json(self.max_directed),
            "max_undirected_load": _frac_json(self.max_undirected),
            "all_edges_equal": self.uniform,
            "load_bound": self.bound,
            "degenerate_torus": self.graph.degenerate,
        }


def _frac_json(value: Fraction) -> dict:
    return {
        "num": value.numerator,
        "den": value.denominator,
        "decimal": float(value),
    }


def format_rational(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def edge_loads(graph: Torus) -> EdgeLoadReport:
    """Exact per-edge load of the uniform shortest-path flow.

    For each directed edge the load sums, over ordered vertex pairs (u, v),
    the fraction of shortest u->v paths passing through it.  The undirected
    load adds both directions; by vertex-transitivity every undirected edge
    carries the same load, which is also verified here.
    """
    if not isinstance(graph, Torus):
        raise ValueError("edge loads are defined for the torus family")
    n = graph.vertex_count
    dists, counts = _all_pairs(graph)
    directed = {}
    for a, b in _directed_edges(graph):
        load = Fraction(0)
        for u in range(n):
            du = dists[u]
            cu = counts[u]
            for v in range(n):
                if u == v:
                    continue
                if du[a] + 1 + dists[b][v] == du[v]:
                    load += Fraction(cu[a] * counts[b][v], cu[v])
        directed[(a, b)] = load
    undirected = {}
    for (a, b), load in directed.items():
        if a < b:
            undirected[(a, b)] = load + directed[(b, a)]
    values = list(undirected.values())
    uniform = all(v == values[0] for v in values)
    return EdgeLoadReport(
        graph=graph,
        directed=directed,
        undirected=undirected,
        max_directed=max(directed.values()),
        max_undirected=max(values),
        uniform=uniform,
        bound=graph.L * (n - 1),
    )


@dataclass(frozen=True)
class ComparisonCertificate:
    d: int
    L: int
    congestion: Fraction
    length: int
    bound_factor: Fraction
    headline_factor: int
    tau2: float | None
    tau1_bound: float | None
    degenerate: bool

    def as_dict(self) -> dict:
        out = {
            "d": self.d,
            "L": self.L,
            "congestion": _frac_json(self.congestion),
            "length": self.length,
            "bound_factor": _frac_json(self.bound_factor),
            "headline_factor": self.headline_factor,
            "degenerate_torus": self.degenerate,
        }
        if self.tau2 is not None:
            out["tau2"] = self.tau2
            out["tau1_bound"] = self.tau1_bound
        return out

    def csv_row(self) -> str:
        return ",".join(
            [
                str(self.d),
                str(self.L),
                format_rational(self.congestion),
                str(self.length),
                format_rational(self.bound_factor),
                str(self.headline_factor),
            ]
        )


CERTIFICATE_CSV_HEADER = "d,L,congestion,length,bound_factor,headline_factor"


def comparison_certificate(
    graph: Torus, tau2: float | None = None, loads: EdgeLoadReport | None = None
) -> ComparisonCertificate:
    """Congestion/length certificate for the torus-vs-complete comparison."""
    if loads is None:
        loads = edge_loads(graph)
    n = graph.vertex_count
    congestion = loads.max_undirected / (n - 1)
    dists, _ = _all_pairs(graph)
    length = max(max(row) for row in dists)
    bound_factor = 2 * graph.d * congestion * length
    headline = 2 * graph.d * graph.d * graph.L * graph.L
    tau1_bound = float(bound_factor) * tau2 if tau2 is not None else None
    return ComparisonCertificate(
        d=graph.d,
        L=graph.L,
        congestion=congestion,
        length=length,
        bound_factor=bound_factor,
        headline_factor=headline,
        tau2=tau2,
        tau1_bound=tau1_bound,
        degenerate=graph.degenerate,
    )


def all_shortest_paths(graph, u, v, dists=None):
    """Every shortest u->v path as a vertex tuple (exhaustive; small graphs)."""
    if dists is None:
        dists = _all_pairs(graph)[0]
    target_dist = dists[u][v]
    paths = []

    def extend(x, acc):
        if x == v:
            paths.append(tuple(acc))
            return
        for w in set(graph.neighbors(x)):
            if dists[u][w] == dists[u][x] + 1 and dists[w][v] == dists[x][v] - 1:
                acc.append(w)
                extend(w, acc)
                acc.pop()

    extend(u, [u])
    assert all(len(p) == target_dist + 1 for p in paths)
    return paths


@dataclass(frozen=True)
class InducedFlowCheck:
    graph: Torus
    r: int
    config_edges: int
    max_config_flow: Fraction
    predicted_flow: Fraction
    per_edge_equal: bool
    congestion_config: Fraction
    congestion_vertex: Fraction

    def as_dict(self) -> dict:
        return {
            "graph": self.graph.as_json(),
            "r": self.r,
            "config_edges": self.config_edges,
            "max_config_flow": _frac_json(self.max_config_flow),
            "predicted_flow": _frac_json(self.predicted_flow),
            "per_edge_equal": self.per_edge_equal,
            "congestion_config": _frac_json(self.congestion_config),
            "congestion_vertex": _frac_json(self.congestion_vertex),
        }


def induced_flow_check(graph: Torus, r: int, max_states: int = 50_000) -> InducedFlowCheck:
    """Route the induced flow explicitly on the configuration graph.

    Every ordered complete-graph transition (eta, eta') moving one particle
    u -> v is routed through configurations zeta + chi_w along each shortest
    u->v vertex path (zeta = eta with the moving particle removed), with the
    unit split evenly over paths.  The resulting per-configuration-edge flow
    must exactly equal the vertex-level directed edge load, for every edge.
    """
    if r < 1:
        raise ValueError("need at least one particle")
    n = graph.vertex_count
    configs = enumerate_configurations(n, r, limit=max_states)
    index = {c: i for i, c in enumerate(configs)}
    pair_count = len(configs) * n * (n - 1)
    if pair_count > 2_000_000:
        raise CapacityError(f"{pair_count} routed pairs exceed the capacity limit")
    dists, counts = _all_pairs(graph)

    flows: dict[tuple[int, int], Fraction] = {}
    path_cache: dict[tuple[int, int], list] = {}
    for occ in configs:
        for u in range(n):
            if occ[u] == 0:
                continue
            base = list(occ)
            base[u] -= 1
            for v in range(n):
                if v == u:
                    continue
                key = (u, v)
                if key not in path_cache:
                    path_cache[key] = all_shortest_paths(graph, u, v, dists)
                paths = path_cache[key]
                share = Fraction(1, len(paths))
                for path in paths:
                    for a, b in zip(path, path[1:]):
                        za = list(base)
                        za[a] += 1
                        zb = list(base)
                        zb[b] += 1
                        edge = (index[tuple(za)], index[tuple(zb)])
                        flows[edge] = flows.get(edge, Fraction(0)) + share

    loads = edge_loads(graph)
    per_edge_equal = True
    max_flow = Fraction(0)
    for (i, k), flow in flows.items():
        diff = [x - y for x, y in zip(configs[k], configs[i])]
        a = diff.index(-1)
        b = diff.index(1)
        if flow != loads.directed[(a, b)]:
            per_edge_equal = False
        max_flow = max(max_flow, flow)

    return InducedFlowCheck(
        graph=graph,
        r=r,
        config_edges=len(flows),
        max_config_flow=max_flow,
        predicted_flow=loads.max_directed,
        per_edge_equal=per_edge_equal,
        congestion_config=2 * max_flow / (n - 1),
        congestion_vertex=loads.max_undirected / (n - 1),
    )
