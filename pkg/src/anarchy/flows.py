"""Single-source routing: exact greedy fractional flow, randomized path
rounding, and matroid machinery.

Every player wants d_i units carried from the shared source to its own sink
and values full delivery at v_i (pro rata for fractional delivery). The
fractional relaxation is solved exactly by a greedy that serves players in
decreasing bid density b_i/d_i over a shared residual network; its welfare
equals the path-LP optimum. The randomized rounding routes each player along
a single path with probability r_i/((1+eps) d_i), reading only the
fractional solution, never the bids.

Unit-demand instances induce a matroid (routable sink sets), so the module
also carries a small matroid toolkit: independence oracles, the greedy
basis mechanism, and basis-exchange bijections.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from random import Random
from typing import Callable, Optional, Sequence

from .errors import (
    InfeasibleMatchingError,
    PreconditionError,
    SizeGuardError,
    StructuralError,
)
from .mechanism import AllocationRule, Counterexample, Valuation
from .rationals import F0, F1, bernoulli, frac, frac_str, parse_frac, weighted_index
from .solvers import CapacitatedDigraph, LinearProgram, max_flow, solve_lp
from .solvers import WeightMatrix, max_weight_perfect_matching

PATH_GUARD = 50  # simple s->t paths per player before path-space ops refuse
ASSIGNMENT_GUARD = 1_000_000  # integral assignments enumerated before refusing
SUPPORT_GUARD = 10_000


@dataclass(frozen=True)
class FlowRequest:
    sink: int
    demand: Fraction
    value: Fraction

    def __init__(self, sink, demand, value):
        demand = frac(demand)
        value = frac(value)
        if demand <= 0:
            raise StructuralError("demands must be positive")
        if value < 0:
            raise StructuralError("request values must be nonnegative")
        object.__setattr__(self, "sink", sink)
        object.__setattr__(self, "demand", demand)
        object.__setattr__(self, "value", value)


@dataclass(frozen=True)
class FlowInstance:
    graph: CapacitatedDigraph
    source: int
    requests: tuple

    def __init__(self, graph, source, requests):
        requests = tuple(
            r if isinstance(r, FlowRequest) else FlowRequest(*r) for r in requests
        )
        if not 0 <= source < graph.num_vertices:
            raise StructuralError("source outside the vertex range")
        for r in requests:
            if not 0 <= r.sink < graph.num_vertices:
                raise StructuralError("sink outside the vertex range")
            if r.sink == source:
                raise StructuralError("requests from the source to itself are rejected")
        object.__setattr__(self, "graph", graph)
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "requests", requests)

    @property
    def n(self) -> int:
        return len(self.requests)

    def to_dict(self) -> dict:
        return {
            "vertices": self.graph.num_vertices,
            "edges": [
                {"u": u, "v": v, "cap": frac_str(c)} for u, v, c in self.graph.edges
            ],
            "source": self.source,
            "requests": [
                {
                    "sink": r.sink,
                    "demand": frac_str(r.demand),
                    "value": frac_str(r.value),
                }
                for r in self.requests
            ],
        }

    @staticmethod
    def from_dict(data: dict) -> "FlowInstance":
        graph = CapacitatedDigraph(
            data["vertices"],
            [(e["u"], e["v"], parse_frac(e["cap"])) for e in data["edges"]],
        )
        requests = [
            (r["sink"], parse_frac(r["demand"]), parse_frac(r["value"]))
            for r in data["requests"]
        ]
        return FlowInstance(graph, data["source"], requests)


@dataclass(frozen=True)
class RouteValuation(Valuation):
    """Worth amount for full delivery, pro rata below that."""

    player: int
    amount: Fraction
    domain: str = "flow"

    def __init__(self, player, amount, domain="flow"):
        amount = frac(amount)
        if amount < 0:
            raise StructuralError("bids and values must be nonnegative")
        object.__setattr__(self, "player", player)
        object.__setattr__(self, "amount", amount)
        object.__setattr__(self, "domain", domain)

    def value(self, outcome) -> Fraction:
        if outcome is None:
            return F0
        return self.amount * outcome.routed_fraction(self.player)

    def scale(self, theta) -> "RouteValuation":
        return RouteValuation(self.player, frac(theta) * self.amount)

    def best_case(self) -> Fraction:
        return self.amount


@dataclass(frozen=True)
class FractionalFlow:
    """Per-player edge flows plus the routed amount r_i each sink received."""

    instance: FlowInstance
    edge_flows: tuple  # n x |E|
    routed: tuple  # length n

    def routed_fraction(self, player: int) -> Fraction:
        return self.routed[player] / self.instance.requests[player].demand


@dataclass(frozen=True)
class PathAssignment:
    """Integral outcome: per player one edge-index path carrying d_i, or None.

    dropped lists players the feasibility alteration removed from an
    oversubscribed sample; raw_feasible says whether the sample needed no
    alteration in the first place.
    """

    paths: tuple
    dropped: tuple = ()
    raw_feasible: bool = True

    def routed_fraction(self, player: int) -> Fraction:
        return F1 if self.paths[player] is not None else F0


def truthful_flow_bids(inst: FlowInstance) -> tuple:
    return tuple(RouteValuation(i, r.value) for i, r in enumerate(inst.requests))


def _check_flow_bids(inst: FlowInstance, bids) -> None:
    if len(bids) != inst.n:
        raise StructuralError("one bid per player required")
    for i, b in enumerate(bids):
        if b.player != i or b.domain != "flow":
            raise StructuralError(f"bid {i} does not fit the instance")


class _Residual:
    """Arc-paired residual network shared across sequential augmentations."""

    def __init__(self, graph: CapacitatedDigraph):
        self.num_vertices = graph.num_vertices
        self.head = [[] for _ in range(graph.num_vertices)]
        self.to = []
        self.cap = []
        for u, v, c in graph.edges:
            self.head[u].append(len(self.to))
            self.to.append(v)
            self.cap.append(c)
            self.head[v].append(len(self.to))
            self.to.append(u)
            self.cap.append(F0)

    def push(self, s: int, t: int, limit: Fraction) -> Fraction:
        """Augment s->t by up to limit units; returns the amount pushed."""
        pushed = F0
        while pushed < limit:
            prev = [-1] * self.num_vertices
            prev[s] = -2
            queue = [s]
            qi = 0
            reached = False
            while qi < len(queue) and not reached:
                u = queue[qi]
                qi += 1
                for a in self.head[u]:
                    w = self.to[a]
                    if self.cap[a] > 0 and prev[w] == -1:
                        prev[w] = a
                        if w == t:
                            reached = True
                            break
                        queue.append(w)
            if not reached:
                break
            bottleneck = limit - pushed
            w = t
            while w != s:
                a = prev[w]
                if self.cap[a] < bottleneck:
                    bottleneck = self.cap[a]
                w = self.to[a ^ 1]
            w = t
            while w != s:
                a = prev[w]
                self.cap[a] -= bottleneck
                self.cap[a ^ 1] += bottleneck
                w = self.to[a ^ 1]
            pushed += bottleneck
        return pushed


def _cancel_cycles(num_vertices, heads, tails, f):
    """Remove directed flow cycles in place (f indexed like the edge list)."""
    while True:
        out = [[] for _ in range(num_vertices)]
        for e, amt in enumerate(f):
            if amt > 0:
                out[tails[e]].append(e)
        color = [0] * num_vertices
        stack_edge = {}
        cycle = None

        def dfs(v):
            nonlocal cycle
            color[v] = 1
            for e in out[v]:
                w = heads[e]
                if color[w] == 0:
                    stack_edge[w] = e
                    dfs(w)
                    if cycle is not None:
                        return
                elif color[w] == 1:
                    # walk the stack back from v to w collecting the cycle
                    cyc = [e]
                    x = v
                    while x != w:
                        cyc.append(stack_edge[x])
                        x = tails[stack_edge[x]]
                    cycle = cyc
                    return
            color[v] = 2

        for v in range(num_vertices):
            if color[v] == 0 and cycle is None:
                dfs(v)
        if cycle is None:
            return
        delta = min(f[e] for e in cycle)
        for e in cycle:
            f[e] -= delta


def greedy_fractional_flow(inst: FlowInstance, bids):
    """Serve players in decreasing bid density over one shared residual net.

    Returns (FractionalFlow, welfare) with welfare = sum (b_i/d_i) r_i, which
    equals the optimum of the path LP. Later players may reroute earlier flow
    through residual arcs but never displace the amount already delivered.
    """
    _check_flow_bids(inst, bids)
    n = inst.n
    order = sorted(
        range(n),
        key=lambda i: (-(bids[i].amount / inst.requests[i].demand), i),
    )
    res = _Residual(inst.graph)
    routed = [F0] * n
    for i in order:
        r = inst.requests[i]
        routed[i] = res.push(inst.source, r.sink, r.demand)

    edges = inst.graph.edges
    f = [edges[e][2] - res.cap[2 * e] for e in range(len(edges))]
    tails = [e[0] for e in edges]
    heads = [e[1] for e in edges]
    _cancel_cycles(inst.graph.num_vertices, heads, tails, f)

    # peel source->sink paths off the acyclic aggregate and hand each one to
    # the smallest-index player at its endpoint with delivery still unassigned
    remaining = list(routed)
    by_sink = {}
    for i, r in enumerate(inst.requests):
        by_sink.setdefault(r.sink, []).append(i)
    per_player = [[F0] * len(edges) for _ in range(n)]
    out = [[] for _ in range(inst.graph.num_vertices)]
    for e in range(len(edges)):
        if f[e] > 0:
            out[tails[e]].append(e)
    while out[inst.source]:
        path = []
        v = inst.source
        while out[v]:
            e = out[v][0]
            path.append(e)
            v = heads[e]
        amount = min(f[e] for e in path)
        takers = by_sink.get(v, [])
        left = amount
        for i in takers:
            if left == 0:
                break
            take = min(left, remaining[i])
            if take > 0:
                remaining[i] -= take
                left -= take
                for e in path:
                    per_player[i][e] += take
        assert left == 0, "peeled flow exceeds the recorded deliveries"
        for e in path:
            f[e] -= amount
            if f[e] == 0:
                out[tails[e]].remove(e)

    flow = FractionalFlow(
        inst,
        tuple(tuple(row) for row in per_player),
        tuple(routed),
    )
    check_fractional_flow(inst, flow)
    welfare = sum(
        (bids[i].amount / inst.requests[i].demand * routed[i] for i in range(n)), F0
    )
    return flow, welfare


def check_fractional_flow(inst: FlowInstance, flow: FractionalFlow) -> None:
    """Conservation, joint capacity, and demand caps; raises StructuralError."""
    edges = inst.graph.edges
    for i, req in enumerate(inst.requests):
        net = [F0] * inst.graph.num_vertices
        for e, amt in enumerate(flow.edge_flows[i]):
            if amt < 0:
                raise StructuralError("negative edge flow")
            net[edges[e][0]] -= amt
            net[edges[e][1]] += amt
        for v in range(inst.graph.num_vertices):
            if v == inst.source or v == req.sink:
                continue
            if net[v] != 0:
                raise StructuralError(f"player {i} violates conservation at {v}")
        if net[req.sink] != flow.routed[i]:
            raise StructuralError(f"player {i} delivery mismatch")
        if flow.routed[i] > req.demand:
            raise StructuralError(f"player {i} exceeds its demand")
    for e in range(len(edges)):
        load = sum((flow.edge_flows[i][e] for i in range(inst.n)), F0)
        if load > edges[e][2]:
            raise StructuralError(f"edge {e} over capacity")


def flow_decompose(flow: FractionalFlow, player: int):
    """Path decomposition of one player's flow: list of (edge-path, amount).

    Cycles are canceled first (they carry nothing into the sink); amounts sum
    to r_i and at most |E| paths are returned.
    """
    inst = flow.instance
    edges = inst.graph.edges
    tails = [e[0] for e in edges]
    heads = [e[1] for e in edges]
    f = list(flow.edge_flows[player])
    _cancel_cycles(inst.graph.num_vertices, heads, tails, f)
    out = [[] for _ in range(inst.graph.num_vertices)]
    for e in range(len(edges)):
        if f[e] > 0:
            out[tails[e]].append(e)
    result = []
    while out[inst.source]:
        path = []
        v = inst.source
        while out[v]:
            e = out[v][0]
            path.append(e)
            v = heads[e]
        if v != inst.requests[player].sink:
            raise StructuralError("player flow ends away from its sink")
        amount = min(f[e] for e in path)
        result.append((tuple(path), amount))
        for e in path:
            f[e] -= amount
            if f[e] == 0:
                out[tails[e]].remove(e)
    return result


def enumerate_paths(inst: FlowInstance, sink: int, guard: int = PATH_GUARD):
    """All simple source->sink paths as edge-index tuples, lexicographic."""
    edges = inst.graph.edges
    out = [[] for _ in range(inst.graph.num_vertices)]
    for e, (u, v, c) in enumerate(edges):
        out[u].append(e)
    paths = []
    seen = [False] * inst.graph.num_vertices
    stack = []

    def walk(v):
        if v == sink:
            paths.append(tuple(stack))
            if len(paths) > guard:
                raise SizeGuardError(f"more than {guard} paths to sink {sink}")
            return
        seen[v] = True
        for e in out[v]:
            w = edges[e][1]
            if not seen[w]:
                stack.append(e)
                walk(w)
                stack.pop()
        seen[v] = False

    walk(inst.source)
    return paths


def path_lp(inst: FlowInstance, bids):
    """Path-variable LP: per-unit objective, demand caps, edge capacities."""
    _check_flow_bids(inst, bids)
    variables = []  # (player, path)
    for i in range(inst.n):
        for p in enumerate_paths(inst, inst.requests[i].sink):
            variables.append((i, p))
    objective = [
        bids[i].amount / inst.requests[i].demand for i, _ in variables
    ]
    rows = []
    rhs = []
    for i in range(inst.n):
        rows.append([F1 if j == i else F0 for j, _ in variables])
        rhs.append(inst.requests[i].demand)
    for e in range(len(inst.graph.edges)):
        rows.append([F1 if e in p else F0 for _, p in variables])
        rhs.append(inst.graph.edges[e][2])
    return LinearProgram(objective, rows, rhs), variables


def solve_path_lp(inst: FlowInstance, bids) -> Fraction:
    program, variables = path_lp(inst, bids)
    if not variables:  # nothing is routable
        return F0
    sol = solve_lp(program)
    assert sol.optimal  # bounded by demand rows, feasible at zero
    return sol.value


def rt_round(flow: FractionalFlow, inst: FlowInstance, epsilon, seed) -> PathAssignment:
    """Scaled randomized path selection with greedy feasibility alteration.

    Independently per player: route fully with probability r_i/((1+eps) d_i),
    picking a decomposition path with probability proportional to its amount.
    If the sample violates some capacity, routed players are dropped in
    increasing r_i/d_i order (ties by index) until it fits. Reads neither
    bids nor values, so the outcome is oblivious given (flow, seed).
    """
    epsilon = frac(epsilon)
    if epsilon <= 0:
        raise PreconditionError("epsilon must be positive")
    if flow.instance != inst:
        raise StructuralError("flow was computed for a different instance")
    rng = Random(seed)
    paths = []
    for i, req in enumerate(inst.requests):
        p_route = flow.routed[i] / ((1 + epsilon) * req.demand)
        if flow.routed[i] > 0 and bernoulli(rng, p_route):
            pieces = flow_decompose(flow, i)
            k = weighted_index(rng, [amt for _, amt in pieces])
            paths.append(pieces[k][0])
        else:
            paths.append(None)
    return _alter_to_feasible(inst, flow, paths)


def _alter_to_feasible(inst: FlowInstance, flow: FractionalFlow, paths) -> PathAssignment:
    # drop order reads only the fractional solution: least-served densities
    # r_i/d_i go first, never the bids or values
    edges = inst.graph.edges
    dropped = []

    def overloaded(current):
        load = [F0] * len(edges)
        for i, p in enumerate(current):
            if p is None:
                continue
            for e in p:
                load[e] += inst.requests[i].demand
        return any(load[e] > edges[e][2] for e in range(len(edges)))

    raw_feasible = not overloaded(paths)
    while overloaded(paths):
        candidates = [i for i, p in enumerate(paths) if p is not None]
        victim = min(candidates, key=lambda i: (flow.routed_fraction(i), i))
        paths = list(paths)
        paths[victim] = None
        dropped.append(victim)
    return PathAssignment(tuple(paths), tuple(dropped), raw_feasible)


def rt_support(flow: FractionalFlow, inst: FlowInstance, epsilon):
    """Exact (probability, PathAssignment) support of rt_round."""
    epsilon = frac(epsilon)
    if epsilon <= 0:
        raise PreconditionError("epsilon must be positive")
    options = []
    for i, req in enumerate(inst.requests):
        p_route = flow.routed[i] / ((1 + epsilon) * req.demand)
        opts = [(1 - p_route, None)]
        if flow.routed[i] > 0:
            for path, amt in flow_decompose(flow, i):
                opts.append((amt / ((1 + epsilon) * req.demand), path))
        options.append([(p, c) for p, c in opts if p > 0])
    count = 1
    for opts in options:
        count *= len(opts)
        if count > SUPPORT_GUARD:
            raise SizeGuardError("rounding support too large to enumerate")
    support = []

    def build(i, prob, chosen):
        if i == len(options):
            support.append((prob, _alter_to_feasible(inst, flow, list(chosen))))
            return
        for p, c in options[i]:
            build(i + 1, prob * p, chosen + [c])

    build(0, F1, [])
    return support


def fractional_rule(inst: FlowInstance) -> AllocationRule:
    return AllocationRule(
        domain="flow",
        allocate=lambda bids, seed=None: greedy_fractional_flow(inst, bids)[0],
        exact=True,
        name="flow-greedy",
    )


def rt_rule(inst: FlowInstance, epsilon) -> AllocationRule:
    """Relax-and-round mechanism: greedy fractional relax, rt_round round."""
    epsilon = frac(epsilon)

    def relax(bids):
        return greedy_fractional_flow(inst, bids)[0]

    return AllocationRule(
        domain="flow",
        allocate=lambda bids, seed=None: rt_round(relax(bids), inst, epsilon, seed),
        exact=False,
        randomized=True,
        support=lambda bids: rt_support(relax(bids), inst, epsilon),
        opt_welfare=lambda values: greedy_fractional_flow(inst, values)[1],
        relax=relax,
        round_stage=lambda relaxed, seed: rt_round(relaxed, inst, epsilon, seed),
        name="flow-rt",
    )


# ------------------------------------------------------------------ integral


@lru_cache(maxsize=32)
def _feasible_assignments(inst: FlowInstance):
    """Every capacity-respecting choice of one path (or none) per player.

    Entries are choice tuples: 0 routes nothing, k routes the k-th enumerated
    path. Listed in lexicographic order so a strict-improvement scan finds
    the lexicographically smallest maximizer.
    """
    per_player_paths = [
        enumerate_paths(inst, r.sink) for r in inst.requests
    ]
    edges = inst.graph.edges
    found = []
    choice = [0] * inst.n
    load = [F0] * len(edges)

    def recurse(i):
        if len(found) > ASSIGNMENT_GUARD:
            raise SizeGuardError("too many feasible path assignments")
        if i == inst.n:
            found.append(tuple(choice))
            return
        choice[i] = 0
        recurse(i + 1)
        d = inst.requests[i].demand
        for k, path in enumerate(per_player_paths[i]):
            if all(load[e] + d <= edges[e][2] for e in path):
                for e in path:
                    load[e] += d
                choice[i] = k + 1
                recurse(i + 1)
                for e in path:
                    load[e] -= d
        choice[i] = 0

    recurse(0)
    return tuple(found), tuple(tuple(p) for p in per_player_paths)


def solve_flow_integral(inst: FlowInstance, bids):
    """Exact declared-welfare maximizer over single-path assignments.

    Ties break to the lexicographically smallest choice tuple (routing
    nothing sorts before any path).
    """
    _check_flow_bids(inst, bids)
    assignments, paths = _feasible_assignments(inst)
    best = None
    best_choice = None
    for ch in assignments:
        value = sum((bids[i].amount for i in range(inst.n) if ch[i] > 0), F0)
        if best is None or value > best:
            best = value
            best_choice = ch
    chosen = tuple(
        paths[i][best_choice[i] - 1] if best_choice[i] > 0 else None
        for i in range(inst.n)
    )
    return PathAssignment(chosen), best


def integral_flow_rule(inst: FlowInstance) -> AllocationRule:
    return AllocationRule(
        domain="flow",
        allocate=lambda bids, seed=None: solve_flow_integral(inst, bids)[0],
        exact=True,
        name="flow-integral",
    )


def gen_flow_counterexample(m: int) -> Counterexample:
    """One unit edge, m light players (demand 1/m) and two heavy ones.

    Small players value full delivery at 1, the two heavy players demand the
    whole edge and value it at 2. Heavy players bidding truthfully while the
    small players bid zero is a pure Nash equilibrium of the pay-your-bid
    mechanism over single-path assignments: welfare 2 versus the optimum m
    of routing every small player.
    """
    if m < 2:
        raise StructuralError("need at least two small players")
    graph = CapacitatedDigraph(2, [(0, 1, F1)])
    small = Fraction(1, m)
    requests = [(1, small, F1) for _ in range(m)]
    requests += [(1, F1, Fraction(2)), (1, F1, Fraction(2))]
    inst = FlowInstance(graph, 0, requests)
    values = truthful_flow_bids(inst)
    bids = tuple(
        RouteValuation(i, F0) if i < m else values[i] for i in range(m + 2)
    )
    rule = integral_flow_rule(inst)
    _, optimum = solve_flow_integral(inst, values)
    outcome = rule.allocate(bids, None)
    eq_welfare = sum((v.value(outcome) for v in values), F0)
    return Counterexample(inst, values, bids, rule, optimum, eq_welfare, optimum / eq_welfare)


def counterexample_flow_deviations(ce: Counterexample, resolution: int = 20):
    """Scaled-value bids plus flat bids at the construction's levels 0, 1, 2."""
    grids = []
    for i, v in enumerate(ce.values):
        cand = [v.scale(Fraction(j, resolution)) for j in range(resolution + 1)]
        cand += [RouteValuation(i, level) for level in (0, 1, 2)]
        grids.append(cand)
    return grids


def gen_flow_instances(count: int, seed: int, max_vertices: int = 7, max_players: int = 4):
    """Seeded random instances, kept within the path-enumeration guard."""
    rng = Random(seed)
    out = []
    while len(out) < count:
        nv = rng.randint(3, max_vertices)
        edges = []
        for u in range(nv):
            for v in range(nv):
                if u == v:
                    continue
                bias = 60 if u < v else 15
                if rng.randrange(100) < bias:
                    cap = Fraction(rng.randint(1, 6), rng.choice((1, 2)))
                    edges.append((u, v, cap))
        if not edges:
            continue
        graph = CapacitatedDigraph(nv, edges)
        players = rng.randint(1, max_players)
        requests = []
        for _ in range(players):
            sink = rng.randint(1, nv - 1)
            demand = Fraction(rng.randint(1, 4), rng.choice((1, 2)))
            value = Fraction(rng.randint(0, 12), rng.choice((1, 2)))
            requests.append((sink, demand, value))
        inst = FlowInstance(graph, 0, requests)
        try:
            for r in inst.requests:
                enumerate_paths(inst, r.sink)
        except SizeGuardError:
            continue
        out.append(inst)
    return out


# ------------------------------------------------------------------ matroids


@dataclass(frozen=True)
class MatroidOracle:
    """Ground set plus an independence test over frozensets of elements."""

    ground: tuple
    independent: Callable
    name: str = ""


@dataclass(frozen=True)
class MatroidValuation(Valuation):
    player: int
    amount: Fraction
    domain: str = "matroid"

    def __init__(self, player, amount, domain="matroid"):
        amount = frac(amount)
        if amount < 0:
            raise StructuralError("bids and values must be nonnegative")
        object.__setattr__(self, "player", player)
        object.__setattr__(self, "amount", amount)
        object.__setattr__(self, "domain", domain)

    def value(self, outcome) -> Fraction:
        if outcome is None:
            return F0
        return self.amount if self.player in outcome else F0

    def scale(self, theta) -> "MatroidValuation":
        return MatroidValuation(self.player, frac(theta) * self.amount)

    def best_case(self) -> Fraction:
        return self.amount


def uniform_matroid(n: int, rank: int) -> MatroidOracle:
    return MatroidOracle(
        tuple(range(n)),
        lambda s: len(s) <= rank,
        name=f"uniform({n},{rank})",
    )


def graphic_matroid(num_vertices: int, edge_list) -> MatroidOracle:
    edge_list = tuple((u, v) for u, v in edge_list)
    for u, v in edge_list:
        if not (0 <= u < num_vertices and 0 <= v < num_vertices) or u == v:
            raise StructuralError("bad edge in graphic matroid")

    def independent(s):
        parent = list(range(num_vertices))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in s:
            u, v = edge_list[e]
            ru, rv = find(u), find(v)
            if ru == rv:
                return False
            parent[ru] = rv
        return True

    return MatroidOracle(tuple(range(len(edge_list))), independent, name="graphic")


def gammoid(inst: FlowInstance) -> MatroidOracle:
    """Routable sink sets of a unit-demand instance form a matroid.

    A player set is independent when one unit can be delivered to each of
    its sinks simultaneously, checked by an exact max-flow with a fresh
    super-sink. Demands other than 1 are rejected: scaling breaks the
    exchange property for mixed demands.
    """
    for r in inst.requests:
        if r.demand != 1:
            raise PreconditionError("gammoid ground set needs unit demands")
    base = inst.graph

    def independent(s):
        players = sorted(s)
        if not players:
            return True
        super_sink = base.num_vertices
        edges = list(base.edges)
        for i in players:
            edges.append((inst.requests[i].sink, super_sink, F1))
        g = CapacitatedDigraph(base.num_vertices + 1, edges)
        return max_flow(g, inst.source, super_sink).value == len(players)

    return MatroidOracle(tuple(range(inst.n)), independent, name="gammoid")


def check_matroid_axioms(oracle: MatroidOracle, trials: int = 60, seed: int = 0) -> bool:
    """Spot tests: hereditary closure and the exchange property."""
    rng = Random(seed)
    ground = list(oracle.ground)
    if not oracle.independent(frozenset()):
        return False

    def random_independent():
        s = set()
        for e in rng.sample(ground, len(ground)):
            if rng.randrange(2) and oracle.independent(frozenset(s | {e})):
                s.add(e)
        return s

    for _ in range(trials):
        big = random_independent()
        if big:
            sub = {e for e in big if rng.randrange(2)}
            if not oracle.independent(frozenset(sub)):
                return False
        small = random_independent()
        if len(small) < len(big):
            if not any(
                oracle.independent(frozenset(small | {e})) for e in big - small
            ):
                return False
    return True


def matroid_rule(oracle: MatroidOracle) -> AllocationRule:
    index = {e: i for i, e in enumerate(oracle.ground)}

    def allocate(bids, seed=None):
        if not oracle.independent(frozenset()):
            raise StructuralError("oracle rejects the empty set")
        chosen = set()
        order = sorted(oracle.ground, key=lambda e: (-bids[index[e]].amount, index[e]))
        for e in order:
            if bids[index[e]].amount <= 0:
                continue
            if oracle.independent(frozenset(chosen | {e})):
                chosen.add(e)
        return frozenset(chosen)

    return AllocationRule(domain="matroid", allocate=allocate, exact=True, name="matroid-greedy")


def matroid_greedy(oracle: MatroidOracle, bids, values=None):
    """Greedy basis under pay-your-bid; returns (chosen set, MechanismRun)."""
    from .mechanism import run_pay_your_bid

    rule = matroid_rule(oracle)
    run = run_pay_your_bid(rule, bids, values if values is not None else bids)
    return run.outcome, run


def exchange_matching(oracle: MatroidOracle, basis_i, basis_j) -> dict:
    """Bijection m with basis_i - i + m(i) independent for every i.

    Existence is part of the matroid exchange structure; failure to find one
    therefore flags a broken oracle.
    """
    I = sorted(basis_i)
    J = sorted(basis_j)
    if len(I) != len(set(I)) or len(J) != len(set(J)):
        raise PreconditionError("bases must not repeat elements")
    if len(I) != len(J):
        raise PreconditionError("bases must have equal rank")
    for s in (I, J):
        fs = frozenset(s)
        if not oracle.independent(fs):
            raise PreconditionError("input set is not independent")
        for e in oracle.ground:
            if e not in fs and oracle.independent(fs | {e}):
                raise PreconditionError("input set is not maximal")
    # identity on the intersection; true exchanges only across the difference
    common = sorted(set(I) & set(J))
    only_i = sorted(set(I) - set(J))
    only_j = sorted(set(J) - set(I))
    mapping = {e: e for e in common}
    if only_i:
        entries = []
        for i in only_i:
            row = []
            for j in only_j:
                ok = oracle.independent(frozenset(set(I) - {i} | {j}))
                row.append(F1 if ok else None)
            entries.append(row)
        try:
            perm, _ = max_weight_perfect_matching(WeightMatrix(entries))
        except InfeasibleMatchingError:
            raise StructuralError("no exchange bijection: oracle is not a matroid")
        for a in range(len(only_i)):
            mapping[only_i[a]] = only_j[perm[a]]
    for i, j in mapping.items():
        assert oracle.independent(frozenset(set(I) - {i} | {j}))
    return mapping
