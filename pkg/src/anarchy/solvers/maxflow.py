"""Exact maximum flow on capacitated digraphs.

Edmonds-Karp (shortest augmenting paths by BFS) with Fraction capacities.
Parallel edges are kept apart so per-edge flows can be reported back in the
order the edges were supplied; adjacency is scanned in insertion order,
which makes the computed flow deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from ..errors import StructuralError
from ..rationals import F0, frac


@dataclass(frozen=True)
class CapacitatedDigraph:
    num_vertices: int
    edges: tuple  # of (u, v, capacity)

    def __init__(self, num_vertices: int, edges: Sequence):
        if num_vertices < 0:
            raise StructuralError("vertex count must be nonnegative")
        out = []
        for e in edges:
            u, v, c = e
            if not (0 <= u < num_vertices and 0 <= v < num_vertices):
                raise StructuralError(f"edge ({u}, {v}) leaves the vertex range")
            if u == v:
                raise StructuralError("self-loop edges are not allowed")
            c = frac(c)
            if c < 0:
                raise StructuralError("capacities must be nonnegative")
            out.append((u, v, c))
        object.__setattr__(self, "num_vertices", num_vertices)
        object.__setattr__(self, "edges", tuple(out))


@dataclass(frozen=True)
class MaxFlowResult:
    value: Fraction
    edge_flows: tuple  # aligned with the graph's edge list


def max_flow(g: CapacitatedDigraph, s: int, t: int) -> MaxFlowResult:
    V = g.num_vertices
    if not (0 <= s < V) or not (0 <= t < V):
        raise StructuralError("source or sink outside the vertex range")
    if s == t:
        raise StructuralError("source and sink must differ")

    head = [[] for _ in range(V)]
    to = []
    cap = []
    for u, v, c in g.edges:
        head[u].append(len(to))
        to.append(v)
        cap.append(c)
        head[v].append(len(to))
        to.append(u)
        cap.append(F0)

    value = F0
    while True:
        prev_arc = [-1] * V
        prev_arc[s] = -2
        queue = [s]
        qi = 0
        reached = False
        while qi < len(queue) and not reached:
            u = queue[qi]
            qi += 1
            for a in head[u]:
                w = to[a]
                if cap[a] > 0 and prev_arc[w] == -1:
                    prev_arc[w] = a
                    if w == t:
                        reached = True
                        break
                    queue.append(w)
        if not reached:
            break
        bottleneck = None
        w = t
        while w != s:
            a = prev_arc[w]
            if bottleneck is None or cap[a] < bottleneck:
                bottleneck = cap[a]
            w = to[a ^ 1]
        w = t
        while w != s:
            a = prev_arc[w]
            cap[a] -= bottleneck
            cap[a ^ 1] += bottleneck
            w = to[a ^ 1]
        value += bottleneck

    flows = tuple(g.edges[i][2] - cap[2 * i] for i in range(len(g.edges)))
    return MaxFlowResult(value, flows)
