"""Independent brute-force oracles used to freeze expected test values.

Everything here is deliberately naive: exhaustive enumeration and dense
Gaussian elimination over Fractions. The point is that none of this code
shares logic with the package under test.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations, permutations

F0 = Fraction(0)


def solve_square(matrix, rhs):
    """Exact Gaussian elimination; returns None when the system is singular."""
    n = len(matrix)
    aug = [list(row) + [rhs[i]] for i, row in enumerate(matrix)]
    for col in range(n):
        piv = None
        for r in range(col, n):
            if aug[r][col] != 0:
                piv = r
                break
        if piv is None:
            return None
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = Fraction(1) / aug[col][col]
        aug[col] = [a * inv for a in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [aug[i][n] for i in range(n)]


def lp_opt_by_vertex_enum(objective, rows, rhs):
    """Optimum of max c.x, Ax <= b, x >= 0 for bounded feasible programs.

    Enumerates every basic point (intersection of n tight constraints drawn
    from the rows and the axes), keeps the feasible ones, and returns the
    best objective value. Returns None when no vertex is feasible.
    """
    n = len(objective)
    cons = [(list(row), rhs[i]) for i, row in enumerate(rows)]
    for j in range(n):
        axis = [F0] * n
        axis[j] = Fraction(-1)
        cons.append((axis, F0))

    best = None
    for idx in combinations(range(len(cons)), n):
        mat = [cons[i][0] for i in idx]
        vec = [cons[i][1] for i in idx]
        x = solve_square(mat, vec)
        if x is None:
            continue
        if any(v < 0 for v in x):
            continue
        if any(sum(a * v for a, v in zip(row, x)) > b for row, b in cons):
            continue
        val = sum(c * v for c, v in zip(objective, x))
        if best is None or val > best:
            best = val
    return best


def matching_by_permutations(entries):
    """Max-weight perfect matching by enumeration; entries[i][j] is None when
    the cell is forbidden. Returns (perm, value) with the lexicographically
    smallest argmax, or None if no permutation avoids the forbidden cells."""
    n = len(entries)
    best = None
    best_perm = None
    for perm in permutations(range(n)):
        total = F0
        ok = True
        for i, j in enumerate(perm):
            w = entries[i][j]
            if w is None:
                ok = False
                break
            total += w
        if ok and (best is None or total > best):
            best = total
            best_perm = perm
    if best is None:
        return None
    return best_perm, best


def min_cut_value(num_vertices, edges, s, t):
    """Minimum s-t cut by enumerating all vertex bipartitions."""
    others = [v for v in range(num_vertices) if v not in (s, t)]
    best = None
    for mask in range(1 << len(others)):
        side = {s}
        for i, v in enumerate(others):
            if mask >> i & 1:
                side.add(v)
        cut = F0
        for u, v, c in edges:
            if u in side and v not in side:
                cut += c
        if best is None or cut < best:
            best = cut
    return best


def check_flow_valid(num_vertices, edges, s, t, flows, value):
    """Capacity and conservation checks for a claimed s-t flow."""
    assert len(flows) == len(edges)
    net = [F0] * num_vertices
    for (u, v, c), f in zip(edges, flows):
        assert F0 <= f <= c, f"flow {f} outside [0, {c}]"
        net[u] -= f
        net[v] += f
    for w in range(num_vertices):
        if w == s:
            assert net[w] == -value
        elif w == t:
            assert net[w] == value
        else:
            assert net[w] == F0


def derangements(n):
    return [p for p in permutations(range(n)) if all(p[i] != i for i in range(n))]


def packing_dual_value(b, A, c, y, z):
    """Value of a dual certificate for max b.x st A x <= c, sum_k x_ik <= 1.

    y prices the capacity rows, z the per-player rows. Asserts feasibility
    (y, z >= 0 and y.A_col + z_i >= b_ik for every option); by weak duality
    the returned value upper-bounds the LP optimum, and exhibiting a primal
    point of equal value pins the optimum exactly.
    """
    assert all(v >= 0 for v in y) and all(v >= 0 for v in z)
    n, K = len(b), len(b[0]) if b else 0
    for i in range(n):
        for k in range(K):
            covered = sum((y[l] * A[l][i][k] for l in range(len(A))), F0) + z[i]
            assert covered >= b[i][k], f"dual infeasible at option ({i}, {k})"
    return sum((y[l] * c[l] for l in range(len(c))), F0) + sum(z, F0)


def best_integral_packing(b, A, c):
    """Exhaustive integral packing optimum.

    Choice tuples assign each player 0 (nothing) or k+1 (option k); iteration
    in natural tuple order with strict improvement keeps the lexicographically
    smallest argmax. Returns (choices, value).
    """
    from itertools import product

    n, K = len(b), len(b[0]) if b else 0
    best = None
    best_choices = None
    for choices in product(range(K + 1), repeat=n):
        loads = [F0] * len(c)
        value = F0
        ok = True
        for i, ch in enumerate(choices):
            if ch == 0:
                continue
            value += b[i][ch - 1]
            for l in range(len(c)):
                loads[l] += A[l][i][ch - 1]
                if loads[l] > c[l]:
                    ok = False
                    break
            if not ok:
                break
        if ok and (best is None or value > best):
            best = value
            best_choices = choices
    return best_choices, best
