"""Combinatorial auctions: configuration LP, symmetric case, fair rounding.

Valuations are max-over-clauses of bounded hyperedge sums (level k of the
complementarity hierarchy; k = 1 is fractionally subadditive). The symmetric
specialization only depends on how many items a player gets, making its two
natural relaxations interchangeable and the cardinality one a one-row
packing program.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, product
from math import comb
from random import Random

from .errors import PreconditionError, SizeGuardError, StructuralError
from .mechanism import (
    AllocationRule,
    CostCertificate,
    Counterexample,
    Valuation,
)
from .packing import (
    OptionValuation,
    multiunit_instance,
    solve_packing_integral,
    solve_packing_lp,
)
from .rationals import F0, F1, frac, frac_str, parse_frac, weighted_index
from .solvers import LinearProgram, solve_lp

ITEM_LIMIT = 10  # subset enumeration guard for the configuration LP
SUPPORT_GUARD = 10_000


@lru_cache(maxsize=16)
def item_subsets(m: int) -> tuple:
    """All subsets of [m] ordered by size then contents; the variable order."""
    if m > ITEM_LIMIT:
        raise SizeGuardError("subset enumeration is limited to 10 items")
    out = []
    for size in range(m + 1):
        for combo in combinations(range(m), size):
            out.append(frozenset(combo))
    return tuple(out)


# ---------------------------------------------------------------- valuations


@dataclass(frozen=True)
class MPHkValuation(Valuation):
    """Max over clauses of summed hyperedge values, hyperedges of size <= k.

    clauses is a tuple of clauses, each a tuple of (frozenset, value) pairs.
    k = 1 with singleton hyperedges is the fractionally subadditive class.
    """

    player: int
    k: int
    clauses: tuple
    domain: str = "auction"

    def __init__(self, player, k, clauses, domain="auction"):
        if k < 1:
            raise StructuralError("hierarchy level starts at 1")
        canon = []
        for clause in clauses:
            entries = []
            items = clause.items() if isinstance(clause, dict) else clause
            for T, val in items:
                T = frozenset(T)
                val = frac(val)
                if len(T) > k:
                    raise StructuralError("hyperedge larger than the level allows")
                if val < 0:
                    raise StructuralError("hyperedge values must be nonnegative")
                entries.append((T, val))
            entries.sort(key=lambda tv: (len(tv[0]), sorted(tv[0])))
            canon.append(tuple(entries))
        object.__setattr__(self, "player", player)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "clauses", tuple(canon))
        object.__setattr__(self, "domain", domain)

    def value(self, outcome) -> Fraction:
        if outcome is None:
            return F0
        if isinstance(outcome, ConfigLPSolution):
            return sum(
                (
                    eval_mph(self, S) * x
                    for S, x in outcome.player_row(self.player)
                    if x != 0
                ),
                F0,
            )
        return eval_mph(self, outcome[self.player])

    def scale(self, theta) -> "MPHkValuation":
        theta = frac(theta)
        return MPHkValuation(
            self.player,
            self.k,
            tuple(
                tuple((T, theta * val) for T, val in clause)
                for clause in self.clauses
            ),
        )

    def best_case(self) -> Fraction:
        if not self.clauses:
            return F0
        return max(sum((val for _, val in clause), F0) for clause in self.clauses)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "clauses": [
                [{"T": sorted(T), "v": frac_str(val)} for T, val in clause]
                for clause in self.clauses
            ],
        }

    @staticmethod
    def from_dict(player: int, data: dict) -> "MPHkValuation":
        return MPHkValuation(
            player,
            data["k"],
            [
                [(frozenset(e["T"]), parse_frac(e["v"])) for e in clause]
                for clause in data["clauses"]
            ],
        )


def eval_mph(v: MPHkValuation, S) -> Fraction:
    """Best clause total over hyperedges contained in S; no clauses, no value."""
    S = frozenset(S)
    best = F0
    for clause in v.clauses:
        total = sum((val for T, val in clause if T <= S), F0)
        if total > best:
            best = total
    return best


def additive_valuation(player: int, weights) -> MPHkValuation:
    """Level-1 valuation with one clause of singleton hyperedges."""
    clause = [(frozenset({j}), w) for j, w in enumerate(weights)]
    return MPHkValuation(player, 1, [clause])


@dataclass(frozen=True)
class SymmetricValuation(Valuation):
    """Depends only on how many items are received; levels[j] for j items."""

    player: int
    levels: tuple  # levels[0] == 0, indices 0..m
    domain: str = "auction"

    def __init__(self, player, levels, domain="auction"):
        levels = tuple(frac(x) for x in levels)
        if not levels or levels[0] != 0:
            raise StructuralError("receiving nothing is worth exactly zero")
        if any(x < 0 for x in levels):
            raise StructuralError("bids and values must be nonnegative")
        object.__setattr__(self, "player", player)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "domain", domain)

    @property
    def m(self) -> int:
        return len(self.levels) - 1

    def value(self, outcome) -> Fraction:
        if outcome is None:
            return F0
        if isinstance(outcome, CardinalityLPSolution):
            row = outcome.x[self.player]
            return sum((self.levels[j + 1] * row[j] for j in range(outcome.m)), F0)
        if isinstance(outcome, ConfigLPSolution):
            return sum(
                (self.levels[len(S)] * x for S, x in outcome.player_row(self.player)),
                F0,
            )
        return self.levels[outcome[self.player]]

    def scale(self, theta) -> "SymmetricValuation":
        theta = frac(theta)
        return SymmetricValuation(self.player, tuple(theta * x for x in self.levels))

    def best_case(self) -> Fraction:
        return max(self.levels)

    def to_dict(self) -> dict:
        return {"levels": [frac_str(x) for x in self.levels]}


def flat_symmetric_bid(m: int, player: int, amount) -> SymmetricValuation:
    return SymmetricValuation(player, (F0,) + (frac(amount),) * m)


# ------------------------------------------------------------ configuration


@dataclass(frozen=True)
class ConfigLPSolution:
    """Fractional set allocation: per player a row over item_subsets(m)."""

    m: int
    x: tuple  # n rows, each len(item_subsets(m))

    def __init__(self, m, x):
        subs = item_subsets(m)
        x = tuple(tuple(frac(v) for v in row) for row in x)
        for row in x:
            if len(row) != len(subs):
                raise StructuralError("one variable per item subset required")
            if any(v < 0 for v in row):
                raise StructuralError("allocations are nonnegative")
            if sum(row) > 1:
                raise StructuralError("a player receives at most one set in total")
        for j in range(m):
            if self.load_static(x, subs, j) > 1:
                raise StructuralError("an item is allocated more than once")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "x", x)

    @staticmethod
    def load_static(x, subs, j) -> Fraction:
        return sum(
            (row[s] for row in x for s in range(len(subs)) if j in subs[s]), F0
        )

    @property
    def n(self) -> int:
        return len(self.x)

    def player_row(self, i):
        subs = item_subsets(self.m)
        return tuple(zip(subs, self.x[i]))

    def item_load(self, j) -> Fraction:
        return self.load_static(self.x, item_subsets(self.m), j)

    def residual_capacities(self, i) -> tuple:
        """Per-item capacity left after removing player i's fractions."""
        subs = item_subsets(self.m)
        out = []
        for j in range(self.m):
            used = sum((self.x[i][s] for s in range(len(subs)) if j in subs[s]), F0)
            out.append(F1 - used)
        return tuple(out)

    def welfare(self, bids) -> Fraction:
        return sum((b.value(self) for b in bids), F0)


def _check_auction_bids(bids) -> None:
    for i, b in enumerate(bids):
        if b.player != i or b.domain != "auction":
            raise StructuralError("bid does not match its player slot")


def _set_value(bid, S) -> Fraction:
    if isinstance(bid, SymmetricValuation):
        return bid.levels[len(S)]
    return eval_mph(bid, S)


def solve_config_lp(n: int, m: int, bids, capacities=None, active=None):
    """Exact configuration LP optimum, (ConfigLPSolution, value).

    capacities replaces the all-ones item supply; active restricts which
    players get variables (the rest receive empty rows). Used as stated it
    computes the declared welfare of the one-of-each supply.
    """
    if len(bids) != n:
        raise StructuralError("one bid per player required")
    _check_auction_bids(bids)
    subs = item_subsets(m)
    players = list(range(n)) if active is None else sorted(active)
    caps = tuple(F1 for _ in range(m)) if capacities is None else tuple(
        frac(c) for c in capacities
    )
    if len(caps) != m or any(c < 0 for c in caps):
        raise StructuralError("one nonnegative capacity per item required")
    var_of = {}
    objective = []
    for i in players:
        for s, S in enumerate(subs):
            var_of[(i, s)] = len(objective)
            objective.append(_set_value(bids[i], S))
    rows = []
    rhs = []
    for j in range(m):
        row = [F0] * len(objective)
        for (i, s), col in var_of.items():
            if j in subs[s]:
                row[col] = F1
        rows.append(row)
        rhs.append(caps[j])
    for i in players:
        row = [F0] * len(objective)
        for s in range(len(subs)):
            row[var_of[(i, s)]] = F1
        rows.append(row)
        rhs.append(F1)
    sol = solve_lp(LinearProgram(objective, rows, rhs))
    if sol.status != "optimal":
        raise StructuralError("configuration program must be solvable")
    x = []
    for i in range(n):
        if (i, 0) in var_of:
            x.append(tuple(sol.x[var_of[(i, s)]] for s in range(len(subs))))
        else:
            x.append(tuple(F0 for _ in subs))
    return ConfigLPSolution(m, x), sol.value


def check_ca_social_cost(bids, x: ConfigLPSolution, k: int) -> CostCertificate:
    """Removing any one player's fractional share costs at most (k+1) times
    the full declared optimum, summed over players."""
    _check_auction_bids(bids)
    n = len(bids)
    if n != x.n:
        raise StructuralError("solution and bid profile sizes differ")
    m = x.m
    _, full = solve_config_lp(n, m, bids)
    lhs = F0
    for i in range(n):
        others = [p for p in range(n) if p != i]
        _, without = solve_config_lp(n, m, bids, active=others)
        _, residual = solve_config_lp(
            n, m, bids, capacities=x.residual_capacities(i), active=others
        )
        lhs += without - residual
    rhs = (k + 1) * full
    return CostCertificate(
        holds=lhs <= rhs, lhs=lhs, rhs=rhs, detail={"welfare": full}
    )


# ----------------------------------------------------------- symmetric case


@dataclass(frozen=True)
class CardinalityLPSolution:
    """Fractional allocation by set size: x[i][j-1] is player i's weight on
    receiving exactly j items."""

    m: int
    x: tuple

    def __init__(self, m, x):
        x = tuple(tuple(frac(v) for v in row) for row in x)
        total = F0
        for row in x:
            if len(row) != m:
                raise StructuralError("one variable per cardinality required")
            if any(v < 0 for v in row):
                raise StructuralError("allocations are nonnegative")
            if sum(row) > 1:
                raise StructuralError("a player receives at most one size in total")
            total += sum((Fraction(j + 1) * row[j] for j in range(m)), F0)
        if total > m:
            raise StructuralError("total item mass exceeds the supply")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return len(self.x)

    def welfare(self, bids) -> Fraction:
        return sum((b.value(self) for b in bids), F0)


def _require_symmetric(bids) -> None:
    for b in bids:
        if not isinstance(b, SymmetricValuation):
            raise PreconditionError("this operation needs symmetric bids")


def _as_option_bids(bids) -> tuple:
    return tuple(
        OptionValuation(i, tuple(b.levels[1:])) for i, b in enumerate(bids)
    )


def solve_cardinality_lp(m: int, bids):
    """Exact cardinality-variable optimum, (CardinalityLPSolution, value).

    This is the one-row packing relaxation with row (1, ..., m) and
    capacity m, solved by the packing module.
    """
    _check_auction_bids(bids)
    _require_symmetric(bids)
    inst = multiunit_instance([b.levels[1:] for b in bids])
    alloc, value = solve_packing_lp(inst, _as_option_bids(bids))
    return CardinalityLPSolution(m, alloc.x), value


def solve_cardinality_integral(m: int, bids):
    """Best integral allocation of sizes, (R tuple, value); ties prefer
    giving nothing, then smaller sizes to earlier players."""
    _check_auction_bids(bids)
    _require_symmetric(bids)
    inst = multiunit_instance([b.levels[1:] for b in bids])
    alloc, value = solve_packing_integral(inst, _as_option_bids(bids))
    return tuple(alloc.choices()), value


def translate_to_cardinality(x: ConfigLPSolution, bids) -> CardinalityLPSolution:
    """Collapse set variables to their sizes; value-preserving for symmetric
    bids."""
    _require_symmetric(bids)
    subs = item_subsets(x.m)
    rows = []
    for i in range(x.n):
        row = [F0] * x.m
        for s, S in enumerate(subs):
            if S:
                row[len(S) - 1] += x.x[i][s]
        rows.append(tuple(row))
    out = CardinalityLPSolution(x.m, rows)
    if out.welfare(bids) != x.welfare(bids):
        raise StructuralError("size translation changed the objective")
    return out


def translate_to_config(xbar: CardinalityLPSolution, bids) -> ConfigLPSolution:
    """Spread each size's weight uniformly over all sets of that size."""
    _require_symmetric(bids)
    m = xbar.m
    subs = item_subsets(m)
    rows = []
    for i in range(xbar.n):
        row = []
        for S in subs:
            j = len(S)
            row.append(xbar.x[i][j - 1] / comb(m, j) if j else F0)
        rows.append(tuple(row))
    out = ConfigLPSolution(m, rows)
    if out.welfare(bids) != xbar.welfare(bids):
        raise StructuralError("set translation changed the objective")
    return out


# ------------------------------------------------------------ fair rounding


def _halved(xbar: CardinalityLPSolution, coin: int) -> list:
    """Keep sizes up to half the supply on heads, the rest on tails."""
    cut = xbar.m // 2
    rows = []
    for row in xbar.x:
        rows.append(
            [
                row[j] if (j + 1 <= cut) == (coin == 0) else F0
                for j in range(xbar.m)
            ]
        )
    return rows


def _size_options(q_row) -> list:
    """[(probability, size)] for one player's draw, size 0 catching the rest."""
    opts = [(q / 4, j + 1) for j, q in enumerate(q_row) if q > 0]
    rest = F1 - sum((p for p, _ in opts), F0)
    return opts + [(rest, 0)]


def fair_round(xbar: CardinalityLPSolution, m: int, seed) -> tuple:
    """One supply-safe integral size per player; reads no bids or values.

    A fair coin keeps either the small or the large sizes. Each player then
    independently draws size j with a quarter of the kept weight. If the
    draws oversubscribe the supply, everyone gets nothing.
    """
    if xbar.m != m:
        raise StructuralError("solution was computed for a different supply")
    rng = Random(seed)
    coin = rng.randrange(2)
    q = _halved(xbar, coin)
    draws = []
    for row in q:
        opts = _size_options(row)
        k = weighted_index(rng, [p for p, _ in opts])
        draws.append(opts[k][1])
    if sum(draws) <= m:
        return tuple(draws)
    return tuple(0 for _ in draws)


def fair_round_support(xbar: CardinalityLPSolution, m: int) -> list:
    """Exact (probability, allocation) support of fair_round."""
    if xbar.m != m:
        raise StructuralError("solution was computed for a different supply")
    acc = {}
    for coin in (0, 1):
        q = _halved(xbar, coin)
        options = [_size_options(row) for row in q]
        count = 1
        for opts in options:
            count *= len(opts)
            if count > SUPPORT_GUARD:
                raise SizeGuardError("rounding support too large to enumerate")
        for combo in product(*options):
            prob = Fraction(1, 2)
            for p, _ in combo:
                prob *= p
            if prob == 0:
                continue
            draws = tuple(j for _, j in combo)
            outcome = draws if sum(draws) <= m else tuple(0 for _ in draws)
            acc[outcome] = acc.get(outcome, F0) + prob
    return sorted(acc.items(), key=lambda kv: kv[0])


def fair_round_support_list(xbar, m):
    return [(p, r) for r, p in fair_round_support(xbar, m)]


# -------------------------------------------------------------------- rules


def config_lp_rule(n: int, m: int) -> AllocationRule:
    return AllocationRule(
        domain="auction",
        allocate=lambda bids, seed=None: solve_config_lp(n, m, bids)[0],
        exact=True,
        name="config-lp",
    )


def cardinality_integral_rule(m: int) -> AllocationRule:
    return AllocationRule(
        domain="auction",
        allocate=lambda bids, seed=None: solve_cardinality_integral(m, bids)[0],
        exact=True,
        name="cardinality-integral",
    )


def fair_rule(m: int) -> AllocationRule:
    """Relax to the cardinality LP, round with the halving coin scheme."""

    def relax(bids):
        return solve_cardinality_lp(m, bids)[0]

    return AllocationRule(
        domain="auction",
        allocate=lambda bids, seed=None: fair_round(relax(bids), m, seed),
        exact=False,
        randomized=True,
        support=lambda bids: fair_round_support_list(relax(bids), m),
        opt_welfare=lambda values: solve_cardinality_lp(m, values)[1],
        relax=relax,
        round_stage=lambda relaxed, seed: fair_round(relaxed, m, seed),
        name="ca-fair",
    )


# ----------------------------------------------------------- counterexample


def gen_symmetric_counterexample(m: int) -> Counterexample:
    """m unit-value players against two whole-supply players worth 2.

    Small players bidding zero and big players bidding truthfully is a pure
    Nash equilibrium of the pay-your-bid mechanism over exact integral
    allocations: welfare 2 instead of the optimum m.
    """
    if m < 2:
        raise StructuralError("need at least two small players")
    values = tuple(
        SymmetricValuation(i, (F0,) + (F1,) * m) for i in range(m)
    ) + tuple(
        SymmetricValuation(m + t, (F0,) * m + (Fraction(2),)) for t in range(2)
    )
    bids = tuple(
        v.scale(0) if i < m else v for i, v in enumerate(values)
    )
    rule = cardinality_integral_rule(m)
    _, optimum = solve_cardinality_integral(m, values)
    outcome = rule.allocate(bids, None)
    eq_welfare = sum((v.value(outcome) for v in values), F0)
    return Counterexample(
        None, values, bids, rule, optimum, eq_welfare, optimum / eq_welfare
    )


def counterexample_symmetric_deviations(ce: Counterexample, resolution: int = 20):
    """Scaled-value bids plus flat bids at the construction's levels 0, 1, 2."""
    m = ce.values[0].m
    grids = []
    for i, v in enumerate(ce.values):
        cand = [v.scale(Fraction(j, resolution)) for j in range(resolution + 1)]
        cand += [flat_symmetric_bid(m, i, level) for level in (0, 1, 2)]
        grids.append(cand)
    return grids


# --------------------------------------------------------------- generators


def gen_xos_instances(count: int, seed: int, max_players: int = 3, max_items: int = 4):
    """Seeded random level-1 instances: (m, values) pairs."""
    rng = Random(seed)
    out = []
    for _ in range(count):
        n = rng.randint(1, max_players)
        m = rng.randint(1, max_items)
        values = []
        for i in range(n):
            clauses = []
            for _ in range(rng.randint(1, 3)):
                clauses.append(
                    [
                        (frozenset({j}), Fraction(rng.randint(0, 8), rng.choice((1, 2))))
                        for j in range(m)
                    ]
                )
            values.append(MPHkValuation(i, 1, clauses))
        out.append((m, tuple(values)))
    return out


def gen_mph_instances(count: int, seed: int, k: int = 2, max_players: int = 3, max_items: int = 4):
    """Seeded random level-k instances with hyperedges up to size k."""
    rng = Random(seed)
    out = []
    for _ in range(count):
        n = rng.randint(1, max_players)
        m = rng.randint(max(2, k), max_items)
        values = []
        for i in range(n):
            clauses = []
            for _ in range(rng.randint(1, 2)):
                clause = []
                for _ in range(rng.randint(1, 4)):
                    size = rng.randint(1, k)
                    T = frozenset(rng.sample(range(m), min(size, m)))
                    clause.append((T, Fraction(rng.randint(0, 6))))
                clauses.append(clause)
            values.append(MPHkValuation(i, k, clauses))
        out.append((m, tuple(values)))
    return out


def gen_symmetric_instances(count: int, seed: int, max_players: int = 4, max_items: int = 6):
    """Seeded random symmetric instances: (m, values) with nondecreasing levels."""
    rng = Random(seed)
    out = []
    for _ in range(count):
        n = rng.randint(1, max_players)
        m = rng.randint(1, max_items)
        values = []
        for i in range(n):
            levels = [F0]
            for _ in range(m):
                levels.append(levels[-1] + Fraction(rng.randint(0, 5), rng.choice((1, 2))))
            values.append(SymmetricValuation(i, levels))
        out.append((m, tuple(values)))
    return out
