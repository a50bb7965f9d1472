"""Packing LP relaxation, integral maximizer, social-cost bound, counterexamples."""

from fractions import Fraction
from random import Random

import pytest

from anarchy.errors import PreconditionError, SizeGuardError, StructuralError
from anarchy.mechanism import (
    HALF_VALUE,
    SmoothnessParams,
    check_smoothness,
    run_pay_your_bid,
    scaled_bid_profiles,
    theta_grid,
    verify_pure_nash,
)
from anarchy.packing import (
    OptionValuation,
    PackingInstance,
    check_feasible,
    check_pip_social_cost,
    column_sparsity,
    counterexample_deviations,
    gen_instances,
    gen_multiunit_counterexample,
    integral_rule,
    lp_rule,
    multiunit_instance,
    random_bids,
    random_feasible_point,
    residual_welfare,
    social_cost_suite,
    solve_packing_integral,
    solve_packing_lp,
    truthful_bids,
    uniform_option_bid,
)
from anarchy.rationals import F0, F1

from oracles import best_integral_packing, lp_opt_by_vertex_enum, packing_dual_value

H = Fraction(1, 2)


def proposition_instance(m):
    return gen_multiunit_counterexample(m).instance


# ---------------------------------------------------------------- structure


def test_multiunit_structure():
    inst = multiunit_instance([[1, 2], [1, 1], [0, 3]])
    assert inst.n == 3 and inst.K == 2 and inst.L == 1
    assert inst.rows[0][0] == (1, 2)
    assert inst.capacities == (2,)
    assert column_sparsity(inst) == 1


def test_column_sparsity_zero_matrix():
    inst = PackingInstance([[1], [2]], [[[0], [0]]], [1])
    assert column_sparsity(inst) == 0


def test_column_sparsity_counts_supports():
    rows = [[[1], [0]], [[1], [1]]]
    inst = PackingInstance([[1], [1]], rows, [1, 1])
    assert column_sparsity(inst) == 2


def test_instance_validation():
    with pytest.raises(StructuralError):
        PackingInstance([[1], [1, 2]], [[[0], [0]]], [1])  # ragged values
    with pytest.raises(StructuralError):
        PackingInstance([[-1]], [[[0]]], [1])
    with pytest.raises(StructuralError):
        PackingInstance([[1]], [[[-1]]], [1])
    with pytest.raises(StructuralError):
        PackingInstance([[1]], [[[1]]], [0])  # capacities strictly positive
    with pytest.raises(StructuralError):
        PackingInstance([[1]], [[[1]], [[1]]], [1])  # rows/capacities mismatch


def test_json_round_trip():
    inst = PackingInstance(
        [[Fraction(1, 3), 2]], [[[1, Fraction(5, 2)]], [[0, 1]]], [2, Fraction(7, 3)]
    )
    data = inst.to_dict()
    assert data["values"][0][0] == "1/3"
    assert data["c"] == ["2", "7/3"]
    again = PackingInstance.from_dict(data)
    assert again == inst


# ------------------------------------------------------------ LP relaxation


def test_lp_single_option():
    inst = PackingInstance([[5]], [[[1]]], [1])
    bids = (OptionValuation(0, [3]),)
    alloc, welfare = solve_packing_lp(inst, bids)
    assert welfare == 3
    assert alloc.x == ((1,),)


def test_lp_proposition_m4():
    inst = proposition_instance(4)
    bids = truthful_bids(inst)
    # pin the optimum by strong duality: unit price 1 per unit of capacity
    b = [list(v.amounts) for v in bids]
    A = [[list(p) for p in row] for row in inst.rows]
    primal = 4 * F1  # four small bidders, one unit each
    dual = packing_dual_value(b, A, inst.capacities, [F1], [F0] * 6)
    assert primal == dual == 4
    alloc, welfare = solve_packing_lp(inst, bids)
    assert welfare == 4
    # unique optimum: every small takes one unit, the bigs get nothing
    for i in range(4):
        assert alloc.x[i][0] == 1
    assert alloc.x[4] == alloc.x[5] == (0, 0, 0, 0)


def test_lp_matches_vertex_enumeration():
    rng = Random(23)
    for _ in range(30):
        n, K, L = rng.choice(((2, 2, 2), (3, 1, 2), (2, 1, 3)))
        inst = gen_instances("sparse-random", 1, rng.getrandbits(32), n=n, K=K, L=L, d=1)[0]
        bids = random_bids(inst, rng)
        objective = [bids[i].amounts[k] for i in range(n) for k in range(K)]
        rows = []
        rhs = []
        for l in range(L):
            rows.append([inst.rows[l][i][k] for i in range(n) for k in range(K)])
            rhs.append(inst.capacities[l])
        for i in range(n):
            row = [F0] * (n * K)
            for k in range(K):
                row[i * K + k] = F1
            rows.append(row)
            rhs.append(F1)
        expected = lp_opt_by_vertex_enum(objective, rows, rhs)
        _, welfare = solve_packing_lp(inst, bids)
        assert welfare == expected


def test_lp_payments_recompute():
    rng = Random(7)
    inst = gen_instances("gap", 1, 99, n=3, K=2, L=2)[0]
    bids = random_bids(inst, rng)
    run = run_pay_your_bid(lp_rule(inst), bids, truthful_bids(inst))
    for i in range(inst.n):
        manual = sum(
            (bids[i].amounts[k] * run.outcome.x[i][k] for k in range(inst.K)), F0
        )
        assert run.payments[i] == manual


# -------------------------------------------------------- integral optimum


def test_integral_zero_bids():
    inst = proposition_instance(4)
    bids = tuple(uniform_option_bid(inst, i, 0) for i in range(6))
    alloc, welfare = solve_packing_integral(inst, bids)
    assert welfare == 0
    assert alloc.choices() == (0,) * 6  # empty allocation is lex-first


def test_integral_proposition_equilibrium():
    ce = gen_multiunit_counterexample(4)
    b = [list(v.amounts) for v in ce.bids]
    A = [[list(p) for p in row] for row in ce.instance.rows]
    choices, value = best_integral_packing(b, A, ce.instance.capacities)
    assert value == 2
    assert choices == (0, 0, 0, 0, 0, 4)  # the last big bidder takes all units
    alloc, welfare = solve_packing_integral(ce.instance, ce.bids)
    assert welfare == 2
    assert alloc.choices() == choices


def test_integral_truthful_m4():
    inst = proposition_instance(4)
    bids = truthful_bids(inst)
    b = [list(v.amounts) for v in bids]
    A = [[list(p) for p in row] for row in inst.rows]
    _, value = best_integral_packing(b, A, inst.capacities)
    assert value == 4
    _, welfare = solve_packing_integral(inst, bids)
    assert welfare == 4


def test_integral_dp_matches_exhaustive():
    rng = Random(31)
    for _ in range(60):
        n = rng.randint(1, 4)
        m = rng.randint(1, 3)
        inst = gen_instances("multi-unit", 1, rng.getrandbits(32), n=n, m=m)[0]
        bids = random_bids(inst, rng)
        b = [list(v.amounts) for v in bids]
        A = [[list(p) for p in row] for row in inst.rows]
        choices, value = best_integral_packing(b, A, inst.capacities)
        alloc, welfare = solve_packing_integral(inst, bids)
        assert welfare == value
        assert alloc.choices() == choices
        # relaxation dominates the integral optimum
        _, lp_welfare = solve_packing_lp(inst, bids)
        assert lp_welfare >= welfare >= 0


def test_integral_size_guard():
    n, K = 11, 2
    values = [[1] * K for _ in range(n)]
    rows = [
        [[1] * K for _ in range(n)],
        [[1] * K for _ in range(n)],
    ]
    inst = PackingInstance(values, rows, [5, 5])
    with pytest.raises(SizeGuardError):
        solve_packing_integral(inst, truthful_bids(inst))


# -------------------------------------------------------- residual welfare


def test_residual_single_player():
    inst = PackingInstance([[5]], [[[1]]], [1])
    assert residual_welfare(inst, truthful_bids(inst), 0, [1]) == 0


def test_residual_zero_capacity():
    inst = proposition_instance(4)
    assert residual_welfare(inst, truthful_bids(inst), 0, [0]) == 0


def test_residual_proposition_value():
    # three smalls at one unit each plus a quarter of a big: 3 + 1/2
    inst = proposition_instance(4)
    bids = truthful_bids(inst)
    others = [0, 1, 2, 4, 5]
    b = [list(bids[i].amounts) for i in others]
    A = [[list(row[i]) for i in others] for row in inst.rows]
    dual = packing_dual_value(b, A, inst.capacities, [H], [H, H, H, F0, F0])
    assert dual == Fraction(7, 2)
    got = residual_welfare(inst, bids, 3, inst.capacities)
    assert got == Fraction(7, 2)


def test_residual_validation():
    inst = proposition_instance(4)
    bids = truthful_bids(inst)
    with pytest.raises(StructuralError):
        residual_welfare(inst, bids, 0, [-1])
    with pytest.raises(PreconditionError):
        residual_welfare(inst, bids, 0, [5])
    with pytest.raises(StructuralError):
        residual_welfare(inst, bids, 0, [1, 1])
    with pytest.raises(StructuralError):
        residual_welfare(inst, bids, 6, [4])


# ------------------------------------------------------- social-cost bound


def test_social_cost_zero_point():
    inst = proposition_instance(4)
    bids = truthful_bids(inst)
    xbar = tuple((F0,) * inst.K for _ in range(inst.n))
    cert = check_pip_social_cost(inst, bids, xbar)
    assert cert.holds and cert.lhs == 0
    assert cert.rhs == 2 * 4  # d = 1 here


def test_social_cost_d1_at_lp_optimum():
    rng = Random(41)
    for _ in range(40):
        inst = gen_instances("gap", 1, rng.getrandbits(32), n=3, K=2, L=2)[0]
        bids = random_bids(inst, rng)
        alloc, welfare = solve_packing_lp(inst, bids)
        cert = check_pip_social_cost(inst, bids, alloc)
        assert cert.holds, cert.to_dict()
        assert cert.detail["d"] == 1
        assert cert.rhs == 2 * welfare


def test_social_cost_d3():
    rng = Random(43)
    for _ in range(10):
        inst = gen_instances(
            "sparse-random", 1, rng.getrandbits(32), n=3, K=2, L=3, d=3
        )[0]
        bids = random_bids(inst, rng)
        cert = check_pip_social_cost(inst, bids, random_feasible_point(inst, rng))
        assert cert.holds
        assert cert.rhs == 4 * cert.detail["welfare"]


def test_social_cost_rejects_infeasible_point():
    inst = PackingInstance([[1]], [[[1]]], [1])
    with pytest.raises(PreconditionError):
        check_pip_social_cost(inst, truthful_bids(inst), ((Fraction(2),),))
    with pytest.raises(PreconditionError):
        check_pip_social_cost(inst, truthful_bids(inst), ((Fraction(-1),),))


def test_social_cost_suite():
    certs = social_cost_suite(12, seed=7)
    assert len(certs) == 12
    assert all(c.holds for c in certs)


def test_random_feasible_points_feasible():
    rng = Random(53)
    for _ in range(25):
        inst = gen_instances(
            "sparse-random", 1, rng.getrandbits(32), n=3, K=2, L=3, d=2
        )[0]
        check_feasible(inst, random_feasible_point(inst, rng))


# --------------------------------------------------------- counterexamples


def test_counterexample_ratios():
    assert gen_multiunit_counterexample(10).ratio == 5
    assert gen_multiunit_counterexample(2).ratio == 1
    with pytest.raises(StructuralError):
        gen_multiunit_counterexample(1)


def test_counterexample_welfare_split():
    for m in (2, 4, 7):
        ce = gen_multiunit_counterexample(m)
        assert ce.equilibrium_welfare == 2
        assert ce.optimum == m
        assert ce.instance.n == m + 2


def test_counterexample_is_pure_nash_m4():
    ce = gen_multiunit_counterexample(4)
    grids = counterexample_deviations(ce, resolution=4)
    cert = verify_pure_nash(ce.rule, ce.bids, ce.values, grids)
    assert cert.is_nash
    assert cert.max_regret == 0
    assert not cert.statistical


def test_lp_rule_beats_integral_gap():
    # the LP mechanism closes the m/2 gap at truthful bids
    ce = gen_multiunit_counterexample(6)
    run = run_pay_your_bid(lp_rule(ce.instance), ce.values, ce.values)
    assert run.welfare == 6


# ------------------------------------------------------------- smoothness


def test_lp_mechanism_smooth_d1():
    rng = Random(61)
    for _ in range(6):
        inst = gen_instances("gap", 1, rng.getrandbits(32), n=2, K=2, L=2)[0]
        values = truthful_bids(inst)
        bid_profiles = scaled_bid_profiles(values, theta_grid(2))
        cert = check_smoothness(
            lp_rule(inst),
            [values],
            bid_profiles,
            SmoothnessParams(H, 2, HALF_VALUE),
        )
        assert cert.holds, cert.to_dict()
        assert not cert.statistical


def test_integral_mechanism_violates_smoothness_m12():
    ce = gen_multiunit_counterexample(12)
    cert = check_smoothness(
        ce.rule, [ce.values], [ce.bids], SmoothnessParams(H, 2, HALF_VALUE)
    )
    assert not cert.holds
    assert cert.min_slack == -2  # deviations earn 0 against lhs bound 6 - 4


# -------------------------------------------------------------- generators


def test_gen_multiunit_shape():
    insts = gen_instances("multi-unit", 3, seed=5, n=3, m=2)
    assert len(insts) == 3
    for inst in insts:
        assert inst.rows[0][0] == (1, 2)
        assert inst.capacities == (2,)
        for p in inst.values:
            assert p[0] <= p[1]  # more units never worth less


def test_gen_gap_sparsity():
    for inst in gen_instances("gap", 4, seed=6, n=3, K=2, L=3):
        assert column_sparsity(inst) == 1
        for i in range(inst.n):
            for k in range(inst.K):
                support = [l for l in range(inst.L) if inst.rows[l][i][k] != 0]
                assert len(support) == 1


def test_gen_sparse_random():
    for inst in gen_instances("sparse-random", 4, seed=8, n=3, K=2, L=4, d=2):
        assert column_sparsity(inst) == 2


def test_gen_deterministic_and_validated():
    a = gen_instances("gap", 2, seed=11, n=2, K=2, L=2)
    b = gen_instances("gap", 2, seed=11, n=2, K=2, L=2)
    assert a == b
    with pytest.raises(StructuralError):
        gen_instances("mystery", 1, seed=0)
    with pytest.raises(StructuralError):
        gen_instances("sparse-random", 1, seed=0, n=2, K=2, L=2, d=3)
