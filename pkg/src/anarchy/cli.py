"""Command line harness: generate, solve, round, check, and report.

Every invocation prints self-describing report rows (exact rationals as
p/q next to a decimal rendering) and can persist them to CSV or JSON.
Exit code 0 means every verdict passed, 2 means some checked property was
violated, 1 means the invocation itself failed.
"""

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from math import e
from typing import Optional

from . import auctions, dynamics, flows, maxtsp, packing
from .mechanism import (
    HALF_VALUE,
    SmoothnessParams,
    check_smoothness,
    compose_smoothness,
    poa_from_smoothness,
    scaled_bid_profiles,
    theta_grid,
    verify_pure_nash,
)
from .rationals import frac_str, parse_frac
from .solvers.maxflow import CapacitatedDigraph

DOMAINS = ("packing", "flow", "maxtsp", "auctions")
ACTIONS = (
    "gen",
    "solve",
    "round",
    "check-smoothness",
    "check-lemma",
    "counterexample",
    "dynamics",
    "paper-table",
)


class CLIError(Exception):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    domain: str
    action: str
    instance: Optional[str] = None
    seed: int = 0
    d: Optional[int] = None
    k: Optional[int] = None
    m: Optional[int] = None
    eps: Optional[Fraction] = None
    rounds: Optional[int] = None
    grid: int = 2
    out: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "domain": self.domain,
            "action": self.action,
            "instance": self.instance,
            "seed": self.seed,
            "d": self.d,
            "k": self.k,
            "m": self.m,
            "eps": None if self.eps is None else frac_str(self.eps),
            "rounds": self.rounds,
            "grid": self.grid,
        }

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class ReportRow:
    name: str
    config: ExperimentConfig
    results: dict = field(default_factory=dict)
    verdict: str = "ok"
    witness: Optional[str] = None
    wall_ms: float = 0.0

    def cells(self) -> dict:
        """Flat key -> printable value map; rationals get a decimal twin."""
        out = {
            "domain": self.config.domain,
            "action": self.config.action,
            "name": self.name,
            "seed": self.config.seed,
            "config": self.config.hash(),
            "verdict": self.verdict,
            "witness": self.witness or "",
            "wall_ms": round(self.wall_ms, 2),
        }
        for key, value in self.results.items():
            if isinstance(value, Fraction):
                out[key] = frac_str(value)
                out[key + "_decimal"] = round(float(value), 6)
            else:
                out[key] = value
        return out


def _mark(row: ReportRow, started: float) -> ReportRow:
    row.wall_ms = (time.monotonic() - started) * 1000
    return row


# ----------------------------------------------------------- paper table


def _composed_poa(lam, mu, alpha) -> Fraction:
    base = SmoothnessParams(lam, mu, HALF_VALUE)
    return poa_from_smoothness(compose_smoothness(base, alpha))


def cmd_paper_table(config: ExperimentConfig) -> list:
    """Composed price-of-anarchy bounds for every mechanism family."""
    rows = []
    t0 = time.monotonic()

    def add(name, results):
        rows.append(_mark(ReportRow(name, config, results), t0))

    add(
        "multi-unit",
        {
            "lam": Fraction(1, 2),
            "mu": Fraction(2),
            "alpha": "8",
            "poa": _composed_poa(Fraction(1, 2), 2, 8),
        },
    )
    for d in range(1, 6):
        add(
            f"d-sparse-{d}",
            {
                "lam": Fraction(1, 2),
                "mu": Fraction(d + 1),
                "alpha": str(8 * d),
                "poa": _composed_poa(Fraction(1, 2), d + 1, 8 * d),
            },
        )
    add(
        "maxtsp-fisher",
        {
            "lam": Fraction(1, 2),
            "mu": Fraction(3),
            "alpha": "2",
            "poa": _composed_poa(Fraction(1, 2), 3, 2),
        },
    )
    for eps in (Fraction(1, 10), Fraction(1, 2), Fraction(1)):
        add(
            f"flow-eps-{frac_str(eps)}",
            {
                "lam": Fraction(1, 2),
                "mu": Fraction(1),
                "alpha": frac_str(1 + eps),
                "poa": _composed_poa(Fraction(1, 2), 1, 1 + eps),
            },
        )
    # alpha = e/(e-1) is irrational, so the row reports the exact rational
    # coefficient times a symbolic factor; the decimal twin uses floats
    xos_coeff = _composed_poa(Fraction(1, 2), 2, 1)
    add(
        "xos",
        {
            "lam": Fraction(1, 2),
            "mu": Fraction(2),
            "alpha": "e/(e-1)",
            "poa": f"{frac_str(xos_coeff)}*e/(e-1)",
            "poa_decimal": round(float(xos_coeff) * e / (e - 1), 6),
        },
    )
    for k in (1, 2, 3):
        coeff = _composed_poa(Fraction(1, 2), k + 1, 1)
        add(
            f"mph-{k}",
            {
                "lam": Fraction(1, 2),
                "mu": Fraction(k + 1),
                "alpha": f"alpha_{k}",
                "poa": f"{frac_str(coeff)}*alpha_{k}",
            },
        )
    return rows


# ------------------------------------------------------ instance handling


def _load_instances(config: ExperimentConfig) -> dict:
    if not config.instance:
        raise CLIError("this action needs --instance")
    try:
        with open(config.instance) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise CLIError(f"cannot read instance file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CLIError(f"malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    if data.get("domain") != config.domain:
        raise CLIError(
            f"instance file is for domain {data.get('domain')!r}, not {config.domain!r}"
        )
    return data


def _gen_payload(config: ExperimentConfig, count: int) -> dict:
    seed = config.seed
    if config.domain == "packing":
        if config.d:
            insts = packing.gen_instances(
                "sparse-random", count, seed, n=3, K=3, L=max(config.d, 2), d=config.d
            )
        else:
            insts = packing.gen_instances(
                "multi-unit", count, seed, n=3, m=config.m or 4
            )
        return {"domain": "packing", "instances": [i.to_dict() for i in insts]}
    if config.domain == "flow":
        insts = flows.gen_flow_instances(count, seed)
        return {"domain": "flow", "instances": [i.to_dict() for i in insts]}
    if config.domain == "maxtsp":
        graphs = maxtsp.gen_digraphs(count, seed, sizes=(4, 5))
        return {"domain": "maxtsp", "instances": [g.to_dict() for g in graphs]}
    if config.k:
        pairs = auctions.gen_mph_instances(count, seed, k=config.k)
        return {
            "domain": "auctions",
            "kind": "mph",
            "instances": [
                {"m": m, "bids": [v.to_dict() for v in vals]} for m, vals in pairs
            ],
        }
    pairs = auctions.gen_symmetric_instances(count, seed)
    return {
        "domain": "auctions",
        "kind": "symmetric",
        "instances": [
            {"m": m, "levels": [[frac_str(x) for x in v.levels] for v in vals]}
            for m, vals in pairs
        ],
    }


def cmd_gen(config: ExperimentConfig) -> list:
    t0 = time.monotonic()
    count = config.rounds or 5
    payload = _gen_payload(config, count)
    if not config.out:
        raise CLIError("gen needs --out to know where to write instances")
    with open(config.out, "w") as fh:
        json.dump(payload, fh)
    row = ReportRow("gen", config, {"count": count, "file": config.out})
    return [_mark(row, t0)]


def _parse_auction_instance(entry: dict, kind: str):
    if kind == "mph":
        vals = tuple(
            auctions.MPHkValuation.from_dict(i, d) for i, d in enumerate(entry["bids"])
        )
    else:
        vals = tuple(
            auctions.SymmetricValuation(i, [parse_frac(x) for x in levels])
            for i, levels in enumerate(entry["levels"])
        )
    return entry["m"], vals


def cmd_solve(config: ExperimentConfig) -> list:
    data = _load_instances(config)
    rows = []
    for idx, entry in enumerate(data["instances"]):
        t0 = time.monotonic()
        if config.domain == "packing":
            inst = packing.PackingInstance.from_dict(entry)
            _, value = packing.solve_packing_lp(inst, packing.truthful_bids(inst))
        elif config.domain == "flow":
            inst = flows.FlowInstance.from_dict(entry)
            _, value = flows.greedy_fractional_flow(
                inst, flows.truthful_flow_bids(inst)
            )
        elif config.domain == "maxtsp":
            g = maxtsp.CompleteDigraph.from_dict(entry)
            _, value = maxtsp.max_weight_cycle_cover(g)
        else:
            m, vals = _parse_auction_instance(entry, data.get("kind", "mph"))
            if data.get("kind") == "symmetric":
                _, value = auctions.solve_cardinality_lp(m, vals)
            else:
                _, value = auctions.solve_config_lp(len(vals), m, vals)
        rows.append(_mark(ReportRow(f"solve-{idx}", config, {"value": value}), t0))
    return rows


def cmd_round(config: ExperimentConfig) -> list:
    data = _load_instances(config)
    rows = []
    for idx, entry in enumerate(data["instances"]):
        t0 = time.monotonic()
        if config.domain == "flow":
            inst = flows.FlowInstance.from_dict(entry)
            bids = flows.truthful_flow_bids(inst)
            flow, relaxed = flows.greedy_fractional_flow(inst, bids)
            eps = config.eps if config.eps is not None else Fraction(1, 10)
            assignment = flows.rt_round(flow, inst, eps, config.seed)
            routed = sum(
                (
                    inst.requests[i].value
                    for i, p in enumerate(assignment.paths)
                    if p is not None
                ),
                Fraction(0),
            )
            results = {"relaxed": relaxed, "rounded": routed}
        elif config.domain == "maxtsp":
            g = maxtsp.CompleteDigraph.from_dict(entry)
            cover, relaxed = maxtsp.max_weight_cycle_cover(g)
            tour = maxtsp.fisher_round(cover, g, config.seed)
            results = {"relaxed": relaxed, "rounded": tour.weight(g)}
        elif config.domain == "auctions":
            if data.get("kind") != "symmetric":
                raise CLIError("rounding needs a symmetric auction instance")
            m, vals = _parse_auction_instance(entry, "symmetric")
            xbar, relaxed = auctions.solve_cardinality_lp(m, vals)
            sizes = auctions.fair_round(xbar, m, config.seed)
            rounded = sum((v.levels[s] for v, s in zip(vals, sizes)), Fraction(0))
            results = {"relaxed": relaxed, "rounded": rounded}
        else:
            raise CLIError("the packing pipeline has no rounding stage")
        rows.append(_mark(ReportRow(f"round-{idx}", config, results), t0))
    return rows


# ----------------------------------------------------------------- checks


def _smoothness_row(config, name, rule, values, bid_grid, params) -> ReportRow:
    t0 = time.monotonic()
    cert = check_smoothness(rule, [values], bid_grid, params)
    row = ReportRow(
        name,
        config,
        {
            "lam": params.lam,
            "mu": params.mu,
            "min_slack": cert.min_slack,
            "profiles": len(bid_grid),
        },
        verdict="holds" if cert.holds else "violated",
        witness=None if cert.holds else json.dumps(cert.witness, default=str),
    )
    return _mark(row, t0)


def _uniform_scalings(values, resolution) -> list:
    """One bid profile per theta, every player scaled alike."""
    return [tuple(v.scale(t) for v in values) for t in theta_grid(resolution)]


def cmd_check_smoothness(config: ExperimentConfig) -> list:
    res = config.grid
    if config.domain == "packing":
        if config.m:
            # exact integral mechanism checked at its own equilibrium profile;
            # large m makes every half-value deviation worthless there
            ce = packing.gen_multiunit_counterexample(config.m)
            params = SmoothnessParams(Fraction(1, 2), 2, HALF_VALUE)
            return [
                _smoothness_row(
                    config, "multiunit-integral", ce.rule, ce.values, [ce.bids], params
                )
            ]
        inst = packing.gen_instances("multi-unit", 1, config.seed, n=2, m=3)[0]
        values = packing.truthful_bids(inst)
        grid = scaled_bid_profiles(values, theta_grid(res))
        d = packing.column_sparsity(inst)
        params = SmoothnessParams(Fraction(1, 2), d + 1, HALF_VALUE)
        return [
            _smoothness_row(
                config, "packing-lp", packing.lp_rule(inst), values, grid, params
            )
        ]
    if config.domain == "flow":
        inst = _unit_edge_duopoly()
        values = flows.truthful_flow_bids(inst)
        grid = scaled_bid_profiles(values, theta_grid(res))
        params = SmoothnessParams(Fraction(1, 2), 1, HALF_VALUE)
        return [
            _smoothness_row(
                config, "flow-greedy", flows.fractional_rule(inst), values, grid, params
            )
        ]
    if config.domain == "maxtsp":
        rows = []
        params = SmoothnessParams(Fraction(1, 2), 3, HALF_VALUE)
        for t, g in enumerate(maxtsp.gen_digraphs(2, config.seed, sizes=(4,))):
            values = maxtsp.truthful_edge_bids(g)
            # one player per ordered vertex pair; scale profiles uniformly,
            # the per-player product grid would be 3^12 wide
            grid = _uniform_scalings(values, res)
            rows.append(
                _smoothness_row(
                    config,
                    f"cycle-cover-{t}",
                    maxtsp.cycle_cover_rule(g),
                    values,
                    grid,
                    params,
                )
            )
        return rows
    m = config.m or 2
    values = tuple(
        auctions.SymmetricValuation(i, tuple(Fraction(j) for j in range(m + 1)))
        for i in range(2)
    )
    grid = scaled_bid_profiles(values, theta_grid(res))
    params = SmoothnessParams(Fraction(1, 2), 2, HALF_VALUE)
    rule = auctions.config_lp_rule(2, m)
    return [_smoothness_row(config, "config-lp", rule, values, grid, params)]


def cmd_check_lemma(config: ExperimentConfig) -> list:
    count = config.rounds or 25
    t0 = time.monotonic()
    if config.domain == "packing":
        sparsities = (config.d,) if config.d else (1, 2, 3)
        certs = packing.social_cost_suite(count, config.seed, sparsities)
        held = sum(1 for c in certs if c.holds)
        row = ReportRow(
            "pip-social-cost",
            config,
            {"checked": len(certs), "held": held},
            verdict="holds" if held == len(certs) else "violated",
        )
        return [_mark(row, t0)]
    if config.domain == "flow":
        held = 0
        insts = flows.gen_flow_instances(count, config.seed)
        for inst in insts:
            bids = flows.truthful_flow_bids(inst)
            _, greedy = flows.greedy_fractional_flow(inst, bids)
            if greedy == flows.solve_path_lp(inst, bids):
                held += 1
        row = ReportRow(
            "greedy-equals-lp",
            config,
            {"checked": len(insts), "held": held},
            verdict="holds" if held == len(insts) else "violated",
        )
        return [_mark(row, t0)]
    if config.domain == "maxtsp":
        held = 0
        graphs = maxtsp.gen_digraphs(count, config.seed, sizes=(4, 5))
        for g in graphs:
            bids = maxtsp.truthful_edge_bids(g)
            cover, _ = maxtsp.max_weight_cycle_cover(g)
            if maxtsp.check_cc_social_cost(g, bids, cover).holds:
                held += 1
        row = ReportRow(
            "cycle-cover-social-cost",
            config,
            {"checked": len(graphs), "held": held},
            verdict="holds" if held == len(graphs) else "violated",
        )
        return [_mark(row, t0)]
    held = 0
    k = config.k or 1
    pairs = (
        auctions.gen_mph_instances(count, config.seed, k=k)
        if k > 1
        else auctions.gen_xos_instances(count, config.seed)
    )
    for m, values in pairs:
        x, _ = auctions.solve_config_lp(len(values), m, values)
        if auctions.check_ca_social_cost(values, x, k).holds:
            held += 1
    row = ReportRow(
        "one-out-social-cost",
        config,
        {"checked": len(pairs), "held": held},
        verdict="holds" if held == len(pairs) else "violated",
    )
    return [_mark(row, t0)]


def cmd_counterexample(config: ExperimentConfig) -> list:
    m = config.m or 10
    t0 = time.monotonic()
    if config.domain == "packing":
        ce = packing.gen_multiunit_counterexample(m)
        grids = packing.counterexample_deviations(ce)
    elif config.domain == "flow":
        ce = flows.gen_flow_counterexample(m)
        grids = flows.counterexample_flow_deviations(ce)
    elif config.domain == "auctions":
        ce = auctions.gen_symmetric_counterexample(m)
        grids = auctions.counterexample_symmetric_deviations(ce)
    else:
        raise CLIError("no equilibrium gap construction for this domain")
    cert = verify_pure_nash(ce.rule, ce.bids, ce.values, grids)
    row = ReportRow(
        "counterexample",
        config,
        {
            "m": m,
            "optimum": ce.optimum,
            "equilibrium_welfare": ce.equilibrium_welfare,
            "ratio": ce.ratio,
            "is_nash": cert.is_nash,
            "max_regret": cert.max_regret,
        },
        verdict="ok" if cert.is_nash else "violated",
    )
    return [_mark(row, t0)]


# --------------------------------------------------------------- dynamics


def _unit_edge_duopoly() -> flows.FlowInstance:
    """Two requests of demand 1, values 1 and 1/2, one shared unit edge."""
    graph = CapacitatedDigraph(2, [(0, 1, 1)])
    return flows.FlowInstance(graph, 0, [(1, 1, 1), (1, 1, Fraction(1, 2))])


def _dynamics_setup(config: ExperimentConfig):
    if config.domain == "flow":
        inst = _unit_edge_duopoly()
        values = flows.truthful_flow_bids(inst)
        opt = flows.solve_path_lp(inst, values)
        params = SmoothnessParams(Fraction(1, 2), 1, HALF_VALUE)
        return flows.fractional_rule(inst), values, opt, params
    if config.domain == "packing":
        ce = packing.gen_multiunit_counterexample(config.m or 4)
        _, opt = packing.solve_packing_lp(ce.instance, ce.values)
        params = SmoothnessParams(Fraction(1, 2), 2, HALF_VALUE)
        return packing.integral_rule(ce.instance), ce.values, opt, params
    if config.domain == "auctions":
        m = config.m or 4
        ce = auctions.gen_symmetric_counterexample(m)
        opt = auctions.solve_cardinality_lp(m, ce.values)[1]
        params = compose_smoothness(SmoothnessParams(Fraction(1, 2), 2, HALF_VALUE), 16)
        return auctions.fair_rule(m), ce.values, opt, params
    g = maxtsp.gen_digraphs(1, config.seed, sizes=(3,))[0]
    values = maxtsp.truthful_edge_bids(g)
    _, opt = maxtsp.max_weight_cycle_cover(g)
    params = SmoothnessParams(Fraction(1, 2), 3, HALF_VALUE)
    return maxtsp.cycle_cover_rule(g), values, opt, params


def cmd_dynamics(config: ExperimentConfig) -> list:
    t0 = time.monotonic()
    rule, values, opt, params = _dynamics_setup(config)
    T = config.rounds or 2000
    grid = dynamics.StrategyGrid.uniform(len(values), config.grid)
    trace = dynamics.run_hedge(rule, values, grid, T, seed=config.seed)
    report = dynamics.empirical_poa(trace, opt, smoothness=params)
    holds, lhs, rhs = dynamics.check_trace_smoothness(trace, values, params, opt)
    row = ReportRow(
        "hedge",
        config,
        {
            "rounds": T,
            "opt": report.opt,
            "average_welfare": report.average_welfare,
            "ratio": report.ratio if report.ratio is not None else "inf",
            "poa_bound": report.bound,
            "max_external_regret": max(report.external_regret),
            "max_half_value_regret": max(report.half_value_regret),
            "trace_lhs": lhs,
            "trace_rhs": rhs,
        },
        verdict="holds" if holds else "violated",
    )
    return [_mark(row, t0)]


# ------------------------------------------------------------ entry point


HANDLERS = {
    "gen": cmd_gen,
    "solve": cmd_solve,
    "round": cmd_round,
    "check-smoothness": cmd_check_smoothness,
    "check-lemma": cmd_check_lemma,
    "counterexample": cmd_counterexample,
    "dynamics": cmd_dynamics,
    "paper-table": cmd_paper_table,
}


def cmd_run(config: ExperimentConfig) -> list:
    return HANDLERS[config.action](config)


def write_rows(rows, out: Optional[str]) -> None:
    cells = [row.cells() for row in rows]
    if out is None:
        for c in cells:
            print("  ".join(f"{k}={c[k]}" for k in c))
        return
    if out.endswith(".json"):
        with open(out, "w") as fh:
            json.dump(cells, fh, indent=1)
        return
    if out.endswith(".csv"):
        header = []
        for c in cells:
            for k in c:
                if k not in header:
                    header.append(k)
        with open(out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=header, quoting=csv.QUOTE_ALL)
            writer.writeheader()
            writer.writerows(cells)
        return
    raise CLIError("--out must end in .csv or .json")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(message)


def build_parser() -> _Parser:
    p = _Parser(prog="anarchy", description=__doc__)
    p.add_argument("domain", choices=DOMAINS)
    p.add_argument("action", choices=ACTIONS)
    p.add_argument("--instance", help="instance file produced by gen")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d", type=int, help="constraint sparsity (packing)")
    p.add_argument("--k", type=int, help="valuation hierarchy level (auctions)")
    p.add_argument("--m", type=int, help="units/items/market size")
    p.add_argument("--eps", type=parse_frac, help="rounding slack as p/q")
    p.add_argument("--rounds", type=int, help="learning rounds or trial count")
    p.add_argument(
        "--grid", type=int, default=2, help="multiplier grid resolution (even)"
    )
    p.add_argument("--out", help="write rows to .csv or .json")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        config = ExperimentConfig(
            domain=args.domain,
            action=args.action,
            instance=args.instance,
            seed=args.seed,
            d=args.d,
            k=args.k,
            m=args.m,
            eps=args.eps,
            rounds=args.rounds,
            grid=args.grid,
            out=args.out,
        )
        rows = cmd_run(config)
        write_rows(rows, config.out if config.action != "gen" else None)
    except (CLIError, ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"anarchy: error: {exc}", file=sys.stderr)
        return 1
    if any(row.verdict == "violated" for row in rows):
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
