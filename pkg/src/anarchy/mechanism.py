"""Pay-your-bid mechanisms and their smoothness certificates.

A mechanism here is an allocation rule combined with first-price payments:
each player reports a valuation (the bid), the rule picks an outcome from
the bids alone, and every player pays their own bid's value for the share
they received. Utilities are always measured against true valuations.

Smoothness of parameters (lam, mu) means: on every valuation profile v and
bid profile b there are deviation bids b'_i with

    sum_i E[u_i((b'_i, b_-i), v_i)]  >=  lam * OPT(v) - mu * sum_i E[p_i(b)].

The robust price-of-anarchy bound implied is max(1, mu) / lam. Deviations
come in two flavors: "general" (searched over a grid) and "half-value"
(b'_i is half the true valuation, computed rather than searched). An
approximation-preserving composition turns smoothness of an exact relaxed
maximizer into smoothness of the relax-and-round mechanism built on any
oblivious rounding with a per-player 1/alpha expectation guarantee.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from random import Random
from typing import Callable, Optional, Sequence

from .errors import StructuralError
from .rationals import F0, F1, HALF, frac, frac_str

GENERAL = "general"
HALF_VALUE = "half-value"

# Above this support size, expectations fall back to seeded sampling.
EXACT_SUPPORT_LIMIT = 10_000


class Valuation:
    """Interface for player valuations (and bids, which are valuations too).

    Concrete classes are frozen dataclasses carrying a player index and a
    domain tag; value(None) must be 0 and values must be nonnegative.
    """

    domain: str
    player: int

    def value(self, outcome) -> Fraction:
        raise NotImplementedError

    def scale(self, theta) -> "Valuation":
        raise NotImplementedError

    def best_case(self) -> Fraction:
        """Upper bound on value over all outcomes (used to normalize dynamics)."""
        raise NotImplementedError


@dataclass(frozen=True)
class SmoothnessParams:
    lam: Fraction
    mu: Fraction
    deviation: str = GENERAL

    def __post_init__(self):
        object.__setattr__(self, "lam", frac(self.lam))
        object.__setattr__(self, "mu", frac(self.mu))
        if self.lam <= 0:
            raise StructuralError("smoothness needs lam > 0")
        if self.mu < 0:
            raise StructuralError("smoothness needs mu >= 0")
        if self.deviation not in (GENERAL, HALF_VALUE):
            raise StructuralError(f"unknown deviation mode {self.deviation!r}")


def poa_from_smoothness(params: SmoothnessParams) -> Fraction:
    """Robust price-of-anarchy bound max(1, mu) / lam."""
    return max(F1, params.mu) / params.lam


def compose_smoothness(params: SmoothnessParams, alpha) -> SmoothnessParams:
    """Smoothness of relax-and-round given a 1/alpha oblivious rounding.

    Starting from an exact declared-welfare maximizer over the relaxation,
    general-mode smoothness composes to (lam / (2 alpha), mu) and half-value
    smoothness to (lam / alpha, mu); the result is half-value in both cases
    because the surviving deviation bids half the true valuation.
    """
    alpha = frac(alpha)
    if alpha < 1:
        raise StructuralError("approximation factor alpha must be at least 1")
    if params.deviation == HALF_VALUE:
        lam = params.lam / alpha
    else:
        lam = params.lam / (2 * alpha)
    return SmoothnessParams(lam, params.mu, HALF_VALUE)


@dataclass
class AllocationRule:
    """Bids-to-outcome map plus the metadata the checkers need.

    allocate(bids, seed) -> outcome. Deterministic rules ignore the seed.
    support(bids) -> [(probability, outcome), ...] for randomized rules whose
    randomness can be enumerated. exact marks exact declared-welfare
    maximizers over the rule's own outcome space (their optimum at truthful
    bids serves as OPT). opt_welfare overrides the OPT oracle, e.g. with a
    relaxation optimum for a rounding-composed rule. relax/round_stage split
    the rule for callers that want to cache the deterministic stage.
    """

    domain: str
    allocate: Callable
    exact: bool = False
    randomized: bool = False
    support: Optional[Callable] = None
    opt_welfare: Optional[Callable] = None
    relax: Optional[Callable] = None
    round_stage: Optional[Callable] = None
    name: str = ""


@dataclass(frozen=True)
class MechanismRun:
    outcome: object
    payments: tuple
    utilities: tuple
    welfare: Fraction
    seed: Optional[int] = None


@dataclass(frozen=True)
class ExpectedRun:
    payments: tuple
    utilities: tuple
    welfare: Fraction
    exact: bool


def _check_profile(rule: AllocationRule, bids, values=None):
    if values is not None and len(bids) != len(values):
        raise StructuralError("bid and valuation profiles differ in length")
    for i, b in enumerate(bids):
        if b.domain != rule.domain:
            raise StructuralError(
                f"bid for player {i} has domain {b.domain!r}, rule wants {rule.domain!r}"
            )
        if b.player != i:
            raise StructuralError(f"bid at position {i} is bound to player {b.player}")
    if values is not None:
        for i, v in enumerate(values):
            if v.domain != rule.domain or v.player != i:
                raise StructuralError("valuation profile is inconsistent with the rule")


def run_pay_your_bid(
    rule: AllocationRule, bids, values, seed: Optional[int] = None
) -> MechanismRun:
    """One realized run: allocate on bids, charge first prices, score on values."""
    _check_profile(rule, bids, values)
    outcome = rule.allocate(bids, seed)
    payments = tuple(b.value(outcome) for b in bids)
    gross = tuple(v.value(outcome) for v in values)
    utilities = tuple(g - p for g, p in zip(gross, payments))
    return MechanismRun(outcome, payments, utilities, sum(gross, F0), seed)


def expected_run(
    rule: AllocationRule, bids, values, samples: int = 10_000, seed: int = 0
) -> ExpectedRun:
    """Expected payments/utilities/welfare over the rule's randomness.

    Exact enumeration whenever the rule exposes a support of at most
    EXACT_SUPPORT_LIMIT outcomes; otherwise seeded Monte Carlo with the given
    sample count, flagged as non-exact.
    """
    _check_profile(rule, bids, values)
    n = len(bids)
    if not rule.randomized:
        run = run_pay_your_bid(rule, bids, values, None)
        return ExpectedRun(run.payments, run.utilities, run.welfare, True)

    if rule.support is not None:
        outcomes = rule.support(bids)
        if len(outcomes) <= EXACT_SUPPORT_LIMIT:
            total_p = sum(p for p, _ in outcomes)
            if total_p != 1:
                raise StructuralError("support probabilities must sum to 1")
            payments = [F0] * n
            gross = [F0] * n
            for p, outcome in outcomes:
                for i in range(n):
                    payments[i] += p * bids[i].value(outcome)
                    gross[i] += p * values[i].value(outcome)
            utilities = tuple(g - q for g, q in zip(gross, payments))
            return ExpectedRun(tuple(payments), utilities, sum(gross, F0), True)

    rng = Random(seed)
    payments = [F0] * n
    gross = [F0] * n
    for _ in range(samples):
        outcome = rule.allocate(bids, rng.getrandbits(63))
        for i in range(n):
            payments[i] += bids[i].value(outcome)
            gross[i] += values[i].value(outcome)
    payments = tuple(p / samples for p in payments)
    gross = tuple(g / samples for g in gross)
    utilities = tuple(g - q for g, q in zip(gross, payments))
    return ExpectedRun(payments, utilities, sum(gross, F0), False)


def opt_welfare(rule: AllocationRule, values) -> Fraction:
    """OPT(v) for the rule's outcome space.

    Uses the rule's explicit oracle when present; otherwise exact rules are
    their own oracle (run them on truthful bids). Non-exact rules without an
    oracle cannot be checked.
    """
    if rule.opt_welfare is not None:
        return rule.opt_welfare(values)
    if not rule.exact:
        raise StructuralError(
            "rule is not an exact maximizer and provides no OPT oracle"
        )
    run = run_pay_your_bid(rule, values, values, None)
    return run.welfare


@dataclass(frozen=True)
class SmoothnessCertificate:
    domain: str
    lam: Fraction
    mu: Fraction
    deviation: str
    holds: bool
    min_slack: Fraction
    witness: Optional[dict]
    statistical: bool
    checked: int
    grid: str = ""

    def to_dict(self) -> dict:
        w = None
        if self.witness is not None:
            w = {
                "values_index": self.witness["values_index"],
                "bids_index": self.witness["bids_index"],
                "lhs": frac_str(self.witness["lhs"]),
                "rhs": frac_str(self.witness["rhs"]),
            }
        return {
            "domain": self.domain,
            "lambda": frac_str(self.lam),
            "mu": frac_str(self.mu),
            "deviation_mode": self.deviation,
            "grid": self.grid,
            "verdict": "holds" if self.holds else "violated",
            "statistical": self.statistical,
            "slack": frac_str(self.min_slack),
            "witness": w,
            "checked": self.checked,
        }


def check_smoothness(
    rule: AllocationRule,
    value_grid: Sequence,
    bid_grid: Sequence,
    params: SmoothnessParams,
    samples: int = 10_000,
    seed: int = 0,
) -> SmoothnessCertificate:
    """Test the smoothness inequality on every (values, bids) grid pair.

    In half-value mode the deviation of player i is values[i] scaled by 1/2,
    computed, never searched. In general mode the deviation is the best
    candidate among the player's bids occurring anywhere in the bid grid
    plus the half-value bid. Returns the minimum slack (lhs - rhs) and a
    witness profile when the inequality fails somewhere.
    """
    min_slack = None
    witness = None
    statistical = False
    checked = 0
    for vi, values in enumerate(value_grid):
        opt = opt_welfare(rule, values)
        n = len(values)
        for bi, bids in enumerate(bid_grid):
            base = expected_run(rule, bids, values, samples, seed)
            statistical |= not base.exact
            lhs = F0
            for i in range(n):
                if params.deviation == HALF_VALUE:
                    candidates = [values[i].scale(HALF)]
                else:
                    candidates = [values[i].scale(HALF)]
                    seen = {candidates[0]}
                    for profile in bid_grid:
                        if profile[i] not in seen:
                            seen.add(profile[i])
                            candidates.append(profile[i])
                best = None
                for dev in candidates:
                    dev_bids = tuple(bids[:i]) + (dev,) + tuple(bids[i + 1 :])
                    run = expected_run(rule, dev_bids, values, samples, seed)
                    statistical |= not run.exact
                    if best is None or run.utilities[i] > best:
                        best = run.utilities[i]
                lhs += best
            rhs = params.lam * opt - params.mu * sum(base.payments, F0)
            slack = lhs - rhs
            checked += 1
            if min_slack is None or slack < min_slack:
                min_slack = slack
                if slack < 0:
                    witness = {
                        "values_index": vi,
                        "bids_index": bi,
                        "lhs": lhs,
                        "rhs": rhs,
                    }
    if min_slack is None:
        raise StructuralError("empty grid: nothing to check")
    return SmoothnessCertificate(
        domain=rule.domain,
        lam=params.lam,
        mu=params.mu,
        deviation=params.deviation,
        holds=min_slack >= 0,
        min_slack=min_slack,
        witness=witness,
        statistical=statistical,
        checked=checked,
        grid=f"{len(value_grid)} valuation profiles x {len(bid_grid)} bid profiles",
    )


@dataclass(frozen=True)
class CostCertificate:
    """Outcome of a social-cost style inequality check: holds iff lhs <= rhs."""

    holds: bool
    lhs: Fraction
    rhs: Fraction
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "verdict": "holds" if self.holds else "violated",
            "lhs": frac_str(self.lhs),
            "rhs": frac_str(self.rhs),
            "detail": {k: str(v) for k, v in self.detail.items()},
        }


@dataclass(frozen=True)
class Counterexample:
    """A lower-bound construction: instance, equilibrium, and its welfare gap.

    The bids form a pure Nash equilibrium of the pay-your-bid mechanism given
    by rule (certify with verify_pure_nash), and ratio = optimum divided by
    the equilibrium welfare.
    """

    instance: object
    values: tuple
    bids: tuple
    rule: AllocationRule
    optimum: Fraction
    equilibrium_welfare: Fraction
    ratio: Fraction


@dataclass(frozen=True)
class NashCertificate:
    is_nash: bool
    max_regret: Fraction
    witness: Optional[dict]
    statistical: bool

    def to_dict(self) -> dict:
        return {
            "verdict": "pure-nash" if self.is_nash else "deviation-found",
            "max_regret": frac_str(self.max_regret),
            "witness": self.witness,
            "statistical": self.statistical,
        }


def verify_pure_nash(
    rule: AllocationRule,
    bids,
    values,
    deviations: Sequence[Sequence],
    samples: int = 10_000,
    seed: int = 0,
) -> NashCertificate:
    """Check that no player gains by switching to any listed deviation bid.

    deviations[i] is the candidate bid list for player i; empty lists make
    the check vacuously true. max_regret is the largest expected improvement
    found, floored at zero, so equilibria report max_regret == 0 exactly.
    """
    _check_profile(rule, bids, values)
    base = expected_run(rule, bids, values, samples, seed)
    statistical = not base.exact
    max_regret = F0
    witness = None
    for i, cand in enumerate(deviations):
        for d, dev in enumerate(cand):
            dev_bids = tuple(bids[:i]) + (dev,) + tuple(bids[i + 1 :])
            run = expected_run(rule, dev_bids, values, samples, seed)
            statistical |= not run.exact
            gain = run.utilities[i] - base.utilities[i]
            if gain > max_regret:
                max_regret = gain
                witness = {"player": i, "deviation_index": d}
    return NashCertificate(max_regret == 0, max_regret, witness, statistical)


def theta_grid(resolution: int) -> tuple:
    """Multipliers {0, 1/G, ..., 1}; always contains 0, 1/2 needs even G."""
    if resolution < 1:
        raise StructuralError("grid resolution must be positive")
    return tuple(Fraction(j, resolution) for j in range(resolution + 1))


def scaled_bid_profiles(values, thetas) -> list:
    """All bid profiles (theta_1 v_1, ..., theta_n v_n) over the given thetas."""
    per_player = [[v.scale(t) for t in thetas] for v in values]
    return [tuple(combo) for combo in itertools.product(*per_player)]
