"""Analyst policies that drive curator interactions.

A policy maps (transcript prefix, remaining squared budget, rng) to the next
spend, or None to stop.  Policies are deterministic given that triple and may
deliberately emit inadmissible spends -- admissibility is the filter's job.
``summary`` reduces a finished transcript to one scalar for two-sample
testing; every built-in policy uses the sum of accepted answers.

The built-in suite covers the four interaction shapes the harness needs:
nonadaptive replay (``fixed``), answer-adaptive spending (``sign_adaptive``),
geometric boundary exhaustion (``greedy_halving``), and refusal probing
(``overspend_prober``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .budget import check_spend

# Policies stop once less than this much squared budget remains.
STOP_TOL = 1e-6


@dataclass(frozen=True)
class AdversaryPolicy:
    name: str
    next_spend: Callable  # (prefix rounds, remaining_sq, rng) -> float | None
    summary: Callable     # Transcript -> float


def summary_sum_of_answers(transcript) -> float:
    return float(sum(r.answer for r in transcript.rounds if r.accepted))


def policy_fixed(spends: Sequence[float]) -> AdversaryPolicy:
    """Replay a predetermined spend list, then stop."""
    fixed = tuple(check_spend(s) for s in spends)

    def next_spend(prefix, remaining_sq, rng) -> Optional[float]:
        i = len(prefix)
        return fixed[i] if i < len(fixed) else None

    return AdversaryPolicy("fixed", next_spend, summary_sum_of_answers)


def policy_sign_adaptive(hi: float, lo: float) -> AdversaryPolicy:
    """Spend hi after a positive answer, lo otherwise.

    The first spend is hi/2; all later spends are capped at
    sqrt(remaining_sq) so they are never refused.  Stops once the remaining
    squared budget drops below STOP_TOL.  Before any accepted answer exists,
    the lo branch applies.
    """
    hi = check_spend(hi)
    lo = check_spend(lo)
    if lo > hi:
        raise ValueError(f"need 0 <= lo <= hi, got lo={lo}, hi={hi}")

    def next_spend(prefix, remaining_sq, rng) -> Optional[float]:
        if remaining_sq < STOP_TOL:
            return None
        if len(prefix) == 0:
            return hi / 2.0
        last = None
        for r in reversed(prefix):
            if r.accepted:
                last = r.answer
                break
        base = hi if (last is not None and last > 0.0) else lo
        return min(base, math.sqrt(remaining_sq))

    return AdversaryPolicy("sign_adaptive", next_spend, summary_sum_of_answers)


def policy_greedy_halving() -> AdversaryPolicy:
    """Spend sqrt(remaining_sq / 2) each round, halving what is left.

    Never refused by construction; after k rounds at budget 1 the remaining
    squared budget is 2**-k, so the STOP_TOL rule stops it at round 20.
    """

    def next_spend(prefix, remaining_sq, rng) -> Optional[float]:
        if remaining_sq < STOP_TOL:
            return None
        return math.sqrt(remaining_sq / 2.0)

    return AdversaryPolicy("greedy_halving", next_spend, summary_sum_of_answers)


def policy_overspend_prober() -> AdversaryPolicy:
    """Alternate admissible spends with deliberately inadmissible repeats.

    Even rounds spend 0.9 * sqrt(remaining_sq), which is always admitted;
    odd rounds repeat the previous spend, which is always refused while any
    budget remains (0.81 r > 0.19 r).  The refusal positions are therefore a
    deterministic function of the budget alone, which is exactly what the
    refusal-pattern checks exploit.
    """

    def next_spend(prefix, remaining_sq, rng) -> Optional[float]:
        if remaining_sq < STOP_TOL:
            return None
        if len(prefix) % 2 == 0:
            return 0.9 * math.sqrt(remaining_sq)
        return prefix[-1].spend

    return AdversaryPolicy("overspend_prober", next_spend, summary_sum_of_answers)


_REGISTRY = {
    "fixed": policy_fixed,
    "sign_adaptive": policy_sign_adaptive,
    "greedy_halving": policy_greedy_halving,
    "overspend_prober": policy_overspend_prober,
}


def policy_names() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def make_policy(name: str, **params) -> AdversaryPolicy:
    """Construct a registered policy by name (hyphens and underscores are
    interchangeable)."""
    key = name.replace("-", "_")
    if key not in _REGISTRY:
        raise ValueError(f"unknown policy {name!r}; known: {', '.join(policy_names())}")
    return _REGISTRY[key](**params)
