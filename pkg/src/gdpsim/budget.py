"""Adaptive privacy-budget filter.

A query with spend ``mu`` is admitted iff the running sum of squared spends,
plus ``mu**2``, stays within the total squared budget.  Two floating-point
safeguards make the real-arithmetic rule deterministic in practice:

* the running sum is Kahan-compensated, and
* the admission comparison carries a relative slack of ``2**-40``, so
  analytically tight sequences such as spends (0.6, 0.8) against budget 1
  are always admitted.

Once the ledger shows the budget exactly exhausted (``spent_sq >=
budget_sq``), positive spends are refused outright: in real arithmetic no
positive spend is admissible there, and the slack must not reopen a closed
budget.  Zero spends are admissible at any time and leave the ledger
untouched.

Refusal is per-query and never terminates an interaction; a later, smaller
spend may still be admitted.  States are immutable values; operations return
new states, so sharing across threads is safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ._numeric import kahan_step

# Relative slack on the admission comparison, wide enough to absorb rounding
# in the compensated sum but far below any meaningful privacy quantity.
REL_SLACK = 2.0 ** -40


@dataclass(frozen=True)
class FilterState:
    """Running squared-spend ledger against a fixed squared budget."""

    budget_sq: float
    spent_sq: float = 0.0
    compensation: float = 0.0


def check_budget(mu0) -> float:
    """Validate a total budget value; returns it as a float."""
    mu0 = float(mu0)
    if not math.isfinite(mu0) or mu0 < 0.0:
        raise ValueError(f"budget must be a finite nonnegative real, got {mu0!r}")
    if not math.isfinite(mu0 * mu0):
        raise ValueError(f"squared budget overflows a double: {mu0!r}")
    return mu0


def check_spend(mu) -> float:
    """Validate a per-query spend; returns it as a float.

    Malformed spends raise ValueError -- deliberately distinct from a budget
    refusal, which is an ordinary decision.
    """
    mu = float(mu)
    if not math.isfinite(mu) or mu < 0.0:
        raise ValueError(f"spend must be a finite nonnegative real, got {mu!r}")
    return mu


def filter_new(mu0) -> FilterState:
    """Fresh filter with total squared budget ``mu0**2`` and nothing spent."""
    mu0 = check_budget(mu0)
    return FilterState(budget_sq=mu0 * mu0)


def try_spend(state: FilterState, mu) -> tuple[bool, FilterState]:
    """Admit or refuse a spend.

    Returns ``(True, new_state)`` on admission and ``(False, state)`` on
    refusal.  Refusal mutates nothing.
    """
    mu = check_spend(mu)
    if mu == 0.0:
        return True, state
    if state.spent_sq >= state.budget_sq:
        return False, state
    total, comp = kahan_step(state.spent_sq, state.compensation, mu * mu)
    if total > state.budget_sq * (1.0 + REL_SLACK):
        return False, state
    return True, FilterState(state.budget_sq, total, comp)


def remaining_sq(state: FilterState) -> float:
    """Unspent squared budget, floored at zero."""
    return max(0.0, state.budget_sq - state.spent_sq)
