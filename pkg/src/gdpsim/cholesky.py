"""Incremental canonical Cholesky factor of I - m m^T for a growing,
normalized spend vector m with ||m|| <= 1.

Canonical means: exactly rank(Sigma) positive diagonal entries, and the
remaining columns all zero.  For Sigma_i = I - m_i m_i^T the factor grows one
row per round and never rewrites history, which is what makes an online
simulation possible.

Writing Q_i = ||m_i||^2 and y_i = L_i^{-1} m_i (the solved column), the new
row appended for spend m is

    r   = -m * y_{i-1}
    d_i = sqrt((1 - Q_i) / (1 - Q_{i-1}))

Dense mode stores the rows and recomputes y by an explicit forward solve --
it is the slow, transparent reference.  Streaming mode carries only three
scalars (Q, the inner product s = y . v against the noise seeds, and the
round index) using the closed forms

    U_i    = -m * s + d_i * V_i            (last entry of L_i v_i)
    y_last = m / sqrt((1 - Q_i)(1 - Q_{i-1}))     (0 once Q_i = 1)
    s     <- s + y_last * V_i

which follow from L_i y_i = m_i and ||y||^2 = Q/(1-Q).  The two modes must
agree to 1e-9 per noise value; the verification suite enforces that.

Degenerate cases.  At exact exhaustion (Q = 1) the factor gains its one
all-zero column; afterwards only zero spends are admissible and each appends
the row (0, ..., 0, 1), since the covariance grows by an identity block.
Radicands driven into [-1e-12, 0) by rounding clamp to zero; spends that
overshoot the unit bound by more than that band raise BudgetOverflowError.

Numerical caveat: admitting a spend whose square exceeds the true remaining
capacity by eps (the filter's comparison slack allows eps up to ~9e-13)
perturbs the factor by about eps/(1-Q).  That is harmless for any policy
that stops near exhaustion, but a caller insisting on slack-sized spends at
1-Q below ~1e-10 gets a visibly distorted row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._numeric import kahan_step
from .errors import BudgetOverflowError, StateDesyncError

# Radicands in [-CLAMP_BAND, 0) are rounding debris and clamp to zero; anything
# more negative means the caller fed an inadmissible spend vector.  The band is
# wider than the budget filter's comparison slack, so filter-admitted spends
# never trip the checks below.
CLAMP_BAND = 1e-12


@dataclass(frozen=True)
class DenseCholesky:
    """Reference mode: the factor held row by row."""

    rows: tuple = ()      # row i is a float64 array of length i+1
    spends: tuple = ()    # normalized spends m_1..m_i
    q: float = 0.0        # ||m||^2, Kahan-compensated
    q_comp: float = 0.0

    @property
    def dimension(self) -> int:
        return len(self.rows)

    def matrix(self) -> np.ndarray:
        """Dense lower-triangular copy of the factor."""
        n = len(self.rows)
        out = np.zeros((n, n))
        for i, row in enumerate(self.rows):
            out[i, : i + 1] = row
        return out


@dataclass(frozen=True)
class StreamingCholesky:
    """Constant-memory mode: scalar summaries only."""

    q: float = 0.0
    q_comp: float = 0.0
    s: float = 0.0        # running inner product y . v
    index: int = 0


def dense_state() -> DenseCholesky:
    return DenseCholesky()


def streaming_state() -> StreamingCholesky:
    return StreamingCholesky()


def _check_m(m) -> float:
    m = float(m)
    if not math.isfinite(m):
        raise ValueError(f"normalized spend must be finite, got {m!r}")
    return m


def _q_step(q: float, q_comp: float, m: float):
    """Advance ||m||^2 by m**2, policing the unit bound.

    Returns None when the state was already exhausted (identity-block branch),
    else the tuple (one_minus_prev, q_new, q_comp_new, one_minus_new) with the
    new radicand already clamped.
    """
    one_minus_prev = 1.0 - q
    if one_minus_prev <= 0.0:
        # Exhausted: only (near-)zero spends can be admitted here.  Spends
        # inside the clamp band are rounding debris from the filter slack and
        # degrade to the identity-block row; anything larger is misuse.
        if m * m > CLAMP_BAND:
            raise BudgetOverflowError(
                f"spend {m!r} after exhaustion (||m||^2 = {q!r})"
            )
        return None
    q_new, comp_new = kahan_step(q, q_comp, m * m)
    if q_new - 1.0 > CLAMP_BAND:
        raise BudgetOverflowError(
            f"||m||^2 = {q_new!r} exceeds the unit bound beyond tolerance"
        )
    one_minus_new = 1.0 - q_new
    if one_minus_new < 0.0:
        one_minus_new = 0.0
    return one_minus_prev, q_new, comp_new, one_minus_new


def _forward_solve(rows: tuple, b: np.ndarray) -> np.ndarray:
    # Solve L y = b by forward substitution.  Callers only reach this while
    # every diagonal entry is strictly positive (pre-exhaustion).
    y = np.empty(len(b))
    for j, row in enumerate(rows):
        y[j] = (b[j] - row[:j] @ y[:j]) / row[j]
    return y


def extend(state, m):
    """Grow the factor by one round with normalized spend ``m``.

    Dense mode appends the new row; streaming mode advances Q and the round
    index (the inner product s is advanced by :func:`next_noise`).
    """
    m = _check_m(m)
    if isinstance(state, StreamingCholesky):
        step = _q_step(state.q, state.q_comp, m)
        if step is None:
            return replace(state, index=state.index + 1)
        _, q_new, comp_new, _ = step
        return StreamingCholesky(q_new, comp_new, state.s, state.index + 1)

    step = _q_step(state.q, state.q_comp, m)
    k = len(state.rows)
    if step is None:
        row = np.zeros(k + 1)
        row[k] = 1.0
        return replace(state, rows=state.rows + (row,), spends=state.spends + (m,))
    one_minus_prev, q_new, comp_new, one_minus_new = step
    y = _forward_solve(state.rows, np.asarray(state.spends))
    row = np.empty(k + 1)
    row[:k] = -m * y
    row[k] = math.sqrt(one_minus_new / one_minus_prev)
    return DenseCholesky(state.rows + (row,), state.spends + (m,), q_new, comp_new)


def next_noise(state, m, fresh_seed, past_seeds=None):
    """Extend by ``m`` and return ``(U, new_state)`` where U is the last
    entry of L_i v_i.

    ``fresh_seed`` is this round's i.i.d. standard-normal seed V_i.  Dense
    mode needs ``past_seeds`` = (V_1, ..., V_{i-1}) and does Theta(i) work;
    streaming mode ignores it and does Theta(1).
    """
    m = _check_m(m)
    fresh_seed = float(fresh_seed)

    if isinstance(state, StreamingCholesky):
        step = _q_step(state.q, state.q_comp, m)
        if step is None:
            u = -m * state.s + 1.0 * fresh_seed
            return u, replace(state, index=state.index + 1)
        one_minus_prev, q_new, comp_new, one_minus_new = step
        d = math.sqrt(one_minus_new / one_minus_prev)
        u = -m * state.s + d * fresh_seed
        if one_minus_new > 0.0:
            y_last = m / math.sqrt(one_minus_new * one_minus_prev)
        else:
            y_last = 0.0
        new_state = StreamingCholesky(
            q_new, comp_new, state.s + y_last * fresh_seed, state.index + 1
        )
        return u, new_state

    if past_seeds is None:
        raise StateDesyncError("dense mode needs the past seed vector")
    v = np.asarray(past_seeds, dtype=float)
    if v.shape != (len(state.rows),):
        raise StateDesyncError(
            f"expected {len(state.rows)} past seeds, got shape {v.shape}"
        )
    new_state = extend(state, m)
    row = new_state.rows[-1]
    u = float(row[:-1] @ v + row[-1] * fresh_seed)
    return u, new_state
