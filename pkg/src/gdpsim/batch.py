"""Vectorized Monte-Carlo trial engine.

Runs n_trials independent curator interactions for one (kind, bit, policy)
arm, round-synchronously across numpy arrays.  Per-trial behaviour is
bitwise identical to a scalar ``gdpsim.curator.Session`` fed the same draw
row -- the test suite asserts this -- so the engine is purely an executor
and the scalar session stays the reference implementation.  The single-box
equivalent of fanning trials out across workers.

Randomness: one arm key is derived from (master seed, kind, policy id, bit);
trial t consumes the standard-normal draws of row t of the arm's tableau.
The tableau is materialized in chunks keyed by (arm key, "chunk", k), so it
can grow without disturbing draws already consumed (numpy array draws are
prefix-stable).  Refused rounds consume nothing.

Only registered, rng-free policies have vector forms; anything else runs on
the scalar fallback engine (``engine="scalar"``), which produces the same
BatchResult via real sessions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._numeric import kahan_step
from .adversaries import STOP_TOL, make_policy
from .budget import REL_SLACK, check_budget
from .cholesky import CLAMP_BAND
from .curator import DEFAULT_MAX_ROUNDS, Round, Session, Transcript, run_interaction
from .errors import BudgetOverflowError, NumericalIntegrityError
from .rng import ReplayNormals, derive_key, generator

_INITIAL_WIDTH = 36


def policy_stream_id(name: str, params: dict) -> str:
    """Canonical label mixed into an arm's stream key."""
    if not params:
        return name
    return name + ":" + json.dumps(params, sort_keys=True, separators=(",", ":"))


class DrawTableau:
    """Chunked (n_trials x width) matrix of standard normals for one arm."""

    def __init__(self, key: int, n_trials: int, initial_width: int = _INITIAL_WIDTH):
        self._key = key
        self._n = n_trials
        self._next_chunk = 0
        self._chunk_width = initial_width
        self._data = np.empty((n_trials, 0))

    @property
    def width(self) -> int:
        return self._data.shape[1]

    def ensure(self, width: int) -> None:
        while self._data.shape[1] < width:
            g = generator(self._key, "chunk", self._next_chunk)
            block = g.standard_normal((self._n, self._chunk_width))
            self._data = np.concatenate([self._data, block], axis=1)
            self._next_chunk += 1
            self._chunk_width *= 2

    def take(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """Gather one draw per (trial row, per-trial cursor)."""
        if rows.size == 0:
            return np.empty(0)
        self.ensure(int(cols.max()) + 1)
        return self._data[rows, cols]

    def row(self, t: int, width: int) -> np.ndarray:
        self.ensure(width)
        return self._data[t, :width]


# --- vector policies -------------------------------------------------------
#
# Each mirrors its scalar twin in gdpsim.adversaries expression for
# expression; the bitwise cross-validation test keeps them honest.

class _FixedVec:
    def __init__(self, spends):
        self._spends = [float(s) for s in spends]

    def spends(self, i, remaining, last_accepted, prev_spend):
        n = remaining.shape[0]
        if i >= len(self._spends):
            return np.empty(n), np.ones(n, dtype=bool)
        return np.full(n, self._spends[i]), np.zeros(n, dtype=bool)


class _SignAdaptiveVec:
    def __init__(self, hi, lo):
        self._hi = float(hi)
        self._lo = float(lo)

    def spends(self, i, remaining, last_accepted, prev_spend):
        stop = remaining < STOP_TOL
        if i == 0:
            sp = np.full(remaining.shape[0], self._hi / 2.0)
        else:
            base = np.where(last_accepted > 0.0, self._hi, self._lo)  # NaN -> lo
            sp = np.minimum(base, np.sqrt(np.where(stop, 1.0, remaining)))
        return sp, stop


class _GreedyVec:
    def spends(self, i, remaining, last_accepted, prev_spend):
        stop = remaining < STOP_TOL
        sp = np.sqrt(np.where(stop, 0.0, remaining) / 2.0)
        return sp, stop


class _ProberVec:
    def spends(self, i, remaining, last_accepted, prev_spend):
        stop = remaining < STOP_TOL
        if i % 2 == 0:
            sp = 0.9 * np.sqrt(np.where(stop, 0.0, remaining))
        else:
            sp = prev_spend
        return sp, stop


_VECTOR_REGISTRY = {
    "fixed": _FixedVec,
    "sign_adaptive": _SignAdaptiveVec,
    "greedy_halving": _GreedyVec,
    "overspend_prober": _ProberVec,
}


def make_vector_policy(name: str, params: dict):
    key = name.replace("-", "_")
    if key not in _VECTOR_REGISTRY:
        raise ValueError(f"no vector form for policy {name!r}; use engine='scalar'")
    return _VECTOR_REGISTRY[key](**params)


# --- results ---------------------------------------------------------------

@dataclass
class BatchResult:
    """Per-trial transcripts of one arm, in rectangular NaN-padded form.

    decisions: int8 matrix, 1 = accepted, 0 = refused, -1 = round absent.
    """

    kind: str
    bit: int
    budget: float
    policy_name: str
    policy_params: dict
    n_trials: int
    spends: np.ndarray
    decisions: np.ndarray
    answers: np.ndarray
    lengths: np.ndarray
    truncated: np.ndarray
    draws: np.ndarray
    w0: np.ndarray | None

    def transcripts(self) -> list[Transcript]:
        out = []
        for t in range(self.n_trials):
            rounds = []
            for i in range(int(self.lengths[t])):
                accepted = self.decisions[t, i] == 1
                rounds.append(Round(
                    i,
                    float(self.spends[t, i]),
                    bool(accepted),
                    float(self.answers[t, i]) if accepted else None,
                ))
            out.append(Transcript(self.budget, rounds, bool(self.truncated[t])))
        return out

    def round_answers(self, r: int) -> np.ndarray:
        """Accepted answers at round r across trials."""
        col = self.answers[:, r]
        return col[self.decisions[:, r] == 1]

    def summaries(self) -> np.ndarray:
        """Sum of accepted answers per trial (the built-in policy summary)."""
        if self.answers.shape[1] == 0:
            return np.zeros(self.n_trials)
        vals = np.where(self.decisions == 1, self.answers, 0.0)
        return vals.sum(axis=1)

    def refusal_rows(self) -> np.ndarray:
        return self.decisions == 0


def _stream_cholesky_step(q, qc, s, idx, m, v):
    """Vector twin of the streaming branch of cholesky.next_noise.

    Mutates q, qc, s in the lanes ``idx``; returns the noise values U.
    """
    qq = q[idx]
    qcc = qc[idx]
    one_prev = 1.0 - qq
    exhausted = one_prev <= 0.0
    if np.any(exhausted & (m * m > CLAMP_BAND)):
        raise BudgetOverflowError("positive spend after exhaustion in batch arm")
    msq = m * m
    t_new, c_new = kahan_step(qq, qcc, msq)
    q_new = np.where(exhausted, qq, t_new)
    qc_new = np.where(exhausted, qcc, c_new)
    if np.any(~exhausted & (q_new - 1.0 > CLAMP_BAND)):
        raise BudgetOverflowError("norm exceeds unit bound beyond tolerance in batch arm")
    one_new = 1.0 - q_new
    one_new = np.where(one_new < 0.0, 0.0, one_new)
    safe_prev = np.where(exhausted, 1.0, one_prev)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(exhausted, 1.0, np.sqrt(one_new / safe_prev))
        y_last = np.where(
            exhausted | (one_new <= 0.0),
            0.0,
            m / np.sqrt(one_new * safe_prev),
        )
    u = -m * s[idx] + d * v
    s[idx] = s[idx] + y_last * v
    q[idx] = q_new
    qc[idx] = qc_new
    return u


def run_trial_batch(
    kind: str,
    bit: int,
    budget,
    policy_name: str,
    policy_params: dict | None = None,
    n_trials: int = 1,
    master_seed: int = 0,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    engine: str = "vector",
    stream_label: str | None = None,
) -> BatchResult:
    """Run one arm of n_trials interactions and collect the transcripts.

    ``stream_label`` overrides the policy id in the arm key; the harness uses
    it to keep mechanism arms on streams disjoint from policy arms.
    """
    policy_params = dict(policy_params or {})
    if kind not in ("direct", "simulated"):
        raise ValueError(f"unknown session kind {kind!r}")
    if bit not in (0, 1):
        raise ValueError(f"secret bit must be 0 or 1, got {bit!r}")
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    label = stream_label or policy_stream_id(policy_name, policy_params)
    arm_key = derive_key(master_seed, kind, label, bit)
    tableau = DrawTableau(arm_key, n_trials)
    if engine == "scalar":
        return _run_scalar(kind, bit, budget, policy_name, policy_params,
                           n_trials, max_rounds, tableau)
    if engine != "vector":
        raise ValueError(f"unknown engine {engine!r}")

    vec = make_vector_policy(policy_name, policy_params)
    mu0 = check_budget(budget)
    budget_sq = mu0 * mu0
    bound = budget_sq * (1.0 + REL_SLACK)
    norm = mu0 if mu0 > 0.0 else 1.0
    n = n_trials
    spent = np.zeros(n)
    comp = np.zeros(n)
    q = np.zeros(n)
    qc = np.zeros(n)
    s = np.zeros(n)
    cursor = np.zeros(n, dtype=np.int64)
    w0 = None
    if kind == "simulated":
        z0 = tableau.take(np.arange(n), cursor)
        cursor += 1
        w0 = bit * mu0 + z0
    last_accepted = np.full(n, np.nan)
    prev_spend = np.full(n, np.nan)
    active = np.ones(n, dtype=bool)
    lengths = np.zeros(n, dtype=np.int64)
    truncated = np.zeros(n, dtype=bool)
    spend_cols, dec_cols, ans_cols = [], [], []

    for r in range(max_rounds):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        rem = np.maximum(0.0, budget_sq - spent[idx])
        sp, stop = vec.spends(r, rem, last_accepted[idx], prev_spend[idx])
        stopped = idx[stop]
        active[stopped] = False
        lengths[stopped] = r
        cont = idx[~stop]
        if cont.size == 0:
            continue
        sp = np.asarray(sp[~stop], dtype=float)
        if not np.all(np.isfinite(sp) & (sp >= 0.0)):
            raise NumericalIntegrityError(
                f"policy {policy_name!r} emitted a malformed spend at round {r}"
            )

        # Filter decision: mirrors budget.try_spend branch for branch.
        musq = sp * sp
        zero = sp == 0.0
        ledger_full = spent[cont] >= budget_sq
        t_new, c_new = kahan_step(spent[cont], comp[cont], musq)
        admit = zero | (~ledger_full & (t_new <= bound))
        update = admit & ~zero
        upd_idx = cont[update]
        spent[upd_idx] = t_new[update]
        comp[upd_idx] = c_new[update]
        acc_idx = cont[admit]

        col_spend = np.full(n, np.nan)
        col_dec = np.full(n, -1, dtype=np.int8)
        col_ans = np.full(n, np.nan)
        col_spend[cont] = sp
        col_dec[cont] = 0
        col_dec[acc_idx] = 1

        if acc_idx.size:
            v = tableau.take(acc_idx, cursor[acc_idx])
            cursor[acc_idx] += 1
            if kind == "direct":
                answers = bit * sp[admit] + v
            else:
                m = sp[admit] / norm
                u = _stream_cholesky_step(q, qc, s, acc_idx, m, v)
                answers = m * w0[acc_idx] + u
            col_ans[acc_idx] = answers
            last_accepted[acc_idx] = answers
        prev_spend[cont] = sp
        lengths[cont] = r + 1
        spend_cols.append(col_spend)
        dec_cols.append(col_dec)
        ans_cols.append(col_ans)

    idx = np.flatnonzero(active)
    if idx.size:
        rem = np.maximum(0.0, budget_sq - spent[idx])
        _, stop = vec.spends(max_rounds, rem, last_accepted[idx], prev_spend[idx])
        truncated[idx[~stop]] = True

    def _stack(cols, dtype):
        if not cols:
            return np.empty((n, 0), dtype=dtype)
        return np.stack(cols, axis=1)

    return BatchResult(
        kind=kind,
        bit=bit,
        budget=mu0,
        policy_name=policy_name,
        policy_params=policy_params,
        n_trials=n,
        spends=_stack(spend_cols, float),
        decisions=_stack(dec_cols, np.int8),
        answers=_stack(ans_cols, float),
        lengths=lengths,
        truncated=truncated,
        draws=cursor.copy(),
        w0=w0,
    )


def _run_scalar(kind, bit, budget, policy_name, policy_params,
                n_trials, max_rounds, tableau: DrawTableau) -> BatchResult:
    """Reference engine: real sessions, one trial at a time, same draw rows."""
    mu0 = check_budget(budget)
    policy = make_policy(policy_name, **policy_params)
    transcripts = []
    w0s = np.empty(n_trials)
    draws = np.zeros(n_trials, dtype=np.int64)
    max_draws = max_rounds + 2  # one per admitted round, plus W0
    for t in range(n_trials):
        width = tableau.width or _INITIAL_WIDTH
        while True:
            source = ReplayNormals(tableau.row(t, width))
            session = Session(kind, bit, mu0, source)
            try:
                tr = run_interaction(session, policy, max_rounds=max_rounds)
            except IndexError:
                if width >= max_draws:
                    raise
                width = min(width * 2, max_draws)
                continue
            break
        transcripts.append(tr)
        w0s[t] = session.w0 if session.w0 is not None else np.nan
        draws[t] = source.taken

    r_max = max((len(tr.rounds) for tr in transcripts), default=0)
    spends = np.full((n_trials, r_max), np.nan)
    decisions = np.full((n_trials, r_max), -1, dtype=np.int8)
    answers = np.full((n_trials, r_max), np.nan)
    lengths = np.zeros(n_trials, dtype=np.int64)
    truncated = np.zeros(n_trials, dtype=bool)
    for t, tr in enumerate(transcripts):
        lengths[t] = len(tr.rounds)
        truncated[t] = tr.truncated
        for rnd in tr.rounds:
            spends[t, rnd.index] = rnd.spend
            decisions[t, rnd.index] = 1 if rnd.accepted else 0
            if rnd.accepted:
                answers[t, rnd.index] = rnd.answer
    return BatchResult(
        kind=kind,
        bit=bit,
        budget=mu0,
        policy_name=policy_name,
        policy_params=policy_params,
        n_trials=n_trials,
        spends=spends,
        decisions=decisions,
        answers=answers,
        lengths=lengths,
        truncated=truncated,
        draws=draws,
        w0=w0s if kind == "simulated" else None,
    )
