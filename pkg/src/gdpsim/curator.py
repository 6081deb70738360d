"""Interactive Gaussian curator sessions over a secret bit.

Two interchangeable session kinds answer adaptively chosen spends, both
behind the same budget filter:

* ``direct`` -- answers each admitted spend mu with ``b*mu + Z``, Z a fresh
  standard normal (one draw per admitted round);
* ``simulated`` -- draws a single Gaussian input ``W0 = b*mu0 + Z0`` when the
  session opens and afterwards answers by postprocessing alone:
  ``W = m*W0 + U`` with ``m = mu/mu0`` and U the next noise value from the
  incremental factor of I - m m^T (one seed draw per admitted round).

Since Var(W0) = 1, the simulated answer is already in raw units and its
conditional law given any transcript prefix is N(b*mu, 1) -- the same as the
direct curator's.  The Monte-Carlo harness certifies this equivalence.

Refused queries consume no randomness, so for a fixed (kind, b, budget,
seed, policy) the whole transcript is reproducible bit for bit.  Budgets
other than 1 are handled natively by normalizing spends; running the same
interaction at budget 1 with pre-normalized spends consumes identical noise
values (the scaling-coherence tests assert this exactly).

Sessions are single-threaded state machines.  Distinct sessions with
independent streams may run in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .budget import check_budget, filter_new, remaining_sq, try_spend
from .cholesky import dense_state, next_noise, streaming_state
from .errors import SessionClosedError

KINDS = ("direct", "simulated")

DEFAULT_MAX_ROUNDS = 256


@dataclass(frozen=True)
class Round:
    """One query: spend, admission decision, and the answer if admitted."""

    index: int
    spend: float
    accepted: bool
    answer: float | None


@dataclass
class Transcript:
    """Ordered record of one curator-analyst interaction."""

    budget: float
    rounds: list[Round] = field(default_factory=list)
    truncated: bool = False

    def answers(self) -> list[float]:
        return [r.answer for r in self.rounds if r.accepted]

    def refusal_pattern(self) -> tuple[int, ...]:
        return tuple(r.index for r in self.rounds if not r.accepted)


class Session:
    """One curator endpoint holding the secret bit.

    ``rng`` is any object with a ``standard_normal()`` method; draws are
    consumed strictly in session order (simulated: Z0 first, then one seed
    per admitted round).
    """

    def __init__(self, kind: str, b: int, budget, rng, chol_mode: str = "streaming"):
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
        if b not in (0, 1):
            raise ValueError(f"secret bit must be 0 or 1, got {b!r}")
        if chol_mode not in ("streaming", "dense"):
            raise ValueError(f"unknown factor mode {chol_mode!r}")
        self.kind = kind
        self.b = int(b)
        self.mu0 = check_budget(budget)
        self.filter_state = filter_new(self.mu0)
        self.rng = rng
        self.round = 0
        self.draws = 0
        self.closed = False
        self.w0 = None
        self.chol = None
        self._seeds = None
        if kind == "simulated":
            self._norm = self.mu0 if self.mu0 > 0.0 else 1.0
            z0 = self._draw()
            self.w0 = self.b * self.mu0 + z0
            if chol_mode == "streaming":
                self.chol = streaming_state()
            else:
                self.chol = dense_state()
                self._seeds = []

    def _draw(self) -> float:
        self.draws += 1
        return float(self.rng.standard_normal())

    @property
    def remaining_sq(self) -> float:
        return remaining_sq(self.filter_state)

    def ask(self, spend) -> float | None:
        """Answer an admitted spend, or return None on refusal.

        Malformed spends raise ValueError; asking a closed session raises
        SessionClosedError.  Refusals consume no randomness.
        """
        if self.closed:
            raise SessionClosedError("session is closed")
        accepted, new_state = try_spend(self.filter_state, spend)
        if not accepted:
            return None
        self.filter_state = new_state
        self.round += 1
        spend = float(spend)
        if self.kind == "direct":
            z = self._draw()
            return self.b * spend + z
        m = spend / self._norm
        v = self._draw()
        if self._seeds is None:
            u, self.chol = next_noise(self.chol, m, v)
        else:
            u, self.chol = next_noise(self.chol, m, v, self._seeds)
            self._seeds.append(v)
        return m * self.w0 + u

    def close(self) -> None:
        self.closed = True


def open_session(kind: str, b: int, budget, seed, *, chol_mode: str = "streaming") -> Session:
    """Open a session; deterministic given (kind, b, budget, seed).

    ``seed`` may be an integer (seeds a PCG64 stream) or any object with a
    ``standard_normal()`` method.
    """
    if hasattr(seed, "standard_normal"):
        rng = seed
    else:
        rng = np.random.Generator(np.random.PCG64(seed))
    return Session(kind, b, budget, rng, chol_mode=chol_mode)


def run_interaction(session: Session, policy, *, max_rounds: int = DEFAULT_MAX_ROUNDS,
                    policy_rng=None) -> Transcript:
    """Drive a session with an adversary policy until it stops or the round
    cap is hit; every decision, including refusals, is recorded.

    If the cap fires while the policy would continue, the transcript carries
    a truncation marker.
    """
    transcript = Transcript(budget=session.mu0)
    for i in range(max_rounds):
        spend = policy.next_spend(transcript.rounds, session.remaining_sq, policy_rng)
        if spend is None:
            return transcript
        answer = session.ask(spend)
        transcript.rounds.append(Round(i, float(spend), answer is not None, answer))
    if policy.next_spend(transcript.rounds, session.remaining_sq, policy_rng) is not None:
        transcript.truncated = True
    return transcript
