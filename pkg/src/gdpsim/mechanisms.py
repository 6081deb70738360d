"""Mechanisms as randomized postprocessings of a Gaussian core.

A mechanism with per-query spend mu is represented by a map F applied to a
unit-variance Gaussian: on secret bit b it outputs F(b*mu + Z).  Any curator
session can therefore serve it -- ask the session for spend mu and
postprocess the answer -- and the harness checks that direct and simulated
sessions induce identical outcome distributions.

The registry deliberately contains only mechanisms already in postprocessing
form; whether an arbitrary black-box mechanism admits such a representation
is not this package's problem.  Randomized postprocessings draw from their
own stream (``post_rng``), never from the session's, so distributional
comparisons isolate the Gaussian core.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .budget import check_spend


@dataclass(frozen=True)
class PostprocessedMechanism:
    """A spend plus an outcome map over the Gaussian core value.

    ``post(x, rng)`` must be a pure function of x and its own rng.
    ``vector_post``, when present, is the same map over a float array and is
    what the batch harness applies.  ``binary`` marks mechanisms whose
    outcome set has at most two values (compared by proportion test rather
    than KS).
    """

    name: str
    mu: float
    post: Callable
    vector_post: Optional[Callable] = None
    binary: bool = False


def sample(mech: PostprocessedMechanism, b: int, rng, post_rng=None):
    """One outcome of the mechanism run directly on the secret bit."""
    if b not in (0, 1):
        raise ValueError(f"secret bit must be 0 or 1, got {b!r}")
    z = float(rng.standard_normal())
    return mech.post(b * mech.mu + z, post_rng if post_rng is not None else rng)


def reduce_and_serve(session, mech: PostprocessedMechanism, post_rng=None):
    """Serve the mechanism through a curator session.

    Asks the session for spend ``mech.mu``; on admission returns the
    postprocessed answer, on refusal returns None.
    """
    answer = session.ask(mech.mu)
    if answer is None:
        return None
    return mech.post(answer, post_rng)


def _identity(mu: float) -> PostprocessedMechanism:
    return PostprocessedMechanism(
        "identity", mu,
        post=lambda x, rng: float(x),
        vector_post=lambda x, rng: np.asarray(x, dtype=float),
    )


def _threshold(mu: float, tau: float) -> PostprocessedMechanism:
    tau = float(tau)
    return PostprocessedMechanism(
        "threshold", mu,
        post=lambda x, rng: 1.0 if x > tau else 0.0,
        vector_post=lambda x, rng: (np.asarray(x) > tau).astype(float),
        binary=True,
    )


def _sign(mu: float) -> PostprocessedMechanism:
    return PostprocessedMechanism(
        "sign", mu,
        post=lambda x, rng: 1.0 if x > 0.0 else -1.0,
        vector_post=lambda x, rng: np.where(np.asarray(x) > 0.0, 1.0, -1.0),
        binary=True,
    )


def _round_to_integer(mu: float) -> PostprocessedMechanism:
    return PostprocessedMechanism(
        "round_to_integer", mu,
        post=lambda x, rng: float(np.rint(x)),
        vector_post=lambda x, rng: np.rint(np.asarray(x, dtype=float)),
    )


_REGISTRY = {
    "identity": _identity,
    "threshold": _threshold,
    "sign": _sign,
    "round_to_integer": _round_to_integer,
}


def mechanism_names() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def make_mechanism(name: str, mu: float, **params) -> PostprocessedMechanism:
    """Construct a registered mechanism by name with spend ``mu``."""
    key = name.replace("-", "_")
    if key not in _REGISTRY:
        raise ValueError(
            f"unknown mechanism {name!r}; known: {', '.join(mechanism_names())}"
        )
    return _REGISTRY[key](check_spend(mu), **params)
