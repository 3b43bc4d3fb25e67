"""Two-state Gilbert erasure channel.

The chain sits in a good state (never erases) or a bad state (always
erases); gamma is the good-to-bad transition probability and beta the
bad-to-good one.  The model is parameterized from the steady-state loss
rate pi_B = gamma / (gamma + beta) and the mean burst length E[L] = 1/beta.

Each slot the chain transitions first and then reports an erasure if it
landed in the bad state.  The initial state is drawn from the steady-state
distribution so no warm-up is needed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

GOOD = 0
BAD = 1


@dataclass(frozen=True)
class GilbertParams:
    gamma: float    # P(good -> bad)
    beta: float     # P(bad -> good)

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")


def derive_params(pi_b: float, mean_burst: float) -> GilbertParams:
    """Transition probabilities hitting a target loss rate and mean burst length."""
    if not 0.0 < pi_b < 1.0:
        raise ValueError(f"pi_b must be in (0, 1), got {pi_b}")
    if mean_burst < 1.0:
        raise ValueError(f"mean burst length must be >= 1, got {mean_burst}")
    beta = 1.0 / mean_burst
    gamma = beta * pi_b / (1.0 - pi_b)
    return GilbertParams(gamma, beta)


def steady_state(params: GilbertParams) -> float:
    """Long-run probability of the bad (erasing) state."""
    total = params.gamma + params.beta
    if total <= 0.0:
        raise ValueError("gamma + beta must be positive")
    return params.gamma / total


class GilbertChannel:
    """One lossy link; step once per slot."""

    def __init__(self, params: GilbertParams, rng: random.Random,
                 start: str = "steady"):
        self.params = params
        self.rng = rng
        if start == "steady":
            self.state = BAD if rng.random() < steady_state(params) else GOOD
        elif start == "good":
            self.state = GOOD
        elif start == "bad":
            self.state = BAD
        else:
            raise ValueError(f"unknown start state {start!r}")

    def step(self) -> bool:
        """Advance one slot; True means the slot's packet is erased."""
        if self.state == GOOD:
            if self.rng.random() < self.params.gamma:
                self.state = BAD
        else:
            if self.rng.random() < self.params.beta:
                self.state = GOOD
        return self.state == BAD


class LosslessChannel:
    """Degenerate channel for pi_b = 0 runs."""

    def step(self) -> bool:
        return False
