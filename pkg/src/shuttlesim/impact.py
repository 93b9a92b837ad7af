"""Racket-shuttle collision with an infinitely heavy racket, and the deflection error."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NOMINAL_INCOMING = (-4.5, 0.0, -4.5)


@dataclass(frozen=True, eq=False)
class RacketState:
    """Racket face normal ``n`` (unit, pointing toward the incoming shuttle)
    and sweet-spot velocity ``v``."""

    n: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        n = np.array(self.n, dtype=float)
        v = np.array(self.v, dtype=float)
        if n.shape != (3,) or v.shape != (3,):
            raise ValueError("racket normal and velocity must be 3-vectors")
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError(f"racket normal must be unit length, got |n| = {np.linalg.norm(n)}")
        n.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "v", v)


def outgoing_velocity(v_in, racket: RacketState, restitution: float = 1.0) -> np.ndarray:
    """Shuttle velocity after impact.

    In the racket frame the normal component of the approach velocity is
    reversed (scaled by ``restitution``) and the tangential part kept:
    ``v_out = v_in - (1 + e) ((v_in - v_racket) . n) n``.
    """
    v_in = np.asarray(v_in, float)
    n = racket.n
    v_impact = v_in - racket.v
    return v_in - (1.0 + restitution) * np.dot(v_impact, n) * n


def deflection_error(cmd: RacketState, exe: RacketState, v_in=NOMINAL_INCOMING, restitution: float = 1.0) -> float:
    """Norm of the outgoing-velocity difference between commanded and executed swings."""
    d = outgoing_velocity(v_in, cmd, restitution) - outgoing_velocity(v_in, exe, restitution)
    return float(np.linalg.norm(d))
