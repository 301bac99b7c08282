"""Reference quantum behaviors and trial distributions used as optimization targets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from tsirelson.bell import OUTCOME_BITS, SETTINGS, Behavior, local_by_index, pr_box

_SIGN = np.array([1.0, -1.0, -1.0, 1.0])  # +1 on ++ and 00


@dataclass(frozen=True, eq=False)
class SettingsDistribution:
    """Probabilities of the setting pairs ab, ab', a'b, a'b'."""

    pi: np.ndarray = field(default_factory=lambda: np.full(4, 0.25))

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float).reshape(-1)
        if pi.shape != (4,) or np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError("settings distribution needs 4 nonnegative entries summing to 1")
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)

    @classmethod
    def uniform(cls) -> "SettingsDistribution":
        return cls()

    def per_cell(self) -> np.ndarray:
        """pi(s) repeated over the 4 outcomes of each setting row (flat, 16 entries)."""
        return np.repeat(self.pi, 4)


@dataclass(frozen=True, eq=False)
class TrialDistribution:
    behavior: Behavior
    settings: SettingsDistribution = field(default_factory=SettingsDistribution)

    def joint(self) -> np.ndarray:
        """q(o, s) = pi(s) P(o|s), flat over the behavior index."""
        return self.settings.per_cell() * self.behavior.p


def tilted_maximizer(alpha: float) -> Behavior:
    """Uniform-marginal behavior saturating the tilted CHSH Tsirelson bound 2 sqrt(1 + alpha^2).

    Correlators are alpha/r on ab and ab', 1/r on a'b and -1/r on a'b' with
    r = sqrt(1 + alpha^2). ``alpha = 1`` gives the CHSH maximizer.
    """
    if not alpha >= 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    r = math.sqrt(1.0 + alpha * alpha)
    corr = np.array([alpha / r, alpha / r, 1.0 / r, -1.0 / r])
    return Behavior((1.0 + np.outer(corr, _SIGN)) / 4.0)


def qubit_behavior(alpha: float) -> Behavior:
    """Two-qubit realization of ``tilted_maximizer(alpha)``.

    Maximally entangled state (|00> + |11>)/sqrt(2); Alice measures Z then X,
    Bob measures cos(mu) Z +/- sin(mu) X with tan(mu) = 1/alpha. Outcome ``+``
    is the +1 eigenvalue.
    """
    if not alpha >= 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    Z = np.array([[1.0, 0.0], [0.0, -1.0]])
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    mu = math.atan2(1.0, alpha)
    alice = (Z, X)
    bob = (math.cos(mu) * Z + math.sin(mu) * X, math.cos(mu) * Z - math.sin(mu) * X)
    psi = np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2.0)

    def projector(obs, bit):
        sign = 1.0 if bit == 1 else -1.0
        return (np.eye(2) + sign * obs) / 2.0

    p = np.zeros((4, 4))
    for row, name in enumerate(SETTINGS):
        sa, sb = int("a'" in name), int("b'" in name)
        for col, (oa, ob) in enumerate(OUTCOME_BITS):
            op = np.kron(projector(alice[sa], oa), projector(bob[sb], ob))
            p[row, col] = float(psi @ op @ psi)
    return Behavior(p)


def mix(behaviors: list[Behavior], weights) -> Behavior:
    w = np.asarray(weights, dtype=float).reshape(-1)
    if len(behaviors) != w.size or w.size == 0:
        raise ValueError("need one weight per behavior")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")
    return Behavior(w @ np.array([b.p for b in behaviors]))


def uniform_behavior() -> Behavior:
    return Behavior(np.full(16, 0.25))


def parse_scenario(spec: str) -> Behavior:
    """Named scenarios: ``tilted:alpha=2``, ``chsh-max``, ``uniform``, ``pr:K``, ``local:K``."""
    name, _, arg = spec.strip().partition(":")
    if name == "chsh-max":
        return tilted_maximizer(1.0)
    if name == "tilted":
        key, _, val = arg.partition("=")
        if key.strip() not in ("alpha", "α") or not val:
            raise ValueError("expected 'tilted:alpha=<value>'")
        return tilted_maximizer(float(val))
    if name == "uniform":
        return uniform_behavior()
    if name == "pr":
        return pr_box(int(arg))
    if name == "local":
        return local_by_index(int(arg))
    raise ValueError(f"unknown scenario {spec!r}")
