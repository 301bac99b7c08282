"""Behaviors, Bell functionals and the 24 extreme points of the no-signaling set.

A behavior is stored as a flat vector of 16 conditional probabilities. Rows are
the setting pairs ``ab, ab', a'b, a'b'`` and columns the outcome pairs
``++, +0, 0+, 00``; the flat index is ``4 * row + column``.

Settings and outcomes are coded as bits: ``a, b -> 0``, ``a', b' -> 1`` and
outcome ``0 -> 0``, ``+ -> 1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from tsirelson.errors import DegenerateFunctional, InvalidBehavior

SETTINGS = ("ab", "ab'", "a'b", "a'b'")
OUTCOMES = ("++", "+0", "0+", "00")
ORDER = tuple((s, o) for s in SETTINGS for o in OUTCOMES)

# (s_A, s_B) bits per row and (o_A, o_B) bits per column.
SETTING_BITS = ((0, 0), (0, 1), (1, 0), (1, 1))
OUTCOME_BITS = ((1, 1), (1, 0), (0, 1), (0, 0))

STRUCTURAL_TOL = 1e-12
NUMERIC_TOL = 1e-9

N_LOCALS = 16
N_PR_BOXES = 8


def _as_vector(values) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.shape != (16,):
        raise ValueError(f"expected 16 entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("entries must be finite")
    arr.setflags(write=False)
    return arr


def _order_json():
    return [[s, o] for s, o in ORDER]


def _values_from_json(data) -> list:
    order = data.get("order")
    if order is not None and [list(x) for x in order] != _order_json():
        raise ValueError("unsupported 'order' in JSON; expected setting-major (setting, outcome) pairs")
    return data["values"]


@dataclass(frozen=True, eq=False)
class Behavior:
    """Sixteen conditional probabilities P(o_A o_B | s_A s_B)."""

    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", _as_vector(self.p))

    @property
    def table(self) -> np.ndarray:
        return self.p.reshape(4, 4)

    def normalization_error(self) -> float:
        return float(np.max(np.abs(self.table.sum(axis=1) - 1.0)))

    def signaling_error(self) -> float:
        t = self.table
        alice_plus = t[:, 0] + t[:, 1]
        bob_plus = t[:, 0] + t[:, 2]
        gaps = (
            alice_plus[0] - alice_plus[1],
            alice_plus[2] - alice_plus[3],
            bob_plus[0] - bob_plus[2],
            bob_plus[1] - bob_plus[3],
        )
        return float(np.max(np.abs(gaps)))

    def check(self, no_signaling: bool = True, tol: float = STRUCTURAL_TOL) -> "Behavior":
        """Raise InvalidBehavior unless the behavior is a valid (no-signaling) point."""
        if np.any(self.p < -tol) or np.any(self.p > 1 + tol):
            raise InvalidBehavior("entries must lie in [0, 1]")
        err = self.normalization_error()
        if err > tol:
            raise InvalidBehavior(f"setting rows do not sum to 1 (max deviation {err:.3g})")
        if no_signaling:
            err = self.signaling_error()
            if err > tol:
                raise InvalidBehavior(f"no-signaling constraints violated (max deviation {err:.3g})")
        return self

    def correlators(self) -> np.ndarray:
        """E_s = P(++|s) + P(00|s) - P(+0|s) - P(0+|s) for each setting pair."""
        return self.table @ np.array([1.0, -1.0, -1.0, 1.0])

    def allclose(self, other: "Behavior", tol: float = STRUCTURAL_TOL) -> bool:
        return bool(np.max(np.abs(self.p - other.p)) <= tol)

    def to_json(self) -> dict:
        return {"order": _order_json(), "values": [float(v) for v in self.p]}

    @classmethod
    def from_json(cls, data: dict) -> "Behavior":
        return cls(_values_from_json(data))


@dataclass(frozen=True, eq=False)
class BellFunctional:
    """Linear functional on behaviors given by 16 coefficients."""

    b: np.ndarray
    name: str = field(default="")

    def __post_init__(self):
        object.__setattr__(self, "b", _as_vector(self.b))

    @property
    def table(self) -> np.ndarray:
        return self.b.reshape(4, 4)

    def __call__(self, p: Behavior) -> float:
        return evaluate(self, p)

    def to_json(self) -> dict:
        out = {"order": _order_json(), "values": [float(v) for v in self.b]}
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_json(cls, data: dict) -> "BellFunctional":
        return cls(_values_from_json(data), name=data.get("name", ""))


@dataclass(frozen=True)
class BoundsSummary:
    lb: float
    nsb: float
    max_pr_index: int


def evaluate(b: BellFunctional, p: Behavior) -> float:
    return float(np.dot(b.b, p.p))


def local_deterministic(f_a: int, f_a2: int, g_b: int, g_b2: int) -> Behavior:
    """Deterministic behavior with Alice answering f(s_A) and Bob g(s_B).

    Arguments are outcome bits (1 for ``+``, 0 for ``0``); strings ``"+"``/``"0"``
    are accepted too.
    """
    f = [_outcome_bit(f_a), _outcome_bit(f_a2)]
    g = [_outcome_bit(g_b), _outcome_bit(g_b2)]
    p = np.zeros((4, 4))
    for row, (sa, sb) in enumerate(SETTING_BITS):
        p[row, OUTCOME_BITS.index((f[sa], g[sb]))] = 1.0
    return Behavior(p)


def _outcome_bit(o) -> int:
    if o in ("+", 1, True):
        return 1
    if o in ("0", 0, False):
        return 0
    raise ValueError(f"outcome must be '+'/'0' or 1/0, got {o!r}")


def local_index(f_a: int, f_a2: int, g_b: int, g_b2: int) -> int:
    return 8 * f_a + 4 * f_a2 + 2 * g_b + g_b2


def local_by_index(idx: int) -> Behavior:
    if not 0 <= idx < N_LOCALS:
        raise IndexError(f"local deterministic index must be in 0..15, got {idx}")
    return local_deterministic(*((idx >> k) & 1 for k in (3, 2, 1, 0)))


def all_locals() -> list[Behavior]:
    return [local_by_index(i) for i in range(N_LOCALS)]


def pr_box(k: int) -> Behavior:
    """PR box with o_A xor o_B = s_A s_B xor mu s_A xor nu s_B xor gamma, (mu, nu, gamma) = bits of k."""
    if not 0 <= k < N_PR_BOXES:
        raise IndexError(f"PR box index must be in 0..7, got {k}")
    mu, nu, gamma = (k >> 2) & 1, (k >> 1) & 1, k & 1
    p = np.zeros((4, 4))
    for row, (sa, sb) in enumerate(SETTING_BITS):
        parity = (sa & sb) ^ (mu & sa) ^ (nu & sb) ^ gamma
        for col, (oa, ob) in enumerate(OUTCOME_BITS):
            if oa ^ ob == parity:
                p[row, col] = 0.5
    return Behavior(p)


def all_pr_boxes() -> list[Behavior]:
    return [pr_box(k) for k in range(N_PR_BOXES)]


def ns_extreme_points() -> list[Behavior]:
    return all_locals() + all_pr_boxes()


def chsh_functional() -> BellFunctional:
    row = np.array([1.0, -1.0, -1.0, 1.0])
    return BellFunctional(np.concatenate([row, row, row, -row]), name="chsh")


def tilted_functional(alpha: float) -> BellFunctional:
    if not alpha >= 1:
        raise ValueError(f"tilted CHSH requires alpha >= 1, got {alpha}")
    row = np.array([1.0, -1.0, -1.0, 1.0])
    name = "chsh" if alpha == 1 else f"tilted(alpha={alpha!r})"
    return BellFunctional(np.concatenate([alpha * row, alpha * row, row, -row]), name=name)


def chsh_version(k: int) -> BellFunctional:
    """The CHSH version maximally violated by ``pr_box(k)``.

    Relabeling symmetries carry the support of ``pr_box(0)`` onto that of
    ``pr_box(k)``, and the CHSH table is +1 on the former support and -1 off it,
    so each version is +1 on its PR box support and -1 elsewhere.
    """
    support = pr_box(k).p > 0
    return BellFunctional(np.where(support, 1.0, -1.0), name=f"chsh[{k}]")


def compute_bounds(b: BellFunctional) -> BoundsSummary:
    local_vals = np.array([evaluate(b, L) for L in all_locals()])
    pr_vals = np.array([evaluate(b, P) for P in all_pr_boxes()])
    lb = float(local_vals.max())
    nsb = float(max(lb, pr_vals.max()))
    scale = max(1.0, float(np.abs(b.b).max()))
    if nsb - lb <= STRUCTURAL_TOL * scale:
        raise DegenerateFunctional(f"LB = NSB = {lb:g}; functional carries no nonlocality")
    above = np.flatnonzero(pr_vals > lb + STRUCTURAL_TOL * scale)
    # Holds for every functional since an equal mixture of two PR boxes is local.
    assert above.size == 1, "more than one PR box exceeds the local bound"
    return BoundsSummary(lb=lb, nsb=nsb, max_pr_index=int(above[0]))


def saturating_locals(pr_index: int) -> list[Behavior]:
    """The 8 local deterministic behaviors reaching 2 on the CHSH version of ``pr_box(pr_index)``.

    Returned in ascending local-index order.
    """
    version = chsh_version(pr_index)
    out = [L for L in all_locals() if abs(evaluate(version, L) - 2.0) <= STRUCTURAL_TOL]
    assert len(out) == 8
    return out


def saturating_local_indices(pr_index: int) -> list[int]:
    version = chsh_version(pr_index)
    return [i for i, L in enumerate(all_locals()) if abs(evaluate(version, L) - 2.0) <= STRUCTURAL_TOL]


def extra_support_cell(L: Behavior, pr_index: int) -> int:
    """Flat index of the single cell where L is 1 and the PR box is 0."""
    cells = np.flatnonzero((L.p > 0) & (pr_box(pr_index).p == 0))
    if cells.size != 1:
        raise ValueError("behavior does not saturate the CHSH version of this PR box")
    return int(cells[0])


def classify_top_bottom(locals_: list[Behavior], alpha: float) -> tuple[list[Behavior], list[Behavior]]:
    """Split the CHSH-saturating locals of ``pr_box(0)`` by their tilted-CHSH value.

    Locals whose off-support cell sits in row ab or ab' score 2 (top); the rest
    score 2*alpha (bottom). The row test keeps the split defined at alpha = 1.
    """
    if len(locals_) != 8:
        raise ValueError("expected the 8 CHSH-saturating locals")
    tilted = tilted_functional(alpha)
    top, bot = [], []
    for L in locals_:
        row = extra_support_cell(L, 0) // 4
        value = evaluate(tilted, L)
        expected = 2.0 if row in (0, 1) else 2.0 * alpha
        if abs(value - expected) > STRUCTURAL_TOL * max(1.0, alpha):
            raise ValueError(f"tilted value {value} is neither 2 nor 2*alpha")
        (top if row in (0, 1) else bot).append(L)
    if len(top) != 4 or len(bot) != 4:
        raise ValueError("locals do not split 4/4 between top and bottom")
    return top, bot
