"""Tsirelson polytopes: no-signaling polytopes cut by one or more Tsirelson bounds.

Extreme points are built in closed form (split points mixing the removed PR box
with CHSH-saturating locals), and checked by LP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from tsirelson import bell
from tsirelson.bell import (
    NUMERIC_TOL,
    STRUCTURAL_TOL,
    Behavior,
    BellFunctional,
    chsh_functional,
    chsh_version,
    classify_top_bottom,
    compute_bounds,
    evaluate,
    saturating_local_indices,
    tilted_functional,
)
from tsirelson.errors import ConstraintViolated, InvalidBehavior, NotInPolytope
from tsirelson.solver import nearest_combination

SQRT2 = math.sqrt(2.0)
DECOMPOSE_TOL = 1e-10
EXTREMALITY_MARGIN = 1e-9


def local_label(i: int) -> str:
    return f"L{i:02d}"


def pr_label(k: int) -> str:
    return f"PR{k}"


def split_label(k: int, i: int) -> str:
    return f"E[PR{k}|L{i:02d}]"


def double_label(i: int, j: int) -> str:
    return f"D[L{i:02d}|L{j:02d}]"


@dataclass(frozen=True, eq=False)
class TsirelsonConstraint:
    """Half-space ``functional . P <= bound`` with LB <= bound < NSB.

    ``tb`` optionally records the known quantum bound; it is not checked.
    """

    functional: BellFunctional
    bound: float
    tb: float | None = None

    def __post_init__(self):
        bounds = compute_bounds(self.functional)
        if not (bounds.lb - STRUCTURAL_TOL <= self.bound < bounds.nsb):
            raise ValueError(
                f"bound {self.bound} outside [LB, NSB) = [{bounds.lb}, {bounds.nsb})"
            )

    @property
    def bounds(self) -> bell.BoundsSummary:
        return compute_bounds(self.functional)

    def value(self, p: Behavior) -> float:
        return evaluate(self.functional, p)

    def slack(self, p: Behavior) -> float:
        return self.bound - self.value(p)

    def to_json(self) -> dict:
        out = {"functional": self.functional.to_json(), "bound": float(self.bound)}
        if self.tb is not None:
            out["tb"] = float(self.tb)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "TsirelsonConstraint":
        return cls(BellFunctional.from_json(data["functional"]), float(data["bound"]), data.get("tb"))


@dataclass(frozen=True, eq=False)
class PolytopeModel:
    labels: tuple
    points: np.ndarray
    constraints: tuple = ()
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 16 or pts.shape[0] != len(self.labels):
            raise ValueError("points must be an (N, 16) array with one label per row")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be unique")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "constraints", tuple(self.constraints))

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def extreme_points(self) -> list[tuple[str, Behavior]]:
        return [(lab, Behavior(row)) for lab, row in zip(self.labels, self.points)]

    def point(self, label: str) -> Behavior:
        return Behavior(self.points[self.labels.index(label)])

    def find(self, vec, tol: float = STRUCTURAL_TOL) -> str | None:
        dist = np.abs(self.points - np.asarray(vec)).max(axis=1)
        i = int(np.argmin(dist))
        return self.labels[i] if dist[i] <= tol else None

    def constraint_values(self) -> np.ndarray:
        """Matrix of functional values, one row per point and one column per constraint."""
        if not self.constraints:
            return np.zeros((len(self), 0))
        return self.points @ np.array([c.functional.b for c in self.constraints]).T

    def to_json(self) -> dict:
        return {
            "constraints": [c.to_json() for c in self.constraints],
            "points": [{"label": lab, "values": [float(v) for v in row]} for lab, row in zip(self.labels, self.points)],
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, data: dict) -> "PolytopeModel":
        pts = data["points"]
        return cls(
            labels=tuple(p["label"] for p in pts),
            points=np.array([p["values"] for p in pts], dtype=float),
            constraints=tuple(TsirelsonConstraint.from_json(c) for c in data.get("constraints", [])),
            provenance=data.get("provenance", {}),
        )


class _Builder:
    """Accumulates labelled points, merging coordinate-wise duplicates."""

    def __init__(self):
        self.labels: list[str] = []
        self.rows: list[np.ndarray] = []
        self.merged: dict[str, str] = {}

    def add(self, label: str, vec) -> str:
        vec = np.asarray(vec, dtype=float)
        for lab, row in zip(self.labels, self.rows):
            if np.max(np.abs(row - vec)) <= STRUCTURAL_TOL:
                self.merged[label] = lab
                return lab
        self.labels.append(label)
        self.rows.append(vec)
        return label

    def add_ns_points(self, skip_pr=()):
        for i, L in enumerate(bell.all_locals()):
            self.add(local_label(i), L.p)
        for k, P in enumerate(bell.all_pr_boxes()):
            if k not in skip_pr:
                self.add(pr_label(k), P.p)

    def build(self, constraints, provenance) -> PolytopeModel:
        if self.merged:
            provenance = {**provenance, "merged": dict(self.merged)}
        return PolytopeModel(tuple(self.labels), np.array(self.rows), tuple(constraints), provenance)


def split_coefficient(value_local: float, bound: float, nsb: float) -> float:
    """Weight on the PR box in ``lam PR + (1 - lam) L`` placing the point on the bound."""
    return (bound - value_local) / (nsb - value_local)


def split_coefficients(c: TsirelsonConstraint) -> dict[int, float]:
    """PR-box weight of each split point, keyed by local index of its saturating local."""
    bounds = c.bounds
    locals_ = bell.all_locals()
    return {
        i: split_coefficient(evaluate(c.functional, locals_[i]), c.bound, bounds.nsb)
        for i in saturating_local_indices(bounds.max_pr_index)
    }


def single_bound_extremes(c: TsirelsonConstraint) -> PolytopeModel:
    """Extreme points of NS intersected with one Tsirelson half-space.

    All 16 locals, the 7 PR boxes not maximizing the functional and 8 split points.
    Split points that coincide with a local (bound equal to LB) are merged.
    """
    bounds = c.bounds
    k = bounds.max_pr_index
    pr = bell.pr_box(k).p
    builder = _Builder()
    builder.add_ns_points(skip_pr={k})
    lambdas = {}
    for i, lam in split_coefficients(c).items():
        label = split_label(k, i)
        lambdas[label] = lam
        builder.add(label, lam * pr + (1.0 - lam) * bell.local_by_index(i).p)
    provenance = {
        "variant": "single",
        "pr_index": k,
        "lb": bounds.lb,
        "nsb": bounds.nsb,
        "bound": float(c.bound),
        "lambdas": lambdas,
    }
    return builder.build([c], provenance)


def eight_chsh_polytope(bound: float = 2 * SQRT2) -> PolytopeModel:
    """All eight CHSH versions bounded at ``bound``; each PR box splits into 8 points."""
    builder = _Builder()
    builder.add_ns_points(skip_pr=set(range(8)))
    constraints = []
    lambdas = {}
    for k in range(8):
        c = TsirelsonConstraint(chsh_version(k), bound, tb=2 * SQRT2)
        constraints.append(c)
        pr = bell.pr_box(k).p
        for i, lam in split_coefficients(c).items():
            label = split_label(k, i)
            lambdas[label] = lam
            builder.add(label, lam * pr + (1.0 - lam) * bell.local_by_index(i).p)
    return builder.build(constraints, {"variant": "eight-chsh", "bound": bound, "lambdas": lambdas})


def double_coefficients(alpha: float) -> tuple[float, float, float]:
    """(lambda_PR, lambda_top, lambda_bot) of the points saturating both bounds."""
    if not alpha > 1:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    r = math.sqrt(1.0 + alpha * alpha)
    lam_pr = SQRT2 - 1.0
    lam_top = 1.0 - (r - SQRT2) / (alpha - 1.0)
    lam_bot = 1.0 - (alpha * SQRT2 - r) / (alpha - 1.0)
    return lam_pr, lam_top, lam_bot


def top_bottom_indices(alpha: float) -> tuple[list[int], list[int]]:
    idx = saturating_local_indices(0)
    top, bot = classify_top_bottom([bell.local_by_index(i) for i in idx], alpha)
    top_ids = [i for i in idx if any(bell.local_by_index(i).allclose(L) for L in top)]
    bot_ids = [i for i in idx if any(bell.local_by_index(i).allclose(L) for L in bot)]
    return top_ids, bot_ids


def double_bound_extremes(alpha: float) -> PolytopeModel:
    """NS cut by CHSH <= 2 sqrt 2 and tilted CHSH <= 2 sqrt(1 + alpha^2), alpha > 1.

    16 locals, PR boxes 1..7, 4 CHSH split points on the top locals, 4 tilted
    split points on the bottom locals and 16 points saturating both bounds.
    """
    if not alpha > 1:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    chsh = TsirelsonConstraint(chsh_functional(), 2 * SQRT2, tb=2 * SQRT2)
    r = math.sqrt(1.0 + alpha * alpha)
    tilted = TsirelsonConstraint(tilted_functional(alpha), 2 * r, tb=2 * r)
    top, bot = top_bottom_indices(alpha)
    pr = bell.pr_box(0).p
    L = {i: bell.local_by_index(i).p for i in top + bot}

    builder = _Builder()
    builder.add_ns_points(skip_pr={0})
    lambdas = {}
    for i in top:
        lam = split_coefficient(2.0, chsh.bound, 4.0)
        lambdas[split_label(0, i)] = lam
        builder.add(split_label(0, i), lam * pr + (1.0 - lam) * L[i])
    for j in bot:
        lam = split_coefficient(2.0 * alpha, tilted.bound, 2.0 + 2.0 * alpha)
        lambdas[split_label(0, j)] = lam
        builder.add(split_label(0, j), lam * pr + (1.0 - lam) * L[j])
    lam_pr, lam_top, lam_bot = double_coefficients(alpha)
    for i in top:
        for j in bot:
            builder.add(double_label(i, j), lam_pr * pr + lam_top * L[i] + lam_bot * L[j])
    provenance = {
        "variant": "double",
        "alpha": alpha,
        "pr_index": 0,
        "top": top,
        "bottom": bot,
        "lambdas": lambdas,
        "double_coefficients": [lam_pr, lam_top, lam_bot],
    }
    return builder.build([chsh, tilted], provenance)


# ---------------------------------------------------------------------------
# Decomposition
# ---------------------------------------------------------------------------


@dataclass
class DecompositionWeights:
    weights: dict
    method: str
    residual: float = 0.0

    def total(self) -> float:
        return float(sum(self.weights.values()))

    def reconstruct(self, model: PolytopeModel) -> np.ndarray:
        out = np.zeros(16)
        for label, w in self.weights.items():
            out += w * model.points[model.labels.index(label)]
        return out


def _check_member(p: Behavior, model: PolytopeModel) -> None:
    try:
        p.check(no_signaling=True, tol=NUMERIC_TOL)
    except InvalidBehavior:
        raise
    for c in model.constraints:
        v = c.value(p)
        if v > c.bound + NUMERIC_TOL:
            raise ConstraintViolated(f"{c.functional.name or 'constraint'} value {v:.12g} exceeds bound {c.bound:.12g}")


def _substitution_cycle(w_pr, local_w, order, values, bound, nsb):
    """Trade PR-box weight for split-point weight, cycling through ``order``.

    Returns (split weights by local index, leftover PR weight, finished) where
    ``finished`` means the first-case substitution zeroed the PR weight.
    """
    split = {}
    for i in order:
        if w_pr <= 0:
            return split, 0.0, True
        p_i = local_w.get(i, 0.0)
        b_i = values[i]
        gap = bound - b_i
        if gap > 0 and p_i >= (nsb - bound) / gap * w_pr:
            split[i] = split.get(i, 0.0) + w_pr * (nsb - b_i) / gap
            local_w[i] = p_i - (nsb - bound) / gap * w_pr
            return split, 0.0, True
        if p_i > 0:
            split[i] = split.get(i, 0.0) + p_i * (nsb - b_i) / (nsb - bound)
            w_pr -= gap / (nsb - bound) * p_i
            local_w[i] = 0.0
    return split, w_pr, w_pr <= 0


def _label_of(model, default_label, vec):
    if default_label in model.labels:
        return default_label
    found = model.find(vec)
    if found is None:
        raise NotInPolytope(f"model has no point matching {default_label}")
    return found


def _decompose_cone(p: Behavior, model: PolytopeModel, cone: dict) -> DecompositionWeights:
    variant = model.provenance.get("variant")
    k = int(model.provenance.get("pr_index", 0))
    pr_lab = pr_label(k)
    pr = bell.pr_box(k).p
    cone = {lab: float(w) for lab, w in cone.items()}
    if any(w < -STRUCTURAL_TOL for w in cone.values()) or abs(sum(cone.values()) - 1) > DECOMPOSE_TOL:
        raise ValueError("cone weights must be nonnegative and sum to 1")
    recon = np.zeros(16)
    for lab, w in cone.items():
        recon += w * (pr if lab == pr_lab else model.point(lab).p)
    if np.abs(recon - p.p).max() > DECOMPOSE_TOL:
        raise ValueError("cone weights do not reproduce the behavior")

    w_pr = cone.pop(pr_lab, 0.0)
    sat = saturating_local_indices(k)
    local_w = {i: cone.pop(local_label(i), 0.0) for i in sat}
    out: dict[str, float] = {}

    def credit(label, w):
        if w > 0:
            out[label] = out.get(label, 0.0) + w

    if variant == "single":
        c = model.constraints[0]
        locals_ = bell.all_locals()
        values = {i: evaluate(c.functional, locals_[i]) for i in sat}
        split, w_pr, _ = _substitution_cycle(w_pr, local_w, sat, values, c.bound, c.bounds.nsb)
        for i, w in split.items():
            lam = split_coefficient(values[i], c.bound, c.bounds.nsb)
            credit(_label_of(model, split_label(k, i), lam * pr + (1 - lam) * locals_[i].p), w)
    elif variant == "double":
        alpha = float(model.provenance["alpha"])
        top, bot = model.provenance["top"], model.provenance["bottom"]
        lam_pr, lam_top, lam_bot = double_coefficients(alpha)
        for i in top:
            for j in bot:
                x = min(w_pr / lam_pr, local_w[i] / lam_top, local_w[j] / lam_bot)
                if x <= 0:
                    continue
                credit(double_label(i, j), x)
                w_pr = max(0.0, w_pr - x * lam_pr)
                local_w[i] = max(0.0, local_w[i] - x * lam_top)
                local_w[j] = max(0.0, local_w[j] - x * lam_bot)
        if w_pr > 0:
            if sum(local_w[i] for i in top) <= 0:
                r = math.sqrt(1 + alpha * alpha)
                order, bound, nsb = bot, 2 * r, 2 + 2 * alpha
                values = {j: 2 * alpha for j in bot}
            else:
                order, bound, nsb = top, 2 * SQRT2, 4.0
                values = {i: 2.0 for i in top}
            split, w_pr, _ = _substitution_cycle(w_pr, local_w, order, values, bound, nsb)
            for i, w in split.items():
                credit(split_label(0, i), w)
    else:
        raise ValueError(f"cone decomposition not available for variant {variant!r}")

    if w_pr > DECOMPOSE_TOL:
        raise ConstraintViolated(f"PR weight {w_pr:.3g} left after the substitution cycle")
    for i, w in local_w.items():
        credit(local_label(i), w)
    for lab, w in cone.items():
        credit(lab, w)
    result = DecompositionWeights(out, "substitution")
    result.residual = float(np.abs(result.reconstruct(model) - p.p).max())
    return result


def decompose(p: Behavior, model: PolytopeModel, cone: dict | None = None) -> DecompositionWeights:
    """Write ``p`` as a convex combination of the model's extreme points.

    With ``cone`` (weights on the maximizing PR box and locals, keyed by label)
    the closed-form substitution is run; otherwise a membership LP is solved.
    """
    _check_member(p, model)
    if cone is not None:
        return _decompose_cone(p, model, cone)

    dist, w = nearest_combination(p.p, model.points)
    if dist > NUMERIC_TOL:
        raise NotInPolytope(f"behavior is at L1 distance {dist:.3g} from the hull")
    # Polish on the LP support so the reconstruction is accurate to rounding.
    support = np.flatnonzero(w > 0)
    M = np.vstack([model.points[support].T, np.ones(support.size)])
    rhs = np.concatenate([p.p, [1.0]])
    ws, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    if np.all(ws >= 0):
        w = np.zeros(len(model))
        w[support] = ws
    weights = {model.labels[i]: float(w[i]) for i in np.flatnonzero(w > 0)}
    result = DecompositionWeights(weights, "lp")
    result.residual = float(np.abs(result.reconstruct(model) - p.p).max())
    if result.residual > DECOMPOSE_TOL:
        raise NotInPolytope(f"reconstruction error {result.residual:.3g} exceeds {DECOMPOSE_TOL}")
    return result


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


@dataclass
class PointCheck:
    label: str
    margin: float
    passed: bool
    reason: str = ""


@dataclass
class ExtremalityReport:
    entries: list

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> list:
        return [e for e in self.entries if not e.passed]

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "points": [{"label": e.label, "margin": e.margin, "passed": e.passed, "reason": e.reason} for e in self.entries],
        }


def verify_extremality(model: PolytopeModel, margin: float = EXTREMALITY_MARGIN) -> ExtremalityReport:
    """For each point, the L1 distance to the hull of the others must be at least ``margin``."""
    entries = []
    for i, label in enumerate(model.labels):
        others = np.delete(model.points, i, axis=0)
        if others.shape[0] == 0:
            entries.append(PointCheck(label, math.inf, True))
            continue
        dist, _ = nearest_combination(model.points[i], others)
        ok = dist >= margin
        entries.append(PointCheck(label, dist, ok, "" if ok else "convex combination of other points"))
    return ExtremalityReport(entries)


def audit_model(model: PolytopeModel, tol: float = STRUCTURAL_TOL) -> ExtremalityReport:
    """Normalization, no-signaling and constraint checks for every point."""
    entries = []
    values = model.constraint_values()
    bounds = np.array([c.bound for c in model.constraints])
    for i, (label, p) in enumerate(model.extreme_points):
        reason = ""
        try:
            p.check(no_signaling=True, tol=tol)
        except InvalidBehavior as exc:
            reason = str(exc)
        if not reason and values.shape[1] and np.any(values[i] > bounds + tol):
            reason = "violates a Tsirelson constraint"
        slack = float((bounds - values[i]).min()) if values.shape[1] else math.inf
        entries.append(PointCheck(label, slack, not reason, reason))
    return ExtremalityReport(entries)
