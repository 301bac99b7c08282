import math

import numpy as np
import pytest

from conftest import random_mixture
from tsirelson import bell
from tsirelson.bell import Behavior, chsh_functional, evaluate, pr_box, tilted_functional
from tsirelson.errors import ConstraintViolated, DegenerateFunctional, NotInPolytope
from tsirelson.polytope import (
    PolytopeModel,
    TsirelsonConstraint,
    audit_model,
    decompose,
    double_bound_extremes,
    double_coefficients,
    local_label,
    pr_label,
    single_bound_extremes,
    split_coefficients,
    split_label,
    top_bottom_indices,
    verify_extremality,
)
from tsirelson.scenarios import mix, tilted_maximizer

SQRT2 = math.sqrt(2)


def test_constraint_validation():
    with pytest.raises(ValueError):
        TsirelsonConstraint(chsh_functional(), 4.0)
    with pytest.raises(ValueError):
        TsirelsonConstraint(chsh_functional(), 1.5)
    with pytest.raises(DegenerateFunctional):
        TsirelsonConstraint(bell.BellFunctional(np.zeros(16)), 0.0)


def test_chsh_split_coefficients():
    lams = split_coefficients(TsirelsonConstraint(chsh_functional(), 2 * SQRT2))
    assert len(lams) == 8
    for lam in lams.values():
        assert abs(lam - (SQRT2 - 1)) <= 1e-12


def test_single_bound_chsh_structure(chsh_model):
    assert len(chsh_model) == 31
    assert pr_label(0) not in chsh_model.labels
    assert sum(lab.startswith("PR") for lab in chsh_model.labels) == 7
    assert sum(lab.startswith("L") for lab in chsh_model.labels) == 16
    c = chsh_model.constraints[0]
    for lab, p in chsh_model.extreme_points:
        if lab.startswith("E"):
            assert abs(c.value(p) - 2 * SQRT2) <= 1e-12


def test_single_bound_at_local_bound_merges():
    model = single_bound_extremes(TsirelsonConstraint(chsh_functional(), 2.0))
    assert len(model) == 23
    assert len(model.provenance["merged"]) == 8
    for alias, target in model.provenance["merged"].items():
        assert target.startswith("L")


def test_single_bound_tilted_uses_tilted_quantities(tilted_model):
    c = tilted_model.constraints[0]
    assert len(tilted_model) == 31
    for lab, p in tilted_model.extreme_points:
        if lab.startswith("E"):
            assert abs(c.value(p) - 2 * math.sqrt(5)) <= 1e-12
    # Top locals score 2 and bottom locals 4 under the tilted functional.
    top, bot = top_bottom_indices(2.0)
    lams = tilted_model.provenance["lambdas"]
    for i in top:
        assert abs(lams[split_label(0, i)] - (2 * math.sqrt(5) - 2) / 4) <= 1e-12
    for j in bot:
        assert abs(lams[split_label(0, j)] - (2 * math.sqrt(5) - 4) / 2) <= 1e-12


def test_split_points_match_support_template(chsh_model):
    """Each split point: p_i + p_PR/2 on PR cells sharing the local's row support,
    p_PR/2 on the other PR cells and p_i in exactly one cell outside the PR support."""
    pr = pr_box(0).p
    for i, lam in split_coefficients(chsh_model.constraints[0]).items():
        e = chsh_model.point(split_label(0, i)).p
        L = bell.local_by_index(i).p
        p_pr, p_i = lam, 1 - lam
        outside = (pr == 0)
        assert np.count_nonzero(e[outside]) == 1
        assert np.flatnonzero(outside & (e > 0))[0] == bell.extra_support_cell(bell.local_by_index(i), 0)
        np.testing.assert_allclose(e[outside & (L > 0)], p_i, atol=1e-15)
        np.testing.assert_allclose(e[(pr > 0) & (L > 0)], p_i + p_pr / 2, atol=1e-15)
        np.testing.assert_allclose(e[(pr > 0) & (L == 0)], p_pr / 2, atol=1e-15)


def test_eight_chsh(eight_model):
    assert len(eight_model) == 80
    assert not any(lab.startswith("PR") for lab in eight_model.labels)
    vals = eight_model.constraint_values()
    assert vals.max() <= 2 * SQRT2 + 1e-12
    for lab, lam in eight_model.provenance["lambdas"].items():
        assert abs(lam - (SQRT2 - 1)) <= 1e-12


def test_double_coefficients_alpha2_against_linear_system():
    alpha = 2.0
    M = np.array([[2 + 2 * alpha, 2, 2 * alpha], [4, 2, 2], [1, 1, 1]])
    rhs = np.array([2 * math.sqrt(1 + alpha**2), 2 * SQRT2, 1])
    oracle = np.linalg.solve(M, rhs)
    closed = np.array(double_coefficients(alpha))
    np.testing.assert_allclose(closed, oracle, atol=1e-12)
    # The quoted 7-digit figures differ from the exact values in the 6th decimal.
    np.testing.assert_allclose(closed, [0.4142136, 0.1781439, 0.4076425], atol=5e-6)
    assert abs(closed.sum() - 1) <= 1e-15


def test_double_coefficients_reject_alpha_one():
    with pytest.raises(ValueError):
        double_coefficients(1.0)
    with pytest.raises(ValueError):
        double_bound_extremes(0.5)


def test_double_structure(double_model):
    assert len(double_model) == 47
    vals = double_model.constraint_values()
    bounds = np.array([c.bound for c in double_model.constraints])
    tight = np.abs(vals - bounds) <= 1e-12
    for k, lab in enumerate(double_model.labels):
        if lab.startswith("D"):
            assert tight[k].all()
        elif lab.startswith("E"):
            assert tight[k].sum() == 1
            assert (vals[k] < bounds - 1e-6).sum() == 1
        else:
            assert not tight[k].any()
    assert (vals <= bounds + 1e-12).all()


def test_models_are_no_signaling(chsh_model, double_model, eight_model):
    for model in (chsh_model, double_model, eight_model):
        assert audit_model(model).passed


def test_monotone_in_bound():
    small = single_bound_extremes(TsirelsonConstraint(chsh_functional(), 2.6))
    big = TsirelsonConstraint(chsh_functional(), 2.9)
    for _, p in small.extreme_points:
        assert big.value(p) <= big.bound + 1e-12


def test_verify_extremality_models(chsh_model, double_model):
    for model in (chsh_model, double_model):
        report = verify_extremality(model)
        assert report.passed
        assert min(e.margin for e in report.entries) >= 1e-9


def test_verify_detects_midpoint(chsh_model):
    mid = 0.5 * (chsh_model.point("L00").p + chsh_model.point("L05").p)
    model = PolytopeModel(chsh_model.labels + ("mid",), np.vstack([chsh_model.points, mid]),
                          chsh_model.constraints)
    report = verify_extremality(model)
    assert [e.label for e in report.failures()] == ["mid"]


def test_decompose_split_point(chsh_model):
    lam = SQRT2 - 1
    i = bell.saturating_local_indices(0)[0]
    p = mix([pr_box(0), bell.local_by_index(i)], [lam, 1 - lam])
    result = decompose(p, chsh_model, cone={pr_label(0): lam, local_label(i): 1 - lam})
    assert result.method == "substitution"
    assert set(result.weights) == {split_label(0, i)}
    assert abs(result.weights[split_label(0, i)] - 1) <= 1e-12
    lp = decompose(p, chsh_model)
    assert abs(lp.weights.get(split_label(0, i), 0) - 1) <= 1e-10


def test_decompose_violating_behavior(chsh_model):
    p = mix([pr_box(0), bell.local_by_index(15)], [0.5, 0.5])
    assert abs(evaluate(chsh_functional(), p) - 3) <= 1e-15
    with pytest.raises(ConstraintViolated):
        decompose(p, chsh_model)


def test_decompose_uniform_locals(chsh_model):
    p = mix(bell.all_locals(), np.full(16, 1 / 16))
    result = decompose(p, chsh_model)
    assert abs(result.total() - 1) <= 1e-10
    assert result.residual <= 1e-10


def test_decompose_outside_hull_but_satisfying_constraints():
    # Model restricted to the 16 locals: a PR-box mixture within CHSH <= 2.9 is not local.
    locs = np.array([L.p for L in bell.all_locals()])
    model = PolytopeModel(tuple(local_label(i) for i in range(16)), locs)
    p = mix([pr_box(0), bell.local_by_index(15)], [0.2, 0.8])
    with pytest.raises(NotInPolytope):
        decompose(p, model)


def test_decompose_random_lp(chsh_model, rng):
    for _ in range(50):
        p = Behavior(random_mixture(chsh_model, rng, k=6))
        result = decompose(p, chsh_model)
        assert result.residual <= 1e-10
        assert abs(result.total() - 1) <= 1e-10
        assert min(result.weights.values()) >= 0


def random_cone(rng, model, k=0):
    """Random weights on the removed PR box and the 8 CHSH-saturating locals satisfying all constraints."""
    sat = bell.saturating_local_indices(k)
    pr = pr_box(k).p
    while True:
        w = rng.dirichlet(np.full(9, 0.7))
        cone = {pr_label(k): w[0], **{local_label(i): w[1 + n] for n, i in enumerate(sat)}}
        vec = w[0] * pr + sum(w[1 + n] * bell.local_by_index(i).p for n, i in enumerate(sat))
        p = Behavior(vec)
        if all(c.value(p) <= c.bound for c in model.constraints):
            return p, cone


def _check_cone_decomposition(model, rng, count):
    for _ in range(count):
        p, cone = random_cone(rng, model)
        result = decompose(p, model, cone=cone)
        assert result.method == "substitution"
        assert result.residual <= 1e-10
        assert abs(result.total() - 1) <= 1e-10
        assert all(w >= 0 for w in result.weights.values())
        assert not any(lab.startswith("PR0") for lab in result.weights)
        assert all(lab in model.labels for lab in result.weights)


def test_cone_substitution_single(chsh_model, rng):
    _check_cone_decomposition(chsh_model, rng, 1000)


def test_cone_substitution_single_tilted(tilted_model, rng):
    _check_cone_decomposition(tilted_model, rng, 300)


def test_cone_substitution_double(double_model, rng):
    _check_cone_decomposition(double_model, rng, 1000)


def test_cone_substitution_at_local_bound(rng):
    model = single_bound_extremes(TsirelsonConstraint(chsh_functional(), 2.0))
    p = mix(bell.all_locals(), np.full(16, 1 / 16))
    cone = {local_label(i): 1 / 16 for i in range(16)}
    result = decompose(p, model, cone=cone)
    assert result.residual <= 1e-12


def test_cone_weights_must_match(chsh_model):
    p = mix(bell.all_locals(), np.full(16, 1 / 16))
    with pytest.raises(ValueError):
        decompose(p, chsh_model, cone={local_label(0): 1.0})


def test_tilted_maximizer_inside_double_polytopes():
    for alpha in (1.1, 1.5, 2.0, 3.0, 5.0):
        model = double_bound_extremes(alpha)
        result = decompose(tilted_maximizer(alpha), model)
        assert result.residual <= 1e-10


def test_model_json_roundtrip(double_model):
    import json

    text = json.dumps(double_model.to_json())
    back = PolytopeModel.from_json(json.loads(text))
    assert back.labels == double_model.labels
    assert np.array_equal(back.points, double_model.points)
    assert len(back.constraints) == 2
    assert back.constraints[1].bound == double_model.constraints[1].bound
    assert np.array_equal(back.constraints[1].functional.b, double_model.constraints[1].functional.b)


def test_double_labels_cover_every_pair(double_model):
    top, bot = top_bottom_indices(2.0)
    pairs = [lab for lab in double_model.labels if lab.startswith("D")]
    assert len(pairs) == 16
    assert sorted(double_model.provenance["top"] + double_model.provenance["bottom"]) == sorted(bell.saturating_local_indices(0))
    # Top locals are CHSH-split, bottom locals tilted-split.
    t = tilted_functional(2.0)
    for i in top:
        assert evaluate(t, bell.local_by_index(i)) == 2


def test_double_coefficients_nonnegative_random(rng):
    for alpha in 1 + rng.uniform(0, 99, 1000):
        lams = np.array(double_coefficients(alpha))
        assert (lams >= -1e-15).all()
        assert abs(lams.sum() - 1) <= 1e-12
