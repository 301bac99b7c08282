import math

import numpy as np
import pytest

from tsirelson import bell
from tsirelson.bell import chsh_functional, evaluate, tilted_functional
from tsirelson.scenarios import (
    SettingsDistribution,
    TrialDistribution,
    mix,
    parse_scenario,
    qubit_behavior,
    tilted_maximizer,
)

ALPHAS = [1.0, 1.1, 1.5, 2.0, 3.0, 5.0]


@pytest.mark.parametrize("alpha", ALPHAS)
def test_qubit_oracle_matches_analytic(alpha):
    np.testing.assert_allclose(qubit_behavior(alpha).p, tilted_maximizer(alpha).p, atol=1e-12, rtol=0)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_tilted_maximizer_saturates(alpha):
    p = tilted_maximizer(alpha)
    p.check()
    assert abs(evaluate(tilted_functional(alpha), p) - 2 * math.sqrt(1 + alpha**2)) <= 1e-12


@pytest.mark.parametrize("alpha", ALPHAS)
def test_correlators_consistent(alpha):
    r = math.sqrt(1 + alpha**2)
    np.testing.assert_allclose(tilted_maximizer(alpha).correlators(), [alpha / r, alpha / r, 1 / r, -1 / r], atol=1e-12)


def test_alpha2_chsh_value():
    v = evaluate(chsh_functional(), tilted_maximizer(2.0))
    assert abs(v - 6 / math.sqrt(5)) <= 1e-12
    assert v < 2 * math.sqrt(2)


def test_alpha1_is_chsh_maximizer():
    p = tilted_maximizer(1.0)
    assert abs(evaluate(chsh_functional(), p) - 2 * math.sqrt(2)) <= 1e-12
    np.testing.assert_allclose(np.abs(p.correlators()), 1 / math.sqrt(2), atol=1e-15)


def test_tilted_maximizer_rejects_alpha_below_one():
    with pytest.raises(ValueError):
        tilted_maximizer(0.5)


def test_mix_identity_and_split_point():
    p = bell.pr_box(2)
    np.testing.assert_array_equal(mix([p], [1.0]).p, p.p)
    lam = math.sqrt(2) - 1
    e = mix([bell.pr_box(0), bell.local_by_index(15)], [lam, 1 - lam])
    assert abs(evaluate(chsh_functional(), e) - 2 * math.sqrt(2)) <= 1e-12


def test_mix_uniform_locals():
    p = mix(bell.all_locals(), np.full(16, 1 / 16))
    p.check()
    np.testing.assert_allclose(p.p * 16, np.round(p.p * 16), atol=1e-12)


def test_mix_rejects_bad_weights():
    with pytest.raises(ValueError):
        mix([bell.pr_box(0)], [0.5])
    with pytest.raises(ValueError):
        mix([bell.pr_box(0), bell.pr_box(1)], [1.5, -0.5])
    with pytest.raises(ValueError):
        mix([bell.pr_box(0)], [0.5, 0.5])


def test_settings_distribution():
    assert np.array_equal(SettingsDistribution().pi, np.full(4, 0.25))
    with pytest.raises(ValueError):
        SettingsDistribution([0.5, 0.5, 0.5, 0.0])
    trial = TrialDistribution(tilted_maximizer(2.0), SettingsDistribution([0.1, 0.2, 0.3, 0.4]))
    assert abs(trial.joint().sum() - 1) <= 1e-15


@pytest.mark.parametrize("name", ["tilted:alpha=2", "chsh-max", "uniform", "pr:3", "local:15"])
def test_parse_scenario(name):
    parse_scenario(name).check()


def test_parse_scenario_values():
    np.testing.assert_array_equal(parse_scenario("tilted:alpha=2").p, tilted_maximizer(2.0).p)
    with pytest.raises(ValueError):
        parse_scenario("bogus")
