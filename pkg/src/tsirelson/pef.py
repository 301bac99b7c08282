"""Probability estimation factors: validity, optimization and probability-bound sweeps."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from tsirelson.bell import NUMERIC_TOL, Behavior
from tsirelson.errors import SolverError
from tsirelson.polytope import PolytopeModel, double_bound_extremes
from tsirelson.scenarios import SettingsDistribution, TrialDistribution, tilted_maximizer
from tsirelson.solver import ConcaveProgram, ConcaveResult, solve_concave

log = logging.getLogger(__name__)


def default_beta_grid() -> list[float]:
    """100 equally spaced powers from 0.001 to 0.100 inclusive."""
    return [float(b) for b in np.linspace(0.001, 0.100, 100)]


@dataclass(frozen=True, eq=False)
class Pef:
    """Nonnegative score F(o_A, o_B, s_A, s_B), indexed like a behavior, with power beta."""

    f: np.ndarray
    beta: float
    solver: ConcaveResult | None = field(default=None, repr=False)

    def __post_init__(self):
        f = np.array(self.f, dtype=float).reshape(-1)
        if f.shape != (16,) or np.any(f < 0) or not np.all(np.isfinite(f)):
            raise ValueError("a PEF needs 16 finite nonnegative values")
        if not self.beta > 0:
            raise ValueError(f"power beta must be positive, got {self.beta}")
        f.setflags(write=False)
        object.__setattr__(self, "f", f)

    @classmethod
    def constant(cls, value: float, beta: float) -> "Pef":
        return cls(np.full(16, float(value)), beta)


@dataclass(frozen=True)
class CertificationConfig:
    epsilon: float = 1e-6
    n: int = 10_000

    def __post_init__(self):
        # epsilon = 1 is degenerate (no error bound) but harmless.
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")


@dataclass
class SweepPoint:
    beta: float
    expected_log: float
    bits: float
    status: str


@dataclass
class CertificationReport:
    """Best probability bound over a beta sweep; logs are natural, ``bits`` base 2."""

    beta: float
    expected_log: float
    bits: float
    config: CertificationConfig
    trace: list = field(default_factory=list)

    @property
    def failed(self) -> list:
        return [pt for pt in self.trace if pt.status != "optimal"]

    def to_json(self) -> dict:
        return {
            "beta": self.beta,
            "expected_log_natural": self.expected_log,
            "bits": self.bits,
            "epsilon": self.config.epsilon,
            "n": self.config.n,
            "failed_betas": [pt.beta for pt in self.failed],
        }


def _cell_weights(e: Behavior, beta: float, pi: SettingsDistribution) -> np.ndarray:
    # numpy gives 0 ** (1 + beta) == 0 for the zero cells of extreme points.
    return pi.per_cell() * np.power(e.p, 1.0 + beta)


def constraint_value(pef: Pef, e: Behavior, pi: SettingsDistribution | None = None) -> float:
    """E_e[F P_e^beta] = sum_s pi(s) sum_o e(o|s)^(1+beta) F(o, s)."""
    pi = pi or SettingsDistribution()
    return float(_cell_weights(e, pef.beta, pi) @ pef.f)


def constraint_matrix(model: PolytopeModel, beta: float, pi: SettingsDistribution | None = None) -> np.ndarray:
    pi = pi or SettingsDistribution()
    return pi.per_cell() * np.power(model.points, 1.0 + beta)


def is_valid_pef(pef: Pef, model: PolytopeModel, pi: SettingsDistribution | None = None, tol: float = NUMERIC_TOL) -> bool:
    if len(model) == 0:
        raise ValueError("model has no extreme points")
    values = constraint_matrix(model, pef.beta, pi) @ pef.f
    return bool(np.all(values <= 1.0 + tol))


def expected_log(pef: Pef, trial: TrialDistribution) -> float:
    q = trial.joint()
    support = q > 0
    if np.any(pef.f[support] <= 0):
        raise ValueError("F vanishes on a result with positive probability; E(ln F) = -inf")
    return float(q[support] @ np.log(pef.f[support]))


def bits_from_expected_log(cfg: CertificationConfig, beta: float, expected_log: float) -> float:
    """-log2 of the median anticipated bound {eps exp[n E(ln F)]}^(-1/beta)."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    return (math.log2(cfg.epsilon) + cfg.n * expected_log / math.log(2.0)) / beta


def optimize_pef(model: PolytopeModel, trial: TrialDistribution, beta: float, tol: float = 1e-8) -> Pef:
    """Maximize E(ln F) subject to the PEF condition at every extreme point of ``model``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    A = constraint_matrix(model, beta, trial.settings)
    result = solve_concave(ConcaveProgram(trial.joint(), A), tol=tol)
    f = np.maximum(result.x, 0.0)
    pef = Pef(f, beta, solver=result)
    if not is_valid_pef(pef, model, trial.settings):
        raise SolverError("optimized PEF fails the validity check", result.residuals)
    return pef


def _sweep_one(args) -> SweepPoint:
    model, trial, cfg, beta = args
    try:
        pef = optimize_pef(model, trial, beta)
    except SolverError as exc:
        log.warning("beta=%g failed: %s", beta, exc)
        return SweepPoint(beta, math.nan, math.nan, type(exc).__name__)
    el = expected_log(pef, trial)
    return SweepPoint(beta, el, bits_from_expected_log(cfg, beta, el), "optimal")


def sweep_beta(
    model: PolytopeModel,
    trial: TrialDistribution,
    cfg: CertificationConfig | None = None,
    grid=None,
    jobs: int = 1,
) -> CertificationReport:
    """Optimize a PEF for each beta in ``grid`` and keep the best probability bound."""
    cfg = cfg or CertificationConfig()
    grid = default_beta_grid() if grid is None else [float(b) for b in grid]
    if not grid or any(b <= 0 for b in grid):
        raise ValueError("beta grid must be nonempty and positive")
    tasks = [(model, trial, cfg, b) for b in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trace = list(pool.map(_sweep_one, tasks))
    else:
        trace = [_sweep_one(t) for t in tasks]
    ok = [pt for pt in trace if pt.status == "optimal"]
    if not ok:
        raise SolverError("every beta in the sweep failed")
    best = max(ok, key=lambda pt: pt.bits)
    return CertificationReport(best.beta, best.expected_log, best.bits, cfg, trace)


@dataclass
class AlphaRow:
    alpha: float
    report: CertificationReport

    @property
    def bits(self) -> float:
        return self.report.bits


def sweep_alpha(
    alpha_grid,
    trial_alpha: float = 2.0,
    cfg: CertificationConfig | None = None,
    beta_grid=None,
    jobs: int = 1,
) -> list[AlphaRow]:
    """Best bits per alpha for the two-bound polytope against a fixed tilted-maximizer trial."""
    alphas = [float(a) for a in alpha_grid]
    if not alphas or any(a <= 1 for a in alphas):
        raise ValueError("alpha grid must be nonempty with every alpha > 1")
    trial = TrialDistribution(tilted_maximizer(trial_alpha))
    return [AlphaRow(a, sweep_beta(double_bound_extremes(a), trial, cfg, beta_grid, jobs)) for a in alphas]
