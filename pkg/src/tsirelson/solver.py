"""Small dense solvers: a two-phase simplex (Bland's rule) and a log-barrier method.

Both are deterministic: fixed pivot rules, fixed barrier schedule, no restarts.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from tsirelson.errors import MaxIterations, NumericalBreakdown

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-11
FEAS_TOL = 1e-9


# ---------------------------------------------------------------------------
# Linear programming
# ---------------------------------------------------------------------------


@dataclass
class LinearProgram:
    """minimize c @ x  s.t.  A_eq @ x == b_eq,  A_ub @ x <= b_ub,  x >= 0."""

    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        for a_name, b_name in (("A_eq", "b_eq"), ("A_ub", "b_ub")):
            A, b = getattr(self, a_name), getattr(self, b_name)
            if A is None and b is None:
                A, b = np.zeros((0, n)), np.zeros(0)
            A = np.atleast_2d(np.asarray(A, dtype=float))
            b = np.asarray(b, dtype=float).reshape(-1)
            if A.size == 0:
                A = A.reshape(0, n)
            if A.shape != (b.size, n):
                raise ValueError(f"{a_name} has shape {A.shape}, expected ({b.size}, {n})")
            setattr(self, a_name, A)
            setattr(self, b_name, b)


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: np.ndarray | None = None
    fun: float | None = None
    basis: tuple = ()
    iterations: int = 0

    @property
    def success(self) -> bool:
        return self.status == "optimal"


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])
    T[:, col] = 0.0
    T[row, col] = 1.0


def _simplex_phase(T: np.ndarray, basis: list, allowed: int, max_iter: int) -> tuple[str, int]:
    """Run primal simplex on tableau T (last row = reduced costs, last column = rhs).

    Only columns ``< allowed`` may enter. Bland's rule: the lowest-index improving
    column enters; ties in the ratio test go to the lowest basic variable index.
    """
    m = T.shape[0] - 1
    for it in range(max_iter):
        costs = T[-1, :allowed]
        candidates = np.flatnonzero(costs < -PIVOT_TOL)
        if candidates.size == 0:
            return "optimal", it
        col = int(candidates[0])
        column = T[:m, col]
        positive = np.flatnonzero(column > PIVOT_TOL)
        if positive.size == 0:
            return "unbounded", it
        ratios = T[positive, -1] / column[positive]
        best = ratios.min()
        ties = positive[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
    raise MaxIterations("simplex iteration limit reached", {"iterations": max_iter})


def solve_lp(prog: LinearProgram, max_iter: int = 5000) -> LPResult:
    """Two-phase dense primal simplex with Bland's rule.

    Infeasible and unbounded programs are reported through ``status``.
    """
    c, n = prog.c, prog.c.size
    m_eq, m_ub = prog.b_eq.size, prog.b_ub.size
    # Standard form: [A_eq 0; A_ub I] [x; slack] = [b_eq; b_ub].
    A = np.zeros((m_eq + m_ub, n + m_ub))
    A[:m_eq, :n] = prog.A_eq
    A[m_eq:, :n] = prog.A_ub
    A[m_eq:, n:] = np.eye(m_ub)
    b = np.concatenate([prog.b_eq, prog.b_ub])
    neg = b < 0
    A[neg] *= -1
    b = np.where(neg, -b, b)
    m, n_std = A.shape

    # Phase 1 with one artificial per row.
    T = np.zeros((m + 1, n_std + m + 1))
    T[:m, :n_std] = A
    T[:m, n_std:n_std + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n_std] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n_std, n_std + m))
    status, it1 = _simplex_phase(T, basis, n_std, max_iter)
    infeas = -T[-1, -1]
    if infeas > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
        return LPResult("infeasible", iterations=it1)

    # Drive zero-level artificials out of the basis; drop redundant rows.
    keep = []
    for r in range(m):
        if basis[r] >= n_std:
            nz = np.flatnonzero(np.abs(T[r, :n_std]) > PIVOT_TOL)
            if nz.size:
                _pivot(T, r, int(nz[0]))
                basis[r] = int(nz[0])
                keep.append(r)
        else:
            keep.append(r)
    T = np.vstack([T[keep][:, list(range(n_std)) + [T.shape[1] - 1]], np.zeros((1, n_std + 1))])
    basis = [basis[r] for r in keep]

    cost = np.concatenate([c, np.zeros(m_ub)])
    T[-1, :n_std] = cost
    T[-1, -1] = 0.0
    for r, j in enumerate(basis):
        T[-1] -= cost[j] * T[r]
    status, it2 = _simplex_phase(T, basis, n_std, max_iter)
    if status == "unbounded":
        return LPResult("unbounded", iterations=it1 + it2)

    z = np.zeros(n_std)
    for r, j in enumerate(basis):
        z[j] = T[r, -1]
    z = np.maximum(z, 0.0)
    resid = float(np.abs(A @ z - b).max(initial=0.0))
    if resid > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
        raise NumericalBreakdown("simplex solution fails feasibility check", {"residual": resid})
    x = z[:n]
    return LPResult("optimal", x=x, fun=float(c @ x), basis=tuple(basis), iterations=it1 + it2)


def nearest_combination(point: np.ndarray, generators: np.ndarray) -> tuple[float, np.ndarray]:
    """Smallest L1 distance from ``point`` to conv(generators) and the minimizing weights.

    ``generators`` has one generator per row.
    """
    k, d = generators.shape
    # Variables: weights (k), positive residual (d), negative residual (d).
    c = np.concatenate([np.zeros(k), np.ones(2 * d)])
    A_eq = np.zeros((d + 1, k + 2 * d))
    A_eq[:d, :k] = generators.T
    A_eq[:d, k:k + d] = np.eye(d)
    A_eq[:d, k + d:] = -np.eye(d)
    A_eq[d, :k] = 1.0
    b_eq = np.concatenate([point, [1.0]])
    res = solve_lp(LinearProgram(c, A_eq, b_eq))
    if not res.success:
        raise NumericalBreakdown(f"membership LP returned {res.status}")
    return res.fun, res.x[:k]


# ---------------------------------------------------------------------------
# Concave maximization: maximize sum_i q_i ln x_i  s.t.  A x <= 1
# ---------------------------------------------------------------------------


@dataclass
class ConcaveProgram:
    """maximize sum q_i ln x_i subject to A @ x <= 1 (and x >= 0)."""

    q: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).reshape(-1)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if self.A.shape[1] != self.q.size:
            raise ValueError("A must have one column per variable")
        if np.any(self.q < 0) or np.any(self.A < 0) or not np.all(np.isfinite(self.A)):
            raise ValueError("q and A must be finite and nonnegative")
        if np.any(self.A.sum(axis=0) <= 0):
            raise ValueError("every variable must appear in some constraint (objective unbounded)")

    def objective(self, x: np.ndarray) -> float:
        mask = self.q > 0
        return float(self.q[mask] @ np.log(x[mask]))

    def dual_value(self, lam: np.ndarray) -> float:
        """Lagrangian dual g(lam) = sum lam + sum q ln(q / A^T lam) - sum q."""
        mask = self.q > 0
        aty = self.A.T @ lam
        q = self.q[mask]
        return float(lam.sum() + q @ np.log(q / aty[mask]) - q.sum())


@dataclass
class ConcaveResult:
    x: np.ndarray
    status: str
    objective: float
    dual: np.ndarray
    dual_value: float
    residuals: dict = field(default_factory=dict)
    outer_iterations: int = 0
    newton_steps: int = 0
    trace: list = field(default_factory=list)

    @property
    def duality_gap(self) -> float:
        return self.objective - self.dual_value


def kkt_residuals(prog: ConcaveProgram, x: np.ndarray, lam: np.ndarray) -> dict:
    slack = 1.0 - prog.A @ x
    free = prog.q == 0
    aty = prog.A.T @ lam
    # Scaled stationarity q_i - x_i (A^T lam)_i; for q_i = 0 only the sign condition remains.
    stat = np.where(free, np.minimum(aty, 0.0), prog.q - x * aty)
    return {
        "stationarity": float(np.abs(stat).max()),
        "primal_feasibility": float(max(0.0, -slack.min(), -x.min())),
        "complementary_slackness": float(np.abs(lam * slack).max()),
        "dual_feasibility": float(max(0.0, -lam.min())),
    }


def solve_concave(
    prog: ConcaveProgram,
    tol: float = 1e-8,
    gap_tol: float = 1e-12,
    mu_factor: float = 10.0,
    max_outer: int = 60,
    max_newton: int = 100,
    keep_trace: bool = False,
) -> ConcaveResult:
    """Primal-dual log-barrier path following.

    For each barrier weight ``mu`` the perturbed KKT system

        A^T lam = q / x,   A x + s = 1,   lam * s = mu

    is solved by damped Newton steps; ``mu`` is then divided by ``mu_factor``.
    Slacks and multipliers are carried explicitly, so precision does not
    degrade as the slacks of active constraints shrink. Stops once
    ``m * mu <= gap_tol`` and all KKT residuals are below ``tol``.
    """
    q, A = prog.q, prog.A
    m, n = A.shape
    free = (q == 0).astype(float)

    x = np.full(n, 1.0 - 1e-3) / max(1.0, float(A.sum(axis=1).max()))
    s = 1.0 - A @ x
    mu = 1.0
    lam = mu / s
    trace = []
    steps = 0

    def residuals(x, s, lam, mu):
        r_stat = x * (A.T @ lam) - q - mu * free
        r_feas = A @ x + s - 1.0
        r_cent = lam * s - mu
        return r_stat, r_feas, r_cent

    def merit(x, s, lam, mu):
        return max(float(np.abs(r).max()) for r in residuals(x, s, lam, mu))

    for outer in range(1, max_outer + 1):
        for _ in range(max_newton):
            r_stat, r_feas, r_cent = residuals(x, s, lam, mu)
            current = max(float(np.abs(r_stat).max()), float(np.abs(r_feas).max()), float(np.abs(r_cent).max()))
            if current <= 1e-3 * mu or current <= 1e-15:
                break
            # Stationarity in unscaled form: A^T lam - (q + mu free) / x = r1.
            r1 = r_stat / x
            w_inv = lam / s
            D = (q + mu * free) / x**2
            H = (A.T * w_inv) @ A
            H[np.diag_indices(n)] += D
            rhs = -r1 - A.T @ (w_inv * (r_feas - r_cent / lam))
            try:
                chol = np.linalg.cholesky(H)
            except np.linalg.LinAlgError as exc:
                raise NumericalBreakdown("Newton system is not positive definite", {"mu": mu}) from exc
            dx = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
            dlam = w_inv * (A @ dx + r_feas - r_cent / lam)
            ds = -(r_cent + s * dlam) / lam
            if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dlam))):
                raise NumericalBreakdown("non-finite Newton direction", {"mu": mu})

            step = 1.0
            for v, dv in ((x, dx), (s, ds), (lam, dlam)):
                neg = dv < 0
                if np.any(neg):
                    step = min(step, 0.99 * float(np.min(-v[neg] / dv[neg])))
            for _ in range(50):
                if merit(x + step * dx, s + step * ds, lam + step * dlam, mu) <= (1 - 0.01 * step) * current:
                    break
                step *= 0.5
            else:
                # No measurable progress left at this mu; the KKT check below decides.
                break
            x, s, lam = x + step * dx, s + step * ds, lam + step * dlam
            steps += 1
        else:
            raise MaxIterations("Newton centering did not converge", kkt_residuals(prog, x, lam))

        res = kkt_residuals(prog, x, lam)
        if keep_trace:
            trace.append({"outer": outer, "mu": mu, "objective": prog.objective(x), "gap_bound": m * mu, **res})
        if m * mu <= gap_tol and max(res.values()) <= tol:
            return ConcaveResult(
                x=x, status="optimal", objective=prog.objective(x), dual=lam, dual_value=prog.dual_value(lam),
                residuals=res, outer_iterations=outer, newton_steps=steps, trace=trace,
            )
        mu /= mu_factor

    raise MaxIterations("barrier outer iteration limit reached", res)


def dump_trace(result: ConcaveResult, path) -> None:
    """Write a barrier iterate trace (``keep_trace=True``) to CSV."""
    if not result.trace:
        raise ValueError("result carries no trace; solve with keep_trace=True")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(result.trace[0]))
        writer.writeheader()
        writer.writerows(result.trace)
