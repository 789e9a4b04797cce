"""Bounded Levenberg-Marquardt least squares with forward-difference Jacobians.

Every fit in the package goes through :func:`nlls_solve`. The iteration first
tries the undamped Gauss-Newton step and only introduces Marquardt damping
(scaled by the running maximum of ``diag(J^T J)``) when that fails to reduce
the cost, so linear problems finish in a single accepted step. Trial points
are projected onto the box bounds; a step is accepted only if it lowers the
residual norm.
"""

from dataclasses import dataclass, field

import numpy as np


class FitError(RuntimeError):
    """The problem cannot be evaluated (non-finite residual, bad bounds...)."""


@dataclass
class FitProblem:
    residual: object  # callable: params (ndarray) -> residual vector
    x0: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    max_iter: int = 200
    xtol: float = 1e-10
    ftol: float = 1e-12
    diff_step: float = 1e-6
    jac: object = None  # optional callable: params -> (m, n) Jacobian
    scale_covariance: bool = True

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        n = self.x0.size
        self.lower = np.full(n, -np.inf) if self.lower is None else np.broadcast_to(np.asarray(self.lower, float), (n,)).copy()
        self.upper = np.full(n, np.inf) if self.upper is None else np.broadcast_to(np.asarray(self.upper, float), (n,)).copy()
        if np.any(self.lower > self.upper):
            raise FitError("lower bound exceeds upper bound")
        if np.any(self.x0 < self.lower) or np.any(self.x0 > self.upper):
            raise FitError("initial parameters outside bounds")


@dataclass
class FitResult:
    params: np.ndarray
    stderr: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    diagnostics: list = field(default_factory=list)
    residuals: np.ndarray | None = None
    jacobian: np.ndarray | None = None
    cost_history: list = field(default_factory=list)


def _evaluate(fun, x):
    r = np.atleast_1d(np.asarray(fun(x), dtype=float))
    return r


def numeric_jacobian(fun, x, r0, lower, upper, rel_step=1e-6):
    """Forward differences; steps flip sign next to an upper bound."""
    m, n = r0.size, x.size
    jac = np.empty((m, n))
    for j in range(n):
        h = rel_step * max(abs(x[j]), 1.0)
        if x[j] + h > upper[j]:
            h = -h
        xp = x.copy()
        xp[j] += h
        jac[:, j] = (_evaluate(fun, xp) - r0) / (xp[j] - x[j])
    return jac


def _damped_step(jac, r, lam, scale):
    n = jac.shape[1]
    if lam > 0:
        a = np.vstack([jac, np.diag(np.sqrt(lam * scale))])
        b = np.concatenate([-r, np.zeros(n)])
    else:
        a, b = jac, -r
    step, *_ = np.linalg.lstsq(a, b, rcond=None)
    return step


def nlls_solve(problem):
    """Minimise ``0.5 * ||residual(x)||^2`` inside the problem's bounds."""
    p = problem
    fun = p.residual
    x = p.x0.copy()
    r = _evaluate(fun, x)
    if not np.all(np.isfinite(r)):
        raise FitError("residual is not finite at the initial parameters")
    cost = 0.5 * float(r @ r)
    history = [cost]
    diagnostics = []

    def jacobian_at(x, r):
        if p.jac is not None:
            return np.asarray(p.jac(x), dtype=float)
        return numeric_jacobian(fun, x, r, p.lower, p.upper, p.diff_step)

    jac = jacobian_at(x, r)
    scale = np.maximum(np.sum(jac**2, axis=0), 1e-300)
    lam = 0.0
    converged = False
    it = 0
    while it < p.max_iter:
        if cost == 0.0:
            converged = True
            diagnostics.append("zero residual")
            break
        it += 1
        grad = jac.T @ r
        # parameters pinned at a bound by the descent direction are frozen
        free = ~(((x <= p.lower) & (grad > 0)) | ((x >= p.upper) & (grad < 0)))
        accepted = False
        for _ in range(60):
            step = np.zeros_like(x)
            if free.any():
                step[free] = _damped_step(jac[:, free], r, lam, scale[free])
            x_new = np.clip(x + step, p.lower, p.upper)
            step = x_new - x
            if np.linalg.norm(step) <= p.xtol * (np.linalg.norm(x) + p.xtol):
                converged = True
                diagnostics.append("step tolerance reached")
                break
            r_new = _evaluate(fun, x_new)
            if np.all(np.isfinite(r_new)):
                cost_new = 0.5 * float(r_new @ r_new)
                pred_r = r + jac @ step
                predicted = cost - 0.5 * float(pred_r @ pred_r)
                actual = cost - cost_new
                if actual > 0:
                    rho = actual / predicted if predicted > 0 else 0.0
                    accepted = True
                    break
            # rejected: raise damping
            lam = 1e-3 * scale.max() if lam == 0 else lam * 4.0
        if converged or not accepted:
            if not accepted and not converged:
                diagnostics.append("no cost-reducing step found")
                converged = True
            break
        small_change = actual <= p.ftol * cost and abs(predicted) <= p.ftol * cost
        x, r, cost = x_new, r_new, cost_new
        history.append(cost)
        jac = jacobian_at(x, r)
        scale = np.maximum(scale, np.sum(jac**2, axis=0))
        if lam > 0:
            lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            if lam < 1e-9 * scale.max():
                lam = 0.0
        if small_change:
            converged = True
            diagnostics.append("residual tolerance reached")
            break
    else:
        diagnostics.append(f"iteration limit {p.max_iter} reached")

    stderr = _standard_errors(jac, r, p.scale_covariance)
    if converged and not np.all(np.isfinite(stderr)):
        diagnostics.append("singular Jacobian: parameters not individually identifiable")
    return FitResult(
        params=x,
        stderr=stderr,
        residual_norm=float(np.sqrt(2 * cost)),
        iterations=it,
        converged=converged,
        diagnostics=diagnostics,
        residuals=r,
        jacobian=jac,
        cost_history=history,
    )


def _standard_errors(jac, r, scale_covariance):
    m, n = jac.shape
    jtj = jac.T @ jac
    try:
        cond = np.linalg.cond(jtj)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not np.isfinite(cond) or cond > 1e15:
        return np.full(n, np.inf)
    cov = np.linalg.inv(jtj)
    if scale_covariance:
        dof = max(m - n, 1)
        cov = cov * float(r @ r) / dof
    return np.sqrt(np.clip(np.diag(cov), 0, None))
