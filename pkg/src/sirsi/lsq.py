"""Box-constrained nonlinear least squares.

A Levenberg-Marquardt trust-region iteration in bound-normalized
coordinates ``z = (x - lower) / (upper - lower)``, so every variable lives
in [0, 1].  Variables sitting on a bound with the gradient pushing outward
are frozen for the step; the trial step is then either projected onto the
box or reflected off the violated bound, whichever gives the better model
decrease.  Steps are accepted only if they reduce the cost, and every
iterate is feasible by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class LsqResult:
    x: np.ndarray
    cost: float                  # 0.5 * ||r||^2
    fun: np.ndarray
    jac: np.ndarray
    iterations: int
    nfev: int
    converged: bool
    status: str
    history: list = field(default_factory=list)   # (x, cost) per accepted iterate, starting with x0

    @property
    def residual_norm(self) -> float:
        return float(np.sqrt(2.0 * self.cost))


def forward_difference_jacobian(fun, x, f0, lower, upper, rel_step=1e-6):
    """Forward differences with steps ``rel_step * (upper - lower)``.

    Steps that would leave the box are taken backwards instead.
    """
    width = upper - lower
    J = np.empty((f0.size, x.size))
    for j in range(x.size):
        h = rel_step * width[j]
        if x[j] + h > upper[j]:
            h = -h
        xp = x.copy()
        xp[j] = x[j] + h
        J[:, j] = (fun(xp) - f0) / (xp[j] - x[j])
    return J


def trust_region_lsq(
    fun: Callable[[np.ndarray], np.ndarray],
    x0,
    lower,
    upper,
    jac: Callable | None = None,
    *,
    max_iterations: int = 200,
    gtol: float = 1e-10,
    xtol: float = 1e-10,
    ftol: float = 1e-12,
    fd_step: float = 1e-6,
    initial_damping: float = 1e-3,
) -> LsqResult:
    """Minimize ``0.5 * ||fun(x)||^2`` subject to ``lower <= x <= upper``.

    ``jac(x)`` may return the residual Jacobian; otherwise forward
    differences are used.  ``max_iterations`` counts Jacobian evaluations.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape or not np.all(np.isfinite(lower)) or not np.all(np.isfinite(upper)):
        raise ValueError("bounds must be finite arrays of equal shape")
    if np.any(lower >= upper):
        raise ValueError("every lower bound must be strictly below its upper bound")
    width = upper - lower
    x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)

    nfev = 0

    def x_of(z):
        # exact endpoints on active bounds
        return np.where(z <= 0.0, lower, np.where(z >= 1.0, upper, lower + z * width))

    def f_of(z):
        nonlocal nfev
        nfev += 1
        r = np.asarray(fun(x_of(z)), dtype=float)
        return r

    def jac_of(z, r):
        nonlocal nfev
        if jac is not None:
            return np.asarray(jac(x_of(z)), dtype=float) * width
        J = forward_difference_jacobian(lambda x: np.asarray(fun(x), dtype=float), x_of(z), r,
                                        lower, upper, fd_step)
        nfev += z.size
        return J * width

    z = np.clip((x0 - lower) / width, 0.0, 1.0)
    r = f_of(z)
    if not np.all(np.isfinite(r)):
        raise FloatingPointError("residuals are not finite at the starting point")
    cost = 0.5 * float(r @ r)
    history = [(x_of(z), cost)]
    J = jac_of(z, r)
    damping = None
    growth = 2.0
    status = "max_iterations"
    converged = False
    iterations = 0

    while iterations < max_iterations:
        iterations += 1
        if cost == 0.0:
            status, converged = "zero_residual", True
            break
        g = J.T @ r
        at_lower = (z <= 0.0) & (g > 0.0)
        at_upper = (z >= 1.0) & (g < 0.0)
        free = ~(at_lower | at_upper)
        proj_g = np.where(free, g, 0.0)
        # largest cosine between the residual and a free Jacobian column
        col_norms = np.linalg.norm(J, axis=0)
        cosines = np.abs(proj_g) / np.maximum(col_norms * np.sqrt(2.0 * cost), 1e-300)
        if np.max(cosines) <= gtol:
            status, converged = "gtol", True
            break

        JtJ = J.T @ J
        diag = np.maximum(np.diag(JtJ), 1e-12 * max(np.max(np.diag(JtJ)), 1e-300))
        if damping is None:
            damping = initial_damping

        accepted = False
        while not accepted:
            step = np.zeros_like(z)
            A = JtJ[np.ix_(free, free)] + damping * np.diag(diag[free])
            try:
                step[free] = np.linalg.solve(A, -g[free])
            except np.linalg.LinAlgError:
                step[free] = np.linalg.lstsq(A, -g[free], rcond=None)[0]

            candidates = [np.clip(z + step, 0.0, 1.0), _reflect(z + step)]
            best = None
            for z_try in candidates:
                s = z_try - z
                pred = -(g @ s + 0.5 * float(s @ (JtJ @ s)))
                if best is None or pred > best[1]:
                    best = (z_try, pred, s)
            z_try, pred, s = best

            if np.linalg.norm(s) <= xtol * (xtol + np.linalg.norm(z)):
                status, converged = "xtol", True
                break
            r_try = f_of(z_try)
            cost_try = 0.5 * float(r_try @ r_try) if np.all(np.isfinite(r_try)) else np.inf
            actual = cost - cost_try
            rho = actual / pred if pred > 0 else -1.0
            if actual > 0.0 and rho > 1e-4:
                accepted = True
                small_change = actual <= ftol * cost
                z, r, cost = z_try, r_try, cost_try
                history.append((x_of(z), cost))
                damping *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
                growth = 2.0
                if small_change:
                    status, converged = "ftol", True
            else:
                damping *= growth
                growth *= 2.0
                if damping > 1e16:
                    status = "stalled"
                    break
        if converged or status == "stalled":
            break
        J = jac_of(z, r)

    return LsqResult(x=x_of(z), cost=cost, fun=r, jac=J / width, iterations=iterations, nfev=nfev,
                     converged=converged, status=status, history=history)


def _reflect(z):
    z = np.where(z < 0.0, -z, z)
    z = np.where(z > 1.0, 2.0 - z, z)
    return np.clip(z, 0.0, 1.0)
