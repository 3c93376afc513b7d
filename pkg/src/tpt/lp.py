"""Weighted least-absolute-deviation fits by a primal-dual interior point method.

Both the L1 regression learner and the sign-approximation experiments reduce
to

    minimize  sum_i w_i |y_i - (X beta)_i|

over a coefficient vector ``beta`` with only a handful of entries.  Writing
``r = y - X beta = u - v`` with ``u, v >= 0`` gives the usual slack LP.  We
solve its bounded dual

    maximize  y^T a   subject to  X^T a = X^T 1 / 2,  0 <= a <= 1

(rows pre-scaled by ``w``) with Mehrotra's predictor-corrector.  Every Newton
step only needs a ``p x p`` normal-equation solve, so thousands of rows cost
next to nothing.  The regression coefficients are the equality multipliers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from tpt.errors import OptimizationError

log = logging.getLogger(__name__)

MAX_ITER = 200
GAP_TOL = 1e-8
_STEP = 0.99995
#: rows lighter than this (relative to the heaviest) are left out of the
#: iteration; they still count in the reported objective
ROW_FLOOR = 1e-40


@dataclass(frozen=True)
class LADSolution:
    beta: np.ndarray
    objective: float  # weighted L1 residual of ``beta`` (primal value)
    dual_bound: float  # certified lower bound on the optimum
    iterations: int

    @property
    def gap(self) -> float:
        return self.objective - self.dual_bound


def _objective(X, y, w, beta) -> float:
    return math.fsum(w * np.abs(y - X @ beta))


def _max_step(v, dv) -> float:
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return min(1.0, float(np.min(-v[neg] / dv[neg])))


def _solve_normal(A, theta, rhs):
    """Solve ``(A diag(theta) A^T) d = rhs`` through a QR factor of ``sqrt(theta) A^T``."""
    R = np.linalg.qr(np.sqrt(theta)[:, None] * A.T, mode="r")
    try:
        t = solve_triangular(R, rhs, trans="T")
        return solve_triangular(R, t)
    except (np.linalg.LinAlgError, ValueError):
        return np.linalg.lstsq((A * theta) @ A.T, rhs, rcond=None)[0]


def weighted_lad(X, y, w=None, *, max_iter: int = MAX_ITER, tol: float = GAP_TOL, polish: bool = True) -> LADSolution:
    """Minimize ``sum_i w_i |y_i - X_i beta|``.

    Stops once the duality gap falls below ``tol * (1 + |objective|)``;
    raises :class:`OptimizationError` carrying the last gap if ``max_iter``
    iterations do not get there.  With ``polish`` the interior solution is
    snapped to the basic solution through its smallest residuals whenever
    that is no worse, which recovers an exact LP vertex.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    m, p = X.shape
    w = np.ones(m) if w is None else np.asarray(w, dtype=float)
    if y.shape != (m,) or w.shape != (m,):
        raise ValueError("X, y and w must agree in length")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")

    X_all, y_all, w_all = X, y, w
    if m == 0 or w.max() <= 0:
        raise OptimizationError("no rows with positive weight")
    active = w > ROW_FLOOR * w.max()
    X, y, w = X[active], y[active], w[active]
    m = X.shape[0]

    # a global rescale keeps the iterates O(1); undone on return
    wscale = float(w.max())
    yscale = float(np.max(np.abs(y))) if np.max(np.abs(y)) > 0 else 1.0
    ws = w / wscale
    Xw = X * ws[:, None]
    yw = (y / yscale) * ws
    # column scaling of the design improves the normal equations
    colscale = np.sqrt(np.sum(Xw * Xw, axis=0))
    colscale[colscale == 0] = 1.0
    A = (Xw / colscale).T  # p x m
    c = -yw
    b = A.sum(axis=1) / 2.0
    u = np.ones(m)

    x = np.full(m, 0.5)
    s = u - x
    yd = np.linalg.lstsq(A.T, c, rcond=None)[0]
    r = c - A.T @ yd
    z = np.where(r > 0, r, 0.0) + 1e-2
    wv = z - r

    it = 0
    gap = math.inf
    for it in range(1, max_iter + 1):
        primal = c @ x
        dual = b @ yd - u @ wv
        gap = primal - dual
        if abs(gap) <= tol * (1.0 + abs(primal)) and np.linalg.norm(A @ x - b) <= 1e-9 * (1 + np.linalg.norm(b)):
            break
        rp = b - A @ x
        rd = c - A.T @ yd - z + wv
        theta = 1.0 / np.maximum(z / x + wv / s, 1e-300)

        def direction(r_xz, r_sw):
            rhs = rp + A @ (theta * (rd - r_xz / x + r_sw / s))
            dy = _solve_normal(A, theta, rhs)
            dx = theta * (A.T @ dy - rd + r_xz / x - r_sw / s)
            dz = (r_xz - z * dx) / x
            dw = (r_sw + wv * dx) / s
            return dx, dy, dz, dw

        # predictor
        dx, dy, dz, dw = direction(-x * z, -s * wv)
        ap = min(_max_step(x, dx), _max_step(s, -dx))
        ad = min(_max_step(z, dz), _max_step(wv, dw))
        mu = (x @ z + s @ wv) / (2 * m)
        mu_aff = ((x + ap * dx) @ (z + ad * dz) + (s - ap * dx) @ (wv + ad * dw)) / (2 * m)
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        # corrector
        dx, dy, dz, dw = direction(sigma * mu - x * z - dx * dz, sigma * mu - s * wv + dx * dw)
        ap = _STEP * min(_max_step(x, dx), _max_step(s, -dx))
        ad = _STEP * min(_max_step(z, dz), _max_step(wv, dw))
        # s is stepped on its own: recomputing u - x cancels near the bound
        x = x + ap * dx
        s = s - ap * dx
        yd = yd + ad * dy
        z = z + ad * dz
        wv = wv + ad * dw
    else:
        raise OptimizationError(f"interior point did not converge in {max_iter} iterations", gap=gap)

    beta = -yd / colscale * yscale
    # dual objective in original units: max y^T lambda with lambda = 2a - 1
    lam = 2 * x - 1
    dual_bound = math.fsum(yw * lam) * yscale * wscale
    obj = _objective(X_all, y_all, w_all, beta)
    if polish:
        beta, obj = _polish(X_all, y_all, w_all, beta, obj)
    return LADSolution(beta=beta, objective=obj, dual_bound=min(dual_bound, obj), iterations=it)


def _polish(X, y, w, beta, obj):
    """Try the basic solution interpolating the rows with smallest residual."""
    m, p = X.shape
    if m < p:
        return beta, obj
    resid = np.abs(y - X @ beta)
    order = np.argsort(resid, kind="stable")
    rows: list[int] = []
    for i in order:
        if w[i] <= 0:
            continue
        trial = rows + [int(i)]
        if np.linalg.matrix_rank(X[trial]) == len(trial):
            rows = trial
        if len(rows) == p:
            break
    if len(rows) < p:
        return beta, obj
    try:
        cand = np.linalg.solve(X[rows], y[rows])
    except np.linalg.LinAlgError:
        return beta, obj
    cand_obj = _objective(X, y, w, cand)
    if cand_obj <= obj:
        return cand, cand_obj
    return beta, obj
