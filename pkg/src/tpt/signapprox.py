"""Best L1 approximation of ``sign(Y)`` by polynomials in ``Y = p(X)``, ``X ~ N(0, 1)``.

All integrals are taken in x-space: ``E|q(p(X)) - sign(p(X))|`` is a
Gaussian integral of a function that is smooth except where ``p``
changes sign.  The quadrature is composite Gauss-Legendre on ``[-R, R]``
with panel breaks at those sign changes, so each panel integrates a
polynomial times the Gaussian density.

The LP works in a basis of polynomials in ``t = y / max|y|`` that are
orthonormal for the discrete measure ``w_i^2`` on the nodes, built by a
Stieltjes (Arnoldi) recurrence with re-orthogonalization.  Monomials and
Chebyshev polynomials on the full range of ``y`` both become numerically
singular within a few degrees once ``p`` has heavy-tailed values.
"""

from __future__ import annotations

import csv
import io
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from numpy.polynomial.legendre import leggauss

from tpt.algebra import Polynomial
from tpt.distributions import UnivariateWeight, lsl_certificate, real_roots
from tpt.errors import DimensionError, NumericalError
from tpt.lp import weighted_lad
from tpt.serialize import format_float

MAX_DEGREE = 30
PANEL_NODES = 16
RESIDUAL_TOL = 1e-3


@dataclass(frozen=True)
class QuadratureGrid:
    R: float = 12.0
    nodes: int = 4096
    per_panel: int = PANEL_NODES

    def __post_init__(self):
        if self.nodes < 64:
            raise ValueError("a quadrature grid needs at least 64 nodes")
        if not (math.isfinite(self.R) and self.R > 0):
            raise ValueError("range must be finite and positive")

    def refined(self) -> QuadratureGrid:
        return QuadratureGrid(self.R, 2 * self.nodes, self.per_panel)


def _coefficients(p: Polynomial) -> np.ndarray:
    if p.n != 1:
        raise DimensionError("sign approximation works with univariate polynomials")
    return p.univariate_coefficients()


def x_space_grid(p: Polynomial, grid: QuadratureGrid = QuadratureGrid()) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ``int f(x) phi(x) dx`` on ``[-R, R]``, panels split at sign changes of ``p``."""
    c = _coefficients(p)
    R = grid.R
    roots = real_roots(c, -R, R) if len(c) > 1 else np.array([])
    panels = max(grid.nodes // grid.per_panel - len(roots), 1)
    breaks = np.unique(np.concatenate([np.linspace(-R, R, panels + 1), roots]))
    gx, gw = leggauss(grid.per_panel)
    a, b = breaks[:-1, None], breaks[1:, None]
    x = ((a + b) / 2 + (b - a) / 2 * gx).ravel()
    w = ((b - a) / 2 * gw).ravel() * np.exp(-x * x / 2) / math.sqrt(2 * math.pi)
    return x, w


def _signs(y: np.ndarray) -> np.ndarray:
    return np.where(y >= 0, 1.0, -1.0)


def pushforward_l1_objective(p: Polynomial, q: Polynomial, grid: QuadratureGrid = QuadratureGrid()) -> float:
    """``E|q(p(X)) - sign(p(X))|`` for ``X ~ N(0, 1)`` on the fixed grid."""
    x, w = x_space_grid(p, grid)
    y = P.polyval(x, _coefficients(p))
    qc = _coefficients(q)
    return math.fsum(w * np.abs(P.polyval(y, qc) - _signs(y)))


@dataclass(frozen=True)
class OrthoBasis:
    """Values ``Q`` (nodes x D+1) and the recurrence that generated them.

    ``Q_0 = 1`` and ``Q_k = (t Q_{k-1} - sum_{j<k} H[j, k] Q_j) / H[k, k]``
    with ``t = y / scale``.
    """

    Q: np.ndarray
    H: np.ndarray
    scale: float

    def monomial(self, beta) -> np.ndarray:
        """Coefficients (low to high, in ``y``) of ``sum_k beta_k Q_k``."""
        D = self.Q.shape[1] - 1
        polys = [np.array([1.0])]
        for k in range(1, D + 1):
            acc = P.polymulx(polys[k - 1])
            for j in range(k):
                acc = P.polysub(acc, self.H[j, k] * polys[j])
            polys.append(acc / self.H[k, k])
        out = np.zeros(D + 1)
        for b, poly in zip(beta, polys):
            out[: len(poly)] += b * poly
        return out / self.scale ** np.arange(D + 1)


def orthonormal_basis(y: np.ndarray, measure: np.ndarray, D: int) -> OrthoBasis:
    y = np.asarray(y, dtype=float)
    mu = np.asarray(measure, dtype=float)
    mu = mu / mu.sum()
    scale = float(np.max(np.abs(y))) or 1.0
    t = y / scale
    Q = np.empty((len(y), D + 1))
    H = np.zeros((D + 1, D + 1))
    Q[:, 0] = 1.0
    for k in range(1, D + 1):
        v = t * Q[:, k - 1]
        for _ in range(2):  # classical Gram-Schmidt, applied twice
            c = (mu * v) @ Q[:, :k]
            v = v - Q[:, :k] @ c
            H[:k, k] += c
        nrm = math.sqrt(float(mu @ (v * v)))
        if not nrm > 1e-300:
            raise NumericalError(f"orthogonal basis breaks down at degree {k}")
        H[k, k] = nrm
        Q[:, k] = v / nrm
    return OrthoBasis(Q, H, scale)


@dataclass(frozen=True)
class SignApproxProblem:
    p: Polynomial
    degree: int
    grid: QuadratureGrid = QuadratureGrid()

    def __post_init__(self):
        if not 0 <= self.degree <= MAX_DEGREE:
            raise ValueError(f"degree must lie in [0, {MAX_DEGREE}]")
        _coefficients(self.p)


@dataclass(frozen=True)
class SignApproxResult:
    q: Polynomial
    error: float
    grid_residual: float
    gap: float
    degree: int
    grid: QuadratureGrid

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "error": self.error,
            "grid_residual": self.grid_residual,
            "gap": self.gap,
            "grid_nodes": self.grid.nodes,
            "range": self.grid.R,
            "q": self.q.to_dict(),
        }


def _solve(p: Polynomial, D: int, grid: QuadratureGrid):
    x, w = x_space_grid(p, grid)
    y = P.polyval(x, _coefficients(p))
    basis = orthonormal_basis(y, w * w, D)
    sol = weighted_lad(basis.Q, _signs(y), w)
    return sol, basis


def best_sign_l1(problem: SignApproxProblem) -> SignApproxResult:
    """Minimize ``E|q(Y) - sign(Y)|`` over polynomials ``q`` of degree ``<= D``.

    ``error`` is the LP optimum on the grid.  ``grid_residual`` compares it
    with the optimum on a grid with twice the nodes.  The returned ``q`` is
    the monomial form of the optimizer; at high degree it is only a
    faithful record of the coefficients, and ``error`` should be read
    from the result rather than recomputed from ``q``.
    """
    p, D = problem.p, problem.degree
    sol, basis = _solve(p, D, problem.grid)
    fine, _ = _solve(p, D, problem.grid.refined())
    residual = abs(sol.objective - fine.objective)
    if residual > 10 * RESIDUAL_TOL:
        warnings.warn(f"grid residual {residual:.2e} at degree {D}; refine the quadrature", stacklevel=2)
    q = Polynomial.univariate(basis.monomial(sol.beta))
    return SignApproxResult(q, sol.objective, residual, max(sol.gap, 0.0), D, problem.grid)


# -- experiment suite -----------------------------------------------------------


def _from_roots(roots, lead: float = 1.0) -> Polynomial:
    return Polynomial.univariate(lead * P.polyfromroots(roots))


SUITE: dict[str, Polynomial] = {
    "linear": Polynomial.univariate([-0.3, 1.0]),
    "cube": Polynomial.univariate([0.0, 0.0, 0.0, 1.0]),
    "cubic3": _from_roots([0, 1, 2]),
    "deg6": _from_roots([0, 1, 2, 3, 4, 5], lead=-1.0),
}

SUITE_COLUMNS = ("p_id", "degree", "error", "grid_residual", "grid_nodes", "range")


def _suite_row(job) -> dict:
    p_id, D, grid = job
    res = best_sign_l1(SignApproxProblem(SUITE[p_id], D, grid))
    return {"p_id": p_id, "degree": D, "error": res.error, "grid_residual": res.grid_residual, "grid_nodes": grid.nodes, "range": grid.R}


def impossibility_suite(degrees, grid: QuadratureGrid = QuadratureGrid(), suite=None, workers: int | None = None) -> list[dict]:
    """One row per (suite polynomial, degree), in suite order then degree order."""
    degrees = [int(d) for d in degrees]
    if degrees != sorted(degrees):
        raise ValueError("degrees must be sorted ascending")
    names = list(SUITE) if suite is None else list(suite)
    jobs = [(name, D, grid) for name in names for D in degrees]
    workers = workers if workers is not None else int(os.environ.get("TPT_WORKERS", "1"))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_suite_row, jobs))
    return [_suite_row(job) for job in jobs]


def suite_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUITE_COLUMNS)
    for r in rows:
        w.writerow([r["p_id"], r["degree"], format_float(r["error"]), format_float(r["grid_residual"]), r["grid_nodes"], format_float(r["range"])])
    return buf.getvalue()


def onesided_lsl_verify(p: Polynomial, gamma: float, range_=(-1e4, 1.0), grid: int = 2000, log_spaced: bool = True):
    """One-sided LSL certificate for the push-forward of the Gaussian by ``p`` on ``range_``."""
    if not gamma < 0.5:
        raise ValueError("one-sided certificates need gamma < 1/2")
    return lsl_certificate(UnivariateWeight.pushforward(p), gamma, range_, grid, log_spaced=log_spaced, one_sided=True)
