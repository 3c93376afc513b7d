"""L1 polynomial regression, threshold rounding and the testable-learning pipeline.

The learner fits a degree-``k`` polynomial ``h`` minimizing the mean
absolute error against the labels, then picks a threshold ``t`` so that
``sign(h(x) - t)`` has the smallest training 0/1 loss.  The pipeline runs the
moment-matching tester first and only learns on acceptance.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import hermite_e

from tpt.algebra import Polynomial, enumerate_multi_indices, poly_normalize
from tpt.distributions import make_rng, sample_gaussian, spawn_seeds
from tpt.errors import DimensionError
from tpt.lp import GAP_TOL, MAX_ITER, weighted_lad
from tpt.tester import TesterVerdict, tamm_accept


def sign_pm(values) -> np.ndarray:
    """Elementwise sign with ``sign(0) = +1``."""
    return np.where(np.asarray(values) >= 0, 1, -1).astype(np.int8)


@dataclass(frozen=True, eq=False)
class LabeledSet:
    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        labs = np.asarray(self.labels).astype(np.int8)
        if pts.ndim != 2 or labs.shape != (pts.shape[0],):
            raise DimensionError("need an (m, n) point array and m labels")
        if not np.all((labs == 1) | (labs == -1)):
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labs)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def split(self, first: int | None = None) -> tuple[LabeledSet, LabeledSet]:
        """First ``first`` rows and the rest (half and half by default)."""
        cut = self.m // 2 if first is None else first
        return (
            LabeledSet(self.points[:cut], self.labels[:cut]),
            LabeledSet(self.points[cut:], self.labels[cut:]),
        )


@dataclass(frozen=True, eq=False)
class LabelModel:
    """How labels are attached to Gaussian points.

    ``planted``: ``sign(p(x))`` with each label flipped independently with
    probability ``rho``.  ``band``: ``sign(p(x))`` flipped exactly on the band
    ``|p(x)| < margin``, an adversary that spends its noise at the boundary.
    ``random``: fair coin labels.
    """

    kind: str
    p: Polynomial | None = None
    rho: float = 0.0
    margin: float = 0.0

    def __post_init__(self):
        if self.kind not in ("planted", "band", "random"):
            raise ValueError(f"unknown label model {self.kind!r}")
        if self.kind != "random" and self.p is None:
            raise ValueError(f"{self.kind} labels need a polynomial")
        if not 0.0 <= self.rho <= 0.5:
            raise ValueError("flip rate must lie in [0, 1/2]")
        if self.margin < 0:
            raise ValueError("margin must be non-negative")

    def labels(self, points, seed) -> np.ndarray:
        points = np.atleast_2d(points)
        rng = make_rng(seed)
        if self.kind == "random":
            return np.where(rng.random(points.shape[0]) < 0.5, -1, 1).astype(np.int8)
        vals = self.p.evaluate(points)
        z = sign_pm(vals)
        if self.kind == "planted":
            flip = rng.random(points.shape[0]) < self.rho
        else:
            flip = np.abs(vals) < self.margin
        return np.where(flip, -z, z).astype(np.int8)


def draw_labeled(n: int, m: int, model: LabelModel, seed) -> LabeledSet:
    """Gaussian points with labels from ``model``; points and labels use independent streams."""
    s_pts, s_lab = spawn_seeds(seed, 2)
    pts = sample_gaussian(n, m, s_pts)
    return LabeledSet(pts, model.labels(pts, s_lab))


def random_ptf(n: int, d: int, rng: np.random.Generator) -> Polynomial:
    """Normalized polynomial with iid standard normal coefficients on every monomial of degree <= d."""
    coefs = rng.standard_normal(math.comb(n + d, d))
    return poly_normalize(Polynomial.from_coefficients(n, d, coefs))


# -- regression ------------------------------------------------------------------


def _hermite_tables(k: int):
    """Monomial coefficients of the probabilists' Hermite polynomials ``He_0..He_k``."""
    return [hermite_e.herme2poly([0] * e + [1]) for e in range(k + 1)]


def design_matrix(points, k: int, basis: str = "monomial") -> np.ndarray:
    """Features for every ``|alpha| <= k`` in graded-lex order."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m, n = pts.shape
    if basis == "monomial":
        cols1d = [[pts[:, i] ** e for e in range(k + 1)] for i in range(n)]
    elif basis == "hermite":
        cols1d = [[hermite_e.hermeval(pts[:, i], [0] * e + [1]) for e in range(k + 1)] for i in range(n)]
    else:
        raise ValueError(f"unknown basis {basis!r}")
    feats = []
    for alpha in enumerate_multi_indices(n, k):
        col = np.ones(m)
        for i, a in enumerate(alpha):
            if a:
                col = col * cols1d[i][a]
        feats.append(col)
    return np.column_stack(feats)


def _hermite_to_monomial(n: int, k: int, coefs) -> Polynomial:
    tables = _hermite_tables(k)
    out = Polynomial(n)
    for alpha, c in zip(enumerate_multi_indices(n, k), coefs):
        if c == 0:
            continue
        term = Polynomial.constant(n, float(c))
        for i, a in enumerate(alpha):
            if a:
                terms = {}
                for e, t in enumerate(tables[a]):
                    if t:
                        idx = [0] * n
                        idx[i] = e
                        terms[tuple(idx)] = float(t)
                term = term * Polynomial(n, terms)
        out = out + term
    return out


@dataclass(frozen=True)
class L1Fit:
    h: Polynomial
    objective: float  # mean absolute residual
    gap: float  # certified duality gap, same units as ``objective``
    iterations: int


def fit_l1_polynomial(
    points,
    targets,
    k: int,
    basis: str = "monomial",
    max_iter: int = MAX_ITER,
    tol: float = GAP_TOL,
) -> L1Fit:
    """Least-absolute-deviation polynomial fit of degree ``k`` to real targets."""
    if k < 0:
        raise ValueError("k must be non-negative")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    z = np.asarray(targets, dtype=float)
    m, n = pts.shape
    if z.shape != (m,):
        raise DimensionError("one target per point is required")
    if m == 0:
        raise ValueError("cannot fit an empty sample")
    if k == 0:
        # the lower median is an L1-optimal constant; no LP needed
        c = float(np.sort(z)[(m - 1) // 2])
        return L1Fit(Polynomial.constant(n, c), float(np.mean(np.abs(z - c))), 0.0, 0)
    count = math.comb(n + k, k)
    if m < count:
        warnings.warn(f"{m} samples for {count} coefficients: the fit is underdetermined", stacklevel=2)
    X = design_matrix(pts, k, basis)
    sol = weighted_lad(X, z, max_iter=max_iter, tol=tol)
    if basis == "hermite":
        h = _hermite_to_monomial(n, k, sol.beta)
    else:
        h = Polynomial.from_coefficients(n, k, sol.beta)
    return L1Fit(h, sol.objective / m, max(sol.gap, 0.0) / m, sol.iterations)


def l1_regression(data: LabeledSet, k: int, basis: str = "monomial", max_iter: int = MAX_ITER, tol: float = GAP_TOL) -> L1Fit:
    """:func:`fit_l1_polynomial` against the labels of ``data``."""
    return fit_l1_polynomial(data.points, data.labels.astype(float), k, basis, max_iter, tol)


def l1_fit(data: LabeledSet, k: int, basis: str = "monomial") -> Polynomial:
    """Polynomial of degree ``<= k`` minimizing the mean of ``|h(x_i) - z_i|``."""
    return l1_regression(data, k, basis).h


# -- rounding ---------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdClassifier:
    """``x -> sign(h(x) - t)`` with ``sign(0) = +1``."""

    h: Polynomial
    t: float

    def predict(self, points) -> np.ndarray:
        return sign_pm(self.h.evaluate(np.atleast_2d(points)) - self.t)

    def __call__(self, points) -> np.ndarray:
        return self.predict(points)

    def to_dict(self) -> dict:
        return {"h": self.h.to_dict(), "t": self.t}


def _threshold_losses(values: np.ndarray, labels: np.ndarray, cands: np.ndarray) -> np.ndarray:
    """Training 0/1 loss of ``sign(values - t)`` for every candidate ``t``."""
    order = np.argsort(values, kind="stable")
    v, z = values[order], labels[order]
    pos_below = np.concatenate([[0], np.cumsum(z == 1)])
    neg_below = np.concatenate([[0], np.cumsum(z == -1)])
    below = np.searchsorted(v, cands, side="left")  # points predicted -1
    wrong = pos_below[below] + (neg_below[-1] - neg_below[below])
    return wrong / len(values)


def round_classifier(h: Polynomial, data: LabeledSet) -> tuple[float, ThresholdClassifier]:
    """Pick the threshold with the smallest training 0/1 loss.

    Candidates are the values ``h(x_i)``, midpoints of consecutive distinct
    values, and 0.  Ties go to a candidate strictly between data values when
    one exists, then to the smallest ``|t|``, then to the smallest ``t``.
    """
    vals = h.evaluate(data.points)
    uniq = np.unique(vals)
    mids = (uniq[:-1] + uniq[1:]) / 2
    cands = np.unique(np.concatenate([uniq, mids, [0.0]]))
    losses = _threshold_losses(vals, data.labels, cands)
    on_value = np.isin(cands, uniq)
    best = np.lexsort((cands, np.abs(cands), on_value, losses))[0]
    t = float(cands[best])
    return t, ThresholdClassifier(h, t)


def empirical_loss(clf, data: LabeledSet) -> float:
    """Fraction of points where the classifier disagrees with the label."""
    return float(np.mean(clf(data.points) != data.labels))


# -- pipeline ---------------------------------------------------------------------


@dataclass(frozen=True)
class LearnConfig:
    k: int
    eta: float
    basis: str = "monomial"
    max_iter: int = MAX_ITER
    tol: float = GAP_TOL


@dataclass(frozen=True)
class LearnOutcome:
    status: str  # "Accepted" or "Rejected"
    tester: TesterVerdict
    classifier: ThresholdClassifier | None = None
    train_loss: float | None = None
    fit_objective: float | None = None
    extras: dict = field(default_factory=dict)

    @property
    def accepted(self) -> bool:
        return self.status == "Accepted"

    def to_dict(self) -> dict:
        out = {"status": self.status, "tester": self.tester.to_dict()}
        if self.classifier is not None:
            out["classifier"] = self.classifier.to_dict()
            out["train_loss"] = self.train_loss
            out["fit_objective"] = self.fit_objective
        out.update(self.extras)
        return out


def testable_learn(data: LabeledSet, d: int, epsilon: float, cfg: LearnConfig) -> LearnOutcome:
    """Test the points with T_AMM(cfg.k, cfg.eta); on acceptance fit, round and report.

    ``d`` and ``epsilon`` describe the target class and accuracy; at desk
    scale they only constrain ``cfg`` (``cfg.k >= d``) and are recorded.
    """
    if cfg.k < d:
        raise ValueError(f"regression degree k={cfg.k} must be at least the PTF degree d={d}")
    if not 0 < epsilon:
        raise ValueError("epsilon must be positive")
    verdict = tamm_accept(data.points, cfg.k, cfg.eta)
    if not verdict.accepted:
        return LearnOutcome("Rejected", verdict)
    fit = l1_regression(data, cfg.k, cfg.basis, cfg.max_iter, cfg.tol)
    t, clf = round_classifier(fit.h, data)
    return LearnOutcome("Accepted", verdict, clf, empirical_loss(clf, data), fit.objective)


def opt_estimate(
    data: LabeledSet,
    d: int,
    budget: int,
    seed,
    planted: Polynomial | None = None,
) -> float:
    """Upper bound on the best degree-``d`` PTF loss on ``data``.

    The minimum loss over ``budget`` random normalized PTFs drawn from one
    seeded stream, and the planted PTF when given.  With nothing to try the
    vacuous bound 1.0 comes back.  This bounds opt from above; it is not opt.
    """
    best = 1.0
    if planted is not None:
        best = min(best, empirical_loss(lambda x: sign_pm(planted.evaluate(x)), data))
    rng = make_rng(seed)
    for _ in range(budget):
        p = random_ptf(data.n, d, rng)
        best = min(best, empirical_loss(lambda x, p=p: sign_pm(p.evaluate(x)), data))
    return best
