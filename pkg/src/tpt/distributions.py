"""Samplers and exact finite distributions.

Everything random goes through :func:`make_rng`, a Philox counter-based
generator keyed by an explicit integer seed, so every draw is reproducible
bit for bit.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import hermite_e
from scipy.optimize import brentq
from scipy.special import gamma as gamma_fn

from tpt import tester
from tpt.algebra import Polynomial
from tpt.errors import DimensionError, NumericalError, PerturbationError, SizeError

SUPPORT_CAP = 10**6
WEIGHT_TOL = 1e-12
#: smallest slack we will try to dial in; quadrature rounding sits just below
SLACK_FLOOR = 1e-12
BLOCK_MOMENT_CAP = 8
ROOT_GRID_CELLS = 4096
ROOT_RANGE = 12.0
ROOT_XTOL = 1e-12
CRITICAL_DERIV = 1e-10


def make_rng(seed) -> np.random.Generator:
    """Philox generator for an integer seed or a ``SeedSequence``."""
    return np.random.Generator(np.random.Philox(seed))


def spawn_seeds(seed, count: int) -> list[np.random.SeedSequence]:
    """``count`` independent child streams of ``seed`` (an int or a ``SeedSequence``)."""
    parent = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return parent.spawn(count)


def sample_gaussian(n: int, m: int, seed) -> np.ndarray:
    """``m`` iid draws from ``N(0, I_n)`` as an ``(m, n)`` array."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    return make_rng(seed).standard_normal((m, n))


# -- finite distributions ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finite distribution: support ``points`` (shape ``(s, n)``) with positive ``weights`` summing to 1."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.array(self.weights, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise DimensionError("points must be a non-empty (s, n) array")
        if w.shape != (pts.shape[0],):
            raise DimensionError("one weight per support point is required")
        if np.any(~(w > 0)):
            raise ValueError("weights must be positive")
        if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {math.fsum(w)!r}, not 1")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @classmethod
    def point_mass(cls, x) -> DiscreteDistribution:
        return cls(np.atleast_2d(np.asarray(x, dtype=float)), np.ones(1))

    @classmethod
    def from_counts(cls, points) -> DiscreteDistribution:
        """Empirical distribution of a sample, merging repeated points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        counts = Counter(map(tuple, pts))
        keys = list(counts)
        total = pts.shape[0]
        return cls(np.array(keys), np.array([counts[k] / total for k in keys]))

    def sample(self, m: int, seed) -> np.ndarray:
        idx = make_rng(seed).choice(self.size, size=m, p=self.weights)
        return self.points[idx]

    def to_dict(self) -> dict:
        return {"n": self.n, "points": self.points.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, data) -> DiscreteDistribution:
        n = int(data["n"])
        pts = np.asarray(data["points"], dtype=float).reshape(-1, n)
        return cls(pts, np.asarray(data["weights"], dtype=float))


def gauss_hermite_product(n: int, m: int, cap: int = SUPPORT_CAP) -> DiscreteDistribution:
    """Tensor-product Gauss-Hermite rule for the standard Gaussian, ``m`` nodes per axis.

    Matches every moment ``E[x^alpha]`` with all ``alpha_i <= 2m - 1``.
    """
    if not 1 <= m <= 64:
        raise ValueError("nodes per axis must lie in [1, 64]")
    if n < 1:
        raise ValueError("n must be positive")
    if m**n > cap:
        raise SizeError(f"support size {m}^{n} exceeds cap {cap}")
    x, w = hermite_e.hermegauss(m)
    w = w / math.sqrt(2 * math.pi)
    w = w / math.fsum(w)
    pts = np.array(list(itertools.product(x, repeat=n)), dtype=float).reshape(-1, n)
    wts = np.array([math.prod(c) for c in itertools.product(w, repeat=n)])
    return DiscreteDistribution(pts, wts / math.fsum(wts))


def _direction(D: DiscreteDistribution, coord: int) -> np.ndarray:
    """Values of the lowest even Hermite direction ``He_2(x_coord) = x^2 - 1`` on the support."""
    x = D.points[:, coord]
    return x * x - 1.0


def perturb_weights(D: DiscreteDistribution, target_slack: float, degree: int, seed=None) -> DiscreteDistribution:
    """Reweight ``D`` so its moment slack at ``degree`` lands in ``[eta/2, eta]``.

    New weights are ``w * (1 + t h) / Z`` with ``h = x_i^2 - 1`` along one
    coordinate ``i`` (drawn from ``seed``; coordinate 0 when ``seed`` is
    None).  ``t`` is found by bisection on the exactly recomputed slack,
    aiming at ``eta`` from below.  Positive ``t`` is tried first.
    """
    eta = float(target_slack)
    if not eta >= SLACK_FLOOR:
        raise PerturbationError(f"target slack {eta!r} is below the quadrature floor {SLACK_FLOOR}")
    base, _ = tester.moment_slack(D, degree)
    if base > 1e-9:
        raise PerturbationError(f"input is not moment matching at degree {degree} (slack {base:.3g})")
    coord = 0 if seed is None else int(make_rng(seed).integers(D.n))
    h = _direction(D, coord)

    def reweighted(t: float) -> np.ndarray:
        w = D.weights * (1.0 + t * h)
        return w / math.fsum(w)

    def slack(t: float) -> float:
        w = reweighted(t)
        return tester.moment_slack(DiscreteDistribution(D.points, w), degree)[0]

    for sign in (1.0, -1.0):
        hs = sign * h
        neg = hs < 0
        # 1 + t*hs must stay positive on the whole support
        t_max = float(np.min(-1.0 / hs[neg])) * (1 - 1e-9) if np.any(neg) else 1e6
        if slack(sign * t_max) < eta / 2:
            continue
        lo, hi = 0.0, t_max
        if slack(sign * hi) <= eta:
            lo = hi
        else:
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if slack(sign * mid) <= eta:
                    lo = mid
                else:
                    hi = mid
                if hi - lo <= 1e-15 * hi:
                    break
        s = slack(sign * lo)
        if eta / 2 <= s <= eta:
            return DiscreteDistribution(D.points, reweighted(sign * lo))
    raise PerturbationError(f"slack {eta!r} at degree {degree} is not reachable with positive weights")


# -- Gaussian blocks -------------------------------------------------------------


@dataclass(frozen=True)
class GaussianBlockSpec:
    N: int

    def __post_init__(self):
        if int(self.N) < 2:
            raise ValueError("block size N must be at least 2")


def sample_gaussian_block(spec: GaussianBlockSpec, m: int, seed) -> np.ndarray:
    """``m`` centered blocks ``W - mean(W)``, ``W ~ N(0, I_N)``; each row sums to zero."""
    W = make_rng(seed).standard_normal((m, spec.N))
    return W - W.mean(axis=1, keepdims=True)


def _pairing_sum(labels: list[int], cov: Callable[[int, int], float]) -> float:
    if not labels:
        return 1.0
    first, rest = labels[0], labels[1:]
    total = 0.0
    for i, other in enumerate(rest):
        total += cov(first, other) * _pairing_sum(rest[:i] + rest[i + 1 :], cov)
    return total


def gaussian_block_moment(N: int, beta) -> float:
    """Exact ``E[Z^beta]`` for the centered block, by summing over Wick pairings."""
    beta = tuple(int(b) for b in beta)
    if N < 2:
        raise ValueError("block size N must be at least 2")
    if len(beta) > N:
        raise DimensionError(f"multi-index of length {len(beta)} for a block of size {N}")
    total = sum(beta)
    if total > BLOCK_MOMENT_CAP:
        raise SizeError(f"|beta| = {total} exceeds the cap {BLOCK_MOMENT_CAP}")
    if total % 2:
        return 0.0
    labels = [j for j, b in enumerate(beta) for _ in range(b)]
    var, cov = 1.0 - 1.0 / N, -1.0 / N
    return _pairing_sum(labels, lambda a, b: var if a == b else cov)


# -- univariate densities ----------------------------------------------------------


def w_gamma_constant(gamma: float) -> float:
    return gamma / (2.0 * gamma_fn(1.0 / gamma))


def w_gamma_density(gamma: float, x):
    """``C_gamma exp(-|x|^gamma)`` with ``C_gamma = gamma / (2 Gamma(1/gamma))``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    val = w_gamma_constant(gamma) * np.exp(-np.abs(np.asarray(x, dtype=float)) ** gamma)
    return float(val) if np.ndim(val) == 0 else val


def real_roots(coefs_low_to_high, lo: float, hi: float, cells: int = ROOT_GRID_CELLS) -> np.ndarray:
    """Sign-change roots of a univariate polynomial on ``[lo, hi]``.

    Brackets come from a uniform grid of ``cells`` cells; each is refined by
    Brent's method to ``ROOT_XTOL``.  Grid points where the value is exactly
    zero count as roots.  Roots of even multiplicity have no sign change and
    are not reported.
    """
    c = np.asarray(coefs_low_to_high, dtype=float)
    f = np.polynomial.Polynomial(c)
    xs = np.linspace(lo, hi, cells + 1)
    v = f(xs)
    roots = list(xs[v == 0.0])
    sgn = np.sign(v)
    idx = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
    for i in idx:
        a, b = xs[i], xs[i + 1]
        try:
            r, info = brentq(f, a, b, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps, full_output=True)
        except (RuntimeError, ValueError) as exc:
            raise NumericalError(f"root refinement failed on bracket [{a!r}, {b!r}]: {exc}") from exc
        if not info.converged:
            raise NumericalError(f"root refinement did not converge on bracket [{a!r}, {b!r}]")
        roots.append(r)
    return np.array(sorted(roots))


def _univariate(p: Polynomial) -> np.ndarray:
    if p.n != 1:
        raise DimensionError("push-forwards are defined for univariate polynomials only")
    c = p.univariate_coefficients()
    if len(c) < 2 or not np.any(c[1:] != 0):
        raise ValueError("push-forward needs a non-constant polynomial")
    return c


def pushforward_density_1d(p: Polynomial, y: float, R: float = ROOT_RANGE, cells: int = ROOT_GRID_CELLS) -> float:
    """Density of ``p(X)`` at ``y`` under the weight ``exp(-x^2)/sqrt(pi)``.

    Sums ``exp(-x^2) / |p'(x)|`` over the preimages ``x`` of ``y`` in
    ``[-R, R]``.  Returns ``math.inf`` when some preimage is a critical point
    (``|p'(x)| < 1e-10``), and 0 when ``y`` has no preimage in range.
    """
    c = _univariate(p).copy()
    dc = np.polynomial.polynomial.polyder(c)
    c[0] -= float(y)
    total = 0.0
    for x in real_roots(c, -R, R, cells):
        d = abs(np.polynomial.polynomial.polyval(x, dc))
        if d < CRITICAL_DERIV:
            return math.inf
        total += math.exp(-x * x) / d
    return total / math.sqrt(math.pi)


@dataclass(frozen=True, eq=False)
class UnivariateWeight:
    """A density on the line.

    ``kind`` is ``"w_gamma"`` (params ``gamma``, ``scale``), ``"pushforward"``
    (param ``p``, a univariate :class:`Polynomial`) or ``"grid"`` (params
    ``points``, ``densities``, linearly interpolated, 0 outside).
    """

    kind: str
    params: dict

    def __post_init__(self):
        if self.kind == "w_gamma":
            if not self.params.get("gamma", 0) > 0:
                raise ValueError("w_gamma needs gamma > 0")
        elif self.kind == "pushforward":
            _univariate(self.params["p"])
        elif self.kind == "grid":
            pts = np.asarray(self.params["points"], dtype=float)
            dens = np.asarray(self.params["densities"], dtype=float)
            if pts.shape != dens.shape or np.any(np.diff(pts) <= 0) or np.any(dens < 0):
                raise ValueError("grid weights need increasing points and non-negative densities")
        else:
            raise ValueError(f"unknown weight kind {self.kind!r}")

    @classmethod
    def w_gamma(cls, gamma: float, scale: float = 1.0) -> UnivariateWeight:
        return cls("w_gamma", {"gamma": float(gamma), "scale": float(scale)})

    @classmethod
    def pushforward(cls, p: Polynomial) -> UnivariateWeight:
        return cls("pushforward", {"p": p})

    @classmethod
    def grid(cls, points, densities) -> UnivariateWeight:
        return cls("grid", {"points": points, "densities": densities})

    def density(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind == "w_gamma":
            return self.params.get("scale", 1.0) * w_gamma_density(self.params["gamma"], x)
        if self.kind == "pushforward":
            p = self.params["p"]
            return np.array([pushforward_density_1d(p, v) for v in x])
        return np.interp(x, self.params["points"], self.params["densities"], left=0.0, right=0.0)


def certificate_grid(a: float, b: float, resolution: int, log_spaced: bool = False) -> np.ndarray:
    """Evaluation points for :func:`lsl_certificate`.

    With ``log_spaced`` the part of ``[a, b]`` below ``-1`` is covered by
    geometrically spaced points (dense near ``-1``, sparse in the far tail)
    and the rest uniformly.
    """
    if log_spaced and a < -1.0:
        tail = -np.geomspace(-a, 1.0, resolution)
        head = np.linspace(-1.0, b, max(resolution // 4, 2)) if b > -1.0 else np.array([])
        return np.unique(np.concatenate([tail[tail <= b], head]))
    return np.linspace(a, b, resolution)


def lsl_certificate(
    w: UnivariateWeight,
    gamma: float,
    range_: tuple[float, float],
    grid: int = 1000,
    floor: float = 1e-12,
    log_spaced: bool = False,
    one_sided: bool = False,
) -> tuple[float, bool]:
    """Grid certificate for ``w(x) >= C w_gamma(x)`` on ``range_``.

    Returns ``(C, holds)`` with ``C`` the grid minimum of ``w / w_gamma`` and
    ``holds`` true iff ``C > floor`` and every density value is finite.  In
    one-sided mode the range must sit inside ``(-inf, 1]``.
    """
    a, b = map(float, range_)
    if not a < b:
        raise ValueError("range must satisfy a < b")
    if grid < 100:
        raise ValueError("grid resolution must be at least 100")
    if one_sided and b > 1.0:
        raise ValueError("one-sided certificates live on (-inf, 1]")
    xs = certificate_grid(a, b, grid, log_spaced)
    dens = w.density(xs)
    ratio = dens / w_gamma_density(gamma, xs)
    finite = bool(np.all(np.isfinite(dens)))
    C = float(np.min(ratio))
    return C, bool(finite and C > floor)
