"""Gaussian moments, empirical moment tables and the moment-matching tester.

The tester T_AMM(k, eta) accepts a sample set iff every empirical moment of
total degree at most ``k`` lies within ``eta`` of the matching moment of the
standard Gaussian.  It only ever looks at points; labels are not an input.

Sample-size and parameter formulas carry explicit constants (``c``, ``c1``,
``c2``, all 1 by default) and are evaluated exactly, overflowing into
logarithms rather than crashing when theory-scale values are requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from tpt.algebra import MultiIndex, enumerate_multi_indices
from tpt.errors import DimensionError, SizeError

#: support size x moment count above which exact moment scans refuse to run
MOMENT_COST_CAP = 10**8
#: rows per chunk for the compensated moment sums
_CHUNK = 1 << 16
OVERFLOW_LIMIT = 2**63


def double_factorial(a: int) -> int:
    return math.prod(range(a, 0, -2)) if a > 0 else 1


def gaussian_moment(alpha: MultiIndex) -> float:
    """``E[X^alpha]`` for ``X ~ N(0, I_n)``: zero if any entry is odd, else a product of ``(a-1)!!``."""
    out = 1
    for a in alpha:
        if a < 0:
            raise ValueError(f"negative exponent in {tuple(alpha)}")
        if a % 2:
            return 0.0
        out *= double_factorial(a - 1)
    return float(out)


@dataclass(frozen=True)
class MomentTable:
    n: int
    k: int
    entries: dict  # MultiIndex -> float, graded-lex order

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, alpha):
        return self.entries[tuple(alpha)]

    def values(self) -> np.ndarray:
        return np.fromiter(self.entries.values(), dtype=float, count=len(self.entries))


@dataclass(frozen=True)
class TesterVerdict:
    accepted: bool
    worst_index: MultiIndex
    worst_deviation: float
    k: int
    eta: float
    m: int = 0

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "worst_alpha": list(self.worst_index),
            "worst_dev": self.worst_deviation,
            "k": self.k,
            "eta": self.eta,
            "m": self.m,
        }


def _as_points(samples) -> np.ndarray:
    pts = np.asarray(samples, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise DimensionError(f"samples must be an (m, n) array, got shape {pts.shape}")
    if pts.shape[0] == 0:
        raise ValueError("empty sample set")
    return pts


def _weighted_mean(values: np.ndarray, weights: np.ndarray | None) -> float:
    """Fixed-order compensated mean: pairwise sums per chunk, fsum across chunks."""
    if weights is not None:
        values = values * weights
    parts = [float(np.sum(values[i : i + _CHUNK])) for i in range(0, len(values), _CHUNK)]
    total = math.fsum(parts)
    return total if weights is not None else total / len(values)


def _moment_entries(pts: np.ndarray, k: int, weights: np.ndarray | None = None) -> dict:
    m, n = pts.shape
    indices = enumerate_multi_indices(n, k)
    powers = [[np.ones(m)] for _ in range(n)]
    for i in range(n):
        for _ in range(k):
            powers[i].append(powers[i][-1] * pts[:, i])
    out = {}
    for alpha in indices:
        mono = np.ones(m)
        for i, a in enumerate(alpha):
            if a:
                mono = mono * powers[i][a]
        out[alpha] = _weighted_mean(mono, weights)
    return out


def empirical_moments(samples, k: int) -> MomentTable:
    """Sample means of ``x^alpha`` for every ``|alpha| <= k``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    pts = _as_points(samples)
    return MomentTable(pts.shape[1], k, _moment_entries(pts, k))


def distribution_moments(points, weights, k: int) -> MomentTable:
    """Exact moments of the finite distribution ``sum_j weights[j] * delta(points[j])``."""
    pts = _as_points(points)
    w = np.asarray(weights, dtype=float)
    if w.shape != (pts.shape[0],):
        raise DimensionError("one weight per support point is required")
    return MomentTable(pts.shape[1], k, _moment_entries(pts, k, w))


def _worst(table: MomentTable) -> tuple[float, MultiIndex]:
    alphas = list(table.entries)
    dev = np.abs(table.values() - np.array([gaussian_moment(a) for a in alphas]))
    # argmax keeps the first maximum, i.e. the earliest index in graded-lex order
    j = int(np.argmax(dev))
    return float(dev[j]), alphas[j]


def tamm_accept(samples, k: int, eta: float) -> TesterVerdict:
    """Run T_AMM(k, eta) on an ``(m, n)`` array of points.

    A deviation exactly equal to ``eta`` is accepted.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    pts = _as_points(samples)
    dev, alpha = _worst(empirical_moments(pts, k))
    return TesterVerdict(dev <= eta, alpha, dev, k, float(eta), pts.shape[0])


def moment_slack(D, k: int, cap: int = MOMENT_COST_CAP) -> tuple[float, MultiIndex]:
    """Largest ``|E_D[x^alpha] - E_N[x^alpha]|`` over ``|alpha| <= k``, computed exactly over the support.

    ``D`` is anything with ``points`` and ``weights`` arrays, normally a
    :class:`tpt.distributions.DiscreteDistribution`.
    """
    pts = _as_points(D.points)
    count = math.comb(pts.shape[1] + k, k)
    if pts.shape[0] * count > cap:
        raise SizeError(f"moment scan of {pts.shape[0]} points x {count} indices exceeds cap {cap}")
    table = MomentTable(pts.shape[1], k, _moment_entries(pts, k, np.asarray(D.weights, dtype=float)))
    return _worst(table)


# -- sample size and parameter reporting --------------------------------------


def _exact(x) -> Fraction:
    """Decimal-faithful rational: ``0.1`` becomes exactly ``1/10``."""
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return Fraction(repr(float(x)))


def _ceil_fraction(q: Fraction) -> int:
    return -((-q.numerator) // q.denominator)


@dataclass(frozen=True)
class SampleSize:
    m: int  # saturated at 2**63 when overflowing
    log10_m: float
    overflow: bool

    def to_dict(self) -> dict:
        return {"m": self.m, "log10_m": self.log10_m, "overflow": self.overflow}


def _saturate(log10_value: float, exact: int | None) -> SampleSize:
    if exact is not None and exact <= OVERFLOW_LIMIT:
        return SampleSize(exact, math.log10(exact) if exact > 0 else -math.inf, False)
    return SampleSize(OVERFLOW_LIMIT, log10_value, True)


def required_samples(n: int, k: int, eta: float, c: float = 1.0) -> SampleSize:
    """``ceil(c * (2kn)^k / eta^2)``, saturating at ``2**63`` with an overflow flag."""
    if n < 1 or k < 1 or not eta > 0 or not c > 0:
        raise ValueError("n, k, eta and c must all be positive")
    log10_m = math.log10(c) + k * math.log10(2 * k * n) - 2 * math.log10(eta)
    if log10_m > 30:
        return _saturate(log10_m, None)
    q = _exact(c) * Fraction(2 * k * n) ** k / _exact(eta) ** 2
    return _saturate(log10_m, _ceil_fraction(q))


def _required_samples_log(n: int, log10_k: float, log10_eta: float, c: float) -> float:
    k = 10.0**log10_k
    return math.log10(c) + k * (math.log10(2 * n) + log10_k) - 2 * log10_eta


@dataclass(frozen=True)
class TheoryParameters:
    d: int
    epsilon: float
    n: int
    k: int  # saturated at 2**63 when overflowing
    log10_k: float
    k_overflow: bool
    eta: float  # 0.0 once it underflows a double; see log10_eta
    log10_eta: float
    eta_underflow: bool
    samples: SampleSize
    constants: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "epsilon": self.epsilon,
            "n": self.n,
            "k": self.k,
            "log10_k": self.log10_k,
            "k_overflow": self.k_overflow,
            "eta": self.eta,
            "log10_eta": self.log10_eta,
            "eta_underflow": self.eta_underflow,
            "m": self.samples.m,
            "log10_m": self.samples.log10_m,
            "m_overflow": self.samples.overflow,
            "constants": dict(self.constants),
        }


def theory_parameters(d: int, epsilon: float, n: int = 1, c1: float = 1.0, c2: float = 1.0, c: float = 1.0) -> TheoryParameters:
    """Report the theory-scale ``k``, ``eta`` and ``m`` for degree-``d`` PTFs at accuracy ``epsilon``.

    ``k = ceil(c1 * epsilon^(-4d 7^d))`` and ``eta = (n k)^(-c2 k)``.  This is a
    reporter: values too large for machine integers come back as logs with
    overflow flags, and nothing here is ever meant to be executed.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")
    expo = 4 * d * 7**d
    log10_k = math.log10(c1) - expo * math.log10(epsilon)
    if log10_k <= 19:
        k_exact = _ceil_fraction(_exact(c1) * (1 / _exact(epsilon)) ** expo)
        k_over = k_exact > OVERFLOW_LIMIT
        k = min(k_exact, OVERFLOW_LIMIT)
        log10_k = math.log10(k_exact)
    else:
        k_over, k = True, OVERFLOW_LIMIT

    k_val = float(k) if not k_over else 10.0**log10_k
    log10_eta = -c2 * k_val * (math.log10(n) + log10_k)
    eta = 10.0**log10_eta if log10_eta > -300 else 0.0
    if not k_over and log10_eta > -300:
        samples = required_samples(n, k, eta, c)
    else:
        samples = SampleSize(OVERFLOW_LIMIT, _required_samples_log(n, log10_k, log10_eta, c), True)
    return TheoryParameters(
        d, float(epsilon), n, k, log10_k, k_over, eta, log10_eta, eta == 0.0, samples,
        {"c": c, "c1": c1, "c2": c2},
    )
