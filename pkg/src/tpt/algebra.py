"""Sparse multivariate polynomials over the reals.

Multi-indices are plain tuples of non-negative ints.  A :class:`Polynomial`
stores its terms sparsely: each key is a tuple of ``(variable, exponent)``
pairs with positive exponents, sorted by variable.  This keeps polynomials in
a few hundred variables (the Gaussian-block lift) cheap, while the public
``terms`` view still hands out dense multi-indices.

Terms are always ordered graded-lexicographically (total degree first, then
lexicographically with larger leading exponents first), so serialized output
is byte-stable.
"""

from __future__ import annotations

import json
import math
import sys
from collections.abc import Iterable, Iterator, Mapping
from functools import cached_property

import numpy as np

from tpt.errors import DimensionError, NormalizationError, SizeError

MultiIndex = tuple[int, ...]
SparseKey = tuple[tuple[int, int], ...]

#: coefficients below this magnitude are dropped after arithmetic
PRUNE_TOL = 1e-14


def total_degree(alpha: Iterable[int]) -> int:
    return sum(alpha)


def grlex_key(alpha: MultiIndex):
    """Sort key for graded lexicographic order on dense multi-indices."""
    return (sum(alpha), tuple(-a for a in alpha))


def _sparse_grlex_key(key: SparseKey):
    return (sum(e for _, e in key), tuple((v, -e) for v, e in key))


def to_sparse(alpha: Iterable[int]) -> SparseKey:
    return tuple((i, int(a)) for i, a in enumerate(alpha) if a)


def to_dense(key: SparseKey, n: int) -> MultiIndex:
    out = [0] * n
    for v, e in key:
        out[v] = e
    return tuple(out)


def _compositions(total: int, parts: int) -> Iterator[MultiIndex]:
    """All length-``parts`` tuples summing to ``total``, lex-descending."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_multi_indices(n: int, k: int) -> list[MultiIndex]:
    """Every alpha in N^n with |alpha| <= k, in graded lexicographic order.

    The list has exactly ``comb(n + k, k)`` entries.
    """
    if n < 1 or k < 0:
        raise ValueError(f"need n >= 1 and k >= 0, got n={n}, k={k}")
    count = math.comb(n + k, k)
    if count > sys.maxsize:
        raise SizeError(f"C({n}+{k},{k}) = {count} exceeds the platform integer")
    out: list[MultiIndex] = []
    for t in range(k + 1):
        out.extend(_compositions(t, n))
    return out


class Polynomial:
    """Immutable sparse polynomial in ``n`` real variables.

    Construct from a mapping of dense multi-indices to coefficients::

        >>> p = Polynomial(2, {(1, 1): 1.0})   # x1 * x2
        >>> p([2.0, 3.0])
        6.0

    Exact zero coefficients are never stored.  The zero polynomial has
    degree 0 by convention.
    """

    def __init__(self, n: int, terms: Mapping[MultiIndex, float] | None = None):
        if n < 1:
            raise DimensionError(f"dimension must be >= 1, got {n}")
        sparse: dict[SparseKey, float] = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != n:
                raise DimensionError(f"multi-index {alpha} has length {len(alpha)}, expected {n}")
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            key = to_sparse(alpha)
            sparse[key] = sparse.get(key, 0.0) + float(c)
        self.n = n
        self._terms = _ordered({k: c for k, c in sparse.items() if c != 0.0})

    @classmethod
    def _from_sparse(cls, n: int, sparse: Mapping[SparseKey, float], prune: bool = True) -> Polynomial:
        obj = cls.__new__(cls)
        obj.n = n
        tol = PRUNE_TOL if prune else 0.0
        obj._terms = _ordered({k: float(c) for k, c in sparse.items() if abs(c) >= tol and c != 0.0})
        return obj

    @classmethod
    def constant(cls, n: int, c: float) -> Polynomial:
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, n: int, i: int) -> Polynomial:
        alpha = [0] * n
        alpha[i] = 1
        return cls(n, {tuple(alpha): 1.0})

    @classmethod
    def from_coefficients(cls, n: int, degree: int, coefs) -> Polynomial:
        """Pair ``coefs`` with ``enumerate_multi_indices(n, degree)`` in order."""
        indices = enumerate_multi_indices(n, degree)
        coefs = list(coefs)
        if len(coefs) != len(indices):
            raise DimensionError(f"expected {len(indices)} coefficients, got {len(coefs)}")
        return cls(n, dict(zip(indices, coefs)))

    @classmethod
    def univariate(cls, coefs_low_to_high) -> Polynomial:
        return cls(1, {(i,): c for i, c in enumerate(coefs_low_to_high)})

    # -- views -----------------------------------------------------------

    @property
    def terms(self) -> dict[MultiIndex, float]:
        return {to_dense(k, self.n): c for k, c in self._terms.items()}

    def sparse_terms(self) -> dict[SparseKey, float]:
        return dict(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @cached_property
    def degree(self) -> int:
        return max((sum(e for _, e in k) for k in self._terms), default=0)

    def max_exponent(self) -> int:
        return max((e for k in self._terms for _, e in k), default=0)

    def is_multilinear(self) -> bool:
        return self.max_exponent() <= 1

    def coefficient(self, alpha: MultiIndex) -> float:
        return self._terms.get(to_sparse(alpha), 0.0)

    def univariate_coefficients(self) -> np.ndarray:
        """Coefficients lowest degree first; only for ``n == 1``."""
        if self.n != 1:
            raise DimensionError("univariate_coefficients needs n == 1")
        out = np.zeros(self.degree + 1)
        for k, c in self._terms.items():
            out[k[0][1] if k else 0] = c
        return out

    # -- evaluation ------------------------------------------------------

    def __call__(self, x) -> float:
        return poly_eval(self, x)

    @cached_property
    def _compiled(self):
        width = max((len(k) for k in self._terms), default=0)
        width = max(width, 1)
        t = len(self._terms)
        var = np.zeros((t, width), dtype=np.intp)
        exp = np.zeros((t, width), dtype=np.int64)
        coef = np.empty(t)
        for row, (k, c) in enumerate(self._terms.items()):
            coef[row] = c
            for col, (v, e) in enumerate(k):
                var[row, col] = v
                exp[row, col] = e
        return var, exp, coef

    def evaluate(self, points, chunk_elems: int = 4_000_000) -> np.ndarray:
        """Vectorized evaluation at the rows of ``points`` (shape m x n)."""
        X = np.asarray(points, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n:
            raise DimensionError(f"points have {X.shape[1]} columns, polynomial has {self.n} variables")
        m = X.shape[0]
        out = np.zeros(m)
        if not self._terms:
            return out
        var, exp, coef = self._compiled
        t, width = var.shape
        # table[e, v] = X[:, v] ** e, so each term is a gather plus a product
        top = int(exp.max())
        table = np.empty((top + 1, self.n, m))
        table[0] = 1.0
        for e in range(1, top + 1):
            table[e] = table[e - 1] * X.T
        tc = max(1, chunk_elems // max(1, m * width))
        for lo in range(0, t, tc):
            hi = min(t, lo + tc)
            vals = table[exp[lo:hi], var[lo:hi]]  # tc x width x m
            out += coef[lo:hi] @ np.prod(vals, axis=1)
        return out

    # -- arithmetic ------------------------------------------------------

    def _check_same(self, other: Polynomial) -> None:
        if other.n != self.n:
            raise DimensionError(f"dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.n, other)
        self._check_same(other)
        acc = dict(self._terms)
        for k, c in other._terms.items():
            acc[k] = acc.get(k, 0.0) + c
        return Polynomial._from_sparse(self.n, acc)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._from_sparse(self.n, {k: -c for k, c in self._terms.items()}, prune=False)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Polynomial._from_sparse(self.n, {k: c * other for k, c in self._terms.items()})
        self._check_same(other)
        acc: dict[SparseKey, float] = {}
        for k1, c1 in self._terms.items():
            for k2, c2 in other._terms.items():
                key = _merge(k1, k2)
                acc[key] = acc.get(key, 0.0) + c1 * c2
        return Polynomial._from_sparse(self.n, acc)

    __rmul__ = __mul__

    def __truediv__(self, other: float):
        return self * (1.0 / other)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self):
        return hash((self.n, tuple(self._terms.items())))

    def __repr__(self):
        if not self._terms:
            return f"Polynomial(n={self.n}, 0)"
        parts = []
        for k, c in self._terms.items():
            mono = "*".join(f"x{v + 1}" + (f"^{e}" if e > 1 else "") for v, e in k)
            parts.append(f"{c:g}" + (f"*{mono}" if mono else ""))
        return f"Polynomial(n={self.n}, " + " + ".join(parts) + ")"

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "terms": [{"alpha": list(to_dense(k, self.n)), "c": c} for k, c in self._terms.items()],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> Polynomial:
        n = int(data["n"])
        terms: dict[MultiIndex, float] = {}
        for term in data["terms"]:
            alpha = tuple(int(a) for a in term["alpha"])
            terms[alpha] = terms.get(alpha, 0.0) + float(term["c"])
        return cls(n, terms)

    def to_json(self) -> str:
        from tpt.serialize import dumps

        return dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> Polynomial:
        return cls.from_dict(json.loads(text))


def _ordered(terms: dict[SparseKey, float]) -> dict[SparseKey, float]:
    return {k: terms[k] for k in sorted(terms, key=_sparse_grlex_key)}


def _merge(k1: SparseKey, k2: SparseKey) -> SparseKey:
    if not k1:
        return k2
    if not k2:
        return k1
    acc = dict(k1)
    for v, e in k2:
        acc[v] = acc.get(v, 0) + e
    return tuple(sorted(acc.items()))


def poly_eval(p: Polynomial, x) -> float:
    """Evaluate ``p`` at a single point, summing the terms with ``math.fsum``."""
    x = [float(v) for v in np.asarray(x, dtype=float).ravel()]
    if len(x) != p.n:
        raise DimensionError(f"point has length {len(x)}, polynomial has {p.n} variables")
    vals = []
    for k, c in p._terms.items():
        term = c
        for v, e in k:
            term *= x[v] ** e
        vals.append(term)
    return math.fsum(vals)


def poly_normalize(p: Polynomial) -> Polynomial:
    """Rescale so the squared coefficients sum to one."""
    _, l2 = poly_coeff_norms(p)
    if l2 == 0.0:
        raise NormalizationError("cannot normalize the zero polynomial")
    return Polynomial._from_sparse(p.n, {k: c / l2 for k, c in p._terms.items()}, prune=False)


def poly_coeff_norms(p: Polynomial) -> tuple[float, float]:
    """Return the l1 and l2 norms of the coefficient vector."""
    cs = list(p._terms.values())
    return math.fsum(abs(c) for c in cs), math.sqrt(math.fsum(c * c for c in cs))


def _linear_power(row: Mapping[int, float], e: int) -> dict[SparseKey, float]:
    """Multinomial expansion of ``(sum_j row[j] * y_j) ** e``."""
    if e == 0:
        return {(): 1.0}
    cols = sorted(row)
    if not cols:
        return {}
    out: dict[SparseKey, float] = {}
    fact_e = math.factorial(e)

    def rec(pos: int, left: int, key: tuple, coef: float, denom: int) -> None:
        j = cols[pos]
        if pos == len(cols) - 1:
            full = key + (((j, left),) if left else ())
            out[full] = coef * row[j] ** left * (fact_e // (denom * math.factorial(left)))
            return
        for b in range(left, -1, -1):
            rec(pos + 1, left - b, key + (((j, b),) if b else ()), coef * row[j] ** b, denom * math.factorial(b))

    rec(0, e, (), 1.0, 1)
    return out


def poly_compose_linear(p: Polynomial, A) -> Polynomial:
    """Return ``q`` with ``q(y) = p(A @ y)``.

    ``A`` has one row per variable of ``p``.  Each power of a linear form is
    expanded with the multinomial theorem; the per-variable expansions are
    then multiplied together.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != p.n:
        raise DimensionError(f"A must have {p.n} rows, got shape {A.shape}")
    n_out = A.shape[1]
    rows = [{j: float(A[i, j]) for j in range(n_out) if A[i, j] != 0.0} for i in range(p.n)]
    cache: dict[tuple[int, int], dict[SparseKey, float]] = {}

    def power(i: int, e: int) -> dict[SparseKey, float]:
        if (i, e) not in cache:
            cache[(i, e)] = _linear_power(rows[i], e)
        return cache[(i, e)]

    acc: dict[SparseKey, float] = {}
    for key, c in p._terms.items():
        partial: dict[SparseKey, float] = {(): c}
        for v, e in key:
            expansion = power(v, e)
            nxt: dict[SparseKey, float] = {}
            for k1, c1 in partial.items():
                for k2, c2 in expansion.items():
                    k = _merge(k1, k2)
                    nxt[k] = nxt.get(k, 0.0) + c1 * c2
            partial = nxt
        for k, c1 in partial.items():
            acc[k] = acc.get(k, 0.0) + c1
    return Polynomial._from_sparse(n_out, acc)


def poly_multilinearize(q: Polynomial) -> Polynomial:
    """Rewrite ``q`` as a multilinear polynomial.

    Terms whose largest exponent is three or more are dropped.  Terms whose
    largest exponent is two keep their coefficient on the monomial made of
    the variables that appear with exponent exactly one; squared variables
    are replaced by the constant 1.  Multilinear terms pass through, and
    coefficients landing on the same monomial are summed.
    """
    acc: dict[SparseKey, float] = {}
    for key, c in q._terms.items():
        top = max((e for _, e in key), default=0)
        if top >= 3:
            continue
        new = tuple((v, 1) for v, e in key if e == 1)
        acc[new] = acc.get(new, 0.0) + c
    return Polynomial._from_sparse(q.n, acc)
