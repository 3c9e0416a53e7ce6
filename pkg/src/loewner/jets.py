"""Truncated polynomial jet algebra for holomorphic maps of C^q fixing the origin.

A jet stores the Taylor coefficients of a map C^q -> C^q through a fixed total
degree.  Multi-indices of each degree are enumerated in graded lexicographic
order (exponent tuples in lexicographically descending order within the
degree), and coefficients live in dense complex blocks so that composition,
the hot loop of the normal-form machinery, reduces to tabulated truncated
multiplications plus one matrix product.

Conventions
-----------
* components are 0-based in Python; the JSON wire format uses 1-based
  component labels,
* every represented map fixes the origin: there is no constant term,
* arithmetic on jets of different truncation order operates at the smaller
  order.  Coefficients beyond a jet's order are unknown, never assumed zero;
  a map that is exactly polynomial can be lifted to a higher order with
  :meth:`PolyJet.extended`, which declares the missing coefficients to be
  genuine zeros.

All values are immutable after construction (coefficient arrays are marked
read-only), so they can be shared freely between caches and threads.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

MultiIndex = tuple[int, ...]

# Above this many stored multi-indices a full dense power table for
# composition would be too large; fall back to computing only the powers
# that are actually referenced.
_DENSE_POWER_LIMIT = 2000


def index_count(q: int, degree: int) -> int:
    """Number of exponent tuples of length q with total degree `degree`."""
    return math.comb(degree + q - 1, q - 1)


@lru_cache(maxsize=None)
def _indices_of_degree(q: int, degree: int) -> tuple[MultiIndex, ...]:
    if q == 1:
        return ((degree,),)
    out = []
    for lead in range(degree, -1, -1):
        for rest in _indices_of_degree(q - 1, degree - lead):
            out.append((lead,) + rest)
    return tuple(out)


def enumerate_indices(q: int, degree: int) -> list[MultiIndex]:
    """All exponent tuples of the given total degree, graded-lex ordered.

    Within a fixed degree the order is plain lexicographic descent on the
    tuple, e.g. for q = 2, degree 2: (2,0), (1,1), (0,2).
    """
    if q < 1:
        raise ValueError(f"dimension must be >= 1, got {q}")
    if degree < 0:
        raise ValueError(f"degree must be >= 0, got {degree}")
    return list(_indices_of_degree(q, degree))


class _Tables:
    """Index bookkeeping shared by every jet of a given (q, order)."""

    __slots__ = ("q", "order", "indices", "rank", "offsets", "degrees",
                 "parent_rank", "parent_var", "count")

    def __init__(self, q: int, order: int):
        self.q = q
        self.order = order
        indices: list[MultiIndex] = []
        offsets = [0]
        for d in range(order + 1):
            indices.extend(_indices_of_degree(q, d))
            offsets.append(len(indices))
        self.indices = tuple(indices)
        self.count = len(indices)
        self.offsets = tuple(offsets)
        self.rank = {I: r for r, I in enumerate(indices)}
        self.degrees = np.array([sum(I) for I in indices], dtype=np.int64)
        # parent of I is I - e_k for the first k with I_k > 0: used to build
        # monomial values/powers incrementally.
        parent_rank = np.zeros(self.count, dtype=np.int64)
        parent_var = np.zeros(self.count, dtype=np.int64)
        for r, I in enumerate(indices):
            if sum(I) == 0:
                continue
            k = next(m for m, e in enumerate(I) if e > 0)
            J = list(I)
            J[k] -= 1
            parent_rank[r] = self.rank[tuple(J)]
            parent_var[r] = k
        self.parent_rank = parent_rank
        self.parent_var = parent_var


@lru_cache(maxsize=None)
def _tables(q: int, order: int) -> _Tables:
    if q < 1 or order < 1:
        raise ValueError(f"need q >= 1 and order >= 1, got q={q}, order={order}")
    return _Tables(q, order)


@lru_cache(maxsize=None)
def _mul_table(q: int, order: int):
    """Triples (ri, rj, rk) with indices[ri] + indices[rj] = indices[rk]."""
    t = _tables(q, order)
    ri: list[int] = []
    rj: list[int] = []
    rk: list[int] = []
    for da in range(order + 1):
        for a in range(t.offsets[da], t.offsets[da + 1]):
            I = t.indices[a]
            for db in range(order + 1 - da):
                for b in range(t.offsets[db], t.offsets[db + 1]):
                    J = t.indices[b]
                    ri.append(a)
                    rj.append(b)
                    rk.append(t.rank[tuple(x + y for x, y in zip(I, J))])
    return (np.asarray(ri, dtype=np.int64),
            np.asarray(rj, dtype=np.int64),
            np.asarray(rk, dtype=np.int64))


@lru_cache(maxsize=None)
def _mul_plan(q: int, order: int, lval_a: int, lval_b: int):
    """Filtered triples and a sparse scatter for factor valuations >= lval.

    A factor with valuation v has zero coefficients below degree v, so every
    triple touching those rows contributes nothing; dropping them up front is
    what keeps high-degree power updates cheap.
    """
    from scipy.sparse import csr_matrix

    t = _tables(q, order)
    ri, rj, rk = _mul_table(q, order)
    keep = (t.degrees[ri] >= lval_a) & (t.degrees[rj] >= lval_b)
    ri, rj, rk = ri[keep], rj[keep], rk[keep]
    m = ri.size
    scatter = csr_matrix(
        (np.ones(m), (rk, np.arange(m))), shape=(t.count, m), dtype=float)
    return ri, rj, scatter


def _vec_mul(a: np.ndarray, b: np.ndarray, q: int, order: int,
             lval_a: int = 0, lval_b: int = 0) -> np.ndarray:
    """Truncated product of two dense scalar coefficient vectors.

    lval_a / lval_b declare known valuations (all coefficients below that
    degree are zero), which prunes the multiplication table.
    """
    ri, rj, scatter = _mul_plan(q, order, lval_a, lval_b)
    return scatter.dot(a[ri] * b[rj])


def _monomial_values(t: _Tables, points: np.ndarray) -> np.ndarray:
    """Values of every monomial z^I at the given points, shape (count, m)."""
    m = points.shape[1]
    vals = np.empty((t.count, m), dtype=complex)
    vals[0] = 1.0
    for r in range(1, t.count):
        vals[r] = vals[t.parent_rank[r]] * points[t.parent_var[r]]
    return vals


@dataclass(frozen=True, eq=False)
class PolyJet:
    """Taylor coefficients of a map C^q -> C^q fixing 0, through `order`.

    coeffs has shape (q, count) where count runs over all multi-indices with
    |I| <= order in degree-major graded-lex order; the constant column is
    identically zero.
    """

    q: int
    order: int
    coeffs: np.ndarray

    def __post_init__(self):
        t = _tables(self.q, self.order)
        c = np.ascontiguousarray(np.asarray(self.coeffs, dtype=complex))
        if c.shape != (self.q, t.count):
            raise ValueError(
                f"coefficient block must have shape ({self.q}, {t.count}), got {c.shape}")
        if c[:, 0].any():
            raise ValueError("jets fix the origin: constant coefficients must vanish")
        if not np.isfinite(c).all():
            raise ValueError("jet coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # ------------------------------------------------------------------ #
    # constructors

    @staticmethod
    def zero(q: int, order: int) -> "PolyJet":
        return PolyJet(q, order, np.zeros((q, _tables(q, order).count), dtype=complex))

    @staticmethod
    def identity(q: int, order: int) -> "PolyJet":
        return PolyJet.from_linear(np.eye(q), order)

    @staticmethod
    def from_linear(matrix: np.ndarray, order: int) -> "PolyJet":
        """Jet of the linear map z -> matrix @ z, exact to every order."""
        A = np.asarray(matrix, dtype=complex)
        q = A.shape[0]
        if A.shape != (q, q):
            raise ValueError(f"linear part must be square, got {A.shape}")
        c = np.zeros((q, _tables(q, order).count), dtype=complex)
        c[:, 1:1 + q] = A
        return PolyJet(q, order, c)

    @staticmethod
    def from_terms(q: int, order: int,
                   terms: Mapping[tuple[int, MultiIndex], complex]) -> "PolyJet":
        """Build a jet from a sparse {(component, index): coefficient} map."""
        t = _tables(q, order)
        c = np.zeros((q, t.count), dtype=complex)
        for (j, I), value in terms.items():
            I = tuple(int(e) for e in I)
            if not 0 <= j < q:
                raise ValueError(f"component {j} out of range for q={q}")
            if len(I) != q or any(e < 0 for e in I):
                raise ValueError(f"bad multi-index {I} for q={q}")
            d = sum(I)
            if d < 1 or d > order:
                raise ValueError(f"multi-index degree {d} outside 1..{order}")
            c[j, t.rank[I]] += value
        return PolyJet(q, order, c)

    # ------------------------------------------------------------------ #
    # accessors

    @property
    def tables(self) -> _Tables:
        return _tables(self.q, self.order)

    @property
    def linear_matrix(self) -> np.ndarray:
        return np.array(self.coeffs[:, 1:1 + self.q])

    @property
    def max_coeff(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def coefficient(self, j: int, index: Sequence[int]) -> complex:
        I = tuple(int(e) for e in index)
        d = sum(I)
        if d < 1 or d > self.order:
            raise ValueError(
                f"coefficient of degree {d} not stored at truncation order {self.order}")
        if not 0 <= j < self.q:
            raise ValueError(f"component {j} out of range for q={self.q}")
        return complex(self.coeffs[j, self.tables.rank[I]])

    def nonzero_terms(self) -> list[tuple[int, MultiIndex, complex]]:
        t = self.tables
        out = []
        for j in range(self.q):
            for r in np.nonzero(self.coeffs[j])[0]:
                out.append((j, t.indices[r], complex(self.coeffs[j, r])))
        return out

    def homogeneous_part(self, degree: int) -> "HomogeneousMap":
        """The degree-`degree` homogeneous block, 1 <= degree <= order."""
        if degree < 1 or degree > self.order:
            raise ValueError(
                f"homogeneous part of degree {degree} not available at order {self.order}")
        t = self.tables
        block = np.array(self.coeffs[:, t.offsets[degree]:t.offsets[degree + 1]])
        return HomogeneousMap(self.q, degree, block)

    # ------------------------------------------------------------------ #
    # arithmetic

    def truncated(self, order: int) -> "PolyJet":
        if order >= self.order:
            return self
        n = _tables(self.q, order).count
        return PolyJet(self.q, order, np.array(self.coeffs[:, :n]))

    def extended(self, order: int) -> "PolyJet":
        """Declare this jet an exact polynomial and pad with true zeros."""
        if order <= self.order:
            return self
        t = _tables(self.q, order)
        c = np.zeros((self.q, t.count), dtype=complex)
        c[:, :self.coeffs.shape[1]] = self.coeffs
        return PolyJet(self.q, order, c)

    def _binary(self, other: "PolyJet", sign: int) -> "PolyJet":
        if not isinstance(other, PolyJet):
            return NotImplemented
        if self.q != other.q:
            raise ValueError("dimension mismatch")
        n = min(self.order, other.order)
        k = _tables(self.q, n).count
        return PolyJet(self.q, n, self.coeffs[:, :k] + sign * other.coeffs[:, :k])

    def __add__(self, other):
        return self._binary(other, 1)

    def __sub__(self, other):
        return self._binary(other, -1)

    def __neg__(self):
        return PolyJet(self.q, self.order, -self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, (int, float, complex)):
            return PolyJet(self.q, self.order, self.coeffs * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __eq__(self, other):
        """Jets agree when all coefficients up to the smaller order match exactly."""
        if not isinstance(other, PolyJet):
            return NotImplemented
        if self.q != other.q:
            return False
        k = _tables(self.q, min(self.order, other.order)).count
        return bool(np.array_equal(self.coeffs[:, :k], other.coeffs[:, :k]))

    # ------------------------------------------------------------------ #
    # evaluation

    def evaluate(self, z: Sequence[complex]) -> np.ndarray:
        z = np.asarray(z, dtype=complex).reshape(self.q)
        return self.evaluate_many(z[:, None])[:, 0]

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at points of shape (q, m) by incremental monomial products."""
        pts = np.asarray(points, dtype=complex)
        if pts.ndim != 2 or pts.shape[0] != self.q:
            raise ValueError(f"points must have shape ({self.q}, m)")
        vals = _monomial_values(self.tables, pts)
        return self.coeffs @ vals

    # ------------------------------------------------------------------ #
    # serialization: components are 1-based on the wire

    def to_json_dict(self) -> dict:
        t = self.tables
        terms = []
        for j in range(self.q):
            for r in range(1, t.count):
                c = self.coeffs[j, r]
                if c != 0:
                    terms.append({
                        "component": j + 1,
                        "index": list(t.indices[r]),
                        "re": float(c.real),
                        "im": float(c.imag),
                    })
        return {"q": self.q, "order": self.order, "terms": terms}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @staticmethod
    def from_json_dict(data: Mapping) -> "PolyJet":
        q = int(data["q"])
        order = int(data["order"])
        t = _tables(q, order)
        c = np.zeros((q, t.count), dtype=complex)
        for term in data["terms"]:
            j = int(term["component"]) - 1
            I = tuple(int(e) for e in term["index"])
            if not 0 <= j < q:
                raise ValueError(f"component {j + 1} out of range for q={q}")
            if len(I) != q or any(e < 0 for e in I) or not 1 <= sum(I) <= order:
                raise ValueError(f"bad multi-index {list(I)} for q={q}, order={order}")
            c[j, t.rank[I]] = complex(float(term["re"]), float(term["im"]))
        return PolyJet(q, order, c)

    @staticmethod
    def from_json(text: str) -> "PolyJet":
        return PolyJet.from_json_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class HomogeneousMap:
    """A polynomial map C^q -> C^q all of whose monomials share one degree."""

    q: int
    degree: int
    coeffs: np.ndarray  # shape (q, index_count(q, degree)), graded-lex columns

    def __post_init__(self):
        n = index_count(self.q, self.degree)
        c = np.ascontiguousarray(np.asarray(self.coeffs, dtype=complex))
        if self.degree < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")
        if c.shape != (self.q, n):
            raise ValueError(f"expected shape ({self.q}, {n}), got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @staticmethod
    def zero(q: int, degree: int) -> "HomogeneousMap":
        return HomogeneousMap(q, degree, np.zeros((q, index_count(q, degree)), dtype=complex))

    @staticmethod
    def basis(q: int, degree: int, j: int, index: Sequence[int]) -> "HomogeneousMap":
        """The map with j-th component z^I and all other components zero."""
        I = tuple(int(e) for e in index)
        pos = enumerate_indices(q, degree).index(I)
        c = np.zeros((q, index_count(q, degree)), dtype=complex)
        c[j, pos] = 1.0
        return HomogeneousMap(q, degree, c)

    @staticmethod
    def from_flat(q: int, degree: int, vec: np.ndarray) -> "HomogeneousMap":
        return HomogeneousMap(q, degree, np.asarray(vec, dtype=complex).reshape(q, -1))

    @property
    def flat(self) -> np.ndarray:
        """Component-major flattening, matching the basis order (j, I)."""
        return self.coeffs.reshape(-1)

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coeffs) <= tol))

    def __add__(self, other):
        if not isinstance(other, HomogeneousMap):
            return NotImplemented
        if (self.q, self.degree) != (other.q, other.degree):
            raise ValueError("dimension/degree mismatch")
        return HomogeneousMap(self.q, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other):
        if not isinstance(other, HomogeneousMap):
            return NotImplemented
        return self + (-1.0) * other

    def __mul__(self, scalar):
        if isinstance(scalar, (int, float, complex)):
            return HomogeneousMap(self.q, self.degree, self.coeffs * scalar)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def __eq__(self, other):
        if not isinstance(other, HomogeneousMap):
            return NotImplemented
        return ((self.q, self.degree) == (other.q, other.degree)
                and bool(np.array_equal(self.coeffs, other.coeffs)))

    def to_jet(self, order: int | None = None) -> PolyJet:
        order = self.degree if order is None else order
        if order < self.degree:
            raise ValueError("order must be >= degree")
        t = _tables(self.q, order)
        c = np.zeros((self.q, t.count), dtype=complex)
        c[:, t.offsets[self.degree]:t.offsets[self.degree + 1]] = self.coeffs
        return PolyJet(self.q, order, c)

    def apply_linear(self, matrix: np.ndarray) -> "HomogeneousMap":
        """Left composition with a linear map: z -> matrix @ H(z)."""
        return HomogeneousMap(self.q, self.degree,
                              np.asarray(matrix, dtype=complex) @ self.coeffs)

    def substitute_linear(self, matrix: np.ndarray) -> "HomogeneousMap":
        """Right composition with a linear map: z -> H(matrix @ z)."""
        lin = PolyJet.from_linear(matrix, self.degree)
        return compose(self.to_jet(), lin).homogeneous_part(self.degree)

    def evaluate(self, z: Sequence[complex]) -> np.ndarray:
        return self.to_jet().evaluate(z)


# ---------------------------------------------------------------------- #
# composition and inversion


def _compose_arrays(q: int, order: int, fc: np.ndarray, gc: np.ndarray) -> np.ndarray:
    """Core composition on raw coefficient blocks already cut to `order`."""
    t = _tables(q, order)
    n = t.count
    support = np.nonzero(np.any(fc[:, :n] != 0, axis=0))[0]
    support = support[t.degrees[support] >= 1]
    if support.size == 0:
        return np.zeros((q, n), dtype=complex)
    if n <= _DENSE_POWER_LIMIT:
        pows = np.zeros((n, n), dtype=complex)
        for r in range(1, n):
            k = t.parent_var[r]
            p = t.parent_rank[r]
            if t.degrees[r] == 1:
                pows[r] = gc[k, :n]
            else:
                pows[r] = _vec_mul(pows[p], gc[k, :n], q, order,
                                   lval_a=int(t.degrees[r]) - 1, lval_b=1)
        return fc[:, support] @ pows[support]
    # lazy path: only powers reachable from the support of f
    needed: set[int] = set()
    stack = [int(r) for r in support]
    while stack:
        r = stack.pop()
        if r in needed or t.degrees[r] == 0:
            continue
        needed.add(r)
        if t.degrees[r] > 1:
            stack.append(int(t.parent_rank[r]))
    memo: dict[int, np.ndarray] = {}

    def power(r: int) -> np.ndarray:
        got = memo.get(r)
        if got is not None:
            return got
        if t.degrees[r] == 1:
            val = gc[t.parent_var[r], :n]
        else:
            val = _vec_mul(power(int(t.parent_rank[r])), gc[t.parent_var[r], :n],
                           q, order, lval_a=int(t.degrees[r]) - 1, lval_b=1)
        memo[r] = val
        return val

    out = np.zeros((q, n), dtype=complex)
    for r in support:
        out += np.outer(fc[:, r], power(int(r)))
    return out


def compose(f: PolyJet, g: PolyJet, order: int | None = None) -> PolyJet:
    """Jet of f o g, exact through min(order, f.order, g.order).

    Both maps fix the origin, so a degree-d monomial of f only feeds degrees
    >= d of the composition; the result order is the largest one at which no
    unknown coefficient of either input can contribute.
    """
    if f.q != g.q:
        raise ValueError(f"dimension mismatch: {f.q} vs {g.q}")
    n = min(f.order, g.order)
    if order is not None:
        n = min(n, order)
    k = _tables(f.q, n).count
    return PolyJet(f.q, n, _compose_arrays(f.q, n, f.coeffs[:, :k], g.coeffs[:, :k]))


def invert(f: PolyJet, order: int | None = None) -> PolyJet:
    """Compositional inverse g with f o g = id through the truncation order.

    Solved degree by degree: the degree-d block of f o g depends on g only
    through degrees < d apart from the linear term, so
    G_d = -L^{-1} [f o g_{<d}]_d with L the linear part of f.
    """
    n = f.order if order is None else min(order, f.order)
    L = f.linear_matrix
    cond = np.linalg.cond(L)
    if not np.isfinite(cond) or cond > 1e14:
        raise ValueError("linear part is singular or numerically singular; jet is not invertible")
    Linv = np.linalg.inv(L)
    t = _tables(f.q, n)
    g = np.zeros((f.q, t.count), dtype=complex)
    g[:, 1:1 + f.q] = Linv
    fc = f.coeffs[:, :t.count]
    for d in range(2, n + 1):
        td = _tables(f.q, d)
        h = _compose_arrays(f.q, d, fc[:, :td.count], g[:, :td.count])
        blk = slice(td.offsets[d], td.offsets[d + 1])
        g[:, blk] = -Linv @ h[:, blk]
    return PolyJet(f.q, n, g)


# ---------------------------------------------------------------------- #
# triangular structure


def triangular_violations(f: PolyJet, tol: float = 0.0) -> list[tuple[int, MultiIndex]]:
    """Coefficients breaking the triangular shape.

    Component j may carry its own diagonal monomial z_j and otherwise only
    monomials in the strictly earlier variables z_0 .. z_{j-1}.
    """
    bad = []
    for j, I, c in f.nonzero_terms():
        if abs(c) <= tol:
            continue
        diagonal = sum(I) == 1 and I[j] == 1
        earlier_only = all(I[m] == 0 for m in range(j, f.q))
        if not (diagonal or earlier_only):
            bad.append((j, I))
    return bad


def is_triangular(f: PolyJet, tol: float = 0.0) -> bool:
    return not triangular_violations(f, tol)


def evaluate_triangular_inverse_many(f: PolyJet, w: np.ndarray) -> np.ndarray:
    """Solve f(z) = w columnwise for a triangular jet, w of shape (q, m).

    Component j reads lambda_j z_j + t_j(z_0..z_{j-1}) = w_j, so the z_j are
    recovered in order without constructing the inverse polynomial.
    """
    w = np.asarray(w, dtype=complex)
    if w.ndim != 2 or w.shape[0] != f.q:
        raise ValueError(f"w must have shape ({f.q}, m)")
    t = f.tables
    lam = np.diagonal(f.linear_matrix)
    if np.any(np.abs(lam) == 0):
        raise ValueError("triangular jet with vanishing diagonal is not invertible")
    m = w.shape[1]
    z = np.zeros((f.q, m), dtype=complex)
    # vals holds monomial values of the currently known coordinates; rows
    # touching a not-yet-solved z_k are stale but triangularity guarantees
    # component j never reads them.
    vals = np.zeros((t.count, m), dtype=complex)
    vals[0] = 1.0
    for j in range(f.q):
        acc = np.zeros(m, dtype=complex)
        for r in np.nonzero(f.coeffs[j])[0]:
            I = t.indices[r]
            if sum(I) == 1 and I[j] == 1:
                continue
            acc += f.coeffs[j, r] * vals[r]
        z[j] = (w[j] - acc) / lam[j]
        if j + 1 < f.q:
            for r in range(1, t.count):
                vals[r] = vals[t.parent_rank[r]] * z[t.parent_var[r]]
    return z


def evaluate_triangular_inverse(f: PolyJet, w: Sequence[complex]) -> np.ndarray:
    """Solve f(z) = w exactly for a triangular jet at a single point."""
    w = np.asarray(w, dtype=complex).reshape(f.q)
    return evaluate_triangular_inverse_many(f, w[:, None])[:, 0]


def majorant_bound(f: PolyJet, radius: float, *, skip_linear: bool = False) -> float:
    """Upper bound for the euclidean norm of f on the closed `radius`-ball.

    Uses sum(|c_{j,I}|) per component and degree: |z^I| <= |z|^|I| on the
    euclidean ball, and the component sums are combined in l2.
    """
    t = f.tables
    lo = 2 if skip_linear else 1
    per_component = np.zeros(f.q)
    for d in range(lo, f.order + 1):
        blk = np.abs(f.coeffs[:, t.offsets[d]:t.offsets[d + 1]]).sum(axis=1)
        per_component += blk * radius ** d
    return float(np.linalg.norm(per_component))


def gradient_bound_matrix(f: PolyJet, radius: float) -> np.ndarray:
    """Entrywise bound for the Jacobian of f on the closed polydisc of `radius`.

    Entry (j, k) dominates |d f_j / d z_k| there; the spectral norm of the
    returned nonnegative matrix dominates the euclidean Lipschitz constant.
    """
    t = f.tables
    out = np.zeros((f.q, f.q))
    for j, I, c in f.nonzero_terms():
        d = sum(I)
        for k, e in enumerate(I):
            if e > 0:
                out[j, k] += abs(c) * e * radius ** (d - 1)
    return out
