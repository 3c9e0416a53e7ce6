"""Linear-part normalization and spectral analysis for dilation matrices.

A dilation is an invertible matrix with spectral radius below one.  The
routines here bring such a matrix into an "optimal" lower-triangular form
(modulus-sorted eigenvalues, operator norm < 1, couplings confined to
equal-modulus eigenvalue clusters), build the matrix of the conjugation
operator Gamma(H) = A o H o A^{-1} on homogeneous map spaces, classify its
monomial eigendirections into stable, resonant and unstable families, and
enumerate spectral resonances.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .jets import (MultiIndex, PolyJet, _vec_mul, enumerate_indices,
                   index_count)

_CONJUGATION_RTOL = 1e-10


def spectral_radius(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(matrix, dtype=complex)))))


def operator_norm(matrix: np.ndarray) -> float:
    """Largest singular value: max |A z| / |z| over z != 0."""
    return float(np.linalg.norm(np.asarray(matrix, dtype=complex), 2))


@dataclass(frozen=True)
class OptimalForm:
    """A dilation in normalized coordinates.

    matrix is lower triangular with |diagonal| nonincreasing and operator
    norm below one; basis_change M satisfies M A_orig M^{-1} = matrix up to
    roundoff.  Off-diagonal entries only connect eigenvalues of equal
    modulus (cluster_sizes records the grouping), which keeps the monomial
    stable/unstable splitting of the conjugation operator exactly invariant.
    """

    matrix: np.ndarray
    basis_change: np.ndarray
    cluster_sizes: tuple[int, ...]
    epsilon: float
    norm_bound: float

    def __post_init__(self):
        for name in ("matrix", "basis_change"):
            a = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=complex))
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def q(self) -> int:
        return self.matrix.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.diagonal(self.matrix).copy()

    @property
    def inverse_matrix(self) -> np.ndarray:
        """Inverse computed cluster block by cluster block, so entries across
        distinct-modulus clusters are exactly zero."""
        q = self.q
        inv = np.zeros((q, q), dtype=complex)
        lo = 0
        for size in self.cluster_sizes:
            block = self.matrix[lo:lo + size, lo:lo + size]
            inv[lo:lo + size, lo:lo + size] = np.linalg.inv(block)
            lo += size
        return inv

    @property
    def basis_change_inverse(self) -> np.ndarray:
        return np.linalg.inv(self.basis_change)


def _modulus_clusters(moduli: Sequence[float], rtol: float) -> tuple[int, ...]:
    """Group a nonincreasing modulus sequence into near-tie clusters."""
    sizes = []
    current = 1
    for k in range(1, len(moduli)):
        if abs(moduli[k - 1] - moduli[k]) <= rtol * max(moduli[k - 1], 1e-300):
            current += 1
        else:
            sizes.append(current)
            current = 1
    sizes.append(current)
    return tuple(sizes)


def _swap_adjacent(T: np.ndarray, Q: np.ndarray, k: int) -> None:
    """Unitarily swap the diagonal entries k, k+1 of an upper triangular T."""
    a, b, c = T[k, k], T[k, k + 1], T[k + 1, k + 1]
    # eigenvector of [[a, b], [0, c]] for eigenvalue c
    v = np.array([b, c - a], dtype=complex)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return
    v /= nv
    G = np.array([[v[0], -np.conj(v[1])], [v[1], np.conj(v[0])]], dtype=complex)
    T[k:k + 2, :] = G.conj().T @ T[k:k + 2, :]
    T[:, k:k + 2] = T[:, k:k + 2] @ G
    Q[:, k:k + 2] = Q[:, k:k + 2] @ G
    T[k + 1, k] = 0.0


def _sort_schur_ascending(T: np.ndarray, Q: np.ndarray) -> None:
    """Bubble-sort the Schur diagonal by nondecreasing modulus in place."""
    q = T.shape[0]
    for _ in range(q * q):
        swapped = False
        for k in range(q - 1):
            if abs(T[k, k]) > abs(T[k + 1, k + 1]) * (1.0 + 1e-14):
                _swap_adjacent(T, Q, k)
                swapped = True
        if not swapped:
            return


def _decouple_clusters(L: np.ndarray, sizes: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Zero the blocks of a lower-triangular L linking distinct clusters.

    Returns (L_decoupled, Y) with Y L Y^{-1} = L_decoupled; the cross blocks
    are set exactly to zero after the Sylvester elimination.
    """
    q = L.shape[0]
    if len(sizes) <= 1:
        return np.array(L), np.eye(q, dtype=complex)
    n1 = sizes[0]
    L11 = L[:n1, :n1]
    L21 = L[n1:, :n1]
    L22 = L[n1:, n1:]
    X = scipy.linalg.solve_sylvester(-L22, L11, -L21)
    sub, Y2 = _decouple_clusters(L22, sizes[1:])
    out = np.zeros_like(L)
    out[:n1, :n1] = L11
    out[n1:, n1:] = sub
    Y = np.eye(q, dtype=complex)
    Y[n1:, :n1] = X
    full_Y2 = np.eye(q, dtype=complex)
    full_Y2[n1:, n1:] = Y2
    return out, full_Y2 @ Y


def _already_optimal(A: np.ndarray, cluster_rtol: float) -> tuple[int, ...] | None:
    """Cluster sizes if A is accepted as-is, else None."""
    q = A.shape[0]
    if np.any(np.triu(A, 1) != 0):
        return None
    moduli = np.abs(np.diagonal(A))
    if np.any(moduli[:-1] < moduli[1:] - 1e-15):
        return None
    if operator_norm(A) >= 1.0:
        return None
    sizes = _modulus_clusters(moduli, cluster_rtol)
    lo = 0
    for size in sizes:
        if np.any(A[lo + size:, lo:lo + size] != 0):
            return None
        lo += size
    return sizes


def to_optimal_form(matrix: np.ndarray, target_norm: float | None = None,
                    cluster_rtol: float = 1e-9) -> OptimalForm:
    """Conjugate a dilation into optimal lower-triangular form.

    The construction is a complex Schur factorization, a unitary reordering
    of the diagonal, elimination of couplings between distinct-modulus
    eigenvalue clusters, and a diagonal scaling diag(d, d^2, ..., d^q) with
    d halved from 1 until the operator norm is at most `target_norm`
    (default (1 + spectral radius)/2 < 1).

    A matrix that already has the shape (lower triangular, modulus-sorted,
    cluster-confined couplings, norm < 1) is returned untouched with the
    identity basis change.
    """
    A_orig = np.asarray(matrix, dtype=complex)
    q = A_orig.shape[0]
    if A_orig.shape != (q, q):
        raise ValueError(f"matrix must be square, got {A_orig.shape}")
    rho = spectral_radius(A_orig)
    if rho >= 1.0:
        raise ValueError(f"spectral radius {rho:.6g} is not below one: not a dilation")
    if abs(np.linalg.det(A_orig)) == 0.0:
        raise ValueError("matrix is singular: not a dilation")
    if target_norm is None:
        target_norm = (1.0 + rho) / 2.0
    if not rho < target_norm < 1.0:
        raise ValueError(
            f"target norm must lie in (spectral radius, 1), got {target_norm:.6g}")

    sizes = _already_optimal(A_orig, cluster_rtol)
    if sizes is not None and operator_norm(A_orig) <= target_norm:
        return OptimalForm(A_orig, np.eye(q, dtype=complex), sizes,
                           1.0, operator_norm(A_orig))

    scale = max(operator_norm(A_orig), 1.0)
    for attempt_rtol in (cluster_rtol, 1e-6, 1e-3, 1e-1):
        T, Q = scipy.linalg.schur(A_orig, output="complex")
        _sort_schur_ascending(T, Q)
        flip = np.eye(q)[::-1]
        lower = flip @ T @ flip          # lower triangular, moduli nonincreasing
        lower = np.tril(lower)
        moduli = np.abs(np.diagonal(lower))
        sizes = _modulus_clusters(moduli, attempt_rtol)
        try:
            decoupled, Y = _decouple_clusters(lower, sizes)
        except np.linalg.LinAlgError:
            continue
        delta = 1.0
        M_pre = Y @ flip @ Q.conj().T
        while True:
            D = np.diag(delta ** np.arange(1, q + 1)).astype(complex)
            Dinv = np.diag(delta ** -np.arange(1.0, q + 1))
            A_new = np.tril(D @ decoupled @ Dinv)
            if operator_norm(A_new) <= target_norm:
                break
            delta /= 2.0
            if delta < 2.0 ** -200:
                raise ValueError("diagonal scaling failed to reach the target norm")
        M = D @ M_pre
        residual = np.max(np.abs(M @ A_orig @ np.linalg.inv(M) - A_new))
        if residual <= _CONJUGATION_RTOL * scale:
            return OptimalForm(A_new, M, sizes, delta, operator_norm(A_new))
    raise ValueError(
        "could not reach optimal form with acceptable conjugation residual; "
        "eigenvalue moduli are too poorly separated")


# ---------------------------------------------------------------------- #
# the conjugation operator on homogeneous map spaces


def _linear_substitution_matrix(Ainv: np.ndarray, degree: int) -> np.ndarray:
    """Matrix S with S[K, I] = coefficient of z^K in (Ainv z)^I, both graded-lex."""
    q = Ainv.shape[0]
    n = index_count(q, degree)
    jet = PolyJet.from_linear(Ainv, degree)
    t = jet.tables
    lo, hi = t.offsets[degree], t.offsets[degree + 1]
    # powers of the substituted coordinates, built through the parent chain
    pows = np.zeros((t.count, t.count), dtype=complex)
    S = np.zeros((n, n), dtype=complex)
    for r in range(1, t.count):
        k = t.parent_var[r]
        p = t.parent_rank[r]
        if t.degrees[r] == 1:
            pows[r] = jet.coeffs[k]
        else:
            pows[r] = _vec_mul(pows[p], jet.coeffs[k], q, degree,
                               lval_a=int(t.degrees[r]) - 1, lval_b=1)
        if t.degrees[r] == degree:
            S[:, r - lo] = pows[r, lo:hi]
    return S


def gamma_matrix(linear_part: "OptimalForm | np.ndarray", degree: int) -> np.ndarray:
    """Matrix of H -> A o H o A^{-1} on degree-`degree` homogeneous maps.

    Basis vectors are the maps z -> z^I e_j ordered component-major with
    graded-lex indices inside each component; the matrix is assembled by jet
    composition of the coordinate substitution z -> A^{-1} z, which gives
    the Kronecker factorization kron(A, S) with S the substitution matrix.
    """
    if degree < 2:
        raise ValueError(f"homogeneous degree must be >= 2, got {degree}")
    if isinstance(linear_part, OptimalForm):
        A = np.asarray(linear_part.matrix)
        Ainv = linear_part.inverse_matrix
    else:
        A = np.asarray(linear_part, dtype=complex)
        Ainv = np.linalg.inv(A)
    S = _linear_substitution_matrix(Ainv, degree)
    return np.kron(A, S)


@dataclass(frozen=True)
class SpectralSplit:
    """Classification of the monomial basis of degree-i homogeneous maps.

    mu[b] = |lambda_j| / |lambda^I| for basis position b = (j, I); stable,
    resonant and unstable are boolean masks for mu < 1 - tau, |mu - 1| <= tau
    and mu > 1 + tau.  eig_candidates holds lambda_j lambda^{-I}, the
    eigenvalue of the conjugation operator along that basis direction.
    """

    q: int
    degree: int
    tau: float
    basis: tuple[tuple[int, MultiIndex], ...]
    mu: np.ndarray
    eig_candidates: np.ndarray
    stable: np.ndarray
    resonant: np.ndarray
    unstable: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.basis)

    @property
    def rho_stable(self) -> float:
        """Largest stable modulus (0 when the stable family is empty)."""
        return float(self.mu[self.stable].max()) if self.stable.any() else 0.0

    @property
    def rho_unstable_inverse(self) -> float:
        """Largest 1/mu over the unstable family (0 when empty)."""
        return float((1.0 / self.mu[self.unstable]).max()) if self.unstable.any() else 0.0


def spectral_split(linear_part: "OptimalForm | np.ndarray", degree: int,
                   tau: float = 1e-9, *, force_nonresonant: bool = False) -> SpectralSplit:
    """Split the degree-`degree` monomial basis by |lambda_j / lambda^I|.

    With force_nonresonant, directions inside the resonance tolerance are
    reassigned by the sign of mu - 1 (used beyond the resonance-degree
    cutoff, where exact resonances cannot occur).
    """
    lam = (linear_part.eigenvalues if isinstance(linear_part, OptimalForm)
           else np.diagonal(np.asarray(linear_part, dtype=complex)))
    q = len(lam)
    if degree < 2:
        raise ValueError(f"homogeneous degree must be >= 2, got {degree}")
    moduli = np.abs(lam)
    if np.any(moduli == 0.0) or np.any(moduli >= 1.0):
        raise ValueError("eigenvalue moduli must lie strictly between 0 and 1")
    basis = []
    mu = []
    eig = []
    indices = enumerate_indices(q, degree)
    for j in range(q):
        for I in indices:
            basis.append((j, I))
            lam_I = complex(np.prod([lam[k] ** e for k, e in enumerate(I)]))
            eig.append(lam[j] / lam_I)
            mu.append(moduli[j] / abs(lam_I))
    mu = np.asarray(mu)
    eig = np.asarray(eig)
    resonant = np.abs(mu - 1.0) <= tau
    if force_nonresonant:
        resonant = np.zeros_like(resonant)
    stable = ~resonant & (mu < 1.0)
    unstable = ~resonant & (mu >= 1.0)
    return SpectralSplit(q, degree, tau, tuple(basis), mu, eig,
                         stable, resonant, unstable)


# ---------------------------------------------------------------------- #
# resonance detection


@dataclass(frozen=True)
class ResonanceReport:
    """Resonances of a dilation spectrum.

    mode is "multiplicative" (|lambda_j| = |lambda^I|) or "additive"
    (Re <k, alpha> = Re alpha_l, detected through lambda = exp(alpha)).
    p is the smallest integer with max|lambda|^p < min|lambda|: beyond total
    degree p no resonance can occur, so the enumeration over 2 <= |I| <= p
    is exhaustive.  Components in `resonances` are 0-based (j, I) pairs.
    """

    mode: str
    tolerance: float
    p: int
    resonances: tuple[tuple[int, MultiIndex], ...]

    @property
    def is_resonant(self) -> bool:
        return bool(self.resonances)

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "tolerance": self.tolerance,
            "p": self.p,
            "resonances": [
                {"component": j + 1, "index": list(I)} for j, I in self.resonances
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _degree_cutoff(moduli: np.ndarray) -> int:
    big = float(moduli.max())
    small = float(moduli.min())
    p = 0
    while big ** p >= small:
        p += 1
        if p > 10_000:
            raise ValueError("degree cutoff did not terminate; spectrum is not a dilation")
    return p


def detect_resonances(values: Sequence[complex], mode: str = "multiplicative",
                      tau: float = 1e-9) -> ResonanceReport:
    """Enumerate resonances of a dilation spectrum.

    values are the eigenvalues themselves (multiplicative mode) or the
    exponents alpha with Re alpha < 0 (additive mode); additive resonances
    of alpha coincide with multiplicative resonances of exp(alpha).
    """
    vals = np.asarray(values, dtype=complex)
    q = len(vals)
    if mode == "additive":
        if np.any(vals.real >= 0.0):
            bad = vals[vals.real >= 0.0][0]
            raise ValueError(
                f"additive mode needs Re(alpha) < 0 for every exponent, got {bad}")
        lam = np.exp(vals)
    elif mode == "multiplicative":
        lam = vals
    else:
        raise ValueError(f"unknown mode {mode!r}")
    moduli = np.abs(lam)
    if np.any(moduli == 0.0) or np.any(moduli >= 1.0):
        bad = lam[(moduli == 0.0) | (moduli >= 1.0)][0]
        raise ValueError(
            f"eigenvalue {bad} has modulus outside (0, 1): not a dilation spectrum")
    p = _degree_cutoff(moduli)
    found = []
    for d in range(2, p + 1):
        for I in enumerate_indices(q, d):
            mod_I = float(np.prod(moduli ** np.asarray(I)))
            for j in range(q):
                if abs(moduli[j] - mod_I) <= tau * moduli[j]:
                    found.append((j, I))
    return ResonanceReport(mode, tau, p, tuple(found))


def triangular_compatibility_violations(
        report: ResonanceReport, moduli: Sequence[float]) -> list[tuple[int, MultiIndex]]:
    """Resonances (j, I) with I_m > 0 for some m >= j despite sorted moduli.

    For a modulus-sorted dilation spectrum every resonance must involve only
    the strictly earlier variables, so a nonempty return value signals an
    inconsistent report.  Only meaningful when `moduli` is nonincreasing.
    """
    out = []
    for j, I in report.resonances:
        if any(I[m] > 0 for m in range(j, len(I))):
            out.append((j, I))
    return out
