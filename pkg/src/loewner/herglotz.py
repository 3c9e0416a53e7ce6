"""Evolution families and Loewner chains driven by time-dependent dilation fields.

A dilation field H(z, t) = Lambda z + sum_{j,I} c_{j,I}(t) z^I e_j with the
spectrum of Lambda in the open left half plane generates an evolution family
phi_{s,t} (integrate dz/dtau = H(z, tau) from time s to time t).  This module
integrates that family as truncated jets and as point trajectories,
discretizes it at integer times into optimal linear coordinates, and builds
the associated chain of maps f_t = f_n o phi_{t,n} whose linear part is
exp(-Lambda t).  Everything time-dependent is piecewise smooth: coefficient
schedules are constant, right-open piecewise constant, or piecewise linear
interpolants, and the integrators split every interval at the schedule
breakpoints so each Runge-Kutta step sees smooth data.
"""
from __future__ import annotations

import bisect
import dataclasses
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import expm

from .homological import TAIL_CONSTANT
from .jets import PolyJet, compose, invert
from .normal_form import (
    ConjugacyResult,
    DiscreteEvolutionFamily,
    UnivalenceReport,
    _with_linear,
    _smallest_ell,
    build_normal_form,
    discrete_chain,
    jacobian_points,
    univalence_check,
)
from .sampling import complex_ball_points
from .spectral import OptimalForm, ResonanceReport, operator_norm, to_optimal_form

__all__ = [
    "PreconditionError",
    "TimeCoefficient",
    "HerglotzFieldSpec",
    "integrate_jet",
    "integrate_points",
    "ContinuousEvolution",
    "DiscretizedField",
    "discretize",
    "LoewnerChain",
    "build_chain",
    "pde_residual",
    "SubordinationReport",
    "verify_subordination_chain",
    "verification_samples",
    "AttractionRow",
    "AttractionReport",
    "attraction_check",
]


class PreconditionError(ValueError):
    """Well-formed input that violates a mathematical admissibility condition."""


# --------------------------------------------------------------------- #
# JSON scalar helpers (shared with the command line front end)

def complex_to_json(value: complex) -> dict:
    return {"re": float(value.real), "im": float(value.imag)}


def complex_from_json(data) -> complex:
    if isinstance(data, Mapping):
        return complex(float(data.get("re", 0.0)), float(data.get("im", 0.0)))
    if isinstance(data, (list, tuple)) and len(data) == 2:
        return complex(float(data[0]), float(data[1]))
    return complex(data)


def matrix_to_json(matrix: np.ndarray) -> list:
    return [[complex_to_json(v) for v in row] for row in np.asarray(matrix, dtype=complex)]


def matrix_from_json(rows) -> np.ndarray:
    return np.array([[complex_from_json(v) for v in row] for row in rows], dtype=complex)


# --------------------------------------------------------------------- #
# time-dependent scalar coefficients

_KINDS = ("constant", "piecewise", "sampled")


@dataclass(frozen=True)
class TimeCoefficient:
    """One scalar coefficient of the field as a function of time.

    kind "constant" ignores the grids.  kind "piecewise" is constant on the
    right-open intervals [times[i], times[i+1]) and clamps to the end values
    outside the grid.  kind "sampled" interpolates linearly between the nodes
    and clamps outside.
    """

    kind: str
    times: tuple[float, ...] = ()
    values: tuple[complex, ...] = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "values", tuple(complex(v) for v in self.values))
        if self.kind == "constant":
            if len(self.values) != 1 or self.times:
                raise ValueError("constant coefficients take exactly one value and no times")
            return
        if len(self.times) != len(self.values) or not self.times:
            raise ValueError("times and values must be nonempty and of equal length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")

    @staticmethod
    def constant(value: complex) -> "TimeCoefficient":
        return TimeCoefficient("constant", (), (complex(value),))

    def __call__(self, t: float) -> complex:
        if self.kind == "constant":
            return self.values[0]
        ts = self.times
        if t <= ts[0]:
            return self.values[0]
        if self.kind == "piecewise":
            if t >= ts[-1]:
                return self.values[-1]
            return self.values[bisect.bisect_right(ts, t) - 1]
        if t >= ts[-1]:
            return self.values[-1]
        i = bisect.bisect_right(ts, t) - 1
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        return (1.0 - w) * self.values[i] + w * self.values[i + 1]

    def breakpoints(self) -> tuple[float, ...]:
        return () if self.kind == "constant" else self.times

    def bound(self) -> float:
        return max(abs(v) for v in self.values)

    def to_json_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": complex_to_json(self.values[0])}
        return {
            "kind": self.kind,
            "times": list(self.times),
            "values": [complex_to_json(v) for v in self.values],
        }

    @staticmethod
    def from_json_dict(data: Mapping) -> "TimeCoefficient":
        kind = data["kind"]
        if kind == "constant":
            return TimeCoefficient.constant(complex_from_json(data["value"]))
        return TimeCoefficient(
            kind,
            tuple(float(t) for t in data["times"]),
            tuple(complex_from_json(v) for v in data["values"]),
        )


# --------------------------------------------------------------------- #
# field data

@dataclass(frozen=True)
class HerglotzFieldSpec:
    """Polynomial dilation field H(z, t) = Lambda z + sum c_{j,I}(t) z^I e_j.

    Lambda must have all eigenvalues in the open left half plane, every
    monomial index satisfies 2 <= |I| <= order, and horizon is the length of
    the time window of interest (the coefficient schedules clamp outside
    their grids, so evaluation beyond the horizon stays well defined).
    Components are 0-based here; the JSON form uses 1-based components.
    """

    Lambda: np.ndarray
    order: int
    terms: tuple[tuple[int, tuple[int, ...], TimeCoefficient], ...] = ()
    horizon: float = 1.0

    def __post_init__(self):
        L = np.ascontiguousarray(np.asarray(self.Lambda, dtype=complex))
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError("Lambda must be a square matrix")
        L.setflags(write=False)
        object.__setattr__(self, "Lambda", L)
        eigs = np.linalg.eigvals(L)
        worst = eigs[np.argmax(eigs.real)]
        if worst.real >= 0.0:
            raise PreconditionError(
                f"Lambda must have spectrum in the open left half plane; "
                f"eigenvalue {worst} has Re = {worst.real:.6g} >= 0"
            )
        if int(self.order) < 1:
            raise ValueError("order must be >= 1")
        object.__setattr__(self, "order", int(self.order))
        q = L.shape[0]
        cleaned = []
        for j, index, coeff in self.terms:
            j = int(j)
            index = tuple(int(e) for e in index)
            if not 0 <= j < q:
                raise ValueError(f"component {j} out of range for q={q}")
            if len(index) != q or any(e < 0 for e in index):
                raise ValueError(f"bad multi-index {index} for q={q}")
            d = sum(index)
            if not 2 <= d <= self.order:
                raise ValueError(f"term degree {d} outside 2..{self.order}")
            if not isinstance(coeff, TimeCoefficient):
                coeff = TimeCoefficient.constant(coeff)
            cleaned.append((j, index, coeff))
        object.__setattr__(self, "terms", tuple(cleaned))
        if not float(self.horizon) > 0.0:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def q(self) -> int:
        return self.Lambda.shape[0]

    @property
    def abscissa(self) -> float:
        """Largest real part in the spectrum of Lambda (negative)."""
        return float(np.linalg.eigvals(self.Lambda).real.max())

    def coefficient_bound(self) -> float:
        """sup over time of the largest monomial coefficient modulus."""
        return max((c.bound() for _, _, c in self.terms), default=0.0)

    def breakpoints(self) -> tuple[float, ...]:
        pts: set[float] = set()
        for _, _, coeff in self.terms:
            pts.update(coeff.breakpoints())
        return tuple(sorted(pts))

    def jet(self, t: float, order: int | None = None) -> PolyJet:
        """Jet of z -> H(z, t); terms above the requested order are dropped."""
        order = self.order if order is None else int(order)
        jet = PolyJet.from_linear(self.Lambda, order)
        sparse: dict[tuple[int, tuple[int, ...]], complex] = {}
        for j, index, coeff in self.terms:
            if sum(index) <= order:
                key = (j, index)
                sparse[key] = sparse.get(key, 0.0) + coeff(t)
        if sparse:
            jet = jet + PolyJet.from_terms(self.q, order, sparse)
        return jet

    def values(self, t: float, points: np.ndarray) -> np.ndarray:
        """H(z, t) at the columns of points, exactly (no truncation)."""
        pts = np.asarray(points, dtype=complex)
        vals = self.Lambda @ pts
        for j, index, coeff in self.terms:
            mono = np.ones(pts.shape[1], dtype=complex)
            for i, e in enumerate(index):
                if e:
                    mono = mono * pts[i] ** e
            vals[j] += coeff(t) * mono
        return vals

    def jacobians(self, t: float, points: np.ndarray) -> np.ndarray:
        """D_z H(z, t) at the columns of points, shape (m, q, q)."""
        pts = np.asarray(points, dtype=complex)
        q, m = pts.shape
        jac = np.tile(np.asarray(self.Lambda), (m, 1, 1))
        for j, index, coeff in self.terms:
            c = coeff(t)
            for i, e in enumerate(index):
                if not e:
                    continue
                mono = np.full(m, e * c, dtype=complex)
                for k, ek in enumerate(index):
                    p = ek - 1 if k == i else ek
                    if p:
                        mono = mono * pts[k] ** p
                jac[:, j, i] += mono
        return jac

    def to_json_dict(self) -> dict:
        return {
            "q": self.q,
            "Lambda": matrix_to_json(self.Lambda),
            "order": self.order,
            "terms": [
                {"component": j + 1, "index": list(index), "time": coeff.to_json_dict()}
                for j, index, coeff in self.terms
            ],
            "horizon": self.horizon,
        }

    @staticmethod
    def from_json_dict(data: Mapping) -> "HerglotzFieldSpec":
        L = matrix_from_json(data["Lambda"])
        terms = tuple(
            (
                int(entry["component"]) - 1,
                tuple(int(e) for e in entry["index"]),
                TimeCoefficient.from_json_dict(entry["time"]),
            )
            for entry in data.get("terms", ())
        )
        return HerglotzFieldSpec(
            Lambda=L,
            order=int(data["order"]),
            terms=terms,
            horizon=float(data.get("horizon", 1.0)),
        )


# --------------------------------------------------------------------- #
# transition integrators

def _segments(field: HerglotzFieldSpec, s: float, t: float) -> list[tuple[float, float]]:
    cuts = [s] + [b for b in field.breakpoints() if s < b < t] + [t]
    return list(zip(cuts, cuts[1:]))


def _rk4_jet(field: HerglotzFieldSpec, s: float, t: float, order: int,
             nsteps: int) -> PolyJet:
    """Fixed-grid RK4 for the coefficient ODE J' = H(., tau) o J, J(s) = id.

    Steps are distributed over the breakpoint segments proportionally to
    length; inside a segment the stage times are capped just below the right
    endpoint so right-open piecewise schedules never leak the next value in.
    """
    J = PolyJet.identity(field.q, order)
    span = t - s
    for a, b in _segments(field, s, t):
        n = max(1, int(round(nsteps * (b - a) / span)))
        h = (b - a) / n
        cap = b - 1e-12 * max(1.0, abs(b))
        for i in range(n):
            t0 = a + i * h

            def F(jet, tau):
                return compose(field.jet(min(tau, cap), order), jet, order)

            k1 = F(J, t0)
            k2 = F(J + k1 * (h / 2.0), t0 + h / 2.0)
            k3 = F(J + k2 * (h / 2.0), t0 + h / 2.0)
            k4 = F(J + k3 * h, t0 + h)
            J = J + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    return J


def integrate_jet(field: HerglotzFieldSpec, s: float, t: float,
                  order: int | None = None, tol: float = 1e-10,
                  max_nsteps: int = 1 << 17) -> PolyJet:
    """Jet of the transition map phi_{s,t} of the field, s <= t.

    The step count is refined until the map integrated over [s, t] in one go
    agrees with the composition of the two half-interval maps to within tol
    (relative, on coefficients).  Raises when the budget of max_nsteps steps
    cannot reach the tolerance.
    """
    order = field.order if order is None else int(order)
    s, t = float(s), float(t)
    if t < s:
        raise ValueError("reversed time interval")
    if t == s:
        return PolyJet.identity(field.q, order)
    nsteps = max(12, int(math.ceil(6.0 * (t - s))))
    while True:
        full = _rk4_jet(field, s, t, order, nsteps)
        mid = 0.5 * (s + t)
        # each half gets the full step count, so the composed map runs at
        # half the step size and the residual measures the actual error
        left = _rk4_jet(field, s, mid, order, nsteps)
        right = _rk4_jet(field, mid, t, order, nsteps)
        split = compose(right, left, order)
        res = (full - split).max_coeff / max(1.0, split.max_coeff)
        if res <= tol:
            return split
        if 2 * nsteps > max_nsteps:
            raise ValueError(
                f"step refinement exhausted at {nsteps} steps; "
                f"split residual {res:.3e} exceeds tol {tol:.1e}"
            )
        # quartic local error: jump most of the way, then verify again
        factor = max(2.0, min(16.0, (res / tol) ** 0.25))
        nsteps = min(max_nsteps, int(math.ceil(nsteps * factor)))


def _rk4_points(field: HerglotzFieldSpec, s: float, t: float,
                points: np.ndarray, nsteps: int) -> np.ndarray:
    z = np.array(points, dtype=complex)
    span = t - s
    for a, b in _segments(field, s, t):
        n = max(1, int(round(nsteps * (b - a) / span)))
        h = (b - a) / n
        cap = b - 1e-12 * max(1.0, abs(b))
        for i in range(n):
            t0 = a + i * h
            k1 = field.values(min(t0, cap), z)
            k2 = field.values(min(t0 + h / 2.0, cap), z + k1 * (h / 2.0))
            k3 = field.values(min(t0 + h / 2.0, cap), z + k2 * (h / 2.0))
            k4 = field.values(min(t0 + h, cap), z + k3 * h)
            z = z + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0)
    return z


def _rk4_variational(field: HerglotzFieldSpec, s: float, t: float,
                     points: np.ndarray, nsteps: int) -> tuple[np.ndarray, np.ndarray]:
    """Trajectories and their initial-condition Jacobians on a fixed grid.

    The Jacobian factors solve M' = DH(z(tau), tau) M along each trajectory,
    started at the identity.
    """
    z = np.array(points, dtype=complex)
    q, m = z.shape
    M = np.tile(np.eye(q, dtype=complex), (m, 1, 1))
    span = t - s

    def rhs(tau, zc, Mc):
        dz = field.values(tau, zc)
        J = field.jacobians(tau, zc)
        return dz, np.einsum("mij,mjk->mik", J, Mc)

    for a, b in _segments(field, s, t):
        n = max(1, int(round(nsteps * (b - a) / span)))
        h = (b - a) / n
        cap = b - 1e-12 * max(1.0, abs(b))
        for i in range(n):
            t0 = a + i * h
            k1z, k1m = rhs(min(t0, cap), z, M)
            k2z, k2m = rhs(min(t0 + h / 2, cap), z + k1z * (h / 2), M + k1m * (h / 2))
            k3z, k3m = rhs(min(t0 + h / 2, cap), z + k2z * (h / 2), M + k2m * (h / 2))
            k4z, k4m = rhs(min(t0 + h, cap), z + k3z * h, M + k3m * h)
            z = z + (k1z + 2 * k2z + 2 * k3z + k4z) * (h / 6)
            M = M + (k1m + 2 * k2m + 2 * k3m + k4m) * (h / 6)
    return z, M


def integrate_variational(field: HerglotzFieldSpec, s: float, t: float,
                          points: np.ndarray, tol: float = 1e-11,
                          max_nsteps: int = 1 << 18) -> tuple[np.ndarray, np.ndarray]:
    """phi_{s,t} and D phi_{s,t} at the columns of points."""
    s, t = float(s), float(t)
    if t < s:
        raise ValueError("reversed time interval")
    pts = np.asarray(points, dtype=complex)
    q, m = pts.shape
    if t == s or m == 0:
        return np.array(pts), np.tile(np.eye(q, dtype=complex), (m, 1, 1))
    nsteps = max(12, int(math.ceil(6.0 * (t - s))))
    pz, pm = _rk4_variational(field, s, t, pts, nsteps)
    while True:
        if 2 * nsteps > max_nsteps:
            raise ValueError("variational integration failed to reach the tolerance")
        nsteps *= 2
        cz, cm = _rk4_variational(field, s, t, pts, nsteps)
        err = max(float(np.abs(cz - pz).max()), float(np.abs(cm - pm).max()))
        if err <= tol * max(1.0, float(np.abs(cz).max()), float(np.abs(cm).max())):
            return cz, cm
        pz, pm = cz, cm


def integrate_points(field: HerglotzFieldSpec, s: float, t: float,
                     points: np.ndarray, tol: float = 1e-11,
                     max_nsteps: int = 1 << 18) -> np.ndarray:
    """Trajectories z(t) of dz/dtau = H(z, tau) with z(s) = columns of points."""
    s, t = float(s), float(t)
    if t < s:
        raise ValueError("reversed time interval")
    pts = np.asarray(points, dtype=complex)
    single = pts.ndim == 1
    if single:
        pts = pts[:, None]
    if t == s or pts.shape[1] == 0:
        return pts[:, 0] if single else np.array(pts)
    nsteps = max(12, int(math.ceil(6.0 * (t - s))))
    prev = _rk4_points(field, s, t, pts, nsteps)
    while True:
        if 2 * nsteps > max_nsteps:
            raise ValueError("point integration failed to reach the tolerance")
        nsteps *= 2
        cur = _rk4_points(field, s, t, pts, nsteps)
        err = float(np.abs(cur - prev).max()) / max(1.0, float(np.abs(cur).max()))
        if err <= tol:
            return cur[:, 0] if single else cur
        prev = cur


@dataclass(frozen=True)
class ContinuousEvolution:
    """Transition maps of a field, as cached jets and on-demand trajectories."""

    field: HerglotzFieldSpec
    order: int
    tol: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "_jets", {})

    def jet(self, s: float, t: float) -> PolyJet:
        key = (float(s), float(t))
        cache = self._jets
        if key not in cache:
            cache[key] = integrate_jet(self.field, s, t, self.order, self.tol)
        return cache[key]

    def point(self, s: float, t: float, points: np.ndarray) -> np.ndarray:
        return integrate_points(self.field, s, t, points, tol=min(self.tol, 1e-11))


# --------------------------------------------------------------------- #
# discretization at integer times

@dataclass(frozen=True)
class DiscretizedField:
    """Unit-step jets of a field, conjugated into optimal linear coordinates.

    family steps are psi_n = M o phi_{n,n+1} o M^{-1} with M the optimal
    basis change of exp(Lambda); the linear block of every step is snapped to
    the optimal matrix exactly, higher orders keep the integrated values.
    """

    family: DiscreteEvolutionFamily
    optimal: OptimalForm
    exp_linear: np.ndarray
    step_tol: float

    @property
    def q(self) -> int:
        return self.family.linear_part.shape[0]


def discretize(field: HerglotzFieldSpec, horizon: int | None = None,
               order: int | None = None, tol: float = 1e-10,
               tail: str = TAIL_CONSTANT) -> DiscretizedField:
    """Integer-time snapshots psi_n of the evolution family, ready to normalize."""
    T = int(math.ceil(field.horizon)) if horizon is None else int(horizon)
    if T < 1:
        raise ValueError("horizon must cover at least one unit step")
    order = field.order if order is None else int(order)
    expL = expm(field.Lambda)
    opt = to_optimal_form(expL)
    A = opt.matrix
    Mj = PolyJet.from_linear(opt.basis_change, order)
    Mij = PolyJet.from_linear(opt.basis_change_inverse, order)
    steps = []
    for n in range(T):
        J = integrate_jet(field, n, n + 1, order, tol)
        psi = compose(Mj, compose(J, Mij, order), order)
        steps.append(_with_linear(psi, A))
    family = DiscreteEvolutionFamily(A, tuple(steps), tail=tail)
    return DiscretizedField(family, opt, expL, tol)


# --------------------------------------------------------------------- #
# the chain

@dataclass(frozen=True)
class LoewnerChain:
    """Chain f_t with f_s = f_t o phi_{s,t} and linear part exp(-Lambda t).

    chain_jets hold f_n at integer times in the original coordinates;
    non-integer times anchor at a = ceil(t) through f_t = f_a o phi_{t,a}.
    radius is the validity ball (points must stay inside the window where
    the normalizing construction converges once pushed to their anchor).
    certificate, when present, bounds sup_t sup_{|z|<=0.95 radius}
    |exp(Lambda t) f_t(z)| over the build grid; it is attached only for
    resonance-free spectra.  result is the discrete normalization backing a
    freshly built chain; deserialized chains carry only the jets.
    """

    field: HerglotzFieldSpec
    horizon: int
    radius: float
    basis_change: np.ndarray
    chain_jets: tuple[PolyJet, ...]
    resonances: ResonanceReport
    certificate: float | None
    certificate_step: float
    step_tol: float
    constants: Mapping | None = None
    result: ConjugacyResult | None = None
    evolution: ContinuousEvolution | None = None

    def __post_init__(self):
        M = np.ascontiguousarray(np.asarray(self.basis_change, dtype=complex))
        M.setflags(write=False)
        object.__setattr__(self, "basis_change", M)
        object.__setattr__(self, "chain_jets", tuple(self.chain_jets))
        if len(self.chain_jets) != self.horizon + 1:
            raise ValueError("need one chain jet per integer time 0..horizon")
        if self.evolution is None:
            order = self.chain_jets[0].order
            object.__setattr__(
                self, "evolution",
                ContinuousEvolution(self.field, order, self.step_tol))

    @property
    def q(self) -> int:
        return self.field.q

    @property
    def order(self) -> int:
        return self.chain_jets[0].order

    def anchor(self, t: float) -> int:
        if not 0.0 <= t <= self.horizon + 1e-12:
            raise ValueError(f"time {t} outside the chain window [0, {self.horizon}]")
        return min(self.horizon, max(0, int(math.ceil(t - 1e-12))))

    def jet(self, t: float) -> PolyJet:
        a = self.anchor(t)
        base = self.chain_jets[a]
        if t == a:
            return base
        return compose(base, self.evolution.jet(t, a), base.order)

    def normalized_jet(self, t: float) -> PolyJet:
        """Jet of exp(Lambda t) o f_t, tangent to the identity."""
        j = self.jet(t)
        return compose(PolyJet.from_linear(expm(t * self.field.Lambda), j.order), j, j.order)

    def evaluate(self, t: float, points: np.ndarray) -> np.ndarray:
        """f_t at the columns of points inside the validity ball."""
        pts = np.asarray(points, dtype=complex)
        single = pts.ndim == 1
        if single:
            pts = pts[:, None]
        norms = np.sqrt(np.abs(pts * pts.conj()).sum(axis=0).real)
        if norms.size and norms.max() > self.radius * (1.0 + 1e-9):
            raise ValueError(
                f"point norm {norms.max():.6g} outside the validity radius "
                f"{self.radius:.6g}")
        a = self.anchor(t)
        w = pts if t == a else self.evolution.point(t, a, pts)
        out = self._at_anchor(a, w)
        return out[:, 0] if single else out

    def _at_anchor(self, a: int, w: np.ndarray) -> np.ndarray:
        """f_a at already-pushed points; no validity gate (internal use)."""
        if self.result is not None:
            M = self.basis_change
            return np.linalg.solve(M, self.result.chain_point(a, M @ w))
        return self.chain_jets[a].evaluate_many(w)

    def to_json_dict(self) -> dict:
        return {
            "schema": "loewner-chain/1",
            "q": self.q,
            "order": self.order,
            "horizon": self.horizon,
            "radius": self.radius,
            "certificate": self.certificate,
            "certificate_step": self.certificate_step,
            "step_tol": self.step_tol,
            "field": self.field.to_json_dict(),
            "basis_change": matrix_to_json(self.basis_change),
            "resonances": self.resonances.to_json_dict(),
            "constants": dict(self.constants) if self.constants is not None else None,
            "jets": [j.to_json_dict() for j in self.chain_jets],
        }

    @staticmethod
    def from_json_dict(data: Mapping) -> "LoewnerChain":
        schema = data.get("schema", "loewner-chain/1")
        if not str(schema).startswith("loewner-chain/"):
            raise ValueError(f"not a chain document (schema {schema!r})")
        field = HerglotzFieldSpec.from_json_dict(data["field"])
        jets = tuple(PolyJet.from_json_dict(j) for j in data["jets"])
        res = data.get("resonances") or {}
        report = ResonanceReport(
            mode=res.get("mode", "multiplicative"),
            tolerance=float(res.get("tolerance", 1e-9)),
            p=int(res.get("p", 2)),
            resonances=tuple(
                (int(e["component"]) - 1, tuple(int(x) for x in e["index"]))
                for e in res.get("resonances", ())
            ),
        )
        return LoewnerChain(
            field=field,
            horizon=int(data["horizon"]),
            radius=float(data["radius"]),
            basis_change=matrix_from_json(data["basis_change"]),
            chain_jets=jets,
            resonances=report,
            certificate=None if data.get("certificate") is None else float(data["certificate"]),
            certificate_step=float(data.get("certificate_step", 1.0)),
            step_tol=float(data.get("step_tol", 1e-10)),
            constants=data.get("constants"),
        )


def _transient_growth(Lambda: np.ndarray) -> float:
    """Largest operator norm of exp(tau Lambda) over one unit of time."""
    worst = 1.0
    for tau in np.linspace(0.0, 1.0, 9):
        worst = max(worst, operator_norm(expm(tau * Lambda)))
    return worst


def _normalized_sup(chain: LoewnerChain, ts: Sequence[float],
                    points: np.ndarray) -> float:
    worst = 0.0
    for t in ts:
        vals = expm(t * chain.field.Lambda) @ chain.evaluate(t, points)
        worst = max(worst, float(np.sqrt((vals * vals.conj()).real.sum(axis=0)).max()))
    return worst


def build_chain(field: HerglotzFieldSpec, horizon: int | None = None,
                order: int | None = None, tol: float = 1e-10, tau: float = 1e-9,
                grid_step: float = 0.5, ball_samples: int = 16,
                max_passes: int = 3) -> LoewnerChain:
    """Normalize the evolution family of the field into a Loewner chain.

    The field is discretized at integer times, the discrete family is brought
    to normal form, and the chain maps are pulled back to the original
    coordinates.  Discretization and normalization must agree on the jet
    order: the working order depends on constants measured from the
    normalized data, so the estimate is refined and the family rebuilt until
    the jets carry true flow coefficients at every order the normalization
    touches.  A sup bound for the normalized maps on the validity ball is
    attached only when the spectrum is resonance-free.
    """
    T = int(math.ceil(field.horizon)) if horizon is None else int(horizon)
    if T < 1:
        raise ValueError("horizon must cover at least one unit step")
    base_order = max(2, field.order if order is None else int(order))
    opt0 = to_optimal_form(expm(field.Lambda))
    alpha0 = 0.5 * (opt0.norm_bound + 1.0)
    beta0 = float(np.abs(np.linalg.inv(opt0.matrix)).sum(axis=1).max())
    jet_order = max(base_order, _smallest_ell(alpha0, beta0))
    disc = result = None
    for _ in range(max_passes):
        disc = discretize(field, T, jet_order, tol)
        result = build_normal_form(disc.family, order=base_order, horizon=T, tau=tau)
        if result.work_order <= jet_order:
            break
        jet_order = result.work_order
    else:
        raise RuntimeError("jet order failed to stabilize across rebuild passes")

    chain_disc = discrete_chain(result, T)
    W = chain_disc.jets[0].order
    M = disc.optimal.basis_change
    Mj = PolyJet.from_linear(M, W)
    Mij = PolyJet.from_linear(disc.optimal.basis_change_inverse, W)
    jets = tuple(compose(Mij, compose(fj, Mj, W), W) for fj in chain_disc.jets)

    growth = _transient_growth(field.Lambda)
    radius = 0.4 * result.constants.r / (operator_norm(M) * growth)
    chain = LoewnerChain(
        field=field,
        horizon=T,
        radius=radius,
        basis_change=M,
        chain_jets=jets,
        resonances=result.resonance_report,
        certificate=None,
        certificate_step=float(grid_step),
        step_tol=tol,
        constants=result.constants.as_dict(),
        result=result,
        evolution=ContinuousEvolution(field, W, tol),
    )
    if not result.resonance_report.resonances:
        ts = [k * grid_step for k in range(int(math.floor(T / grid_step)) + 1)]
        if ts[-1] < T:
            ts.append(float(T))
        pts = complex_ball_points(field.q, 0.95 * radius, ball_samples)
        sup = _normalized_sup(chain, ts, pts)
        chain = dataclasses.replace(chain, certificate=1.25 * sup)
    return chain


# --------------------------------------------------------------------- #
# residuals and checks

def pde_residual(chain: LoewnerChain, samples: Sequence[tuple[float, np.ndarray]],
                 h: float = 1e-3, field: HerglotzFieldSpec | None = None) -> float:
    """Largest |d/dt f_t(z) + Df_t(z) H(z, t)| over the (t, z) samples.

    The time derivative is a central difference with the two evaluations
    anchored at the same integer time a = ceil(t + h), so the quotient
    differentiates a single smooth map and converges at second order in h.
    Requires t - h >= 0 and t + h <= horizon for every sample.
    """
    field = chain.field if field is None else field
    if h <= 0.0:
        raise ValueError("h must be positive")
    worst = 0.0
    for t, z in samples:
        t = float(t)
        z = np.asarray(z, dtype=complex).reshape(-1)
        if t - h < 0.0 or t + h > chain.horizon:
            raise ValueError(f"sample time {t} +- {h} leaves the window [0, {chain.horizon}]")
        a = chain.anchor(t + h)
        col = z[:, None]
        wp = chain.evolution.point(t + h, a, col)
        wm = chain.evolution.point(t - h, a, col)
        # both evaluations go through the same anchor polynomial, so the
        # quotient differentiates one smooth function of t
        anchor_jet = chain.chain_jets[a]
        fp = anchor_jet.evaluate_many(wp)
        fm = anchor_jet.evaluate_many(wm)
        dfdt = (fp[:, 0] - fm[:, 0]) / (2.0 * h)
        # Df_t(z) by the chain rule: exact polynomial Jacobian of the anchor
        # map at the pushed point times the variational factor of the flow
        w0, Dw0 = integrate_variational(field, t, a, col)
        Df = jacobian_points(anchor_jet, w0)[0] @ Dw0[0]
        Hz = field.values(t, col)[:, 0]
        res = dfdt + Df @ Hz
        worst = max(worst, float(np.sqrt((res * res.conj()).real.sum())))
    return worst


def verification_samples(q: int, radius: float, count: int, start: int = 0) -> np.ndarray:
    """Deterministic sample set for the chain checks: a ball batch and its mirror.

    The mirrored pairs make even-degree degeneracies visible to the pairwise
    injectivity comparison (z and -z collide whenever the odd part of the map
    degenerates), which random points alone essentially never witness.
    """
    pts = complex_ball_points(q, radius, count, start)
    return np.hstack([pts, -pts])


@dataclass(frozen=True)
class SubordinationReport:
    """Outcome of the chain consistency checks; failures name what broke."""

    grid: tuple[float, ...]
    radius: float
    sample_count: int
    linear_defect: float
    containment_margin: float
    transition_defect: float
    normalization_sup: float
    declared_bound: float | None
    univalence: UnivalenceReport
    failures: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "failures": list(self.failures),
            "grid": list(self.grid),
            "radius": self.radius,
            "sample_count": self.sample_count,
            "linear_defect": self.linear_defect,
            "containment_margin": self.containment_margin,
            "transition_defect": self.transition_defect,
            "normalization_sup": self.normalization_sup,
            "declared_bound": self.declared_bound,
            "univalence_violations": len(self.univalence.violations),
            "univalence_linear_defect": self.univalence.linear_defect,
        }


def verify_subordination_chain(chain, radius: float | None = None, *,
                               grid_step: float | None = None, samples: int = 12,
                               start: int = 0) -> SubordinationReport:
    """Check a chain document against its own field.

    Four checks run unconditionally and every failure is collected rather
    than raised: the linear part of f_t must match exp(-Lambda t); the
    transition maps psi_{s,t} = f_t^{-1} o f_s between consecutive grid times
    must keep the sample ball inside the validity ball and agree with the
    transition integrated from the field; the normalized maps
    exp(Lambda t) o f_t must stay within the declared sup bound when one is
    declared; and the normalized maps must be injective on the mirrored
    sample set with linear part tangent to the identity.
    """
    if isinstance(chain, Mapping):
        chain = LoewnerChain.from_json_dict(chain)
    R = chain.radius if radius is None else float(radius)
    if R > chain.radius * (1.0 + 1e-12):
        raise ValueError("verification radius exceeds the chain validity radius")
    step = chain.certificate_step if grid_step is None else float(grid_step)
    ts = [k * step for k in range(int(math.floor(chain.horizon / step)) + 1)]
    if ts[-1] < chain.horizon:
        ts.append(float(chain.horizon))
    pts = verification_samples(chain.q, 0.9 * R, samples, start)
    failures: list[str] = []

    jets_t = [chain.jet(t) for t in ts]
    L = chain.field.Lambda

    lin_defect = 0.0
    for t, jt in zip(ts, jets_t):
        target = expm(-t * L)
        dev = operator_norm(jt.linear_matrix - target) / max(1.0, operator_norm(target))
        lin_defect = max(lin_defect, float(dev))
    if lin_defect > 1e-6:
        failures.append("linear-part")

    contain = 0.0
    match = 0.0
    W = chain.order
    for (s_, js), (t_, jt) in zip(zip(ts, jets_t), zip(ts[1:], jets_t[1:])):
        psi = compose(invert(jt), js, W)
        vals = psi.evaluate_many(pts)
        contain = max(contain, float(np.sqrt((vals * vals.conj()).real.sum(axis=0)).max()) / R)
        ref = chain.evolution.jet(s_, t_)
        match = max(match, (psi - ref).max_coeff / max(1.0, ref.max_coeff))
    if contain > 1.0 + 1e-6:
        failures.append("transition-containment")
    if match > 1e-5:
        failures.append("transition-field-match")

    normalized = [compose(PolyJet.from_linear(expm(t * L), W), jt, W)
                  for t, jt in zip(ts, jets_t)]
    sup = 0.0
    values = []
    for g in normalized:
        vals = g.evaluate_many(pts)
        values.append(vals)
        sup = max(sup, float(np.sqrt((vals * vals.conj()).real.sum(axis=0)).max()))
    if chain.certificate is not None and sup > chain.certificate * 1.01 + 1e-9:
        failures.append("normalization-bound")

    univ = univalence_check(values, pts, jets=normalized, delta=1e-3 * R, eta=1e-10)
    if not univ.passed:
        failures.append("univalence")

    return SubordinationReport(
        grid=tuple(ts),
        radius=R,
        sample_count=pts.shape[1],
        linear_defect=lin_defect,
        containment_margin=contain,
        transition_defect=match,
        normalization_sup=sup,
        declared_bound=chain.certificate,
        univalence=univ,
        failures=tuple(failures),
    )


# --------------------------------------------------------------------- #
# attraction to the origin

@dataclass(frozen=True)
class AttractionRow:
    index: int
    steps: int | None
    converged: bool
    final_norm: float


@dataclass(frozen=True)
class AttractionReport:
    """Per-sample step counts until the discrete orbit enters the tol ball."""

    tol: float
    start: int
    max_steps: int
    rows: tuple[AttractionRow, ...]

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.rows)

    def to_json_dict(self) -> dict:
        return {
            "tol": self.tol,
            "start": self.start,
            "max_steps": self.max_steps,
            "all_converged": self.all_converged,
            "rows": [
                {"index": r.index, "steps": r.steps, "converged": r.converged,
                 "final_norm": r.final_norm}
                for r in self.rows
            ],
        }


def attraction_check(family, points: np.ndarray, tol: float = 1e-6,
                     max_steps: int = 4096, start: int = 0) -> AttractionReport:
    """Iterate the evolution family on sample points until they reach the tol ball.

    Accepts a DiscreteEvolutionFamily or a DiscretizedField.  Orbits that are
    still outside the ball after max_steps are reported as not converged; the
    family tail keeps the iteration defined past the stored window.
    """
    if isinstance(family, DiscretizedField):
        family = family.family
    z = np.array(np.asarray(points, dtype=complex), ndmin=2)
    if z.shape[0] != family.linear_part.shape[0]:
        raise ValueError("points must have one row per coordinate")
    m = z.shape[1]
    steps: list[int | None] = [None] * m
    for k in range(max_steps + 1):
        norms = np.sqrt((z * z.conj()).real.sum(axis=0))
        for i in range(m):
            if steps[i] is None and norms[i] <= tol:
                steps[i] = k
        if all(s is not None for s in steps) or k == max_steps:
            break
        z = family.evaluate_transition(start + k, start + k + 1, z)
    rows = tuple(
        AttractionRow(index=i, steps=steps[i], converged=steps[i] is not None,
                      final_norm=float(norms[i]))
        for i in range(m)
    )
    return AttractionReport(tol=tol, start=start, max_steps=max_steps, rows=rows)
