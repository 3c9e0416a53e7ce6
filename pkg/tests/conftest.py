"""Shared builders for the test suite.

Random families are sampled with eigenvalue moduli bounded away from zero
so the contraction exponent ell (and with it the working jet order) stays
small; the acceptance budget is one core and sixty seconds per suite.
"""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from loewner import (
    DiscreteEvolutionFamily,
    HerglotzFieldSpec,
    HomogeneousMap,
    PolyJet,
    TimeCoefficient,
    build_chain,
    build_normal_form,
    compose,
    to_optimal_form,
)

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=25,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def random_spectrum(rng, q, lo=0.45, hi=0.8):
    """Contracting eigenvalues with moduli in [lo, hi], random phases."""
    moduli = rng.uniform(lo, hi, size=q)
    return moduli * np.exp(2j * np.pi * rng.uniform(size=q))


def random_polyjet(rng, q, order, linear=None, scale=0.3):
    """Jet with the given linear part and random higher-order terms."""
    if linear is None:
        linear = np.eye(q, dtype=complex)
    jet = PolyJet.from_linear(linear, order)
    for d in range(2, order + 1):
        m = HomogeneousMap.zero(q, d).flat.size
        vec = scale * (rng.normal(size=m) + 1j * rng.normal(size=m)) / m
        jet = jet + HomogeneousMap.from_flat(q, d, vec).to_jet(order)
    return jet


def random_optimal_family(rng, q, degree, horizon=3, lo=0.45, hi=0.8,
                          scale=0.3, tail="constant"):
    """Random dilation family conjugated into optimal-form coordinates.

    The linear part is a random normal matrix with spectrum from
    random_spectrum, routed through to_optimal_form exactly as discretized
    fields are, so the sampler exercises the full pipeline.
    """
    lam = random_spectrum(rng, q, lo, hi)
    G = rng.normal(size=(q, q)) + 1j * rng.normal(size=(q, q))
    Q, _ = np.linalg.qr(G)
    A_orig = Q @ np.diag(lam) @ Q.conj().T
    opt = to_optimal_form(A_orig)
    Mj = PolyJet.from_linear(opt.basis_change, degree)
    Mij = PolyJet.from_linear(np.linalg.inv(opt.basis_change), degree)
    steps = []
    for _ in range(horizon):
        raw = random_polyjet(rng, q, degree, A_orig, scale)
        steps.append(compose(Mj, compose(raw, Mij, degree), degree))
    return DiscreteEvolutionFamily(opt.matrix, tuple(steps), tail)


def koenigs_family(lam, c, order=3, horizon=2):
    """Autonomous q=1 family phi(z) = lam z + c z^2."""
    step = PolyJet.from_terms(1, order, {(0, (1,)): lam, (0, (2,)): c})
    A = np.array([[lam]], dtype=complex)
    return DiscreteEvolutionFamily(A, tuple(step for _ in range(horizon)))


def koenigs_oracle(lam, c, points, iterations=400):
    """Classical Koenigs limit lam^{-n} phi^n(z), iterated to convergence."""
    w = np.asarray(points, dtype=complex)
    for n in range(iterations):
        w = lam * w + c * w * w
    return w / lam ** iterations


def demo_field():
    """Resonance-free 2D field used across the continuous-time tests."""
    Lam = np.diag([-0.6, -1.0]).astype(complex)
    terms = (
        (0, (0, 2), TimeCoefficient.constant(0.2)),
        (1, (1, 1), TimeCoefficient.constant(0.1 - 0.05j)),
    )
    return HerglotzFieldSpec(Lam, 3, terms, horizon=3.0)


def counterexample_field(c=0.3, alpha=None):
    """The resonant field H = (a z1, 2a z2 + c z1^2)."""
    a = np.log(0.4) if alpha is None else alpha
    Lam = np.diag([a, 2 * a]).astype(complex)
    return HerglotzFieldSpec(Lam, 2, ((1, (2, 0), TimeCoefficient.constant(c)),),
                             horizon=2.0)


@pytest.fixture(scope="session")
def demo_chain():
    return build_chain(demo_field())


@pytest.fixture(scope="session")
def koenigs_result():
    return build_normal_form(koenigs_family(0.5, 0.1), extension=24)
