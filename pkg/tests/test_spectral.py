"""Optimal forms, the conjugation operator spectrum, and resonance search."""

import itertools

import numpy as np
import pytest

from loewner import (
    HomogeneousMap,
    PolyJet,
    compose,
    detect_resonances,
    gamma_matrix,
    invert,
    operator_norm,
    spectral_radius,
    spectral_split,
    to_optimal_form,
)
from loewner.jets import enumerate_indices
from loewner.spectral import triangular_compatibility_violations

from conftest import random_spectrum


# ---------------------------------------------------------------------- #
# optimal form


def test_reorders_diagonal_by_modulus():
    opt = to_optimal_form(np.diag([0.3, 0.5]).astype(complex))
    assert np.allclose(opt.matrix, np.diag([0.5, 0.3]))
    P = np.abs(opt.basis_change)
    assert np.allclose(P, [[0, 1], [1, 0]])


def test_already_optimal_returns_identity_change():
    # couplings are allowed only inside equal-modulus clusters
    A = np.array([[0.5, 0.0], [0.1, 0.5j]], dtype=complex)
    opt = to_optimal_form(A)
    assert np.array_equal(opt.basis_change, np.eye(2))
    assert np.array_equal(opt.matrix, A)


def test_large_coupling_is_scaled_below_one():
    A = np.array([[0.5, 0.0], [10.0, 0.5]], dtype=complex)
    opt = to_optimal_form(A)
    assert operator_norm(opt.matrix) < 1.0
    M = opt.basis_change
    residual = M @ A @ np.linalg.inv(M) - opt.matrix
    assert np.max(np.abs(residual)) <= 1e-10 * np.linalg.norm(A)


@pytest.mark.parametrize("seed", range(6))
def test_random_matrices_conjugate_exactly(seed):
    rng = np.random.default_rng(seed)
    q = int(rng.integers(1, 5))
    lam = random_spectrum(rng, q, 0.2, 0.9)
    G = rng.normal(size=(q, q)) + 1j * rng.normal(size=(q, q))
    A_orig = G @ np.diag(lam) @ np.linalg.inv(G)
    opt = to_optimal_form(A_orig)
    d = np.abs(np.diagonal(opt.matrix))
    assert np.all(d[:-1] >= d[1:] - 1e-12)
    assert np.all(np.abs(np.triu(opt.matrix, 1)) <= 1e-12)
    rho = spectral_radius(A_orig)
    assert operator_norm(opt.matrix) <= (1 + rho) / 2 + 1e-12
    M = opt.basis_change
    residual = M @ A_orig @ np.linalg.inv(M) - opt.matrix
    assert np.max(np.abs(residual)) <= 1e-10 * max(1.0, np.linalg.norm(A_orig))


def test_rejects_non_dilations():
    with pytest.raises(ValueError):
        to_optimal_form(np.diag([1.2, 0.5]))
    with pytest.raises(ValueError):
        to_optimal_form(np.diag([0.5, 0.0]))


def test_cluster_blocks_confine_couplings():
    # equal moduli may stay coupled, distinct moduli must decouple
    A = np.array([[0.5, 0, 0], [0.3, 0.5, 0], [0.2, 0.1, 0.25]], dtype=complex)
    opt = to_optimal_form(A)
    assert opt.cluster_sizes == (2, 1)
    assert abs(opt.matrix[2, 0]) <= 1e-12 and abs(opt.matrix[2, 1]) <= 1e-12
    assert abs(opt.matrix[1, 0]) > 0


# ---------------------------------------------------------------------- #
# the conjugation operator


def _eig_multiset(lam, q, degree):
    out = []
    for j in range(q):
        for I in enumerate_indices(q, degree):
            out.append(lam[j] * np.prod(lam ** np.array(I)) ** -1)
    return np.sort_complex(np.asarray(out))


def test_gamma_diagonal_entries():
    lam = np.array([0.5 + 0.1j, 0.3 - 0.2j])
    G = gamma_matrix(np.diag(lam), 2)
    assert np.allclose(np.diag(np.diag(G)), G)
    assert np.allclose(np.sort_complex(np.diag(G)), _eig_multiset(lam, 2, 2))


def test_gamma_scalar_case():
    G = gamma_matrix(np.array([[0.5]]), 2)
    assert G.shape == (1, 1) and abs(G[0, 0] - 2.0) < 1e-14


@pytest.mark.parametrize("degree", [2, 3])
def test_gamma_spectrum_matches_formula_for_triangular(degree):
    A = np.array([[0.6, 0.0], [0.2, 0.6 * np.exp(0.7j)]], dtype=complex)
    lam = np.diagonal(A)
    G = gamma_matrix(A, degree)
    got = np.sort_complex(np.linalg.eigvals(G))
    want = _eig_multiset(lam, 2, degree)
    assert np.max(np.abs(got - want)) <= 1e-8


def test_gamma_matches_jet_composition_oracle():
    rng = np.random.default_rng(2)
    A = np.array([[0.7, 0.0], [0.15, 0.4]], dtype=complex)
    degree = 3
    G = gamma_matrix(A, degree)
    Aj = PolyJet.from_linear(A, degree)
    Aji = invert(Aj)
    vec = rng.normal(size=G.shape[0]) + 1j * rng.normal(size=G.shape[0])
    H = HomogeneousMap.from_flat(2, degree, vec)
    direct = compose(Aj, compose(H.to_jet(degree), Aji, degree), degree)
    assert np.allclose(G @ vec, direct.homogeneous_part(degree).flat, atol=1e-12)


def test_gamma_conjugation_covariance():
    rng = np.random.default_rng(4)
    A = np.diag([0.6, 0.35]).astype(complex)
    M = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    S = gamma_matrix(M, 2)  # the matrix of H -> M o H o M^{-1}
    lhs = gamma_matrix(M @ A @ np.linalg.inv(M), 2)
    rhs = S @ gamma_matrix(A, 2) @ np.linalg.inv(S)
    assert np.max(np.abs(lhs - rhs)) <= 1e-8 * np.max(np.abs(rhs))


def test_gamma_blocks_are_invariant():
    # optimal shape: the only coupling sits inside the equal-modulus cluster
    A = np.array([[0.7, 0, 0], [0, 0.4 * np.exp(0.9j), 0],
                  [0, 0.15, 0.4]], dtype=complex)
    split = spectral_split(A, 2, 1e-9)
    G = gamma_matrix(A, 2)
    scale = np.max(np.abs(G))
    s, u = np.nonzero(split.stable)[0], np.nonzero(split.unstable)[0]
    assert np.max(np.abs(G[np.ix_(s, u)])) <= 1e-12 * scale
    assert np.max(np.abs(G[np.ix_(u, s)])) <= 1e-12 * scale
    # restricted spectra fall on the advertised side of the unit circle
    assert np.max(np.abs(np.linalg.eigvals(G[np.ix_(s, s)]))) < 1 - 1e-8
    assert np.min(np.abs(np.linalg.eigvals(G[np.ix_(u, u)]))) > 1 + 1e-8


# ---------------------------------------------------------------------- #
# spectral splitting


def test_split_example_unstable_direction():
    split = spectral_split(np.diag([0.5, 0.3]), 2)
    b = split.basis.index((0, (0, 2)))
    assert abs(split.mu[b] - 0.5 / 0.09) < 1e-12
    assert split.unstable[b] and not split.resonant[b]


def test_split_detects_exact_resonance():
    split = spectral_split(np.diag([0.4, 0.16]), 2)
    b = split.basis.index((1, (2, 0)))
    assert split.resonant[b]
    assert abs(split.eig_candidates[b] - 1.0) < 1e-12


def test_split_equal_moduli_all_unstable():
    split = spectral_split(np.diag([0.5, 0.5]), 2)
    assert split.dimension == 6
    assert np.all(split.unstable) and not split.resonant.any()
    assert np.allclose(split.mu, 2.0)


def test_split_partitions_basis():
    rng = np.random.default_rng(8)
    lam = random_spectrum(rng, 3, 0.2, 0.9)
    lam = lam[np.argsort(-np.abs(lam))]
    split = spectral_split(np.diag(lam), 3)
    total = split.stable.astype(int) + split.resonant.astype(int) \
        + split.unstable.astype(int)
    assert np.all(total == 1)
    assert split.rho_stable < 1.0 and split.rho_unstable_inverse < 1.0


def test_split_force_nonresonant_reassigns_ties():
    split = spectral_split(np.diag([0.4, 0.16]), 2, force_nonresonant=True)
    assert not split.resonant.any()


# ---------------------------------------------------------------------- #
# resonance detection


def _brute_force(lam, tau, max_degree):
    lam = np.asarray(lam, dtype=complex)
    q = len(lam)
    found = []
    for degree in range(2, max_degree + 1):
        for I in itertools.product(range(degree + 1), repeat=q):
            if sum(I) != degree:
                continue
            target = np.prod(np.abs(lam) ** np.array(I))
            for j in range(q):
                if abs(abs(lam[j]) - target) <= tau * abs(lam[j]):
                    found.append((j, tuple(I)))
    return sorted(found)


def test_detect_matches_brute_force_on_random_spectra():
    rng = np.random.default_rng(15)
    tau = 1e-9
    for _ in range(25):
        q = int(rng.integers(1, 4))
        lam = random_spectrum(rng, q, 0.25, 0.9)
        lam = lam[np.argsort(-np.abs(lam))]
        report = detect_resonances(lam, "multiplicative", tau)
        brute = _brute_force(lam, tau, report.p + 1)
        assert sorted(report.resonances) == brute
        assert not [r for r in brute if sum(r[1]) > report.p]


def test_detect_planted_resonances():
    report = detect_resonances([0.6, 0.36], "multiplicative")
    assert (1, (2, 0)) in report.resonances
    theta = np.exp(1j * np.array([0.3, 1.1, -2.0]))
    lam = np.array([0.7, 0.5, 0.35]) * theta  # |l1 l2| = |l3|
    report = detect_resonances(lam, "multiplicative")
    assert (2, (1, 1, 0)) in report.resonances


def test_detect_examples():
    report = detect_resonances([0.4, 0.16], "multiplicative")
    assert report.resonances == ((1, (2, 0)),)
    assert detect_resonances([0.5], "multiplicative").resonances == ()


def test_additive_mode_maps_through_exponential():
    a = -0.9
    report = detect_resonances([a, 2 * a], "additive")
    assert report.mode == "additive"
    assert (1, (2, 0)) in report.resonances
    with pytest.raises(ValueError):
        detect_resonances([0.1, -1.0], "additive")


def test_multiplicative_preconditions():
    with pytest.raises(ValueError):
        detect_resonances([1.5, 0.5], "multiplicative")
    with pytest.raises(ValueError):
        detect_resonances([0.5, 0.3], "nonsense")


def test_reports_respect_triangular_shape():
    rng = np.random.default_rng(23)
    for _ in range(10):
        lam = random_spectrum(rng, 3, 0.3, 0.9)
        lam = lam[np.argsort(-np.abs(lam))]
        report = detect_resonances(lam, "multiplicative", 1e-6)
        assert triangular_compatibility_violations(report, np.abs(lam)) == []


def test_degree_cutoff_definition():
    report = detect_resonances([0.8, 0.3], "multiplicative")
    # smallest p with 0.8^p < 0.3
    assert report.p == 6
    assert 0.8 ** report.p < 0.3 <= 0.8 ** (report.p - 1)
