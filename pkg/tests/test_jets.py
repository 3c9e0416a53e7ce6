"""Truncated jet algebra against symbolic and combinatorial oracles."""

import itertools
import json
import math

import numpy as np
import pytest
import sympy
from hypothesis import given, strategies as st

from loewner import HomogeneousMap, PolyJet, compose, invert, is_triangular
from loewner.jets import (
    _mul_plan,
    _vec_mul,
    enumerate_indices,
    gradient_bound_matrix,
    index_count,
    majorant_bound,
)

from conftest import random_polyjet


# ---------------------------------------------------------------------- #
# enumeration


def test_enumerate_indices_examples():
    assert enumerate_indices(2, 2) == [(2, 0), (1, 1), (0, 2)]
    assert enumerate_indices(1, 5) == [(5,)]
    assert len(enumerate_indices(3, 2)) == 6


@pytest.mark.parametrize("q,degree", [(1, 4), (2, 3), (3, 2), (4, 5)])
def test_index_count_is_stars_and_bars(q, degree):
    expected = math.comb(degree + q - 1, q - 1)
    assert index_count(q, degree) == expected
    assert len(enumerate_indices(q, degree)) == expected
    # dim H_i = q * C(i+q-1, q-1)
    assert HomogeneousMap.zero(q, degree).flat.size == q * expected


def test_enumeration_is_graded_lex():
    seen = enumerate_indices(3, 3)
    assert seen == sorted(seen, reverse=True)
    assert all(sum(I) == 3 for I in seen)


# ---------------------------------------------------------------------- #
# composition against sympy


def _to_sympy(jet, symbols):
    out = [sympy.Integer(0)] * jet.q
    for j, I, c in jet.nonzero_terms():
        mono = sympy.prod([s ** e for s, e in zip(symbols, I)])
        out[j] += sympy.nsimplify(complex(c), rational=False) * mono
    return out


def _sympy_compose(f_exprs, g_exprs, symbols, order):
    """Truncated coefficients of f o g as {exponent tuple: complex}."""
    subs = dict(zip(symbols, g_exprs))
    out = []
    for expr in f_exprs:
        expanded = sympy.expand(expr.subs(subs, simultaneous=True))
        poly = sympy.Poly(expanded, *symbols)
        out.append({mono: complex(c) for mono, c in poly.terms()
                    if sum(mono) <= order})
    return out


def test_compose_identity_is_identity():
    e = PolyJet.identity(2, 3)
    assert compose(e, e, 3) == e


def test_compose_scalar_example():
    f = PolyJet.from_terms(1, 2, {(0, (1,)): 1, (0, (2,)): 1})
    g = PolyJet.from_terms(1, 2, {(0, (1,)): 2})
    out = compose(f, g, 2)
    assert out.coefficient(0, (1,)) == 2
    assert out.coefficient(0, (2,)) == 4


def test_compose_two_dim_example():
    f = PolyJet.from_terms(2, 2, {(0, (1, 0)): 1, (1, (0, 1)): 1, (1, (2, 0)): 1})
    g = PolyJet.from_terms(2, 2, {(0, (1, 0)): 1, (0, (0, 2)): 1, (1, (0, 1)): 1})
    out = compose(f, g, 2)
    expect = PolyJet.from_terms(2, 2, {(0, (1, 0)): 1, (0, (0, 2)): 1,
                                       (1, (0, 1)): 1, (1, (2, 0)): 1})
    assert out == expect


@pytest.mark.parametrize("seed", [0, 1])
def test_compose_matches_symbolic_expansion(seed):
    rng = np.random.default_rng(seed)
    q, order = 2, 3
    f = random_polyjet(rng, q, order, scale=0.8)
    g = random_polyjet(rng, q, order, linear=0.5 * np.eye(q), scale=0.8)
    out = compose(f, g, order)
    symbols = sympy.symbols(f"z0:{q}")
    oracle = _sympy_compose(_to_sympy(f, symbols), _to_sympy(g, symbols),
                            symbols, order)
    for j in range(q):
        for mono, ref in oracle[j].items():
            got = complex(out.coefficient(j, mono))
            assert abs(got - ref) < 1e-12 * max(1.0, abs(ref))
        for j2, I, c in out.nonzero_terms():
            if j2 == j:
                assert abs(c - oracle[j].get(tuple(I), 0.0)) < 1e-12


def test_compose_dimension_mismatch():
    with pytest.raises(ValueError):
        compose(PolyJet.identity(2, 2), PolyJet.identity(3, 2))


# ---------------------------------------------------------------------- #
# inversion


def test_invert_linear_is_matrix_inverse():
    A = np.array([[0.5, 0.0], [0.2, 0.25]], dtype=complex)
    inv = invert(PolyJet.from_linear(A, 3))
    assert np.allclose(inv.linear_matrix, np.linalg.inv(A))
    assert all(sum(I) == 1 for _, I, _ in inv.nonzero_terms())


def test_invert_reversion_series():
    # z + z^2 reverts to z - z^2 + 2z^3 - 5z^4 + 14z^5 (Catalan signs)
    f = PolyJet.from_terms(1, 5, {(0, (1,)): 1, (0, (2,)): 1})
    g = invert(f)
    coeffs = [g.coefficient(0, (d,)) for d in range(1, 6)]
    assert np.allclose(coeffs, [1, -1, 2, -5, 14], atol=1e-12)


@pytest.mark.parametrize("seed", [3, 4])
def test_invert_satisfies_symbolic_contract(seed):
    # f(g(z)) expanded symbolically must be z through the truncation order
    rng = np.random.default_rng(seed)
    f = random_polyjet(rng, 1, 6, linear=np.array([[0.7 + 0.1j]]), scale=0.6)
    g = invert(f)
    symbols = sympy.symbols("z0:1")
    (round_trip,) = _sympy_compose(_to_sympy(f, symbols), _to_sympy(g, symbols),
                                   symbols, 6)
    assert abs(round_trip.get((1,), 0.0) - 1) < 1e-10
    for d in range(2, 7):
        assert abs(round_trip.get((d,), 0.0)) < 1e-9


def test_inverse_contract_random():
    rng = np.random.default_rng(11)
    for q, order in [(1, 6), (2, 4), (3, 3)]:
        f = random_polyjet(rng, q, order, scale=0.5)
        g = invert(f)
        e = PolyJet.identity(q, order)
        scale = max(1.0, f.max_coeff, g.max_coeff)
        assert (compose(f, g, order) - e).max_coeff <= 1e-12 * scale
        assert (compose(g, f, order) - e).max_coeff <= 1e-12 * scale
        assert (invert(g) - f).max_coeff <= 1e-11 * scale


def test_invert_singular_linear_part():
    f = PolyJet.from_terms(2, 2, {(0, (1, 0)): 1.0, (1, (2, 0)): 1.0})
    with pytest.raises((ValueError, np.linalg.LinAlgError)):
        invert(f)


# ---------------------------------------------------------------------- #
# homogeneous decomposition and evaluation


def test_homogeneous_part_examples():
    A = np.array([[0.5, 0.1], [0.0, 0.3]], dtype=complex)
    lin = PolyJet.from_linear(A, 4)
    for d in range(2, 5):
        assert lin.homogeneous_part(d).is_zero()
    f = PolyJet.from_terms(1, 3, {(0, (1,)): 1, (0, (2,)): 3})
    assert f.homogeneous_part(2).flat[0] == 3


def test_homogeneous_parts_reassemble():
    rng = np.random.default_rng(5)
    f = random_polyjet(rng, 2, 4, scale=1.0)
    total = PolyJet.zero(2, 4)
    for d in range(1, 5):
        total = total + f.homogeneous_part(d).to_jet(4)
    assert total == f


def test_homogeneous_part_out_of_range():
    f = PolyJet.identity(2, 3)
    with pytest.raises(ValueError):
        f.homogeneous_part(4)


def test_evaluate_examples():
    e = PolyJet.identity(2, 3)
    z = np.array([0.3 + 0.1j, -0.2j])
    assert np.allclose(e.evaluate(z), z)
    f = PolyJet.from_terms(1, 2, {(0, (1,)): 1, (0, (2,)): 1})
    assert abs(f.evaluate([0.1])[0] - 0.11) < 1e-15


def test_evaluate_compose_two_paths():
    rng = np.random.default_rng(9)
    f = random_polyjet(rng, 2, 4, scale=1.0)
    g = random_polyjet(rng, 2, 4, linear=0.5 * np.eye(2), scale=1.0)
    z = 1e-3 * np.array([0.7 + 0.2j, -0.4 + 0.9j])
    direct = compose(f, g, 4).evaluate(z)
    nested = f.evaluate(g.evaluate(z))
    scale = max(1.0, f.max_coeff * g.max_coeff)
    # the two paths differ only beyond the truncation order
    assert np.max(np.abs(direct - nested)) <= 1e-12 * scale


# ---------------------------------------------------------------------- #
# hypothesis properties

coeff = st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False)


def jets(q, order):
    t = PolyJet.zero(q, order).tables
    mask = (np.asarray(t.degrees) >= 2).astype(float)
    n = q * t.count
    return st.lists(coeff, min_size=n, max_size=n).map(
        lambda vals: PolyJet.identity(q, order) + PolyJet(
            q, order, np.array(vals, dtype=complex).reshape(q, -1) * mask))


@given(jets(2, 3), jets(2, 3), jets(2, 3))
def test_composition_associative(f, g, h):
    left = compose(compose(f, g, 3), h, 3)
    right = compose(f, compose(g, h, 3), 3)
    scale = max(1.0, f.max_coeff, g.max_coeff, h.max_coeff) ** 3
    assert (left - right).max_coeff <= 1e-10 * scale


@given(jets(2, 3))
def test_inverse_contract_property(f):
    g = invert(f)
    residual = (compose(f, g, 3) - PolyJet.identity(2, 3)).max_coeff
    assert residual <= 1e-10 * max(1.0, g.max_coeff) ** 3


# ---------------------------------------------------------------------- #
# triangular structure


def _triangular_jet(diag, extra):
    q = len(diag)
    terms = {(j, _unit(q, j)): diag[j] for j in range(q)}
    terms.update(extra)
    return PolyJet.from_terms(q, 3, terms)


def _unit(q, j):
    e = [0] * q
    e[j] = 1
    return tuple(e)


def test_triangular_closure_under_compose_and_invert():
    f = _triangular_jet([0.5, 0.3], {(1, (2, 0)): 0.7, (1, (3, 0)): -0.2})
    g = _triangular_jet([0.8, 0.6], {(1, (2, 0)): 0.1j})
    assert is_triangular(f) and is_triangular(g)
    assert is_triangular(compose(f, g, 3))
    assert is_triangular(invert(f))
    leak = PolyJet.from_terms(2, 3, {(0, (1, 0)): 0.5, (1, (0, 1)): 0.3,
                                     (0, (0, 2)): 1.0})
    assert not is_triangular(leak)


# ---------------------------------------------------------------------- #
# serialization


def test_json_round_trip_bit_exact():
    rng = np.random.default_rng(21)
    f = random_polyjet(rng, 3, 3, scale=0.9)
    data = json.loads(f.to_json())
    assert data["q"] == 3 and data["order"] == 3
    back = PolyJet.from_json(f.to_json())
    assert np.array_equal(back.coeffs, f.coeffs)
    keys = [(t["component"], tuple(t["index"])) for t in data["terms"]]
    assert keys == sorted(keys, key=lambda k: (k[0], sum(k[1]),
                                               tuple(-e for e in k[1])))


def test_json_rejects_garbage():
    with pytest.raises((ValueError, KeyError, TypeError)):
        PolyJet.from_json_dict({"q": 1, "order": 0, "terms": []})


# ---------------------------------------------------------------------- #
# bounds and the filtered multiplication plan


def test_majorant_bound_dominates_samples():
    rng = np.random.default_rng(13)
    f = random_polyjet(rng, 2, 3, scale=1.0)
    for radius in (0.1, 0.5):
        bound = majorant_bound(f, radius)
        pts = radius * np.exp(2j * np.pi * rng.uniform(size=(2, 64)))
        vals = np.abs(f.evaluate_many(pts)).max()
        assert vals <= bound + 1e-12


def test_gradient_bound_linear_case():
    A = np.array([[0.5, 0.25], [0.0, 0.3]], dtype=complex)
    g = gradient_bound_matrix(PolyJet.from_linear(A, 3), 0.5)
    assert np.allclose(g, np.abs(A))


def test_valuation_filtered_multiply_matches_full():
    q, order = 2, 5
    rng = np.random.default_rng(17)
    t = PolyJet.zero(q, order).tables
    degrees = np.asarray(t.degrees)
    for lva, lvb in itertools.product([0, 1, 2, 3], repeat=2):
        a = rng.normal(size=t.count) + 1j * rng.normal(size=t.count)
        b = rng.normal(size=t.count) + 1j * rng.normal(size=t.count)
        a = a * (degrees >= max(lva, 1))  # honor the declared valuations
        b = b * (degrees >= max(lvb, 1))
        full = _vec_mul(a, b, q, order)
        fast = _vec_mul(a, b, q, order, lva, lvb)
        assert np.allclose(full, fast, atol=1e-14)
        assert _mul_plan(q, order, lva, lvb) is _mul_plan(q, order, lva, lvb)
