import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fockqms.fock import (LeakageError, Poly, build_poly, coherent_state, embed, fock_state, ladder_ops,
                          leakage, moment, occupations, product_state, coherent_ket, random_density_matrix,
                          sobolev_norm, trace_norm)


def test_ladder_matrix_elements():
    a, adag, n = ladder_ops(3)
    a = a.toarray()
    assert a[0, 1] == 1
    assert np.allclose(a @ np.array([1, 0, 0]), 0)
    assert np.allclose((adag @ ladder_ops(3)[0]).toarray(), n.toarray())


def test_commutator_is_identity_below_top_level():
    a, adag, _ = ladder_ops(4)
    comm = (a @ adag - adag @ a).toarray()
    assert np.allclose(comm[:3, :3], np.eye(3))
    # truncation artifact on the top level
    assert comm[3, 3] == pytest.approx(-3)


def test_cutoff_must_be_at_least_two():
    with pytest.raises(ValueError):
        ladder_ops(1)


def test_poly_a_squared_on_two():
    m = build_poly(Poly.term("a a"), 4).toarray()
    ket = np.zeros(4)
    ket[2] = 1
    expect = np.zeros(4)
    expect[0] = math.sqrt(2)
    assert np.allclose(m @ ket, expect)


def test_poly_number_operator_and_falling_product():
    n = ladder_ops(5)[2].toarray()
    assert np.allclose(build_poly(Poly.term("ad a"), 5).toarray(), n)
    m = build_poly(Poly.term("ad ad a a"), 5).toarray()
    assert m[3, 3] == pytest.approx(6)


def test_poly_json_roundtrip():
    p = Poly.term("ad0 a1", 1 + 2j) + Poly.term("a0", -1)
    assert Poly.from_json(p.to_json()) == p
    assert p.adjoint().adjoint() == p
    assert p.modes == {0, 1}
    assert p.degree == 2


def test_poly_mode_out_of_range():
    with pytest.raises(IndexError):
        build_poly(Poly.term("a3"), 4, modes=2)


def test_bad_token_rejected():
    with pytest.raises(ValueError):
        Poly.term("b0")


def test_two_mode_poly_matches_kron():
    a = ladder_ops(3)[0].toarray()
    m = build_poly(Poly.term("ad0 a1"), (3, 3)).toarray()
    assert np.allclose(m, np.kron(a.conj().T, a))


def test_coherent_state_moments():
    assert np.allclose(coherent_state(0, 5), fock_state(0, 5))
    rho = coherent_state(1.0, 30)
    assert moment(rho, 1) - 1 == pytest.approx(1, abs=1e-8)
    assert moment(rho, 1) == pytest.approx(2, abs=1e-8)


def test_coherent_state_leak_raises():
    with pytest.raises(LeakageError):
        coherent_state(3.0, 10)


def test_trace_norm_examples():
    assert trace_norm(np.diag([1.0, -1.0])) == pytest.approx(2)
    assert trace_norm(fock_state(0, 4) - fock_state(1, 4)) == pytest.approx(2)
    # non-Hermitian input takes the singular value route
    x = np.array([[0, 1], [0, 0]], dtype=complex)
    assert trace_norm(x) == pytest.approx(1)


def test_moment_examples():
    assert moment(fock_state(0, 6), 3.5) == pytest.approx(1)
    assert moment(fock_state(3, 6), 2) == pytest.approx(16)
    with pytest.raises(ValueError):
        moment(fock_state(0, 6), 0)


def test_sobolev_norm_of_state_equals_moment():
    rng = np.random.default_rng(0)
    rho = random_density_matrix(8, rng)
    assert sobolev_norm(rho, 2) == pytest.approx(moment(rho, 2))


def test_leakage_detects_top_levels():
    assert leakage(fock_state(0, 10)) == 0
    assert leakage(fock_state(9, 10)) == pytest.approx(1)


def test_product_state_and_multimode_moment():
    rho = product_state([coherent_ket(0, 4), coherent_ket(0, 4)])
    assert moment(rho, 2, dims=(4, 4), mode=1) == pytest.approx(1)
    occ = occupations((2, 3))
    assert occ.shape == (6, 2)
    assert tuple(occ[5]) == (1, 2)


def test_embed_checks_mode():
    with pytest.raises(IndexError):
        embed(ladder_ops(3)[0], 2, (3, 3))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d=st.integers(2, 12), support=st.integers(1, 12))
def test_random_density_matrix_is_a_state(seed, d, support):
    rho = random_density_matrix(d, np.random.default_rng(seed), support=min(support, d))
    assert np.trace(rho).real == pytest.approx(1, abs=1e-10)
    assert np.allclose(rho, rho.conj().T)
    assert np.min(np.linalg.eigvalsh(rho)) >= -1e-12
    assert trace_norm(rho) == pytest.approx(1, abs=1e-10)
    assert np.allclose(rho[support:, :], 0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), k=st.floats(0.1, 4))
def test_moment_at_least_one(seed, k):
    rho = random_density_matrix(10, np.random.default_rng(seed))
    assert moment(rho, k) >= 1 - 1e-12
