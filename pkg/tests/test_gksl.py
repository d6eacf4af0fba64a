import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fockqms.fock import Poly, build_poly, coherent_state, fock_state, ladder_ops, random_density_matrix
from fockqms.gksl import (BudgetError, GeneratorSpec, HamiltonianSpec1M, HamiltonianSpec2Local, Superoperator,
                          apply_map, assemble, assemble_multi_mode, check_budget, commutator_map, dissipator,
                          edge_decomposition, photon_loss_spec, shifted_photon_dissipator)
from fockqms.lattice import LatticeGeometry


def _lindblad_reference(h, jumps, rho):
    """Textbook form -i[H, rho] + sum L rho L^dag - 1/2 {L^dag L, rho} on dense matrices."""
    out = -1j * (h @ rho - rho @ h)
    for L in jumps:
        ld = L.conj().T
        out += L @ rho @ ld - 0.5 * (ld @ L @ rho + rho @ ld @ L)
    return out


def test_two_photon_loss_on_fock_two():
    a2 = build_poly(Poly.term("a a"), 5)
    out = dissipator(a2).apply(fock_state(2, 5))
    assert np.allclose(out, 2 * fock_state(0, 5) - 2 * fock_state(2, 5))
    assert np.allclose(dissipator(a2).apply(fock_state(0, 5)), 0)


def test_commutator_map_on_offdiagonal():
    n = ladder_ops(3)[2]
    x = np.zeros((3, 3), dtype=complex)
    x[1, 0] = 1
    assert np.allclose(commutator_map(n).apply(x), -1j * x)


def test_shifted_dissipator_matches_plain_at_zero():
    a2 = build_poly(Poly.term("a a"), 8)
    rho = random_density_matrix(8, np.random.default_rng(1))
    assert np.allclose(shifted_photon_dissipator(2, 0, 8).apply(rho), dissipator(a2).apply(rho))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, -1.5j])
def test_coherent_states_are_fixed_by_shifted_loss(alpha):
    out = shifted_photon_dissipator(2, alpha, 50).apply(coherent_state(alpha, 50))
    assert np.max(np.abs(out)) < 1e-6


def test_spec_assembly_matches_shifted_dissipator():
    rho = random_density_matrix(10, np.random.default_rng(2))
    gen = assemble(photon_loss_spec(2, 0.7, 10))
    ref = shifted_photon_dissipator(2, 0.7, 10, tail_tol=1.0)
    assert np.allclose(gen.apply(rho), ref.apply(rho))


def test_generator_spec_json_roundtrip():
    spec = photon_loss_spec(3, 0.5, 12, hamiltonian=Poly.term("ad a", 0.3))
    again = GeneratorSpec.from_json(spec.to_json())
    assert again == spec


def test_vectorised_matrix_matches_action_and_reference():
    rng = np.random.default_rng(3)
    d = 6
    h = build_poly(Poly.term("ad a") + Poly.term("a a", 0.2j) + Poly.term("ad ad", -0.2j), d)
    L = build_poly(Poly.term("a a") - Poly.identity(0.5), d)
    gen = Superoperator(d, h, [(1.0, L)])
    rho = random_density_matrix(d, rng)
    ref = _lindblad_reference(h.toarray(), [L.toarray()], rho)
    assert np.allclose(gen.apply(rho), ref)
    assert np.allclose(apply_map(gen.matrix, rho), ref)
    assert np.allclose(apply_map(gen.dense(), rho), ref)


def test_superoperator_algebra():
    d = 4
    a = ladder_ops(d)[0]
    g1, g2 = dissipator(a), commutator_map(ladder_ops(d)[2])
    rho = random_density_matrix(d, np.random.default_rng(4))
    assert np.allclose((g1 + g2).apply(rho), g1.apply(rho) + g2.apply(rho))
    assert np.allclose((3 * g1).apply(rho), 3 * g1.apply(rho))
    with pytest.raises(ValueError):
        g1 + dissipator(ladder_ops(5)[0])


def test_budget_rule():
    assert check_budget(1, 200) == 200
    assert check_budget(2, 24) == 576
    with pytest.raises(BudgetError):
        check_budget(2, 25)
    with pytest.raises(BudgetError):
        check_budget(3, 15)
    assert check_budget(3, 15, budget_dim=4000) == 3375
    with pytest.raises(BudgetError):
        check_budget(4, 3)


def test_hamiltonian_1m():
    h = HamiltonianSpec1M.drive(1.0)
    assert h.degree == 1
    m = build_poly(h.to_poly(), 6).toarray()
    a = ladder_ops(6)[0].toarray()
    assert np.allclose(m, a + a.conj().T)
    h.check_degree(3, perturbation=True)
    with pytest.raises(ValueError):
        HamiltonianSpec1M({(0, 2): 1.0}).check_degree(3, perturbation=True)
    with pytest.raises(ValueError):
        HamiltonianSpec1M({(2, 1): 1.0})


def test_hamiltonian_2local_roundtrip_and_hermitian():
    lat = LatticeGeometry.chain(2)
    ham = HamiltonianSpec2Local.hopping(lat.edges, 0.5 + 0.5j)
    assert ham.degree == 2
    assert ham.sup_norm == pytest.approx(abs(0.5 + 0.5j))
    assert HamiltonianSpec2Local.from_dict(ham.to_dict()) == ham
    m = build_poly(ham.to_poly(), (4, 4)).toarray()
    assert np.allclose(m, m.conj().T)


def test_chain_without_hamiltonian_is_sum_of_site_dissipators():
    d = 4
    lat = LatticeGeometry.chain(2)
    gen = assemble_multi_mode(lat, 2, 0, None, 1.0, d)
    single = shifted_photon_dissipator(2, 0, d).dense()
    eye = np.eye(d * d)
    # row-major vec of a kron-structured operator: permute to the (site0, site0') (site1, site1') order
    full = gen.dense()
    perm = np.arange(d ** 4).reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(-1)
    local = np.kron(single, eye) + np.kron(eye, single)
    assert np.allclose(full[np.ix_(perm, perm)], local)


def test_edge_decomposition_resums():
    lat = LatticeGeometry.chain(3)
    ham = HamiltonianSpec2Local.hopping(lat.edges, 1.0)
    rho = random_density_matrix((3, 3, 3), np.random.default_rng(5))
    total = assemble_multi_mode(lat, 2, 0, ham, 2.0, 3)
    parts = edge_decomposition(lat, 2, 0, ham, 2.0, 3)
    assert np.allclose(sum(g.apply(rho) for g in parts.values()), total.apply(rho))


def test_multi_mode_rejects_non_edges():
    lat = LatticeGeometry.chain(3)
    ham = HamiltonianSpec2Local.hopping([(0, 2)], 1.0)
    with pytest.raises(ValueError):
        assemble_multi_mode(lat, 2, 0, ham, 1.0, 3)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), ell=st.integers(1, 3), re=st.floats(-1, 1), im=st.floats(-1, 1))
def test_generator_is_trace_annihilating_and_hermiticity_preserving(seed, ell, re, im):
    d = 14
    rng = np.random.default_rng(seed)
    gen = shifted_photon_dissipator(ell, complex(re, im), d, tail_tol=1.0)
    gen = gen + commutator_map(build_poly(Poly.term("ad a"), d))
    rho = random_density_matrix(d, rng)
    out = gen.apply(rho)
    assert abs(np.trace(out)) < 1e-10
    assert np.allclose(out, out.conj().T)
