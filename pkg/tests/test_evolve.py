import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from fockqms.evolve import (IntegrateOptions, LeakageBreach, TraceDriftError, apply_propagator, empirical_limit,
                            integrate, norm_1to1_lower, propagator)
from fockqms.fock import Poly, build_poly, coherent_state, fock_state, random_density_matrix, trace_norm
from fockqms.gksl import BudgetError, Superoperator, assemble, commutator_map, photon_loss_spec, \
    shifted_photon_dissipator
from fockqms.lattice import LatticeGeometry, WeightProfile, weighted_moment


def test_zero_generator_keeps_state():
    rho = random_density_matrix(5, np.random.default_rng(0), support=3)
    traj = integrate(Superoperator.zero(5), rho, 2.0)
    assert np.allclose(traj.final, rho)


def test_two_photon_loss_from_fock_two():
    gen = assemble(photon_loss_spec(2, 0, 6))
    traj = integrate(gen, fock_state(2, 6), 1.0, IntegrateOptions(checkpoints=(0.5, 1.0)))
    assert traj.final[2, 2].real == pytest.approx(math.exp(-2), abs=1e-8)
    assert traj.state_at(0.5)[2, 2].real == pytest.approx(math.exp(-1), abs=1e-8)
    assert traj.checkpoint_times == [0.5, 1.0]
    with pytest.raises(KeyError):
        traj.state_at(0.3)


def test_propagator_matches_analytic_and_identity():
    gen = assemble(photon_loss_spec(2, 0, 6))
    assert np.allclose(propagator(gen, 0.0), np.eye(36))
    out = apply_propagator(propagator(gen, 1.0), fock_state(2, 6))
    assert out[2, 2].real == pytest.approx(math.exp(-2), abs=1e-13)
    assert out[0, 0].real == pytest.approx(1 - math.exp(-2), abs=1e-13)


def test_propagator_budget():
    gen = assemble(photon_loss_spec(2, 0, 60))
    with pytest.raises(BudgetError):
        propagator(gen, 1.0)


def test_integrator_agrees_with_reference_solver():
    d = 8
    h = build_poly(Poly.term("ad a") + 0.3 * (Poly.term("a") + Poly.term("ad")), d)
    gen = shifted_photon_dissipator(2, 0.5, d, tail_tol=1.0) + commutator_map(h)
    rho0 = random_density_matrix(d, np.random.default_rng(1), support=4)
    traj = integrate(gen, rho0, 2.0, IntegrateOptions(checkpoints=(1.0, 2.0), leakage_tol=None))
    m = gen.dense()
    sol = solve_ivp(lambda t, y: m @ y, (0, 2), rho0.reshape(-1), method="DOP853", t_eval=[1.0, 2.0],
                    rtol=1e-12, atol=1e-14)
    for i, t in enumerate((1.0, 2.0)):
        assert np.max(np.abs(traj.state_at(t) - sol.y[:, i].reshape(d, d))) < 1e-8
    assert np.max(np.abs(traj.final - apply_propagator(propagator(gen, 2.0), rho0))) < 1e-8


def test_scalars_and_csv(tmp_path):
    gen = assemble(photon_loss_spec(2, 0, 10))
    traj = integrate(gen, coherent_state(1.0, 10, tail_tol=1e-4), 0.5,
                     IntegrateOptions(moments=(1, 2), leakage_tol=None))
    assert traj.columns == ["t", "trace", "min_eig", "leakage", "moment_k=1", "moment_k=2"]
    assert np.all(np.diff(traj.scalars["moment_k=1"]) <= 1e-12)
    text = traj.to_csv(tmp_path / "traj.csv")
    lines = text.splitlines()
    assert lines[0] == "t,trace,min_eig,leakage,moment_k=1,moment_k=2"
    assert len(lines) == len(traj.times) + 1
    assert float(lines[-1].split(",")[0]) == 0.5


def test_weighted_moments_recorded():
    lat = LatticeGeometry.chain(2)
    prof = WeightProfile(lat, 0, 2.0)
    d = 4
    two = assemble_two_mode_loss(d)
    rho = random_density_matrix((d, d), np.random.default_rng(2), support=2)
    traj = integrate(two, rho, 0.3, IntegrateOptions(dims=(d, d), wmoments=((0, 2.0),), profiles={0: prof},
                                                     leakage_tol=None))
    assert traj.scalars["wmoment_v=0_k=2"][0] == pytest.approx(weighted_moment(prof, rho, 2, d))
    assert traj.scalars["wmoment_v=0_k=2"][-1] == pytest.approx(weighted_moment(prof, traj.final, 2, d))


def assemble_two_mode_loss(d):
    from fockqms.gksl import GeneratorSpec
    spec = GeneratorSpec(cutoff=d, modes=2, jumps=(Poly.term("a0 a0"), Poly.term("a1 a1")))
    return assemble(spec)


def test_dump_states(tmp_path):
    gen = assemble(photon_loss_spec(2, 0, 4))
    traj = integrate(gen, fock_state(3, 4), 0.2, IntegrateOptions(checkpoints=(0.1, 0.2), leakage_tol=None))
    traj.dump_states(tmp_path / "s.npz")
    data = np.load(tmp_path / "s.npz")
    assert np.allclose(data["states"][1], traj.final)
    traj.dump_states(tmp_path / "s.json", fmt="json")
    items = json.loads((tmp_path / "s.json").read_text())
    assert [i["t"] for i in items] == [0.1, 0.2]
    with pytest.raises(ValueError):
        traj.dump_states(tmp_path / "s.bin", fmt="bin")


def test_trace_drift_is_reported():
    d = 3
    decay = -0.5 * np.eye(d * d)
    with pytest.raises(TraceDriftError) as info:
        integrate(decay, fock_state(0, d), 1.0)
    assert info.value.t > 0


def test_leakage_is_reported():
    gen = commutator_map(build_poly(Poly.term("ad a"), 10))
    with pytest.raises(LeakageBreach):
        integrate(gen, fock_state(9, 10), 0.1)


def test_bad_inputs():
    gen = assemble(photon_loss_spec(2, 0, 4))
    with pytest.raises(ValueError):
        integrate(gen, fock_state(0, 5), 1.0)
    with pytest.raises(ValueError):
        integrate(gen, fock_state(0, 4), 0.0)


def test_empirical_limit_of_two_photon_loss():
    gen = assemble(photon_loss_spec(2, 0, 8))
    res = empirical_limit(gen, [fock_state(2, 8), fock_state(3, 8)])
    assert res.converged
    assert trace_norm(res.limits[0] - fock_state(0, 8)) < 1e-6
    assert trace_norm(res.limits[1] - fock_state(1, 8)) < 1e-6
    assert np.allclose(res.apply(fock_state(2, 8)), res.limits[0])


def test_empirical_limit_of_zero_generator_and_fallback():
    rho = random_density_matrix(4, np.random.default_rng(3))
    res = empirical_limit(Superoperator.zero(4), [rho])
    assert res.converged and np.allclose(res.limits[0], rho)
    gen = assemble(photon_loss_spec(2, 0, 6))
    fallback = empirical_limit(gen, [fock_state(2, 6)], max_dim=10, stall_tol=1e-9)
    assert fallback.limit_map is None
    assert trace_norm(fallback.limits[0] - fock_state(0, 6)) < 1e-6


def test_empirical_limit_keeps_codespace_states():
    alpha = 1.0
    gen = shifted_photon_dissipator(2, alpha, 30)
    rho = coherent_state(alpha, 30)
    res = empirical_limit(gen, [rho])
    assert trace_norm(res.limits[0] - rho) < 1e-6


def test_norm_1to1_lower_examples():
    gen = assemble(photon_loss_spec(2, 0, 6))
    probes = [fock_state(2, 6)]
    assert norm_1to1_lower(gen, gen, 1.0, probes) == 0
    other = gen + commutator_map(build_poly(Poly.term("a") + Poly.term("ad"), 6))
    single = norm_1to1_lower(gen, other, 0.5, probes)
    direct = trace_norm(apply_propagator(propagator(gen, 0.5), probes[0])
                        - apply_propagator(propagator(other, 0.5), probes[0]))
    assert single == pytest.approx(direct)
    assert norm_1to1_lower(gen, other, 0.5, probes, max_dim=10) == pytest.approx(direct, abs=1e-7)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), ell=st.integers(1, 3))
def test_integration_preserves_state_properties(seed, ell):
    d = 10
    rho = random_density_matrix(d, np.random.default_rng(seed), support=5)
    gen = shifted_photon_dissipator(ell, 0, d)
    traj = integrate(gen, rho, 1.0, IntegrateOptions(leakage_tol=None))
    assert np.max(np.abs(traj.scalars["trace"] - 1)) < 1e-9
    assert np.min(traj.scalars["min_eig"]) > -1e-9
    assert np.allclose(traj.final, traj.final.conj().T)
