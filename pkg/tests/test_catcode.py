import math

import numpy as np
import pytest

from fockqms import catcode as cc
from fockqms.fock import coherent_ket, coherent_state, fock_state
from fockqms.gksl import HamiltonianSpec1M


def test_overlap_formula():
    assert cc.coherent_overlap(2, -2) == pytest.approx(math.exp(-8))
    a, b = 0.3 + 0.4j, -0.2 + 1j
    numeric = np.vdot(coherent_ket(a, 40), coherent_ket(b, 40))
    assert cc.coherent_overlap(a, b) == pytest.approx(numeric, abs=1e-10)


def test_cat_cutoff_rule():
    assert cc.cat_cutoff(1) == 29
    assert cc.cat_cutoff(1.5) == math.ceil(2.25 + 12 + 20)


def test_single_coherent_codespace():
    code = cc.build_codespace(1, 1.0, 29)
    assert np.allclose(code.projector, coherent_state(1.0, 29))


def test_projection_idempotent_and_kills_orthogonal():
    code = cc.build_codespace(2, 1.5, cc.cat_cutoff(1.5))
    rho = coherent_state(1.5, code.cutoff)
    assert np.allclose(cc.project_codespace(code, rho), rho, atol=1e-10)
    x = np.eye(code.cutoff) - code.projector
    assert np.allclose(cc.project_codespace(code, x), 0, atol=1e-10)
    with pytest.raises(ValueError):
        cc.project_codespace(code, np.eye(3))


def test_ill_conditioned_codespace():
    with pytest.raises(cc.IllConditionedCodespace):
        cc.build_codespace(2, 0.0, 10)


def test_codespace_is_fixed_by_dissipation():
    for ell, alpha in ((2, 1.0), (2, 1.5), (3, 1.0)):
        code = cc.build_codespace(ell, alpha, cc.cat_cutoff(alpha))
        assert cc.codespace_invariance(code) < 1e-6


def test_fit_decay_rate():
    t = np.linspace(0.5, 4, 15)
    assert cc.fit_decay_rate(t, 3 * np.exp(-1.7 * t)) == pytest.approx(1.7)
    assert math.isnan(cc.fit_decay_rate(t, np.zeros_like(t)))


def test_grid_must_be_uniform():
    with pytest.raises(ValueError):
        cc.convergence_experiment(2, 1.0, {"f": fock_state(0, 29)}, [0.5, 0.7, 1.5])


def test_convergence_small_run():
    alpha, cutoff = 1.0, 29
    probes = {"fock3": fock_state(3, cutoff), "code": coherent_state(alpha, cutoff)}
    res = cc.convergence_experiment(2, alpha, probes, np.arange(1, 5) * 0.5, cutoff=cutoff)
    assert res.passed
    code_rows = [r for r in res.rows if r["probe"] == "code"]
    assert max(r["numeric"] for r in code_rows) < 1e-6
    # on the codespace the HS projection and the long-time limit agree
    assert max(r["numeric_hs"] for r in code_rows) < 1e-6
    assert res.bound_rate == pytest.approx(0.5)


def test_perturbed_experiment_without_perturbation_is_zero():
    cutoff = 20
    res = cc.perturbed_code_experiment(3, 0.5, HamiltonianSpec1M.drive(1.0), [0.0], [0.5, 1.5],
                                       {"vac": fock_state(0, cutoff)}, cutoff=cutoff)
    assert all(r["numeric"] < 1e-12 and r["full_numeric"] < 1e-12 for r in res.rows)
    assert res.constants["c1"] == pytest.approx(4)


def test_perturbed_experiment_rejects_high_degree():
    with pytest.raises(ValueError):
        cc.perturbed_code_experiment(3, 0.5, HamiltonianSpec1M({(1, 1): 1.0}), [0.1], [1.0],
                                     {"vac": fock_state(0, 20)}, cutoff=20)


def test_steady_state_small_run():
    cutoff = 20
    res = cc.steady_state_experiment(3, 0.5, HamiltonianSpec1M.drive(1.0), 0.01, np.arange(1, 7) * 0.5,
                                     {"vac": fock_state(0, cutoff)}, cutoff=cutoff)
    assert res.gamma > 0 and res.C_tilde > 0
    assert res.worst_slack >= 0
