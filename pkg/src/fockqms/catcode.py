"""Cat-code experiments: codespace, convergence and perturbed dynamics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import certificates as cert
from .evolve import FixedPointResult, empirical_limit, propagator
from .fock import DEFAULT_TAIL_TOL, build_poly, coherent_ket, trace_norm
from .gksl import (HamiltonianSpec1M, Superoperator, apply_map, commutator_map, dissipator,
                   shifted_photon_dissipator, shifted_photon_jump)

MAX_CONDITION = 1e10
FIT_FRACTION = 0.4
FIT_FLOOR = 1e-13


class IllConditionedCodespace(ValueError):
    def __init__(self, condition: float, ell: int, alpha: complex):
        super().__init__(f"Gram matrix condition number {condition:.3g} for ell={ell}, "
                         f"|alpha|={abs(alpha):.3g}; increase |alpha| or lower ell")
        self.condition = condition


def cat_cutoff(alpha: complex) -> int:
    """Cutoff rule ``D >= |alpha|^2 + 8|alpha| + 20``."""
    a = abs(alpha)
    return math.ceil(a * a + 8 * a + 20)


def coherent_overlap(a: complex, b: complex) -> complex:
    """``<a|b> = exp(-(|a|^2 + |b|^2)/2 + conj(a) b)``."""
    return complex(np.exp(-(abs(a) ** 2 + abs(b) ** 2) / 2 + np.conj(a) * b))


@dataclass
class Codespace:
    ell: int
    alpha: complex
    cutoff: int
    amplitudes: np.ndarray
    gram: np.ndarray          # analytic overlaps <alpha_i|alpha_j>
    condition: float
    kets: np.ndarray          # cutoff x ell, truncated coherent states
    onb: np.ndarray           # cutoff x ell, orthonormal basis of their span

    @property
    def projector(self) -> np.ndarray:
        return self.onb @ self.onb.conj().T

    def basis(self) -> list[np.ndarray]:
        """HS-orthonormal operator basis ``|q_i><q_j|`` of the codespace (``ell^2`` elements)."""
        q = self.onb
        return [np.outer(q[:, i], q[:, j].conj()) for i in range(self.ell) for j in range(self.ell)]


def build_codespace(ell: int, alpha: complex, cutoff: int, max_condition: float = MAX_CONDITION,
                    tail_tol: float = DEFAULT_TAIL_TOL) -> Codespace:
    """Codespace spanned by ``|alpha_i><alpha_j|`` with ``alpha_j = alpha e^{2 pi i j/ell}``."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    amps = alpha * np.exp(2j * np.pi * np.arange(ell) / ell)
    gram = np.array([[coherent_overlap(a, b) for b in amps] for a in amps])
    ev = np.linalg.eigvalsh(gram)
    condition = math.inf if ev[0] <= 0 else float(ev[-1] / ev[0])
    if condition > max_condition:
        raise IllConditionedCodespace(condition, ell, alpha)
    kets = np.column_stack([coherent_ket(a, cutoff, tail_tol) for a in amps])
    # Loewdin orthonormalisation of the truncated kets
    g = kets.conj().T @ kets
    w, v = np.linalg.eigh(g)
    onb = kets @ (v @ np.diag(w ** -0.5) @ v.conj().T)
    return Codespace(ell, alpha, cutoff, amps, gram, condition, kets, onb)


def project_codespace(code: Codespace, x) -> np.ndarray:
    """Hilbert-Schmidt orthogonal projection ``x -> Pi x Pi`` onto the codespace."""
    x = np.asarray(x)
    if x.shape != (code.cutoff, code.cutoff):
        raise ValueError(f"operator shape {x.shape} does not match cutoff {code.cutoff}")
    pi = code.projector
    return pi @ x @ pi


def fit_decay_rate(t, err, fraction: float = FIT_FRACTION, floor: float = FIT_FLOOR) -> float:
    """Negative slope of a least-squares line through ``log err`` over the last ``fraction`` of ``t``.

    Points below ``floor`` (numerical noise) are dropped; returns ``nan`` with
    fewer than two usable points.
    """
    t = np.asarray(t, dtype=float)
    err = np.asarray(err, dtype=float)
    start = int(math.floor(len(t) * (1 - fraction)))
    tt, ee = t[start:], err[start:]
    keep = ee > floor
    if keep.sum() < 2:
        return math.nan
    slope = np.polyfit(tt[keep], np.log(ee[keep]), 1)[0]
    return float(-slope)


def _grid_states(prop_dt, rho, n: int) -> list[np.ndarray]:
    out = []
    cur = np.asarray(rho, dtype=complex)
    for _ in range(n):
        cur = apply_map(prop_dt, cur)
        out.append(cur)
    return out


def _check_uniform(t_grid) -> tuple[np.ndarray, float]:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 1 or t[0] <= 0:
        raise ValueError("time grid must be a nonempty list of positive times")
    dt = t[0] if len(t) == 1 else t[1] - t[0]
    steps = t / dt
    if not np.allclose(steps, np.round(steps), rtol=0, atol=1e-9):
        raise ValueError("time grid must be a uniform multiple of its spacing")
    return t, float(dt)


@dataclass
class ConvergenceResult:
    rows: list[dict]
    fitted_rates: dict[str, float]
    worst_slack: float
    limit: FixedPointResult
    bound_rate: float

    @property
    def passed(self) -> bool:
        return self.worst_slack >= 0


def convergence_experiment(ell: int, alpha: complex, probes: Mapping[str, np.ndarray], t_grid,
                           cutoff: int | None = None, stall_tol: float = 1e-11,
                           code: Codespace | None = None) -> ConvergenceResult:
    """Numeric ``||rho(t) - P(rho)||_1`` under ``L[a^ell - alpha^ell]`` against the analytic bound.

    ``P`` is the long-time limit of the semigroup; when the HS projection is
    available (``code`` given or buildable) its distance is reported as well.
    """
    cutoff = cutoff or cat_cutoff(alpha)
    t, dt = _check_uniform(t_grid)
    gen = shifted_photon_dissipator(ell, alpha, cutoff)
    names = list(probes)
    states = [np.asarray(probes[n], dtype=complex) for n in names]
    lim = empirical_limit(gen, states, stall_tol=stall_tol)
    if code is None and alpha != 0:
        try:
            code = build_codespace(ell, alpha, cutoff)
        except IllConditionedCodespace:
            code = None
    step = propagator(gen, dt)
    n = int(round(t[-1] / dt))
    bounds = cert.cat_convergence_bound(ell, alpha, t)
    rows, rates = [], {}
    worst = math.inf
    for name, rho, p_rho in zip(names, states, lim.limits):
        traj = _grid_states(step, rho, n)
        hs = None if code is None else project_codespace(code, rho)
        errs = []
        for ti, b in zip(t, bounds):
            r = traj[int(round(ti / dt)) - 1]
            e = trace_norm(r - p_rho)
            errs.append(e)
            row = {"probe": name, "t": float(ti), "numeric": e, "bound": float(b), "slack": float(b) - e}
            if hs is not None:
                row["numeric_hs"] = trace_norm(r - hs)
            rows.append(row)
            worst = min(worst, float(b) - e)
        rates[name] = fit_decay_rate(t, errs)
    return ConvergenceResult(rows, rates, worst, lim, math.factorial(ell) / 4)


@dataclass
class PerturbedCodeResult:
    rows: list[dict]
    worst_slack: float
    constants: dict

    @property
    def passed(self) -> bool:
        return self.worst_slack >= 0


def perturbed_code_experiment(ell: int, alpha: complex, ham: HamiltonianSpec1M, eps_list: Sequence[float],
                              t_grid, probes: Mapping[str, np.ndarray], cutoff: int | None = None,
                              stall_tol: float = 1e-11) -> PerturbedCodeResult:
    """Out-of-codespace error ``||P_perp(e^{tL}(rho) - e^{t(L + eps E)}(rho))||_1``, ``E = -i[H, .]``.

    Compared with the invariant-subset bound using the ell-photon certificate
    at ``k = max(d_H, 1)``, ``delta = ell - 1`` and convergence constants read
    off the cat convergence bound (valid for ``t >= 1``).  The finite-time
    bound on the full difference is reported alongside.
    """
    ham.check_degree(ell, perturbation=True)
    cutoff = cutoff or cat_cutoff(alpha)
    t = np.asarray(t_grid, dtype=float)
    gen = shifted_photon_dissipator(ell, alpha, cutoff)
    h_poly = ham.to_poly()
    h_mat = build_poly(h_poly, cutoff)
    pert = commutator_map(h_mat)
    names = list(probes)
    states = [np.asarray(probes[n], dtype=complex) for n in names]
    lim = empirical_limit(gen, states, stall_tol=stall_tol)
    k = max(ham.degree, 1)
    c = cert.l_diss_certificate(ell, k, alpha)
    c_tilde, gamma = cert.cat_convergence_constants(ell, alpha)
    c1 = cert.hamiltonian_relative_constant(h_poly)
    rows, worst = [], math.inf
    for eps in eps_list:
        inputs = cert.PerturbationInputs(c1=c1, eps=float(eps), C_tilde=c_tilde, gamma=gamma)
        pert_gen = gen + float(eps) * pert if eps else gen
        for ti in t:
            pa = propagator(gen, ti)
            pb = propagator(pert_gen, ti)
            b = cert.longtime_bounds(inputs, c, ti, mode="invariant").at(ti)
            fin = cert.intermediate_bound(inputs, c, ti)
            for name, rho in zip(names, states):
                diff = apply_map(pa, rho) - apply_map(pb, rho)
                out = diff - lim.apply(diff)
                e = trace_norm(out)
                rows.append({"eps": float(eps), "probe": name, "t": float(ti), "numeric": e,
                             "bound": b, "slack": b - e, "full_numeric": trace_norm(diff),
                             "finite_time_bound": fin})
                worst = min(worst, b - e)
    constants = {"k": k, "delta": c.delta, "mu": c.mu, "c": c.c, "c1": c1, "C_tilde": c_tilde, "gamma": gamma}
    return PerturbedCodeResult(rows, worst, constants)


@dataclass
class SteadyStateResult:
    rows: list[dict]
    C_tilde: float
    gamma: float
    worst_slack: float


def steady_state_experiment(ell: int, alpha: complex, ham: HamiltonianSpec1M, eps: float, t_grid,
                            probes: Mapping[str, np.ndarray], cutoff: int | None = None,
                            certificate: cert.StabilityCertificate | None = None) -> SteadyStateResult:
    """``L[a - alpha] + L[a^ell - alpha^ell]`` converging to ``|alpha><alpha|``.

    Convergence constants ``C_tilde``, ``gamma`` are fitted from the
    simulation (they are empirical, not analytic) and fed into the
    steady-state perturbation bound with ``sigma = rho``.  Without an explicit
    ``certificate`` the ell-photon certificate at ``k = max(d_H, 1)`` is used
    for the Sobolev constants.
    """
    cutoff = cutoff or cat_cutoff(alpha)
    t, dt = _check_uniform(t_grid)
    gen = dissipator(shifted_photon_jump(1, alpha, cutoff)) + shifted_photon_dissipator(ell, alpha, cutoff)
    steady = np.outer(coherent_ket(alpha, cutoff), coherent_ket(alpha, cutoff).conj())
    names = list(probes)
    states = [np.asarray(probes[n], dtype=complex) for n in names]
    step = propagator(gen, dt)
    n = int(round(t[-1] / dt))
    errs = np.array([[trace_norm(r - steady) for r in _grid_states(step, rho, n)] for rho in states])
    errs = errs[:, [int(round(ti / dt)) - 1 for ti in t]]
    rates = [fit_decay_rate(t, e) for e in errs]
    gamma = float(np.nanmin(rates)) if np.any(np.isfinite(rates)) else 1.0
    gamma = max(gamma, 1e-6)
    c_tilde = float(np.max(errs * np.exp(gamma * t)))
    k = max(ham.degree, 1)
    c = certificate or cert.l_diss_certificate(ell, k, alpha)
    h_poly = ham.to_poly()
    c1 = cert.hamiltonian_relative_constant(h_poly)
    inputs = cert.PerturbationInputs(c1=c1, eps=eps, C_tilde=c_tilde, gamma=gamma)
    pert_gen = gen + eps * commutator_map(build_poly(h_poly, cutoff)) if eps else gen
    rows, worst = [], math.inf
    for ti in t:
        pa, pb = propagator(gen, ti), propagator(pert_gen, ti)
        b = cert.longtime_bounds(inputs, c, ti, mode="steady").at(ti)
        for name, rho in zip(names, states):
            e = trace_norm(apply_map(pa, rho) - apply_map(pb, rho))
            rows.append({"probe": name, "t": float(ti), "numeric": e, "bound": b, "slack": b - e})
            worst = min(worst, b - e)
    return SteadyStateResult(rows, c_tilde, gamma, worst)


def codespace_invariance(code: Codespace, gen: Superoperator | None = None) -> float:
    """``max ||L_ell(x)||_1`` over the HS basis of the codespace."""
    gen = gen or shifted_photon_dissipator(code.ell, code.alpha, code.cutoff)
    return max(trace_norm(gen.apply(x)) for x in code.basis())
