"""Acceptance criteria as plain functions shared by ``selftest`` and the test suite.

Each ``criterion_N`` returns a :class:`CriterionResult`; runtime limits are part
of the pass condition.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import catcode as cc
from . import certificates as cert
from .evolve import IntegrateOptions, integrate, norm_1to1_lower
from .fock import (Poly, build_poly, coherent_state, fock_state, moment, random_density_matrix,
                   random_pure_state)
from .gksl import HamiltonianSpec2Local, assemble, commutator_map, photon_loss_spec, shifted_photon_dissipator
from .lattice import LatticeGeometry, WeightProfile, normalization, weighted_moment
from .runner import multimode_check


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    seconds: float
    limit: float
    detail: str
    failures: list = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] criterion {self.number}: {self.title} "
                f"({self.seconds:.1f}s / {self.limit:g}s) {self.detail}")


def _finish(number, title, ok, start, limit, detail, failures=()):
    secs = time.perf_counter() - start
    within = secs <= limit
    if not within:
        detail += "; runtime limit exceeded"
    return CriterionResult(number, title, bool(ok and within), secs, limit, detail, list(failures))


# 1 ---------------------------------------------------------------------------

def criterion_1() -> CriterionResult:
    start = time.perf_counter()
    gen = assemble(photon_loss_spec(2, 0, 60))
    traj = integrate(gen, coherent_state(2.0, 60), 5.0, IntegrateOptions())
    drift = float(np.max(np.abs(traj.scalars["trace"] - 1)))
    min_eig = float(np.min(traj.scalars["min_eig"]))
    ok = drift <= 1e-8 and min_eig >= -1e-8
    return _finish(1, "CPTP sanity, two-photon loss, cutoff 60", ok, start, 30,
                   f"steps={len(traj.times)} max|tr-1|={drift:.2e} min_eig={min_eig:.2e}")


# 2 ---------------------------------------------------------------------------

GRONWALL_A = (0.1, 0.5, 1.0, 2.0, 5.0)
GRONWALL_B = (0.1, 0.5, 1.0, 2.0, 5.0)
GRONWALL_P = (1.5, 2.0, 3.0)


def gronwall_worst(a, b, p, y0, t_end=10.0, n=201) -> float:
    """``min_t z(t) - y(t)`` with ``y`` from an independent ODE solve of ``y' = -a y^p + b``."""
    z = cert.gronwall_curve(a, b, p, y0)
    ts = np.linspace(0, t_end, n)
    sol = solve_ivp(lambda t, y: -a * np.maximum(y, 0) ** p + b, (0, t_end), [y0], method="LSODA",
                    t_eval=ts, rtol=1e-12, atol=1e-13)
    return float(np.min(z(ts) - sol.y[0]))


def criterion_2() -> CriterionResult:
    start = time.perf_counter()
    failures, worst = [], math.inf
    for a in GRONWALL_A:
        for b in GRONWALL_B:
            for p in GRONWALL_P:
                eq = (b / a) ** (1 / p)
                for y0 in (0.0, eq, 10 * eq):
                    s = gronwall_worst(a, b, p, y0)
                    worst = min(worst, s)
                    if s < -1e-9:
                        failures.append((a, b, p, y0, s))
    return _finish(2, "comparison curve dominates the ODE solution", not failures, start, 10,
                   f"cells=75 starts=3 worst z-y={worst:.2e} failures={len(failures)}", failures)


# 3 ---------------------------------------------------------------------------

def criterion_3(n_states: int = 1000) -> CriterionResult:
    start = time.perf_counter()
    rng = np.random.default_rng(3)
    orders = (0.5, 1.0, 1.5, 2.0, 3.0)
    worst, failures = math.inf, []
    for i in range(n_states):
        rho = random_density_matrix(20, rng, rank=int(rng.integers(1, 21)))
        m = {q: moment(rho, q) for q in orders}
        for p in orders:
            for q in orders:
                if p >= q:
                    s = m[p] - m[q] ** (p / q)
                    worst = min(worst, s)
                    if s < -1e-10:
                        failures.append(("single", i, p, q, s))
    lat = LatticeGeometry.chain(2)
    prof = WeightProfile(lat, 0, 2.0)
    morders = (1.0, 2.0, 3.0)
    mworst = math.inf
    for i in range(n_states):
        rho = random_density_matrix((6, 6), rng, rank=int(rng.integers(1, 37)))
        w = {q: weighted_moment(prof, rho, q, 6) for q in morders}
        for p in morders:
            for q in morders:
                if p >= q:
                    s = w[p] - w[q] ** (p / q)
                    mworst = min(mworst, s)
                    if s < -1e-10:
                        failures.append(("multi", i, p, q, s))
    return _finish(3, "Jensen inequality for moments, single- and multi-mode", not failures, start, 20,
                   f"states={n_states}+{n_states} worst single={worst:.2e} multi={mworst:.2e}", failures)


# 4 ---------------------------------------------------------------------------

def criterion_4() -> CriterionResult:
    start = time.perf_counter()
    cutoff = 60
    gen = assemble(photon_loss_spec(2, 0, cutoff))
    probes = {"coherent1": coherent_state(1.0, cutoff), "coherent2": coherent_state(2.0, cutoff),
              "fock5": fock_state(5, cutoff)}
    ks = (1, 2, 3)
    grid = tuple(np.round(np.linspace(0.05, 5.0, 34), 10))
    worst, failures, count = math.inf, [], 0
    for name, rho in probes.items():
        traj = integrate(gen, rho, 5.0, IntegrateOptions(moments=ks, checkpoints=grid))
        sel = traj.times >= 0.05
        for k in ks:
            c = cert.two_photon_certificate(k)
            num = traj.scalars[f"moment_k={k}"][sel]
            bound = cert.regularization_bound(c, traj.times[sel])
            slack = bound - num
            count += len(slack)
            i = int(np.argmin(slack))
            worst = min(worst, float(slack[i]))
            if slack[i] < 0:
                failures.append((name, k, float(traj.times[sel][i]), float(slack[i])))
    return _finish(4, "instantaneous regularization of two-photon loss", not failures, start, 120,
                   f"samples={count} worst slack={worst:.3g}", failures)


# 5 ---------------------------------------------------------------------------

def l_diss_slack(ell: int, k: int, alpha: float, rho, cutoff: int) -> float:
    """``(ell/2) mu + 1e-6 - tr[L(rho)(N+1)^k] - (ell/2) tr[rho (N+1)^{k+ell-1}]``."""
    gen = shifted_photon_dissipator(ell, alpha, cutoff, tail_tol=1.0)
    n = np.arange(cutoff)
    lhs = float(np.real(np.diagonal(gen.apply(rho))) @ (n + 1.0) ** k) + ell / 2 * moment(rho, k + ell - 1)
    return ell / 2 * cert.mu_ell(ell, k, alpha).mu + 1e-6 - lhs


def criterion_5(n_states: int = 200) -> CriterionResult:
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    support_max, failures, worst = 10, [], math.inf
    for ell in (2, 3):
        cutoff = support_max + ell + 2
        for k in (1, 2):
            for alpha in (0.0, 1.0):
                for i in range(n_states):
                    support = int(rng.integers(1, support_max + 1))
                    rank = int(rng.integers(1, support + 1))
                    rho = random_density_matrix(cutoff, rng, support=support, rank=rank)
                    s = l_diss_slack(ell, k, alpha, rho, cutoff)
                    worst = min(worst, s)
                    if s < 0:
                        failures.append((ell, k, alpha, i, s))
    return _finish(5, "ell-photon moment inequality on random finite-rank states", not failures, start, 60,
                   f"states={8 * n_states} worst slack={worst:.3g}", failures)


# 6 ---------------------------------------------------------------------------

def criterion_6() -> CriterionResult:
    start = time.perf_counter()
    cutoff, ell = 40, 2
    grid = np.linspace(0.5, 4.0, 15)
    failures, worst, rates = [], math.inf, {}
    for alpha in (1.0, 1.5):
        probes = {"fock3": fock_state(3, cutoff), "coherent_half": coherent_state(alpha / 2, cutoff)}
        res = cc.convergence_experiment(ell, alpha, probes, grid, cutoff=cutoff)
        worst = min(worst, res.worst_slack)
        failures += [(alpha, r["probe"], r["t"], r["slack"]) for r in res.rows if r["slack"] < 0]
        for name, rate in res.fitted_rates.items():
            rates[(alpha, name)] = rate
            if not rate >= 0.95 * math.factorial(ell) / 4:
                failures.append((alpha, name, "rate", rate))
    return _finish(6, "cat convergence below the exponential bound", not failures, start, 180,
                   f"worst slack={worst:.3g} min fitted rate={min(rates.values()):.3g} "
                   f"(needs >= {0.95 * math.factorial(ell) / 4:.3g})", failures)


# 7 ---------------------------------------------------------------------------

def criterion_7(n_probes: int = 50) -> CriterionResult:
    start = time.perf_counter()
    ell, cutoff = 3, 30
    gen = assemble(photon_loss_spec(ell, 0, cutoff))
    h_poly = Poly.term("a") + Poly.term("ad")
    pert = commutator_map(build_poly(h_poly, cutoff))
    c = cert.l_diss_certificate(ell, 1, 0.0)
    c1 = cert.hamiltonian_relative_constant(h_poly)
    rng = np.random.default_rng(7)
    probes = [random_pure_state(cutoff, rng, support=15) for _ in range(n_probes)]
    times = (0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0)
    failures, worst = [], math.inf
    for eps in (0.01, 0.1):
        inputs = cert.PerturbationInputs(c1=c1, eps=eps)
        for t in times:
            num = norm_1to1_lower(gen, gen + eps * pert, t, probes)
            b = cert.intermediate_bound(inputs, c, t)
            worst = min(worst, b - num)
            if num > b:
                failures.append((eps, t, num, b))
    return _finish(7, "finite-time perturbation bound, three-photon loss with drive", not failures, start, 180,
                   f"c1={c1:g} delta={c.delta:g} worst slack={worst:.3g}", failures)


# 8 ---------------------------------------------------------------------------

def criterion_8(n_states: int = 100) -> CriterionResult:
    start = time.perf_counter()
    lat = LatticeGeometry.chain(2)
    ham = HamiltonianSpec2Local.hopping(lat.edges, 1.0)
    cutoff = 12
    rng = np.random.default_rng(8)
    states = {f"random{i}": random_density_matrix((cutoff, cutoff), rng, support=8,
                                                  rank=int(rng.integers(1, 65)))
              for i in range(n_states)}
    rows, consts, _ = multimode_check(lat, 3, 2, 0.0, ham, cutoff, 2.0, 0, states, "degree_restricted")
    failures = [r for r in rows if r["slack"] < 0]
    worst = min(r["slack"] for r in rows)
    return _finish(8, "multi-mode weighted moment inequality, hopping chain", not failures, start, 120,
                   f"mu={consts.mu!r} worst slack={worst:.3g}", failures)


# 9 ---------------------------------------------------------------------------

def tested_lattices():
    lats = [LatticeGeometry.chain(n) for n in (1, 2, 3, 4, 5)]
    lats += [LatticeGeometry.grid(s) for s in ((2, 2), (3, 3), (4, 4), (5, 5))]
    return lats


def normalization_failures(kappas=(1.5, 2.0, 3.0)):
    out = []
    for lat in tested_lattices():
        for v in range(len(lat)):
            for kappa in kappas:
                z = normalization(lat, v, kappa)
                if not z.holds:
                    out.append(("Z_v", len(lat), lat.dim, v, kappa, z.z, z.lower, z.upper))
    return out


def coherent_failures(ks=(1, 2, 3, 4, 5), alphas=np.linspace(0, 3, 61)):
    out = []
    for k in ks:
        for a in alphas:
            exact = cert.coherent_moment_exact(float(a), k)
            bound = cert.coherent_moment_bound(float(a), k)
            if exact > bound:
                out.append(("coherent", k, float(a), exact, bound))
    return out


def criterion_9() -> CriterionResult:
    start = time.perf_counter()
    zf = normalization_failures()
    cf = coherent_failures()
    n_z = sum(len(l) for l in tested_lattices()) * 3
    z_lo = sum(f[5] < f[6] for f in zf)
    return _finish(9, "normalization sandwich and coherent-state moment bound", not (zf or cf), start, 5,
                   f"normalization failures={len(zf)}/{n_z} (below lower: {z_lo}) "
                   f"coherent failures={len(cf)}/305 (max |alpha| failing: "
                   f"{max((f[2] for f in cf), default=0):.2f})", zf + cf)


# 10 --------------------------------------------------------------------------

def g_failures(xs=np.linspace(-5, 100, 421), ks=(1, 2, 3), ells=(1, 2, 3, 4)):
    """Monotonicity is checked for ``k >= 2`` only, the sandwich for all ``k``."""
    mono, sandwich = [], []
    for k in ks:
        for ell in ells:
            for x in xs:
                g = cert.g_ell(ell, k, x)
                if k < 2:
                    pass
                elif g > cert.g_ell(ell + 1, k, x) * (1 + 1e-12):
                    mono.append(("g_ell <= g_ell+1", ell, k, x))
                if k >= 2 and cert.g_ell(ell, k, x - ell) > g * (1 + 1e-12):
                    mono.append(("g_ell(x-ell) <= g_ell(x)", ell, k, x))
                lo, hi = cert.g_ell_lower(ell, k, x), cert.g_ell_upper(ell, k, x)
                if lo > g * (1 + 1e-12):
                    sandwich.append(("g lower", ell, k, float(x), lo, g))
                if g > hi * (1 + 1e-12):
                    sandwich.append(("g upper", ell, k, float(x), g, hi))
    return mono, sandwich


def product_failures(ells=range(1, 7), n=200):
    out = []
    for ell in ells:
        for x in np.linspace(ell, 100, n):
            lo, hi = cert.product_bounds(ell, x)
            v = cert.falling_product(ell, x)
            if not lo * (1 - 1e-12) - 1e-9 <= v <= hi * (1 + 1e-12):
                out.append(("falling", ell, x, lo, v, hi))
            lo, hi = cert.rising_product_bounds(ell, x)
            v = cert.rising_product(ell, x)
            if not lo * (1 - 1e-12) <= v <= hi * (1 + 1e-12):
                out.append(("rising", ell, x, lo, v, hi))
    return out


POLYMAX_CASES = [(1, 1, 2, 1), (2, 3, 3, 1), (0.5, 2, 4, 3), (1.5, 0.7, 5, 2), (1, 10, 3, 2.5), (3, 1, 1.5, 0.5)]


def polymax_failures(cases=POLYMAX_CASES):
    out = []
    for alpha, beta, a, b in cases:
        x_star = (beta * b / (alpha * a)) ** (1 / (a - b))
        xs = np.linspace(0, 5 * x_star + 5, 200001)
        grid_max = float(np.max(-alpha * xs ** a + beta * xs ** b))
        bound = cert.polymax(alpha, beta, a, b)
        if grid_max > bound * (1 + 1e-12):
            out.append(("polymax", alpha, beta, a, b, grid_max, bound))
    return out


def criterion_10() -> CriterionResult:
    start = time.perf_counter()
    mono, sandwich = g_failures()
    prod = product_failures()
    poly = polymax_failures()
    fails = mono + sandwich + prod + poly
    n_lo = sum(f[0] == "g lower" for f in sandwich)
    return _finish(10, "scalar lemmas: g_ell, product bounds, polymax", not fails, start, 5,
                   f"monotonicity failures={len(mono)} g lower failures={n_lo} "
                   f"g upper failures={len(sandwich) - n_lo} "
                   f"product failures={len(prod)} polymax failures={len(poly)}", fails)


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 11)}


def run_all(only=None) -> list[CriterionResult]:
    return [CRITERIA[i]() for i in sorted(only or CRITERIA)]
