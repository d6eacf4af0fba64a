"""Execute scenarios, write CSV/JSON outputs and fan out parameter sweeps."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import catcode as cc
from . import certificates as cert
from .config import ScenarioConfig, _complex, with_override
from .evolve import IntegrateOptions, integrate, norm_1to1_lower
from .fock import Poly, build_poly, random_density_matrix, random_pure_state
from .gksl import (GeneratorSpec, HamiltonianSpec1M, HamiltonianSpec2Local, assemble,
                   assemble_multi_mode, commutator_map)
from .lattice import LatticeGeometry, WeightProfile, weighted_generator_action, weighted_moment

CPTP_TOL = 1e-8


@dataclass
class Report:
    name: str
    experiment: str
    claim: str
    passed: bool
    worst_slack: float
    worst_numeric: float
    files: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def write_csv(path: Path, rows: Sequence[dict]) -> str:
    """RFC-4180 CSV with shortest round-trip float formatting."""
    buf = io.StringIO()
    if rows:
        cols = list(rows[0])
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in
                        (r[c] for c in cols)])
    Path(path).write_text(buf.getvalue(), newline="")
    return Path(path).name


def _rng(config: ScenarioConfig) -> np.random.Generator:
    return np.random.default_rng(config.seed)


def _probes(config: ScenarioConfig, dims) -> dict[str, np.ndarray]:
    rng = _rng(config)
    out = {}
    for p in config.probes:
        out.update(p.build(tuple(dims), rng))
    return out


def _spec(config: ScenarioConfig) -> GeneratorSpec:
    return GeneratorSpec.from_dict(config.model)


def _ham_1m(data) -> HamiltonianSpec1M:
    if not data:
        return HamiltonianSpec1M({})
    return HamiltonianSpec1M({tuple(int(x) for x in key.split(",")): _complex(v) for key, v in data.items()})


# --- experiments --------------------------------------------------------------

def _run_evolve(config: ScenarioConfig, out: Path | None) -> Report:
    spec = _spec(config)
    gen = assemble(spec, config.budget_dim)
    dims = (spec.cutoff,) * spec.modes
    t_end = config.t_end if config.t_end is not None else float(config.times()[-1])
    checkpoints = tuple(float(t) for t in config.times()) if config.time_grid is not None else ()
    opts = IntegrateOptions(dims=dims, moments=tuple(config.moments), checkpoints=checkpoints)
    worst, files, summary = math.inf, [], {}
    for name, rho in _probes(config, dims).items():
        traj = integrate(gen, rho, t_end, opts)
        drift = float(np.max(np.abs(traj.scalars["trace"] - 1)))
        min_eig = float(np.min(traj.scalars["min_eig"]))
        slack = min(CPTP_TOL - drift, min_eig + CPTP_TOL)
        worst = min(worst, slack)
        summary[name] = {"steps": int(len(traj.times)), "max_trace_drift": drift, "min_eig": min_eig,
                         "max_leakage": float(np.max(traj.scalars["leakage"]))}
        if out is not None:
            fname = f"trajectory_{name}.csv"
            traj.to_csv(out / fname)
            files.append(fname)
    return Report(config.name, config.experiment, config.claim, worst >= 0, worst, 0.0, files, summary)


def _run_certify(config: ScenarioConfig, out: Path | None) -> Report:
    spec = _spec(config)
    gen = assemble(spec, config.budget_dim)
    dims = (spec.cutoff,) * spec.modes
    c = config.certificate.build()
    times = config.times()
    rows, files = [], []
    worst, worst_num = math.inf, 0.0
    probes = _probes(config, dims)
    if probes:
        if np.any(times <= 0):
            raise ValueError("regularization checks need positive times")
        opts = IntegrateOptions(dims=dims, moments=(c.k,), checkpoints=tuple(float(t) for t in times))
        for name, rho in probes.items():
            traj = integrate(gen, rho, float(times[-1]), opts)
            mom = traj.scalars[f"moment_k={c.k:g}"]
            for t in times:
                i = int(np.flatnonzero(traj.times == t)[0])
                b = cert.regularization_bound(c, float(t))
                rows.append({"probe": name, "t": float(t), "numeric": float(mom[i]), "bound": b,
                             "slack": b - float(mom[i])})
                worst = min(worst, b - float(mom[i]))
                worst_num = max(worst_num, float(mom[i]))
        if out is not None:
            files.append(write_csv(out / "certify.csv", rows))
    summary = {"certificate": c.to_dict(), "uniform_bound": cert.uniform_bound(c),
               "crossover_time": cert.crossover_time(c)}
    if config.perturbation is not None:
        p = config.perturbation
        h_poly = Poly.from_json(p.hamiltonian)
        h_mat = build_poly(h_poly, spec.cutoff, spec.modes)
        c1 = p.c1 if p.c1 is not None else cert.hamiltonian_relative_constant(h_poly)
        rng = np.random.default_rng(config.seed)
        samples = [random_pure_state(dims, rng, support=p.support) for _ in range(p.samples)]
        prow = []
        for eps in p.eps:
            inputs = cert.PerturbationInputs(c1=c1, c2=p.c2, eps=eps)
            pert = gen + eps * commutator_map(h_mat)
            for t in times:
                num = norm_1to1_lower(gen, pert, float(t), samples)
                b = cert.intermediate_bound(inputs, c, float(t))
                prow.append({"eps": eps, "t": float(t), "numeric": num, "bound": b, "slack": b - num})
                worst = min(worst, b - num)
                worst_num = max(worst_num, num)
        summary["c1"] = c1
        if out is not None:
            files.append(write_csv(out / "perturbation.csv", prow))
    return Report(config.name, config.experiment, config.claim, worst >= 0, worst, worst_num, files, summary)


def _run_catcode(config: ScenarioConfig, out: Path | None) -> Report:
    cfg = config.catcode
    alpha = _complex(cfg.alpha)
    cutoff = cfg.cutoff or cc.cat_cutoff(alpha)
    probes = _probes(config, (cutoff,))
    times = config.times()
    summary = {"cutoff": cutoff}
    if cfg.kind == "convergence":
        res = cc.convergence_experiment(cfg.ell, alpha, probes, times, cutoff=cutoff)
        rows, worst = res.rows, res.worst_slack
        summary.update(fitted_rates=res.fitted_rates, bound_rate=res.bound_rate,
                       limit_converged=res.limit.converged, limit_horizon=res.limit.horizon)
        rate_ok = all(r >= 0.95 * res.bound_rate for r in res.fitted_rates.values())
        summary["rate_ok"] = rate_ok
        passed = worst >= 0 and rate_ok
    elif cfg.kind == "perturbed":
        res = cc.perturbed_code_experiment(cfg.ell, alpha, _ham_1m(cfg.hamiltonian), cfg.eps, times,
                                           probes, cutoff=cutoff)
        rows, worst = res.rows, res.worst_slack
        summary["constants"] = res.constants
        passed = worst >= 0
    else:
        eps = cfg.eps[0] if cfg.eps else 0.0
        res = cc.steady_state_experiment(cfg.ell, alpha, _ham_1m(cfg.hamiltonian), eps, times, probes,
                                         cutoff=cutoff)
        rows, worst = res.rows, res.worst_slack
        summary.update(C_tilde=res.C_tilde, gamma=res.gamma, empirical_constants=True)
        passed = worst >= 0
    files = [write_csv(out / f"catcode_{cfg.kind}.csv", rows)] if out is not None else []
    worst_num = max((r["numeric"] for r in rows), default=0.0)
    return Report(config.name, config.experiment, config.claim, passed, worst, worst_num, files, summary)


def _lognum(x: cert.LogNumber) -> dict:
    return {"mantissa": x.mantissa, "exponent": x.exponent}


def multimode_check(lat: LatticeGeometry, ell: int, k: float, alpha, ham: HamiltonianSpec2Local | None,
                    cutoff: int, kappa: float, center: int, states: dict, mode: str = "degree_restricted",
                    eta: float | None = None, budget_dim: int | None = None):
    """Rows ``lhs <= -rate tr[W^{ell+k-1}(rho)] + mu`` for each state, plus the constants."""
    lam = ham.sup_norm if ham is not None else 0.0
    degree = ham.degree if ham is not None else 0
    consts = cert.multimode_constants(lat, ell, k, lam, kappa, mode=mode, alpha=alpha, eta=eta, degree=degree)
    eta = consts.eta
    gen = assemble_multi_mode(lat, ell, alpha, ham, eta, cutoff, budget_dim)
    prof = WeightProfile(lat, center, kappa)
    rate, mu = float(consts.rate), float(consts.mu)
    rows = []
    for name, rho in states.items():
        lhs = weighted_generator_action(prof, gen, rho, k, cutoff)
        rhs = -rate * weighted_moment(prof, rho, ell + k - 1, cutoff) + mu
        rows.append({"state": name, "lhs": lhs, "rhs": rhs, "slack": rhs - lhs})
    return rows, consts, eta


def _run_multimode(config: ScenarioConfig, out: Path | None) -> Report:
    cfg = config.multimode
    lat = LatticeGeometry.from_dict(cfg.lattice)
    if cfg.hamiltonian is not None:
        ham = HamiltonianSpec2Local.from_dict(cfg.hamiltonian)
    elif cfg.hopping is not None:
        ham = HamiltonianSpec2Local.hopping(lat.edges, _complex(cfg.hopping))
    else:
        ham = None
    dims = (cfg.cutoff,) * len(lat)
    rng = _rng(config)
    states = {f"random{i}": random_density_matrix(dims, rng, support=cfg.support)
              for i in range(cfg.n_states)}
    rows, consts, eta = multimode_check(lat, cfg.ell, cfg.k, _complex(cfg.alpha), ham, cfg.cutoff, cfg.kappa,
                                        cfg.center, states, cfg.mode, cfg.eta, config.budget_dim)
    worst = min(r["slack"] for r in rows)
    summary = {"gamma": _lognum(consts.gamma), "threshold": _lognum(consts.threshold),
               "rate": float(consts.rate), "mu": _lognum(consts.mu), "eta": eta, "mode": consts.mode}
    files = [write_csv(out / "multimode.csv", rows)] if out is not None else []
    worst_num = max(r["lhs"] for r in rows)
    return Report(config.name, config.experiment, config.claim, worst >= 0, worst, worst_num, files, summary)


_RUNNERS = {"evolve": _run_evolve, "certify": _run_certify, "catcode": _run_catcode,
            "multimode": _run_multimode}


def run_scenario(config: ScenarioConfig, out: str | Path | None = None) -> Report:
    """Run one scenario; with an output directory, write CSVs and ``summary.json``."""
    out = out if out is not None else config.out
    out = Path(out) if out is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    report = _RUNNERS[config.experiment](config, out)
    if out is not None:
        report.files.append("summary.json")
        (out / "summary.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True, default=float))
    return report


def _sweep_cell(args):
    raw, out = args
    return run_scenario(ScenarioConfig.model_validate(raw), out)


def sweep(config: ScenarioConfig, parameter: str, values: Sequence, jobs: int = 1,
          out: str | Path | None = None) -> list[Report]:
    """Run ``config`` once per value of the dotted ``parameter``; results keep the input order."""
    out = Path(out) if out is not None else (Path(config.out) if config.out else None)
    cells = []
    for v in values:
        cfg = with_override(config, parameter, v)
        sub = None if out is None else out / f"{parameter}={json.dumps(v)}"
        cells.append((cfg.model_dump(mode="json", exclude_none=True), sub))
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            reports = list(ex.map(_sweep_cell, cells))
    else:
        reports = [_sweep_cell(c) for c in cells]
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        rows = [{"value": json.dumps(v), "passed": r.passed, "worst_slack": r.worst_slack,
                 "worst_numeric": r.worst_numeric} for v, r in zip(values, reports)]
        if rows:
            write_csv(out / "sweep.csv", rows)
    return reports
