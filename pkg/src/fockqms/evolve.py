"""Master-equation integration, propagators and long-time limits."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .fock import leakage, occupations, trace_norm
from .gksl import BudgetError, Superoperator, apply_map

log = logging.getLogger(__name__)

RTOL = 1e-9
ATOL = 1e-11
TRACE_DRIFT_TOL = 1e-6
LEAKAGE_TOL = 1e-6
PROPAGATOR_MAX_DIM = 2500  # dim^2 of the dense superoperator


class IntegrationError(RuntimeError):
    """Integration aborted; ``t`` and ``diagnostic`` describe where and why."""

    def __init__(self, message: str, t: float, diagnostic: dict | None = None):
        super().__init__(f"{message} at t={t!r}")
        self.t = t
        self.diagnostic = diagnostic or {}


class StepSizeUnderflow(IntegrationError):
    pass


class TraceDriftError(IntegrationError):
    pass


class LeakageBreach(IntegrationError):
    pass


# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def _rhs(gen):
    """Right-hand side ``rho -> G(rho)`` for a Superoperator or a vectorised matrix."""
    if isinstance(gen, Superoperator):
        return gen.apply
    m = gen
    return lambda rho: apply_map(m, rho)


def _gen_dim(gen) -> int:
    if isinstance(gen, Superoperator):
        return gen.dim
    return int(round(math.sqrt(gen.shape[0])))


@dataclass
class IntegrateOptions:
    rtol: float = RTOL
    atol: float = ATOL
    h0: float | None = None
    max_steps: int = 2_000_000
    dims: tuple[int, ...] | None = None
    moments: tuple[float, ...] = ()
    moment_mode: int = 0
    wmoments: tuple[tuple[int, float], ...] = ()
    profiles: dict | None = None  # center v -> WeightProfile
    checkpoints: tuple[float, ...] = ()
    trace_tol: float = TRACE_DRIFT_TOL
    leakage_tol: float | None = LEAKAGE_TOL
    track_min_eig: bool = True


@dataclass
class Trajectory:
    times: np.ndarray
    scalars: dict[str, np.ndarray]
    checkpoint_times: list[float]
    states: list[np.ndarray]
    final: np.ndarray
    n_rejected: int = 0
    hermitian_drift: float = 0.0

    def state_at(self, t: float) -> np.ndarray:
        for tc, s in zip(self.checkpoint_times, self.states):
            if tc == t:
                return s
        raise KeyError(f"no checkpoint stored at t={t!r}")

    @property
    def columns(self) -> list[str]:
        return ["t"] + list(self.scalars)

    def to_csv(self, dest=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        cols = [self.times] + list(self.scalars.values())
        for row in zip(*cols):
            w.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if dest is not None:
            Path(dest).write_text(text)
        return text

    def dump_states(self, path, fmt: str = "npz"):
        path = Path(path)
        if fmt == "npz":
            np.savez(path, times=np.array(self.checkpoint_times), states=np.array(self.states))
        elif fmt == "json":
            data = [{"t": t, "re": s.real.tolist(), "im": s.imag.tolist()}
                    for t, s in zip(self.checkpoint_times, self.states)]
            path.write_text(json.dumps(data))
        else:
            raise ValueError(f"unknown state format {fmt!r}")


def _scalar_names(opts: IntegrateOptions) -> list[str]:
    names = ["trace", "min_eig", "leakage"]
    names += [f"moment_k={k:g}" for k in opts.moments]
    names += [f"wmoment_v={v}_k={k:g}" for v, k in opts.wmoments]
    return names


def _observe(rho, opts: IntegrateOptions, dims, occ) -> list[float]:
    pops = np.real(np.diagonal(rho))
    vals = [float(pops.sum()),
            float(np.linalg.eigvalsh(rho)[0]) if opts.track_min_eig else math.nan,
            leakage(rho, dims)]
    n = occ[:, opts.moment_mode]
    vals += [float(np.dot(pops, (n + 1.0) ** k)) for k in opts.moments]
    for v, k in opts.wmoments:
        w = opts.profiles[v].weights
        vals.append(float(sum(wi * np.dot(pops, (occ[:, i] + 1.0) ** k) for i, wi in enumerate(w))))
    return vals


def integrate(gen, rho0, t_end: float, opts: IntegrateOptions | None = None, t0: float = 0.0) -> Trajectory:
    """Adaptive Dormand-Prince 5(4) integration of ``d rho/dt = G(rho)``.

    The state is symmetrised to its Hermitian part after every accepted step.
    Scalars are recorded at every accepted step; full states only at
    ``opts.checkpoints`` (the step size is clipped to land on them exactly)
    and at ``t_end``.
    """
    opts = opts or IntegrateOptions()
    if not t_end > t0:
        raise ValueError("t_end must exceed the start time")
    f = _rhs(gen)
    rho = np.array(rho0, dtype=complex)
    d = rho.shape[0]
    if d != _gen_dim(gen):
        raise ValueError(f"state dimension {d} does not match generator dimension {_gen_dim(gen)}")
    dims = opts.dims or (d,)
    occ = occupations(dims)
    if opts.wmoments and not opts.profiles:
        raise ValueError("weighted moments require weight profiles")
    names = _scalar_names(opts)
    checkpoint_set = {float(c) for c in opts.checkpoints}
    stops = sorted({float(c) for c in opts.checkpoints if t0 < c < t_end} | {float(t_end)})

    times = [t0]
    rows = [_observe(rho, opts, dims, occ)]
    cps, states = [], []
    if any(c == t0 for c in opts.checkpoints):
        cps.append(t0)
        states.append(rho.copy())

    t = t0
    k1 = f(rho)
    scale = opts.atol + opts.rtol * np.abs(rho)
    if opts.h0 is not None:
        h = opts.h0
    else:
        d0 = np.sqrt(np.mean(np.abs(rho / scale) ** 2))
        d1 = np.sqrt(np.mean(np.abs(k1 / scale) ** 2))
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h = min(h, t_end - t0)
    rejected = 0
    drift = 0.0
    stop_idx = 0
    for _ in range(opts.max_steps):
        target = stops[stop_idx]
        landing = t + h >= target - 1e-13 * max(1.0, abs(target))
        if landing:
            h = target - t
        if h < 1e-14 * max(1.0, abs(t)):
            raise StepSizeUnderflow("step size underflow", t, {"h": h})
        ks = [k1]
        for i in range(1, 7):
            yi = rho + h * sum(a * ks[j] for j, a in enumerate(_A[i]) if a != 0)
            ks.append(f(yi))
        y5 = rho + h * sum(b * ks[j] for j, b in enumerate(_B5) if b != 0)
        err = h * sum(e * ks[j] for j, e in enumerate(_E))
        sc = opts.atol + opts.rtol * np.maximum(np.abs(rho), np.abs(y5))
        en = float(np.sqrt(np.mean(np.abs(err / sc) ** 2)))
        if not np.isfinite(en):
            en = math.inf
        if en <= 1.0:
            t = target if landing else t + h
            sym = (y5 + y5.conj().T) / 2
            drift = max(drift, float(np.max(np.abs(y5 - sym))))
            rho = sym
            # first-same-as-last: G commutes with taking the Hermitian part
            k1 = (ks[6] + ks[6].conj().T) / 2
            obs = _observe(rho, opts, dims, occ)
            times.append(t)
            rows.append(obs)
            if abs(obs[0] - 1) > opts.trace_tol:
                raise TraceDriftError(f"trace drift {obs[0] - 1:.3g}", t, {"trace": obs[0]})
            if opts.leakage_tol is not None and obs[2] > opts.leakage_tol:
                raise LeakageBreach(f"leakage {obs[2]:.3g} exceeds {opts.leakage_tol:g}", t,
                                    {"leakage": obs[2]})
            if landing:
                if target in checkpoint_set:
                    cps.append(t)
                    states.append(rho.copy())
                stop_idx += 1
                if stop_idx == len(stops):
                    break
            fac = 0.9 * en ** (-1 / 5) if en > 0 else 5.0
            h = h * min(5.0, max(0.2, fac))
        else:
            rejected += 1
            h = h * max(0.1, 0.9 * en ** (-1 / 5))
    else:
        raise IntegrationError("maximum number of steps exceeded", t)
    if drift > 0:
        log.debug("Hermitian symmetrisation drift up to %.3g", drift)
    arr = np.array(rows)
    scalars = {name: arr[:, i] for i, name in enumerate(names)}
    return Trajectory(np.array(times), scalars, cps, states, rho, rejected, drift)


# --- propagators ----------------------------------------------------------------

def _dense_generator(gen, max_dim: int = PROPAGATOR_MAX_DIM) -> np.ndarray:
    d = _gen_dim(gen)
    if d * d > max_dim:
        raise BudgetError(f"dense superoperator of size {d * d} exceeds {max_dim}")
    if isinstance(gen, Superoperator):
        return gen.dense()
    return gen.toarray() if sp.issparse(gen) else np.asarray(gen)


def propagator(gen, t: float, max_dim: int = PROPAGATOR_MAX_DIM) -> np.ndarray:
    """Dense ``exp(t G)`` acting on row-major ``vec(rho)``."""
    m = _dense_generator(gen, max_dim)
    if t == 0:
        return np.eye(m.shape[0], dtype=complex)
    return sla.expm(t * m)


def apply_propagator(prop: np.ndarray, rho) -> np.ndarray:
    return apply_map(prop, rho)


@dataclass
class FixedPointResult:
    """Long-time map standing in for the projection onto the fixed points."""

    limit_map: np.ndarray | None
    limits: list[np.ndarray]
    residuals: list[float]
    stall: list[float]
    horizon: float
    converged: bool

    def apply(self, rho) -> np.ndarray:
        if self.limit_map is None:
            raise ValueError("no limit map stored (integration fallback)")
        return apply_map(self.limit_map, rho)


def empirical_limit(gen, probes: Sequence[np.ndarray], horizon: float = 2.0 ** 14,
                    stall_tol: float = 1e-10, step: float = 0.5,
                    max_dim: int = PROPAGATOR_MAX_DIM) -> FixedPointResult:
    """Propagate until successive doublings of time change every probe by ``< stall_tol``.

    The map ``exp(T G)`` is built as ``exp(step G)`` followed by repeated
    squaring ``T -> 2T``.  Falls back to :func:`integrate` if the dense
    superoperator is over budget (no map is returned then).
    """
    f = _rhs(gen)
    try:
        m = propagator(gen, step, max_dim)
    except BudgetError:
        return _limit_by_integration(gen, probes, horizon, stall_tol, step)
    cur = [np.asarray(p, dtype=complex) for p in probes]
    t = 0.0
    stall = [math.inf] * len(cur)
    converged = False
    # first step: compare probes with their image at `step`
    while True:
        nxt = [apply_map(m, p) for p in probes]
        t = step if t == 0 else 2 * t
        stall = [trace_norm(a - b) for a, b in zip(nxt, cur)]
        cur = nxt
        if max(stall, default=0.0) < stall_tol:
            converged = True
            break
        if 2 * t > horizon:
            break
        m = m @ m
    residuals = [trace_norm(f(x)) for x in cur]
    return FixedPointResult(m, cur, residuals, stall, t, converged)


def _limit_by_integration(gen, probes, horizon, stall_tol, step) -> FixedPointResult:
    f = _rhs(gen)
    opts = IntegrateOptions(leakage_tol=None, track_min_eig=False)
    limits, stalls = [], []
    converged = True
    for p in probes:
        cur = np.asarray(p, dtype=complex)
        t, dt, s = 0.0, step, math.inf
        while t < horizon:
            nxt = integrate(gen, cur, dt, opts).final
            s = trace_norm(nxt - cur)
            cur, t = nxt, t + dt
            if s < stall_tol:
                break
            dt = min(2 * dt, horizon - t) if horizon > t else dt
        converged &= s < stall_tol
        limits.append(cur)
        stalls.append(s)
    return FixedPointResult(None, limits, [trace_norm(f(x)) for x in limits], stalls, horizon, converged)


def norm_1to1_lower(genA, genB, t: float, samples: Sequence[np.ndarray],
                    max_dim: int = PROPAGATOR_MAX_DIM) -> float:
    """``max_rho ||(exp(tA) - exp(tB))(rho)||_1`` over the sample states.

    A lower estimate of the induced trace norm of the propagator difference.
    """
    if t == 0 or not len(samples):
        return 0.0
    try:
        pa = propagator(genA, t, max_dim)
        pb = propagator(genB, t, max_dim)
        outs = [apply_map(pa, s) - apply_map(pb, s) for s in samples]
    except BudgetError:
        opts = IntegrateOptions(leakage_tol=None, track_min_eig=False)
        outs = [integrate(genA, s, t, opts).final - integrate(genB, s, t, opts).final for s in samples]
    return max(trace_norm(o) for o in outs)
