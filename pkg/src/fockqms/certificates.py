"""Closed-form moment bounds, perturbation bounds and scalar inequalities.

Everything here is a pure function of model parameters.  Constants that grow
super-exponentially (multi-mode stability) are carried as :class:`LogNumber`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq
from scipy.stats import poisson


# --- log-space numbers -----------------------------------------------------------

@dataclass(frozen=True, order=True)
class LogNumber:
    """Positive real stored as its natural logarithm (``log = -inf`` is zero)."""

    log: float

    @classmethod
    def of(cls, x: float) -> "LogNumber":
        if x < 0:
            raise ValueError("LogNumber holds nonnegative values only")
        return cls(math.log(x) if x > 0 else -math.inf)

    @classmethod
    def factorial(cls, n: int) -> "LogNumber":
        return cls(math.lgamma(n + 1))

    def __mul__(self, other) -> "LogNumber":
        other = other if isinstance(other, LogNumber) else LogNumber.of(other)
        return LogNumber(self.log + other.log)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "LogNumber":
        other = other if isinstance(other, LogNumber) else LogNumber.of(other)
        return LogNumber(self.log - other.log)

    def __add__(self, other) -> "LogNumber":
        other = other if isinstance(other, LogNumber) else LogNumber.of(other)
        return LogNumber(float(np.logaddexp(self.log, other.log)))

    __radd__ = __add__

    def __pow__(self, p: float) -> "LogNumber":
        if self.log == -math.inf:
            return LogNumber(-math.inf if p > 0 else 0.0)
        return LogNumber(self.log * p)

    def __float__(self) -> float:
        if self.log > 709.7:
            return math.inf
        return math.exp(self.log)

    @property
    def exponent(self) -> int:
        if self.log == -math.inf:
            return 0
        return math.floor(self.log / math.log(10))

    @property
    def mantissa(self) -> float:
        if self.log == -math.inf:
            return 0.0
        return 10 ** (self.log / math.log(10) - self.exponent)

    def __repr__(self) -> str:
        return f"LogNumber({self.mantissa:.6g}e{self.exponent})"


# --- comparison curve ---------------------------------------------------------

def gronwall_curve(a: float, b: float, p: float, y0: float) -> Callable:
    """Supersolution ``z(t)`` of ``y' <= -a y^p + b`` started at ``y0``.

    ``z(t) = (max{y0 - e, 0}^{1-p} + a(p-1)t)^{-1/(p-1)} + e`` with
    ``e = (b/a)^{1/p}``, using ``1/0 = inf`` and ``1/inf = 0``.
    """
    if not p > 1:
        raise ValueError(f"exponent p must exceed 1, got {p}")
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    eq = (b / a) ** (1 / p)
    excess = max(y0 - eq, 0.0)

    def z(t):
        t = np.asarray(t, dtype=float)
        if excess == 0:
            return np.full_like(t, eq) if t.ndim else eq
        with np.errstate(divide="ignore"):
            base = excess ** (1 - p) + a * (p - 1) * t
            out = base ** (-1 / (p - 1)) + eq
        return out if t.ndim else float(out)

    z.equilibrium = eq
    return z


# --- single-mode certificates ---------------------------------------------------

@dataclass(frozen=True)
class StabilityCertificate:
    """Inputs of ``tr[G(rho)(N+1)^k] <= -mu tr[rho (N+1)^{k+delta}] + c``."""

    k: float
    delta: float
    mu: float
    c: float
    omega: float | None = None

    def __post_init__(self):
        if not (self.k > 0 and self.delta > 0 and self.mu > 0 and self.c >= 0):
            raise ValueError(f"invalid certificate {self}")

    def to_dict(self) -> dict:
        return {"k": self.k, "delta": self.delta, "mu": self.mu, "c": self.c, "omega": self.omega}

    @classmethod
    def from_dict(cls, d) -> "StabilityCertificate":
        return cls(float(d["k"]), float(d["delta"]), float(d["mu"]), float(d["c"]),
                   None if d.get("omega") is None else float(d["omega"]))


def regularization_bound(cert: StabilityCertificate, t) -> float:
    """``(k/(delta mu t))^{k/delta} + (c/mu)^{k/(k+delta)}``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("regularization bound needs t > 0")
    k, d = cert.k, cert.delta
    out = (k / (d * cert.mu * t)) ** (k / d) + (cert.c / cert.mu) ** (k / (k + d))
    return out if out.ndim else float(out)


def uniform_bound(cert: StabilityCertificate) -> float:
    return max(1.0, cert.c / cert.mu)


def crossover_time(cert: StabilityCertificate) -> float:
    """Time after which the regularization bound drops below the uniform bound.

    Returns ``inf`` if it never does (the stationary term alone exceeds it).
    """
    target = uniform_bound(cert)
    tail = (cert.c / cert.mu) ** (cert.k / (cert.k + cert.delta))
    if tail >= target:
        return math.inf
    # closed form for the inverse of the first term, refined by bisection
    gap = target - tail
    guess = cert.k / (cert.delta * cert.mu) * gap ** (-cert.delta / cert.k)
    f = lambda t: regularization_bound(cert, t) - target
    return brentq(f, guess / 2, guess * 2, xtol=1e-14, rtol=1e-15)


class MuEll(NamedTuple):
    delta: float  # Delta_ell, or the Hamiltonian constant c
    nu: int
    mu: float


def mu_ell(ell: int, k: int, alpha: complex = 0.0, Lambda: float | None = None) -> MuEll:
    """Constants of the ell-photon moment inequality.

    ``tr[L_ell(rho)(N+1)^k] <= -(ell/2) tr[rho (N+1)^{k+ell-1}] + (ell/2) mu``
    with ``mu = Delta^nu (nu-1)^{nu-1} / nu^nu``, ``nu = ell + k - 1`` and
    ``Delta = (ell+1) ell + 4 |alpha|^ell k ell^{k-1} sqrt(ell!)``; passing
    ``Lambda`` adds ``Lambda (2 ell)^k sqrt((2 ell)!)`` for a Hamiltonian of
    degree at most ``2(ell-1)``.
    """
    if ell < 2:
        raise ValueError("ell must be >= 2")
    if k < 1:
        raise ValueError("k must be >= 1")
    delta = (ell + 1) * ell + 4 * abs(alpha) ** ell * k * ell ** (k - 1) * math.sqrt(math.factorial(ell))
    if Lambda is not None:
        if Lambda < 0:
            raise ValueError("Lambda must be nonnegative")
        delta += Lambda * (2 * ell) ** k * math.sqrt(math.factorial(2 * ell))
    nu = ell + k - 1
    mu = delta ** nu * (nu - 1) ** (nu - 1) / nu ** nu
    return MuEll(delta, nu, mu)


def l_diss_certificate(ell: int, k: int, alpha: complex = 0.0, Lambda: float | None = None) -> StabilityCertificate:
    """Certificate ``(k, ell-1, ell/2, (ell/2) mu_k^(ell))`` for ``L[a^ell - alpha^ell]``."""
    m = mu_ell(ell, k, alpha, Lambda)
    return StabilityCertificate(k=k, delta=ell - 1, mu=ell / 2, c=ell / 2 * m.mu)


def two_photon_certificate(k: float) -> StabilityCertificate:
    """``tr[L[a^2](rho)(N+1)^k] <= -tr[rho (N+1)^{k+1}] + 6^{k+1}``."""
    return StabilityCertificate(k=k, delta=1.0, mu=1.0, c=6.0 ** (k + 1))


def l_diss_regularization_printed(ell: int, k: int, alpha: complex, t: float) -> float:
    """The closed form as printed alongside the ell-photon inequality.

    ``(2k / ((ell-1) ell mu t))^{k/(ell-1)} + (1/mu)^{k/(k+ell-1)}``.  Its
    large-time value is below 1, so it cannot bound moments of states; kept
    for comparison with :func:`regularization_bound` of
    :func:`l_diss_certificate`.
    """
    m = mu_ell(ell, k, alpha).mu
    return (2 * k / ((ell - 1) * ell * m * t)) ** (k / (ell - 1)) + (1 / m) ** (k / (k + ell - 1))


# --- perturbation bounds ----------------------------------------------------------

@dataclass(frozen=True)
class PerturbationInputs:
    """Relative bound ``||E(rho)||_1 <= c1 ||rho||_{W^{k,1}} + c2 ||rho||_1`` plus convergence data."""

    c1: float
    c2: float = 0.0
    eps: float = 0.0
    C_tilde: float = 0.0
    gamma: float = 1.0
    k_tilde: float | None = None

    def __post_init__(self):
        if min(self.c1, self.c2, self.eps, self.C_tilde) < 0 or self.gamma <= 0:
            raise ValueError(f"invalid perturbation inputs {self}")


def _require_delta_above_k(cert: StabilityCertificate):
    if not cert.delta > cert.k:
        raise ValueError(f"perturbation bounds need delta > k (delta={cert.delta}, k={cert.k})")


def intermediate_bound(inputs: PerturbationInputs, cert: StabilityCertificate, t) -> float:
    """``eps (c1 t^{1-k/delta} (k/(delta mu))^{k/delta} + c1 t (c/mu)^{k/(k+delta)} + c2 t)``."""
    _require_delta_above_k(cert)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    k, d, mu = cert.k, cert.delta, cert.mu
    out = inputs.eps * (inputs.c1 * t ** (1 - k / d) * (k / (d * mu)) ** (k / d)
                        + inputs.c1 * t * (cert.c / mu) ** (k / (k + d))
                        + inputs.c2 * t)
    return out if out.ndim else float(out)


def c1_hat(inputs: PerturbationInputs, cert: StabilityCertificate) -> float:
    _require_delta_above_k(cert)
    k, d, mu = cert.k, cert.delta, cert.mu
    return inputs.c1 * (k / (d * mu)) ** (k / d) + inputs.c1 * (cert.c / mu) ** (k / (k + d)) + inputs.c2


def c2_hat(inputs: PerturbationInputs, t: float, mode: str = "steady") -> float:
    factor = {"steady": 1.0, "invariant": 2.0}[mode]
    g = inputs.gamma
    return factor * inputs.C_tilde * (math.exp(-g) - math.exp(-t * g)) / g + 1.0


class LongTimeBound(NamedTuple):
    c1_hat: float
    c2_hat: float
    short: float  # t <= 1 branch
    long: float   # t >= 1 branch

    def at(self, t: float) -> float:
        return self.short if t <= 1 else self.long


def longtime_bounds(inputs: PerturbationInputs, cert: StabilityCertificate, t: float,
                    mode: str = "steady", diff_norm: float = 0.0, rho_norm: float = 1.0) -> LongTimeBound:
    """Both branches of the long-time perturbation bound.

    ``diff_norm`` is ``||sigma - rho||_1`` (steady mode) or
    ``||P_perp(sigma - rho)||_1`` (invariant mode).  The invariant mode uses
    ``2 C_tilde`` in ``C2_hat``.
    """
    if mode not in ("steady", "invariant"):
        raise ValueError(f"unknown mode {mode!r}")
    t = float(t)
    if t < 0:
        raise ValueError("t must be nonnegative")
    ch1 = c1_hat(inputs, cert)
    ch2 = c2_hat(inputs, t, mode)
    k, d = cert.k, cert.delta
    short = diff_norm + inputs.eps * t ** (1 - k / d) * ch1 * rho_norm
    long = inputs.C_tilde * math.exp(-inputs.gamma * t) * diff_norm + inputs.eps * ch2 * ch1 * rho_norm
    return LongTimeBound(float(ch1), float(ch2), float(short), float(long))


def hamiltonian_relative_constant(poly) -> float:
    """``c1`` with ``||[H, x]||_1 <= c1 ||x||_{W^{k,1}}`` for ``k >= deg H``.

    Each word of length ``p`` satisfies ``||w (N+1)^{-p/2}|| <= sqrt(p!)``,
    and both sides of the commutator contribute, so ``c1 = 2 sum |c_w| sqrt(p_w!)``.
    """
    return 2.0 * sum(abs(c) * math.sqrt(math.factorial(len(w))) for c, w in poly.terms)


# --- cat code ----------------------------------------------------------------------

def cat_convergence_bound(ell: int, alpha: complex, t) -> float:
    """``6 e^{-t ell!/4} ((1 + |alpha|^ell/sqrt(ell!))^2 (16/((ell-1) mu t)^2 + 1/mu) + 1)``
    with ``mu = mu_ell(ell, ell, alpha).mu``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("cat convergence bound needs t > 0")
    if ell < 2:
        raise ValueError("ell must be >= 2")
    mu = mu_ell(ell, ell, alpha).mu
    fact = math.factorial(ell)
    pref = (1 + abs(alpha) ** ell / math.sqrt(fact)) ** 2
    out = 6 * np.exp(-t * fact / 4) * (pref * (16 / ((ell - 1) * mu * t) ** 2 + 1 / mu) + 1)
    return out if out.ndim else float(out)


def cat_convergence_constants(ell: int, alpha: complex) -> tuple[float, float]:
    """``(C_tilde, gamma)`` with ``cat_convergence_bound(t) <= C_tilde e^{-gamma t}`` for ``t >= 1``."""
    gamma = math.factorial(ell) / 4
    return cat_convergence_bound(ell, alpha, 1.0) * math.exp(gamma), gamma


# --- coherent states ---------------------------------------------------------------

def coherent_moment_bound(alpha_max: float, k: float) -> float:
    """``(2k / ln(k/|alpha|^2 + 1))^k``; ``alpha = 0`` gives the limit 0."""
    if k <= 0:
        raise ValueError("k must be positive")
    a2 = abs(alpha_max) ** 2
    if a2 == 0:
        return 0.0
    return (2 * k / math.log(k / a2 + 1)) ** k


def coherent_moment_exact(alpha: complex, k: float, tail: float = 1e-14) -> float:
    """``sum_n e^{-|alpha|^2} |alpha|^{2n}/n! (n+1)^k`` truncated at Poisson tail ``tail``."""
    mean = abs(alpha) ** 2
    if mean == 0:
        return 1.0
    nmax = int(poisson.isf(tail, mean)) + 10
    n = np.arange(nmax + 1)
    return float(np.sum(poisson.pmf(n, mean) * (n + 1.0) ** k))


# --- scalar lemmas -------------------------------------------------------------------

def _f(x: float, k: float) -> float:
    return (x + 1) ** k if x >= -1 else 0.0


def g_ell(ell: int, k: float, x: float) -> float:
    """Difference ``f(x) - f(x - ell)`` with ``f(x) = (x+1)^k 1_{x >= -1}``, piecewise."""
    if x < 0:
        return 0.0
    if x < ell - 1:
        return _f(x, k)
    return _f(x, k) - _f(x - ell, k)


def g_ell_lower(ell: int, k: float, x: float) -> float:
    if x < 0:
        return 0.0
    if x < ell - 1:
        return (x + 1) ** k
    return ell * (x + 1) ** (k - 1)


def g_ell_upper(ell: int, k: float, x: float) -> float:
    """Upper expression ``(k ell/2)(1 + 1_{k=1})(x+1)^{k-1}`` for ``x >= ell-1``.

    Only valid for ``k = 1`` on that range; for ``k >= 2`` the difference grows
    like ``k ell (x+1)^{k-1}``, twice the stated coefficient.
    """
    if x < 0:
        return 0.0
    if x < ell - 1:
        return (x + 1) ** k
    return k * ell / 2 * (1 + (k == 1)) * (x + 1) ** (k - 1)


def polymax(alpha: float, beta: float, a: float, b: float) -> float:
    """Bound ``(beta b/(alpha a))^{b/(a-b)} beta`` on ``max_{X>=0} -alpha X^a + beta X^b``."""
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    if not a > b > 0:
        raise ValueError("need a > b > 0")
    return (beta * b / (alpha * a)) ** (b / (a - b)) * beta


def falling_product(ell: int, x: float) -> float:
    """``((x+1) - ell) ... ((x+1) - 1)``."""
    return float(np.prod([(x + 1) - j for j in range(1, ell + 1)]))


def rising_product(ell: int, x: float) -> float:
    """``(x+1) ... (x+ell)``."""
    return float(np.prod([x + j for j in range(1, ell + 1)]))


def _check_product_domain(ell: int, x: float):
    if ell < 0 or x < ell:
        raise ValueError(f"product bounds need x >= ell >= 0 (ell={ell}, x={x})")


def product_bounds(ell: int, x: float) -> tuple[float, float]:
    """Bounds ``((x+1)^ell - (ell+1)ell/2 (x+1)^{ell-1}, (x+1)^ell)`` on :func:`falling_product`."""
    _check_product_domain(ell, x)
    return (x + 1) ** ell - (ell + 1) * ell / 2 * (x + 1) ** (ell - 1), (x + 1) ** ell


def rising_product_bounds(ell: int, x: float) -> tuple[float, float]:
    """Bounds ``((x+1)^ell, ell! (x+1)^ell)`` on :func:`rising_product`."""
    _check_product_domain(ell, x)
    return (x + 1) ** ell, math.factorial(ell) * (x + 1) ** ell


# --- multi-mode constants --------------------------------------------------------------

class MultimodeConstants(NamedTuple):
    gamma: LogNumber       # Gamma_{ell,k}
    threshold: LogNumber   # eta_k (with_eta) or C (degree_restricted)
    rate: LogNumber        # coefficient in front of -tr[W^{ell+k-1}]
    mu: LogNumber          # additive constant
    mode: str
    eta: float = 1.0       # dissipation strength the constants refer to


def gamma_lk(ell: int, k: float, lambda_sup: float) -> LogNumber:
    """``4 k (ell-1) ((2 ell+1)!)^3 binom(2 ell+2, 4) ||lambda||_inf``."""
    return (LogNumber.of(4 * k * (ell - 1) * math.comb(2 * ell + 2, 4) * lambda_sup)
            * LogNumber.factorial(2 * ell + 1) ** 3)


def multimode_constants(lat, ell: int, k: float, lambda_sup: float, kappa: float,
                        mode: str = "degree_restricted", c: float | None = None,
                        alpha: complex = 0.0, Lambda: float | None = None,
                        eta: float | None = None, degree: int | None = None) -> MultimodeConstants:
    """Constants of the multi-mode moment inequality on lattice ``lat``.

    ``c`` is the single-site constant (defaults to ``mu_ell(ell, k, alpha,
    Lambda).delta``).  In ``with_eta`` mode ``eta`` defaults to twice the
    threshold ``eta_k`` and the returned rate is ``C/2`` with
    ``C = eta ell/2 - 2 D Gamma (1 + 2 D e^kappa)``.  In
    ``degree_restricted`` mode the rate is ``ell/4`` and
    ``mu = C (4C/ell)^{ell+k-2}`` with ``C = 2 D Gamma (1 + 2 D e^kappa) + (ell/2) c``.
    """
    if not kappa > 1:
        raise ValueError("kappa must exceed 1")
    if ell < 2:
        raise ValueError("ell must be >= 2")
    if k < 2:
        raise ValueError("multi-mode inequality needs k >= 2")
    limit = {"with_eta": 2 * (ell - 1), "degree_restricted": 2 * (ell - 2)}.get(mode)
    if limit is None:
        raise ValueError(f"unknown mode {mode!r}")
    if degree is not None and degree > limit:
        raise ValueError(f"Hamiltonian degree {degree} exceeds {limit} in {mode} mode")
    if c is None:
        c = mu_ell(ell, int(k), alpha, Lambda).delta
    D = lat.dim
    gam = gamma_lk(ell, k, lambda_sup)
    coupling = gam * (2 * D * (1 + 2 * D * math.exp(kappa)))
    b = ell + k - 2
    if mode == "with_eta":
        eta_k = coupling * (2 / ell)
        if eta is None:
            eta = 2 * float(eta_k) if gam.log > -math.inf else 1.0
        if not LogNumber.of(eta) > eta_k:
            raise ValueError(f"eta={eta} does not exceed the threshold {eta_k!r}")
        big_c = eta * ell / 2 - float(coupling)
        beta = max(eta, 1.0) * c * ell / 2
        mu = LogNumber.of(beta) * (LogNumber.of(2 * beta) / big_c) ** b
        return MultimodeConstants(gam, eta_k, LogNumber.of(big_c / 2), mu, mode, float(eta))
    big_c = coupling + ell / 2 * c
    mu = big_c * (big_c * (4 / ell)) ** b
    return MultimodeConstants(gam, big_c, LogNumber.of(ell / 4), mu, mode)
