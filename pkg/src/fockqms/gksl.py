"""GKSL generators assembled from polynomial specifications.

A :class:`Superoperator` stores the Hamiltonian and weighted jump operators of
``rho -> -i[H, rho] + sum_j r_j (L_j rho L_j^dag - 1/2 {L_j^dag L_j, rho})``.
Two realisations are derived lazily: a matrix-free :meth:`Superoperator.apply`
and the vectorised matrix :attr:`Superoperator.matrix` acting on
``rho.reshape(-1)`` (row-major), for which ``vec(A X B) = (A kron B^T) vec(X)``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .fock import LeakageError, Poly, build_poly, ladder_ops, poisson_tail, required_cutoff, \
    DEFAULT_TAIL_TOL, embed

HERMITIAN_WARN_TOL = 1e-12


class BudgetError(RuntimeError):
    """Raised when a model exceeds the configured Hilbert-space budget."""


def check_budget(modes: int, cutoff: int, budget_dim: int | None = None) -> int:
    """Return the total dimension ``cutoff**modes`` or raise :class:`BudgetError`.

    Without an explicit ``budget_dim`` the default rule allows a single mode,
    two modes up to cutoff 24 and three modes up to cutoff 14.
    """
    total = cutoff ** modes
    if budget_dim is not None:
        ok = total <= budget_dim
    else:
        ok = modes == 1 or (modes == 2 and cutoff <= 24) or (modes == 3 and cutoff <= 14)
    if not ok:
        limit = f"budget_dim={budget_dim}" if budget_dim is not None else "default budget"
        raise BudgetError(f"{modes} modes at cutoff {cutoff} (dim {total}) exceed {limit}")
    return total


def _csr(op):
    if sp.issparse(op):
        return sp.csr_array(op, dtype=complex)
    return sp.csr_array(np.asarray(op, dtype=complex))


def hermitian_part(h):
    h = _csr(h)
    sym = sp.csr_array((h + h.conj().T) / 2)
    diff = abs(h - sym).max() if h.nnz else 0.0
    if diff > HERMITIAN_WARN_TOL:
        warnings.warn(f"Hamiltonian symmetrised, adjustment {diff:.3g}", stacklevel=3)
    return sym


class Superoperator:
    """Linear GKSL-form map on ``dim x dim`` operators."""

    def __init__(self, dim: int, hamiltonian=None, jumps: Sequence[tuple[float, object]] = ()):
        self.dim = int(dim)
        self.hamiltonian = None if hamiltonian is None else hermitian_part(hamiltonian)
        self.jumps = tuple((float(r), _csr(L)) for r, L in jumps)
        for op in ([self.hamiltonian] if self.hamiltonian is not None else []) + [L for _, L in self.jumps]:
            if op.shape != (self.dim, self.dim):
                raise ValueError(f"operator shape {op.shape} does not match dim {self.dim}")

    @classmethod
    def zero(cls, dim: int) -> "Superoperator":
        return cls(dim)

    def __add__(self, other: "Superoperator") -> "Superoperator":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        if self.hamiltonian is None:
            h = other.hamiltonian
        elif other.hamiltonian is None:
            h = self.hamiltonian
        else:
            h = self.hamiltonian + other.hamiltonian
        return Superoperator(self.dim, h, self.jumps + other.jumps)

    def __rmul__(self, scalar: float) -> "Superoperator":
        scalar = float(scalar)
        h = None if self.hamiltonian is None else scalar * self.hamiltonian
        return Superoperator(self.dim, h, tuple((scalar * r, L) for r, L in self.jumps))

    @cached_property
    def _effective(self):
        # K = -iH - 1/2 sum r L^dag L, so that G(rho) = K rho + rho K^dag + sum r L rho L^dag
        k = sp.csr_array((self.dim, self.dim), dtype=complex)
        if self.hamiltonian is not None:
            k = k - 1j * self.hamiltonian
        for r, L in self.jumps:
            k = k - 0.5 * r * (L.conj().T @ L)
        return sp.csr_array(k)

    def apply(self, rho):
        """Matrix-free action on a (dense) operator."""
        rho = np.asarray(rho.toarray() if sp.issparse(rho) else rho, dtype=complex)
        if rho.shape != (self.dim, self.dim):
            raise ValueError(f"operand shape {rho.shape} does not match dim {self.dim}")
        k = self._effective
        out = k @ rho + (k @ rho.conj().T).conj().T
        for r, L in self.jumps:
            out = out + r * (L @ (L @ rho.conj().T).conj().T)
        return out

    __call__ = apply

    @cached_property
    def matrix(self):
        """Sparse ``dim^2 x dim^2`` matrix acting on row-major ``vec(rho)``."""
        eye = sp.identity(self.dim, dtype=complex, format="csr")
        k = self._effective
        m = sp.kron(k, eye, format="csr") + sp.kron(eye, k.conj(), format="csr")
        for r, L in self.jumps:
            m = m + r * sp.kron(L, L.conj(), format="csr")
        return sp.csr_array(m)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def apply_map(m, rho):
    """Apply a vectorised map (dense or sparse ``d^2 x d^2``) to ``rho``."""
    rho = np.asarray(rho)
    return (m @ rho.reshape(-1)).reshape(rho.shape)


def dissipator(L, rate: float = 1.0) -> Superoperator:
    L = _csr(L)
    if L.shape[0] != L.shape[1]:
        raise ValueError("jump operator must be square")
    return Superoperator(L.shape[0], jumps=[(rate, L)])


def commutator_map(H) -> Superoperator:
    """``rho -> -i[H, rho]``."""
    H = _csr(H)
    return Superoperator(H.shape[0], hamiltonian=H)


def _photon_guard(alpha: complex, cutoff: int, tail_tol: float):
    tail = poisson_tail(abs(alpha) ** 2, cutoff)
    if tail > tail_tol:
        raise LeakageError(
            f"|alpha|={abs(alpha):.3g} leaks {tail:.3g} at cutoff {cutoff}; "
            f"need cutoff >= {required_cutoff(abs(alpha) ** 2, tail_tol)}"
        )


def shifted_photon_jump(ell: int, alpha: complex, cutoff: int,
                        tail_tol: float = DEFAULT_TAIL_TOL):
    """``a^ell - alpha^ell`` on a single mode."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    _photon_guard(alpha, cutoff, tail_tol)
    a = ladder_ops(cutoff)[0]
    jump = sp.identity(cutoff, dtype=complex, format="csr")
    for _ in range(ell):
        jump = jump @ a
    return sp.csr_array(jump - (alpha ** ell) * sp.identity(cutoff, dtype=complex, format="csr"))


def shifted_photon_dissipator(ell: int, alpha: complex, cutoff: int,
                              tail_tol: float = DEFAULT_TAIL_TOL) -> Superoperator:
    """``L[a^ell - alpha^ell]`` on a single mode."""
    return dissipator(shifted_photon_jump(ell, alpha, cutoff, tail_tol))


# --- specifications -----------------------------------------------------------

@dataclass(frozen=True)
class GeneratorSpec:
    """Hamiltonian and jump polynomials on ``modes`` modes of equal cutoff."""

    cutoff: int
    modes: int = 1
    hamiltonian: Poly | None = None
    jumps: tuple[Poly, ...] = ()
    rates: tuple[float, ...] | None = None
    lattice: Mapping | None = None

    def __post_init__(self):
        if self.modes < 1:
            raise ValueError("modes must be >= 1")
        if self.rates is not None and len(self.rates) != len(self.jumps):
            raise ValueError("rates and jumps differ in length")
        for poly in ([self.hamiltonian] if self.hamiltonian is not None else []) + list(self.jumps):
            bad = [m for m in poly.modes if not 0 <= m < self.modes]
            if bad:
                raise IndexError(f"mode index {bad[0]} out of range for {self.modes} modes")

    def to_dict(self) -> dict:
        out = {
            "modes": self.modes,
            "cutoff": self.cutoff,
            "hamiltonian": None if self.hamiltonian is None else self.hamiltonian.to_json(),
            "jumps": [j.to_json() for j in self.jumps],
        }
        if self.rates is not None:
            out["rates"] = list(self.rates)
        if self.lattice is not None:
            out["lattice"] = dict(self.lattice)
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: Mapping) -> "GeneratorSpec":
        ham = data.get("hamiltonian")
        return cls(
            cutoff=int(data["cutoff"]),
            modes=int(data.get("modes", 1)),
            hamiltonian=None if not ham else Poly.from_json(ham),
            jumps=tuple(Poly.from_json(j) for j in data.get("jumps", [])),
            rates=None if data.get("rates") is None else tuple(float(r) for r in data["rates"]),
            lattice=data.get("lattice"),
        )

    @classmethod
    def from_json(cls, text: str) -> "GeneratorSpec":
        return cls.from_dict(json.loads(text))


def assemble(spec: GeneratorSpec, budget_dim: int | None = None) -> Superoperator:
    total = check_budget(spec.modes, spec.cutoff, budget_dim)
    h = None if spec.hamiltonian is None else build_poly(spec.hamiltonian, spec.cutoff, spec.modes)
    rates = spec.rates or (1.0,) * len(spec.jumps)
    jumps = [(r, build_poly(j, spec.cutoff, spec.modes)) for r, j in zip(rates, spec.jumps)]
    return Superoperator(total, h, jumps)


def assemble_single_mode(spec: GeneratorSpec) -> Superoperator:
    if spec.modes != 1:
        raise ValueError(f"expected a single-mode spec, got {spec.modes} modes")
    return assemble(spec)


def photon_loss_spec(ell: int, alpha: complex, cutoff: int, hamiltonian: Poly | None = None) -> GeneratorSpec:
    jump = Poly.term(" ".join(["a"] * ell))
    if alpha != 0:
        jump = jump - Poly.identity(alpha ** ell)
    return GeneratorSpec(cutoff=cutoff, hamiltonian=hamiltonian, jumps=(jump,))


@dataclass(frozen=True)
class HamiltonianSpec1M:
    """``H = sum_{i<=j, i+j<=d_H} lam_ij a^i (a^dag)^j + conj(lam_ij) a^j (a^dag)^i``."""

    coeffs: Mapping[tuple[int, int], complex]

    def __post_init__(self):
        for i, j in self.coeffs:
            if i < 0 or j < 0 or i > j:
                raise ValueError(f"coefficient index ({i}, {j}) must satisfy 0 <= i <= j")

    @property
    def degree(self) -> int:
        return max((i + j for (i, j), c in self.coeffs.items() if c != 0), default=0)

    @property
    def coefficient_sum(self) -> float:
        """Aggregate ``sum |lam_ij|``, the default choice for the constant Lambda."""
        return float(sum(abs(c) for c in self.coeffs.values()))

    def check_degree(self, ell: int, perturbation: bool = False):
        limit = ell - 2 if perturbation else 2 * (ell - 1)
        if self.degree > limit:
            raise ValueError(f"Hamiltonian degree {self.degree} exceeds {limit} for ell={ell}")

    def to_poly(self) -> Poly:
        poly = Poly()
        for (i, j), c in self.coeffs.items():
            c = complex(c)
            poly = poly + Poly.term([("a", 0)] * i + [("ad", 0)] * j, c)
            poly = poly + Poly.term([("a", 0)] * j + [("ad", 0)] * i, np.conj(c))
        return poly

    @classmethod
    def drive(cls, lam: complex) -> "HamiltonianSpec1M":
        """``lam a + conj(lam) a^dag`` (degree 1)."""
        return cls({(0, 1): np.conj(lam)})


@dataclass(frozen=True)
class HamiltonianSpec2Local:
    """Edge-local polynomial Hamiltonian.

    ``terms[(i, j)][u]`` with ``u = (u1, u2, u3, u4)`` is the coefficient of
    ``a_i^u1 a_j^u3 (a_i^dag)^u2 (a_j^dag)^u4``; each term is paired with its
    adjoint.  ``i == j`` encodes on-site terms.
    """

    terms: Mapping[tuple[int, int], Mapping[tuple[int, int, int, int], complex]]

    @property
    def degree(self) -> int:
        return max((sum(u) for t in self.terms.values() for u, c in t.items() if c != 0), default=0)

    @property
    def sup_norm(self) -> float:
        return max((abs(c) for t in self.terms.values() for c in t.values()), default=0.0)

    def edges(self):
        return list(self.terms)

    def edge_poly(self, edge) -> Poly:
        i, j = edge
        poly = Poly()
        for u, c in self.terms[edge].items():
            u1, u2, u3, u4 = u
            word = [("a", i)] * u1 + [("a", j)] * u3 + [("ad", i)] * u2 + [("ad", j)] * u4
            conj = [("a", j)] * u4 + [("a", i)] * u2 + [("ad", j)] * u3 + [("ad", i)] * u1
            poly = poly + Poly.term(word, c) + Poly.term(conj, np.conj(c))
        return poly

    def to_poly(self) -> Poly:
        poly = Poly()
        for edge in self.terms:
            poly = poly + self.edge_poly(edge)
        return poly

    @classmethod
    def hopping(cls, edges, lam: complex = 1.0) -> "HamiltonianSpec2Local":
        """``lam (a_i a_j^dag + a_j a_i^dag)`` on every edge (degree 2)."""
        return cls({tuple(e): {(1, 0, 0, 1): lam} for e in edges if e[0] != e[1]})

    def to_dict(self) -> dict:
        return {"edges": [
            {"edge": list(e), "terms": [{"u": list(u), "coeff": [complex(c).real, complex(c).imag]}
                                        for u, c in t.items()]}
            for e, t in self.terms.items()
        ]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "HamiltonianSpec2Local":
        terms = {}
        for item in data.get("edges", []):
            coeffs = {}
            for t in item["terms"]:
                c = t["coeff"]
                coeffs[tuple(int(x) for x in t["u"])] = complex(c[0], c[1]) if isinstance(c, list) else complex(c)
            terms[tuple(int(x) for x in item["edge"])] = coeffs
        return cls(terms)


def _site_alphas(alpha, m: int) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(alpha, dtype=complex), (m,))
    return np.array(arr)


def _site_jumps(lat, ell: int, alpha, cutoff: int, tail_tol: float):
    m = len(lat.nodes)
    dims = (cutoff,) * m
    alphas = _site_alphas(alpha, m)
    return [embed(shifted_photon_jump(ell, alphas[j], cutoff, tail_tol), j, dims) for j in range(m)]


def _check_edges(lat, ham: HamiltonianSpec2Local | None):
    if ham is None:
        return
    m = len(lat.nodes)
    allowed = set(lat.interaction_edges())
    for i, j in ham.edges():
        if not (0 <= i < m and 0 <= j < m):
            raise ValueError(f"edge ({i}, {j}) references a missing node")
        if (min(i, j), max(i, j)) not in allowed:
            raise ValueError(f"({i}, {j}) is not an edge of the lattice")


def assemble_multi_mode(lat, ell: int, alpha, ham: HamiltonianSpec2Local | None, eta: float,
                        cutoff: int, budget_dim: int | None = None,
                        tail_tol: float = DEFAULT_TAIL_TOL) -> Superoperator:
    """``-i[H, .] + eta sum_j L[a_j^ell - alpha_j^ell]`` on the lattice sites."""
    m = len(lat.nodes)
    total = check_budget(m, cutoff, budget_dim)
    _check_edges(lat, ham)
    h = None if ham is None or not ham.terms else build_poly(ham.to_poly(), cutoff, m)
    jumps = [(eta, L) for L in _site_jumps(lat, ell, alpha, cutoff, tail_tol)]
    return Superoperator(total, h, jumps)


def edge_decomposition(lat, ell: int, alpha, ham: HamiltonianSpec2Local | None, eta: float,
                       cutoff: int, budget_dim: int | None = None,
                       tail_tol: float = DEFAULT_TAIL_TOL) -> dict:
    """Edge generators ``L_ij = -i[H_ij, .] + eta/g_i L_i + eta/g_j L_j``.

    Sites enter with weight ``1/g_i`` where ``g_i`` counts the interaction
    edges at ``i`` (self-loops included once), so the terms re-sum to
    :func:`assemble_multi_mode`.
    """
    m = len(lat.nodes)
    total = check_budget(m, cutoff, budget_dim)
    _check_edges(lat, ham)
    jumps = _site_jumps(lat, ell, alpha, cutoff, tail_tol)
    conn = lat.connectivity()
    out = {}
    for i, j in lat.interaction_edges():
        h = None
        if ham is not None:
            polys = [ham.edge_poly(e) for e in {(i, j), (j, i)} if e in ham.terms]
            if polys:
                h = build_poly(sum(polys[1:], polys[0]), cutoff, m)
        sites = [i] if i == j else [i, j]
        out[(i, j)] = Superoperator(total, h, [(eta / conn[s], jumps[s]) for s in sites])
    return out
