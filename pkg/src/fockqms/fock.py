"""Truncated Fock-space operator algebra, state constructors and norms.

Operators are ``scipy.sparse`` CSR arrays (or dense ``numpy`` arrays) acting on
the truncated space spanned by ``|0>, ..., |D-1>``.  Multi-mode spaces are
tensor products with mode 0 as the leftmost Kronecker factor.  Ladder
matrices are the top-left ``D x D`` blocks of the infinite ones; products are
products of truncated matrices, so ``[a, a^dag]`` deviates from the identity
only in the last row/column.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.stats import poisson

ATOL = 1e-10
DEFAULT_TAIL_TOL = 1e-8
LEAKAGE_FRACTION = 0.1


class LeakageError(ValueError):
    """Raised when a state does not fit into the truncated Fock space."""


class InvalidStateError(ValueError):
    pass


def _check_cutoff(cutoff: int) -> int:
    if int(cutoff) != cutoff or cutoff < 2:
        raise ValueError(f"cutoff must be an integer >= 2, got {cutoff!r}")
    return int(cutoff)


def _dims(cutoff: int | Sequence[int], modes: int = 1) -> tuple[int, ...]:
    if isinstance(cutoff, (int, np.integer)):
        return (_check_cutoff(int(cutoff)),) * modes
    return tuple(_check_cutoff(d) for d in cutoff)


def ladder_ops(cutoff: int):
    """Return ``(a, adag, n)`` as sparse CSR arrays on a single mode."""
    d = _check_cutoff(cutoff)
    a = sp.diags_array(np.sqrt(np.arange(1, d, dtype=float)), offsets=1, shape=(d, d))
    a = sp.csr_array(a, dtype=complex)
    adag = sp.csr_array(a.conj().T)
    n = sp.csr_array(sp.diags_array(np.arange(d, dtype=float)), dtype=complex)
    return a, adag, n


def embed(op, mode: int, dims: Sequence[int]):
    """Place a single-mode operator on ``mode`` of the tensor space ``dims``."""
    if not 0 <= mode < len(dims):
        raise IndexError(f"mode {mode} out of range for {len(dims)} modes")
    factors = [sp.identity(d, dtype=complex, format="csr") for d in dims]
    factors[mode] = sp.csr_array(op)
    return sp.csr_array(reduce(lambda x, y: sp.kron(x, y, format="csr"), factors))


def mode_ops(dims: Sequence[int]):
    """Annihilation operators ``a_i`` for every mode of ``dims``."""
    return [embed(ladder_ops(d)[0], i, dims) for i, d in enumerate(dims)]


def occupations(dims: Sequence[int]) -> np.ndarray:
    """Occupation numbers ``n_i`` of every basis index, shape ``(prod(dims), modes)``."""
    grids = np.indices(tuple(dims)).reshape(len(dims), -1)
    return grids.T


# --- polynomial words ------------------------------------------------------

_TOKEN = re.compile(r"^(ad|a)(\d*)$")


@dataclass(frozen=True)
class Poly:
    """Finite linear combination of words in the ladder operators.

    Each term is ``(coeff, word)`` where ``word`` is a tuple of
    ``(letter, mode)`` pairs with ``letter`` in ``{"a", "ad"}``.  Words are
    multiplied left to right, so ``("ad", 0), ("a", 0)`` is ``N``.
    """

    terms: tuple[tuple[complex, tuple[tuple[str, int], ...]], ...] = field(default=())

    @staticmethod
    def parse_word(word: str | Iterable) -> tuple[tuple[str, int], ...]:
        if isinstance(word, str):
            out = []
            for tok in word.split():
                m = _TOKEN.match(tok)
                if m is None:
                    raise ValueError(f"bad ladder token {tok!r}")
                out.append((m.group(1), int(m.group(2) or 0)))
            return tuple(out)
        out = []
        for letter, mode in word:
            if letter not in ("a", "ad"):
                raise ValueError(f"bad ladder letter {letter!r}")
            out.append((letter, int(mode)))
        return tuple(out)

    @classmethod
    def term(cls, word, coeff: complex = 1.0) -> "Poly":
        return cls(((complex(coeff), cls.parse_word(word)),))

    @classmethod
    def from_terms(cls, terms) -> "Poly":
        return cls(tuple((complex(c), cls.parse_word(w)) for c, w in terms))

    @classmethod
    def identity(cls, coeff: complex = 1.0) -> "Poly":
        return cls(((complex(coeff), ()),))

    def __add__(self, other: "Poly") -> "Poly":
        return Poly(self.terms + other.terms)

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-1) * other

    def __rmul__(self, scalar: complex) -> "Poly":
        return Poly(tuple((scalar * c, w) for c, w in self.terms))

    def __matmul__(self, other: "Poly") -> "Poly":
        return Poly(tuple((c1 * c2, w1 + w2) for c1, w1 in self.terms for c2, w2 in other.terms))

    def adjoint(self) -> "Poly":
        flip = {"a": "ad", "ad": "a"}
        return Poly(tuple(
            (np.conj(c), tuple((flip[l], m) for l, m in reversed(w))) for c, w in self.terms
        ))

    @property
    def degree(self) -> int:
        return max((len(w) for _, w in self.terms), default=0)

    @property
    def modes(self) -> set[int]:
        return {m for _, w in self.terms for _, m in w}

    def to_json(self) -> list[dict]:
        return [
            {"coeff": [c.real, c.imag],
             "word": " ".join(f"{l}{m}" for l, m in w)}
            for c, w in self.terms
        ]

    @classmethod
    def from_json(cls, data: list[dict]) -> "Poly":
        terms = []
        for item in data:
            c = item.get("coeff", 1.0)
            if isinstance(c, (list, tuple)):
                c = complex(c[0], c[1])
            terms.append((complex(c), cls.parse_word(item.get("word", ""))))
        return cls(tuple(terms))


def build_poly(spec: Poly, cutoff: int | Sequence[int], modes: int | None = None):
    """Matrix of a polynomial on the truncated (multi-mode) Fock space."""
    if modes is None:
        modes = 1 if isinstance(cutoff, (int, np.integer)) else len(cutoff)
    dims = _dims(cutoff, modes)
    bad = [m for m in spec.modes if not 0 <= m < len(dims)]
    if bad:
        raise IndexError(f"mode index {bad[0]} out of range for {len(dims)} modes")
    total = int(np.prod(dims))
    cache = {}
    for i, d in enumerate(dims):
        a = embed(ladder_ops(d)[0], i, dims)
        cache[("a", i)] = a
        cache[("ad", i)] = sp.csr_array(a.conj().T)
    out = sp.csr_array((total, total), dtype=complex)
    for coeff, word in spec.terms:
        mat = sp.identity(total, dtype=complex, format="csr")
        for letter in word:
            mat = mat @ cache[letter]
        out = out + coeff * mat
    return sp.csr_array(out)


# --- states ------------------------------------------------------------------

def poisson_tail(mean: float, cutoff: int) -> float:
    """Probability mass of Poisson(mean) at levels >= cutoff."""
    if mean == 0:
        return 0.0
    return float(poisson.sf(cutoff - 1, mean))


def required_cutoff(mean: float, tail_tol: float = DEFAULT_TAIL_TOL) -> int:
    d = 2
    while poisson_tail(mean, d) > tail_tol:
        d += 1
    return d


def coherent_ket(alpha: complex, cutoff: int, tail_tol: float = DEFAULT_TAIL_TOL) -> np.ndarray:
    """Normalised truncated coherent state vector."""
    d = _check_cutoff(cutoff)
    mean = abs(alpha) ** 2
    tail = poisson_tail(mean, d)
    if tail > tail_tol:
        raise LeakageError(
            f"coherent state alpha={alpha} leaks {tail:.3g} beyond cutoff {d}; "
            f"need cutoff >= {required_cutoff(mean, tail_tol)}"
        )
    n = np.arange(d)
    if alpha == 0:
        psi = np.zeros(d, dtype=complex)
        psi[0] = 1.0
        return psi
    logamp = -mean / 2 + n * math.log(abs(alpha)) - 0.5 * np.array([math.lgamma(k + 1) for k in n])
    psi = np.exp(logamp) * np.exp(1j * n * np.angle(alpha))
    return psi / np.linalg.norm(psi)


def coherent_state(alpha: complex, cutoff: int, tail_tol: float = DEFAULT_TAIL_TOL) -> np.ndarray:
    psi = coherent_ket(alpha, cutoff, tail_tol)
    return np.outer(psi, psi.conj())


def product_state(kets: Sequence[np.ndarray]) -> np.ndarray:
    psi = reduce(np.kron, kets)
    return np.outer(psi, psi.conj())


def fock_state(n: int, cutoff: int) -> np.ndarray:
    d = _check_cutoff(cutoff)
    if not 0 <= n < d:
        raise ValueError(f"level {n} outside cutoff {d}")
    rho = np.zeros((d, d), dtype=complex)
    rho[n, n] = 1.0
    return rho


def _support_indices(dims: Sequence[int], support: int | None) -> np.ndarray:
    occ = occupations(dims)
    if support is None:
        return np.arange(occ.shape[0])
    return np.flatnonzero(np.all(occ < support, axis=1))


def random_density_matrix(dims, rng: np.random.Generator, support: int | None = None,
                          rank: int | None = None) -> np.ndarray:
    """Random state ``G G^dag / tr`` with ``G`` complex Gaussian.

    ``support`` restricts every mode to levels ``< support``; ``rank`` limits
    the number of columns of ``G`` (full rank on the support by default).
    """
    dims = _dims(dims) if isinstance(dims, (int, np.integer)) else tuple(dims)
    idx = _support_indices(dims, support)
    r = len(idx) if rank is None else rank
    g = rng.standard_normal((len(idx), r)) + 1j * rng.standard_normal((len(idx), r))
    block = g @ g.conj().T
    total = int(np.prod(dims))
    rho = np.zeros((total, total), dtype=complex)
    rho[np.ix_(idx, idx)] = block / np.trace(block).real
    return rho


def random_pure_state(dims, rng: np.random.Generator, support: int | None = None) -> np.ndarray:
    return random_density_matrix(dims, rng, support=support, rank=1)


def check_state(rho: np.ndarray, herm_tol: float = 1e-12, eig_tol: float = 1e-10,
                trace_tol: float = ATOL) -> np.ndarray:
    """Validate the density-matrix invariants and return ``rho`` as an array."""
    rho = np.asarray(rho.toarray() if sp.issparse(rho) else rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError(f"state must be square, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise InvalidStateError("state has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise InvalidStateError("state is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1) > trace_tol:
        raise InvalidStateError(f"trace {tr!r} differs from 1")
    lam = np.linalg.eigvalsh(rho).min()
    if lam < -eig_tol:
        raise InvalidStateError(f"negative eigenvalue {lam:.3g}")
    return rho


# --- norms and moments ----------------------------------------------------------

def trace_norm(x) -> float:
    """Sum of singular values; eigenvalue route for Hermitian input."""
    x = np.asarray(x.toarray() if sp.issparse(x) else x)
    if not np.all(np.isfinite(x)):
        raise ValueError("trace_norm of non-finite operator")
    scale = max(np.max(np.abs(x)), 1.0) if x.size else 1.0
    if np.max(np.abs(x - x.conj().T), initial=0.0) <= 1e-13 * scale:
        return float(np.sum(np.abs(np.linalg.eigvalsh((x + x.conj().T) / 2))))
    return float(np.sum(np.linalg.svd(x, compute_uv=False)))


def _populations(rho) -> np.ndarray:
    if sp.issparse(rho):
        return np.real(rho.diagonal())
    return np.real(np.diagonal(rho))


def moment(rho, k: float, dims: Sequence[int] | None = None, mode: int = 0) -> float:
    """``tr[rho (N_mode + 1)^k]``."""
    if k <= 0:
        raise ValueError("moment order k must be positive")
    p = _populations(rho)
    if dims is None:
        n = np.arange(p.size)
    else:
        n = occupations(dims)[:, mode]
    return float(np.dot(p, (n + 1.0) ** k))


def sobolev_norm(x, k: float, dims: Sequence[int] | None = None, mode: int = 0) -> float:
    """``|| (N+1)^{k/2} x (N+1)^{k/2} ||_1`` for arbitrary operators ``x``."""
    x = np.asarray(x.toarray() if sp.issparse(x) else x)
    n = np.arange(x.shape[0]) if dims is None else occupations(dims)[:, mode]
    w = (n + 1.0) ** (k / 2)
    return trace_norm(w[:, None] * x * w[None, :])


def leakage(rho, dims: Sequence[int] | None = None, fraction: float = LEAKAGE_FRACTION) -> float:
    """Largest single-mode population in the top ``fraction`` of levels."""
    p = _populations(rho)
    if dims is None:
        dims = (p.size,)
    occ = occupations(dims)
    worst = 0.0
    for i, d in enumerate(dims):
        top = max(1, math.ceil(fraction * d))
        worst = max(worst, float(np.sum(p[occ[:, i] >= d - top])))
    return worst
