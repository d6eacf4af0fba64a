"""Lattice geometry, exponential weight profiles and weighted moments."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from .fock import moment, occupations


@dataclass(frozen=True)
class LatticeGeometry:
    """Graph ``(V, E)`` with ``V`` a finite subset of ``Z^D``.

    ``edges`` holds index pairs ``(i, j)`` with ``i < j``; on-site terms are
    implied (every node carries a self-loop in :meth:`interaction_edges`).
    """

    nodes: tuple[tuple[int, ...], ...]
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.nodes:
            raise ValueError("lattice needs at least one node")
        dims = {len(n) for n in self.nodes}
        if len(dims) != 1:
            raise ValueError("all nodes must have the same dimension")
        m = len(self.nodes)
        norm = []
        for i, j in self.edges:
            if not (0 <= i < m and 0 <= j < m):
                raise ValueError(f"edge ({i}, {j}) references a missing node")
            if i != j:
                norm.append((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(set(norm))))

    @property
    def dim(self) -> int:
        return len(self.nodes[0])

    def __len__(self) -> int:
        return len(self.nodes)

    @classmethod
    def nearest_neighbour(cls, nodes: Sequence[Sequence[int]]) -> "LatticeGeometry":
        nodes = tuple(tuple(int(x) for x in n) for n in nodes)
        index = {n: i for i, n in enumerate(nodes)}
        edges = []
        for i, n in enumerate(nodes):
            for axis in range(len(n)):
                nb = n[:axis] + (n[axis] + 1,) + n[axis + 1:]
                if nb in index:
                    edges.append((i, index[nb]))
        return cls(nodes, tuple(edges))

    @classmethod
    def chain(cls, n: int) -> "LatticeGeometry":
        return cls.nearest_neighbour([(i,) for i in range(n)])

    @classmethod
    def grid(cls, shape: Sequence[int]) -> "LatticeGeometry":
        return cls.nearest_neighbour(list(itertools.product(*(range(s) for s in shape))))

    @cached_property
    def distances(self) -> np.ndarray:
        m = len(self.nodes)
        rows = [i for i, j in self.edges] + [j for i, j in self.edges]
        cols = [j for i, j in self.edges] + [i for i, j in self.edges]
        adj = sp.csr_array((np.ones(len(rows)), (rows, cols)), shape=(m, m))
        dist = shortest_path(adj, unweighted=True, directed=False)
        if np.isinf(dist).any():
            raise ValueError("lattice graph is disconnected")
        return dist.astype(int)

    def dist(self, i: int, j: int) -> int:
        return int(self.distances[i, j])

    def interaction_edges(self) -> list[tuple[int, int]]:
        """Edges including one self-loop per node."""
        return sorted(set(self.edges) | {(i, i) for i in range(len(self.nodes))})

    def connectivity(self) -> np.ndarray:
        """Number of interaction edges touching each node."""
        g = np.zeros(len(self.nodes), dtype=int)
        for i, j in self.interaction_edges():
            g[i] += 1
            if j != i:
                g[j] += 1
        return g

    def to_dict(self) -> dict:
        return {"nodes": [list(n) for n in self.nodes], "edges": [list(e) for e in self.edges]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: Mapping) -> "LatticeGeometry":
        if "chain" in data:
            return cls.chain(int(data["chain"]))
        if "grid" in data:
            return cls.grid([int(s) for s in data["grid"]])
        nodes = [tuple(int(x) for x in n) for n in data["nodes"]]
        if data.get("nearest_neighbour", "edges" not in data):
            return cls.nearest_neighbour(nodes)
        return cls(tuple(nodes), tuple(tuple(int(x) for x in e) for e in data["edges"]))

    @classmethod
    def from_json(cls, text: str) -> "LatticeGeometry":
        return cls.from_dict(json.loads(text))


class Normalization(NamedTuple):
    z: float
    lower: float
    upper: float

    @property
    def holds(self) -> bool:
        return self.lower <= self.z <= self.upper


def _check_kappa(kappa: float):
    if not kappa > 1:
        raise ValueError(f"decay kappa must exceed 1, got {kappa}")


def normalization(lat: LatticeGeometry, v: int, kappa: float) -> Normalization:
    """``Z_v = sum_i exp(-kappa dist(v, i))`` and the closed-form sandwich.

    ``lower = (1 - e^{-(kappa-1)(K+1)}) / (1 - e^{-(kappa-1)})`` and
    ``upper = e^{2D-1} / (1 - e^{-(kappa-1)})`` with ``K`` the eccentricity
    of ``v``.  The lower expression exceeds ``Z_v`` on most lattices; check
    :attr:`Normalization.holds` instead of assuming it.
    """
    _check_kappa(kappa)
    d = lat.distances[v]
    z = float(np.sum(np.exp(-kappa * d)))
    big_k = int(d.max())
    q = math.exp(-(kappa - 1))
    lower = (1 - q ** (big_k + 1)) / (1 - q)
    upper = math.exp(2 * lat.dim - 1) / (1 - q)
    return Normalization(z, lower, upper)


@dataclass(frozen=True)
class WeightProfile:
    """Weights ``w_i = exp(-kappa dist(v, i)) / Z_v`` centred at node ``v``."""

    lattice: LatticeGeometry
    center: int
    kappa: float

    def __post_init__(self):
        _check_kappa(self.kappa)
        if not 0 <= self.center < len(self.lattice):
            raise ValueError(f"center {self.center} is not a node")

    @cached_property
    def z(self) -> float:
        return float(np.sum(np.exp(-self.kappa * self.lattice.distances[self.center])))

    @cached_property
    def weights(self) -> np.ndarray:
        return np.exp(-self.kappa * self.lattice.distances[self.center]) / self.z


def weighted_moment(profile: WeightProfile, rho, k: float, cutoff: int) -> float:
    """``sum_i w_i tr[rho (N_i + 1)^k]``, the trace of ``W_v^k(rho)``."""
    m = len(profile.lattice)
    dims = (cutoff,) * m
    if rho.shape[0] != cutoff ** m:
        raise ValueError(f"state dimension {rho.shape[0]} does not match {m} modes at cutoff {cutoff}")
    return float(sum(w * moment(rho, k, dims, i) for i, w in enumerate(profile.weights)))


def weighted_generator_action(profile: WeightProfile, gen, rho, k: float, cutoff: int) -> float:
    """``tr[W_v^k(G(rho))]`` (real part)."""
    out = gen.apply(rho)
    m = len(profile.lattice)
    dims = (cutoff,) * m
    occ = occupations(dims)
    diag = np.real(np.diagonal(out))
    return float(sum(w * np.dot(diag, (occ[:, i] + 1.0) ** k) for i, w in enumerate(profile.weights)))
