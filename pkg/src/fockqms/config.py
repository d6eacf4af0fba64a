"""Scenario configuration schema and loading of bundled scenarios."""

from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .fock import coherent_state, fock_state, product_state, coherent_ket, random_density_matrix

Experiment = Literal["evolve", "certify", "catcode", "multimode"]


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


class Probe(BaseModel):
    """Initial state: ``coherent`` (alpha), ``fock`` (n), ``product_coherent`` or ``random``."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["coherent", "fock", "product_coherent", "random"]
    name: str | None = None
    alpha: Any = 0.0
    n: int = 0
    rank: int | None = None
    support: int | None = None
    count: int = 1

    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind == "fock":
            return f"fock{self.n}"
        if self.kind in ("coherent", "product_coherent"):
            a = _complex(self.alpha)
            return f"{self.kind}{a.real:g}" + (f"{a.imag:+g}j" if a.imag else "")
        return "random"

    def build(self, dims: tuple[int, ...], rng: np.random.Generator) -> dict[str, np.ndarray]:
        label = self.label()
        if self.kind == "random":
            return {f"{label}{i}": random_density_matrix(dims, rng, support=self.support, rank=self.rank)
                    for i in range(self.count)}
        if self.kind == "product_coherent":
            return {label: product_state([coherent_ket(_complex(self.alpha), d) for d in dims])}
        if len(dims) != 1:
            raise ValueError(f"{self.kind} probe needs a single mode")
        if self.kind == "coherent":
            return {label: coherent_state(_complex(self.alpha), dims[0])}
        return {label: fock_state(self.n, dims[0])}


class TimeGrid(BaseModel):
    model_config = ConfigDict(extra="forbid")

    start: float
    stop: float
    num: int = Field(ge=1)

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.num)


class CertificateConfig(BaseModel):
    """Explicit ``(k, delta, mu, c)`` or a preset: ``two_photon`` or ``l_diss`` (uses ``ell``, ``alpha``)."""

    model_config = ConfigDict(extra="forbid")

    preset: Literal["two_photon", "l_diss"] | None = None
    k: float
    delta: float | None = None
    mu: float | None = None
    c: float | None = None
    ell: int | None = None
    alpha: Any = 0.0

    @model_validator(mode="after")
    def _complete(self):
        if self.preset is None and None in (self.delta, self.mu, self.c):
            raise ValueError("explicit certificates need delta, mu and c")
        if self.preset == "l_diss" and self.ell is None:
            raise ValueError("the l_diss preset needs ell")
        return self

    def build(self):
        from . import certificates as cert
        if self.preset == "two_photon":
            return cert.two_photon_certificate(self.k)
        if self.preset == "l_diss":
            return cert.l_diss_certificate(self.ell, int(self.k), _complex(self.alpha))
        return cert.StabilityCertificate(self.k, self.delta, self.mu, self.c)


class PerturbationConfig(BaseModel):
    """``E = -i[H, .]`` with ``H`` a polynomial in JSON form; ``c1`` derived when omitted."""

    model_config = ConfigDict(extra="forbid")

    hamiltonian: list[dict]
    eps: list[float]
    c1: float | None = None
    c2: float = 0.0
    samples: int = Field(default=20, ge=1)
    support: int | None = None


class CatcodeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["convergence", "perturbed", "steady"] = "convergence"
    ell: int = Field(ge=1)
    alpha: Any = 1.0
    cutoff: int | None = None
    hamiltonian: dict[str, Any] | None = None  # {"i,j": coeff}
    eps: list[float] = [0.0]


class MultimodeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lattice: dict
    ell: int = Field(ge=2)
    k: float = Field(ge=2)
    alpha: Any = 0.0
    cutoff: int = Field(ge=2)
    kappa: float = Field(gt=1)
    center: int = 0
    hopping: Any = None
    hamiltonian: dict | None = None
    mode: Literal["with_eta", "degree_restricted"] = "degree_restricted"
    eta: float | None = None
    n_states: int = Field(default=20, ge=1)
    support: int | None = None


class ScenarioConfig(BaseModel):
    """One experiment; ``claim`` names the statement the scenario checks."""

    model_config = ConfigDict(extra="forbid")

    name: str
    claim: str
    experiment: Experiment
    model: dict | None = None
    certificate: CertificateConfig | None = None
    perturbation: PerturbationConfig | None = None
    catcode: CatcodeConfig | None = None
    multimode: MultimodeConfig | None = None
    time_grid: TimeGrid | list[float] | None = None
    t_end: float | None = None
    probes: list[Probe] = []
    moments: list[float] = []
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    out: str | None = None
    budget_dim: int | None = None

    @field_validator("time_grid")
    @classmethod
    def _positive_grid(cls, v):
        if isinstance(v, list) and any(t < 0 for t in v):
            raise ValueError("times must be nonnegative")
        return v

    @model_validator(mode="after")
    def _sections(self):
        need = {"certify": "certificate", "catcode": "catcode", "multimode": "multimode"}.get(self.experiment)
        if need and getattr(self, need) is None:
            raise ValueError(f"{self.experiment} scenarios need a '{need}' section")
        if self.experiment in ("evolve", "certify") and self.model is None:
            raise ValueError(f"{self.experiment} scenarios need a 'model' section")
        if self.perturbation is not None:
            c = self.certificate.build() if self.certificate else None
            if c is None or not c.delta > c.k:
                raise ValueError("perturbation scenarios need a certificate with delta > k")
        return self

    def times(self) -> np.ndarray:
        if self.time_grid is None:
            raise ValueError("scenario has no time grid")
        if isinstance(self.time_grid, TimeGrid):
            return self.time_grid.values()
        return np.asarray(self.time_grid, dtype=float)


def bundled_scenarios() -> dict[str, Path]:
    root = resources.files("fockqms") / "scenarios"
    return {Path(p.name).stem: Path(str(p)) for p in root.iterdir() if p.name.endswith(".json")}


def load_raw(ref: str | Path) -> dict:
    """Read a scenario from a path or by bundled name."""
    path = Path(ref)
    if not path.exists():
        bundled = bundled_scenarios()
        if str(ref) not in bundled:
            raise FileNotFoundError(f"no scenario file or bundled scenario named {ref!r}")
        path = bundled[str(ref)]
    return json.loads(path.read_text())


def load_config(ref: str | Path, overrides: dict | None = None) -> ScenarioConfig:
    raw = load_raw(ref)
    for key, value in (overrides or {}).items():
        set_dotted(raw, key, value)
    return ScenarioConfig.model_validate(raw)


def set_dotted(data: dict, path: str, value) -> dict:
    """Set ``data['a']['b'] = value`` for ``path = 'a.b'`` (list indices allowed)."""
    keys = path.split(".")
    cur = data
    for key in keys[:-1]:
        if isinstance(cur, list):
            cur = cur[int(key)]
        else:
            if key not in cur or cur[key] is None:
                cur[key] = {}
            cur = cur[key]
    last = keys[-1]
    if isinstance(cur, list):
        cur[int(last)] = value
    else:
        cur[last] = value
    return data


def with_override(config: ScenarioConfig, path: str, value) -> ScenarioConfig:
    raw = copy.deepcopy(config.model_dump(mode="json", exclude_none=True))
    set_dotted(raw, path, value)
    return ScenarioConfig.model_validate(raw)
