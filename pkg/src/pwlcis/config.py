"""Run configuration: one JSON document per problem.

Schema (matrices are nested row-major arrays; weights may be scalars,
meaning ``w * I``, or vectors, meaning ``diag(w)``)::

    {
      "name": "example1",
      "seed": 1,
      "system": {"A": [[...]], "B": [[...]]},
      "state_set": {"lower": [...], "upper": [...]}      # or {"H": [[...]], "h": [...]}
      "input_set": {"lower": [...], "upper": [...]},
      "mpc": {"Q": 1.0, "R": 5000.0, "P": 10.0, "horizon": 10},
      "sampling": {"n_starts": 300, "conv_tol": 1e-3, "max_steps": 200},
      "fit": {"M_candidates": [3, 4, 5, 6], "restarts": 50, "eps": 1e-6,
              "max_iter": 100, "depth": 30, "tie_rtol": 1e-9},
      "oracle": {"enabled": true, "max_iters": 50}
    }
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .geometry import Polyhedron, symmetric_pairs
from .mpc import LinearSystem, MpcProblem
from .pwlfit import FitConfig

BUILTIN = ("example1", "example2")


class ConfigError(ValueError):
    pass


def _polyhedron(spec, name, dim):
    if not isinstance(spec, dict):
        raise ConfigError(f"{name}: expected an object")
    if "lower" in spec or "upper" in spec:
        lo = np.asarray(spec.get("lower"), dtype=float)
        hi = np.asarray(spec.get("upper"), dtype=float)
        if lo.shape != (dim,) or hi.shape != (dim,):
            raise ConfigError(f"{name}: lower/upper must have length {dim}")
        if np.any(lo >= hi):
            raise ConfigError(f"{name}: lower must be < upper")
        return Polyhedron.box(lo, hi)
    if "H" in spec and "h" in spec:
        H = np.atleast_2d(np.asarray(spec["H"], dtype=float))
        h = np.asarray(spec["h"], dtype=float)
        if H.shape[1] != dim:
            raise ConfigError(f"{name}: H must have {dim} columns")
        return Polyhedron(H, h)
    raise ConfigError(f"{name}: give either lower/upper or H/h")


@dataclass
class RunConfig:
    name: str
    seed: int
    mpc: MpcProblem
    n_starts: int = 300
    conv_tol: float = 1e-3
    max_steps: int = 200
    fit: FitConfig = field(default_factory=FitConfig)
    oracle_enabled: bool = False
    oracle_max_iters: int = 50
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def system(self) -> LinearSystem:
        return self.mpc.system

    @property
    def X(self) -> Polyhedron:
        return self.mpc.X

    @property
    def U(self) -> Polyhedron:
        return self.mpc.U

    @classmethod
    def from_dict(cls, d: dict, seed_override=None) -> "RunConfig":
        try:
            return cls._from_dict(d, seed_override)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{type(exc).__name__}: {exc}") from exc

    @classmethod
    def _from_dict(cls, d, seed_override):
        sysd = d["system"]
        system = LinearSystem(sysd["A"], sysd["B"])
        X = _polyhedron(d["state_set"], "state_set", system.nx)
        U = _polyhedron(d["input_set"], "input_set", system.nu)
        # mirroring the samples is only sound when X and U are 0-symmetric
        for name, S in (("state_set", X), ("input_set", U)):
            if symmetric_pairs(S) is None:
                raise ConfigError(f"{name} is not 0-symmetric: every row (a, b) needs a partner (-a, b)")
        m = d.get("mpc", {})
        mpc = MpcProblem(system, m.get("Q", 1.0), m.get("R", 1.0), m.get("P", 1.0),
                         int(m.get("horizon", 10)), X, U)
        s = d.get("sampling", {})
        f = d.get("fit", {})
        seed = int(d.get("seed", 0) if seed_override is None else seed_override)
        fit = FitConfig(
            M_candidates=[int(v) for v in f.get("M_candidates", [3, 4, 5, 6])],
            restarts=int(f.get("restarts", 20)),
            eps=float(f.get("eps", 1e-6)),
            max_iter=int(f.get("max_iter", 100)),
            depth=int(f.get("depth", 30)),
            seed=seed,
            tie_rtol=float(f.get("tie_rtol", 1e-9)),
        )
        o = d.get("oracle", {})
        cfg = cls(
            name=str(d.get("name", "run")),
            seed=seed,
            mpc=mpc,
            n_starts=int(s.get("n_starts", 300)),
            conv_tol=float(s.get("conv_tol", 1e-3)),
            max_steps=int(s.get("max_steps", 200)),
            fit=fit,
            oracle_enabled=bool(o.get("enabled", system.nx <= 3)),
            oracle_max_iters=int(o.get("max_iters", 50)),
            raw=d,
        )
        if cfg.n_starts < 0 or cfg.conv_tol <= 0 or cfg.max_steps < 1:
            raise ConfigError("sampling: n_starts >= 0, conv_tol > 0, max_steps >= 1 required")
        if system.nx < 2:
            raise ConfigError("the fitting stage needs at least two state coordinates")
        return cfg


def load_config(path_or_name, seed_override=None) -> RunConfig:
    """Load a JSON config from a path, or a bundled one by name."""
    text = None
    p = Path(str(path_or_name))
    if p.is_file():
        text = p.read_text()
    elif str(path_or_name) in BUILTIN:
        text = resources.files("pwlcis.data").joinpath(f"{path_or_name}.json").read_text()
    else:
        raise ConfigError(f"config not found: {path_or_name}")
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return RunConfig.from_dict(d, seed_override)
