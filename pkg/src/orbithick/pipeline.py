"""Staged batch pipeline: lattice analysis, cover, nerve, homology and certificate.

Every stage writes one JSON artifact.  Artifacts are deterministic functions
of the resolved configuration: they hold no timings or paths, keys are
sorted, and each embeds the configuration hash and the package version.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .build import CoverConfig, CoverResult, build_cover
from .checks import (
    coverage_check,
    flow_stability_check,
    foldability_report,
    shell_check,
    stretch_checks,
)
from .cover import MuCascade, default_eps_fn, mu_cascade
from .groups import (
    ElementInventory,
    LatticeSpec,
    abelianization,
    element_order,
    enumerate_elements,
    estimate_eta,
    estimate_nu,
    load_lattice,
    singular_strata,
)
from .homology import HomologyResult, homology, relative_homology
from .hyperbolic import Tolerances
from .lifts import LiftTable
from .nerve import NervePair, certify, nerve, packing_degree_bound
from .thickthin import ThinPart, check_tubes, levels

__all__ = [
    "STAGES",
    "ConfigError",
    "IndeterminateError",
    "RunConfig",
    "Pipeline",
    "canonical_json",
    "builtin_config",
]

STAGES = ("analyze", "cover", "nerve", "homology", "certify")


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


class IndeterminateError(RuntimeError):
    """More undecided intersection tests than the configured threshold."""


def canonical_json(obj) -> str:
    """Sorted-key JSON with a trailing newline; the byte form of every artifact."""
    return json.dumps(_plain(obj), sort_keys=True, indent=1, allow_nan=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def builtin_config(name: str) -> Path:
    """Path of a configuration shipped with the package (``psl2z``, ``gamma2``, ...)."""
    p = resources.files("orbithick") / "configs" / f"{name}.json"
    if not p.is_file():
        raise ConfigError(f"no built-in config named {name!r}")
    return Path(str(p))


def _fixture_path(name: str) -> Path:
    return Path(str(resources.files("orbithick") / "fixtures" / f"{name}.json"))


@dataclass
class RunConfig:
    """Resolved run configuration.

    Attributes
    ----------
    lattice : str
        Lattice file path, or the name of a bundled fixture.
    word_length : int
        Word-length cap of the element inventory.
    seed : int
        Seed of every sampled quantity.
    eps_n : float, optional
        Override of the lattice's Margulis constant.
    mu : list of float, optional
        Explicit radii ``mu_{-1}, ..., mu_n``; without it the cascade formula is
        used with the capped-identity ``eps_2``/``eps_3`` functions.
    cover : dict
        Fields of :class:`~orbithick.build.CoverConfig` (its seed is ``seed``).
    nerve : dict
        ``max_dim`` (default ``n + 1``), ``max_simplices`` and
        ``store_simplices`` (write every simplex into the nerve file).
    homology : dict
        ``primes`` and ``relative`` (also compute the homology of the pair).
    samples : dict
        ``coverage``, ``flow_trajectories`` and ``foldability`` sample counts.
    tolerances : dict
        Fields of :class:`~orbithick.hyperbolic.Tolerances`.
    indeterminate_threshold : int
        Largest accepted number of undecided nerve families.
    max_elements : int
        Cap on the inventory size.
    """

    lattice: str
    word_length: int
    seed: int = 0
    eps_n: Optional[float] = None
    mu: Optional[List[float]] = None
    cover: Dict = field(default_factory=dict)
    nerve: Dict = field(default_factory=dict)
    homology: Dict = field(default_factory=dict)
    samples: Dict = field(default_factory=dict)
    tolerances: Dict = field(default_factory=dict)
    indeterminate_threshold: int = 0
    max_elements: int = 200_000
    base_dir: str = field(default=".", repr=False, compare=False)

    _FIELDS = ("lattice", "word_length", "seed", "eps_n", "mu", "cover", "nerve", "homology", "samples",
               "tolerances", "indeterminate_threshold", "max_elements")

    @classmethod
    def from_dict(cls, d: dict, base_dir: str = ".") -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(d) - set(cls._FIELDS))
        if unknown:
            raise ConfigError(f"unknown config fields: {unknown}")
        for key in ("lattice", "word_length"):
            if key not in d:
                raise ConfigError(f"config is missing {key!r}")
        try:
            cfg = cls(base_dir=base_dir, **d)
            cfg.word_length = int(cfg.word_length)
            cfg.seed = int(cfg.seed)
            if cfg.eps_n is not None:
                cfg.eps_n = float(cfg.eps_n)
                if not cfg.eps_n > 0:
                    raise ConfigError("eps_n must be positive")
            if cfg.mu is not None:
                cfg.mu = [float(v) for v in cfg.mu]
            for key in ("cover", "nerve", "homology", "samples", "tolerances"):
                if not isinstance(getattr(cfg, key), dict):
                    raise ConfigError(f"{key!r} must be an object")
            CoverConfig.from_dict(cfg.cover)
            Tolerances.from_dict(cfg.tolerances)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if cfg.word_length < 1:
            raise ConfigError("word_length must be at least 1")
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(d, base_dir=str(path.parent))

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self._FIELDS}

    def hash(self) -> str:
        """SHA-256 of the canonical config; the lattice file content is included."""
        h = hashlib.sha256(canonical_json(self.to_json()).encode())
        h.update(self.lattice_path().read_bytes())
        return h.hexdigest()

    def lattice_path(self) -> Path:
        p = Path(self.lattice)
        if not p.is_absolute():
            p = Path(self.base_dir) / p
        if p.is_file():
            return p
        q = _fixture_path(self.lattice)
        if q.is_file():
            return q
        raise ConfigError(f"lattice file not found: {self.lattice}")


class Pipeline:
    """Runs the stages in order, caching intermediate objects.

    Parameters
    ----------
    config : RunConfig
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.tol = Tolerances.from_dict(config.tolerances)
        self.config_hash = config.hash()
        self.spec: Optional[LatticeSpec] = None
        self.inv: Optional[ElementInventory] = None
        self.thin: Optional[ThinPart] = None
        self.strata: Optional[list] = None
        self.cover_result: Optional[CoverResult] = None
        self.table: Optional[LiftTable] = None
        self.pair: Optional[NervePair] = None
        self.hom: Optional[HomologyResult] = None
        self.rel: Optional[HomologyResult] = None
        self.artifacts: Dict[str, dict] = {}

    # ------------------------------------------------------------------
    # helpers
    # ------------------------------------------------------------------

    def _header(self, stage: str) -> dict:
        return {"stage": stage, "config_hash": self.config_hash, "version": __version__,
                "config": self.config.to_json()}

    def _load(self):
        if self.spec is not None:
            return
        try:
            spec = load_lattice(self.config.lattice_path(), self.tol)
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise ConfigError(f"malformed lattice file: {exc}") from exc
        if self.config.eps_n is not None:
            spec = spec.with_epsilon(self.config.eps_n)
        self.spec = spec
        self.inv = enumerate_elements(spec, self.config.word_length, self.config.max_elements, self.tol)
        self.lv = levels(spec)
        self.thin = ThinPart(self.inv, self.lv, tol=self.tol)
        self.strata = singular_strata(self.inv, tol=self.tol)

    def cascade(self) -> MuCascade:
        self._load()
        lv = self.lv
        if self.config.mu is not None:
            mu = self.config.mu
            if len(mu) != self.spec.n + 2:
                raise ConfigError(f"mu needs {self.spec.n + 2} entries (mu_-1, ..., mu_n)")
            return MuCascade.override(mu, lv.eps_n, lv.nu)
        f = default_eps_fn(lv.eps_n, lv.M)
        return mu_cascade(lv.eps_n, lv.nu, f, f, n=self.spec.n, M=lv.M)

    # ------------------------------------------------------------------
    # stages
    # ------------------------------------------------------------------

    def analyze(self) -> dict:
        """Thick-thin report of the lattice."""
        if "analyze" in self.artifacts:
            return self.artifacts["analyze"]
        self._load()
        spec, inv, thin = self.spec, self.inv, self.thin
        orders = sorted({o for k in inv.by_kind["elliptic"]
                         if (o := element_order(inv.elements[k])) is not None})
        nu_hat = estimate_nu(inv, spec)
        rank, torsion = abelianization(spec)
        out = self._header("analyze")
        out.update({
            "lattice": spec.name,
            "n": spec.n,
            "volume": spec.volume,
            "provenance": spec.metadata.get("provenance", {}),
            "inventory": {"elements": len(inv), "word_length": inv.word_length_cap,
                          "raw_words": inv.raw_word_count,
                          "kinds": {k: len(v) for k, v in sorted(inv.by_kind.items())}},
            "cusps": [{"fixed_point": c.fixed_point_json(), "shortest_translation": c.shortest,
                       "lattice_rank": int(c.basis.shape[0]), "pure_translations": c.pure_translations,
                       "thin_height": h}
                      for c, h in zip(thin.cusps, thin.thresholds)],
            "cusp_count": len(thin.cusps),
            "elliptic_orders": orders,
            "torsion_free": not inv.by_kind["elliptic"],
            "nu": {"declared": spec.nu, "estimate": nu_hat,
                   "consistent": bool(nu_hat >= spec.nu * (1 - 1e-9))},
            "eta": {"declared": spec.eta, "estimate": estimate_eta(inv, spec)},
            "levels": self.lv.to_json(),
            "tube_check_min_translation": check_tubes(inv, self.lv, spec),
            "strata": {str(d): sum(1 for s in self.strata if s.dim == d) for d in range(spec.n)},
            "abelianization": {"rank": rank, "torsion": torsion},
            "cascade": self.cascade().to_json(),
        })
        self.artifacts["analyze"] = out
        return out

    def cover(self) -> dict:
        """Cover construction plus coverage, flow, stretching and foldability checks."""
        if "cover" in self.artifacts:
            return self.artifacts["cover"]
        self.analyze()
        cfg = CoverConfig.from_dict({**self.config.cover, "seed": self.config.seed})
        res = build_cover(self.spec, self.inv, self.lv, self.cascade(), thin=self.thin, strata=self.strata,
                          config=cfg, tol=self.tol)
        self.cover_result = res
        self.table = LiftTable(res)
        smp = self.config.samples
        seed = self.config.seed
        checks = {
            "coverage": coverage_check(res, self.table, int(smp.get("coverage", 10_000)), seed),
            "flow_stability": flow_stability_check(res, self.table, int(smp.get("flow_trajectories", 200)), seed),
            "stretching": stretch_checks(res, seed=seed),
            "shell": shell_check(res),
            "foldability": foldability_report(res.sets, res.strata, self.inv,
                                              int(smp.get("foldability", 64)), seed),
        }
        out = self._header("cover")
        out.update(res.to_json())
        out["config_cover"] = cfg.to_json()
        out["checks"] = checks
        out["passed"] = all(c["passed"] for c in checks.values())
        self.artifacts["cover"] = out
        return out

    def nerve(self) -> dict:
        """Nerve of the cover and its subcomplex on stretched sets."""
        if "nerve" in self.artifacts:
            return self.artifacts["nerve"]
        self.cover()
        ncfg = self.config.nerve
        P = nerve(self.cover_result, max_dim=ncfg.get("max_dim"), table=self.table,
                  max_simplices=int(ncfg.get("max_simplices", 10_000_000)))
        self.pair = P
        bound = packing_degree_bound(self.cover_result)
        out = self._header("nerve")
        out.update({
            "vertices": P.vertex_count,
            "max_degree": P.max_degree,
            "counts": P.full.counts(),
            "sub_counts": P.sub.counts(),
            "sub_vertices": [] if P.sub_vertices is None else P.sub_vertices,
            "diagnostics": P.diagnostics,
            "digests": {"full": _digests(P.full), "sub": _digests(P.sub)},
            "edges": P.full.simplices(1),
            "degree_bound": bound,
            "degree_bound_holds": bool(P.max_degree <= bound["bound"]),
        })
        if ncfg.get("store_simplices", False):
            out["full"] = P.full.to_json()
            out["sub"] = P.sub.to_json()
        self.artifacts["nerve"] = out
        indet = int(P.diagnostics.get("indeterminate", 0))
        if indet > self.config.indeterminate_threshold:
            raise IndeterminateError(f"{indet} undecided nerve families exceed the threshold "
                                     f"{self.config.indeterminate_threshold}")
        return out

    def homology(self) -> dict:
        """Homology of the nerve in degrees ``0..n`` and, optionally, of the pair."""
        if "homology" in self.artifacts:
            return self.artifacts["homology"]
        self.nerve()
        n = self.spec.n
        hcfg = self.config.homology
        primes = tuple(int(p) for p in hcfg.get("primes", (2, 3)))
        self.hom = homology(self.pair.full, primes=primes, top=n)
        out = self._header("homology")
        out["full"] = self.hom.to_json()
        out["sub"] = homology(self.pair.sub, primes=primes, top=n).to_json()
        if hcfg.get("relative", True):
            self.rel = relative_homology(self.pair.full, self.pair.sub, primes=primes, top=n,
                                         vertex_map=self.pair.sub_vertices)
            out["relative"] = self.rel.to_json()
            out["relative_note"] = "informational; no reference values"
        rank, _ = abelianization(self.spec)
        out["abelianization_rank"] = rank
        out["b1_matches_abelianization"] = bool(len(self.hom.betti_Q) > 1 and self.hom.betti_Q[1] == rank)
        self.artifacts["homology"] = out
        return out

    def certify(self) -> dict:
        """Bound certificate with measured constants."""
        if "certify" in self.artifacts:
            return self.artifacts["certify"]
        self.homology()
        caveats = []
        if self.cascade().source == "override":
            caveats.append("radii set explicitly; structural inequalities reported in the cover file")
        if self.config.eps_n is not None:
            caveats.append("Margulis constant overridden")
        if not self.artifacts["cover"]["passed"]:
            caveats.append("some cover checks failed; see the cover file")
        cert = certify(self.pair, self.spec.n, self.spec.volume, self.hom, caveats)
        out = self._header("certify")
        out["certificate"] = cert.to_json()
        out["certificate"].pop("config", None)
        out["checks"] = {
            "cover": bool(self.artifacts["cover"]["passed"]),
            "degree_bound": bool(self.artifacts["nerve"]["degree_bound_holds"]),
            "b1_matches_abelianization": bool(self.artifacts["homology"]["b1_matches_abelianization"]),
        }
        out["passed"] = bool(cert.passed)
        self.artifacts["certify"] = out
        return out

    def run(self, stage: str) -> dict:
        """Run all stages up to and including ``stage``."""
        if stage not in STAGES:
            raise ConfigError(f"unknown stage {stage!r}")
        out = None
        for s in STAGES[: STAGES.index(stage) + 1]:
            out = getattr(self, s)()
        return out

    def write(self, out_dir) -> List[Path]:
        """Write every finished artifact to ``out_dir`` as ``<stage>.json``."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for s in STAGES:
            if s in self.artifacts:
                p = out_dir / f"{s}.json"
                p.write_text(canonical_json(self.artifacts[s]))
                paths.append(p)
        return paths


def _digests(cx) -> dict:
    return {str(k): hashlib.sha256(np.ascontiguousarray(cx.simplices(k), dtype="<i8").tobytes()).hexdigest()
            for k in range(cx.dim + 1)}
