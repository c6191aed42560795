"""Finitely generated discrete groups of isometries given by generator matrices.

The group is truncated to a ball in the word metric.  Elements are deduplicated
by matrix distance, classified once, and exposed as stacked arrays so that
orbit computations stay vectorised.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from .hyperbolic import (
    DEFAULT_TOL,
    Isometry,
    Point,
    Tolerances,
    TotallyGeodesicSubspace,
    dist_xt,
    fixed_subspace,
    lorentz_form,
    _from_lightcone,
    _to_lightcone,
)

__all__ = [
    "LatticeSpec",
    "ElementInventory",
    "SingularStratum",
    "EnumerationLimitError",
    "load_lattice",
    "lattice_from_dict",
    "enumerate_elements",
    "estimate_nu",
    "estimate_eta",
    "element_order",
    "quotient_dist",
    "singular_strata",
    "abelianization",
]


class EnumerationLimitError(RuntimeError):
    """Raised when the word ball exceeds the configured element cap."""

    def __init__(self, cap: int, length: int):
        super().__init__(f"word enumeration exceeded the cap of {cap} elements at length {length}")
        self.cap = cap
        self.length = length


@dataclass(frozen=True)
class LatticeSpec:
    """Generators of a lattice in Isom(H^n) together with trusted metadata."""

    n: int
    generators: tuple
    volume: float
    eta: int
    nu: float
    margulis_epsilon: float
    margulis_index: int
    relators: tuple = ()
    name: str = ""
    model: str = "lorentz"
    raw_generators: tuple = ()
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("dimension must be at least 2")
        for g in self.generators:
            if g.n != self.n:
                raise ValueError("generator dimension does not match n")
        if self.eta < 1:
            raise ValueError("eta must be >= 1")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if not self.margulis_epsilon > 0:
            raise ValueError("margulis_epsilon must be positive")
        if self.margulis_index < 1:
            raise ValueError("margulis_index must be >= 1")
        if not self.volume > 0:
            raise ValueError("volume must be positive")

    def with_epsilon(self, eps: float) -> "LatticeSpec":
        return LatticeSpec(
            self.n, self.generators, self.volume, self.eta, self.nu, float(eps),
            self.margulis_index, self.relators, self.name, self.model,
            self.raw_generators, self.metadata,
        )


def _parse_matrix(raw, model: str, tol: Tolerances) -> Isometry:
    if model == "lorentz":
        return Isometry.from_matrix(np.array(raw, dtype=float), tol)
    if model == "psl2r":
        return Isometry.from_sl2r(np.array(raw, dtype=float), tol)
    if model == "psl2c":
        a = np.array(raw)
        if a.dtype.kind in "fi" and a.shape == (2, 2, 2):
            a = a[..., 0] + 1j * a[..., 1]
        else:
            a = np.array([[complex(str(e).replace(" ", "")) for e in row] for row in raw])
        return Isometry.from_sl2c(a, tol)
    raise ValueError(f"unknown model {model!r}")


def lattice_from_dict(d: dict, tol: Tolerances = DEFAULT_TOL, name: str = "") -> LatticeSpec:
    """Build a :class:`LatticeSpec` from the JSON lattice format."""
    required = ["n", "model", "generators", "volume", "eta", "nu", "margulis_epsilon", "margulis_index"]
    missing = [k for k in required if k not in d]
    if missing:
        raise ValueError(f"lattice file is missing fields: {missing}")
    n = int(d["n"])
    model = str(d["model"])
    if model in ("psl2r",) and n != 2:
        raise ValueError("psl2r generators require n = 2")
    if model in ("psl2c",) and n != 3:
        raise ValueError("psl2c generators require n = 3")
    gens = tuple(_parse_matrix(g, model, tol) for g in d["generators"])
    relators = tuple(tuple(int(c) for c in r) for r in d.get("relators", []) or [])
    for r in relators:
        if any(c == 0 or abs(c) > len(gens) for c in r):
            raise ValueError(f"relator {r} refers to unknown generators")
    meta = {k: v for k, v in d.items() if k not in required + ["relators"]}
    return LatticeSpec(
        n=n,
        generators=gens,
        volume=float(d["volume"]),
        eta=int(d["eta"]),
        nu=float(d["nu"]),
        margulis_epsilon=float(d["margulis_epsilon"]),
        margulis_index=int(d["margulis_index"]),
        relators=relators,
        name=str(d.get("name", name)),
        model=model,
        raw_generators=tuple(json.dumps(g) for g in d["generators"]),
        metadata=meta,
    )


def load_lattice(path: Union[str, Path], tol: Tolerances = DEFAULT_TOL) -> LatticeSpec:
    """Read a lattice JSON file."""
    path = Path(path)
    with open(path) as fh:
        d = json.load(fh)
    return lattice_from_dict(d, tol, name=path.stem)


# ---------------------------------------------------------------------------
# word enumeration
# ---------------------------------------------------------------------------


@dataclass
class ElementInventory:
    """Deduplicated elements of word length at most ``word_length_cap``.

    ``words[k]`` is a word for ``elements[k]`` as a tuple of signed generator
    indices (``+j`` for generator ``j``, ``-j`` for its inverse, 1-based).
    """

    n: int
    elements: list
    words: list
    word_length_cap: int
    raw_word_count: int = 0
    _lc: Optional[np.ndarray] = field(default=None, repr=False)
    _mats: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.by_kind = {"identity": [], "elliptic": [], "parabolic": [], "hyperbolic": []}
        for k, g in enumerate(self.elements):
            self.by_kind[g.kind].append(k)

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def matrices(self) -> np.ndarray:
        if self._mats is None:
            self._mats = np.stack([g.L for g in self.elements])
        return self._mats

    @property
    def lightcone(self) -> np.ndarray:
        if self._lc is None:
            self._lc = np.stack([g._lc for g in self.elements])
        return self._lc

    def orbit_xt(self, x: np.ndarray, t: float, indices: Optional[Sequence[int]] = None):
        """Images ``g (x, t)`` for all inventory elements (or a subset)."""
        M = self.lightcone if indices is None else self.lightcone[np.asarray(indices, dtype=int)]
        c = _to_lightcone(np.asarray(x, dtype=float)[None, :], np.array([t]))[0]
        return _from_lightcone(M @ c)

    def index_of(self, g: Isometry, tol: float = 1e-8) -> Optional[int]:
        d = np.linalg.norm(self.matrices - g.L[None], axis=(1, 2))
        k = int(np.argmin(d))
        return k if d[k] <= tol * max(1.0, float(np.linalg.norm(g.L))) else None


def _letters(spec: LatticeSpec, tol: Tolerances):
    """Alphabet of generators and inverses with coincident matrices merged."""
    letters = []  # (label, isometry)
    for j, g in enumerate(spec.generators, start=1):
        for lab, h in ((j, g), (-j, g.inverse())):
            if any(np.linalg.norm(h.L - o.L) <= tol.tol_dedup * max(1.0, np.linalg.norm(h.L)) for _, o in letters):
                continue
            letters.append((lab, h))
    inv_of = {}
    for a, (_, g) in enumerate(letters):
        gi = g.inverse().L
        for b, (_, h) in enumerate(letters):
            if np.linalg.norm(gi - h.L) <= tol.tol_dedup * max(1.0, np.linalg.norm(gi)):
                inv_of[a] = b
    return letters, inv_of


def enumerate_elements(
    spec: LatticeSpec,
    L: int,
    max_elements: int = 200_000,
    tol: Tolerances = DEFAULT_TOL,
) -> ElementInventory:
    """All reduced words of length at most ``L`` over generators and inverses.

    Words are extended breadth-first in a fixed letter order, so the first word
    reaching each element is kept and the output order is deterministic.
    Duplicates are detected by relative Frobenius distance ``tol_dedup``.
    """
    if L < 0:
        raise ValueError("word length must be nonnegative")
    n = spec.n
    letters, inv_of = _letters(spec, tol)
    ident = Isometry.identity(n)
    elements = [ident]
    words = [()]
    flat = [ident.L.ravel()]
    tree = None
    frontier = [(0, None)]  # (element index, last letter)
    raw = 1
    for length in range(1, L + 1):
        tree = cKDTree(np.array(flat))
        cand = []
        for idx, last in frontier:
            base = elements[idx].L
            for a, (lab, h) in enumerate(letters):
                if last is not None and inv_of.get(last) == a:
                    continue
                cand.append((idx, a, lab, base @ h.L))
        raw += len(cand)
        if not cand:
            break
        V = np.array([c[3].ravel() for c in cand])
        r = tol.tol_dedup * np.maximum(1.0, np.linalg.norm(V, axis=1))
        keep = np.array([not hits for hits in tree.query_ball_point(V, r)])
        pairs = cKDTree(V).query_pairs(float(r.max()), output_type="ndarray")
        if len(pairs):
            pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
            for i, j in pairs:
                if keep[i] and keep[j] and np.linalg.norm(V[i] - V[j]) <= min(r[i], r[j]):
                    keep[j] = False
        new_frontier = []
        for c, ok in zip(cand, keep):
            if not ok:
                continue
            idx, a, lab, M = c
            elements.append(Isometry.from_matrix(M, tol))
            words.append(words[idx] + (lab,))
            flat.append(M.ravel())
            new_frontier.append((len(elements) - 1, a))
            if len(elements) > max_elements:
                raise EnumerationLimitError(max_elements, length)
        frontier = new_frontier
        if not frontier:
            break
    return ElementInventory(n, elements, words, L, raw_word_count=raw)


# ---------------------------------------------------------------------------
# estimates
# ---------------------------------------------------------------------------


def estimate_nu(inv: ElementInventory, spec: Optional[LatticeSpec] = None) -> float:
    """Smallest translation length among hyperbolic inventory elements.

    This is an upper bound for the true infimum over the group; ``inf`` if the
    inventory holds no hyperbolic element.  A warning is issued when the value
    falls below the declared ``spec.nu``.
    """
    hyp = inv.by_kind["hyperbolic"]
    if not hyp:
        return math.inf
    val = min(inv.elements[k].translation_length for k in hyp)
    if spec is not None and val < spec.nu * (1 - 1e-9):
        warnings.warn(f"inventory contains a hyperbolic element of length {val:.6g} < declared nu {spec.nu:.6g}")
    return val


def element_order(g: Isometry, cap: int = 240, tol: float = 1e-9) -> Optional[int]:
    """Order of ``g`` found by iterating powers; ``None`` if it exceeds ``cap``."""
    if g.kind == "identity":
        return 1
    I = np.eye(g.n + 1)
    P = g.L.copy()
    for k in range(2, cap + 1):
        P = P @ g.L
        if np.linalg.norm(P - I) < tol * max(1.0, float(np.linalg.norm(P))):
            return k
    return None


def estimate_eta(inv: ElementInventory, spec: Optional[LatticeSpec] = None, cap: int = 240) -> int:
    """Largest order of a cyclic subgroup generated by an elliptic inventory element.

    A lower bound for the true bound on finite subgroup orders.  Elements whose
    order is not detected below ``cap`` are skipped.
    """
    best = 1
    for k in inv.by_kind["elliptic"]:
        o = element_order(inv.elements[k], cap)
        if o is not None:
            best = max(best, o)
    if spec is not None and best > spec.eta:
        warnings.warn(f"inventory contains an elliptic element of order {best} > declared eta {spec.eta}")
    return best


def quotient_dist(p: Point, q: Point, inv: ElementInventory) -> float:
    """``min_g d(p, g q)`` over the inventory; an upper bound for the quotient distance."""
    x, t = inv.orbit_xt(q.x, q.t)
    return float(np.min(dist_xt(p.x[None, :], p.t, x, t)))


# ---------------------------------------------------------------------------
# singular strata
# ---------------------------------------------------------------------------


@dataclass
class SingularStratum:
    """Common fixed set of a finite collection of elliptic elements."""

    subspace: TotallyGeodesicSubspace
    stabilizer_witness: list
    witness_indices: list

    @property
    def dim(self) -> int:
        return self.subspace.dim


def _intersect(a: TotallyGeodesicSubspace, b: TotallyGeodesicSubspace) -> Optional[TotallyGeodesicSubspace]:
    n = a.n
    J = lorentz_form(n)
    # vectors v in span(a) with v in span(b):  (I - P_b) B_a c = 0
    Pb = b.projector()
    M = (np.eye(n + 1) - Pb) @ a.basis
    _, s, vt = np.linalg.svd(M)
    s_full = np.zeros(a.basis.shape[1])
    s_full[: s.size] = s
    C = vt[s_full < 1e-9].T
    if C.shape[1] == 0:
        return None
    return TotallyGeodesicSubspace.from_span(a.basis @ C)


def singular_strata(
    inv: ElementInventory,
    max_codim: Optional[int] = None,
    pair_word_cap: Optional[int] = None,
    tol: Tolerances = DEFAULT_TOL,
) -> list:
    """Fixed sets of elliptic elements and of pairs of them, closed under intersection.

    Returns a list of :class:`SingularStratum` sorted by dimension (descending),
    always starting with the whole space.  ``max_codim`` drops strata of larger
    codimension; ``pair_word_cap`` limits the elements used for pairs.
    """
    n = inv.n
    strata = [SingularStratum(TotallyGeodesicSubspace.whole_space(n), [inv.elements[0]], [0])]

    def add(sub, wit_idx):
        for s in strata:
            if s.subspace.same_as(sub):
                for w in wit_idx:
                    if w not in s.witness_indices:
                        s.witness_indices.append(w)
                        s.stabilizer_witness.append(inv.elements[w])
                return s
        s = SingularStratum(sub, [inv.elements[w] for w in wit_idx], list(wit_idx))
        strata.append(s)
        return s

    ell = inv.by_kind["elliptic"]
    for k in ell:
        sub = fixed_subspace([inv.elements[k]], tol)
        if sub is not None:
            add(sub, [k])
    pair_pool = [s for s in strata[1:] if s.dim >= 1]
    if pair_word_cap is not None:
        pair_pool = [s for s in pair_pool if min(len(inv.words[w]) for w in s.witness_indices) <= pair_word_cap]
    changed = True
    seen = set()
    while changed:
        changed = False
        pool = [s for s in strata[1:] if s.dim >= 1]
        for i in range(len(pool)):
            for j in range(i + 1, len(pool)):
                key = (id(pool[i]), id(pool[j]))
                if key in seen:
                    continue
                seen.add(key)
                sub = _intersect(pool[i].subspace, pool[j].subspace)
                if sub is None or sub.dim >= min(pool[i].dim, pool[j].dim):
                    continue
                before = len(strata)
                add(sub, pool[i].witness_indices + pool[j].witness_indices)
                if len(strata) > before:
                    changed = True
    if max_codim is not None:
        strata = [s for s in strata if n - s.dim <= max_codim]
    strata.sort(key=lambda s: -s.dim)
    return strata


# ---------------------------------------------------------------------------
# abelianisation
# ---------------------------------------------------------------------------


def abelianization(spec: LatticeSpec):
    """Free rank and torsion factors of the abelianised presentation.

    Uses the relator exponent-sum matrix and its Smith normal form.
    """
    from .homology import smith_normal_form

    g = len(spec.generators)
    rows = []
    for r in spec.relators:
        row = [0] * g
        for c in r:
            row[abs(c) - 1] += 1 if c > 0 else -1
        rows.append(row)
    if not rows:
        return g, []
    factors, rank = smith_normal_form(rows)
    return g - rank, [f for f in factors if f > 1]
