"""Variable-level thick-thin decomposition.

Hyperbolic and parabolic elements get the level ``eps_prime`` and elliptic
elements the smaller level ``eps_elliptic``.  Tubes are excluded through the
lower bound ``nu`` on translation lengths, so the thin part is a union of
horoball-like cusp regions.  Each cusp class gets a chart moving its fixed
point to infinity; the thin part in that chart is ``{t > h(x)}`` where ``h`` is
given in closed form by the cusp's Euclidean motions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .groups import ElementInventory, LatticeSpec
from .hyperbolic import (
    DEFAULT_TOL,
    INFINITY,
    Isometry,
    Point,
    Tolerances,
    _from_lightcone,
    _to_lightcone,
    apply,
    boundary_to_light,
    cusp_chart,
    dist_xt,
)

__all__ = [
    "LevelAssignment",
    "CuspChartData",
    "ThinPart",
    "NuViolation",
    "levels",
    "displacements_xt",
    "is_thin",
    "cusp_inventory",
    "check_tubes",
    "dist_to_thin",
    "flow",
]


class NuViolation(RuntimeError):
    """A hyperbolic element is shorter than the level assumption allows.

    Raised instead of silently producing a thin part that would contain tubes.
    """

    def __init__(self, message: str, length: float, word: tuple):
        super().__init__(message)
        self.length = length
        self.word = word


@dataclass(frozen=True)
class LevelAssignment:
    """Levels of the variable thick-thin decomposition.

    Attributes
    ----------
    eps_n : float
        Configured Margulis constant before the minimum with ``nu``.
    eps_tilde : float
        ``min(eps_n, nu)``.
    eps_prime : float
        Level for hyperbolic and parabolic elements, ``eps_tilde / 2``.
    eps_elliptic : float
        Level for elliptic elements, ``eps_prime / M`` with ``M = 2 m + 1``.
    """

    eps_n: float
    nu: float
    m: int
    eps_tilde: float
    eps_prime: float
    M: int
    eps_elliptic: float

    def level(self, kind: str) -> float:
        if kind == "elliptic":
            return self.eps_elliptic
        if kind in ("parabolic", "hyperbolic"):
            return self.eps_prime
        return 0.0

    def to_json(self) -> dict:
        return {
            "eps_n": self.eps_n,
            "nu": self.nu,
            "m": self.m,
            "M": self.M,
            "eps_tilde": self.eps_tilde,
            "eps_prime": self.eps_prime,
            "eps_elliptic": self.eps_elliptic,
        }


def levels(spec: LatticeSpec) -> LevelAssignment:
    """Level assignment from the lattice's Margulis data."""
    eps_n = float(spec.margulis_epsilon)
    nu = float(spec.nu)
    m = int(spec.margulis_index)
    eps_tilde = min(eps_n, nu)
    eps_prime = eps_tilde / 2.0
    M = 2 * m + 1
    return LevelAssignment(eps_n, nu, m, eps_tilde, eps_prime, M, eps_prime / M)


# ---------------------------------------------------------------------------
# displacement and thin membership
# ---------------------------------------------------------------------------


def displacements_xt(inv: ElementInventory, x: np.ndarray, t: float, indices=None) -> np.ndarray:
    """``d(p, g p)`` for inventory elements ``g`` at the point ``(x, t)``."""
    idx = np.arange(len(inv)) if indices is None else np.asarray(indices, dtype=int)
    if idx.size == 0:
        return np.zeros(0)
    gx, gt = inv.orbit_xt(x, t, idx)
    return dist_xt(np.asarray(x, dtype=float)[None, :], t, gx, gt)


def is_thin(p: Point, inv: ElementInventory, lv: LevelAssignment) -> Tuple[bool, Optional[int]]:
    """Whether some non-elliptic inventory element moves ``p`` less than its level.

    Returns ``(flag, witness)`` with ``witness`` the inventory index of the
    element of smallest displacement below the level, or ``None``.
    """
    idx = np.array(inv.by_kind["parabolic"] + inv.by_kind["hyperbolic"], dtype=int)
    if idx.size == 0:
        return False, None
    d = displacements_xt(inv, p.x, p.t, idx)
    below = d < lv.eps_prime
    if not np.any(below):
        return False, None
    k = int(np.argmin(np.where(below, d, np.inf)))
    return True, int(idx[k])


def check_tubes(inv: ElementInventory, lv: LevelAssignment, spec: Optional[LatticeSpec] = None) -> float:
    """Verify that no hyperbolic inventory element creates a tube.

    Raises :class:`NuViolation` if some translation length is below
    ``eps_prime``; warns if it is below the declared ``nu``.  Returns the
    measured minimum (``inf`` without hyperbolic elements).
    """
    hyp = inv.by_kind["hyperbolic"]
    if not hyp:
        return math.inf
    lengths = np.array([inv.elements[k].translation_length for k in hyp])
    j = int(np.argmin(lengths))
    ell = float(lengths[j])
    word = tuple(inv.words[hyp[j]])
    if ell < lv.eps_prime:
        raise NuViolation(
            f"hyperbolic element {word} has translation length {ell:.6g} < eps_prime {lv.eps_prime:.6g}; "
            "the thin part would contain a tube",
            ell,
            word,
        )
    if spec is not None and ell < spec.nu * (1.0 - 1e-9):
        warnings.warn(f"hyperbolic element {word} has translation length {ell:.6g} below the declared nu {spec.nu:.6g}")
    return ell


# ---------------------------------------------------------------------------
# cusps
# ---------------------------------------------------------------------------


@dataclass
class CuspChartData:
    """One cusp class with a chart that moves its fixed point to infinity.

    Attributes
    ----------
    fixed_point : INFINITY or ndarray
        Representative parabolic fixed point.
    chart : Isometry
        Isometry with ``chart(fixed_point) = infinity``.
    parabolic_witnesses : list of int
        Inventory indices of parabolic elements fixing ``fixed_point``.
    motions : list of (A, b)
        The witnesses conjugated by the chart, as Euclidean motions ``x -> A x + b``.
    translations : ndarray
        Translation parts ``b`` of the pure translations among the motions.
    basis : ndarray
        Lattice basis extracted from ``translations`` (rows).
    shortest : float
        Length of the shortest translation.
    """

    fixed_point: object
    chart: Isometry
    parabolic_witnesses: list
    motions: list = field(default_factory=list)
    translations: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    basis: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    shortest: float = math.inf
    basis_integral: bool = True

    @property
    def pure_translations(self) -> bool:
        n1 = self.translations.shape[1] if self.translations.ndim == 2 else 0
        return all(np.allclose(A, np.eye(n1), atol=1e-8) for A, _ in self.motions)

    def fixed_point_json(self):
        if self.fixed_point is INFINITY:
            return "inf"
        return [float(v) for v in np.asarray(self.fixed_point).ravel()]


def _sphere_coords(z, n: int) -> np.ndarray:
    v = boundary_to_light(z, n)
    return v[:-1] / v[-1]


def _motion(g: Isometry, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Euclidean motion ``x -> A x + b`` of an isometry fixing infinity."""
    X = np.vstack([np.zeros(n - 1), np.eye(n - 1)])
    y, t = g.apply_xt(X, np.ones(n))
    b = y[0]
    A = (y[1:] - b).T / t[0]
    return A, b


def _lattice_basis(vecs: np.ndarray, tol: float = 1e-7) -> Tuple[np.ndarray, bool]:
    """Greedy shortest-first independent subset, with an integrality check."""
    if vecs.shape[0] == 0:
        return vecs, True
    order = np.argsort(np.linalg.norm(vecs, axis=1), kind="stable")
    basis: List[np.ndarray] = []
    for i in order:
        v = vecs[i]
        if np.linalg.norm(v) < tol:
            continue
        trial = np.array(basis + [v])
        if np.linalg.matrix_rank(trial, tol=tol * max(1.0, np.abs(trial).max())) > len(basis):
            basis.append(v)
    B = np.array(basis)
    coef, *_ = np.linalg.lstsq(B.T, vecs.T, rcond=None)
    integral = bool(np.all(np.abs(coef - np.round(coef)) < 1e-6))
    return B, integral


def cusp_inventory(inv: ElementInventory, tol: Tolerances = DEFAULT_TOL) -> List[CuspChartData]:
    """Parabolic fixed points of the inventory clustered up to the inventory action.

    Points are compared on the boundary sphere of the ball model.  Each class
    is represented by the point fixed by the shortest parabolic word, ties
    broken by infinity first, then smallest norm, then larger coordinates.
    Every class receives a chart.
    """
    n = inv.n
    par = inv.by_kind["parabolic"]
    if not par:
        return []
    fps, owners = [], []
    for k in par:
        z = inv.elements[k].fixed_boundary_points(tol)[0]
        fps.append(z)
        owners.append(k)
    S = np.array([_sphere_coords(z, n) for z in fps])
    # unique points
    tree = cKDTree(S)
    uniq_of = -np.ones(len(fps), dtype=int)
    uniq: List[int] = []
    for i in range(len(fps)):
        if uniq_of[i] >= 0:
            continue
        for j in tree.query_ball_point(S[i], 1e-7):
            if uniq_of[j] < 0:
                uniq_of[j] = len(uniq)
        uniq.append(i)
    U = S[uniq]
    utree = cKDTree(U)
    parent = list(range(len(uniq)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    # images of each unique point under the whole inventory
    Ls = inv.matrices
    for a, i in enumerate(uniq):
        v = boundary_to_light(fps[i], n)
        W = Ls @ v
        W = W[:, :-1] / W[:, -1:]
        d, hit = utree.query(W, distance_upper_bound=1e-7)
        for b in hit[np.isfinite(d)]:
            ra, rb = find(a), find(int(b))
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    wl = [min(len(inv.words[owners[i]]) for i in range(len(fps)) if uniq_of[i] == a) for a in range(len(uniq))]
    classes = {}
    for a in range(len(uniq)):
        classes.setdefault(find(a), []).append(a)

    out = []
    for members in classes.values():
        a = min(members, key=lambda b: (wl[b],) + _sort_key(fps[uniq[b]]))
        z = fps[uniq[a]]
        chart = cusp_chart(z, n)
        ci = chart.inverse()
        wit = [owners[i] for i in range(len(fps)) if uniq_of[i] == a]
        motions = [_motion(chart @ inv.elements[k] @ ci, n) for k in wit]
        trans = np.array([b for A, b in motions if np.allclose(A, np.eye(n - 1), atol=1e-8)])
        trans = trans.reshape(-1, n - 1)
        basis, integral = _lattice_basis(trans)
        shortest = float(np.min(np.linalg.norm(trans, axis=1))) if trans.shape[0] else math.inf
        out.append(CuspChartData(z, chart, wit, motions, trans, basis, shortest, integral))
    out.sort(key=lambda c: _sort_key(c.fixed_point))
    return out


def _sort_key(z):
    if z is INFINITY:
        return (0, 0.0, ())
    z = np.asarray(z)
    return (1, round(float(np.linalg.norm(z)), 9), tuple(-np.round(z, 9)))


# ---------------------------------------------------------------------------
# distance to the thin part
# ---------------------------------------------------------------------------


class ThinPart:
    """Signed distance to the thin part, assembled from all cusp horoballs.

    For a cusp with chart ``C`` and inventory element ``g`` the horoball
    ``g^{-1} H`` is at signed distance ``ln h(x') - ln t'`` from ``p``, where
    ``(x', t') = C g p`` and ``h`` is the cusp's thin height.  Rows of ``C g``
    that agree up to the cusp stabiliser are merged.

    Parameters
    ----------
    inv : ElementInventory
    lv : LevelAssignment
    cusps : list of CuspChartData, optional
        Computed with :func:`cusp_inventory` if omitted.
    """

    def __init__(self, inv: ElementInventory, lv: LevelAssignment,
                 cusps: Optional[List[CuspChartData]] = None, tol: Tolerances = DEFAULT_TOL):
        self.inv = inv
        self.lv = lv
        self.n = inv.n
        self.cusps = cusp_inventory(inv, tol) if cusps is None else cusps
        self.sinh_half = math.sinh(lv.eps_prime / 2.0)
        self.thresholds = [c.shortest / (2.0 * self.sinh_half) for c in self.cusps]
        self._rows: List[np.ndarray] = []
        self._mats: List[np.ndarray] = []
        self._elts: List[np.ndarray] = []
        for c in self.cusps:
            M = np.einsum("ij,kjl->kil", c.chart._lc, inv.lightcone)
            rows = M[:, -2, :]
            scale = np.maximum(1.0, np.linalg.norm(rows, axis=1))
            key = rows / scale[:, None]
            tree = cKDTree(key)
            keep = np.ones(len(rows), dtype=bool)
            for i, j in sorted(tree.query_pairs(tol.tol_dedup * 10)):
                if keep[i] and keep[j]:
                    keep[j] = False
            self._rows.append(rows[keep])
            self._mats.append(M[keep])
            self._elts.append(np.flatnonzero(keep))

    @property
    def has_cusps(self) -> bool:
        return len(self.cusps) > 0

    def threshold_height(self, k: int) -> float:
        """Height of the horoball of cusp ``k`` in its own chart (translation cusps)."""
        return self.thresholds[k]

    def _thin_height(self, k: int, x: np.ndarray) -> np.ndarray:
        c = self.cusps[k]
        if c.pure_translations:
            return np.full(x.shape[0], self.thresholds[k])
        h = np.full(x.shape[0], np.inf)
        for A, b in c.motions:
            disp = np.linalg.norm(x @ A.T + b - x, axis=1)
            h = np.minimum(h, disp / (2.0 * self.sinh_half))
        return h

    def signed_distance_xt(self, x: np.ndarray, t, return_argmin: bool = False):
        """Signed distance to the thin part (negative inside) for arrays of points.

        With ``return_argmin`` also returns ``(cusp index, row index)`` of the
        nearest horoball for every point.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t = np.atleast_1d(np.asarray(t, dtype=float))
        m = x.shape[0]
        best = np.full(m, np.inf)
        bc = -np.ones(m, dtype=int)
        br = -np.ones(m, dtype=int)
        if not self.cusps:
            return (best, bc, br) if return_argmin else best
        C = _to_lightcone(x, t)
        for k, c in enumerate(self.cusps):
            U = C @ self._rows[k].T  # u = 1/t' for each (point, row)
            if c.pure_translations:
                D = math.log(self.thresholds[k]) + np.log(U)
            else:
                D = np.empty_like(U)
                for r in range(U.shape[1]):
                    xr, tr = _from_lightcone(C @ self._mats[k][r].T)
                    D[:, r] = np.log(self._thin_height(k, xr)) - np.log(tr)
            j = np.argmin(D, axis=1)
            v = D[np.arange(m), j]
            better = v < best
            best = np.where(better, v, best)
            bc = np.where(better, k, bc)
            br = np.where(better, j, br)
        return (best, bc, br) if return_argmin else best

    def signed_distance(self, p: Point) -> float:
        return float(self.signed_distance_xt(p.x[None, :], np.array([p.t]))[0])

    def is_thin_xt(self, x: np.ndarray, t) -> np.ndarray:
        return self.signed_distance_xt(x, t) < 0.0

    def nearest_chart(self, p: Point) -> Tuple[int, Isometry, int]:
        """Cusp index, chart of the nearest horoball and the inventory element used."""
        if not self.cusps:
            raise ValueError("no cusps: point is not associated to any cusp")
        _, bc, br = self.signed_distance_xt(p.x[None, :], np.array([p.t]), return_argmin=True)
        k, r = int(bc[0]), int(br[0])
        g = int(self._elts[k][r])
        return k, self.cusps[k].chart @ self.inv.elements[g], g

    def flow(self, p: Point, s: float) -> Point:
        """Flow ``p`` by time ``s`` along the geodesic to its nearest cusp point.

        ``s > 0`` moves away from the cusp point, i.e. ``(x, t) -> (x, t e^{-s})``
        in the chart of the nearest horoball.
        """
        _, chart, _ = self.nearest_chart(p)
        q = apply(chart, p)
        return apply(chart.inverse(), Point(q.x, q.t * math.exp(-s)))


def dist_to_thin(p: Point, inv: ElementInventory, lv: LevelAssignment,
                 thin: Optional[ThinPart] = None) -> float:
    """Distance from a thick point to the thin part.

    Raises ``ValueError`` if ``p`` is thin.
    """
    thin = ThinPart(inv, lv) if thin is None else thin
    d = thin.signed_distance(p)
    if d < 0.0:
        raise ValueError("point lies in the thin part")
    return d


def flow(p: Point, s: float, thin: ThinPart) -> Point:
    """Cusp flow; see :meth:`ThinPart.flow`."""
    return thin.flow(p, s)
