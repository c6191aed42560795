"""Nerve of the cover, degree bounds and the homology bound certificate.

A quotient simplex ``{v_0 < ... < v_k}`` is present when some lifts
``U_{v_0}, g_1 U_{v_1}, ..., g_k U_{v_k}`` have a common point.  Translating by
the lift of the smallest vertex, every realisation appears in the *frame* of
``v_0``: the lifts meeting the original ``U_{v_0}``.  Simplices are grown
level by level inside frames (a family is tested only when all its facets
through ``v_0`` are present), and all families of one level are decided in a
single batched ellipsoid run.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .build import CoverResult, ResourceLimitError, safe_orbit
from .cover import ball_volume, common_point, ellipsoid_feasibility, flow_time_cap
from .homology import HomologyResult, SimplicialComplex
from .hyperbolic import dist_xt
from .lifts import LiftTable

__all__ = [
    "NervePair",
    "BoundCertificate",
    "nerve",
    "packing_degree_bound",
    "ball_volume",
    "certify",
]

log = logging.getLogger(__name__)


@dataclass
class NervePair:
    """The nerve of the cover and its full subcomplex on stretched sets.

    Attributes
    ----------
    full, sub : SimplicialComplex
    max_degree : int
        Maximal vertex degree of the 1-skeleton of ``full``.
    vertex_count : int
    diagnostics : dict
        Counts of indeterminate families, multi-lift pairs, self-overlaps and
        faces added for closure.
    """

    full: SimplicialComplex
    sub: SimplicialComplex
    max_degree: int
    vertex_count: int
    diagnostics: dict = field(default_factory=dict)
    sub_vertices: Optional[np.ndarray] = None
    """Vertex of ``full`` for each vertex of ``sub``."""

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.vertex_count, dtype=int)
        E = self.full.simplices(1)
        if len(E):
            np.add.at(deg, E[:, 0], 1)
            np.add.at(deg, E[:, 1], 1)
        return deg

    def to_json(self) -> dict:
        return {
            "vertices": self.vertex_count,
            "max_degree": self.max_degree,
            "full": self.full.to_json(),
            "sub": self.sub.to_json(),
            "sub_vertices": [] if self.sub_vertices is None else [int(v) for v in self.sub_vertices],
            "diagnostics": self.diagnostics,
        }


def _family_charts(tab: LiftTable, fam: np.ndarray):
    """Chart matrix per family and a mask of families mixing cusp points."""
    B, k = fam.shape
    horo = tab.horo[fam]
    hmax = horo.max(axis=1)
    hmin = np.where(horo >= 0, horo, np.iinfo(int).max).min(axis=1)
    mixed = (hmax >= 0) & (hmin != hmax)
    # first stretched member, if any
    is_s = tab.is_str[fam]
    first = np.argmax(is_s, axis=1)
    any_s = is_s.any(axis=1)
    K = np.broadcast_to(np.eye(tab.n + 1), (B, tab.n + 1, tab.n + 1)).copy()
    sel = any_s
    K[sel] = tab.lc[fam[sel, first[sel]]]
    return K, mixed


def _unrelated_multi_lifts(tab: LiftTable, v: int, copies: np.ndarray, ws: np.ndarray,
                           multi: np.ndarray) -> int:
    """Sets ``w`` with two copies meeting ``U_v`` that no stabiliser element of ``U_v`` relates."""
    inv = tab.cover.inv
    gx, gt, gi = safe_orbit(inv.lightcone, tab.bx[v], tab.bt[v])
    fix = gi[(dist_xt(gx, gt, tab.bx[v][None, :], tab.bt[v]) < 1e-7) & (gi != 0)]
    count = 0
    for w in multi:
        cs = copies[ws == w]
        base = cs[0]
        for c in cs[1:]:
            related = False
            for h in fix:
                hx, ht, ok = safe_orbit(inv.lightcone[h][None], tab.bx[base], tab.bt[base])
                if ok.size and dist_xt(hx, ht, tab.bx[c][None, :], tab.bt[c])[0] < 1e-7:
                    related = True
                    break
            if not related:
                count += 1
                break
    return count


def _encode(P: np.ndarray, base: int) -> np.ndarray:
    """Integer key of each row of small non-negative integers."""
    key = np.zeros(P.shape[0], dtype=np.int64)
    for c in range(P.shape[1]):
        key = key * base + P[:, c]
    return key


def _unique_rows(R: np.ndarray, base: int) -> np.ndarray:
    """Sorted unique rows of a non-negative integer array with entries below ``base``."""
    if R.shape[1] * math.log2(base + 1) < 62:
        _, first = np.unique(_encode(R, base), return_index=True)
        return R[first]
    return np.unique(R, axis=0)


def _decide_families(tab: LiftTable, fam: np.ndarray, rel_tol: float, diag: dict,
                     chunk: int = 50000) -> np.ndarray:
    """Status of each family of lifts: 1 present, 0 absent, -1 indeterminate."""
    B, k = fam.shape
    status = np.zeros(B, dtype=int)
    if B == 0:
        return status
    K, mixed = _family_charts(tab, fam)
    ok = np.flatnonzero(~mixed)
    for a in range(0, ok.size, chunk):
        idx = ok[a:a + chunk]
        F = fam[idx]
        Kf = np.repeat(K[idx], k, axis=0)
        X, LO, HI, R = tab.segments(F.ravel(), Kf)
        st, _, _ = ellipsoid_feasibility(X.reshape(idx.size, k, -1), LO.reshape(idx.size, k),
                                         HI.reshape(idx.size, k), R.reshape(idx.size, k), rel_tol=rel_tol)
        status[idx] = st
    for b in np.flatnonzero(mixed):
        diag["mixed_cusp_families"] += 1
        _, st = common_point([tab.cover_set(int(j)) for j in fam[b]], return_status=True)
        status[b] = st
    return status


def nerve(cover: CoverResult, max_dim: Optional[int] = None, table: Optional[LiftTable] = None,
          max_simplices: int = 10_000_000, rel_tol: float = 1e-9) -> NervePair:
    """Nerve of the cover up to dimension ``max_dim`` (default ``n + 1``).

    Parameters
    ----------
    cover : CoverResult
    max_dim : int, optional
    table : LiftTable, optional
    max_simplices : int
        Resource cap; exceeding it raises :class:`ResourceLimitError`.

    Returns
    -------
    NervePair
    """
    n = cover.n
    max_dim = n + 1 if max_dim is None else int(max_dim)
    tab = table if table is not None else LiftTable(cover)
    V = tab.V
    diag = {"indeterminate": 0, "mixed_cusp_families": 0, "multi_lift_pairs": 0,
            "self_overlaps": 0, "closure_added": 0, "families_tested": {}, "max_dim": max_dim}
    # frames: copies of other sets meeting the original U_v
    frames: List[np.ndarray] = []
    edges = set()
    for v in range(V):
        nb = tab.neighbours(v)
        if nb.size == 0:
            frames.append(nb)
            continue
        st = tab.pairs_intersect(np.full(nb.size, v), nb, rel_tol)
        for j in np.flatnonzero(st < 0):
            _, s2 = common_point([tab.cover_set(v), tab.cover_set(int(nb[j]))], return_status=True)
            diag["mixed_cusp_families"] += 1
            if s2 < 0:
                diag["indeterminate"] += 1
            st[j] = max(s2, 0)
        copies = nb[st == 1]
        ws = tab.w[copies]
        diag["self_overlaps"] += int(np.sum(ws == v))
        copies, ws = copies[ws != v], ws[ws != v]
        u, cnt = np.unique(ws, return_counts=True)
        if np.any(cnt > 1):
            diag["multi_lift_pairs"] += _unrelated_multi_lifts(tab, v, copies, ws, u[cnt > 1])
        for w in u:
            edges.add((min(v, int(w)), max(v, int(w))))
        keep = ws > v
        order = np.lexsort((copies[keep], ws[keep]))
        frames.append(copies[keep][order])
    rows: Dict[int, np.ndarray] = {0: np.arange(V, dtype=np.int64)[:, None]}
    if edges:
        rows[1] = np.array(sorted(edges), dtype=np.int64)
    total = V + len(edges)
    # level 2 and up: cliques of copies inside each frame, as position arrays
    cur: Dict[int, np.ndarray] = {}
    adj: Dict[int, np.ndarray] = {}
    for v in range(V):
        F = frames[v]
        if F.size < 2 or max_dim < 2:
            continue
        i, j = np.triu_indices(F.size, 1)
        sel = tab.w[F[i]] < tab.w[F[j]]
        i, j = i[sel], j[sel]
        st = tab.pairs_intersect(F[i], F[j], rel_tol)
        for q in np.flatnonzero(st < 0):
            _, s2 = common_point([tab.cover_set(int(F[i[q]])), tab.cover_set(int(F[j[q]]))], return_status=True)
            diag["mixed_cusp_families"] += 1
            st[q] = max(s2, 0)
        A = np.zeros((F.size, F.size), dtype=bool)
        A[i[st == 1], j[st == 1]] = True
        adj[v] = A
        cur[v] = np.arange(F.size, dtype=np.int64)[:, None]
    for k in range(2, max_dim + 1):
        fam_v, fam_p = [], []
        for v, P in cur.items():
            A = adj[v]
            M = A[P[:, 0]]
            for c in range(1, P.shape[1]):
                M = M & A[P[:, c]]
            r, c = np.nonzero(M)
            if r.size == 0:
                continue
            Q = np.concatenate([P[r], c[:, None]], axis=1)
            if k > 2:
                base = A.shape[0] + 1
                keys = _encode(P, base)
                ok = np.ones(Q.shape[0], dtype=bool)
                for d in range(k - 1):
                    ok &= np.isin(_encode(np.delete(Q, d, axis=1), base), keys)
                Q = Q[ok]
            if Q.shape[0]:
                fam_v.append(np.full(Q.shape[0], v, dtype=np.int64))
                fam_p.append(Q)
        count = int(sum(q.shape[0] for q in fam_p))
        diag["families_tested"][str(k)] = count
        if count == 0:
            break
        if total + count > max_simplices * 4:
            raise ResourceLimitError(f"{count} candidate {k}-simplices exceed the cap")
        fv = np.concatenate(fam_v)
        fam = np.concatenate([frames[int(q[0])][p] for q, p in zip(fam_v, fam_p)])
        fam = np.concatenate([fv[:, None], fam], axis=1)
        st = _decide_families(tab, fam, rel_tol, diag)
        diag["indeterminate"] += int(np.sum(st < 0))
        keep = st == 1
        found = np.concatenate([fv[keep][:, None], tab.w[fam[keep, 1:]]], axis=1)
        if found.shape[0] == 0:
            break
        rows[k] = _unique_rows(found, V)
        total += rows[k].shape[0]
        if total > max_simplices:
            raise ResourceLimitError(f"nerve exceeds {max_simplices} simplices at dimension {k}")
        nxt, off = {}, 0
        for q, p in zip(fam_v, fam_p):
            sl = keep[off:off + p.shape[0]]
            off += p.shape[0]
            if np.any(sl):
                nxt[int(q[0])] = p[sl]
        cur = nxt
    # downward closure (faces missing only through inventory truncation)
    for k in range(max(rows), 1, -1):
        faces = np.concatenate([np.delete(rows[k], r, axis=1) for r in range(k + 1)])
        merged = _unique_rows(np.concatenate([rows[k - 1], faces]), V)
        diag["closure_added"] += int(merged.shape[0] - rows[k - 1].shape[0])
        rows[k - 1] = merged
    full = SimplicialComplex(V, rows)
    stretched = np.array([s.is_stretched for s in cover.sets], dtype=bool)
    sub = _full_subcomplex(full, stretched)
    deg = np.zeros(V, dtype=int)
    E = full.simplices(1)
    if len(E):
        np.add.at(deg, E[:, 0], 1)
        np.add.at(deg, E[:, 1], 1)
    diag["counts"] = full.counts()
    pair = NervePair(full, sub, int(deg.max()) if V else 0, V, diag, np.flatnonzero(stretched))
    return pair


def _full_subcomplex(cx: SimplicialComplex, mask: np.ndarray) -> SimplicialComplex:
    """Full subcomplex on the vertices where ``mask`` holds, relabelled ``0..m-1`` in order."""
    verts = np.flatnonzero(mask)
    label = -np.ones(cx.vertex_count, dtype=np.int64)
    label[verts] = np.arange(verts.size)
    rows = {}
    for k in range(1, cx.dim + 1):
        S = cx.simplices(k)
        if len(S):
            keep = np.all(mask[S], axis=1)
            if np.any(keep):
                rows[k] = label[S[keep]]
    return SimplicialComplex(int(verts.size), rows)


# ---------------------------------------------------------------------------
# degree bound
# ---------------------------------------------------------------------------


def packing_degree_bound(cover: CoverResult) -> dict:
    """Degree bound from enlarging every set to an ordinary ball.

    A stretched ball lies in the ball of radius ``R = cap + mu_{-1}`` about its
    initial centre, an ordinary ball has radius ``3 mu_i``.  If two sets meet,
    their centres are closer than ``2 R_max``.  Centres of one stratum are
    ``mu_i``-separated, so the disjoint ``mu_i/2``-balls around them give
    ``#neighbours in D_i <= vol B(2 R_max + mu_i/2) / vol B(mu_i/2)``.
    """
    casc = cover.cascade
    n = cover.n
    cap = flow_time_cap(cover.levels.eps_n)
    R_str = cap + casc.mu_minus1
    radii = [R_str if s.is_stretched else s.radius for s in cover.sets]
    R_max = max(radii) if radii else 0.0
    per = []
    for i in range(n + 1):
        if len(cover.centers.t[i]) == 0:
            per.append(0)
            continue
        mu = casc.of(i)
        per.append(int(math.floor(ball_volume(2 * R_max + mu / 2, n) / ball_volume(mu / 2, n))))
    return {"R_stretched": R_str, "R_max": R_max, "per_stratum": per, "bound": int(sum(per))}


# ---------------------------------------------------------------------------
# certificate
# ---------------------------------------------------------------------------


@dataclass
class BoundCertificate:
    """Measured constants and the homology bounds they imply."""

    n: int
    volume: float
    vertex_count: int
    max_degree: int
    C_hat: float
    D_hat: int
    E_hat: float
    F_hat: float
    betti_Q: List[int]
    log_torsion: List[float]
    betti_pass: List[bool]
    torsion_pass: List[bool]
    caveats: List[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.betti_pass) and all(self.torsion_pass)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "volume": self.volume,
            "vertex_count": self.vertex_count,
            "max_degree": self.max_degree,
            "C_hat": self.C_hat,
            "D_hat": self.D_hat,
            "E_hat": self.E_hat,
            "F_hat": self.F_hat,
            "betti_bound": self.E_hat * self.volume,
            "torsion_bound": self.F_hat * self.volume,
            "betti_Q": self.betti_Q,
            "log_torsion": self.log_torsion,
            "betti_pass": self.betti_pass,
            "torsion_pass": self.torsion_pass,
            "passed": self.passed,
            "caveats": self.caveats,
            "config": self.config,
        }

    def render(self) -> str:
        lines = [
            f"volume            {self.volume:.10g}",
            f"vertices          {self.vertex_count}",
            f"C_hat = V/vol     {self.C_hat:.6g}",
            f"D_hat             {self.D_hat}",
            f"E_hat             {self.E_hat:.6g}",
            f"F_hat             {self.F_hat:.6g}",
            "",
            f"{'k':>2}  {'b_k':>6}  {'E*vol':>12}  {'log|tors|':>10}  {'F*vol':>12}  result",
        ]
        for k in range(len(self.betti_Q)):
            ok = self.betti_pass[k] and self.torsion_pass[k]
            lines.append(f"{k:>2}  {self.betti_Q[k]:>6}  {self.E_hat * self.volume:>12.6g}  "
                         f"{self.log_torsion[k]:>10.4g}  {self.F_hat * self.volume:>12.6g}  "
                         f"{'pass' if ok else 'FAIL'}")
        for c in self.caveats:
            lines.append(f"note: {c}")
        return "\n".join(lines)


def certify(pair: NervePair, n: int, volume: Optional[float], hom: HomologyResult,
            caveats: Sequence[str] = (), config: Optional[dict] = None) -> BoundCertificate:
    """Bounds ``b_k <= E vol`` and ``log|tors H_k| <= F vol`` with measured constants.

    ``C_hat = vertex_count / volume``, ``D_hat = max_degree``,
    ``E_hat = (D^{n-1} + D^n + 1) C_hat`` and ``F_hat = D^n ln(n+2) C_hat``.
    """
    if volume is None or not (volume > 0 and math.isfinite(volume)):
        raise ValueError("certificate needs a positive finite volume")
    V, D = pair.vertex_count, pair.max_degree
    C = V / volume
    E = (D ** (n - 1) + D ** n + 1) * C
    F = D ** n * math.log(n + 2) * C
    b = [int(x) for x in hom.betti_Q]
    lt = [float(x) for x in hom.log_torsion]
    return BoundCertificate(
        n, float(volume), V, D, C, D, E, F, b, lt,
        [bk <= E * volume for bk in b], [tk <= F * volume for tk in lt],
        list(caveats), dict(config or {}),
    )
