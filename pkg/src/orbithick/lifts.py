"""Catalogue of lifts ``g U_w`` of cover sets near the fundamental region.

Each lift is stored as arrays so that membership and pairwise intersection
tests run vectorised.  A stretched lift keeps the light-cone matrix of its
chart ``C_w g^{-1}``; lifts of stretched balls around the same cusp point share
a horoball id, which decides when two of them live in a common chart.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .build import CoverResult, safe_orbit
from .cover import CoverSet
from .hyperbolic import (
    Isometry,
    Point,
    _from_lightcone,
    _lightcone_basis,
    _to_lightcone,
    dist_xt,
    to_hyperboloid,
)

__all__ = ["LiftTable", "hball_query"]


def hball_query(tree: cKDTree, x: np.ndarray, t: np.ndarray, rho) -> list:
    """Tree points (half-space coordinates) within hyperbolic distance ``rho`` of each query."""
    rho = np.broadcast_to(np.asarray(rho, dtype=float), t.shape)
    q = np.concatenate([x, (t * np.cosh(rho))[:, None]], axis=1)
    return tree.query_ball_point(q, t * np.sinh(rho))


class LiftTable:
    """Lifts of all cover sets whose bounding balls come near the originals.

    Parameters
    ----------
    cover : CoverResult
    reach : float, optional
        A lift is kept when its bounding ball comes within ``reach`` of the
        bounding ball of some original set.  Defaults to twice the largest
        bounding radius, enough for every frame and every sample near the region.

    Attributes
    ----------
    w, g : ndarray of int
        Cover set index and inventory element of each lift; row ``w`` of the
        first ``V`` rows is the original set ``w``.
    """

    def __init__(self, cover: CoverResult, reach: Optional[float] = None):
        self.cover = cover
        inv = cover.inv
        self.n = n = inv.n
        sets = cover.sets
        V = len(sets)
        self.V = V
        bc = [s.bounding_ball() for s in sets]
        bx = np.array([c.x for c, _ in bc]).reshape(V, n - 1)
        bt = np.array([c.t for c, _ in bc])
        bR = np.array([r for _, r in bc])
        self.R_max = float(bR.max()) if V else 0.0
        reach = 2.0 * self.R_max if reach is None else reach
        otree = cKDTree(np.concatenate([bx, bt[:, None]], axis=1)) if V else None
        lc = inv.lightcone
        W, G, X, T = [list(range(V))], [[0] * V], [bx], [bt]
        for w in range(V):
            gx, gt, gi = safe_orbit(lc, bx[w], bt[w])
            hits = hball_query(otree, gx, gt, bR[w] + self.R_max + reach)
            near = np.array([len(h) > 0 for h in hits], dtype=bool)
            gx, gt, gi = gx[near], gt[near], gi[near]
            # drop images equal to an earlier one (stabiliser copies), keeping the shortest word
            H = np.round(to_hyperboloid(gx, gt), 7)
            _, first = np.unique(H, axis=0, return_index=True)
            first = np.sort(first)
            gx, gt, gi = gx[first], gt[first], gi[first]
            other = gi != 0
            W.append(np.full(int(other.sum()), w))
            G.append(gi[other])
            X.append(gx[other])
            T.append(gt[other])
        self.w = np.concatenate([np.asarray(a, dtype=int) for a in W])
        self.g = np.concatenate([np.asarray(a, dtype=int) for a in G])
        self.bx = np.concatenate(X)
        self.bt = np.concatenate(T)
        self.bR = bR[self.w]
        self.is_str = np.array([sets[w].is_stretched for w in self.w], dtype=bool)
        m = self.w.size
        # balls
        self.cx = np.zeros((m, n - 1))
        self.ct = np.ones(m)
        self.rho = np.array([sets[w].radius for w in self.w])
        # stretched: chart light-cone matrices and axis data
        self.lc = np.zeros((m, n + 1, n + 1))
        self.ax = np.zeros((m, n - 1))
        self.lo = np.zeros(m)
        self.hi = np.zeros(m)
        self.r = np.zeros(m)
        for k in range(m):
            s = sets[self.w[k]]
            if s.is_stretched:
                U = s.stretched
                ginv = np.linalg.inv(inv.lightcone[self.g[k]])
                self.lc[k] = U.chart._lc @ ginv
                self.ax[k], self.lo[k], self.hi[k], self.r[k] = U.axis_x, U.t_lo, U.t_hi, U.r_eucl
            else:
                self.cx[k], self.ct[k] = _images(inv.lightcone[self.g[k]], s.center)
        self.horo = -np.ones(m, dtype=int)
        if np.any(self.is_str):
            idx = np.flatnonzero(self.is_str)
            B = _lightcone_basis(n)
            e = np.zeros(n + 1)
            e[-1] = 1.0
            Z = np.einsum("ij,mjk,k->mi", B, np.linalg.inv(self.lc[idx]), e)
            Z = Z * np.sign(Z[:, -1:])
            S = np.round(Z[:, :-1] / Z[:, -1:], 6)
            _, lab = np.unique(S, axis=0, return_inverse=True)
            self.horo[idx] = lab.ravel()
        self.tree = cKDTree(np.concatenate([self.bx, self.bt[:, None]], axis=1))

    def __len__(self) -> int:
        return int(self.w.size)

    def cover_set(self, k: int) -> CoverSet:
        """The lift ``k`` as a :class:`CoverSet`."""
        s = self.cover.sets[self.w[k]]
        if self.g[k] == 0:
            return s
        return s.lifted(self.cover.inv.elements[self.g[k]])

    # ------------------------------------------------------------------
    # membership
    # ------------------------------------------------------------------

    def contains(self, px: np.ndarray, pt: np.ndarray, lift: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Whether point ``i`` lies in lift ``lift[i]`` (pairs of equal length)."""
        lift = np.asarray(lift, dtype=int)
        out = np.zeros(lift.size, dtype=bool)
        b = ~self.is_str[lift]
        if np.any(b):
            L = lift[b]
            d = dist_xt(px[b], pt[b], self.cx[L], self.ct[L])
            out[b] = d < self.rho[L] * (1 - margin)
        s = ~b
        if np.any(s):
            L = lift[s]
            qx, qt = _from_lightcone(np.einsum("mij,mj->mi", self.lc[L], _to_lightcone(px[s], pt[s])))
            gap = qt - np.clip(qt, self.lo[L], self.hi[L])
            d = np.sqrt(np.sum((qx - self.ax[L]) ** 2, axis=1) + gap ** 2)
            out[s] = d < self.r[L] * (1 - margin)
        return out

    def covering_lifts(self, px: np.ndarray, pt: np.ndarray, margin: float = 0.0) -> list:
        """For each point, the lifts containing it."""
        cand = hball_query(self.tree, px, pt, self.R_max)
        pi = np.concatenate([np.full(len(c), i) for i, c in enumerate(cand)]).astype(int)
        li = np.concatenate([np.asarray(c, dtype=int) for c in cand]).astype(int)
        ok = self.contains(px[pi], pt[pi], li, margin) if li.size else np.zeros(0, bool)
        out = [[] for _ in range(len(pt))]
        for a, b in zip(pi[ok], li[ok]):
            out[a].append(int(b))
        return out

    def covered(self, px: np.ndarray, pt: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Whether each point lies in at least one lift."""
        out = np.zeros(len(pt), dtype=bool)
        for i, c in enumerate(self.covering_lifts(px, pt, margin)):
            out[i] = bool(c)
        return out

    # ------------------------------------------------------------------
    # charts and pair tests
    # ------------------------------------------------------------------

    def segments(self, lifts: np.ndarray, K: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Vertical segments ``(X, LO, HI, R)`` of lifts in charts with light-cone matrices ``K``.

        ``K`` is one matrix or one per lift.  Stretched lifts must share the
        cusp point of their chart; this is not checked.
        """
        lifts = np.asarray(lifts, dtype=int)
        m = lifts.size
        K = np.broadcast_to(np.asarray(K, dtype=float), (m, self.n + 1, self.n + 1))
        n1 = self.n - 1
        X, LO, HI, R = np.zeros((m, n1)), np.zeros(m), np.zeros(m), np.zeros(m)
        b = ~self.is_str[lifts]
        if np.any(b):
            L = lifts[b]
            qx, qt = _from_lightcone(np.einsum("mij,mj->mi", K[b], _to_lightcone(self.cx[L], self.ct[L])))
            ch, sh = np.cosh(self.rho[L]), np.sinh(self.rho[L])
            X[b], LO[b], HI[b], R[b] = qx, qt * ch, qt * ch, qt * sh
        s = ~b
        if np.any(s):
            L = lifts[s]
            M = np.einsum("mij,mjk->mik", K[s], np.linalg.inv(self.lc[L]))
            qx0, qt0 = _from_lightcone(np.einsum("mij,mj->mi", M, _to_lightcone(self.ax[L], self.lo[L])))
            _, qt1 = _from_lightcone(np.einsum("mij,mj->mi", M, _to_lightcone(self.ax[L], self.hi[L])))
            X[s], LO[s], HI[s] = qx0, qt0, qt1
            R[s] = self.r[L] * qt0 / self.lo[L]
        return X, LO, HI, R

    def chart_of(self, k: int) -> np.ndarray:
        """A chart light-cone matrix in which lift ``k`` is a vertical capsule."""
        if self.is_str[k]:
            return self.lc[k]
        return np.eye(self.n + 1)

    def pairs_intersect(self, a: np.ndarray, b: np.ndarray, rel_tol: float = 1e-9) -> np.ndarray:
        """Exact pairwise intersection for lift pairs sharing a chart.

        Pairs of stretched lifts at different cusp points are returned as
        ``-1`` (undecided here); other entries are 0 or 1.
        """
        a0 = np.asarray(a, dtype=int)
        b0 = np.asarray(b, dtype=int)
        out0 = np.zeros(a0.size, dtype=int)
        # bounding balls first
        near = dist_xt(self.bx[a0], self.bt[a0], self.bx[b0], self.bt[b0]) < self.bR[a0] + self.bR[b0]
        a, b = a0[near], b0[near]
        out = np.zeros(a.size, dtype=int)
        sa, sb = self.is_str[a], self.is_str[b]
        bb = ~sa & ~sb
        if np.any(bb):
            A, B = a[bb], b[bb]
            d = dist_xt(self.cx[A], self.ct[A], self.cx[B], self.ct[B])
            out[bb] = d < (self.rho[A] + self.rho[B]) * (1 - rel_tol)
        mixed = (sa | sb) & ~(sa & sb & (self.horo[a] != self.horo[b]))
        if np.any(mixed):
            # chart of the stretched member (a if stretched, else b)
            idx = np.flatnonzero(mixed)
            key = np.where(sa[idx], a[idx], b[idx])
            K = self.lc[key]
            Xa, La, Ha, Ra = self.segments(a[idx], K)
            Xb, Lb, Hb, Rb = self.segments(b[idx], K)
            gap = np.maximum(0.0, np.maximum(Lb - Ha, La - Hb))
            d = np.sqrt(np.sum((Xa - Xb) ** 2, axis=1) + gap ** 2)
            res = d < (Ra + Rb) * (1 - rel_tol)
            out[idx] = res
        other = sa & sb & (self.horo[a] != self.horo[b])
        out[other] = -1
        out0[near] = out
        return out0

    def neighbours(self, k: int) -> np.ndarray:
        """Lifts whose bounding ball meets that of lift ``k`` (excluding ``k``)."""
        hits = hball_query(self.tree, self.bx[k][None, :], np.array([self.bt[k]]), self.bR[k] + self.R_max)[0]
        hits = np.asarray(hits, dtype=int)
        if hits.size:
            d = dist_xt(self.bx[hits], self.bt[hits], self.bx[k][None, :], self.bt[k])
            hits = hits[(d < self.bR[hits] + self.bR[k]) & (hits != k)]
        return np.sort(hits)


def _images(lc: np.ndarray, p: Point):
    qx, qt = _from_lightcone(lc @ _to_lightcone(p.x[None, :], np.array([p.t]))[0])
    return qx, float(qt)
