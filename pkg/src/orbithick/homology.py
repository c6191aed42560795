"""Integer simplicial homology.

Boundary matrices are assembled sparsely.  Homology is computed by reducing the
chain complex with unit pivots (which preserves integral homology exactly) and
then taking Smith normal forms of whatever remains, using Python integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SimplicialComplex",
    "HomologyResult",
    "boundary_matrix",
    "smith_normal_form",
    "smith_normal_form_with_transforms",
    "homology",
    "relative_homology",
    "euler_characteristic",
]


# ---------------------------------------------------------------------------
# simplicial complexes
# ---------------------------------------------------------------------------


def _sorted_rows(a: np.ndarray) -> np.ndarray:
    if a.shape[0] == 0:
        return a
    a = np.sort(a, axis=1)
    order = np.lexsort(a.T[::-1])
    a = a[order]
    keep = np.ones(a.shape[0], dtype=bool)
    keep[1:] = np.any(a[1:] != a[:-1], axis=1)
    return a[keep]


class SimplicialComplex:
    """A finite abstract simplicial complex.

    Parameters
    ----------
    vertex_count : int
        Vertices are ``0, ..., vertex_count - 1``.
    simplices : dict
        Maps dimension ``k >= 1`` to an array of shape ``(m, k+1)`` (or a list of
        tuples).  Rows are sorted and deduplicated.
    """

    def __init__(self, vertex_count: int, simplices: Optional[Dict[int, Iterable]] = None):
        self.vertex_count = int(vertex_count)
        self._s: Dict[int, np.ndarray] = {0: np.arange(self.vertex_count, dtype=np.int64)[:, None]}
        for k, rows in (simplices or {}).items():
            k = int(k)
            if k < 1:
                continue
            arr = np.asarray(list(rows) if not isinstance(rows, np.ndarray) else rows, dtype=np.int64)
            if arr.size == 0:
                continue
            arr = arr.reshape(-1, k + 1)
            if np.any(arr < 0) or np.any(arr >= self.vertex_count):
                raise ValueError("simplex refers to a nonexistent vertex")
            arr = _sorted_rows(arr)
            if np.any(arr[:, 1:] == arr[:, :-1]):
                raise ValueError("simplex with repeated vertex")
            self._s[k] = arr
        top = max(self._s)
        for k in range(1, top + 1):
            self._s.setdefault(k, np.zeros((0, k + 1), dtype=np.int64))

    @classmethod
    def from_maximal(cls, vertex_count: int, maximal: Iterable[Sequence[int]]) -> "SimplicialComplex":
        """Downward closure of a list of simplices."""
        by_dim: Dict[int, set] = {}
        for s in maximal:
            s = tuple(sorted(int(v) for v in s))
            for r in range(2, len(s) + 1):
                for f in _combinations(s, r):
                    by_dim.setdefault(r - 1, set()).add(f)
        return cls(vertex_count, {k: sorted(v) for k, v in by_dim.items()})

    @property
    def dim(self) -> int:
        ks = [k for k, a in self._s.items() if a.shape[0] > 0]
        return max(ks) if ks else -1

    def simplices(self, k: int) -> np.ndarray:
        if k in self._s:
            return self._s[k]
        return np.zeros((0, k + 1), dtype=np.int64)

    def count(self, k: int) -> int:
        return int(self.simplices(k).shape[0])

    def counts(self) -> List[int]:
        return [self.count(k) for k in range(self.dim + 1)]

    def index(self, k: int, rows: np.ndarray) -> np.ndarray:
        """Positions of the given sorted ``k``-simplices in ``simplices(k)`` (``-1`` if absent)."""
        ref = self.simplices(k)
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, k + 1)
        if ref.shape[0] == 0:
            return -np.ones(rows.shape[0], dtype=np.int64)
        kr, kq = _keys(ref, self.vertex_count), _keys(rows, self.vertex_count)
        pos = np.searchsorted(kr, kq)
        pos = np.minimum(pos, ref.shape[0] - 1)
        ok = kr[pos] == kq
        return np.where(ok, pos, -1)

    def is_closed(self) -> bool:
        for k in range(1, self.dim + 1):
            s = self.simplices(k)
            for i in range(k + 1):
                f = np.delete(s, i, axis=1)
                if np.any(self.index(k - 1, f) < 0):
                    return False
        return True

    def relabel(self, perm: Sequence[int]) -> "SimplicialComplex":
        perm = np.asarray(perm, dtype=np.int64)
        return SimplicialComplex(self.vertex_count, {k: perm[self.simplices(k)] for k in range(1, self.dim + 1)})

    def skeleton(self, d: int) -> "SimplicialComplex":
        return SimplicialComplex(self.vertex_count, {k: self.simplices(k) for k in range(1, d + 1)})

    def to_json(self) -> dict:
        return {
            "vertices": self.vertex_count,
            "simplices": {str(k): self.simplices(k).tolist() for k in range(1, self.dim + 1)},
        }

    @classmethod
    def from_json(cls, d: dict) -> "SimplicialComplex":
        return cls(int(d["vertices"]), {int(k): v for k, v in d.get("simplices", {}).items()})


def _combinations(s, r):
    from itertools import combinations

    return combinations(s, r)


def _keys(rows: np.ndarray, base: int) -> np.ndarray:
    """Order-preserving integer keys of sorted rows."""
    k1 = rows.shape[1]
    base = max(base, 2)
    if base ** k1 < 2**62:
        key = np.zeros(rows.shape[0], dtype=np.int64)
        for j in range(k1):
            key = key * base + rows[:, j]
        return key
    # fall back to an order-preserving object key
    return np.array([tuple(r) for r in rows.tolist()], dtype=object)


def boundary_matrix(cx: SimplicialComplex, k: int) -> sp.csc_matrix:
    """Sparse integer matrix of the boundary map ``C_k -> C_{k-1}``."""
    if k < 1 or k > max(cx.dim, 1):
        raise ValueError(f"boundary degree {k} out of range 1..{cx.dim}")
    s = cx.simplices(k)
    m = s.shape[0]
    rows, cols, vals = [], [], []
    for i in range(k + 1):
        f = np.delete(s, i, axis=1)
        idx = cx.index(k - 1, f)
        if np.any(idx < 0):
            raise ValueError("complex is not closed under faces")
        rows.append(idx)
        cols.append(np.arange(m))
        vals.append(np.full(m, -1 if i % 2 else 1, dtype=np.int64))
    if m == 0:
        return sp.csc_matrix((cx.count(k - 1), 0), dtype=np.int64)
    return sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(cx.count(k - 1), m),
        dtype=np.int64,
    )


def euler_characteristic(cx: SimplicialComplex) -> int:
    return int(sum((-1) ** k * c for k, c in enumerate(cx.counts())))


# ---------------------------------------------------------------------------
# Smith normal form
# ---------------------------------------------------------------------------


def _snf_core(M: List[List[int]], track: bool):
    m = len(M)
    n = len(M[0]) if m else 0
    U = [[int(i == j) for j in range(m)] for i in range(m)] if track else None
    V = [[int(i == j) for j in range(n)] for i in range(n)] if track else None

    def swap_rows(i, j):
        M[i], M[j] = M[j], M[i]
        if track:
            U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for row in M:
            row[i], row[j] = row[j], row[i]
        if track:
            for row in V:
                row[i], row[j] = row[j], row[i]

    def add_row(dst, src, q):  # row_dst -= q row_src
        rd, rs = M[dst], M[src]
        for c in range(n):
            if rs[c]:
                rd[c] -= q * rs[c]
        if track:
            ud, us = U[dst], U[src]
            for c in range(m):
                if us[c]:
                    ud[c] -= q * us[c]

    def add_col(dst, src, q):  # col_dst -= q col_src
        for row in M:
            if row[src]:
                row[dst] -= q * row[src]
        if track:
            for row in V:
                if row[src]:
                    row[dst] -= q * row[src]

    def negate_row(i):
        M[i] = [-v for v in M[i]]
        if track:
            U[i] = [-v for v in U[i]]

    t = 0
    while t < min(m, n):
        best = None
        for i in range(t, m):
            row = M[i]
            for j in range(t, n):
                v = row[j]
                if v and (best is None or abs(v) < best[0]):
                    best = (abs(v), i, j)
                    if best[0] == 1:
                        break
            if best is not None and best[0] == 1:
                break
        if best is None:
            break
        _, i, j = best
        swap_rows(t, i)
        swap_cols(t, j)
        while True:
            p = M[t][t]
            dirty = False
            for i in range(t + 1, m):
                if M[i][t]:
                    q = _round_div(M[i][t], p)
                    add_row(i, t, q)
                    if M[i][t]:
                        dirty = True
            for j in range(t + 1, n):
                if M[t][j]:
                    q = _round_div(M[t][j], p)
                    add_col(j, t, q)
                    if M[t][j]:
                        dirty = True
            if dirty:
                best = None
                for i in range(t + 1, m):
                    if M[i][t] and (best is None or abs(M[i][t]) < best[0]):
                        best = (abs(M[i][t]), "r", i)
                for j in range(t + 1, n):
                    if M[t][j] and (best is None or abs(M[t][j]) < best[0]):
                        best = (abs(M[t][j]), "c", j)
                if best[1] == "r":
                    swap_rows(t, best[2])
                else:
                    swap_cols(t, best[2])
                continue
            bad = None
            for i in range(t + 1, m):
                row = M[i]
                for j in range(t + 1, n):
                    if row[j] % p:
                        bad = i
                        break
                if bad is not None:
                    break
            if bad is None:
                break
            add_row(t, bad, -1)
        if M[t][t] < 0:
            negate_row(t)
        t += 1
    return t, U, V


def _round_div(a: int, b: int) -> int:
    q, r = divmod(a, b)
    if 2 * abs(r) > abs(b):
        q += 1 if (r > 0) == (b > 0) else -1
    return q


def _as_int_rows(A) -> List[List[int]]:
    if sp.issparse(A):
        A = A.toarray()
    return [[int(v) for v in row] for row in np.asarray(A, dtype=object).tolist()] if len(A) else []


def smith_normal_form(A):
    """Invariant factors ``d_1 | d_2 | ... | d_r`` and rank of an integer matrix."""
    M = _as_int_rows(A)
    if not M or not M[0]:
        return [], 0
    r, _, _ = _snf_core(M, track=False)
    return [abs(M[i][i]) for i in range(r)], r


def smith_normal_form_with_transforms(A):
    """Return ``(D, U, V)`` with ``U A V = D`` and ``U, V`` unimodular."""
    M = _as_int_rows(A)
    m = len(M)
    n = len(M[0]) if m else 0
    if m == 0 or n == 0:
        return (np.zeros((m, n), dtype=object), np.eye(m, dtype=int).astype(object),
                np.eye(n, dtype=int).astype(object))
    _, U, V = _snf_core(M, track=True)
    return np.array(M, dtype=object), np.array(U, dtype=object), np.array(V, dtype=object)


# ---------------------------------------------------------------------------
# chain complex reduction
# ---------------------------------------------------------------------------


@dataclass
class HomologyResult:
    """Homology in degrees ``0..len(betti_Q)-1``."""

    betti_Q: List[int]
    betti_Fp: Dict[int, List[int]]
    torsion_factors: List[List[int]]
    reduced_sizes: List[int] = field(default_factory=list)

    @property
    def log_torsion(self) -> List[float]:
        return [float(sum(math.log(f) for f in fs)) for fs in self.torsion_factors]

    def to_json(self) -> dict:
        return {
            "betti_Q": list(self.betti_Q),
            "betti_Fp": {str(p): list(v) for p, v in sorted(self.betti_Fp.items())},
            "torsion_factors": [list(map(int, fs)) for fs in self.torsion_factors],
            "log_torsion": [round(v, 12) for v in self.log_torsion],
        }


def _select_pivots(M: sp.csr_matrix, budget: int):
    """Unit pivots ``(rows, cols, signs)`` whose submatrix ``M[rows, cols]`` is diagonal.

    Entries are taken in order of Markowitz cost ``(r - 1)(c - 1)``; the total
    cost, an upper bound on the fill, stays within ``budget`` unless it is zero.
    """
    M = M.tocsr()
    ncol = M.shape[1]
    rc = np.diff(M.indptr)
    cc = np.bincount(M.indices, minlength=ncol)
    U = M.copy()
    U.data = np.where(np.abs(U.data) == 1, 1, 0)
    U.eliminate_zeros()
    if U.nnz == 0:
        return None
    # cheapest unit entry of each row: smallest column count, then smallest column
    key = cc[U.indices].astype(np.int64) * ncol + U.indices
    r = np.flatnonzero(np.diff(U.indptr))
    c = np.minimum.reduceat(key, U.indptr[r]) % ncol
    cost = (rc[r] - 1) * (cc[c] - 1)
    order = np.lexsort((r, c, cost))
    r, c, cost = r[order], c[order], cost[order]
    _, first = np.unique(c, return_index=True)
    first.sort()
    r, c, cost = r[first], c[first], cost[first]
    v = np.asarray(M[r, c]).ravel()
    take = (cost == 0) | (np.cumsum(cost) <= budget)
    take[0] = True
    r, c, v = r[take], c[take], v[take]
    # drop the later pivot of every cross entry
    S = M[r][:, c].tocoo()
    off = S.row != S.col
    if np.any(off):
        bad = np.zeros(r.size, dtype=bool)
        bad[np.maximum(S.row[off], S.col[off])] = True
        r, c, v = r[~bad], c[~bad], v[~bad]
    return r, c, v


def _reduce(d: Dict[int, sp.csr_matrix], sizes: List[int]) -> None:
    """Remove unit-pivot pairs from the chain complex in place (Schur complements)."""
    busy = True
    while busy:
        busy = False
        for k in sorted(d):
            M = d[k]
            if M.nnz == 0:
                continue
            piv = _select_pivots(M, max(M.nnz, 10_000))
            if piv is None:
                continue
            A, B, eps = piv
            busy = True
            kr = np.ones(M.shape[0], dtype=bool)
            kc = np.ones(M.shape[1], dtype=bool)
            kr[A] = False
            kc[B] = False
            Mr = M[kr]
            E = sp.diags(eps.astype(np.int64))
            # M[A, B] = diag(eps) is its own inverse
            N = Mr[:, kc] - (Mr[:, B] @ E) @ M[A][:, kc]
            N.eliminate_zeros()
            if N.nnz and np.abs(N.data).max() > 2 ** 40:
                raise OverflowError("boundary entries grew too large during reduction")
            d[k] = N.tocsr()
            if k + 1 in d:
                d[k + 1] = d[k + 1][kc]
            if k - 1 in d:
                d[k - 1] = d[k - 1][:, kr]
            sizes[k - 1] -= A.size
            sizes[k] -= B.size


def _homology_of(sizes: List[int], d: Dict[int, sp.spmatrix], primes: Sequence[int]) -> HomologyResult:
    top = len(sizes) - 1
    sizes = list(sizes)
    d = {k: sp.csr_matrix(m, dtype=np.int64) for k, m in d.items()}
    _reduce(d, sizes)
    ranks, factors = {}, {}
    for k in range(1, top + 1):
        M = d[k]
        rows = np.unique(M.tocoo().row)
        cols = np.unique(M.tocoo().col)
        if rows.size == 0:
            ranks[k], factors[k] = 0, []
            continue
        dense = M[rows][:, cols].toarray().astype(np.int64).tolist()
        f, r = smith_normal_form(dense)
        ranks[k], factors[k] = r, f
    betti_Q, torsion = [], []
    betti_Fp = {p: [] for p in primes}
    for k in range(top + 1):
        dimk = sizes[k]
        rk = ranks.get(k, 0)
        rk1 = ranks.get(k + 1, 0)
        betti_Q.append(dimk - rk - rk1)
        torsion.append([int(v) for v in factors.get(k + 1, []) if v > 1])
        for p in primes:
            rp = sum(1 for v in factors.get(k, []) if v % p)
            rp1 = sum(1 for v in factors.get(k + 1, []) if v % p)
            betti_Fp[p].append(dimk - rp - rp1)
    return HomologyResult(betti_Q, betti_Fp, torsion, sizes)


def homology(cx: SimplicialComplex, primes: Sequence[int] = (2, 3), top: Optional[int] = None) -> HomologyResult:
    """Integral homology of a simplicial complex in degrees ``0..top``.

    ``top`` defaults to the dimension of the complex.  The boundary map one
    degree above ``top`` is included when present, so ``H_top`` is exact.
    Betti numbers over the rationals and over ``F_p`` for each prime in
    ``primes`` are derived from the Smith normal forms of the reduced boundaries.
    """
    top = cx.dim if top is None else max(int(top), 0)
    d = min(cx.dim, top + 1) if cx.dim > top else top
    sizes = [cx.count(k) for k in range(d + 1)]
    bd = {}
    for k in range(1, d + 1):
        bd[k] = boundary_matrix(cx, k) if cx.count(k) else sp.csc_matrix((sizes[k - 1], sizes[k]), dtype=np.int64)
    res = _homology_of(sizes, bd, primes)
    return _truncate(res, top)


def _truncate(res: HomologyResult, top: int) -> HomologyResult:
    m = top + 1
    return HomologyResult(res.betti_Q[:m], {p: v[:m] for p, v in res.betti_Fp.items()},
                          res.torsion_factors[:m], res.reduced_sizes[:m])


def cone_over(cx: SimplicialComplex, sub: SimplicialComplex, vertex_map: Optional[Sequence[int]] = None
              ) -> SimplicialComplex:
    """``cx`` with a cone on ``sub`` attached; the apex is the new last vertex."""
    V = cx.vertex_count
    vm = np.arange(sub.vertex_count) if vertex_map is None else np.asarray(vertex_map, dtype=np.int64)
    rows = {k: cx.simplices(k) for k in range(1, cx.dim + 1)}
    for k in range(0, sub.dim + 1):
        S = sub.simplices(k)
        if len(S) == 0:
            continue
        C = np.concatenate([vm[S], np.full((len(S), 1), V, dtype=np.int64)], axis=1)
        rows[k + 1] = np.concatenate([rows[k + 1], C]) if k + 1 in rows and len(rows[k + 1]) else C
    return SimplicialComplex(V + 1, rows)


def relative_homology(cx: SimplicialComplex, sub: SimplicialComplex, primes: Sequence[int] = (2, 3),
                      top: Optional[int] = None, vertex_map: Optional[Sequence[int]] = None) -> HomologyResult:
    """Homology of the pair ``(cx, sub)``, computed as reduced homology of ``cx`` with a cone on ``sub``.

    ``vertex_map[i]`` is the vertex of ``cx`` labelled ``i`` in ``sub``; without
    it both complexes share the vertex set.
    """
    top = cx.dim if top is None else int(top)
    res = homology(cone_over(cx, sub, vertex_map), primes, top)
    bq = list(res.betti_Q)
    bq[0] -= 1
    bf = {p: [v[0] - 1] + list(v[1:]) for p, v in res.betti_Fp.items()}
    return HomologyResult(bq, bf, res.torsion_factors, res.reduced_sizes)
