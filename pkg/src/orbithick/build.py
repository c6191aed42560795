"""Construction of the cover of the shrunken thick part.

Centres are generated stratum by stratum inside a fundamental region: for
cusped lattices the union over cusps of the horoball Voronoi cells (points
whose nearest horoball lift is the identity copy of their own cusp, reduced
modulo the cusp lattice), and for cocompact or trivial groups a Dirichlet
region around a generic basepoint.  Candidates form a jittered grid of pitch
``pitch_factor * mu_i``; shell candidates are projected onto
``{d_thin = 2 mu_{-1} - 8 mu_i}`` by the cusp flow and enter the greedy pass
first.  Shell centres become stretched balls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .cover import (
    CoverSet,
    MuCascade,
    StretchError,
    ball_volume,
    flow_time_cap,
    greedy_discrete,
    make_stretched,
)
from .groups import ElementInventory, LatticeSpec, singular_strata
from .hyperbolic import (
    DEFAULT_TOL,
    Point,
    Tolerances,
    _from_lightcone,
    _to_lightcone,
    dist_xt,
    from_hyperboloid,
    to_hyperboloid,
)
from .thickthin import LevelAssignment, ThinPart

__all__ = [
    "CoverConfig",
    "CenterSets",
    "CoverResult",
    "CoverBuildError",
    "CuspRegion",
    "DirichletRegion",
    "ResourceLimitError",
    "build_cover",
    "flow_xt",
    "safe_orbit",
]


class CoverBuildError(RuntimeError):
    """The cover could not be built with the given parameters."""


class ResourceLimitError(RuntimeError):
    """A configured size cap was exceeded."""


@dataclass(frozen=True)
class CoverConfig:
    """Sampling parameters of the cover construction.

    Attributes
    ----------
    pitch_factor : float
        Candidate pitch as a fraction of ``mu_i`` (at most 1/4).
    seed : int
        Seed of the grid jitter.
    basepoint : tuple, optional
        ``(x, t)`` of the Dirichlet basepoint for groups without cusps.
    window_radius : float, optional
        Radius of the Dirichlet window; required for the trivial group.
    shell_band : float
        Points with ``|d_thin - level| < shell_band * mu_i`` count as shell points.
    max_candidates : int
        Cap on the number of candidates per stratum.
    max_vertex_estimate : int
        Cap on the estimated vertex count ``volume / vol B(mu_n / 2)``,
        checked before any sampling.
    """

    pitch_factor: float = 0.25
    seed: int = 0
    basepoint: Optional[tuple] = None
    window_radius: Optional[float] = None
    shell_band: float = 0.01
    max_candidates: int = 3_000_000
    max_vertex_estimate: int = 10_000

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "CoverConfig":
        d = dict(d or {})
        if "basepoint" in d and d["basepoint"] is not None:
            bp = d["basepoint"]
            d["basepoint"] = (tuple(float(v) for v in bp["x"]), float(bp["t"]))
        return cls(**d)

    def to_json(self) -> dict:
        bp = None if self.basepoint is None else {"x": list(self.basepoint[0]), "t": self.basepoint[1]}
        return {"pitch_factor": self.pitch_factor, "seed": self.seed, "basepoint": bp,
                "window_radius": self.window_radius, "shell_band": self.shell_band,
                "max_candidates": self.max_candidates, "max_vertex_estimate": self.max_vertex_estimate}


# ---------------------------------------------------------------------------
# vectorised helpers
# ---------------------------------------------------------------------------


def safe_orbit(lc: np.ndarray, x: np.ndarray, t: float):
    """Images of one point under stacked light-cone matrices, dropping overflowing ones.

    Returns ``(x, t, index)`` with ``index`` the rows that stayed finite.
    """
    c = _to_lightcone(np.asarray(x, dtype=float)[None, :], np.array([float(t)]))[0]
    Q = lc @ c
    ok = np.isfinite(Q).all(axis=1) & (Q[:, -2] > 0)
    xs, ts = _from_lightcone(Q[ok])
    return xs, ts, np.flatnonzero(ok)


def _nearest_lc(thin: ThinPart, x: np.ndarray, t: np.ndarray):
    best, bc, br = thin.signed_distance_xt(x, t, return_argmin=True)
    n1 = thin.n + 1
    M = np.empty((x.shape[0], n1, n1))
    for k in np.unique(bc):
        sel = bc == k
        M[sel] = thin._mats[k][br[sel]]
    return best, M


def flow_xt(thin: ThinPart, x: np.ndarray, t: np.ndarray, s: np.ndarray):
    """Vectorised cusp flow; ``s > 0`` moves away from the nearest cusp point."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    _, M = _nearest_lc(thin, x, t)
    Q = np.einsum("mij,mj->mi", M, _to_lightcone(x, t))
    qx, qt = _from_lightcone(Q)
    C2 = _to_lightcone(qx, qt * np.exp(-np.asarray(s, dtype=float)))
    return _from_lightcone(np.einsum("mij,mj->mi", np.linalg.inv(M), C2))


def project_to_level(thin: ThinPart, x: np.ndarray, t: np.ndarray, level: float,
                     iters: int = 4, tol: float = 1e-11):
    """Move points along the cusp flow until ``d_thin = level``."""
    for _ in range(iters):
        d = thin.signed_distance_xt(x, t)
        err = level - d
        if np.all(np.abs(err) < tol):
            break
        x, t = flow_xt(thin, x, t, err)
    return x, t


def _layer_grid(lo: np.ndarray, hi: np.ndarray, step: np.ndarray, offset: np.ndarray) -> np.ndarray:
    """Grid in the box ``[lo, hi)`` with per-axis step and offset in ``[0, 1)``."""
    axes = []
    for a in range(len(lo)):
        k0 = math.floor((lo[a] - offset[a] * step[a]) / step[a])
        vals = (np.arange(k0, k0 + int((hi[a] - lo[a]) / step[a]) + 3) + offset[a]) * step[a]
        axes.append(vals[(vals >= lo[a]) & (vals < hi[a])])
    if not axes:
        return np.zeros((1, 0))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


# ---------------------------------------------------------------------------
# fundamental regions
# ---------------------------------------------------------------------------


class CuspRegion:
    """Union over cusps of horoball Voronoi cells, reduced modulo the cusp lattices."""

    kind = "cusp-voronoi"

    def __init__(self, thin: ThinPart):
        if not thin.has_cusps:
            raise ValueError("CuspRegion needs at least one cusp")
        self.thin = thin
        self.n = thin.n
        self.id_row = []
        for k, c in enumerate(thin.cusps):
            rows = np.flatnonzero(thin._elts[k] == 0)
            if rows.size == 0:
                raise CoverBuildError("identity row missing from the thin-part table")
            if c.basis.shape[0] != self.n - 1:
                raise CoverBuildError(f"cusp {k} has translation lattice of rank {c.basis.shape[0]} < {self.n - 1}")
            self.id_row.append(int(rows[0]))
        self._depth = {}

    def _own(self, k: int, x: np.ndarray, t: np.ndarray):
        """Chart coordinates and signed distance to the cusp's own horoball."""
        c = self.thin.cusps[k]
        qx, qt = c.chart.apply_xt(x, t)
        return qx, qt, np.log(self.thin._thin_height(k, qx)) - np.log(qt)

    def _top_height(self, k: int, level: float) -> float:
        c = self.thin.cusps[k]
        u = _layer_grid(-0.5 * np.ones(self.n - 1), 0.5 * np.ones(self.n - 1), np.full(self.n - 1, 0.05),
                        np.zeros(self.n - 1))
        h = self.thin._thin_height(k, u @ c.basis)
        return float(np.max(h)) * math.exp(-level)

    def candidates(self, pitch: float, level: float, rng: np.random.Generator, cap: int):
        """Grid points of pitch ``pitch`` in the region with ``d_thin >= level``."""
        xs, ts = [], []
        total = 0
        n1 = self.n - 1
        for k, c in enumerate(self.thin.cusps):
            ci = c.chart.inverse()
            B = c.basis
            lens = np.linalg.norm(B, axis=1)
            log_top = math.log(self._top_height(k, level))
            shift = rng.uniform()
            empty_run, j = 0, 0
            while empty_run < 2:
                lt = log_top - (j + shift) * pitch
                j += 1
                t = math.exp(lt)
                step = np.minimum(t * pitch / lens, 0.5)
                u = _layer_grid(-0.5 * np.ones(n1), 0.5 * np.ones(n1), step, rng.uniform(size=n1))
                qx = u @ B
                total += qx.shape[0]
                if total > cap:
                    raise ResourceLimitError(f"more than {cap} candidates at pitch {pitch:.4g}")
                bx, bt = ci.apply_xt(qx, np.full(qx.shape[0], t))
                best, bc, br = self.thin.signed_distance_xt(bx, bt, return_argmin=True)
                own = np.log(self.thin._thin_height(k, qx)) - math.log(t)
                keep = (own <= best + 1e-12 * np.maximum(1.0, np.abs(best))) & (best >= level)
                voronoi = own <= best + 1e-12 * np.maximum(1.0, np.abs(best))
                if not np.any(voronoi):
                    empty_run += 1
                else:
                    empty_run = 0
                if np.any(keep):
                    xs.append(bx[keep])
                    ts.append(bt[keep])
                if t < 1e-8 * math.exp(log_top):
                    raise CoverBuildError("candidate layers did not terminate")
        if not xs:
            return np.zeros((0, self.n - 1)), np.zeros(0)
        return np.concatenate(xs), np.concatenate(ts)

    def reduce(self, x: np.ndarray, t: np.ndarray):
        """Representatives inside the region: nearest horoball chart, then modulo the lattice."""
        x = np.atleast_2d(x)
        t = np.atleast_1d(t)
        _, bc, br = self.thin.signed_distance_xt(x, t, return_argmin=True)
        ox, ot = np.empty_like(x), np.empty_like(t)
        for k in np.unique(bc):
            sel = np.flatnonzero(bc == k)
            c = self.thin.cusps[k]
            M = self.thin._mats[k][br[sel]]
            qx, qt = _from_lightcone(np.einsum("mij,mj->mi", M, _to_lightcone(x[sel], t[sel])))
            coef = np.linalg.solve(c.basis.T, qx.T).T
            qx = (coef - np.round(coef)) @ c.basis
            bx, bt = c.chart.inverse().apply_xt(qx, qt)
            ox[sel], ot[sel] = bx, bt
        return ox, ot

    def _chart_depth(self, k: int, level: float) -> float:
        """Log-height range of cusp ``k``'s cell, from a coarse candidate scan."""
        key = (k, round(level, 12))
        if key not in self._depth:
            c = self.thin.cusps[k]
            x, t = self.candidates(0.05, level, np.random.default_rng(0), 10 ** 7)
            qx, qt, own = self._own(k, x, t)
            best = self.thin.signed_distance_xt(x, t)
            mine = own <= best + 1e-12 * np.maximum(1.0, np.abs(best))
            top = math.log(self._top_height(k, level))
            low = float(np.log(qt[mine]).min()) if np.any(mine) else top - 1.0
            self._depth[key] = top - low + 0.1
        return self._depth[key]

    def sample(self, rng: np.random.Generator, m: int, level: float, max_rounds: int = 400):
        """Quasi-random points of the region with ``d_thin >= level`` (area measure)."""
        from scipy.stats import qmc

        out_x, out_t, got = [], [], 0
        n1 = self.n - 1
        K = len(self.thin.cusps)
        tops = [math.log(self._top_height(k, level)) for k in range(K)]
        depths = [self._chart_depth(k, level) for k in range(K)]
        sob = qmc.Sobol(d=n1 + 2, scramble=True, seed=int(rng.integers(2 ** 31)))
        for _ in range(max_rounds):
            z = sob.random(4096)
            k = np.minimum((z[:, 0] * K).astype(int), K - 1)
            for kk in np.unique(k):
                sel = k == kk
                c = self.thin.cusps[kk]
                qx = (z[sel, 1:1 + n1] - 0.5) @ c.basis
                # area measure dx dt / t^n: uniform in t^(1-n)
                a = math.exp(-n1 * tops[kk])
                b = math.exp(-n1 * (tops[kk] - depths[kk]))
                qt = (a + z[sel, -1] * (b - a)) ** (-1.0 / n1)
                bx, bt = c.chart.inverse().apply_xt(qx, qt)
                best = self.thin.signed_distance_xt(bx, bt)
                _, _, own = self._own(kk, bx, bt)
                keep = (own <= best + 1e-12 * np.maximum(1.0, np.abs(best))) & (best >= level)
                out_x.append(bx[keep])
                out_t.append(bt[keep])
                got += int(keep.sum())
            if got >= m:
                break
        x = np.concatenate(out_x)[:m]
        t = np.concatenate(out_t)[:m]
        return x, t


class DirichletRegion:
    """Dirichlet region around a generic basepoint, clipped to a ball of radius ``R``."""

    kind = "dirichlet"

    def __init__(self, inv: ElementInventory, basepoint: Point, radius: Optional[float] = None,
                 thin: Optional[ThinPart] = None, clip: bool = False):
        self.inv = inv
        self.n = inv.n
        self.o = basepoint
        self.thin = thin
        ox, ot, idx = safe_orbit(inv.lightcone, basepoint.x, basepoint.t)
        d = dist_xt(ox, ot, basepoint.x[None, :], basepoint.t)
        if np.any((d < 1e-9) & (idx != 0)):
            raise CoverBuildError("Dirichlet basepoint is fixed by a nontrivial element")
        self._orbit = (ox[d > 1e-9], ot[d > 1e-9], d[d > 1e-9])
        self.clip = clip
        self.R = radius if radius is not None else self._auto_radius()

    def _in_domain(self, x, t):
        ox, ot, od = self._orbit
        d0 = dist_xt(x, t, self.o.x[None, :], self.o.t)
        keep = np.ones(x.shape[0], dtype=bool)
        near = od <= 2.0 * (np.max(d0) if d0.size else 0.0) + 1e-9
        for j in np.flatnonzero(near):
            keep &= d0 <= dist_xt(x, t, ox[j][None, :], ot[j]) + 1e-12
        return keep, d0

    def _ball_grid(self, R: float, pitch: float, rng: np.random.Generator, cap: int):
        o = self.o
        n1 = self.n - 1
        xs, ts, total = [], [], 0
        lt = math.log(o.t) - R + rng.uniform() * pitch
        cR, sR = o.t * math.cosh(R), o.t * math.sinh(R)
        while lt < math.log(o.t) + R:
            t = math.exp(lt)
            half = math.sqrt(max(sR ** 2 - (t - cR) ** 2, 0.0))
            step = np.full(n1, t * pitch)
            u = _layer_grid(o.x - half, o.x + half, step, rng.uniform(size=n1))
            total += u.shape[0]
            if total > cap:
                raise ResourceLimitError(f"more than {cap} candidates at pitch {pitch:.4g}")
            xs.append(u)
            ts.append(np.full(u.shape[0], t))
            lt += pitch
        x, t = np.concatenate(xs), np.concatenate(ts)
        inside = dist_xt(x, t, o.x[None, :], o.t) <= R
        return x[inside], t[inside]

    def _auto_radius(self) -> float:
        rng = np.random.default_rng(0)
        R = 1.0
        while R <= 16.0:
            pitch = R / 40.0
            x, t = self._ball_grid(R, pitch, rng, 10 ** 7)
            keep, d0 = self._in_domain(x, t)
            if self.thin is not None and self.thin.has_cusps:
                keep &= self.thin.signed_distance_xt(x, t) >= 0
            if keep.any() and d0[keep].max() < R - 2 * pitch:
                return float(d0[keep].max() + 2 * pitch)
            R *= 2.0
        raise CoverBuildError("Dirichlet region is not bounded within radius 16; set window_radius")

    def candidates(self, pitch: float, level: float, rng: np.random.Generator, cap: int):
        x, t = self._ball_grid(self.R, pitch, rng, cap)
        keep, _ = self._in_domain(x, t)
        if self.thin is not None and self.thin.has_cusps:
            keep &= self.thin.signed_distance_xt(x, t) >= level
        return x[keep], t[keep]

    def reduce(self, x: np.ndarray, t: np.ndarray):
        x = np.atleast_2d(x)
        t = np.atleast_1d(t)
        ox, ot = np.empty_like(x), np.empty_like(t)
        for i in range(x.shape[0]):
            gx, gt, _ = safe_orbit(self.inv.lightcone, x[i], t[i])
            j = int(np.argmin(dist_xt(gx, gt, self.o.x[None, :], self.o.t)))
            ox[i], ot[i] = gx[j], gt[j]
        return ox, ot

    def sample(self, rng: np.random.Generator, m: int, level: float, max_rounds: int = 200):
        from scipy.stats import qmc

        n1 = self.n - 1
        o = self.o
        sob = qmc.Sobol(d=n1 + 1, scramble=True, seed=int(rng.integers(2 ** 31)))
        out_x, out_t, got = [], [], 0
        cR, sR = o.t * math.cosh(self.R), o.t * math.sinh(self.R)
        for _ in range(max_rounds):
            z = sob.random(4096)
            # uniform in the Euclidean bounding box of the ball, weighted by t^-n
            t = (cR - sR) + z[:, -1] * 2 * sR
            x = o.x + (z[:, :-1] - 0.5) * 2 * sR
            w = (t / (cR - sR)) ** (-self.n)
            acc = rng.uniform(size=t.shape[0]) < w
            x, t = x[acc], t[acc]
            keep = dist_xt(x, t, o.x[None, :], o.t) <= self.R
            x, t = x[keep], t[keep]
            keep, _ = self._in_domain(x, t)
            if self.thin is not None and self.thin.has_cusps:
                keep &= self.thin.signed_distance_xt(x, t) >= level
            out_x.append(x[keep])
            out_t.append(t[keep])
            got += int(keep.sum())
            if got >= m:
                break
        return np.concatenate(out_x)[:m], np.concatenate(out_t)[:m]


# ---------------------------------------------------------------------------
# centre sets and the cover
# ---------------------------------------------------------------------------


@dataclass
class CenterSets:
    """Centres per stratum dimension, in base coordinates, with shell flags."""

    x: List[np.ndarray]
    t: List[np.ndarray]
    shell: List[np.ndarray]
    mu: List[float]

    def points(self, i: int) -> List[Point]:
        return [Point(self.x[i][j], float(self.t[i][j])) for j in range(len(self.t[i]))]

    def counts(self) -> List[int]:
        return [int(len(t)) for t in self.t]

    def to_json(self) -> dict:
        return {
            str(i): [
                {"x": self.x[i][j].tolist(), "t": float(self.t[i][j]), "shell": bool(self.shell[i][j])}
                for j in range(len(self.t[i]))
            ]
            for i in range(len(self.t))
        }


@dataclass
class CoverResult:
    """Centres, cover sets and the data needed by the diagnostics."""

    centers: CenterSets
    sets: List[CoverSet]
    cascade: MuCascade
    levels: LevelAssignment
    thin: ThinPart
    inv: ElementInventory
    region: object
    strata: list
    config: CoverConfig
    report: dict = field(default_factory=dict)

    def __iter__(self) -> Iterator:
        return iter((self.centers, self.sets))

    @property
    def n(self) -> int:
        return self.inv.n

    def shell_level(self, i: int) -> float:
        return self.cascade.shrink - 8.0 * self.cascade.of(i)

    def to_json(self) -> dict:
        return {"sets": [s.to_json() for s in self.sets], "centers": self.centers.to_json(),
                "cascade": self.cascade.to_json(), "report": self.report}


def _lift_fn(inv: ElementInventory, box_lo: np.ndarray, box_hi: np.ndarray):
    lc = inv.lightcone

    def fn(px, pt):
        x, t, _ = safe_orbit(lc, px, pt)
        inside = np.all((x >= box_lo[:-1]) & (x <= box_hi[:-1]), axis=1) & (t >= box_lo[-1]) & (t <= box_hi[-1])
        return x[inside], t[inside]

    return fn


def _strata_by_dim(strata: list, n: int):
    out = {i: [] for i in range(n + 1)}
    for s in strata:
        out[s.dim].append(s.subspace)
    return out


def _dist_to_subspaces(x: np.ndarray, t: np.ndarray, subs: list, chunk: int = 200000) -> np.ndarray:
    """Distance from points to the nearest of the given subspaces."""
    best = np.full(x.shape[0], np.inf)
    if not subs:
        return best
    X = to_hyperboloid(x, t)
    pts = [s for s in subs if s.dim == 0]
    if pts:
        P = np.array([s.basis[:, 0] for s in pts])
        px, pt = from_hyperboloid(P)
        for a in range(0, x.shape[0], chunk):
            sl = slice(a, a + chunk)
            d = dist_xt(x[sl, None, :], t[sl, None], px[None, :, :], pt[None, :])
            best[sl] = np.minimum(best[sl], d.min(axis=1))
    for s in subs:
        if s.dim > 0:
            best = np.minimum(best, np.arccosh(s.cosh_dist(X)))
    return best


def build_cover(spec: LatticeSpec, inv: ElementInventory, levels: LevelAssignment, cascade: MuCascade,
                thin: Optional[ThinPart] = None, strata: Optional[list] = None,
                config: Optional[CoverConfig] = None, tol: Tolerances = DEFAULT_TOL) -> CoverResult:
    """Greedy centre sets per stratum and the cover of balls and stretched balls.

    Parameters
    ----------
    spec, inv, levels : lattice data, element inventory and thick--thin levels
    cascade : MuCascade
    thin : ThinPart, optional
    strata : list of SingularStratum, optional
        Computed with :func:`singular_strata` if omitted.
    config : CoverConfig, optional

    Returns
    -------
    CoverResult
        Unpacks as ``(centers, sets)``.
    """
    config = config or CoverConfig()
    if not 0 < config.pitch_factor <= 0.25:
        raise ValueError("pitch_factor must lie in (0, 1/4]")
    n = inv.n
    if cascade.n != n:
        raise ValueError(f"cascade has {cascade.n + 2} entries, expected {n + 2}")
    estimate = spec.volume / ball_volume(0.5 * cascade.of(n), n)
    if estimate > config.max_vertex_estimate:
        raise ResourceLimitError(f"estimated vertex count {estimate:.0f} exceeds {config.max_vertex_estimate} "
                                 f"(volume {spec.volume:.6g}, mu_n {cascade.of(n):.6g})")
    thin = thin if thin is not None else ThinPart(inv, levels)
    strata = strata if strata is not None else singular_strata(inv)
    rng = np.random.default_rng(config.seed)
    if thin.has_cusps:
        region = CuspRegion(thin)
    else:
        if config.basepoint is not None:
            o = Point(config.basepoint[0], config.basepoint[1])
        else:
            o = Point(np.full(n - 1, 0.0123456789), 1.2345678901)
        if len(inv) <= 1 and config.window_radius is None:
            raise CoverBuildError("the trivial group needs window_radius")
        region = DirichletRegion(inv, o, config.window_radius, thin)
    by_dim = _strata_by_dim(strata, n)
    shrink = cascade.shrink
    mu_m1 = cascade.mu_minus1
    cap = flow_time_cap(levels.eps_n)
    Xs, Ts, Ss = [], [], []
    sets: List[CoverSet] = []
    report = {"region": region.kind, "candidates": [], "shell_candidates": [], "stretch_cap": cap,
              "max_flow_time": 0.0}
    for i in range(n + 1):
        mu = cascade.of(i)
        pitch = config.pitch_factor * mu
        level = shrink - 8.0 * mu
        band = config.shell_band * mu
        if i == n:
            cx, ct = region.candidates(pitch, level, rng, config.max_candidates)
        elif i == 0:
            pts = [s for s in by_dim[0]]
            if pts:
                P = np.array([s.basis[:, 0] for s in pts])
                cx, ct = from_hyperboloid(P)
                cx, ct = region.reduce(cx, ct)
                ok = thin.signed_distance_xt(cx, ct) >= level if thin.has_cusps else np.ones(len(ct), bool)
                cx, ct = cx[ok], ct[ok]
            else:
                cx, ct = np.zeros((0, n - 1)), np.zeros(0)
        else:
            if by_dim[i]:
                gx, gt = region.candidates(pitch, level, rng, config.max_candidates)
                X = to_hyperboloid(gx, gt)
                parts = []
                for s in by_dim[i]:
                    near = np.arccosh(s.cosh_dist(X)) < pitch
                    if np.any(near):
                        parts.append(s.project_hyperboloid(X[near]))
                if parts:
                    cx, ct = from_hyperboloid(np.concatenate(parts))
                    if thin.has_cusps:
                        ok = thin.signed_distance_xt(cx, ct) >= level
                        cx, ct = cx[ok], ct[ok]
                else:
                    cx, ct = np.zeros((0, n - 1)), np.zeros(0)
            else:
                cx, ct = np.zeros((0, n - 1)), np.zeros(0)
        # exclusion zones of lower strata
        if i > 0 and ct.size:
            keep = np.ones(ct.size, dtype=bool)
            for j in range(i):
                if by_dim[j]:
                    keep &= _dist_to_subspaces(cx, ct, by_dim[j]) >= cascade.of(j)
            cx, ct = cx[keep], ct[keep]
        # shell: snap the band [level, level + pitch) onto the level set
        shell = np.zeros(ct.size, dtype=bool)
        if thin.has_cusps and ct.size:
            d = thin.signed_distance_xt(cx, ct)
            near = d < level + max(pitch, band)
            if np.any(near):
                sx, st = project_to_level(thin, cx[near], ct[near], level)
                if i > 0:
                    ok = np.ones(st.size, dtype=bool)
                    for j in range(i):
                        if by_dim[j]:
                            ok &= _dist_to_subspaces(sx, st, by_dim[j]) >= cascade.of(j)
                    sx, st = sx[ok], st[ok]
                in_band = d[~near] < level + band
                rest_x, rest_t = cx[~near][~in_band], ct[~near][~in_band]
                cx = np.concatenate([sx, rest_x])
                ct = np.concatenate([st, rest_t])
                shell = np.zeros(ct.size, dtype=bool)
                shell[: st.size] = True
        report["candidates"].append(int(ct.size))
        report["shell_candidates"].append(int(shell.sum()))
        if ct.size:
            lo = np.concatenate([cx.min(axis=0) - ct.max() * math.sinh(mu) * 1.01, [ct.min() * math.exp(-mu) * 0.99]])
            hi = np.concatenate([cx.max(axis=0) + ct.max() * math.sinh(mu) * 1.01, [ct.max() * math.exp(mu) * 1.01]])
            acc = greedy_discrete(cx, ct, mu, lift_fn=_lift_fn(inv, lo, hi))
        else:
            acc = np.zeros(0, dtype=int)
        Xs.append(cx[acc])
        Ts.append(ct[acc])
        Ss.append(shell[acc])
        for j, a in enumerate(acc):
            c = Point(cx[a], float(ct[a]))
            if shell[a]:
                _, chart, _ = thin.nearest_chart(c)
                try:
                    U = make_stretched(c, 3.0 * mu, chart, thin.signed_distance_xt, 0.5 * mu_m1, cap, i)
                except StretchError as e:
                    raise CoverBuildError(
                        f"stretching failed for stratum {i} (shell level {level:.4g}, "
                        f"target {0.5 * mu_m1:.4g}): {e}") from e
                report["max_flow_time"] = max(report["max_flow_time"], U.flow_time)
                sets.append(CoverSet("stretched", i, j, c, 3.0 * mu, U))
            else:
                sets.append(CoverSet("ball", i, j, c, 3.0 * mu))
    centers = CenterSets(Xs, Ts, Ss, [cascade.of(i) for i in range(n + 1)])
    report["centers"] = centers.counts()
    report["stretched"] = int(sum(s.is_stretched for s in sets))
    report["vertex_count"] = len(sets)
    return CoverResult(centers, sets, cascade, levels, thin, inv, region, strata, config, report)
