"""Cover sets: the radius cascade, greedy discrete sets, stretched balls and intersections.

In a chart that sends a cusp point to infinity a stretched ball is a vertical
Euclidean capsule (a segment plus a radius), and an ordinary hyperbolic ball is
a degenerate capsule.  All intersection questions for sets sharing a chart are
therefore convex problems about vertical segments.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

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
    dist,
    dist_xt,
)

__all__ = [
    "MuCascade",
    "StretchedBall",
    "CoverSet",
    "StretchError",
    "mu_cascade",
    "default_eps_fn",
    "ball_volume",
    "flow_time_cap",
    "greedy_discrete",
    "make_stretched",
    "stretched_from_center",
    "comparison_ball",
    "chart_segment",
    "segment_distance",
    "intersects",
    "common_point",
    "ellipsoid_feasibility",
]


# ---------------------------------------------------------------------------
# radius cascade
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MuCascade:
    """Radii ``mu_{-1} > mu_0 > ... > mu_n`` of the cover construction.

    ``mu[0]`` holds ``mu_{-1}``; use :meth:`of` for stratum indices.
    ``source`` is ``"formula"`` or ``"override"``.
    """

    mu: tuple
    source: str = "formula"
    eps_n: float = float("nan")
    nu: float = float("nan")

    @property
    def n(self) -> int:
        return len(self.mu) - 2

    @property
    def mu_minus1(self) -> float:
        return self.mu[0]

    def of(self, i: int) -> float:
        """``mu_i`` for ``i = -1, ..., n``."""
        return self.mu[i + 1]

    @property
    def shrink(self) -> float:
        """Depth of the shrunken thick part, ``2 mu_{-1}``."""
        return 2.0 * self.mu[0]

    def inequality_report(self) -> dict:
        """Which structural inequalities of the construction hold."""
        mu = self.mu
        rows = {
            "mu_minus1 <= eps_n/64": bool(mu[0] <= self.eps_n / 64 * (1 + 1e-12)) if math.isfinite(self.eps_n) else None,
            "mu_minus1 <= nu": bool(mu[0] <= self.nu * (1 + 1e-12)) if math.isfinite(self.nu) else None,
        }
        for i in range(len(mu) - 1):
            rows[f"mu_{i} <= mu_{i - 1}/12"] = bool(mu[i + 1] <= mu[i] / 12 * (1 + 1e-12))
        rows["strictly decreasing"] = bool(all(mu[i + 1] < mu[i] for i in range(len(mu) - 1)))
        return rows

    def to_json(self) -> dict:
        return {"mu": list(self.mu), "source": self.source, "shrink": self.shrink,
                "inequalities": self.inequality_report()}

    @classmethod
    def override(cls, mu: Sequence[float], eps_n: float = float("nan"), nu: float = float("nan")) -> "MuCascade":
        """Explicit radii, validated for positivity only; see :meth:`inequality_report`."""
        mu = tuple(float(v) for v in mu)
        if len(mu) < 3 or any(not v > 0 for v in mu):
            raise ValueError("override cascade needs at least 3 positive entries (mu_-1, mu_0, ..., mu_n)")
        return cls(mu, "override", float(eps_n), float(nu))


def default_eps_fn(eps_n: float, M: int) -> Callable[[float], float]:
    """Identity capped at ``eps_n / (2 M)``."""
    cap = eps_n / (2.0 * M)
    return lambda x: min(x, cap)


def mu_cascade(eps_n: float, nu: float, eps2_fn: Callable[[float], float],
               eps3_fn: Callable[[float], float], n: int = 2, M: Optional[int] = None) -> MuCascade:
    """``mu_{-1} = min(eps_n/64, nu)`` and ``mu_{i+1} = min(eps2(mu_i)/12, eps3(mu_i)/24, mu_i/12)``.

    Returns ``n + 2`` radii.  Non-positive function values raise ``ValueError``;
    with ``M`` given, values above ``eps_n / (2 M)`` trigger a warning.
    """
    if not (eps_n > 0 and nu > 0):
        raise ValueError("eps_n and nu must be positive")
    mu = [min(eps_n / 64.0, nu)]
    for _ in range(n + 1):
        x = mu[-1]
        e2, e3 = float(eps2_fn(x)), float(eps3_fn(x))
        if not (e2 > 0 and e3 > 0):
            raise ValueError(f"eps2/eps3 must be positive, got {e2}, {e3} at {x}")
        if M is not None and max(e2, e3) > eps_n / (2.0 * M) * (1 + 1e-12):
            warnings.warn("eps2/eps3 exceed eps_n/(2M)")
        mu.append(min(e2 / 12.0, e3 / 24.0, x / 12.0))
    return MuCascade(tuple(mu), "formula", float(eps_n), float(nu))


def ball_volume(r: float, n: int) -> float:
    """Volume of a hyperbolic ball of radius ``r`` in H^n."""
    if n == 2:
        return 2.0 * math.pi * (math.cosh(r) - 1.0)
    if n == 3:
        return math.pi * (math.sinh(2.0 * r) - 2.0 * r)
    from scipy.integrate import quad

    omega = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
    return omega * quad(lambda s: math.sinh(s) ** (n - 1), 0.0, r)[0]


def flow_time_cap(eps: float) -> float:
    """Maximal stretching flow time ``ln(sinh(eps/2) / sinh(eps/4))``."""
    return math.log(math.sinh(eps / 2.0) / math.sinh(eps / 4.0))


# ---------------------------------------------------------------------------
# greedy discrete sets
# ---------------------------------------------------------------------------


def _ball_query(tree: cKDTree, x: np.ndarray, t: np.ndarray, rho: float):
    """Indices of tree points (half-space coordinates) within hyperbolic distance ``rho``."""
    q = np.concatenate([x, (t * math.cosh(rho))[:, None]], axis=1)
    return tree.query_ball_point(q, t * math.sinh(rho))


def greedy_discrete(
    x: np.ndarray,
    t: np.ndarray,
    mu: float,
    lift_fn: Optional[Callable[[np.ndarray, float], Tuple[np.ndarray, np.ndarray]]] = None,
    seeds: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    metric: str = "hyperbolic",
) -> np.ndarray:
    """Greedy maximal ``mu``-discrete subset of a candidate list, in the given order.

    Parameters
    ----------
    x, t : ndarray
        Candidates in half-space coordinates, shapes ``(m, n-1)`` and ``(m,)``.
        For ``metric="euclidean"`` ``x`` holds plain points and ``t`` is ignored.
    mu : float
        Separation.  A candidate is accepted iff it is at distance ``>= mu``
        from every lift of every previously accepted point.
    lift_fn : callable, optional
        ``lift_fn(x, t)`` returns the lifts of one point (the quotient metric).
        Without it the plain metric is used.
    seeds : tuple, optional
        Points that block candidates from the start but are not returned.

    Returns
    -------
    ndarray
        Indices of accepted candidates, in acceptance order.
    """
    x = np.asarray(x, dtype=float)
    m = x.shape[0]
    if m == 0:
        return np.zeros(0, dtype=int)
    blocked = np.zeros(m, dtype=bool)
    if metric == "euclidean":
        tree = cKDTree(x)

        def block(px, pt):
            for lst in tree.query_ball_point(np.atleast_2d(px), mu - 1e-12):
                blocked[lst] = True

    else:
        t = np.asarray(t, dtype=float)
        tree = cKDTree(np.concatenate([x, t[:, None]], axis=1))

        def block(px, pt):
            if lift_fn is not None:
                lx, lt = lift_fn(px, pt)
            else:
                lx, lt = px[None, :], np.array([pt])
            for lst in _ball_query(tree, lx, lt, mu * (1 - 1e-12)):
                if lst:
                    blocked[lst] = True

    if seeds is not None:
        sx, st = seeds
        for i in range(len(sx)):
            block(np.asarray(sx[i], dtype=float), None if st is None else float(st[i]))
    acc = []
    for i in range(m):
        if blocked[i]:
            continue
        acc.append(i)
        block(x[i], None if metric == "euclidean" else float(t[i]))
    return np.array(acc, dtype=int)


# ---------------------------------------------------------------------------
# stretched balls
# ---------------------------------------------------------------------------


class StretchError(RuntimeError):
    """The end centre of a stretched ball could not be bracketed."""

    def __init__(self, message: str, samples: list):
        super().__init__(message)
        self.samples = samples


def horoball_key(chart: Isometry) -> tuple:
    """Rounded sphere coordinates of ``chart^{-1}(infinity)``."""
    n = chart.n
    v = chart.inverse().L @ boundary_to_light(INFINITY, n)
    if v[-1] < 0:
        v = -v
    s = v[:-1] / v[-1]
    return tuple(np.round(s, 7).tolist())


@dataclass(frozen=True)
class StretchedBall:
    """Union of hyperbolic balls of Euclidean radius ``r_eucl`` along a vertical segment.

    In coordinates of ``chart`` (which sends the cusp point to infinity) the
    set is the Euclidean capsule around the segment from ``(axis_x, t_lo)`` to
    ``(axis_x, t_hi)``.  ``t_lo`` and ``t_hi`` are Euclidean centre heights of
    the initial and end balls.  Centres are stored in base coordinates.
    """

    chart: Isometry
    axis_x: np.ndarray
    t_lo: float
    t_hi: float
    r_eucl: float
    stratum_dim: int
    initial_center: Point
    initial_radius: float
    end_center: Point
    end_radius: float

    @property
    def t_initial(self) -> float:
        """Chart height of the hyperbolic initial centre."""
        return math.sqrt(self.t_lo ** 2 - self.r_eucl ** 2)

    @property
    def t_end(self) -> float:
        return math.sqrt(self.t_hi ** 2 - self.r_eucl ** 2)

    @property
    def flow_time(self) -> float:
        return math.log(self.t_end / self.t_initial)

    @property
    def is_degenerate(self) -> bool:
        return self.t_hi <= self.t_lo

    def bounding_ball(self) -> Tuple[Point, float]:
        """Smallest hyperbolic ball centred on the axis containing the capsule."""
        a, b = self.t_lo - self.r_eucl, self.t_hi + self.r_eucl
        c = Point(self.axis_x, math.sqrt(a * b))
        return apply(self.chart.inverse(), c), 0.5 * math.log(b / a)

    def lifted(self, g: Isometry) -> "StretchedBall":
        """The image ``g U``: the same chart data with chart ``C g^{-1}``."""
        return StretchedBall(
            self.chart @ g.inverse(), self.axis_x, self.t_lo, self.t_hi, self.r_eucl,
            self.stratum_dim, apply(g, self.initial_center), self.initial_radius,
            apply(g, self.end_center), self.end_radius,
        )

    def contains_xt(self, x: np.ndarray, t: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Membership of base-coordinate points (strict, with relative margin)."""
        cx, ct = _apply_lc(self.chart._lc, np.atleast_2d(x), np.atleast_1d(t))
        d = segment_distance(cx, ct, self.axis_x[None, :], np.array([self.t_lo]), np.array([self.t_hi]))[:, 0]
        return d < self.r_eucl * (1.0 - margin)

    def to_json(self) -> dict:
        return {
            "chart": np.round(self.chart.L, 14).tolist(),
            "axis_x": self.axis_x.tolist(),
            "t_lo": self.t_lo,
            "t_hi": self.t_hi,
            "r_eucl": self.r_eucl,
            "initial_radius": self.initial_radius,
            "end_radius": self.end_radius,
            "flow_time": self.flow_time,
        }


def _apply_lc(lc: np.ndarray, x: np.ndarray, t: np.ndarray):
    return _from_lightcone(_to_lightcone(x, t) @ lc.T)


def stretched_from_center(chart: Isometry, x: np.ndarray, t_y: float, rho: float, t_end: float,
                          stratum_dim: int = 0) -> StretchedBall:
    """Stretched ball from chart data: initial centre ``(x, t_y)``, radius ``rho``, end centre height ``t_end``."""
    x = np.asarray(x, dtype=float)
    r = t_y * math.sinh(rho)
    s0 = t_y * math.cosh(rho)
    t_end = max(t_end, t_y)
    s1 = math.sqrt(t_end ** 2 + r ** 2)
    ci = chart.inverse()
    y = apply(ci, Point(x, t_y))
    e = apply(ci, Point(x, t_end))
    return StretchedBall(chart, x, s0, s1, r, stratum_dim, y, rho, e, math.atanh(r / s1))


def make_stretched(center: Point, radius: float, chart: Isometry, signed_dist: Callable,
                   target: float, cap: Optional[float] = None, stratum_dim: int = 0,
                   tol: float = 1e-9) -> StretchedBall:
    """Stretch the ball ``B(center, radius)`` towards the cusp at ``chart^{-1}(infinity)``.

    The end centre is the point on the vertical ray (in the chart) where the
    signed distance to the thin part equals ``target``.  Bisection on the flow
    time stops once the bracket is below ``tol``, which puts the distance within
    ``tol`` of the target because it changes at unit speed along the flow.

    Parameters
    ----------
    signed_dist : callable
        ``signed_dist(x, t)`` on arrays of base-coordinate points.
    cap : float, optional
        Maximal allowed flow time; exceeding it raises ``StretchError``.
    """
    q = apply(chart, center)
    ci = chart.inverse()

    def f(s):
        p = apply(ci, Point(q.x, q.t * math.exp(s)))
        return float(signed_dist(p.x[None, :], np.array([p.t]))[0]) - target

    f0 = f(0.0)
    samples = [(0.0, f0)]
    if f0 <= 0.0:
        if f0 > -tol:
            return stretched_from_center(chart, q.x, q.t, radius, q.t, stratum_dim)
        raise StretchError("initial centre is already beyond the target distance", samples)
    hi = 0.25
    while True:
        fh = f(hi)
        samples.append((hi, fh))
        if fh <= 0.0:
            break
        hi *= 2.0
        if hi > 64.0:
            raise StretchError("could not bracket the end centre", samples)
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    if cap is not None and s > cap * (1 + 1e-12):
        raise StretchError(f"flow time {s:.6g} exceeds the cap {cap:.6g}", samples)
    return stretched_from_center(chart, q.x, q.t, radius, q.t * math.exp(s), stratum_dim)


def comparison_ball(U: StretchedBall, target_height: float) -> StretchedBall:
    """Comparison ball of ``U`` with initial centre at chart height ``target_height``.

    The end ball and the Euclidean radius are kept; the initial centre slides
    along the axis.  The target must lie below the end centre.
    """
    if target_height >= U.t_end * (1 - 1e-15):
        raise ValueError("target height must lie below the end centre")
    if target_height <= 0:
        raise ValueError("target height must be positive")
    if abs(target_height - U.t_initial) <= 1e-15 * U.t_initial:
        return U
    r = U.r_eucl
    s0 = math.sqrt(target_height ** 2 + r ** 2)
    rho = math.asinh(r / target_height)
    ci = U.chart.inverse()
    y = apply(ci, Point(U.axis_x, target_height))
    return StretchedBall(U.chart, U.axis_x, s0, U.t_hi, r, U.stratum_dim, y, rho, U.end_center, U.end_radius)


# ---------------------------------------------------------------------------
# cover sets and intersections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverSet:
    """A member of the cover: an ordinary ball or a stretched ball.

    ``radius`` is the initial radius ``3 mu_i`` of stratum ``stratum_dim``.
    ``center`` is the (initial) centre in base coordinates.
    """

    kind: str
    stratum_dim: int
    center_id: int
    center: Point
    radius: float
    stretched: Optional[StretchedBall] = None

    @property
    def is_stretched(self) -> bool:
        return self.stretched is not None

    def bounding_ball(self) -> Tuple[Point, float]:
        if self.stretched is not None:
            return self.stretched.bounding_ball()
        return self.center, self.radius

    def lifted(self, g: Isometry) -> "CoverSet":
        s = None if self.stretched is None else self.stretched.lifted(g)
        return CoverSet(self.kind, self.stratum_dim, self.center_id, apply(g, self.center), self.radius, s)

    def horoball(self) -> Optional[tuple]:
        return None if self.stretched is None else horoball_key(self.stretched.chart)

    def contains_xt(self, x: np.ndarray, t: np.ndarray, margin: float = 0.0) -> np.ndarray:
        if self.stretched is not None:
            return self.stretched.contains_xt(x, t, margin)
        d = dist_xt(np.atleast_2d(x), np.atleast_1d(t), self.center.x[None, :], self.center.t)
        return d < self.radius * (1.0 - margin)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "stratum_dim": self.stratum_dim, "center_id": self.center_id,
               "center": {"x": self.center.x.tolist(), "t": self.center.t},
               "initial_radius": self.radius}
        if self.stretched is not None:
            out.update(self.stretched.to_json())
        else:
            out["chart"] = None
        return out


def chart_segment(S: CoverSet, K: Isometry) -> Tuple[np.ndarray, float, float, float]:
    """Vertical segment data ``(x, lo, hi, r)`` of a cover set in the chart ``K``.

    Ordinary balls work in any chart.  Stretched balls need ``K`` to send the
    same cusp point to infinity; otherwise ``ValueError`` is raised.
    """
    if S.stretched is None:
        q = apply(K, S.center)
        return q.x, q.t * math.cosh(S.radius), q.t * math.cosh(S.radius), q.t * math.sinh(S.radius)
    U = S.stretched
    M = K @ U.chart.inverse()
    n = K.n
    v = M.L @ boundary_to_light(INFINITY, n)
    if abs(v[-1] - v[-2]) > 1e-8 * np.linalg.norm(v):
        raise ValueError("chart does not fix the cusp point of the stretched ball")
    (xs, ts) = M.apply_xt(np.vstack([U.axis_x, U.axis_x]), np.array([U.t_lo, U.t_hi]))
    lam = ts[0] / U.t_lo
    return xs[0], ts[0], ts[1], U.r_eucl * lam


def segment_distance(px: np.ndarray, pt: np.ndarray, X: np.ndarray, LO: np.ndarray, HI: np.ndarray) -> np.ndarray:
    """Euclidean distance from points ``(px, pt)`` to vertical segments; shape ``(m, k)``."""
    dx = px[:, None, :] - X[None, :, :]
    dt = pt[:, None] - np.clip(pt[:, None], LO[None, :], HI[None, :])
    return np.sqrt(np.sum(dx * dx, axis=-1) + dt * dt)


def _common_chart(sets: Sequence[CoverSet]) -> Optional[Isometry]:
    """A chart in which all sets are vertical capsules, or ``None`` for mixed cusps."""
    keys = {s.horoball() for s in sets if s.is_stretched}
    if len(keys) > 1:
        return None
    for s in sets:
        if s.is_stretched:
            return s.stretched.chart
    return Isometry.identity(sets[0].center.n)


def intersects(a: CoverSet, b: CoverSet, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Whether two cover sets meet (exact for shared charts)."""
    if not a.is_stretched and not b.is_stretched:
        return dist(a.center, b.center) < a.radius + b.radius - tol.tol_geom
    K = _common_chart([a, b])
    if K is None:
        return common_point([a, b], tol) is not None
    xa, la, ha, ra = chart_segment(a, K)
    xb, lb, hb, rb = chart_segment(b, K)
    gap = max(0.0, lb - ha, la - hb)
    d = math.sqrt(float(np.sum((xa - xb) ** 2)) + gap * gap)
    return d < (ra + rb) * (1.0 - tol.tol_geom)


# ---------------------------------------------------------------------------
# k-wise intersections
# ---------------------------------------------------------------------------


def ellipsoid_feasibility(X: np.ndarray, LO: np.ndarray, HI: np.ndarray, R: np.ndarray,
                          mask: Optional[np.ndarray] = None, rel_tol: float = 1e-9,
                          max_iter: Optional[int] = None, start: Optional[np.ndarray] = None):
    """Batched central-cut ellipsoid method for common points of vertical capsules.

    Minimises ``F(p) = max_j (dist(p, segment_j) - R_j)``.  A family is
    *present* when a centre with ``F < -rel_tol * scale`` is found and *absent*
    when the certified lower bound ``max_k (F(c_k) - sqrt(g_k^T P_k g_k))``
    exceeds ``rel_tol * scale``; ``scale`` is the initial ellipsoid radius.

    Parameters
    ----------
    X : ndarray, shape (B, k, d-1)
    LO, HI, R : ndarray, shape (B, k)
    mask : ndarray of bool, shape (B, k), optional
        Valid members (families may be padded).

    Returns
    -------
    status : ndarray of int
        ``1`` present, ``0`` absent, ``-1`` indeterminate.
    points : ndarray, shape (B, d)
        Witness points for present families.
    lower : ndarray
        Certified lower bounds of ``min F``.
    """
    X = np.asarray(X, dtype=float)
    B, k, m1 = X.shape
    d = m1 + 1
    if mask is None:
        mask = np.ones((B, k), dtype=bool)
    if max_iter is None:
        max_iter = 60 * d * (d + 1)
    # start from the member with the smallest enclosing ball
    rad = np.where(mask, (HI - LO) / 2 + R, np.inf)
    j0 = np.argmin(rad, axis=1)
    ar = np.arange(B)
    c = np.concatenate([X[ar, j0], ((LO[ar, j0] + HI[ar, j0]) / 2)[:, None]], axis=1)
    scale = rad[ar, j0]
    P = (scale ** 2)[:, None, None] * np.eye(d)[None]
    if start is not None:
        c = np.asarray(start, dtype=float).copy()
    status = -np.ones(B, dtype=int)
    points = np.full((B, d), np.nan)
    lower = np.full(B, -np.inf)
    active = np.arange(B)
    BIG = np.inf
    for _ in range(max_iter):
        if active.size == 0:
            break
        ca = c[active]
        Xa, La, Ha, Ra, Ma = X[active], LO[active], HI[active], R[active], mask[active]
        dx = ca[:, None, :-1] - Xa
        ct = ca[:, None, -1]
        dt = ct - np.clip(ct, La, Ha)
        dn = np.sqrt(np.sum(dx * dx, axis=-1) + dt * dt)
        f = np.where(Ma, dn - Ra, -BIG)
        j = np.argmax(f, axis=1)
        ai = np.arange(active.size)
        F = f[ai, j]
        sc = scale[active]
        found = F < -rel_tol * sc
        if np.any(found):
            idx = active[found]
            status[idx] = 1
            points[idx] = ca[found]
        g = np.concatenate([dx[ai, j], dt[ai, j][:, None]], axis=1)
        nrm = dn[ai, j]
        g = g / np.maximum(nrm, 1e-300)[:, None]
        Pa = P[active]
        Pg = np.einsum("bij,bj->bi", Pa, g)
        gPg = np.einsum("bi,bi->b", g, Pg)
        lb = F - np.sqrt(np.maximum(gPg, 0.0))
        lower[active] = np.maximum(lower[active], lb)
        absent = (~found) & (lower[active] > rel_tol * sc)
        if np.any(absent):
            status[active[absent]] = 0
        # degenerate subgradient (centre on a segment) means F = -R < 0, handled by `found`
        keep = ~(found | absent) & (gPg > 0)
        if not np.any(keep):
            active = active[:0]
            break
        a2 = active[keep]
        Pg, gPg = Pg[keep], gPg[keep]
        gt = Pg / np.sqrt(gPg)[:, None]
        c[a2] = c[a2] - gt / (d + 1)
        P[a2] = (d * d / (d * d - 1.0)) * (P[a2] - (2.0 / (d + 1)) * np.einsum("bi,bj->bij", gt, gt))
        active = a2
    return status, points, lower


def common_point(sets: Sequence[CoverSet], tol: Tolerances = DEFAULT_TOL,
                 return_status: bool = False):
    """A point in the common intersection of cover sets, or ``None``.

    Sets sharing a chart are handled by :func:`ellipsoid_feasibility`; families
    mixing stretched balls of different cusps fall back to a cutting-plane
    search in Klein coordinates (present or indeterminate only).  An
    indeterminate result is returned as ``None``; ``return_status`` exposes it.
    """
    if len(sets) == 0:
        raise ValueError("need at least one set")
    K = _common_chart(sets)
    if K is None:
        p, st = _klein_search(sets, tol)
        return (p, st) if return_status else p
    segs = [chart_segment(s, K) for s in sets]
    X = np.array([s[0] for s in segs])[None]
    LO = np.array([s[1] for s in segs])[None]
    HI = np.array([s[2] for s in segs])[None]
    R = np.array([s[3] for s in segs])[None]
    st, pts, _ = ellipsoid_feasibility(X, LO, HI, R, rel_tol=tol.tol_geom)
    p = None
    if st[0] == 1:
        q = Point(pts[0, :-1], float(pts[0, -1]))
        p = apply(K.inverse(), q)
    return (p, int(st[0])) if return_status else p


def _klein_search(sets: Sequence[CoverSet], tol: Tolerances, max_iter: int = 3000):
    """Ellipsoid cuts on quasi-convex distance functions in Klein coordinates."""
    n = sets[0].center.n
    centers = np.array([s.center.hyperboloid() for s in sets])
    ref = centers.mean(axis=0)

    def klein_to_xt(k):
        X = np.concatenate([k, [1.0]])
        q = -(X[-1] ** 2 - np.sum(X[:-1] ** 2))
        if q >= 0:
            return None
        X = X / math.sqrt(-q)
        u = X[-1] - X[-2]
        return X[:-2] / u, 1.0 / u

    def F_all(k):
        xt = klein_to_xt(k)
        if xt is None:
            return np.full(len(sets), 1.0)
        x, t = xt
        out = []
        for s in sets:
            if s.stretched is None:
                out.append(float(dist_xt(x, t, s.center.x, s.center.t)) / s.radius - 1.0)
            else:
                U = s.stretched
                cx, ct = _apply_lc(U.chart._lc, x[None, :], np.array([t]))
                dd = segment_distance(cx, ct, U.axis_x[None, :], np.array([U.t_lo]), np.array([U.t_hi]))[0, 0]
                out.append(dd / U.r_eucl - 1.0)
        return np.array(out)

    k = ref[:-1] / ref[-1]
    rad = max(1e-3, float(np.max(np.linalg.norm(centers[:, :-1] / centers[:, -1:] - k, axis=1))) * 1.5)
    P = rad ** 2 * np.eye(n)
    h = 1e-7 * rad
    for _ in range(max_iter):
        f = F_all(k)
        j = int(np.argmax(f))
        if f[j] < -1e-9:
            x, t = klein_to_xt(k)
            return Point(x, t), 1
        g = np.zeros(n)
        for a in range(n):
            e = np.zeros(n)
            e[a] = h
            g[a] = (F_all(k + e)[j] - F_all(k - e)[j]) / (2 * h)
        gPg = float(g @ P @ g)
        if not gPg > 1e-300:
            break
        gt = P @ g / math.sqrt(gPg)
        k = k - gt / (n + 1)
        P = (n * n / (n * n - 1.0)) * (P - (2.0 / (n + 1)) * np.outer(gt, gt))
        if math.sqrt(np.max(np.abs(np.linalg.eigvalsh(P)))) < 1e-12 * rad:
            break
    return None, -1
