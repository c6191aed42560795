"""Sampled property checks of a cover.

Each check returns a plain dictionary with the counts it measured and a
``passed`` flag, so that reports and tests can consume it directly.  None of
the checks alters the cover.
"""

from __future__ import annotations

import math
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .build import CoverResult, flow_xt, safe_orbit
from .cover import (
    CoverSet,
    StretchedBall,
    chart_segment,
    comparison_ball,
    flow_time_cap,
    intersects,
    stretched_from_center,
)
from .groups import ElementInventory
from .hyperbolic import (
    Isometry,
    Point,
    apply,
    dist,
    dist_xt,
    fixed_subspace,
    from_hyperboloid,
    lorentz_inner,
    to_hyperboloid,
)
from .lifts import LiftTable

__all__ = [
    "sample_in",
    "sample_surface",
    "coverage_check",
    "flow_stability_check",
    "stretch_checks",
    "cap_oracle",
    "shell_check",
    "same_horosphere_check",
    "monotonicity_check",
    "convexity_check",
    "foldability_report",
]


# ---------------------------------------------------------------------------
# sampling inside cover sets
# ---------------------------------------------------------------------------


def _unit_vectors(rng: np.random.Generator, m: int, d: int) -> np.ndarray:
    v = rng.normal(size=(m, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _capsule_points(S: CoverSet, rng: np.random.Generator, m: int, surface: bool):
    """Points of the capsule of ``S`` in chart coordinates, with the chart used."""
    n = S.center.n
    if S.is_stretched:
        U = S.stretched
        K = U.chart
        ax, lo, hi, r = U.axis_x, U.t_lo, U.t_hi, U.r_eucl
    else:
        K = Isometry.identity(n)
        ax, lo, hi, r = S.center.x, S.center.t * math.cosh(S.radius), S.center.t * math.cosh(S.radius), \
            S.center.t * math.sinh(S.radius)
    s = lo + (hi - lo) * rng.uniform(size=m)
    u = _unit_vectors(rng, m, n)
    rad = np.full(m, r) if surface else r * rng.uniform(size=m) ** (1.0 / n)
    P = np.concatenate([np.broadcast_to(ax, (m, n - 1)), s[:, None]], axis=1) + rad[:, None] * u
    return K, P[:, :-1], P[:, -1]


def _to_base(K: Isometry, x: np.ndarray, t: np.ndarray):
    return K.inverse().apply_xt(x, t)


def sample_in(S: CoverSet, rng: np.random.Generator, m: int):
    """``m`` points inside ``S`` (base coordinates)."""
    K, x, t = _capsule_points(S, rng, m, surface=False)
    return _to_base(K, x, t)


def sample_surface(S: CoverSet, rng: np.random.Generator, m: int):
    """``m`` points on the boundary of ``S`` (base coordinates)."""
    K, x, t = _capsule_points(S, rng, m, surface=True)
    return _to_base(K, x, t)


def _hyperbolic_midpoints(x1, t1, x2, t2):
    X = to_hyperboloid(x1, t1) + to_hyperboloid(x2, t2)
    X = X / np.sqrt(-lorentz_inner(X, X))[:, None]
    return from_hyperboloid(X)


# ---------------------------------------------------------------------------
# coverage and flow stability
# ---------------------------------------------------------------------------


def coverage_check(cover: CoverResult, table: Optional[LiftTable] = None, samples: int = 10_000,
                   seed: int = 0) -> dict:
    """Quasi-random points of the shrunken thick part must each lie in a cover set."""
    table = table if table is not None else LiftTable(cover)
    rng = np.random.default_rng(seed)
    px, pt = cover.region.sample(rng, samples, cover.cascade.shrink)
    ok = table.covered(px, pt)
    bad = np.flatnonzero(~ok)
    return {"samples": int(pt.size), "uncovered": int(bad.size), "passed": bool(bad.size == 0 and pt.size > 0),
            "uncovered_points": [{"x": px[i].tolist(), "t": float(pt[i])} for i in bad[:10]]}


def flow_stability_check(cover: CoverResult, table: Optional[LiftTable] = None, trajectories: int = 200,
                         seed: int = 0, step: Optional[float] = None) -> dict:
    """Flow lines from the collar must stay covered after first entering the cover.

    Start points lie in the collar ``0 < d_thin < shrink``.  Each trajectory
    moves away from the cusp with step ``mu_n / 4`` until ``d_thin`` reaches
    ``shrink``, the boundary of the shrunken thick part, or until it meets the
    cut locus between two cusps, where the flow is no longer defined.
    """
    thin = cover.thin
    if not thin.has_cusps:
        return {"applicable": False, "passed": True, "trajectories": 0}
    table = table if table is not None else LiftTable(cover)
    casc = cover.cascade
    shrink = casc.shrink
    step = casc.of(casc.n) / 4.0 if step is None else step
    rng = np.random.default_rng(seed)
    xs, ts = [], []
    need = trajectories
    for _ in range(50):
        px, pt = cover.region.sample(rng, 4 * need, casc.mu_minus1 / 4.0)
        d = thin.signed_distance_xt(px, pt)
        sel = d < shrink
        xs.append(px[sel])
        ts.append(pt[sel])
        need -= int(sel.sum())
        if need <= 0:
            break
    x = np.concatenate(xs)[:trajectories]
    t = np.concatenate(ts)[:trajectories]
    m = t.size
    entered = np.zeros(m, dtype=bool)
    exits = np.zeros(m, dtype=int)
    active = np.ones(m, dtype=bool)
    ridge = np.zeros(m, dtype=bool)
    prev = np.full(m, -np.inf)
    steps = 0
    max_steps = int(math.ceil((shrink + casc.mu_minus1) / step)) + 10
    while np.any(active) and steps <= max_steps:
        idx = np.flatnonzero(active)
        d = thin.signed_distance_xt(x[idx], t[idx])
        cov = table.covered(x[idx], t[idx])
        exits[idx] += (entered[idx] & ~cov).astype(int)
        entered[idx] |= cov
        # inside one cusp chart d_thin grows by exactly one step; a smaller gain
        # means the trajectory hit the cut locus between cusps where the flow ends
        stall = d - prev[idx] < 0.5 * step
        ridge[idx[stall & (d < shrink)]] = True
        prev[idx] = d
        done = (d >= shrink) | stall
        active[idx[done]] = False
        idx = idx[~done]
        if idx.size == 0:
            break
        nx, nt = flow_xt(thin, x[idx], t[idx], np.full(idx.size, step))
        nx, nt = cover.region.reduce(nx, nt)
        x[idx], t[idx] = nx, nt
        steps += 1
    never = int(np.sum(~entered))
    return {"applicable": True, "trajectories": m, "step": step, "steps": steps,
            "exits_after_entry": int(np.sum(exits > 0)), "never_entered": never,
            "ended_at_cut_locus": int(ridge.sum()), "unfinished": int(np.sum(active)),
            "passed": bool(m == trajectories and np.all(exits == 0) and never == 0 and not np.any(active))}


# ---------------------------------------------------------------------------
# stretching
# ---------------------------------------------------------------------------


def cap_oracle(eps: float) -> float:
    """Flow time between the horospheres where a unit translation moves points by ``eps`` and ``eps/2``.

    Root-finds both heights from the displacement ``2 asinh(1/(2t))``; this is
    independent of the closed form used by :func:`flow_time_cap`.
    """
    def height(target):
        return brentq(lambda t: 2.0 * math.asinh(0.5 / t) - target, 1e-12, 1e12, xtol=1e-300, rtol=1e-15,
                      maxiter=500)

    return math.log(height(eps / 2.0) / height(eps))


def stretch_checks(cover: CoverResult, samples_per_set: int = 256, seed: int = 0) -> dict:
    """Stretched balls stay in ``M_+`` and inside ``B_R`` of their initial centre.

    ``R`` is the flow-time cap plus ``mu_{-1}``.  Also compares the cap with
    :func:`cap_oracle`.
    """
    rng = np.random.default_rng(seed)
    eps = cover.levels.eps_n
    cap = flow_time_cap(eps)
    oracle = cap_oracle(eps)
    R = cap + cover.cascade.mu_minus1
    thin = cover.thin
    outside_thick = 0
    outside_ball = 0
    over_cap = 0
    worst_depth = math.inf
    worst_reach = 0.0
    count = 0
    for S in cover.sets:
        if not S.is_stretched:
            continue
        count += 1
        U = S.stretched
        over_cap += int(U.flow_time > cap * (1 + 1e-12))
        x, t = sample_surface(S, rng, samples_per_set)
        d = thin.signed_distance_xt(x, t)
        outside_thick += int(np.sum(d < 0.0))
        worst_depth = min(worst_depth, float(d.min()))
        r = dist_xt(x, t, U.initial_center.x[None, :], U.initial_center.t)
        outside_ball += int(np.sum(r >= R))
        worst_reach = max(worst_reach, float(r.max()))
    return {"stretched": count, "samples_per_set": samples_per_set, "cap": cap, "cap_oracle": oracle,
            "cap_error": abs(cap - oracle), "R": R, "over_cap": over_cap,
            "outside_thick": outside_thick, "min_thin_distance": worst_depth if count else None,
            "outside_ball": outside_ball, "max_reach": worst_reach if count else None,
            "passed": bool(abs(cap - oracle) <= 1e-9 and over_cap == 0 and outside_thick == 0
                           and outside_ball == 0)}


def shell_check(cover: CoverResult, tol: float = 1e-5) -> dict:
    """Initial centres of stretched balls lie at distance ``8 mu_i`` from the shrunken thick part."""
    errs = []
    for S in cover.sets:
        if S.is_stretched:
            d = cover.thin.signed_distance(S.center)
            target = cover.shell_level(S.stratum_dim)
            errs.append(abs(d - target))
    worst = max(errs) if errs else 0.0
    return {"stretched": len(errs), "max_error": worst, "tol": tol, "passed": bool(worst <= tol)}


def same_horosphere_check(trials: int = 10_000, seed: int = 0, dims: Sequence[int] = (2, 3)) -> dict:
    """Intersecting stretched balls with initial centres on one horosphere satisfy ``d(y, y') < 2 rho + 2 rho'``.

    Random pairs in the chart with the cusp at infinity; pairs are drawn until
    ``trials`` of them intersect.
    """
    rng = np.random.default_rng(seed)
    found = 0
    drawn = 0
    violations = 0
    worst = 0.0
    per_dim = trials // len(dims)
    for n in dims:
        K = Isometry.identity(n)
        target = per_dim + (trials - per_dim * len(dims) if n == dims[-1] else 0)
        got = 0
        while got < target:
            drawn += 1
            t0 = float(np.exp(rng.uniform(-1.0, 1.0)))
            rho, rho2 = rng.uniform(0.005, 0.6, size=2)
            r, r2 = t0 * math.sinh(rho), t0 * math.sinh(rho2)
            D = rng.uniform(0.0, 1.3) * (r + r2)
            x = rng.normal(size=n - 1)
            u = _unit_vectors(rng, 1, n - 1)[0]
            x2 = x + D * u
            e1, e2 = t0 * np.exp(rng.uniform(0.0, 1.5, size=2))
            a = CoverSet("stretched", n, 0, apply(K.inverse(), Point(x, t0)), float(rho),
                         stretched_from_center(K, x, t0, float(rho), float(e1), n))
            b = CoverSet("stretched", n, 1, apply(K.inverse(), Point(x2, t0)), float(rho2),
                         stretched_from_center(K, x2, t0, float(rho2), float(e2), n))
            if not intersects(a, b):
                continue
            got += 1
            d = dist(a.center, b.center)
            ratio = d / (2 * rho + 2 * rho2)
            worst = max(worst, ratio)
            violations += int(ratio >= 1.0)
        found += got
    return {"pairs": found, "drawn": drawn, "violations": violations, "max_ratio": worst,
            "passed": bool(violations == 0 and found == trials)}


def _chart_height(K: Isometry, p: Point) -> float:
    return apply(K, p).t


def monotonicity_check(cover: CoverResult, table: Optional[LiftTable] = None) -> dict:
    """Radius monotonicity and comparison-ball transfer on the pairs of a cover.

    * For intersecting pairs where a stretched member has the strictly larger
      initial radius, its initial horosphere is closer to the cusp point.
    * For stretched pairs at a common cusp point (intersecting or with meeting
      bounding balls), ``U`` meets ``U''`` exactly when the comparison ball of
      ``U`` at the height of ``U''`` does, and the comparison radius moves in
      the stated direction.
    """
    table = table if table is not None else LiftTable(cover)
    mono_pairs = mono_bad = 0
    trans_pairs = trans_bad = trans_meet = 0
    radius_bad = 0
    for v in range(table.V):
        if not table.is_str[v]:
            continue
        a = table.cover_set(v)
        U = a.stretched
        K = U.chart
        for k in table.neighbours(v):
            b = table.cover_set(int(k))
            same_cusp = (not b.is_stretched) or table.horo[k] == table.horo[v]
            if not same_cusp:
                continue
            hit = intersects(a, b)
            if hit and a.radius > b.radius * (1 + 1e-12):
                mono_pairs += 1
                if not U.t_initial > _chart_height(K, b.center):
                    mono_bad += 1
            if b.is_stretched:
                h = _chart_height(K, b.center)
                if h >= U.t_end:
                    continue
                Up = comparison_ball(U, h)
                ap = CoverSet(a.kind, a.stratum_dim, a.center_id, Up.initial_center, Up.initial_radius, Up)
                trans_pairs += 1
                trans_meet += int(hit)
                if intersects(ap, b) != hit:
                    trans_bad += 1
                closer = h > U.t_initial
                if (closer and Up.initial_radius > U.initial_radius * (1 + 1e-12)) or \
                        (not closer and Up.initial_radius < U.initial_radius * (1 - 1e-12)):
                    radius_bad += 1
    return {"monotonicity_pairs": mono_pairs, "monotonicity_violations": mono_bad,
            "transfer_pairs": trans_pairs, "transfer_intersecting": trans_meet,
            "transfer_violations": trans_bad, "radius_order_violations": radius_bad,
            "passed": bool(mono_bad == 0 and trans_bad == 0 and radius_bad == 0)}


def convexity_check(sets: Sequence[CoverSet], trials: int = 10_000, seed: int = 0) -> dict:
    """Hyperbolic midpoints of points inside a stretched ball stay inside."""
    rng = np.random.default_rng(seed)
    pool = [S for S in sets if S.is_stretched]
    if not pool:
        return {"trials": 0, "violations": 0, "passed": True}
    per = int(math.ceil(trials / len(pool)))
    done = bad = 0
    for S in pool:
        m = min(per, trials - done)
        if m <= 0:
            break
        x1, t1 = sample_in(S, rng, m)
        x2, t2 = sample_in(S, rng, m)
        inside = S.contains_xt(x1, t1) & S.contains_xt(x2, t2)
        mx, mt = _hyperbolic_midpoints(x1[inside], t1[inside], x2[inside], t2[inside])
        bad += int(np.sum(~S.contains_xt(mx, mt, margin=-1e-12)))
        done += int(inside.sum())
    return {"trials": done, "violations": bad, "passed": bool(bad == 0 and done > 0)}


# ---------------------------------------------------------------------------
# foldability
# ---------------------------------------------------------------------------


def _stabiliser(inv: ElementInventory, p: Point, tol: float = 1e-8) -> np.ndarray:
    gx, gt, gi = safe_orbit(inv.lightcone, p.x, p.t)
    return gi[dist_xt(gx, gt, p.x[None, :], p.t) < tol]


def _fixed_set(inv: ElementInventory, idx: np.ndarray):
    """Common fixed subspace of the listed inventory elements (``None`` if only the identity)."""
    gens = [inv.elements[g] for g in idx if g != 0]
    return fixed_subspace(gens) if gens else None


def foldability_report(sets: Sequence[CoverSet], strata: list, inv: ElementInventory,
                       samples: int = 64, seed: int = 0, tol: float = 1e-8) -> dict:
    """Sampled checks of the four foldability clauses for each cover set.

    Clauses: (1) precise invariance over the inventory, (2) the stratum ``Y``
    through the centre is fixed pointwise by the stabiliser, (3) the nearest
    point projection onto ``Y`` maps samples of ``U`` into ``U``, (4) ``U`` meets
    ``Y`` in a convex set (midpoints of sampled pairs).  Also checks that every
    element moving the centre less than ``8 mu_i`` fixes it, with
    ``mu_i = radius / 3``; checking every centre covers every intersecting
    family.
    """
    rng = np.random.default_rng(seed)
    n = inv.n
    dims = {s.dim for s in strata}
    rows = []
    totals = {"precise_invariance": 0, "stratum_fixed": 0, "projection": 0, "convexity": 0, "hypothesis": 0}
    for idx, S in enumerate(sets):
        c, R = S.bounding_ball()
        y = S.center
        stab = _stabiliser(inv, c, tol)
        gx, gt, gi = safe_orbit(inv.lightcone, c.x, c.t)
        near = gi[(dist_xt(gx, gt, c.x[None, :], c.t) < 2 * R) & ~np.isin(gi, stab)]
        overlaps = [int(g) for g in near if intersects(S, S.lifted(inv.elements[g]))]
        clause1 = not overlaps
        dim = S.stratum_dim
        Y = _fixed_set(inv, _stabiliser(inv, y, tol))
        if Y is not None and (Y.dim != dim or dim not in dims):
            Y = None
        xs, ts = sample_in(S, rng, samples)
        keep = S.contains_xt(xs, ts)
        xs, ts = xs[keep], ts[keep]
        if Y is None and dim < n:
            clause2 = clause3 = clause4 = False
        elif Y is None:
            clause2 = all(g == 0 for g in stab)
            clause3 = clause4 = True
        else:
            P = Y.project_hyperboloid(to_hyperboloid(xs, ts))
            qx, qt = from_hyperboloid(P)
            moved = [float(np.max(dist_xt(*inv.elements[g].apply_xt(qx, qt), qx, qt))) for g in stab if g != 0]
            clause2 = all(m < 1e-7 for m in moved)
            inside = S.contains_xt(qx, qt, margin=-1e-12)
            clause3 = bool(np.all(inside))
            qx, qt = qx[inside], qt[inside]
            if qt.size >= 2:
                j = rng.permutation(qt.size)
                mx, mt = _hyperbolic_midpoints(qx, qt, qx[j], qt[j])
                clause4 = bool(np.all(S.contains_xt(mx, mt, margin=-1e-12)))
            else:
                clause4 = True
        mu = S.radius / 3.0
        yx, yt, yi = safe_orbit(inv.lightcone, y.x, y.t)
        dy = dist_xt(yx, yt, y.x[None, :], y.t)
        hyp = not np.any((dy < 8 * mu) & (dy > tol))
        for key, ok in zip(totals, (clause1, clause2, clause3, clause4, hyp)):
            totals[key] += int(not ok)
        rows.append({"set": idx, "stabiliser_order": int(stab.size), "overlapping_images": overlaps[:10],
                     "precise_invariance": clause1, "stratum_fixed": clause2, "projection": clause3,
                     "convexity": clause4, "hypothesis": hyp})
    return {"sets": len(rows), "failures": totals, "passed": all(v == 0 for v in totals.values()),
            "per_set": rows}
