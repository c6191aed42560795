import itertools
import math

import numpy as np
import pytest

from orbithick.build import ResourceLimitError, safe_orbit
from orbithick.cover import common_point, intersects
from orbithick.homology import homology
from orbithick.hyperbolic import dist_xt
from orbithick.lifts import LiftTable
from orbithick.nerve import certify, nerve, packing_degree_bound


@pytest.fixture(scope="module")
def trivial_nerve(trivial_cover):
    return nerve(trivial_cover)


@pytest.fixture(scope="module")
def coarse_nerve(coarse_modular_cover):
    return nerve(coarse_modular_cover)


def _brute_edges(cover):
    """Edges by testing every inventory image of every set against every original."""
    sets, inv = cover.sets, cover.inv
    balls = [s.bounding_ball() for s in sets]
    edges = set()
    for v, (cv, rv) in enumerate(balls):
        gx, gt, gi = safe_orbit(inv.lightcone, cv.x, cv.t)
        for u, (cu, ru) in enumerate(balls):
            if u == v:
                continue
            near = dist_xt(gx, gt, cu.x[None, :], cu.t) < ru + rv
            for g in np.unique(gi[near]):
                if intersects(sets[u], sets[v].lifted(inv.elements[g])):
                    edges.add((min(u, v), max(u, v)))
                    break
    return edges


def test_trivial_edges_match_all_pairs(trivial_cover, trivial_nerve):
    sets = trivial_cover.sets
    brute = {(a, b) for a, b in itertools.combinations(range(len(sets)), 2) if intersects(sets[a], sets[b])}
    got = {tuple(int(v) for v in e) for e in trivial_nerve.full.simplices(1)}
    assert got == brute


def test_trivial_triangles_have_common_points(trivial_cover, trivial_nerve):
    sets = trivial_cover.sets
    rng = np.random.default_rng(0)
    T = trivial_nerve.full.simplices(2)
    for row in T[rng.choice(len(T), size=min(200, len(T)), replace=False)]:
        fam = [sets[int(v)] for v in row]
        p = common_point(fam)
        assert p is not None
        assert all(S.contains_xt(p.x[None, :], np.array([p.t]), margin=-1e-7)[0] for S in fam)


def test_trivial_missing_triangles_have_no_common_point(trivial_cover, trivial_nerve):
    sets = trivial_cover.sets
    E = {tuple(int(v) for v in e) for e in trivial_nerve.full.simplices(1)}
    T = {tuple(int(v) for v in t) for t in trivial_nerve.full.simplices(2)}
    nb = {}
    for a, b in E:
        nb.setdefault(a, set()).add(b)
    checked = 0
    for a, b in sorted(E):
        for c in sorted(nb.get(b, set())):
            if (a, c) in E and (a, b, c) not in T:
                assert common_point([sets[a], sets[b], sets[c]]) is None
                checked += 1
    assert checked > 0


def test_trivial_nerve_is_contractible(trivial_nerve):
    res = homology(trivial_nerve.full, top=2)
    assert list(res.betti_Q) == [1, 0, 0]


def test_quotient_edges_match_brute_force(coarse_modular_cover, coarse_nerve):
    got = {tuple(int(v) for v in e) for e in coarse_nerve.full.simplices(1)}
    assert got == _brute_edges(coarse_modular_cover)


def test_coarse_cover_diagnostics(coarse_nerve):
    d = coarse_nerve.diagnostics
    # these radii are too large for a good cover: sets meet their own translates
    assert d["self_overlaps"] > 0 and d["multi_lift_pairs"] > 0
    assert d["indeterminate"] == 0
    assert d["max_dim"] == 3


def test_degree_bound(coarse_modular_cover, coarse_nerve):
    b = packing_degree_bound(coarse_modular_cover)
    assert coarse_nerve.max_degree <= b["bound"]
    assert coarse_nerve.max_degree == coarse_nerve.degrees().max()


def test_sub_complex_is_full(coarse_modular_cover, coarse_nerve):
    sv = coarse_nerve.sub_vertices
    assert len(sv) == sum(S.is_stretched for S in coarse_modular_cover.sets)
    E = coarse_nerve.full.simplices(1)
    inside = np.isin(E, sv).all(axis=1)
    assert len(coarse_nerve.sub.simplices(1)) == int(inside.sum())


def test_certificate_formula(coarse_nerve):
    res = homology(coarse_nerve.full, top=2)
    vol = math.pi / 3
    cert = certify(coarse_nerve, 2, vol, res)
    V, D = coarse_nerve.vertex_count, coarse_nerve.max_degree
    assert cert.C_hat == pytest.approx(V / vol)
    assert cert.E_hat == pytest.approx((D + D ** 2 + 1) * V / vol)
    assert cert.F_hat == pytest.approx(D ** 2 * math.log(4) * V / vol)
    assert cert.passed
    assert cert.to_json()["betti_bound"] == pytest.approx(cert.E_hat * vol)
    with pytest.raises(ValueError):
        certify(coarse_nerve, 2, None, res)


def test_simplex_cap(coarse_modular_cover):
    with pytest.raises(ResourceLimitError):
        nerve(coarse_modular_cover, table=LiftTable(coarse_modular_cover), max_simplices=500)
