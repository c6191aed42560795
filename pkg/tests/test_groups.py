import math

import numpy as np
import pytest

from orbithick.groups import (
    EnumerationLimitError,
    abelianization,
    element_order,
    enumerate_elements,
    estimate_eta,
    estimate_nu,
    lattice_from_dict,
    load_lattice,
    quotient_dist,
    singular_strata,
)
from orbithick.hyperbolic import Point, apply
from conftest import fixture_path


def _psl2z_integer_ball(L):
    """Distinct elements of word length <= L in S, T via exact integer arithmetic."""
    S = ((0, -1), (1, 0))
    T = ((1, 1), (0, 1))
    Ti = ((1, -1), (0, 1))

    def mul(a, b):
        return tuple(tuple(sum(a[i][k] * b[k][j] for k in range(2)) for j in range(2)) for i in range(2))

    def key(a):
        flat = (a[0][0], a[0][1], a[1][0], a[1][1])
        neg = tuple(-v for v in flat)
        return max(flat, neg)

    I = ((1, 0), (0, 1))
    seen = {key(I)}
    frontier = [I]
    for _ in range(L):
        nxt = []
        for a in frontier:
            for g in (S, T, Ti):
                b = mul(a, g)
                k = key(b)
                if k not in seen:
                    seen.add(k)
                    nxt.append(b)
        frontier = nxt
    return len(seen)


def test_psl2z_inventory_matches_integer_oracle():
    spec = load_lattice(fixture_path("psl2z"))
    for L in (3, 6, 8):
        assert len(enumerate_elements(spec, L)) == _psl2z_integer_ball(L)


def test_gamma2_inventory_is_free():
    spec = load_lattice(fixture_path("gamma2"))
    for L in (2, 4):
        assert len(enumerate_elements(spec, L)) == 2 * 3 ** L - 1


def test_inventory_words_reproduce_elements():
    spec = load_lattice(fixture_path("psl2z"))
    inv = enumerate_elements(spec, 5)
    gens = spec.generators
    for g, w in zip(inv.elements[:60], inv.words[:60]):
        M = np.eye(3)
        for c in w:
            h = gens[abs(c) - 1]
            M = M @ (h.L if c > 0 else h.inverse().L)
        assert np.allclose(M, g.L, atol=1e-9)


def test_inventory_is_deterministic():
    spec = load_lattice(fixture_path("psl2z"))
    a, b = enumerate_elements(spec, 6), enumerate_elements(spec, 6)
    assert a.words == b.words


def test_enumeration_limit():
    spec = load_lattice(fixture_path("gamma2"))
    with pytest.raises(EnumerationLimitError):
        enumerate_elements(spec, 6, max_elements=100)


def test_estimates():
    spec = load_lattice(fixture_path("psl2z"))
    inv = enumerate_elements(spec, 8)
    assert estimate_nu(inv, spec) == pytest.approx(2 * math.acosh(1.5))
    assert estimate_eta(inv, spec) == 3
    orders = {element_order(inv.elements[k]) for k in inv.by_kind["elliptic"]}
    assert orders == {2, 3}
    g2 = load_lattice(fixture_path("gamma2"))
    ig = enumerate_elements(g2, 4)
    assert estimate_nu(ig, g2) == pytest.approx(2 * math.acosh(3))
    assert not ig.by_kind["elliptic"]


def test_triangle_group_orders():
    spec = load_lattice(fixture_path("triangle_237"))
    inv = enumerate_elements(spec, 6)
    assert estimate_eta(inv, spec) == 7


def test_quotient_distance_vanishes_on_orbits():
    spec = load_lattice(fixture_path("psl2z"))
    inv = enumerate_elements(spec, 6)
    p = Point([0.31], 1.7)
    q = apply(inv.elements[17], p)
    assert quotient_dist(p, q, inv) < 1e-9
    assert quotient_dist(p, Point([0.31], 3.0), inv) > 0.1


def test_singular_strata_of_modular_group():
    spec = load_lattice(fixture_path("psl2z"))
    inv = enumerate_elements(spec, 6)
    strata = singular_strata(inv)
    assert strata[0].dim == 2
    pts = [s for s in strata if s.dim == 0]
    assert pts and all(s.dim == 0 for s in strata[1:])
    i = Point([0.0], 1.0)
    assert any(s.subspace.contains(i, tol=1e-6) for s in pts)
    rho = Point([0.5], math.sqrt(3) / 2)
    assert any(s.subspace.contains(rho, tol=1e-6) for s in pts)


def test_singular_strata_of_picard_type_group_meet():
    spec = load_lattice(fixture_path("pgl2_zi"))
    inv = enumerate_elements(spec, 3)
    dims = {s.dim for s in singular_strata(inv)}
    assert 1 in dims and 0 in dims


def test_abelianization():
    assert abelianization(load_lattice(fixture_path("psl2z"))) == (0, [6])
    assert abelianization(load_lattice(fixture_path("gamma2"))) == (2, [])
    assert abelianization(load_lattice(fixture_path("figure_eight"))) == (1, [])


def test_lattice_validation():
    good = {"n": 2, "model": "psl2r", "generators": [[[1, 1], [0, 1]]], "volume": 1.0, "eta": 1, "nu": 1.0,
            "margulis_epsilon": 0.1, "margulis_index": 1}
    assert lattice_from_dict(good).n == 2
    with pytest.raises(ValueError):
        lattice_from_dict({k: v for k, v in good.items() if k != "volume"})
    with pytest.raises(ValueError):
        lattice_from_dict({**good, "relators": [[3]]})
    with pytest.raises(ValueError):
        lattice_from_dict({**good, "n": 3})
    with pytest.raises(ValueError):
        lattice_from_dict({**good, "nu": -1.0})
    with pytest.raises(ValueError):
        lattice_from_dict({**good, "model": "quaternion"})
