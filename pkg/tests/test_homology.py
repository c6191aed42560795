import math
import time
from itertools import combinations

import numpy as np
import pytest

from orbithick.homology import (
    SimplicialComplex,
    boundary_matrix,
    euler_characteristic,
    homology,
    relative_homology,
    smith_normal_form,
    smith_normal_form_with_transforms,
)
from triangulations import is_closed_surface, klein_bottle, projective_plane, sphere, torus


def _invariant_factors_by_minors(A):
    """Invariant factors from determinantal divisors ``d_k = gcd`` of all ``k x k`` minors."""
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    prev, out = 1, []
    for k in range(1, min(m, n) + 1):
        rows = np.array(list(combinations(range(m), k)))
        cols = np.array(list(combinations(range(n), k)))
        sub = A[rows[:, None, :, None], cols[None, :, None, :]]
        dets = np.rint(np.linalg.det(sub.reshape(-1, k, k))).astype(np.int64)
        g = int(np.gcd.reduce(np.abs(dets))) if dets.size else 0
        if g == 0:
            break
        out.append(g // prev)
        prev = g
    return out


def test_snf_against_determinantal_divisors():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        m, n = rng.integers(1, 7, size=2)
        A = rng.integers(-9, 10, size=(m, n))
        if rng.uniform() < 0.3:
            # force rank deficiency
            A[-1] = A[0] * rng.integers(-2, 3)
        factors, rank = smith_normal_form(A.tolist())
        assert factors == _invariant_factors_by_minors(A)
        assert rank == np.linalg.matrix_rank(A.astype(float))
        assert all(b % a == 0 for a, b in zip(factors, factors[1:]))


def test_snf_transforms():
    rng = np.random.default_rng(1)
    for _ in range(50):
        A = rng.integers(-9, 10, size=(4, 5))
        D, U, V = smith_normal_form_with_transforms(A.tolist())
        assert np.array_equal(U.dot(A.astype(object)).dot(V), D)
        assert abs(round(float(np.linalg.det(U.astype(float))))) == 1
        assert abs(round(float(np.linalg.det(V.astype(float))))) == 1
        off = D.copy()
        for i in range(min(D.shape)):
            off[i, i] = 0
        assert not np.any(off.astype(np.int64))


def test_fixtures_are_closed_surfaces():
    for cx in (sphere(), projective_plane(), torus(), klein_bottle()):
        assert cx.is_closed() and is_closed_surface(cx)
    assert [euler_characteristic(c) for c in (sphere(), projective_plane(), torus(), klein_bottle())] == [2, 1, 0, 0]


def test_surface_homology_is_exact_and_fast():
    start = time.perf_counter()
    s2 = homology(sphere())
    assert s2.betti_Q == [1, 0, 1] and s2.torsion_factors == [[], [], []]
    t2 = homology(torus())
    assert t2.betti_Q == [1, 2, 1] and t2.torsion_factors == [[], [], []]
    rp2 = homology(projective_plane())
    assert rp2.betti_Q == [1, 0, 0]
    assert rp2.torsion_factors == [[], [2], []]
    assert rp2.betti_Fp[2] == [1, 1, 1] and rp2.betti_Fp[3] == [1, 0, 0]
    kb = homology(klein_bottle())
    assert kb.betti_Q == [1, 1, 0] and kb.torsion_factors == [[], [2], []]
    assert time.perf_counter() - start < 5.0


def test_log_torsion():
    assert homology(projective_plane()).log_torsion == pytest.approx([0.0, math.log(2), 0.0])


def test_boundary_squares_to_zero():
    cx = torus(4, 4)
    d1, d2 = boundary_matrix(cx, 1), boundary_matrix(cx, 2)
    assert (d1 @ d2).count_nonzero() == 0
    with pytest.raises(ValueError):
        boundary_matrix(cx, 5)


def test_top_degree_uses_next_boundary():
    # the solid tetrahedron has trivial H_2 only when the 3-cell is used
    solid = SimplicialComplex.from_maximal(4, [(0, 1, 2, 3)])
    assert homology(solid, top=2).betti_Q == [1, 0, 0]
    assert homology(solid.skeleton(2), top=2).betti_Q == [1, 0, 1]


def test_relative_homology():
    s2 = sphere()
    circle = SimplicialComplex.from_maximal(3, [(0, 1), (1, 2), (0, 2)])
    assert relative_homology(s2, circle, vertex_map=[0, 1, 2]).betti_Q == [0, 0, 2]
    # sharing the vertex set adds the isolated vertex 3 to the subcomplex
    circle_pt = SimplicialComplex.from_maximal(4, [(0, 1), (1, 2), (0, 2)])
    assert relative_homology(s2, circle_pt).betti_Q == [0, 1, 2]
    disk = SimplicialComplex.from_maximal(4, [(0, 1, 2), (0, 1, 3), (0, 2, 3)])
    bd = SimplicialComplex.from_maximal(3, [(0, 1), (1, 2), (0, 2)])
    assert relative_homology(disk, bd, vertex_map=[1, 2, 3]).betti_Q == [0, 0, 1]


def test_complex_validation():
    with pytest.raises(ValueError):
        SimplicialComplex(3, {1: [(0, 5)]})
    with pytest.raises(ValueError):
        SimplicialComplex(3, {1: [(1, 1)]})
    cx = SimplicialComplex(3, {2: [(0, 1, 2)]})
    assert not cx.is_closed()


def test_disjoint_union_and_wedge():
    two = SimplicialComplex.from_maximal(8, [tuple(f) for f in combinations(range(4), 3)]
                                         + [tuple(v + 4 for v in f) for f in combinations(range(4), 3)])
    assert homology(two).betti_Q == [2, 0, 2]
    wedge = SimplicialComplex.from_maximal(5, [(0, 1), (1, 2), (0, 2), (0, 3), (3, 4), (0, 4)])
    assert homology(wedge).betti_Q == [1, 2]
