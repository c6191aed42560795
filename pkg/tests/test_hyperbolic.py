import math

import numpy as np
import pytest

from orbithick.hyperbolic import (
    INFINITY,
    Isometry,
    Point,
    TotallyGeodesicSubspace,
    UnresolvedClassification,
    apply,
    boundary_to_light,
    classify,
    cusp_chart,
    displacement,
    dist,
    dist_artanh,
    dist_horizontal,
    dist_vertical,
    dist_xt,
    euclidean_ball_to_hyperbolic,
    fixed_subspace,
    from_hyperboloid,
    geodesic_point,
    hyperbolic_ball_to_euclidean,
    light_to_boundary,
    lorentz_inner,
    midpoint,
    project_to_subspace,
    to_hyperboloid,
)


def _random_points(rng, m, n):
    x = rng.uniform(-2, 2, size=(m, n - 1))
    t = np.exp(rng.uniform(-1.5, 1.5, size=m))
    return x, t


def _acosh_dist(x1, t1, x2, t2):
    X, Y = to_hyperboloid(x1, t1), to_hyperboloid(x2, t2)
    return np.arccosh(np.maximum(1.0, -lorentz_inner(X, Y)))


@pytest.mark.parametrize("n", [2, 3])
def test_distance_formulas_agree(n):
    rng = np.random.default_rng(0)
    x1, t1 = _random_points(rng, 2000, n)
    x2, t2 = _random_points(rng, 2000, n)
    d = dist_xt(x1, t1, x2, t2)
    assert np.allclose(d, _acosh_dist(x1, t1, x2, t2), atol=1e-9)
    for i in range(50):
        p, q = Point(x1[i], t1[i]), Point(x2[i], t2[i])
        assert dist(p, q) == pytest.approx(dist_artanh(p, q), abs=1e-9)


def test_vertical_and_horizontal_special_cases():
    assert dist(Point([0.3], 1.0), Point([0.3], math.e)) == pytest.approx(1.0, abs=1e-12)
    assert dist_vertical(2.0, 0.5) == pytest.approx(math.log(4.0))
    assert dist(Point([0.0, 0.0], 2.0), Point([1.0, 0.0], 2.0)) == pytest.approx(dist_horizontal([0, 0], [1, 0], 2.0))
    assert dist_horizontal([0.0], [1.0], 1.0) == pytest.approx(2 * math.asinh(0.5))


def test_distance_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        dist(Point([0.0], 1.0), Point([0.0, 0.0], 1.0))


def test_point_validation():
    with pytest.raises(ValueError):
        Point([0.0], 0.0)
    with pytest.raises(ValueError):
        Point([0.0], float("inf"))


def test_hyperboloid_round_trip():
    rng = np.random.default_rng(1)
    x, t = _random_points(rng, 100, 3)
    X = to_hyperboloid(x, t)
    assert np.allclose(lorentz_inner(X, X), -1.0)
    x2, t2 = from_hyperboloid(X)
    assert np.allclose(x2, x) and np.allclose(t2, t)


def test_ball_identity():
    rng = np.random.default_rng(2)
    for _ in range(200):
        p = Point(rng.normal(size=2), float(np.exp(rng.normal())))
        rho = float(rng.uniform(0.01, 3.0))
        c, r = hyperbolic_ball_to_euclidean(p, rho)
        u = rng.normal(size=3)
        q = c + r * u / np.linalg.norm(u)
        assert dist(p, Point(q[:-1], q[-1])) == pytest.approx(rho, abs=1e-9)
        p2, rho2 = euclidean_ball_to_hyperbolic(c, r)
        assert dist(p, p2) < 1e-9 and rho2 == pytest.approx(rho, abs=1e-9)


def test_euclidean_ball_touching_boundary_rejected():
    with pytest.raises(ValueError):
        euclidean_ball_to_hyperbolic([0.0, 1.0], 1.0)


def test_geodesic_points():
    p, q = Point([0.0], 1.0), Point([2.0], 0.5)
    m = midpoint(p, q)
    assert dist(p, m) == pytest.approx(dist(q, m)) == pytest.approx(dist(p, q) / 2)
    g = geodesic_point(p, q, 0.25)
    assert dist(p, g) == pytest.approx(dist(p, q) / 4)


def test_classification_in_dimension_two():
    par = Isometry.from_sl2r([[1, 1], [0, 1]])
    hyp = Isometry.from_sl2r([[2, 0], [0, 0.5]])
    c, s = math.cos(0.7), math.sin(0.7)
    ell = Isometry.from_sl2r([[c, s], [-s, c]])
    assert par.kind == "parabolic"
    assert hyp.kind == "hyperbolic" and hyp.translation_length == pytest.approx(2 * math.log(2))
    assert ell.kind == "elliptic"
    assert Isometry.identity(2).kind == "identity"
    # displacement on the axis equals the translation length
    assert displacement(hyp, Point([0.0], 1.0)) == pytest.approx(2 * math.log(2))
    # elliptic element fixes i
    assert displacement(ell, Point([0.0], 1.0)) < 1e-12


def test_classification_in_dimension_three():
    w = complex(-0.5, math.sqrt(3) / 2)
    par = Isometry.from_sl2c([[1, w], [0, 1]])
    assert par.kind == "parabolic"
    lox = Isometry.from_sl2c([[2j, 0], [0, -0.5j]])
    assert lox.kind == "hyperbolic" and lox.translation_length == pytest.approx(2 * math.log(2))
    kind, _ = classify(np.eye(4))
    assert kind == "identity"


def test_classification_rejects_non_lorentz():
    with pytest.raises((ValueError, UnresolvedClassification)):
        Isometry.from_matrix(np.diag([2.0, 1.0, 1.0]))


@pytest.mark.parametrize("n", [2, 3])
def test_isometries_preserve_distance(n):
    rng = np.random.default_rng(3)
    g = Isometry.translation(rng.normal(size=n - 1)) @ Isometry.boost(n, 0.7) @ Isometry.inversion(n)
    x1, t1 = _random_points(rng, 500, n)
    x2, t2 = _random_points(rng, 500, n)
    gx1, gt1 = g.apply_xt(x1, t1)
    gx2, gt2 = g.apply_xt(x2, t2)
    assert np.allclose(dist_xt(gx1, gt1, gx2, gt2), dist_xt(x1, t1, x2, t2), atol=1e-9)
    h = g.inverse() @ g
    assert h.kind == "identity"


def test_boundary_points_and_cusp_chart():
    for z in (INFINITY, np.array([0.0]), np.array([0.7])):
        v = boundary_to_light(z, 2)
        back = light_to_boundary(v)
        if z is INFINITY:
            assert back is INFINITY
        else:
            assert np.allclose(back, z)
            C = cusp_chart(z, 2)
            assert light_to_boundary(C.L @ v) is INFINITY


def test_fixed_points_of_parabolic():
    par = Isometry.from_sl2r([[1, 1], [0, 1]])
    pts = par.fixed_boundary_points()
    assert len(pts) == 1 and pts[0] is INFINITY


def test_fixed_subspace_and_projection():
    ell = Isometry.from_sl2r([[0, 1], [-1, 0]])
    Y = fixed_subspace([ell])
    assert Y.dim == 0 and Y.contains(Point([0.0], 1.0))
    # reflection-free rotation about a vertical axis in H^3 fixes a geodesic
    rot = Isometry.from_sl2c([[1j, 0], [0, -1j]])
    Y3 = fixed_subspace([rot])
    assert Y3.dim == 1
    p = Point([0.3, -0.4], 2.0)
    q = project_to_subspace(Y3, p)
    assert np.allclose(q.x, 0.0, atol=1e-12)
    assert dist(p, q) == pytest.approx(float(Y3.distance(p)))
    with pytest.raises(ValueError):
        fixed_subspace([])


def test_whole_space_subspace():
    W = TotallyGeodesicSubspace.whole_space(3)
    assert W.dim == 3 and W.contains(Point([1.0, 2.0], 0.3))


def test_apply_dimension_mismatch():
    with pytest.raises(ValueError):
        apply(Isometry.identity(3), Point([0.0], 1.0))
