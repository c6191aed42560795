import math

import numpy as np
import pytest

from orbithick.checks import cap_oracle
from orbithick.cover import (
    CoverSet,
    MuCascade,
    StretchError,
    ball_volume,
    common_point,
    comparison_ball,
    default_eps_fn,
    ellipsoid_feasibility,
    flow_time_cap,
    greedy_discrete,
    intersects,
    make_stretched,
    mu_cascade,
    stretched_from_center,
)
from orbithick.hyperbolic import Isometry, Point, cusp_chart, dist, dist_xt


def test_ball_volume_closed_forms():
    r = 0.7
    assert ball_volume(r, 2) == pytest.approx(2 * math.pi * (math.cosh(r) - 1))
    assert ball_volume(r, 3) == pytest.approx(math.pi * (math.sinh(2 * r) - 2 * r))
    c = math.cosh(r)
    assert ball_volume(r, 4) == pytest.approx(2 * math.pi ** 2 * (c ** 3 / 3 - c + 2 / 3), rel=1e-10)
    # small radii approach the Euclidean volume
    assert ball_volume(1e-3, 3) == pytest.approx(4 / 3 * math.pi * 1e-9, rel=1e-5)


@pytest.mark.parametrize("eps", [0.05, 0.3, 1.0973, 2.36])
def test_flow_time_cap_matches_root_finding(eps):
    assert abs(flow_time_cap(eps) - cap_oracle(eps)) < 1e-9


def test_cap_tends_to_log_two_for_small_eps():
    assert flow_time_cap(1e-6) == pytest.approx(math.log(2), abs=1e-9)


def test_mu_cascade_formula():
    f = default_eps_fn(0.5, 3)
    c = mu_cascade(0.5, 0.3, f, f, n=2, M=3)
    assert c.mu[0] == pytest.approx(0.5 / 64)
    for a, b in zip(c.mu, c.mu[1:]):
        assert b == pytest.approx(min(f(a) / 12, f(a) / 24, a / 12))
    assert all(v is not False for v in c.inequality_report().values())
    assert c.shrink == 2 * c.mu_minus1 and c.of(2) == c.mu[3] and c.n == 2
    with pytest.raises(ValueError):
        mu_cascade(0.5, 0.3, lambda x: 0.0, f)


def test_override_cascade():
    c = MuCascade.override([0.1, 0.05, 0.01, 0.005])
    assert c.source == "override"
    rep = c.inequality_report()
    assert rep["strictly decreasing"] and rep["mu_0 <= mu_-1/12"] is False
    with pytest.raises(ValueError):
        MuCascade.override([0.1, -0.05, 0.01])


def test_greedy_discrete_is_maximal_and_separated():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, size=(400, 1))
    t = np.exp(rng.uniform(-0.5, 0.5, size=400))
    mu = 0.3
    acc = greedy_discrete(x, t, mu)
    D = dist_xt(x[:, None, :], t[:, None], x[None, :, :], t[None, :])
    sub = D[np.ix_(acc, acc)]
    assert np.all(sub[~np.eye(len(acc), dtype=bool)] >= mu * (1 - 1e-9))
    assert np.all(D[:, acc].min(axis=1) < mu)
    # greedy order: the first candidate is always accepted
    assert acc[0] == 0


def test_greedy_discrete_with_seeds_and_euclidean_metric():
    x = np.array([[0.0], [0.5], [1.0], [1.6]])
    acc = greedy_discrete(x, None, 0.55, metric="euclidean")
    assert acc.tolist() == [0, 2, 3]
    acc = greedy_discrete(x, None, 0.55, metric="euclidean", seeds=(np.array([[0.1]]), None))
    assert acc.tolist() == [2, 3]


def _union_of_balls_contains(U, px, pt, samples=4000):
    """Membership in the union of hyperbolic balls with Euclidean radius r along the axis."""
    K = U.chart
    cx, ct = K.apply_xt(px, pt)
    h = np.linspace(U.t_lo, U.t_hi, samples)
    centers_t = np.sqrt(h ** 2 - U.r_eucl ** 2)
    radii = np.arctanh(U.r_eucl / h)
    d = dist_xt(cx[:, None, :], ct[:, None], U.axis_x[None, None, :], centers_t[None, :])
    return np.any(d < radii[None, :], axis=1)


@pytest.mark.parametrize("n", [2, 3])
def test_capsule_is_union_of_hyperbolic_balls(n):
    rng = np.random.default_rng(n)
    K = cusp_chart(np.full(n - 1, 0.3), n)
    U = stretched_from_center(K, np.full(n - 1, 0.2), 1.0, 0.2, 1.6, stratum_dim=n)
    S = CoverSet("stretched", n, 0, U.initial_center, 0.2, U)
    cx = 0.2 + rng.uniform(-0.3, 0.3, size=(3000, n - 1))
    ct = rng.uniform(0.7, 2.0, size=3000)
    px, pt = K.inverse().apply_xt(cx, ct)
    a = S.contains_xt(px, pt)
    b = _union_of_balls_contains(U, px, pt)
    # the discretised union is slightly smaller; compare away from the surface
    cap_d = S.stretched.contains_xt(px, pt, margin=-2e-3) & ~S.stretched.contains_xt(px, pt, margin=2e-3)
    assert np.all(a[~cap_d] == b[~cap_d])
    assert a.sum() > 100


def test_stretched_ball_geometry():
    K = Isometry.identity(2)
    U = stretched_from_center(K, np.array([0.0]), 1.0, 0.3, 2.0)
    assert U.t_initial == pytest.approx(1.0) and U.t_end == pytest.approx(2.0)
    assert U.flow_time == pytest.approx(math.log(2.0))
    assert U.initial_radius == 0.3
    assert U.end_radius == pytest.approx(math.atanh(U.r_eucl / U.t_hi))
    c, R = U.bounding_ball()
    x, t = np.array([[0.0]]), np.array([U.t_lo - U.r_eucl * 0.999])
    assert dist_xt(x, t, c.x, c.t)[0] < R


def test_make_stretched_reaches_target():
    H = 3.0

    def signed(x, t):
        return np.log(H) - np.log(t)

    K = Isometry.identity(2)
    U = make_stretched(Point([0.1], 1.0), 0.2, K, signed, target=0.5, cap=2.0, tol=1e-12)
    assert math.log(H) - math.log(U.t_end) == pytest.approx(0.5, abs=1e-10)
    with pytest.raises(StretchError):
        make_stretched(Point([0.1], 1.0), 0.2, K, signed, target=0.5, cap=0.1)
    with pytest.raises(StretchError):
        make_stretched(Point([0.1], 2.9), 0.2, K, signed, target=0.5)


def test_comparison_ball():
    K = Isometry.identity(2)
    U = stretched_from_center(K, np.array([0.0]), 1.0, 0.3, 2.0)
    V = comparison_ball(U, 1.5)
    assert V.t_initial == pytest.approx(1.5) and V.r_eucl == U.r_eucl and V.t_hi == U.t_hi
    assert V.initial_radius == pytest.approx(math.asinh(U.r_eucl / 1.5))
    assert V.initial_radius < U.initial_radius
    W = comparison_ball(U, 0.8)
    assert W.initial_radius > U.initial_radius
    with pytest.raises(ValueError):
        comparison_ball(U, 2.5)


def _ball(p, r, n=2):
    return CoverSet("ball", n, 0, p, r)


def test_ball_intersections_exact():
    a = _ball(Point([0.0], 1.0), 0.5)
    b = _ball(Point([0.0], math.exp(0.99)), 0.5)
    c = _ball(Point([0.0], math.exp(1.01)), 0.5)
    assert intersects(a, b) and not intersects(a, c)


def test_common_point_for_random_triples():
    rng = np.random.default_rng(5)
    present = absent = 0
    for _ in range(150):
        sets = [_ball(Point([rng.uniform(-0.6, 0.6)], float(np.exp(rng.uniform(-0.4, 0.4)))),
                      float(rng.uniform(0.2, 0.6))) for _ in range(3)]
        p, st = common_point(sets, return_status=True)
        xs = rng.uniform(-1.5, 1.5, size=(20000, 1))
        ts = np.exp(rng.uniform(-1.2, 1.2, size=20000))
        inside = np.all([s.contains_xt(xs, ts) for s in sets], axis=0)
        if st == 1:
            present += 1
            assert all(s.contains_xt(p.x[None, :], np.array([p.t]))[0] for s in sets)
        elif st == 0:
            absent += 1
            assert not inside.any()
    assert present > 10 and absent > 10


def test_ellipsoid_feasibility_on_segments():
    X = np.array([[[0.0], [1.0]], [[0.0], [3.0]]])
    LO = np.array([[1.0, 1.0], [1.0, 1.0]])
    HI = np.array([[2.0, 2.0], [2.0, 2.0]])
    R = np.array([[0.6, 0.6], [0.6, 0.6]])
    st, pts, _ = ellipsoid_feasibility(X, LO, HI, R)
    assert st.tolist() == [1, 0]
    assert abs(pts[0, 0] - 0.5) < 0.1


def test_mixed_cusp_pair():
    K1 = cusp_chart(np.array([0.0]), 2)
    U1 = stretched_from_center(K1, np.array([0.0]), 1.0, 0.3, 1.5)
    a = CoverSet("stretched", 2, 0, U1.initial_center, 0.3, U1)
    b = _ball(U1.initial_center, 0.2)
    U2 = stretched_from_center(Isometry.identity(2), U1.initial_center.x, U1.initial_center.t, 0.2, 1.2)
    c = CoverSet("stretched", 2, 1, U2.initial_center, 0.2, U2)
    assert intersects(a, b) and intersects(a, c)
    p = common_point([a, b, c])
    assert p is not None
    assert all(s.contains_xt(p.x[None, :], np.array([p.t]))[0] for s in (a, b, c))
