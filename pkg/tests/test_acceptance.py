"""Acceptance criteria 1-9.

Each test prints one ``criterion k: PASS|FAIL`` line (shown even when pytest
captures output) and then asserts.  Run directly with
``python3 -m pytest tests/test_acceptance.py -v``.
"""

import math
import time

import numpy as np
import pytest

from orbithick.build import ResourceLimitError
from orbithick.checks import (
    cap_oracle,
    coverage_check,
    flow_stability_check,
    monotonicity_check,
    same_horosphere_check,
    stretch_checks,
)
from orbithick.cover import flow_time_cap
from orbithick.groups import abelianization
from orbithick.homology import homology, smith_normal_form
from orbithick.hyperbolic import (
    Point,
    dist_artanh,
    dist_xt,
    euclidean_ball_to_hyperbolic,
    hyperbolic_ball_to_euclidean,
    lorentz_inner,
    to_hyperboloid,
)
from orbithick.pipeline import Pipeline, RunConfig, builtin_config
from test_homology import _invariant_factors_by_minors
from triangulations import klein_bottle, projective_plane, sphere, torus

SAMPLES = 10_000
TOL = 1e-9


def report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


def _run(name, out_dir):
    start = time.perf_counter()
    pipe = Pipeline(RunConfig.load(builtin_config(name)))
    pipe.run("certify")
    pipe.write(out_dir)
    return pipe, time.perf_counter() - start


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """End-to-end runs of the bundled configs that fit the desk budget."""
    out = {}
    for name in ("psl2z", "gamma2"):
        d = tmp_path_factory.mktemp(name)
        pipe, sec = _run(name, d)
        out[name] = (pipe, sec, d)
    return out


# ---------------------------------------------------------------------------


def test_criterion_1_geometry(capsys):
    rng = np.random.default_rng(11)
    start = time.perf_counter()
    n = 3

    def pts(m):
        return rng.uniform(-3, 3, size=(m, n - 1)), np.exp(rng.uniform(-2, 2, size=m))

    # cross-consistency: sinh, arccosh (hyperboloid) and artanh forms
    x1, t1 = pts(SAMPLES)
    x2, t2 = pts(SAMPLES)
    d = dist_xt(x1, t1, x2, t2)
    X, Y = to_hyperboloid(x1, t1), to_hyperboloid(x2, t2)
    d_cosh = np.arccosh(np.maximum(1.0, -lorentz_inner(X, Y)))
    d_tanh = np.array([dist_artanh(Point(x1[i], t1[i]), Point(x2[i], t2[i])) for i in range(SAMPLES)])
    # arccosh loses accuracy near 0; compare it where it is well conditioned
    far = d > 1e-3
    err_cross = max(float(np.max(np.abs(d - d_tanh))), float(np.max(np.abs(d - d_cosh)[far])))

    # triangle inequality
    x3, t3 = pts(SAMPLES)
    slack = dist_xt(x1, t1, x2, t2) + dist_xt(x2, t2, x3, t3) - dist_xt(x1, t1, x3, t3)
    tri_bad = int(np.sum(slack < -TOL))

    # ball identity: centre t cosh(rho), radius t sinh(rho)
    rho = rng.uniform(0.01, 3.0, size=SAMPLES)
    err_ball = 0.0
    u = rng.normal(size=(SAMPLES, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    cs, rs = [], []
    for i in range(SAMPLES):
        c, r = hyperbolic_ball_to_euclidean(Point(x1[i], t1[i]), rho[i])
        err_ball = max(err_ball, abs(c[-1] - t1[i] * math.cosh(rho[i])), abs(r - t1[i] * math.sinh(rho[i])))
        cs.append(c)
        rs.append(r)
    cs, rs = np.array(cs), np.array(rs)
    q = cs + rs[:, None] * u
    err_ball = max(err_ball, float(np.max(np.abs(dist_xt(q[:, :-1], q[:, -1], x1, t1) - rho))))
    for i in range(0, SAMPLES, 10):
        p, r = euclidean_ball_to_hyperbolic(cs[i], rs[i])
        err_ball = max(err_ball, float(dist_xt(p.x, p.t, x1[i], t1[i])), abs(r - rho[i]))
    sec = time.perf_counter() - start
    ok = err_cross <= TOL and tri_bad == 0 and err_ball <= TOL and sec < 10
    report(capsys, 1, ok, f"cross {err_cross:.2e}, triangle violations {tri_bad}, ball {err_ball:.2e}, {sec:.1f}s")
    assert ok


def test_criterion_2_same_horosphere(capsys):
    res = same_horosphere_check(trials=SAMPLES, seed=0)
    ok = res["passed"] and res["pairs"] == SAMPLES and res["violations"] == 0
    report(capsys, 2, ok, f"{res['pairs']} pairs, {res['violations']} violations, max ratio {res['max_ratio']:.3f}")
    assert ok


def test_criterion_3_monotonicity(capsys, runs):
    pipe = runs["psl2z"][0]
    res = monotonicity_check(pipe.cover_result, pipe.table)
    ok = res["passed"] and res["monotonicity_violations"] == 0 and res["transfer_violations"] == 0
    # only the top stratum reaches the shell, so all stretched radii are equal and
    # the radius-ordered pairs can be empty; the count is printed as is
    report(capsys, 3, ok, f"PSL(2,Z): monotonicity {res['monotonicity_pairs']} pairs, "
                          f"transfer {res['transfer_pairs']} pairs, "
                          f"violations {res['monotonicity_violations']}+{res['transfer_violations']}")
    assert ok


def test_criterion_4_coverage_and_flow(capsys, runs):
    parts, ok = [], True
    for name in ("psl2z", "gamma2"):
        pipe = runs[name][0]
        cov = coverage_check(pipe.cover_result, pipe.table, samples=SAMPLES, seed=4)
        res = pipe.cover_result
        flow = flow_stability_check(res, pipe.table, trajectories=200, seed=4, step=res.cascade.of(res.n) / 4)
        ok &= cov["passed"] and cov["samples"] == SAMPLES and flow["passed"] and flow["trajectories"] == 200
        parts.append(f"{name}: uncovered {cov['uncovered']}/{cov['samples']}, "
                     f"exits {flow['exits_after_entry']}/{flow['trajectories']}")
    report(capsys, 4, ok, "; ".join(parts))
    assert ok


def test_criterion_5_stretching(capsys, runs):
    parts, ok = [], True
    for name in ("psl2z", "gamma2"):
        res = runs[name][0].cover_result
        st = stretch_checks(res, samples_per_set=256, seed=5)
        eps = res.levels.eps_n
        R = math.log(math.sinh(eps / 2) / math.sinh(eps / 4)) + res.cascade.mu_minus1
        formula = abs(flow_time_cap(eps) - cap_oracle(eps)) <= TOL and abs(st["R"] - R) <= TOL
        ok &= st["passed"] and st["stretched"] > 0 and formula
        parts.append(f"{name}: {st['stretched']} stretched, outside M+ {st['outside_thick']}, "
                     f"outside B_R {st['outside_ball']}, cap error {st['cap_error']:.1e}")
    report(capsys, 5, ok, "; ".join(parts))
    assert ok


def test_criterion_6_homology(capsys):
    start = time.perf_counter()
    s2, t2, rp2, kb = (homology(c) for c in (sphere(), torus(), projective_plane(), klein_bottle()))
    surf = (s2.betti_Q == [1, 0, 1] and t2.betti_Q == [1, 2, 1]
            and rp2.torsion_factors[1] == [2] and rp2.betti_Fp[2][1] == 1 and rp2.betti_Q[1] == 0
            and kb.betti_Q[1] == 1 and kb.torsion_factors[1] == [2])
    sec = time.perf_counter() - start
    rng = np.random.default_rng(6)
    snf_bad = 0
    for _ in range(1000):
        m, n = rng.integers(1, 7, size=2)
        A = rng.integers(-9, 10, size=(m, n))
        if smith_normal_form(A.tolist())[0] != _invariant_factors_by_minors(A):
            snf_bad += 1
    ok = surf and sec < 5 and snf_bad == 0
    report(capsys, 6, ok, f"surfaces {'ok' if surf else 'wrong'} in {sec:.2f}s, SNF mismatches {snf_bad}/1000")
    assert ok


def _bounds_hold(pipe):
    c = pipe.artifacts["certify"]["certificate"]
    n, D, C = c["n"], c["D_hat"], c["C_hat"]
    E = (D ** (n - 1) + D ** n + 1) * C
    F = D ** n * math.log(n + 2) * C
    return (math.isclose(E, c["E_hat"], rel_tol=1e-12) and math.isclose(F, c["F_hat"], rel_tol=1e-12)
            and all(c["betti_pass"]) and all(c["torsion_pass"]))


def test_criterion_7_end_to_end(capsys, runs):
    parts, ok = [], True
    total = 0.0
    psl, sec = runs["psl2z"][:2]
    total += sec
    h = psl.hom
    good = h.betti_Q[0] == 1 and all(b == 0 for b in h.betti_Q[1:]) and all(not f for f in h.torsion_factors)
    good &= _bounds_hold(psl) and all(psl.artifacts["certify"]["checks"].values())
    ok &= good
    parts.append(f"PSL(2,Z) b={h.betti_Q} {'ok' if good else 'wrong'} ({sec:.0f}s)")

    g2, sec = runs["gamma2"][:2]
    total += sec
    good = g2.hom.betti_Q[1] == 2 and _bounds_hold(g2) and all(g2.artifacts["certify"]["checks"].values())
    ok &= good
    parts.append(f"Gamma(2) b1={g2.hom.betti_Q[1]} {'ok' if good else 'wrong'} ({sec:.0f}s)")

    start = time.perf_counter()
    fig = Pipeline(RunConfig.load(builtin_config("figure_eight")))
    try:
        fig.run("certify")
        b1 = fig.hom.betti_Q[1]
        good = b1 == 1 == abelianization(fig.spec)[0] and _bounds_hold(fig)
        parts.append(f"figure-eight b1={b1} {'ok' if good else 'wrong'}")
    except ResourceLimitError as exc:
        # the cover needed for a 3-dimensional good cover is beyond the desk budget
        good = False
        parts.append(f"figure-eight not computed ({exc}); abelianization rank "
                     f"{fig.artifacts['analyze']['abelianization']['rank']}")
    total += time.perf_counter() - start
    ok &= good and total < 600
    report(capsys, 7, ok, "; ".join(parts) + f"; total {total:.0f}s")
    assert ok


def test_criterion_8_degree_bound(capsys, runs):
    parts, ok = [], True
    for name in ("psl2z", "gamma2"):
        art = runs[name][0].artifacts["nerve"]
        good = art["max_degree"] <= art["degree_bound"]["bound"]
        ok &= good
        parts.append(f"{name}: max degree {art['max_degree']} <= {art['degree_bound']['bound']}")
    report(capsys, 8, ok, "; ".join(parts))
    assert ok


def test_criterion_9_determinism(capsys, runs, tmp_path):
    parts, ok = [], True
    for name in ("psl2z", "gamma2"):
        first = runs[name][2]
        second = tmp_path / name
        _run(name, second)
        same = all((first / f"{s}.json").read_bytes() == (second / f"{s}.json").read_bytes()
                   for s in ("cover", "nerve", "certify"))
        ok &= same
        parts.append(f"{name}: {'identical' if same else 'DIFFERENT'}")
    report(capsys, 9, ok, "cover, nerve and certificate files " + "; ".join(parts))
    assert ok
