"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines.
"""

import json
import math
import random
import time

import numpy as np

from oracles import (
    free_ball_sizes,
    geodesic_length,
    ref_Dprime,
    ref_euclid_bound,
    ref_hyp_bound,
    ref_kappa,
    ref_L,
    ref_lower,
    ref_R,
    ref_S,
)
from qihyp import cli
from qihyp.freewords import (
    comm_count,
    gen_comm_level,
    level_stats,
    reconstruct,
    reduce,
    verify_injectivity,
)
from qihyp.grouplab import (
    GroupSpec,
    MetricConfig,
    ball_enumerate,
    build_free_pair,
    commutator_tower_growth,
    discreteness_verdict,
    semilocal_growth,
    zassenhaus_check,
)
from qihyp.hyp2 import HPoint, IdealTriple, MoebiusElement, apply, distance, triple_apply, triple_to_point
from qihyp.packing import EUCLIDEAN, HYPERBOLIC, PackingConfig, euclid_packing_bound, greedy_pack, hyp_packing_bound
from qihyp.product_qi import (
    ProductPoint,
    QIParams,
    S_constant,
    SampledMap,
    VacuousBound,
    L_of_R,
    R_of_L,
    horizontal_lower_bound,
    mainprop_bound,
    mainprop_constant,
    projected_qi_params,
    projected_separation,
    quasiaction_kappa,
    verify_qi,
)

SANOV = GroupSpec.create([("a", [[1, 2], [0, 1]]), ("b", [[1, 0], [2, 1]])])
DIAG = GroupSpec.create([("h", [[2, 0], [0, 0.5]])])
ALPHA = MoebiusElement.rotation(HPoint(0, 1), 1.0)
H = MoebiusElement(2, 0, 0, 0.5)


def report(k, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}")
    assert ok, detail


def rel_close(x, y, tol=1e-12):
    return abs(x - y) <= tol * max(1.0, abs(x), abs(y))


def test_criterion_1_packing_bounds():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    configs, violations, hyp_checked = 60, [], 0
    for seed in range(configs):
        R, r, s = rng.uniform(1, 6), rng.uniform(0.2, 1), rng.uniform(0, 1)
        e = greedy_pack(PackingConfig(R, r, s, EUCLIDEAN), seed)
        if e.count > euclid_packing_bound(R, r, s):
            violations.append(("euclidean", R, r, s, e.count))
        h = greedy_pack(PackingConfig(R, r, s, HYPERBOLIC), seed)
        bound = hyp_packing_bound(R, r, s)
        if bound >= 1:
            hyp_checked += 1
            if not h.maximal or h.count < bound:
                violations.append(("hyperbolic", R, r, s, h.count))
    elapsed = time.perf_counter() - start
    report(1, not violations and elapsed < 60,
           f"{configs} configs, {hyp_checked} with hyperbolic bound >= 1, "
           f"{len(violations)} violations, {elapsed:.1f} s")


def test_criterion_2_commutator_counts():
    start = time.perf_counter()
    counts = [len(gen_comm_level(i)) for i in range(4)]
    problems = []
    if counts != [4, 8, 48, 2208] or counts != [comm_count(i) for i in range(4)]:
        problems.append(f"counts {counts}")
    for i in range(4):
        if not verify_injectivity(i) or level_stats(i)["distinct_reduced"] != counts[i]:
            problems.append(f"injectivity at level {i}")
        if counts[i] < 2 ** (2**i) or (i >= 1 and counts[i] < 2 ** (2**i + 1)):
            problems.append(f"floor at level {i}")
    for i in range(3):
        if any(reconstruct(reduce(w)) != (i, w) for w in gen_comm_level(i)):
            problems.append(f"reconstruct at level {i}")
    sample = random.Random(3).sample(gen_comm_level(3).words, 500)
    if any(reconstruct(reduce(w)) != (3, w) for w in sample):
        problems.append("reconstruct at level 3")
    elapsed = time.perf_counter() - start
    report(2, not problems and elapsed < 120,
           f"counts {counts}, problems {problems or 'none'}, {elapsed:.1f} s")


def test_criterion_3_growth_dichotomy():
    start = time.perf_counter()
    cfg = MetricConfig(0.01)
    discrete = []
    for name, spec in (("sanov", SANOV), ("diag", DIAG)):
        v = discreteness_verdict(spec, 10, cfg)
        ones = semilocal_growth(spec, 10, cfg).column("semilocal") == [1] * 11
        discrete.append(ones and v.kind == "DiscreteLikely" and (v.A, v.B) == (0.0, 1.0))
    cert = build_free_pair(ALPHA, H, 0.05, 8)
    tower = commutator_tower_growth(cert, 2)
    tower_counts = [row.images_in_n for row in tower.rows]
    tower_ok = cert.eigenvector_pairing_ok and all(
        row.images_in_n >= 2 ** (2**row.i) for row in tower.rows
    )
    pair = GroupSpec.create([("alpha", cert.a), ("beta", cert.b)])
    v = discreteness_verdict(pair, 16, MetricConfig(cert.epsilon0, dedupe_quantum=1e-10), sample_ns=[1, 4, 16])
    nondiscrete = v.kind == "NonDiscreteLikely" and v.floor_hits == [1, 4, 16]
    elapsed = time.perf_counter() - start
    report(3, all(discrete) and tower_ok and nondiscrete and elapsed < 600,
           f"discrete cases {discrete}, tower counts {tower_counts} vs floors [2, 4, 16], "
           f"free pair verdict {v.kind} with floor hits {v.floor_hits}, {elapsed:.1f} s")


def test_criterion_4_ball_oracle():
    ball = ball_enumerate(SANOV, 8, MetricConfig(0.01))
    sizes = [ball.size(n) for n in range(9)]
    closed = [2 * 3**n - 1 for n in range(9)]
    report(4, sizes == closed == free_ball_sizes(8), f"ball sizes {sizes}")


def random_point(rng):
    return HPoint(rng.uniform(-5, 5), math.exp(rng.uniform(math.log(0.1), math.log(10))))


def random_moebius(rng):
    while True:
        m = rng.normal(size=(2, 2))
        if np.linalg.det(m) > 0.1:
            return MoebiusElement.from_matrix(m)


def test_criterion_5_geometry_oracles():
    rng = np.random.default_rng(5)
    dist_err = max(abs(distance(p, q) - geodesic_length(p, q))
                   for p, q in ((random_point(rng), random_point(rng)) for _ in range(100)))
    eq_err = 0.0
    for _ in range(100):
        m = random_moebius(rng)
        vals = rng.uniform(-5, 5, size=3).tolist()
        if rng.random() < 0.25:
            vals[rng.integers(3)] = math.inf
        t = IdealTriple(*vals)
        eq_err = max(eq_err, distance(triple_to_point(triple_apply(m, t)), apply(m, triple_to_point(t))))
    base = triple_to_point(IdealTriple(-1, 1, math.inf))
    exact = (base.x, base.y) == (0.0, 1.0)
    report(5, dist_err <= 1e-6 and eq_err <= 1e-8 and exact,
           f"distance vs integration {dist_err:.2e}, equivariance {eq_err:.2e}, base point exact {exact}")


def test_criterion_6_constant_double_entry():
    rng = np.random.default_rng(6)
    mismatches = []

    def check(name, got, want):
        if not rel_close(got, want):
            mismatches.append((name, got, want))

    for _ in range(100):
        lam, eps, delta = rng.uniform(1, 4), rng.uniform(0, 2), rng.uniform(0, 2)
        a = rng.uniform(0.1, 3)
        p = QIParams(lam, eps, delta, None if rng.random() < 0.5 else rng.uniform(0, 5), a)
        R, r, s = rng.uniform(1, 6), rng.uniform(0.2, 1), rng.uniform(0, 1)
        rr, h0, L, D = rng.uniform(0, 3), rng.uniform(0, 5), rng.uniform(0, 200), rng.uniform(1, 1e4)
        check("euclid bound", euclid_packing_bound(R, r, s), ref_euclid_bound(R, r, s))
        check("hyp bound", hyp_packing_bound(R, r, s), ref_hyp_bound(R, r, s))
        check("kappa", quasiaction_kappa(lam, eps, delta), ref_kappa(lam, eps, delta))
        check("S", S_constant(lam, eps, rr), ref_S(lam, eps, rr))
        check("c h0 + c", mainprop_bound(mainprop_constant(p, rr), h0), a * ref_S(lam, eps, rr) * (h0 + 1))
        check("R(L)", R_of_L(L, lam, eps, h0), ref_R(L, lam, eps, h0))
        check("L(R)", L_of_R(L, lam, eps, h0), ref_L(L, lam, eps, h0))
        check("L(R(L))", L_of_R(R_of_L(L, lam, eps, h0), lam, eps, h0), L)
        lb = horizontal_lower_bound(D, p)
        if isinstance(lb, VacuousBound):
            if (D - lam * eps) / (lam * a * (2 * (p.kappa + delta) + 1)) > 1:
                mismatches.append(("lower bound vacuous", D, lam))
        else:
            check("lower bound", lb, ref_lower(D, lam, eps, delta, p.kappa, a))
        Dp = ref_Dprime(lam, eps, delta, p.kappa, a)
        check("D'", projected_separation(p), Dp)
        lam_p, eps_p = projected_qi_params(p)
        check("lambda'", lam_p, max(lam, Dp))
        check("epsilon'", eps_p, max(eps, 1.0))

    unit = QIParams(1, 0, 0, a=1)
    tagged = [
        ("euclid (3, 1, 0.5)", euclid_packing_bound(3, 1, 0.5), 5.444, 1e-3),
        ("hyp (5, 1, 0.5)", hyp_packing_bound(5, 1, 0.5), 8.073, 1e-3),
        ("kappa (2, 0.5, 1)", quasiaction_kappa(2, 0.5, 1), 2.5, 0.0),
        ("S (1, 0, 1)", S_constant(1, 0, 1), 18.1353, 1e-4),
        ("S (1, 0, 0)", S_constant(1, 0, 0), 1.0862, 1e-4),
        ("c h0 + c (5, 2)", mainprop_bound(5, 2), 15.0, 0.0),
        ("R (26, 2, 1, 3)", R_of_L(26, 2, 1, 3), 1.75, 1e-15),
        ("lower bound at e + 1", horizontal_lower_bound(math.e + 1, unit), 1.0, 1e-12),
        ("D' unit", projected_separation(unit), 3.7183, 1e-4),
        ("lambda' unit", projected_qi_params(unit)[0], 3.7183, 1e-4),
        ("epsilon' unit", projected_qi_params(unit)[1], 1.0, 0.0),
    ]
    for name, got, want, tol in tagged:
        if abs(got - want) > tol:
            mismatches.append((name, got, want))
    report(6, not mismatches,
           f"100 draws x 12 formulas and {len(tagged)} tagged examples, mismatches {mismatches or 'none'}")


def test_criterion_7_qi_discrimination():
    rng = np.random.default_rng(7)
    pts = [ProductPoint.of(rng.uniform(-2, 2), rng.uniform(0.3, 3), rng.uniform(-3, 3)) for _ in range(48)]
    pts += [ProductPoint.of(0, 1, 0), ProductPoint.of(0, 1, 4)]
    g = MoebiusElement(2.0, 1.0, 1.0, 1.0)
    isometry = SampledMap.from_function(lambda p: ProductPoint(apply(g, p.base), p.height + 1.7), pts)
    stretch = SampledMap.from_function(lambda p: ProductPoint(p.base, 2 * p.height), pts)
    iso_ok = verify_qi(isometry, 1, 0).passed
    pass_2 = verify_qi(stretch, 2, 0).passed
    fail_15 = not verify_qi(stretch, 1.5, 0).passed
    report(7, iso_ok and pass_2 and fail_15,
           f"isometry at (1, 0) passes {iso_ok}, stretch at (2, 0) passes {pass_2}, "
           f"stretch at (1.5, 0) fails {fail_15}")


def test_criterion_8_zassenhaus():
    rep = zassenhaus_check(0.05, 1000, seed=0)
    report(8, rep.passed and rep.samples == 1000 and rep.max_displacement < 0.05,
           f"{rep.samples} pairs, max commutator displacement {rep.max_displacement:.3e} < 0.05")


def test_criterion_9_cli_determinism(tmp_path):
    sanov = {"generators": [{"label": "a", "matrix": [[1, 2], [0, 1]]},
                            {"label": "b", "matrix": [[1, 0], [2, 1]]}]}
    pair = {"generators": [{"label": "r", "matrix": ALPHA.matrix().tolist()},
                           {"label": "h", "matrix": H.matrix().tolist()}]}
    runs = {
        "packing": ({"R": [1.5, 3, 5], "r": 0.5, "s": [0, 0.25]}, ["--seed", "11"]),
        "growth": ({"group": sanov, "epsilon": 0.01, "nMax": 6, "variant": "CarriereLocal"}, []),
        "freepair": ({"group": pair, "epsilon0": 0.05, "maxCheckedLength": 8}, []),
        "constants": ({"lambda": 2, "epsilon": 0.5, "delta": 1, "a": 1, "r": 1, "h0": 2, "L": 26, "D": 500}, []),
        "words": ({"iMax": 3}, []),
    }
    results = {}
    for sub, (params, extra) in runs.items():
        cfg = tmp_path / f"{sub}.json"
        cfg.write_text(json.dumps(params))
        outs = []
        for k in range(2):
            out = tmp_path / f"{sub}.{k}"
            code = cli.main([sub, "--config", str(cfg), "--out", str(out), *extra])
            outs.append((code, out.read_bytes()))
        results[sub] = outs[0] == outs[1] and outs[0][0] == 0
    report(9, all(results.values()), f"byte-identical reruns {results}")
