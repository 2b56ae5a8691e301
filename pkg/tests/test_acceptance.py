"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

import oracles
from isomass import cli
from isomass.mass import (deficit, exhaust, extrapolate, lemma1_construct,
                          lemma1_inequalities, lemma2_augment, mass_ql,
                          sweep_centered)
from isomass.metrics import MetricModel
from isomass.optimize import FamilySpec, search
from isomass.quadrature import QuadratureConfig, annulus_volume, ball_volume, sphere_area
from isomass.regions import Ball, Region, measure, measure_component, validate_region

CFG = QuadratureConfig()


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}")
        assert ok, detail
    return emit


def test_criterion_1_euclidean_zero(report):
    flat = MetricModel.euclidean()
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(50):
        r = float(10 ** rng.uniform(-2, 3))
        c = (0.0, 0.0, 0.0) if i % 5 == 0 else tuple(rng.uniform(-1e3, 1e3, 3))
        worst = max(worst, abs(mass_ql(measure(flat, Region(balls=[Ball(c, r)]), CFG)).mql))
    dt = time.perf_counter() - t0
    report(1, "Euclidean zero benchmark", worst <= 1e-8 and dt < 10,
           f"max |mql| = {worst:.3e} over 50 balls in {dt:.2f} s")


@pytest.mark.parametrize("mass", [2.0, -2.0])
def test_criterion_2_centered_limit(report, mass):
    t0 = time.perf_counter()
    table = sweep_centered(MetricModel.schwarzschild(mass), [10 * 2 ** k for k in range(11)], CFG)
    est = extrapolate(table)
    dt = time.perf_counter() - t0
    report(2, f"centered sweep limit, m = {mass:+g}",
           abs(est.limit - mass) <= 1e-3 and dt < 60,
           f"limit {est.limit:.9f} (error {abs(est.limit - mass):.2e}), "
           f"residual {est.residual:.2e}, {dt:.2f} s")


def test_criterion_3_exhaustion(report):
    model = MetricModel.schwarzschild(-2.0)
    deltas = []
    for N in range(2, 7):
        trace = exhaust(model, 2.0, N, CFG)
        deltas.append(trace.delta)
    # Omega_{i+1} comes from the augmentation with eps = 1/i
    bad = [(s.index, s.achieved_mql_abs) for s in trace.steps[1:]
           if s.achieved_mql_abs > 1.0 / (s.index - 1) + 1e-6]
    nested = all(b.region.annulus > a.region.annulus and set(a.region.balls) <= set(b.region.balls)
                 for a, b in zip(trace.steps, trace.steps[1:]))
    improving = all(b < a for a, b in zip(deltas, deltas[1:]))
    ok = not bad and nested and improving and trace.delta <= 0.2 + 1e-6
    achieved = ", ".join(f"{s.achieved_mql_abs:.4f}" for s in trace.steps[1:])
    report(3, "staged exhaustion bound, m = -2, R0 = 2, N = 6", ok,
           f"{trace.statement()}; achieved |mql| {achieved}; "
           f"delta by N = {[round(d, 4) for d in deltas]}")


def test_criterion_4_far_ball(report):
    model = MetricModel.schwarzschild(-2.0)
    V, eps = 1e3, 0.5
    res = lemma1_construct(model, None, V, eps, CFG)
    cm = measure_component(model, res.ball, CFG.tightened(10))
    checks = lemma1_inequalities(cm.volume.value, cm.perimeter.value, deficit([cm]), V, eps)
    clear = validate_region(model, Region(balls=[res.ball])) is None
    report(4, "far-ball contract, m = -2, V = 1e3, eps = 0.5", all(checks) and clear,
           f"ball {res.ball.literal()}: |E| = {cm.volume.value:.6g}, "
           f"|dE| = {cm.perimeter.value:.6g}, deficit = {deficit([cm]):.3e}, {checks}")


def _k_spread(history):
    ks = [h.fitted_K for h in history if h.ball_perimeter >= 4.0 * h.omega_perimeter]
    ks = [k for k in ks if k > 0]
    return (max(ks) / min(ks), max(ks)) if len(ks) >= 2 else (1.0, max(ks, default=0.0))


def test_criterion_5_augmentation(report):
    model = MetricModel.schwarzschild(-2.0)
    trace = exhaust(model, 2.0, 6, CFG)
    extra = lemma2_augment(model, Region(annulus=10.0), 1e-3, CFG)
    histories = [s.augment_history for s in trace.steps[1:]] + [extra.history]
    unions = [s.region for s in trace.steps] + [extra.region]
    measure_component.cache_clear()
    additive = True
    for region in unions:
        mr = measure(model, region, CFG)
        v = p = 0.0
        for c in region.components():
            cm = measure_component(model, c, CFG)
            v += cm.volume.value
            p += cm.perimeter.value
        additive &= (mr.volume.value == v and mr.perimeter.value == p)
    spreads, bound_ok = [], True
    for hist in histories:
        spread, K = _k_spread(hist)
        spreads.append(spread)
        for h in hist:
            if h.ball_perimeter >= 4.0 * h.omega_perimeter:
                bound_ok &= abs(h.mql) <= h.damping_term + K / math.sqrt(h.ball_perimeter) * (1 + 1e-12)
    ok = additive and bound_ok and max(spreads) <= 2.0
    report(5, "augmented unions: additivity and damping bound", ok,
           f"bit-identical sums {additive}; K spread per augmentation "
           f"(P_E >= 4 P_Omega) {[round(s, 3) for s in spreads]}")


def test_criterion_6_isoperimetric_sign(report):
    flat = MetricModel.euclidean()
    rng = np.random.default_rng(6)
    worst, count = -math.inf, 0
    while count < 200:
        k = int(rng.integers(1, 6))
        balls = [Ball(tuple(rng.uniform(-100, 100, 3)), float(10 ** rng.uniform(-1, 1.3)))
                 for _ in range(k)]
        annulus = float(rng.uniform(1, 30)) if rng.random() < 0.3 else None
        region = Region(annulus, balls)
        if validate_region(flat, region):
            continue
        worst = max(worst, mass_ql(measure(flat, region, CFG)).mql)
        count += 1
    report(6, "Euclidean isoperimetric sign", worst <= 1e-8,
           f"max mql over 200 unions = {worst:.6e}")


ORACLE_MODELS = {
    "euclidean": MetricModel.euclidean(),
    "schwarzschild+": MetricModel.schwarzschild(2.0),
    "schwarzschild-": MetricModel.schwarzschild(-2.0),
    "conformal": MetricModel.conformal(0.5, 1.0),
    "diagonal": MetricModel.diagonal((0.3, -0.2, 0.1), 0.8),
}


@pytest.mark.parametrize("name", list(ORACLE_MODELS))
def test_criterion_7_quadrature_oracles(report, name):
    model = ORACLE_MODELS[name]
    rng = np.random.default_rng(sum(map(ord, name)))
    worst = 0.0
    for _ in range(10):
        d = float(10 ** rng.uniform(0.7, 3))
        u = rng.normal(size=3)
        c = d * u / np.linalg.norm(u)
        r = d * float(rng.uniform(0.1, 0.6))
        if model.has_core:
            r = min(r, d - model.inner_radius - 1.0)
        worst = max(worst,
                    abs(ball_volume(model, c, r, CFG).value / oracles.ball_volume_midpoint(model, c, r) - 1),
                    abs(sphere_area(model, c, r, CFG).value / oracles.sphere_area_midpoint(model, c, r) - 1))
    if model.kind == "schwarzschild":
        for R in (2.0, 30.0, 700.0):
            ref = oracles.annulus_volume_radial(model, model.inner_radius, R)
            worst = max(worst, abs(annulus_volume(model, R, CFG).value / ref - 1),
                        abs(sphere_area(model, (0, 0, 0), R, CFG).value
                            / oracles.centered_sphere_area(model, R) - 1))
    report(7, f"quadrature vs brute-force oracles, {name}", worst <= 1e-6,
           f"max relative deviation {worst:.2e}")


OPT_FAMILIES = [
    {"family": "centered_annulus", "bounds": {"R": [0.5, 1e3]}},
    {"family": "offset_ball", "bounds": {"R": [0.5, 50], "d": [0, 1e4]}},
    {"family": "annulus_plus_ball", "bounds": {"R_annulus": [1, 50], "R_ball": [1, 50], "d": [3, 1e3]}},
    {"family": "k_balls", "k": 4, "bounds": {"R": [0.5, 20], "d1": [0, 1e3], "gap": [1e-3, 100]}},
]


def test_criterion_8_optimizer(report):
    flat = MetricModel.euclidean()
    flat_best = {f["family"]: search(flat, FamilySpec.from_dict(f), 500, seed=0, cfg=CFG).best_mql
                 for f in OPT_FAMILIES}
    neg = MetricModel.schwarzschild(-2.0)
    ca = search(neg, FamilySpec.from_dict({"family": "centered_annulus",
                                           "bounds": {"R": [10, 1e4]}}), 500, seed=0, cfg=CFG)
    ob = search(neg, FamilySpec.from_dict({"family": "offset_ball",
                                           "bounds": {"R": [1, 50], "d": [10, 1e5]}}), 500, seed=0, cfg=CFG)
    ok = max(flat_best.values()) <= 1e-6 and ob.best_mql >= ca.best_mql + 0.1
    report(8, "optimizer sanity", ok,
           f"Euclidean best {max(flat_best.values()):.3e}; m = -2 offset ball "
           f"{ob.best_mql:.6g} vs centered {ca.best_mql:.6g}")


def test_criterion_9_replay(report, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"model": {"kind": "schwarzschild", "mass": -2.0}}))
    runs = [
        ["sweep", "--rmin", "10", "--rmax", "10240", "--count", "11"],
        ["exhaust", "--r0", "2", "--steps", "4"],
        ["optimize", "--family", json.dumps(OPT_FAMILIES[1]), "--budget", "40"],
        ["massql", "--region", "annulus:10+ball:100,0,0,5"],
    ]
    compared, identical = 0, True
    for i, argv in enumerate(runs):
        first, second = tmp_path / f"a{i}", tmp_path / f"b{i}"
        assert cli.main(argv[:1] + ["--config", str(config), "--out", str(first)] + argv[1:]) == 0
        assert cli.main(["replay", str(first / "manifest.json"), "--out", str(second)]) == 0
        for name in json.loads((first / "manifest.json").read_text())["outputs"]:
            if name.endswith(".csv"):
                compared += 1
                identical &= (first / name).read_bytes() == (second / name).read_bytes()
    report(9, "manifest replay", identical and compared == 4,
           f"{compared} CSV files compared, byte-identical {identical}")
