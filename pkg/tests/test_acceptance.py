"""Acceptance suite: one test per criterion, each asserting its stated tolerance.

Criteria 1-10 cover the analysis engine and run without the browser frontend;
criterion 11 (UI fidelity) lives in frontend/tests.  Each test prints a
PASS line with the measured numbers (visible with pytest -s or on failure).
"""

import dataclasses
import math
import os
import time

import numpy as np
import pytest

from flowmap.arrivals import BinCounts, RateSchedule, chi2_exponential
from flowmap.bundle import map_bytes, save_bundle
from flowmap.clustering import OUTLIER, cluster_category, dbscan
from flowmap.density import exponential_pdf, point_mass_pdf
from flowmap.flowmodel import Region, TLocationScale, fit_speed
from flowmap.geometry import PointENU
from flowmap.model import ModelBundle, WhatIfOverrides
from flowmap.proximity import (FlowDistanceModel, combine_p1, combine_p2,
                               evaluate_flow_presence_grid, build_flow_tables,
                               generate_map, inter_aircraft_pdf, p1_point, p2_point,
                               residual_pdf_first)
from flowmap.simulate import McFlowLaw, mc_presence

from helpers import adjusted_rand_index, dbscan_oracle, straight_flow

TABLE1_MEAN_GAPS = (45.0, 56.0, 57.0, 88.0, 90.0, 101.0, 105.0, 116.0, 140.0, 225.0)


def test_criterion_01_renewal_identity():
    t0 = time.perf_counter()
    f = exponential_pdf(45.0, 0.25)
    model = FlowDistanceModel(0, f, f.mean(), None)
    r = residual_pdf_first(model)
    n = min(f.size, r.size)
    sup = float(np.max(np.abs(f.density[:n] - r.density[:n])))
    assert sup < 1e-6

    d = 30.0
    pm = point_mass_pdf(d, 0.25)
    rm = residual_pdf_first(FlowDistanceModel(0, pm, pm.mean(), None))
    xs = rm.grid()
    flat = rm.density[xs <= d - 2 * rm.step]
    dev = float(np.max(np.abs(flat - 1.0 / d)))
    assert dev < 1e-6
    assert rm.density[xs > d + 2 * rm.step].max(initial=0.0) < 1e-12
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    print(f"\nPASS criterion 1: renewal identity sup-norm={sup:.2e}, "
          f"uniform dev={dev:.2e}, {elapsed:.2f}s")


def _tight_flow_45():
    rng = np.random.default_rng(2024)
    flow = straight_flow(0, (-150, 0), (150, 0), 35000.0, 0.3, 80.0, rng=rng)
    f = exponential_pdf(45.0, 0.25)
    base = FlowDistanceModel(0, f, f.mean(), None)
    return flow, FlowDistanceModel(0, f, f.mean(), residual_pdf_first(base))


def test_criterion_02_p1_analytic_vs_monte_carlo():
    t0 = time.perf_counter()
    flow, dist = _tight_flow_45()
    p = PointENU(0.0, 0.0, 35000.0)
    analytic = p1_point(p, [flow], [dist])
    assert analytic == pytest.approx(0.10516, abs=1e-3)
    law = McFlowLaw.exponential((-150.0, 0.0), (1.0, 0.0), 45.0, 0.3, 35000.0, 80.0)
    mc = mc_presence([law], p, 1_000_000, seed=77)
    diff = abs(analytic - mc.p1.estimate)
    elapsed = time.perf_counter() - t0
    assert diff <= 0.005
    assert elapsed < 30.0
    print(f"\nPASS criterion 2: analytic={analytic:.5f} mc={mc.p1.estimate:.5f} "
          f"diff={diff:.4f} (<=0.005), {elapsed:.1f}s (<30s)")


def test_criterion_03_p2_product_law_two_orthogonal_flows():
    rng = np.random.default_rng(31)
    flow_a = straight_flow(0, (-150, 0), (150, 0), 35000.0, 0.5, 100.0, rng=rng)
    flow_b = straight_flow(1, (0, -150), (0, 150), 35000.0, 0.5, 100.0, rng=rng)
    fa = exponential_pdf(45.0, 0.25)
    fb = exponential_pdf(60.0, 0.25)
    da = FlowDistanceModel(0, fa, fa.mean(), residual_pdf_first(
        FlowDistanceModel(0, fa, fa.mean(), None)))
    db = FlowDistanceModel(1, fb, fb.mean(), residual_pdf_first(
        FlowDistanceModel(1, fb, fb.mean(), None)))
    p = PointENU(0.0, 0.0, 35000.0)
    from flowmap.proximity import flow_presences
    pres = flow_presences(p, [flow_a, flow_b], [da, db])
    p2 = p2_point(p, [flow_a, flow_b], [da, db])
    product = float(pres[0] * pres[1])
    assert p2 == pytest.approx(product, abs=1e-12)

    law_a = McFlowLaw.exponential((-150.0, 0.0), (1.0, 0.0), 45.0, 0.5, 35000.0, 100.0)
    law_b = McFlowLaw.exponential((0.0, -150.0), (0.0, 1.0), 60.0, 0.5, 35000.0, 100.0)
    mc = mc_presence([law_a, law_b], p, 1_000_000, seed=78)
    diff = abs(p2 - mc.p2.estimate)
    assert diff <= 0.01
    print(f"\nPASS criterion 3: p2={p2:.6f} product={product:.6f} "
          f"mc={mc.p2.estimate:.6f} diff={diff:.4f} (<=0.01)")


def test_criterion_04_p2_enumeration_oracle():
    ps = np.array([0.1, 0.2, 0.3])
    total = 0.0
    for mask in range(8):
        bits = [(mask >> i) & 1 for i in range(3)]
        if sum(bits) >= 2:
            prob = 1.0
            for b, q in zip(bits, ps):
                prob *= q if b else 1.0 - q
            total += prob
    p2 = combine_p2(ps)
    assert total == pytest.approx(0.098, abs=1e-12)
    assert p2 == pytest.approx(total, abs=1e-12)
    print(f"\nPASS criterion 4: enumeration={total:.6f} formula={p2:.6f} (tol 1e-12)")


def _random_model(rng, n_flows=None):
    n = int(n_flows if n_flows is not None else rng.integers(1, 7))
    flows, dists = [], []
    for i in range(n):
        a = rng.uniform(-150, 150, 2)
        b = rng.uniform(-150, 150, 2)
        while np.hypot(*(b - a)) < 60:
            b = rng.uniform(-150, 150, 2)
        alt = rng.uniform(31000, 38000)
        flow = straight_flow(i, a, b, alt, rng.uniform(0.5, 5.0),
                             rng.uniform(100, 600), rng=rng)
        lam = rng.uniform(2.0, 30.0) / 3600.0
        flows.append(flow)
        dists.append(inter_aircraft_pdf(flow.speed, lam, flow_id=i))
    return flows, dists


def test_criterion_05_bound_suite_and_rate_monotonicity():
    from flowmap import kernels

    rng = np.random.default_rng(55)
    violations = 0
    for _ in range(100):
        flows, dists = _random_model(rng)
        tables = [build_flow_tables(f, d) for f, d in zip(flows, dists)]
        xs = rng.uniform(-160, 160, 1000)
        ys = rng.uniform(-160, 160, 1000)
        zs = np.array([rng.uniform(30000, 39000)])
        pres = []
        for t in tables:
            out = np.ones((xs.size, zs.size))
            kernels.flow_presence(xs, ys, zs, t, 2.5, 1000.0, out)
            pres.append(1.0 - out)
        stack = np.stack([p[:, 0] for p in pres])
        one_minus = 1.0 - stack
        p1 = 1.0 - np.prod(one_minus, axis=0)
        single = np.zeros_like(p1)
        for i in range(len(stack)):
            prod = np.ones_like(p1)
            for j in range(len(stack)):
                if j != i:
                    prod *= one_minus[j]
            single += stack[i] * prod
        p2 = p1 - single
        bad = np.sum((p2 < -1e-12) | (p2 > p1 + 1e-12) | (p1 > 1.0 + 1e-12))
        violations += int(bad)
    assert violations == 0

    # rate doubling never decreases any presence cell
    flows, dists = _random_model(rng, n_flows=4)
    doubled = [inter_aircraft_pdf(f.speed, 2.0 * 450.0 / 3600.0 / d.mean_inter_distance,
                                  flow_id=f.id)
               for f, d in zip(flows, dists)]
    xs = np.linspace(-160, 160, 40)
    ys = np.linspace(-160, 160, 40)
    zs = np.array([33000.0, 35000.0])
    base = evaluate_flow_presence_grid([build_flow_tables(f, d)
                                        for f, d in zip(flows, dists)],
                                       xs, ys, zs, 2.5, 1000.0)
    more = evaluate_flow_presence_grid([build_flow_tables(f, d)
                                        for f, d in zip(flows, doubled)],
                                       xs, ys, zs, 2.5, 1000.0)
    p1_base = 1.0 - np.prod([1.0 - p for p in base], axis=0)
    p1_more = 1.0 - np.prod([1.0 - p for p in more], axis=0)
    decreases = int(np.sum(p1_more < p1_base - 1e-12))
    assert decreases == 0
    print(f"\nPASS criterion 5: 0 bound violations over 100 models x 1000 points; "
          f"0 rate-doubling decreases")


def test_criterion_06_chi2_calibration():
    t0 = time.perf_counter()
    rng = np.random.default_rng(66)
    lam = 1.0 / 30.0
    rejects = 0
    for _ in range(500):
        x = rng.exponential(1.0 / lam, 2000)
        rejects += int(chi2_exponential(x, lam, bin_width=2.0, alpha=0.05).reject)
    rate = rejects / 500
    assert 0.02 <= rate <= 0.08

    uniform_rejects = 0
    for _ in range(200):
        x = rng.uniform(0.0, 2.0 / lam, 2000)
        uniform_rejects += int(chi2_exponential(x, lam, bin_width=2.0, alpha=0.05).reject)
    impostor = uniform_rejects / 200
    assert impostor >= 0.95
    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    print(f"\nPASS criterion 6: exponential reject rate={rate:.3f} (in [0.02, 0.08]); "
          f"uniform impostor rejected {impostor:.2%}, {elapsed:.1f}s (<60s)")


def test_criterion_07_speed_fit_recovery():
    ok = 0
    results = []
    for seed in range(20):
        rng = np.random.default_rng(700 + seed)
        x = 450.0 + 15.0 * rng.standard_t(5.0, size=5000)
        fit = fit_speed(x)
        good = (abs(fit.mu - 450.0) <= 1.0 and abs(fit.sigma - 15.0) <= 1.5
                and 3.5 <= fit.nu <= 7.0)
        ok += int(good)
        results.append((round(fit.mu, 2), round(fit.sigma, 2), round(fit.nu, 2)))
    assert ok >= 18
    print(f"\nPASS criterion 7: {ok}/20 trials recovered (mu 450+-1, sigma 15+-1.5, "
          f"nu in [3.5, 7])")


def test_criterion_08_clustering_recovery_and_dbscan_oracle():
    # 3-flow corpus: 120 flights + 10% outliers, single category
    from flowmap.ingest import ResampledTrajectory

    def member(fid, a, b, off, alt):
        a, b = np.asarray(a, float), np.asarray(b, float)
        d = b - a
        nvec = np.array([-d[1], d[0]]) / np.linalg.norm(d)
        t = np.linspace(0, 1, 8)
        pts = np.column_stack([a[0] + t * d[0] + off * nvec[0],
                               a[1] + t * d[1] + off * nvec[1],
                               np.full(8, alt)])
        return ResampledTrajectory(fid, pts, 0.0, 3600.0, np.full(7, 450.0))

    rng = np.random.default_rng(88)
    trajs, truth = [], []
    lanes = [((-150, 30), (150, 30)), ((30, -150), (30, 150)), ((-150, -120), (150, 120))]
    for fi, (a, b) in enumerate(lanes):
        for m in range(40):
            trajs.append(member(f"T{fi}-{m}", a, b, rng.normal(0, 2.0),
                                35000.0 + rng.normal(0, 200.0)))
            truth.append(fi)
    for i in range(12):
        a = rng.uniform(-150, 150, 2)
        b = rng.uniform(-150, 150, 2)
        while np.hypot(*(b - a)) < 60:
            b = rng.uniform(-150, 150, 2)
        trajs.append(member(f"OUT-{i}", a, b, 0.0, 35000.0 + rng.normal(0, 200.0)))
        truth.append(OUTLIER)
    truth = np.array(truth)
    labels = cluster_category(trajs)
    ari = adjusted_rand_index(truth, labels)
    recall = float(np.mean(labels[truth == OUTLIER] == OUTLIER))
    assert ari >= 0.95
    assert recall >= 0.9

    # DBSCAN label-for-label against the O(n^2) oracle on 500 points
    pts = np.vstack([
        rng.normal((0, 0), 0.5, (160, 2)),
        rng.normal((7, 2), 0.5, (160, 2)),
        rng.normal((3, 8), 0.5, (130, 2)),
        rng.uniform(-4, 11, (50, 2)),
    ])
    ours = dbscan(pts, eps=0.8, min_pts=8)
    oracle = dbscan_oracle(pts, eps=0.8, min_pts=8)
    assert np.array_equal(ours, oracle)
    print(f"\nPASS criterion 8: ARI={ari:.3f} (>=0.95), outlier recall={recall:.2f} "
          f"(>=0.9), DBSCAN == oracle on 500 points")


def test_criterion_09_pipeline_determinism(tmp_path):
    from flowmap.pipeline import PipelineConfig, run_pipeline
    from flowmap.simulate import FlowSpec, OutlierSpec, ScenarioSpec, generate_scenario

    spec = ScenarioSpec(
        origin_lat=41.0, origin_lon=-82.0,
        flows=(
            FlowSpec("EW", ((-150.0, 30.0, 35000.0), (150.0, 30.0, 35000.0)),
                     2.0, 200.0, TLocationScale(455.0, 12.0, 6.0), 2.5),
            FlowSpec("NS", ((20.0, -150.0, 35000.0), (20.0, 150.0, 35000.0)),
                     2.5, 200.0, TLocationScale(445.0, 15.0, 5.0), 2.0),
        ),
        outliers=OutlierSpec(0.6, Region(-160, 160, -160, 160, 29000, 39000)),
        duration_days=1,
    )
    config = PipelineConfig(origin_lat=41.0, origin_lon=-82.0,
                            region=Region(-160, 160, -160, 160, 29000, 39000))
    path_a = tmp_path / "a.csv"
    path_b = tmp_path / "b.csv"
    generate_scenario(spec, 909, path_a)
    generate_scenario(spec, 909, path_b)
    assert path_a.read_bytes() == path_b.read_bytes()

    bundles = []
    bundle_files = []
    for i, path in enumerate((path_a, path_b)):
        bundle = run_pipeline(config, path).bundle
        out = tmp_path / f"bundle{i}.json"
        save_bundle(bundle, out)
        bundles.append(bundle)
        bundle_files.append(out.read_bytes())
    assert bundle_files[0] == bundle_files[1]

    maps = []
    for bundle in bundles:
        grid = generate_map(bundle, region=Region(-160, 160, -160, 160, 34000, 36000),
                            steps=(2.0, 2.0, 1000.0), kind="presence", time_bin=(0, 4))
        maps.append(map_bytes(grid, model_hash="x"))
    assert maps[0] == maps[1]
    print("\nPASS criterion 9: bundle and map files byte-identical across reruns")


def _performance_bundle():
    import dataclasses as dc
    rng = np.random.default_rng(101)
    flows = []
    schedule = RateSchedule(900.0, 12905, 1, {0: 1})
    per_flow = {}
    for i, mean_gap in enumerate(TABLE1_MEAN_GAPS):
        a = rng.uniform(-180, 180, 2)
        b = rng.uniform(-180, 180, 2)
        while np.hypot(*(b - a)) < 150:
            b = rng.uniform(-180, 180, 2)
        alt = 31000.0 + 1000.0 * (i % 5)
        # identical window densities across flows keep on-centroid presence
        # comparable, so only the mean gap differentiates the maxima
        flow = straight_flow(i, a, b, alt, 2.0, 250.0,
                             rng=np.random.default_rng(4242))
        flows.append(flow)
        per_flow[i] = 10
    total = sum(per_flow.values())
    schedule.bins["0-0"] = BinCounts(total=total, per_flow=per_flow)
    out_flows = []
    for i, (flow, mean_gap) in enumerate(zip(flows, TABLE1_MEAN_GAPS)):
        # choose the share so that lambda_i yields the Table-style mean gap
        lam_needed = flow.speed.mu / 3600.0 / mean_gap
        lam_bin = total / 900.0
        out_flows.append(dc.replace(flow, rate_share={"0-0": lam_needed / lam_bin}))
    region = Region(-200.0, 200.0, -200.0, 200.0, 31000.0, 35000.0)
    return ModelBundle(out_flows, schedule, None, region, 41.0, -82.0)


def test_criterion_10_map_performance():
    bundle = _performance_bundle()
    region = Region(-200.0, 200.0, -200.0, 200.0, 31000.0, 35000.0)
    t0 = time.perf_counter()
    single = generate_map(bundle, region=region, steps=(1.0, 1.0, 1000.0),
                          kind="presence", time_bin=(0, 0), workers=1)
    t_single = time.perf_counter() - t0
    workers = min(os.cpu_count() or 4, 8)
    t0 = time.perf_counter()
    multi = generate_map(bundle, region=region, steps=(1.0, 1.0, 1000.0),
                         kind="presence", time_bin=(0, 0), workers=workers)
    t_multi = time.perf_counter() - t0
    assert single.values.shape == (401, 401, 5)
    assert np.array_equal(single.values, multi.values)
    assert single.values.max() > 0
    assert t_single < 60.0
    assert t_multi < 15.0
    print(f"\nPASS criterion 10: 401x401x5 lattice, 10 flows: single={t_single:.2f}s "
          f"(<60s), parallel[{workers}]={t_multi:.2f}s (<15s), bit-identical")


def test_table1_style_maxima_order_with_mean_gap():
    # companion check: on-centroid presence decreases as the mean gap grows
    bundle = _performance_bundle()
    values = []
    for flow, mean_gap in zip(bundle.flows, TABLE1_MEAN_GAPS):
        lam = bundle.flow_rate_per_s(flow, 0, 0)
        dist = inter_aircraft_pdf(flow.speed, lam, flow_id=flow.id)
        assert dist.mean_inter_distance == pytest.approx(mean_gap, rel=0.01)
        mid = 0.5 * (flow.track[3] + flow.track[4])
        p = p1_point(PointENU(float(mid[0]), float(mid[1]), float(mid[2])),
                     [flow], [dist])
        values.append(p)
    assert all(a > b for a, b in zip(values, values[1:]))
