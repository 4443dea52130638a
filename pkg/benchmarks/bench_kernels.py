#!/usr/bin/env python3
"""Benchmark the compiled presence kernel against the pure-numpy fallback.

Evaluates presence maps over a 400 x 400 NM, 5-flight-level lattice with 10
flows (the performance-criterion workload) on every available backend, single
threaded and parallel, and verifies the outputs are bit-identical.

Run:  python3 benchmarks/bench_kernels.py
"""

import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))

from helpers import straight_flow  # noqa: E402

from flowmap import kernels  # noqa: E402
from flowmap.proximity import (build_flow_tables, inter_aircraft_pdf,  # noqa: E402
                               lattice_axes)
from flowmap.flowmodel import Region  # noqa: E402

MEAN_GAPS = (45.0, 56.0, 57.0, 88.0, 90.0, 101.0, 105.0, 116.0, 140.0, 225.0)


def build_tables():
    rng = np.random.default_rng(101)
    tables = []
    for i, gap in enumerate(MEAN_GAPS):
        a = rng.uniform(-180, 180, 2)
        b = rng.uniform(-180, 180, 2)
        while np.hypot(*(b - a)) < 150:
            b = rng.uniform(-180, 180, 2)
        flow = straight_flow(i, a, b, 31000.0 + 1000.0 * (i % 5), 2.0, 250.0,
                             rng=np.random.default_rng(4242))
        lam = flow.speed.mu / 3600.0 / gap
        tables.append(build_flow_tables(flow, inter_aircraft_pdf(flow.speed, lam)))
    return tables


def run(backend, tables, px, py, zs, workers):
    n = px.size
    outs = [np.ones((n, zs.size)) for _ in tables]

    def chunk_run(bounds):
        a, b = bounds
        for t, out in zip(tables, outs):
            kernels.flow_presence(px[a:b], py[a:b], zs, t, 2.5, 1000.0, out[a:b],
                                  backend=backend)

    t0 = time.perf_counter()
    if workers <= 1:
        chunk_run((0, n))
    else:
        from concurrent.futures import ThreadPoolExecutor
        edges = np.linspace(0, n, workers * 4 + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(chunk_run, zip(edges[:-1], edges[1:])))
    elapsed = time.perf_counter() - t0
    total = np.ones((n, zs.size))
    for out in outs:
        total *= out
    return elapsed, 1.0 - total


def main():
    region = Region(-200.0, 200.0, -200.0, 200.0, 31000.0, 35000.0)
    xs, ys, zs = lattice_axes(region, (1.0, 1.0, 1000.0))
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    px, py = gx.reshape(-1), gy.reshape(-1)
    tables = build_tables()
    n_workers = os.cpu_count() or 4
    print(f"lattice: {xs.size} x {ys.size} x {zs.size} points, {len(tables)} flows")
    print(f"{'backend':<10} {'workers':>7} {'seconds':>9} {'Mpts/s':>8}")
    reference = None
    for name, backend in kernels.available_backends().items():
        for workers in (1, n_workers):
            elapsed, values = run(backend, tables, px, py, zs, workers)
            rate = px.size * zs.size / elapsed / 1e6
            print(f"{name:<10} {workers:>7} {elapsed:>9.2f} {rate:>8.2f}")
            if reference is None:
                reference = values
            else:
                identical = np.array_equal(reference, values)
                if not identical:
                    print("  WARNING: output differs from reference!")
                    return 1
    print("all backend/worker outputs bit-identical")
    return 0


if __name__ == "__main__":
    sys.exit(main())
