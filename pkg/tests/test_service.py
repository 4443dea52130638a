"""What-if HTTP service: schema, determinism, override semantics."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from flowmap.arrivals import BinCounts, RateSchedule
from flowmap.bundle import bundle_hash
from flowmap.flowmodel import MODE_OCCUPANCY, OutlierDensity, Region
from flowmap.model import ModelBundle
from flowmap.service import create_app

from helpers import straight_flow


@pytest.fixture(scope="module")
def bundle():
    import dataclasses
    rng = np.random.default_rng(1)
    flow_a = straight_flow(0, (-100, 0), (100, 0), 35000.0, 2.0, 250.0, rng=rng)
    flow_b = straight_flow(1, (0, -100), (0, 100), 35000.0, 2.0, 250.0, rng=rng)
    flow_c = straight_flow(2, (-100, -80), (100, 80), 33000.0, 2.5, 250.0, rng=rng)
    shares = {"0-0": 0.4}, {"0-0": 0.35}, {"0-0": 0.25}
    flows = [dataclasses.replace(f, rate_share=s)
             for f, s in zip((flow_a, flow_b, flow_c), shares)]
    schedule = RateSchedule(900.0, 12905, 1, {0: 1})
    schedule.bins["0-0"] = BinCounts(total=40, per_flow={0: 16, 1: 14, 2: 10})
    region = Region(-120.0, 120.0, -120.0, 120.0, 32000.0, 36000.0)
    values = np.full((24, 24, 4), 0.002)
    outliers = OutlierDensity(region, 10.0, 1000.0, values, MODE_OCCUPANCY, 86400.0)
    return ModelBundle(flows, schedule, outliers, region, 41.0, -82.0)


@pytest.fixture(scope="module")
def client(bundle):
    return TestClient(create_app(bundle, step_xy=2.0))


def test_summary(bundle, client):
    r = client.get("/model/summary")
    assert r.status_code == 200
    doc = r.json()
    assert doc["schema"] == 1
    assert doc["model_hash"] == bundle_hash(bundle)
    assert doc["n_flows"] == 3
    assert [f["id"] for f in doc["flows"]] == [0, 1, 2]
    total_share = sum(f["mean_rate_share"] for f in doc["flows"])
    assert total_share <= 1.0 + 1e-12
    assert 350 in doc["flight_levels"]
    assert "0-0" in doc["bins"]


def test_map_slice_payload(client, bundle):
    r = client.get("/map", params={"kind": "presence", "fl": 350, "weekday": 0, "bin": 0})
    assert r.status_code == 200
    doc = r.json()
    assert doc["model_hash"] == bundle_hash(bundle)
    assert doc["nx"] == len(doc["values"]) // doc["ny"]
    assert doc["max_value"] == max(doc["values"])
    assert 0.0 <= doc["max_value"] <= 1.0
    assert doc["axis_order"] == "x-fastest"
    assert {f["id"] for f in doc["flows"]} == {0, 1, 2}


def test_identical_requests_byte_identical(client):
    params = {"kind": "conflict", "fl": 350, "weekday": 0, "bin": 0}
    r1 = client.get("/map", params=params)
    r2 = client.get("/map", params=params)
    assert r1.content == r2.content


def test_whatif_default_equals_baseline(client):
    base = client.get("/map", params={"kind": "presence", "fl": 350,
                                      "weekday": 0, "bin": 0})
    what = client.post("/whatif", json={"kind": "presence", "fl": 350,
                                        "weekday": 0, "bin": 0, "overrides": {}})
    assert base.json()["values"] == what.json()["values"]


def test_whatif_rate_scale_monotone(client):
    base = client.get("/map", params={"kind": "presence", "fl": 350,
                                      "weekday": 0, "bin": 0}).json()
    doubled = client.post("/whatif", json={
        "kind": "presence", "fl": 350, "weekday": 0, "bin": 0,
        "overrides": {"rate_scale": {"0": 2.0, "1": 2.0, "2": 2.0}}}).json()
    b = np.array(base["values"])
    d = np.array(doubled["values"])
    assert np.all(d >= b - 1e-15)
    assert d.max() > b.max()


def test_whatif_remove_all_flows_zero(client):
    r = client.post("/whatif", json={
        "kind": "presence", "fl": 350, "weekday": 0, "bin": 0,
        "overrides": {"removed_flows": [0, 1, 2]}})
    doc = r.json()
    assert max(doc["values"]) == 0.0
    assert doc["flows"] == []


def test_whatif_prox_resize_monotone(client):
    base = client.get("/map", params={"kind": "presence", "fl": 350,
                                      "weekday": 0, "bin": 0}).json()
    bigger = client.post("/whatif", json={
        "kind": "presence", "fl": 350, "weekday": 0, "bin": 0,
        "overrides": {"half_lateral": 5.0, "half_vertical": 2000.0}}).json()
    assert np.all(np.array(bigger["values"]) >= np.array(base["values"]) - 1e-15)


def test_outlier_map_served(client):
    r = client.get("/map", params={"kind": "outlier", "fl": 350, "weekday": 0, "bin": 0})
    assert r.status_code == 200
    assert r.json()["probabilistic"] is True


def test_errors_are_field_level(client):
    r = client.get("/map", params={"kind": "bogus", "fl": 350})
    assert r.status_code == 400
    assert r.json()["error"]["field"] == "kind"
    r = client.get("/map", params={"kind": "presence", "fl": 777})
    assert r.status_code == 400
    assert r.json()["error"]["field"] == "fl"
    r = client.post("/whatif", json={"kind": "presence", "fl": 350, "weekday": 0,
                                     "bin": 0, "overrides": {"rate_scale": {"0": -1}}})
    assert r.status_code == 400
    assert r.json()["error"]["field"] == "overrides.rate_scale"
    r = client.post("/whatif", json={"kind": "presence", "fl": 350, "weekday": 0,
                                     "bin": 0, "overrides": {"unknown_knob": 1}})
    assert r.status_code == 400
    assert "unknown" in r.json()["error"]["message"]
    r = client.post("/whatif", content=b"{broken",
                    headers={"content-type": "application/json"})
    assert r.status_code == 400


def test_unknown_model_hash_404(client):
    r = client.get("/map", params={"kind": "presence", "fl": 350, "weekday": 0,
                                   "bin": 0, "model": "f" * 64})
    assert r.status_code == 404
    r = client.post("/whatif", json={"model": "f" * 64, "kind": "presence", "fl": 350})
    assert r.status_code == 404


def test_concurrent_requests_consistent(client):
    from concurrent.futures import ThreadPoolExecutor

    def fetch(kind):
        return client.get("/map", params={"kind": kind, "fl": 350,
                                          "weekday": 0, "bin": 0}).content

    with ThreadPoolExecutor(max_workers=8) as ex:
        results = list(ex.map(fetch, ["presence", "conflict"] * 8))
    assert len({r for r in results[0::2]}) == 1
    assert len({r for r in results[1::2]}) == 1
