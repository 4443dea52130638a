"""Parsing, cleaning, and spatial resampling."""

import numpy as np
import pytest

from flowmap.errors import DegenerateGeometryError, FormatError
from flowmap.ingest import (CleaningThresholds, RawTrajectory, clean_trajectories,
                            parse_trajectory_file, resample, serialize_trajectories)

ORIGIN = (41.0, -82.0)


def _raw(fid, times, lats, lons, alts):
    return RawTrajectory(fid, np.asarray(times, float), np.asarray(lats, float),
                         np.asarray(lons, float), np.asarray(alts, float))


def _cruise(fid="F1", n=10, lat0=41.0, dlat=0.1, alt=35000.0, dt=60.0):
    times = 1_000_000 + dt * np.arange(n)
    lats = lat0 + dlat * np.arange(n)
    lons = np.full(n, -82.0)
    return _raw(fid, times, lats, lons, np.full(n, alt))


def test_parse_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("flight_id,timestamp_s,lat_deg,lon_deg,alt_ft\n")
    result = parse_trajectory_file(path)
    assert result.trajectories == []
    assert result.malformed_lines == 0


def test_parse_interleaved_flights(tmp_path):
    path = tmp_path / "two.csv"
    lines = ["flight_id,timestamp_s,lat_deg,lon_deg,alt_ft"]
    for i in range(10):
        lines.append(f"A,{1000 + 60 * i},41.{i},-82.0,35000")
        lines.append(f"B,{950 + 60 * i},40.{i},-81.0,33000")
    path.write_text("\n".join(lines) + "\n")
    result = parse_trajectory_file(path)
    assert [t.flight_id for t in result.trajectories] == ["A", "B"]
    for t in result.trajectories:
        assert t.n_samples == 10
        assert np.all(np.diff(t.times) > 0)


def test_parse_counts_malformed_lines(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "flight_id,timestamp_s,lat_deg,lon_deg,alt_ft\n"
        "A,1000,41.0,-82.0,35000\n"
        "A,1060,41.1,-82.0\n"            # missing field
        "A,1120,absurd,-82.0,35000\n"     # non-numeric
        "A,1180,41.3,-82.0,35000\n"
        "A,1240,41.4,-82.0,35000\n"
    )
    result = parse_trajectory_file(path)
    assert result.malformed_lines == 2
    assert result.trajectories[0].n_samples == 3


def test_parse_rejects_bad_header_and_mostly_malformed(tmp_path):
    path = tmp_path / "hdr.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(FormatError):
        parse_trajectory_file(path)
    path2 = tmp_path / "garbage.csv"
    path2.write_text("flight_id,timestamp_s,lat_deg,lon_deg,alt_ft\n" + "junk\n" * 10
                     + "A,1000,41.0,-82.0,35000\n")
    with pytest.raises(FormatError):
        parse_trajectory_file(path2)


def test_roundtrip_serialize_parse(tmp_path):
    trajs = [_cruise("AAL123"), _cruise("UAL9", lat0=40.2, alt=37000.0)]
    path = tmp_path / "rt.csv"
    serialize_trajectories(trajs, path)
    parsed = parse_trajectory_file(path).trajectories
    assert len(parsed) == 2
    for orig, back in zip(trajs, parsed):
        assert back.flight_id == orig.flight_id
        assert np.array_equal(back.times, orig.times)
        assert np.array_equal(back.lats, orig.lats)
        assert np.array_equal(back.lons, orig.lons)
        assert np.array_equal(back.alts, orig.alts)


def test_clean_keeps_normal_cruise():
    clean, rejected = clean_trajectories([_cruise()])
    assert len(clean) == 1 and not rejected


def test_clean_rejects_teleport():
    # 100 NM in 60 s is 6000 kt
    traj = _raw("T", [0, 60], [41.0, 41.0], [-82.0, -82.0 + 100 / (60 * 0.7547)],
                [35000, 35000])
    _, rejected = clean_trajectories([traj])
    assert rejected and rejected[0][1] == "speed"


def test_clean_rejects_climb_gap_altitude():
    bad_climb = _raw("C", [0, 60], [41.0, 41.1], [-82.0, -82.0], [20000, 40000])
    bad_gap = _raw("G", [0, 1000], [41.0, 41.5], [-82.0, -82.0], [35000, 35000])
    low = _cruise("L", alt=14000.0)
    clean, rejected = clean_trajectories([bad_climb, bad_gap, low])
    assert not clean
    assert {fid.flight_id: r for fid, r in rejected} == {
        "C": "climb", "G": "gap", "L": "altitude"}


def test_clean_fault_injection():
    # synthetic corpus with 5% injected speed jumps: exactly those are rejected
    rng = np.random.default_rng(11)
    trajs = []
    bad_ids = set()
    for i in range(100):
        traj = _cruise(f"F{i:03d}", lat0=40.0 + 0.01 * i)
        if rng.random() < 0.05:
            lats = traj.lats.copy()
            lats[5] += 3.0  # ~180 NM teleport within one minute
            traj = _raw(traj.flight_id, traj.times, lats, traj.lons, traj.alts)
            bad_ids.add(traj.flight_id)
        trajs.append(traj)
    clean, rejected = clean_trajectories(trajs)
    assert {t.flight_id for t, _ in rejected} == bad_ids
    assert len(clean) == 100 - len(bad_ids)


def test_clean_idempotent():
    trajs = [_cruise(f"F{i}", lat0=40.0 + 0.05 * i) for i in range(20)]
    clean, _ = clean_trajectories(trajs)
    again, rejected = clean_trajectories(clean)
    assert len(again) == len(clean) and not rejected


def test_resample_straight_segment():
    # 70 NM due north: 8 points, 10 NM apart
    traj = _raw("S", [0, 600], [41.0, 41.0 + 70.0 / 60.0], [-82.0, -82.0],
                [35000, 35000])
    rs = resample(traj, 8, *ORIGIN)
    assert rs.n_points == 8
    gaps = np.hypot(*np.diff(rs.points[:, :2], axis=0).T)
    assert np.allclose(gaps, 10.0, atol=1e-9)


def test_resample_preserves_endpoints():
    traj = _cruise(n=17)
    rs = resample(traj, 8, *ORIGIN)
    first = resample(traj, 2, *ORIGIN)
    assert np.allclose(rs.points[0], first.points[0], atol=1e-12)
    assert np.allclose(rs.points[-1], first.points[-1], atol=1e-12)


def test_resample_l_shape_against_dense_oracle():
    # L-shaped path; oracle: arc-length positions on a 10^4-point densified path
    traj = _raw("L", [0, 300, 600],
                [41.0, 41.5, 41.5], [-82.0, -82.0, -81.0], [35000, 35000, 35000])
    l = 8
    rs = resample(traj, l, *ORIGIN)
    xs = 60.0 * (traj.lons + 82.0) * np.cos(np.radians(41.0))
    ys = 60.0 * (traj.lats - 41.0)
    t_dense = np.linspace(0.0, 1.0, 10_000)
    dense_x = np.concatenate([np.interp(t_dense, [0, 1], xs[i:i + 2]) for i in range(2)])
    dense_y = np.concatenate([np.interp(t_dense, [0, 1], ys[i:i + 2]) for i in range(2)])
    seg = np.hypot(np.diff(dense_x), np.diff(dense_y))
    arc = np.concatenate(([0.0], np.cumsum(seg)))
    total = arc[-1]
    for k in range(l):
        target = total * k / (l - 1)
        idx = np.searchsorted(arc, target)
        idx = min(idx, len(dense_x) - 1)
        ox, oy = dense_x[idx], dense_y[idx]
        assert np.hypot(rs.points[k, 0] - ox, rs.points[k, 1] - oy) < 1e-2


def test_resample_invariant_to_densification():
    traj = _raw("D", [0, 300, 600],
                [41.0, 41.5, 41.5], [-82.0, -82.0, -81.0], [33000, 35000, 35000])
    rs1 = resample(traj, 8, *ORIGIN)
    # insert collinear midpoints
    times = np.sort(np.concatenate([traj.times, traj.times[:-1] + 150.0]))
    lats = np.interp(times, traj.times, traj.lats)
    lons = np.interp(times, traj.times, traj.lons)
    alts = np.interp(times, traj.times, traj.alts)
    rs2 = resample(_raw("D", times, lats, lons, alts), 8, *ORIGIN)
    assert np.allclose(rs1.points, rs2.points, atol=1e-9)


def test_resample_arc_positions_equal_fractions():
    traj = _raw("P", [0, 100, 200, 300],
                [41.0, 41.2, 41.3, 41.9], [-82.0, -81.5, -81.2, -81.0],
                [30000, 32000, 33000, 36000])
    l = 8
    rs = resample(traj, l, *ORIGIN)
    # walk the original polyline to find each output's arc position
    xs = 60.0 * (traj.lons + 82.0) * np.cos(np.radians(41.0))
    ys = 60.0 * (traj.lats - 41.0)
    seg = np.hypot(np.diff(xs), np.diff(ys))
    arc = np.concatenate(([0.0], np.cumsum(seg)))
    total = arc[-1]
    for k in range(l):
        p = rs.points[k, :2]
        # distance along the polyline of the projection of p
        best = None
        for i in range(len(xs) - 1):
            a = np.array([xs[i], ys[i]])
            b = np.array([xs[i + 1], ys[i + 1]])
            t = np.clip(np.dot(p - a, b - a) / np.dot(b - a, b - a), 0, 1)
            d = np.linalg.norm(p - (a + t * (b - a)))
            pos = arc[i] + t * seg[i]
            if best is None or d < best[0]:
                best = (d, pos)
        assert best[0] < 1e-9
        assert best[1] == pytest.approx(total * k / (l - 1), abs=1e-6)


def test_resample_degenerate_path():
    traj = _raw("Z", [0, 60], [41.0, 41.0], [-82.0, -82.0], [35000, 35100])
    with pytest.raises(DegenerateGeometryError):
        resample(traj, 8, *ORIGIN)


def test_thresholds_validated():
    with pytest.raises(Exception):
        CleaningThresholds(max_ground_speed=-1.0)
