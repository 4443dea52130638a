"""Model bundle and map persistence: canonical, versioned JSON documents.

Serialization is deterministic (sorted keys, fixed separators) and floats are
written with repr, so save -> load -> save is byte-identical and load(save(m))
reconstructs every value bit-exactly.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .arrivals import BinCounts, RateSchedule
from .density import DiscretePdf
from .errors import FormatError
from .flowmodel import Flow, OutlierDensity, Region, TLocationScale, Window
from .geometry import LocalFrame, PointENU
from .model import BUNDLE_VERSION, ModelBundle
from .proximity import MapGrid

BUNDLE_FORMAT = "flowmap-bundle"
MAP_FORMAT = "flowmap-map"
MAP_VERSION = 1


def _canonical_bytes(doc: dict) -> bytes:
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def _pdf_to_dict(pdf: DiscretePdf) -> dict:
    return {"origin": pdf.origin, "step": pdf.step, "values": pdf.density.tolist()}


def _pdf_from_dict(doc: dict) -> DiscretePdf:
    return DiscretePdf(float(doc["origin"]), float(doc["step"]),
                       np.array(doc["values"], dtype=float))


def _window_to_dict(w: Window) -> dict:
    return {
        "origin": [w.frame.origin.x, w.frame.origin.y, w.frame.origin.z],
        "heading": [float(w.frame.longitudinal[0]), float(w.frame.longitudinal[1])],
        "lateral_extent": list(w.lateral_extent),
        "vertical_extent": list(w.vertical_extent),
        "lateral_density": _pdf_to_dict(w.lateral_density),
        "vertical_density": _pdf_to_dict(w.vertical_density),
    }


def _window_from_dict(doc: dict) -> Window:
    ox, oy, oz = (float(v) for v in doc["origin"])
    ex, ey = (float(v) for v in doc["heading"])
    frame = LocalFrame(PointENU(ox, oy, oz),
                       np.array([ex, ey, 0.0]), np.array([-ey, ex, 0.0]),
                       np.array([0.0, 0.0, 1.0]))
    return Window(
        frame=frame,
        lateral_extent=tuple(float(v) for v in doc["lateral_extent"]),
        vertical_extent=tuple(float(v) for v in doc["vertical_extent"]),
        lateral_density=_pdf_from_dict(doc["lateral_density"]),
        vertical_density=_pdf_from_dict(doc["vertical_density"]),
    )


def _flow_to_dict(f: Flow) -> dict:
    return {
        "id": f.id,
        "member_count": f.member_count,
        "track": f.track.tolist(),
        "speed": {"mu": f.speed.mu, "sigma": f.speed.sigma, "nu": f.speed.nu},
        "rate_share": dict(sorted(f.rate_share.items())),
        "windows": [_window_to_dict(w) for w in f.windows],
    }


def _flow_from_dict(doc: dict) -> Flow:
    return Flow(
        id=int(doc["id"]),
        track=np.array(doc["track"], dtype=float),
        windows=tuple(_window_from_dict(w) for w in doc["windows"]),
        speed=TLocationScale(float(doc["speed"]["mu"]), float(doc["speed"]["sigma"]),
                             float(doc["speed"]["nu"])),
        member_count=int(doc["member_count"]),
        rate_share={k: float(v) for k, v in doc["rate_share"].items()},
    )


def _schedule_to_dict(s: RateSchedule) -> dict:
    return {
        "tau": s.tau,
        "first_day": s.first_day,
        "n_days": s.n_days,
        "weekday_days": {str(k): v for k, v in sorted(s.weekday_days.items())},
        "bins": {
            key: {
                "total": c.total,
                "per_flow": {str(k): v for k, v in sorted(c.per_flow.items())},
                "per_day": {str(k): v for k, v in sorted(c.per_day.items())},
                "entry_times": c.entry_times,
            }
            for key, c in sorted(s.bins.items())
        },
    }


def _schedule_from_dict(doc: dict) -> RateSchedule:
    schedule = RateSchedule(
        tau=float(doc["tau"]),
        first_day=int(doc["first_day"]),
        n_days=int(doc["n_days"]),
        weekday_days={int(k): int(v) for k, v in doc["weekday_days"].items()},
    )
    for key, c in doc["bins"].items():
        schedule.bins[key] = BinCounts(
            total=int(c["total"]),
            per_flow={int(k): int(v) for k, v in c["per_flow"].items()},
            per_day={int(k): int(v) for k, v in c["per_day"].items()},
            entry_times=[float(t) for t in c["entry_times"]],
        )
    return schedule


def _region_to_list(r: Region) -> list:
    return [r.x_lo, r.x_hi, r.y_lo, r.y_hi, r.z_lo, r.z_hi]


def _outlier_to_dict(o: OutlierDensity | None) -> dict | None:
    if o is None:
        return None
    return {
        "region": _region_to_list(o.region),
        "step_xy": o.step_xy,
        "step_z": o.step_z,
        "mode": o.mode,
        "observation_time": o.observation_time,
        "shape": list(o.values.shape),
        "values": o.values.reshape(-1).tolist(),  # C order: z fastest, then y, then x
    }


def _outlier_from_dict(doc: dict | None) -> OutlierDensity | None:
    if doc is None:
        return None
    shape = tuple(int(v) for v in doc["shape"])
    return OutlierDensity(
        region=Region(*(float(v) for v in doc["region"])),
        step_xy=float(doc["step_xy"]),
        step_z=float(doc["step_z"]),
        values=np.array(doc["values"], dtype=float).reshape(shape),
        mode=doc["mode"],
        observation_time=float(doc["observation_time"]),
    )


def bundle_to_dict(b: ModelBundle) -> dict:
    return {
        "format": BUNDLE_FORMAT,
        "version": b.version,
        "origin": {"lat": b.origin_lat, "lon": b.origin_lon},
        "region": _region_to_list(b.region),
        "flows": [_flow_to_dict(f) for f in sorted(b.flows, key=lambda f: f.id)],
        "schedule": _schedule_to_dict(b.schedule),
        "outlier_density": _outlier_to_dict(b.outlier_density),
        "provenance": b.provenance,
    }


def bundle_from_dict(doc: dict) -> ModelBundle:
    if doc.get("format") != BUNDLE_FORMAT:
        raise FormatError(f"not a model bundle: format={doc.get('format')!r}")
    if doc.get("version") != BUNDLE_VERSION:
        raise FormatError(f"unsupported bundle version {doc.get('version')!r}")
    return ModelBundle(
        flows=[_flow_from_dict(f) for f in doc["flows"]],
        schedule=_schedule_from_dict(doc["schedule"]),
        outlier_density=_outlier_from_dict(doc.get("outlier_density")),
        region=Region(*(float(v) for v in doc["region"])),
        origin_lat=float(doc["origin"]["lat"]),
        origin_lon=float(doc["origin"]["lon"]),
        provenance=doc.get("provenance", {}),
        version=int(doc["version"]),
    )


def bundle_bytes(b: ModelBundle) -> bytes:
    return _canonical_bytes(bundle_to_dict(b))


def bundle_hash(b: ModelBundle) -> str:
    return hashlib.sha256(bundle_bytes(b)).hexdigest()


def save_bundle(b: ModelBundle, path) -> str:
    """Write the bundle; returns its content hash."""
    data = bundle_bytes(b)
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def load_bundle(path) -> ModelBundle:
    with open(path, "r", encoding="utf-8") as fh:
        return bundle_from_dict(json.load(fh))


def map_to_dict(grid: MapGrid, model_hash: str = "", overrides_doc: dict | None = None) -> dict:
    """Map document; values are x-fastest, then y, then z (Fortran ravel)."""
    return {
        "format": MAP_FORMAT,
        "version": MAP_VERSION,
        "kind": grid.kind,
        "region": _region_to_list(grid.region),
        "steps": list(grid.steps),
        "shape": list(grid.values.shape),
        "time_bin": list(grid.time_bin),
        "axis_order": "x-fastest",
        "model_hash": model_hash,
        "overrides": overrides_doc or {},
        "meta": {k: v for k, v in sorted(grid.meta.items())},
        "values": grid.values.ravel(order="F").tolist(),
    }


def map_bytes(grid: MapGrid, model_hash: str = "", overrides_doc: dict | None = None) -> bytes:
    return _canonical_bytes(map_to_dict(grid, model_hash, overrides_doc))


def save_map(grid: MapGrid, path, model_hash: str = "",
             overrides_doc: dict | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(map_bytes(grid, model_hash, overrides_doc))


def load_map(path) -> MapGrid:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MAP_FORMAT:
        raise FormatError(f"not a map file: format={doc.get('format')!r}")
    shape = tuple(int(v) for v in doc["shape"])
    values = np.array(doc["values"], dtype=float).reshape(shape, order="F")
    meta = dict(doc.get("meta", {}))
    meta["model_hash"] = doc.get("model_hash", "")
    meta["overrides"] = doc.get("overrides", {})
    return MapGrid(
        kind=doc["kind"],
        region=Region(*(float(v) for v in doc["region"])),
        steps=tuple(float(v) for v in doc["steps"]),
        values=values,
        time_bin=tuple(int(v) for v in doc["time_bin"]),
        meta=meta,
    )


def write_map_csv_slices(grid: MapGrid, directory) -> list[str]:
    """One CSV per flight level: header row of x coordinates, one row per y."""
    import os

    xs, ys, zs = grid.axes()
    paths = []
    for iz, z in enumerate(zs):
        fl = int(round(z / 100.0))
        path = os.path.join(directory, f"{grid.kind}_FL{fl:03d}.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("y\\x," + ",".join(repr(float(x)) for x in xs) + "\n")
            for iy, y in enumerate(ys):
                row = ",".join(repr(float(v)) for v in grid.values[:, iy, iz])
                fh.write(f"{float(y)!r},{row}\n")
        paths.append(path)
    return paths
