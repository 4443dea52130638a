"""What-if HTTP service over a single immutable model bundle.

Endpoints (schema version 1, JSON):

* ``GET /model/summary`` -- flows, available time bins, flight levels.
* ``GET /map?kind=&fl=&weekday=&bin=`` -- one flight-level slice.
* ``POST /whatif`` -- slice recomputed with overrides (rate scaling, flow
  removal, proximity resize).

Responses are canonical JSON carrying the model hash; identical requests
produce byte-identical responses.  Map slices are cached by request key; the
cache is an optimization only.
"""

from __future__ import annotations

import json
from collections import OrderedDict

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .bundle import bundle_hash
from .errors import InvalidInputError
from .flowmodel import Region
from .model import ModelBundle, WhatIfOverrides
from .proximity import KIND_OUTLIER, MAP_KINDS, generate_map

SCHEMA_VERSION = 1


def _canonical(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _error(status: int, field: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": {"field": field, "message": message}})


class _SliceCache:
    def __init__(self, capacity: int = 64):
        self.capacity = capacity
        self._items: OrderedDict[str, bytes] = OrderedDict()

    def get(self, key: str) -> bytes | None:
        return self._items.get(key)

    def put(self, key: str, value: bytes) -> None:
        if key not in self._items and len(self._items) >= self.capacity:
            self._items.popitem(last=False)
        self._items[key] = value


def _parse_overrides(doc: dict, bundle: ModelBundle) -> WhatIfOverrides:
    known = {"rate_scale", "removed_flows", "half_lateral", "half_vertical"}
    unknown = set(doc) - known
    if unknown:
        raise _FieldError(f"overrides.{sorted(unknown)[0]}", "unknown override field")
    rate_scale = {}
    for key, value in doc.get("rate_scale", {}).items():
        try:
            fid = int(key)
        except ValueError:
            raise _FieldError("overrides.rate_scale", f"flow id {key!r} is not an integer")
        if not isinstance(value, (int, float)) or value < 0:
            raise _FieldError("overrides.rate_scale", f"scale for flow {key} must be >= 0")
        rate_scale[fid] = float(value)
    removed = doc.get("removed_flows", [])
    if not isinstance(removed, list) or any(not isinstance(v, int) for v in removed):
        raise _FieldError("overrides.removed_flows", "must be a list of flow ids")
    for name in ("half_lateral", "half_vertical"):
        value = doc.get(name)
        if value is not None and (not isinstance(value, (int, float)) or value <= 0):
            raise _FieldError(f"overrides.{name}", "must be a positive number")
    try:
        overrides = WhatIfOverrides(
            rate_scale=rate_scale,
            removed_flows=frozenset(removed),
            half_lateral=doc.get("half_lateral"),
            half_vertical=doc.get("half_vertical"),
        )
        overrides.validate_flow_ids(bundle)
    except InvalidInputError as exc:
        raise _FieldError("overrides", str(exc))
    return overrides


class _FieldError(Exception):
    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


def create_app(bundle: ModelBundle, step_xy: float = 1.0, workers: int = 1,
               cache_size: int = 64) -> FastAPI:
    app = FastAPI(title="flowmap what-if service")
    model_hash = bundle_hash(bundle)
    cache = _SliceCache(cache_size)
    speed_mode = bundle.provenance.get("config", {}).get("speed_mode", "constant-speed")

    flight_levels = _flight_levels(bundle.region)
    bins = bundle.available_bins()

    def summary_doc() -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "model_hash": model_hash,
            "n_flows": bundle.n_flows,
            "tau_s": bundle.schedule.tau,
            "region": [bundle.region.x_lo, bundle.region.x_hi, bundle.region.y_lo,
                       bundle.region.y_hi, bundle.region.z_lo, bundle.region.z_hi],
            "flight_levels": flight_levels,
            "bins": bins,
            "kinds": list(MAP_KINDS),
            "has_outlier_density": bundle.outlier_density is not None,
            "flows": [
                {
                    "id": f.id,
                    "member_count": f.member_count,
                    "speed_mu_kt": f.speed.mu,
                    "mean_rate_share": (sum(f.rate_share.values()) / len(f.rate_share)
                                        if f.rate_share else 0.0),
                    "track_xy": [[float(p[0]), float(p[1])] for p in f.track],
                }
                for f in sorted(bundle.flows, key=lambda f: f.id)
            ],
        }

    def validate_request(kind: str, fl: int, weekday: int, j: int) -> None:
        if kind not in MAP_KINDS:
            raise _FieldError("kind", f"must be one of {list(MAP_KINDS)}")
        if kind == KIND_OUTLIER and bundle.outlier_density is None:
            raise _FieldError("kind", "model has no outlier density")
        if fl not in flight_levels:
            raise _FieldError("fl", f"must be one of {flight_levels}")
        if not 0 <= weekday <= 6:
            raise _FieldError("weekday", "must be 0 (Monday) .. 6 (Sunday)")
        if not 0 <= j < bundle.schedule.bins_per_day:
            raise _FieldError("bin", f"must be 0 .. {bundle.schedule.bins_per_day - 1}"
                              f"; populated bins: {bins[:8]}...")

    def compute_slice(kind: str, fl: int, weekday: int, j: int,
                      overrides: WhatIfOverrides, overrides_doc: dict) -> bytes:
        key = _canonical({"kind": kind, "fl": fl, "weekday": weekday, "bin": j,
                          "overrides": overrides_doc}).decode()
        cached = cache.get(key)
        if cached is not None:
            return cached
        z = fl * 100.0
        region = Region(bundle.region.x_lo, bundle.region.x_hi,
                        bundle.region.y_lo, bundle.region.y_hi, z, z + 1.0)
        grid = generate_map(bundle, region=region, steps=(step_xy, step_xy, 1000.0),
                            kind=kind, time_bin=(weekday, j), overrides=overrides,
                            mode=speed_mode, workers=workers)
        values = grid.values[:, :, 0]
        doc = {
            "schema": SCHEMA_VERSION,
            "model_hash": model_hash,
            "kind": kind,
            "fl": fl,
            "weekday": weekday,
            "bin": j,
            "x0": grid.region.x_lo,
            "y0": grid.region.y_lo,
            "dx": step_xy,
            "dy": step_xy,
            "nx": values.shape[0],
            "ny": values.shape[1],
            "axis_order": "x-fastest",
            "values": values.ravel(order="F").tolist(),
            "max_value": float(np.max(values)),
            "probabilistic": bool(grid.meta.get("probabilistic", True)),
            "overrides": overrides_doc,
            "flows": [
                {"id": f.id, "track_xy": [[float(p[0]), float(p[1])] for p in f.track]}
                for f in sorted(bundle.flows, key=lambda f: f.id)
                if f.id not in overrides.removed_flows
            ],
        }
        data = _canonical(doc)
        cache.put(key, data)
        return data

    @app.get("/model/summary")
    def model_summary():
        return Response(content=_canonical(summary_doc()), media_type="application/json")

    @app.get("/map")
    def get_map(kind: str = "presence", fl: int = 0, weekday: int = 0, bin: int = 0,
                model: str | None = None):
        if model is not None and model != model_hash:
            return _error(404, "model", f"unknown bundle {model!r}")
        try:
            validate_request(kind, fl, weekday, bin)
            data = compute_slice(kind, fl, weekday, bin, WhatIfOverrides(),
                                 _default_overrides_doc())
        except _FieldError as exc:
            return _error(400, exc.field, exc.message)
        return Response(content=data, media_type="application/json")

    @app.post("/whatif")
    async def whatif(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error(400, "body", "request body is not valid JSON")
        if not isinstance(body, dict):
            return _error(400, "body", "request body must be a JSON object")
        model = body.get("model")
        if model is not None and model != model_hash:
            return _error(404, "model", f"unknown bundle {model!r}")
        try:
            kind = body.get("kind", "presence")
            fl = int(body.get("fl", 0))
            weekday = int(body.get("weekday", 0))
            j = int(body.get("bin", 0))
            overrides_in = body.get("overrides", {})
            if not isinstance(overrides_in, dict):
                raise _FieldError("overrides", "must be a JSON object")
            validate_request(kind, fl, weekday, j)
            overrides = _parse_overrides(overrides_in, bundle)
            overrides_doc = _overrides_doc(overrides)
            data = compute_slice(kind, fl, weekday, j, overrides, overrides_doc)
        except _FieldError as exc:
            return _error(400, exc.field, exc.message)
        except (TypeError, ValueError) as exc:
            return _error(400, "body", str(exc))
        return Response(content=data, media_type="application/json")

    return app


def _flight_levels(region: Region) -> list[int]:
    lo = int(-(-region.z_lo // 1000)) * 10
    hi = int(region.z_hi // 1000) * 10
    return [fl for fl in range(lo, hi + 1, 10)]


def _default_overrides_doc() -> dict:
    return {"rate_scale": {}, "removed_flows": [], "half_lateral": None,
            "half_vertical": None}


def _overrides_doc(ov: WhatIfOverrides) -> dict:
    return {
        "rate_scale": {str(k): ov.rate_scale[k] for k in sorted(ov.rate_scale)},
        "removed_flows": sorted(ov.removed_flows),
        "half_lateral": ov.half_lateral,
        "half_vertical": ov.half_vertical,
    }
