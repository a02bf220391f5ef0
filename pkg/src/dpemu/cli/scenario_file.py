"""JSON scenario documents and model files.

Complex arrays are stored as lists of ``[re, im]`` pairs in row-major order.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from ..blocks import SampleBlock
from ..errors import ConfigError, MissingRef, SchemaError
from ..geom import Angle
from ..emucore import BlockSource, NodeModel, PulseTrainSource, Scenario, Waypoint
from ..scatter import ScatterPoint, ScatterProfile
from ..sphharm import AntennaModel, ShBasisSpec
from .waveforms import pulse_train_parts, read_cf32, waveform_gen

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

PROFILE_SCHEMA = {
    "type": "object",
    "required": ["order", "points"],
    "properties": {
        "order": {"type": "integer", "minimum": 0, "maximum": 31},
        "points": {"type": "array", "items": {
            "type": "object",
            "required": ["location", "in", "out"],
            "properties": {"location": _VEC3, "in": {"type": "array", "items": _PAIR},
                           "out": {"type": "array", "items": _PAIR}},
        }},
    },
}

ANTENNA_SCHEMA = {
    "type": "object",
    "required": ["order", "D", "steer", "field"],
    "properties": {
        "order": {"type": "integer", "minimum": 0, "maximum": 31},
        "D": {"type": "integer", "minimum": 1},
        "steer": {"type": "array", "items": {"type": "array", "items": _PAIR}},
        "field": {"type": "array", "items": {"type": "array", "items": _PAIR}},
        "element_positions_wl": {"oneOf": [{"type": "null"}, {"type": "array", "items": _VEC3}]},
    },
}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["globals", "nodes"],
    "properties": {
        "globals": {
            "type": "object",
            "required": ["fc_hz", "fs_hz", "update_interval_s", "max_range_m", "duration_s"],
            "properties": {
                "fc_hz": _POS, "fs_hz": _POS, "update_interval_s": _POS, "max_range_m": _POS,
                "duration_s": _POS, "loss_ref_m": _POS,
                "filter": {"type": "object", "properties": {
                    "method": {"enum": ["spline", "legendre"]},
                    "taps": {"enum": [4, 8]},
                    "steps": {"type": "integer", "minimum": 1}}},
            },
        },
        "nodes": {"type": "array", "minItems": 2, "items": {
            "type": "object",
            "required": ["id", "waypoints"],
            "properties": {
                "id": {"type": "string", "minLength": 1},
                "waypoints": {"type": "array", "minItems": 1, "items": {
                    "type": "object",
                    "required": ["t", "x", "y", "z"],
                    "properties": {k: _NUM for k in ("t", "x", "y", "z", "vx", "vy", "vz")},
                }},
                "orientation": {"type": "array", "items": {
                    "type": "object", "required": ["t", "matrix"],
                    "properties": {"t": _NUM, "matrix": {"type": "array", "items": _VEC3,
                                                         "minItems": 3, "maxItems": 3}}}},
                "antenna_ref": {"oneOf": [{"type": "string"}, ANTENNA_SCHEMA]},
                "steer": {"type": "array", "items": {
                    "type": "object", "required": ["t", "azimuth_deg", "polar_deg"],
                    "properties": {"t": _NUM, "azimuth_deg": _NUM, "polar_deg": _NUM}}},
                "profile_ref": {"oneOf": [{"type": "null"}, {"type": "string"}, PROFILE_SCHEMA]},
                "tx": {"oneOf": [{"type": "null"}, {
                    "type": "object", "required": ["kind"],
                    "properties": {"kind": {"enum": ["tone", "lfm", "pulse_train", "file"]},
                                   "params": {"type": "object"}}}]},
                "rx_offset": _VEC3,
                "mute": {"type": "array", "items": {"type": "string"}},
            },
        }},
    },
}


def _field_path(error) -> str:
    out = ""
    for part in error.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out


def validate(doc: dict, schema: dict = SCENARIO_SCHEMA) -> None:
    errors = sorted(jsonschema.Draft7Validator(schema).iter_errors(doc),
                    key=lambda e: (len(list(e.absolute_path)), list(map(str, e.absolute_path))))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise SchemaError(err.message, _field_path(err))


def _complex(pairs) -> np.ndarray:
    a = np.asarray(pairs, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def _pairs(z) -> list:
    z = np.asarray(z, dtype=np.complex128)
    return np.stack([z.real, z.imag], axis=-1).tolist()


def profile_from_dict(doc: dict) -> ScatterProfile:
    validate(doc, PROFILE_SCHEMA)
    spec = ShBasisSpec(doc["order"])
    try:
        return ScatterProfile(spec, [ScatterPoint(p["location"], _complex(p["in"]), _complex(p["out"]))
                                     for p in doc["points"]])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def profile_to_dict(profile: ScatterProfile) -> dict:
    return {"order": profile.spec.order,
            "points": [{"location": p.location.tolist(), "in": _pairs(p.in_coeffs), "out": _pairs(p.out_coeffs)}
                       for p in profile.points]}


def antenna_from_dict(doc: dict) -> AntennaModel:
    validate(doc, ANTENNA_SCHEMA)
    pos = doc.get("element_positions_wl")
    try:
        model = AntennaModel(ShBasisSpec(doc["order"]), _complex(doc["steer"]), _complex(doc["field"]),
                             None if pos is None else np.asarray(pos, dtype=float))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if model.D != doc["D"]:
        raise ConfigError(f"antenna declares D = {doc['D']} but holds {model.D} factors")
    return model


def antenna_to_dict(model: AntennaModel) -> dict:
    pos = model.element_positions
    return {"order": model.spec.order, "D": model.D, "steer": _pairs(model.steer_coeffs),
            "field": _pairs(model.field_coeffs),
            "element_positions_wl": None if pos is None else pos.tolist()}


def _load_json(path: Path) -> dict:
    if not path.exists():
        raise MissingRef(path)
    return json.loads(path.read_text())


def _is_isotropic(model: AntennaModel) -> bool:
    iso = AntennaModel.isotropic()
    return (model.spec == iso.spec and model.element_positions is None
            and np.array_equal(model.steer_coeffs, iso.steer_coeffs)
            and np.array_equal(model.field_coeffs, iso.field_coeffs))


def _tx_source(tx: dict | None, fs: float, duration: float, base: Path):
    if tx is None:
        return None
    kind, params = tx["kind"], dict(tx.get("params", {}))
    spec = {"kind": kind, "params": dict(params)}
    if kind == "pulse_train":
        pulse, period = pulse_train_parts(params, fs)
        return PulseTrainSource(pulse, period, int(round(params.get("start_s", 0.0) * fs)),
                                params.get("count"), spec=spec)
    if kind == "file":
        path = base / params["path"]
        if not path.exists():
            raise MissingRef(path)
        x = read_cf32(path)
        return BlockSource(SampleBlock(int(round(params.get("start_s", 0.0) * fs)), x), spec=spec)
    return BlockSource(waveform_gen(kind, params, fs, params.get("duration_s", duration)), spec=spec)


def scenario_from_dict(doc: dict, base: Path | str = ".") -> Scenario:
    """Validate a scenario document and resolve its references relative to ``base``."""
    validate(doc)
    base = Path(base)
    g = doc["globals"]
    flt = g.get("filter", {})
    nodes = []
    for nd in doc["nodes"]:
        wps = [Waypoint(w["t"], [w["x"], w["y"], w["z"]], [w.get("vx", 0.0), w.get("vy", 0.0), w.get("vz", 0.0)])
               for w in nd["waypoints"]]
        ant = nd.get("antenna_ref", "isotropic")
        if isinstance(ant, dict):
            antenna = antenna_from_dict(ant)
        elif ant == "isotropic":
            antenna = AntennaModel.isotropic()
        else:
            antenna = antenna_from_dict(_load_json(base / ant))
        prof = nd.get("profile_ref")
        if prof is None:
            profile = ScatterProfile()
        elif isinstance(prof, dict):
            profile = profile_from_dict(prof)
        else:
            profile = profile_from_dict(_load_json(base / prof))
        steer = [(s["t"], Angle.wrapped(s["azimuth_deg"], s["polar_deg"])) for s in nd.get("steer", [])]
        orient = [(o["t"], np.asarray(o["matrix"], dtype=float)) for o in nd.get("orientation", [])]
        kwargs = {}
        if steer:
            kwargs["steer"] = steer
        if orient:
            kwargs["orientation"] = orient
        try:
            nodes.append(NodeModel(
                nd["id"], wps, antenna=antenna, profile=profile,
                tx=_tx_source(nd.get("tx"), g["fs_hz"], g["duration_s"], base),
                rx_offset=nd.get("rx_offset", [0.0, 0.0, 0.0]), mute=frozenset(nd.get("mute", [])), **kwargs))
        except ValueError as exc:
            raise ConfigError(f"node {nd['id']}: {exc}") from exc
    return Scenario(nodes, g["fc_hz"], g["fs_hz"], g["update_interval_s"], g["max_range_m"], g["duration_s"],
                    g.get("loss_ref_m", 1.0), flt.get("method", "spline"), flt.get("taps", 4),
                    flt.get("steps", 1024))


def scenario_to_dict(scn: Scenario) -> dict:
    """Self-contained document for a scenario; models are written inline."""
    nodes = []
    for n in scn.nodes:
        if n.tx is not None and getattr(n.tx, "spec", None) is None:
            raise ConfigError(f"node {n.id}: transmit source has no serializable description")
        nodes.append({
            "id": n.id,
            "waypoints": [{"t": w.t, "x": w.position[0], "y": w.position[1], "z": w.position[2],
                           "vx": w.velocity[0], "vy": w.velocity[1], "vz": w.velocity[2]} for w in n.waypoints],
            "orientation": [{"t": t, "matrix": r.tolist()} for t, r in n.orientation],
            "antenna_ref": "isotropic" if _is_isotropic(n.antenna) else antenna_to_dict(n.antenna),
            "steer": [{"t": t, "azimuth_deg": a.azimuth_deg, "polar_deg": a.polar_deg} for t, a in n.steer],
            "profile_ref": profile_to_dict(n.profile) if n.profile.K else None,
            "tx": None if n.tx is None else n.tx.spec,
            "rx_offset": n.rx_offset.tolist(),
            "mute": sorted(n.mute),
        })
    return {
        "globals": {"fc_hz": scn.fc, "fs_hz": scn.fs, "update_interval_s": scn.update_interval_s,
                    "max_range_m": scn.max_range_m, "duration_s": scn.duration_s, "loss_ref_m": scn.loss_ref_m,
                    "filter": {"method": scn.filter_method, "taps": scn.filter_taps, "steps": scn.frac_steps}},
        "nodes": nodes,
    }


def parse_scenario(path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise MissingRef(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return scenario_from_dict(doc, path.parent)


def serialize_scenario(scn: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scn), indent=2))


def scale_time(doc: dict, factor: float) -> dict:
    """Rescale a scenario document's time axis by ``1/factor`` (sample rate times ``factor``).

    Frequencies are multiplied and times and lengths divided by ``factor`` so
    that every quantity measured in samples or cycles is unchanged:
    delays in samples, Doppler per sample, carrier phase, and the waveforms'
    sample sequences. Velocities are unchanged. Inline scattering locations
    are scaled; element positions are in wavelengths and need no change.
    """
    doc = json.loads(json.dumps(doc))
    g = doc["globals"]
    g["fs_hz"] *= factor
    g["fc_hz"] *= factor
    for key in ("update_interval_s", "max_range_m", "duration_s"):
        g[key] /= factor
    g["loss_ref_m"] = g.get("loss_ref_m", 1.0) / factor
    for nd in doc["nodes"]:
        for w in nd["waypoints"]:
            w["t"] /= factor
            for k in ("x", "y", "z"):
                w[k] /= factor
        for item in nd.get("orientation", []) + nd.get("steer", []):
            item["t"] /= factor
        if "rx_offset" in nd:
            nd["rx_offset"] = [v / factor for v in nd["rx_offset"]]
        if isinstance(nd.get("profile_ref"), dict):
            for p in nd["profile_ref"]["points"]:
                p["location"] = [v / factor for v in p["location"]]
        elif isinstance(nd.get("profile_ref"), str):
            raise ConfigError("time scaling needs inline scattering profiles")
        tx = nd.get("tx")
        if tx:
            _scale_params(tx.get("params", {}), factor)
    return doc


def _scale_params(params: dict, factor: float) -> None:
    for key in list(params):
        if key.endswith("_hz"):
            params[key] *= factor
        elif key.endswith("_s"):
            params[key] /= factor
        elif key == "pulse":
            _scale_params(params[key].get("params", {}), factor)
