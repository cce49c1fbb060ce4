"""Scenario files: JSON schema, loading, and serialization.

A scenario document describes lanes (centerline plus width or explicit
boundaries), conflict annotations, the ego and other vehicles with their
routes, the simulation span, and configuration overrides. Unknown keys are
rejected by schema validation before anything is built.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from .road import Conflict, Lane, RoadMap
from .simulate import Scenario, ScenarioVehicle

_POINTS = {
    "type": "array",
    "minItems": 2,
    "items": {
        "type": "array",
        "minItems": 2,
        "maxItems": 2,
        "items": {"type": "number"},
    },
}

_LANE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["id", "centerline"],
    "properties": {
        "id": {"type": "string"},
        "centerline": _POINTS,
        "width": {"type": "number", "exclusiveMinimum": 0},
        "boundary_left": _POINTS,
        "boundary_right": _POINTS,
        "speed_limit": {"type": "number", "exclusiveMinimum": 0},
        "type": {
            "type": "string",
            "enum": ["normal", "roundabout", "intersection_approach"],
        },
        "successors": {"type": "array", "items": {"type": "string"}},
        "left_neighbor": {"type": ["string", "null"]},
        "right_neighbor": {"type": ["string", "null"]},
    },
}

_VEHICLE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["id", "lane", "s0", "v0"],
    "properties": {
        "id": {"type": "string"},
        "lane": {"type": "string"},
        "s0": {"type": "number", "minimum": 0},
        "v0": {"type": "number", "minimum": 0},
        "route": {"type": "array", "items": {"type": "string"}},
        "length": {"type": "number", "exclusiveMinimum": 0},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "v_target": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "stationary": {"type": "boolean"},
    },
}

_EGO = {
    "type": "object",
    "additionalProperties": False,
    "required": ["lane", "s0", "v0"],
    "properties": {
        "lane": {"type": "string"},
        "s0": {"type": "number", "minimum": 0},
        "v0": {"type": "number", "minimum": 0},
        "route": {"type": "array", "items": {"type": "string"}},
    },
}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "lanes", "ego", "sim"],
    "properties": {
        "name": {"type": "string"},
        "lanes": {"type": "array", "minItems": 1, "items": _LANE},
        "conflicts": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["lane_a", "s_a", "lane_b", "s_b"],
                "properties": {
                    "lane_a": {"type": "string"},
                    "s_a": {"type": "number", "minimum": 0},
                    "lane_b": {"type": "string"},
                    "s_b": {"type": "number", "minimum": 0},
                },
            },
        },
        "ego": _EGO,
        "vehicles": {"type": "array", "items": _VEHICLE},
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "required": ["duration"],
            "properties": {
                "duration": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer"},
            },
        },
        "config": {"type": "object"},
    },
}


class ScenarioFormatError(ValueError):
    """Schema violation with JSON-path context."""


def validate_document(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            path = "$" + "".join(
                f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path
            )
            lines.append(f"{path}: {err.message}")
        raise ScenarioFormatError("\n".join(lines))


def scenario_from_dict(doc: dict) -> Scenario:
    validate_document(doc)
    lanes = []
    for entry in doc["lanes"]:
        if "width" not in entry and (
            "boundary_left" not in entry or "boundary_right" not in entry
        ):
            raise ScenarioFormatError(
                f"lane {entry['id']}: needs width or both boundaries"
            )
        lanes.append(
            Lane.build(
                entry["id"],
                entry["centerline"],
                width=entry.get("width"),
                boundary_left=entry.get("boundary_left"),
                boundary_right=entry.get("boundary_right"),
                speed_limit=entry.get("speed_limit", 13.89),
                successors=tuple(entry.get("successors", ())),
                lane_type=entry.get("type", "normal"),
                left_neighbor=entry.get("left_neighbor"),
                right_neighbor=entry.get("right_neighbor"),
            )
        )
    conflicts = [
        Conflict(c["lane_a"], c["s_a"], c["lane_b"], c["s_b"])
        for c in doc.get("conflicts", [])
    ]
    road = RoadMap(lanes, conflicts)

    def vehicle(entry, vid):
        return ScenarioVehicle(
            vehicle_id=vid,
            lane_id=entry["lane"],
            s0=entry["s0"],
            v0=entry["v0"],
            route=list(entry.get("route", [entry["lane"]])),
            length=entry.get("length", 4.5),
            width=entry.get("width", 1.9),
            v_target=entry.get("v_target"),
            stationary=entry.get("stationary", False),
        )

    return Scenario(
        name=doc["name"],
        road=road,
        ego=vehicle(doc["ego"], "ego"),
        vehicles=[vehicle(v, v["id"]) for v in doc.get("vehicles", [])],
        duration=doc["sim"]["duration"],
        seed=doc["sim"].get("seed", 0),
        config_overrides=doc.get("config", {}),
    )


def load_scenario(path) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"invalid JSON: {exc}") from exc
    return scenario_from_dict(doc)


def scenario_to_dict(scenario: Scenario) -> dict:
    """Serialize a scenario back to the document format."""
    lanes = []
    for lane in scenario.road.lanes.values():
        lanes.append(
            {
                "id": lane.lane_id,
                "centerline": [[float(x), float(y)] for x, y in lane.centerline.points],
                "boundary_left": [
                    [float(x), float(y)] for x, y in lane.boundary_left.points
                ],
                "boundary_right": [
                    [float(x), float(y)] for x, y in lane.boundary_right.points
                ],
                "speed_limit": lane.speed_limit,
                "type": lane.lane_type,
                "successors": list(lane.successors),
                "left_neighbor": lane.left_neighbor,
                "right_neighbor": lane.right_neighbor,
            }
        )
    conflicts = [
        {"lane_a": c.lane_a, "s_a": c.s_a, "lane_b": c.lane_b, "s_b": c.s_b}
        for c in scenario.road.conflicts
    ]

    def vehicle(sv: ScenarioVehicle, with_id: bool):
        out = {
            "lane": sv.lane_id,
            "s0": sv.s0,
            "v0": sv.v0,
            "route": list(sv.route),
        }
        if with_id:
            out["id"] = sv.vehicle_id
            out["length"] = sv.length
            out["width"] = sv.width
            if sv.v_target is not None:
                out["v_target"] = sv.v_target
            if sv.stationary:
                out["stationary"] = True
        return out

    return {
        "name": scenario.name,
        "lanes": lanes,
        "conflicts": conflicts,
        "ego": vehicle(scenario.ego, False),
        "vehicles": [vehicle(v, True) for v in scenario.vehicles],
        "sim": {"duration": scenario.duration, "seed": scenario.seed},
        "config": scenario.config_overrides,
    }


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(
        json.dumps(scenario_to_dict(scenario), indent=2) + "\n", encoding="utf-8"
    )
