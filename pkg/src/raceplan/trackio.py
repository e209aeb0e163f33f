"""Race-track description files: parsing, validation, margin application,
waypoint-mode conversion and multi-lap concatenation.

The on-disk format is YAML with a ``schema_version`` key.  All lengths are
meters and masses kilograms; inertia defaults to g*m^2 (the common datasheet
unit) with an explicit ``inertia_units`` key to override.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import yaml

from .errors import ParseError, ValidationError
from .gates import (
    BallGate, Gate, GateSequence, PolytopeGate, gate_center, shrink_margin,
)
from .model import QuadParams

SCHEMA_VERSION = 1

_QUAD_KEYS = {
    "mass", "arm_length", "inertia", "inertia_units", "torque_const",
    "f_min", "f_max", "omega_max",
}
_GATE_KEYS = {"type", "center", "radius", "vertices", "tunnel"}
_OPTION_KEYS = {"margin", "laps", "mode", "waypoint_tolerance"}
_TOP_KEYS = {"schema_version", "quad", "start", "finish", "gates", "options"}


@dataclass(frozen=True)
class TrackOptions:
    margin: float = 0.0
    laps: int = 1
    mode: str = "togt"
    waypoint_tolerance: float = 0.3

    def __post_init__(self):
        if self.mode not in ("togt", "togt-wp"):
            raise ValidationError(f"options.mode: unknown mode {self.mode!r}")
        if self.laps < 1:
            raise ValidationError("options.laps must be >= 1")
        if self.margin < 0:
            raise ValidationError("options.margin must be >= 0")
        if self.waypoint_tolerance <= 0:
            raise ValidationError("options.waypoint_tolerance must be > 0")


@dataclass(frozen=True)
class TrackFile:
    quad: QuadParams
    start: np.ndarray
    finish: np.ndarray
    gates: tuple            # of Gate
    tunnel_labels: tuple    # per-gate str | None
    options: TrackOptions


def _require(mapping, key, context):
    if key not in mapping:
        raise ValidationError(f"{context}: missing required key {key!r}")
    return mapping[key]


def _check_keys(mapping, allowed, context, strict):
    if strict:
        unknown = set(mapping) - allowed
        if unknown:
            raise ValidationError(
                f"{context}: unknown keys {sorted(unknown)} (strict mode)"
            )


def _vec3(value, context):
    try:
        v = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{context}: not a numeric vector") from exc
    if v.shape != (3,):
        raise ValidationError(f"{context}: expected a 3-vector")
    return v


def _parse_quad(node, strict) -> QuadParams:
    if isinstance(node, str):
        presets = {"quad_a": QuadParams.quad_a, "quad_b": QuadParams.quad_b}
        if node not in presets:
            raise ValidationError(f"quad: unknown preset {node!r}")
        return presets[node]()
    if not isinstance(node, dict):
        raise ValidationError("quad: expected a preset name or a mapping")
    _check_keys(node, _QUAD_KEYS, "quad", strict)
    units = node.get("inertia_units", "g_m2")
    if units not in ("g_m2", "kg_m2"):
        raise ValidationError(f"quad.inertia_units: unknown unit {units!r}")
    inertia = np.asarray(_require(node, "inertia", "quad"), dtype=float)
    if units == "g_m2":
        inertia = inertia * 1e-3
    try:
        return QuadParams(
            mass=float(_require(node, "mass", "quad")),
            arm_length=float(_require(node, "arm_length", "quad")),
            inertia_diag=inertia,
            torque_const=float(_require(node, "torque_const", "quad")),
            f_min=float(node.get("f_min", 0.0)),
            f_max=float(_require(node, "f_max", "quad")),
            omega_max=_vec3(_require(node, "omega_max", "quad"), "quad.omega_max"),
        )
    except ValueError as exc:
        raise ValidationError(f"quad: {exc}") from exc


def _parse_gate(node, index, strict) -> tuple:
    ctx = f"gates[{index}]"
    if not isinstance(node, dict):
        raise ValidationError(f"{ctx}: expected a mapping")
    _check_keys(node, _GATE_KEYS, ctx, strict)
    gtype = _require(node, "type", ctx)
    tunnel = node.get("tunnel")
    try:
        if gtype == "ball":
            gate = BallGate(
                center=_vec3(_require(node, "center", ctx), f"{ctx}.center"),
                radius=float(_require(node, "radius", ctx)),
            )
        elif gtype in ("polygon", "polyhedron"):
            verts = np.asarray(_require(node, "vertices", ctx), dtype=float)
            gate = PolytopeGate.from_vertices(verts, planar=(gtype == "polygon"))
        else:
            raise ValidationError(f"{ctx}.type: unknown gate type {gtype!r}")
    except ValidationError as exc:
        raise ValidationError(f"{ctx}: {exc}") from exc
    return gate, tunnel


def loads(text: str, name: str = "<string>", strict: bool = False) -> TrackFile:
    """Parse a track document from a string."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"{name}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{name}: track document must be a mapping")
    _check_keys(doc, _TOP_KEYS, "track", strict)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(
            f"schema_version: expected {SCHEMA_VERSION}, got {version!r}"
        )
    quad = _parse_quad(_require(doc, "quad", "track"), strict)
    start = _vec3(_require(doc, "start", "track"), "start")
    finish = _vec3(_require(doc, "finish", "track"), "finish")
    gate_nodes = _require(doc, "gates", "track")
    if not isinstance(gate_nodes, list) or not gate_nodes:
        raise ValidationError("gates: must be a nonempty list")
    parsed = [_parse_gate(g, i, strict) for i, g in enumerate(gate_nodes)]
    opt_node = doc.get("options", {}) or {}
    _check_keys(opt_node, _OPTION_KEYS, "options", strict)
    options = TrackOptions(**{k: opt_node[k] for k in _OPTION_KEYS if k in opt_node})
    return TrackFile(
        quad=quad,
        start=start,
        finish=finish,
        gates=tuple(g for g, _ in parsed),
        tunnel_labels=tuple(t for _, t in parsed),
        options=options,
    )


def parse(path, strict: bool = False) -> TrackFile:
    """Parse and validate a track file."""
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return loads(text, name=str(path), strict=strict)


def _gate_node(gate: Gate, tunnel) -> dict:
    if isinstance(gate, BallGate):
        node = {
            "type": "ball",
            "center": [float(x) for x in gate.center],
            "radius": float(gate.radius),
        }
    else:
        node = {
            "type": "polygon" if gate.is_planar else "polyhedron",
            "vertices": [[float(x) for x in v] for v in gate.vertices],
        }
    if tunnel is not None:
        node["tunnel"] = tunnel
    return node


def serialize(track: TrackFile) -> str:
    """Inverse of :func:`loads` on the structured representation."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "quad": {
            "mass": track.quad.mass,
            "arm_length": track.quad.arm_length,
            "inertia": [float(x) for x in track.quad.inertia_diag],
            "inertia_units": "kg_m2",
            "torque_const": track.quad.torque_const,
            "f_min": track.quad.f_min,
            "f_max": track.quad.f_max,
            "omega_max": [float(x) for x in track.quad.omega_max],
        },
        "start": [float(x) for x in track.start],
        "finish": [float(x) for x in track.finish],
        "gates": [
            _gate_node(g, t) for g, t in zip(track.gates, track.tunnel_labels)
        ],
        "options": {
            "margin": track.options.margin,
            "laps": track.options.laps,
            "mode": track.options.mode,
            "waypoint_tolerance": track.options.waypoint_tolerance,
        },
    }
    return yaml.safe_dump(doc, sort_keys=False)


def to_waypoint_mode(track: TrackFile) -> TrackFile:
    """Replace every gate by a small ball at its center/centroid."""
    tol = track.options.waypoint_tolerance
    new_gates = tuple(
        BallGate(center=gate_center(g), radius=tol) for g in track.gates
    )
    return replace(track, gates=new_gates)


def _tunnel_groups(labels) -> tuple:
    groups = []
    current = []
    current_label = None
    for i, label in enumerate(labels):
        if label is not None and label == current_label:
            current.append(i)
        else:
            if len(current) > 1:
                groups.append(tuple(current))
            current = [i] if label is not None else []
            current_label = label
    if len(current) > 1:
        groups.append(tuple(current))
    return tuple(groups)


def concatenate_laps(track: TrackFile, laps: int) -> GateSequence:
    """Repeat the gate list verbatim for a multi-lap problem."""
    if laps < 1:
        raise ValidationError("laps must be >= 1")
    gates = track.gates * laps
    labels = []
    for lap in range(laps):
        labels.extend(
            None if t is None else f"{t}#{lap}" for t in track.tunnel_labels
        )
    return GateSequence(gates=gates, tunnel_groups=_tunnel_groups(labels))


def build_sequence(track: TrackFile, mode: str | None = None,
                   margin: float | None = None,
                   laps: int | None = None) -> GateSequence:
    """Apply mode conversion, safety margin and lap concatenation.

    Waypoint mode replaces gates by tolerance balls at the original centers
    (margins do not apply); gate mode shrinks each gate by the margin.
    """
    mode = mode if mode is not None else track.options.mode
    margin = margin if margin is not None else track.options.margin
    laps = laps if laps is not None else track.options.laps
    if mode == "togt-wp":
        track = to_waypoint_mode(track)
    elif margin > 0:
        track = replace(
            track, gates=tuple(shrink_margin(g, margin) for g in track.gates)
        )
    return concatenate_laps(track, laps)
