"""Model and scenario definitions with JSON loading and validation.

Hands, objects, and scenarios are described by plain JSON documents.
Bundled presets live in the package ``presets`` directory and can be
referenced by name.  Scenario fields may be overridden from the command
line with dotted paths, for example ``gains.kp=0.3``; override paths must
already exist in the document so typos fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from barriergrasp.barrier import ExtendedClassK
from barriergrasp.dynamics import BoxFace, FingerModel, HandModel, ObjectModel

__all__ = [
    "ModelError",
    "ContactSpec",
    "ScenarioConfig",
    "preset_names",
    "load_json",
    "apply_overrides",
    "load_hand",
    "load_object",
    "load_scenario",
]


class ModelError(ValueError):
    """A model or scenario document failed validation."""


def _presets_dir():
    return resources.files("barriergrasp") / "presets"


def preset_names() -> list[str]:
    return sorted(p.name[:-5] for p in _presets_dir().iterdir() if p.name.endswith(".json"))


def load_json(source) -> dict:
    """Load a JSON document from a dict, a file path, or a preset name."""
    if isinstance(source, dict):
        return source
    text = None
    path = Path(str(source))
    if path.suffix == ".json" and path.exists():
        text = path.read_text()
    else:
        candidate = _presets_dir() / f"{source}.json"
        if candidate.is_file():
            text = candidate.read_text()
        elif path.exists():
            text = path.read_text()
    if text is None:
        raise ModelError(f"cannot resolve model source {source!r} "
                         f"(not a file; presets: {', '.join(preset_names())})")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid JSON in {source}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelError(f"top-level JSON value in {source} must be an object")
    return doc


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``path.to.key=json_value`` overrides to a nested document."""
    doc = json.loads(json.dumps(doc))  # deep copy, JSON types only
    for item in overrides or []:
        if "=" not in item:
            raise ModelError(f"override {item!r} must look like path.to.key=value")
        dotted, _, raw = item.partition("=")
        keys = dotted.split(".")
        node = doc
        for k in keys[:-1]:
            if isinstance(node, list):
                k = int(k)
                node = node[k]
            elif isinstance(node, dict) and k in node:
                node = node[k]
            else:
                raise ModelError(f"override path {dotted!r} not found at {k!r}")
        leaf = keys[-1]
        if isinstance(node, list):
            idx = int(leaf)
            if not -len(node) <= idx < len(node):
                raise ModelError(f"override path {dotted!r} index out of range")
        elif not (isinstance(node, dict) and leaf in node):
            raise ModelError(f"override path {dotted!r} not found at {leaf!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw  # bare strings allowed
        if isinstance(node, list):
            node[int(leaf)] = value
        else:
            node[leaf] = value
    return doc


def _as_matrix(value, name: str, shape) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if name.endswith("inertia") or "inerti" in name:
        if arr.ndim == 1 and arr.shape == (3,):
            arr = np.diag(arr)
    if arr.shape != shape:
        raise ModelError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} has non-finite entries")
    return arr


def _check_rotation(R: np.ndarray, name: str):
    if not np.allclose(R.T @ R, np.eye(3), atol=1e-9):
        raise ModelError(f"{name} is not orthonormal")
    if not np.isclose(np.linalg.det(R), 1.0, atol=1e-9):
        raise ModelError(f"{name} is not right-handed (det != +1)")


def load_hand(source) -> HandModel:
    doc = load_json(source)
    if "fingers" not in doc or not doc["fingers"]:
        raise ModelError("hand document needs a non-empty 'fingers' list")
    fingers = []
    for i, fd in enumerate(doc["fingers"]):
        axes = tuple(fd.get("joint_axes", ["x", "y", "x"]))
        if any(a not in ("x", "y", "z") for a in axes):
            raise ModelError(f"finger {i}: joint axes must be 'x', 'y', or 'z'")
        n = len(axes)
        lengths = tuple(float(v) for v in fd["link_lengths"])
        masses = tuple(float(v) for v in fd["link_masses"])
        inertias = tuple(
            _as_matrix(I, f"finger {i} link inertia", (3, 3)) for I in fd["link_inertias"]
        )
        if not len(lengths) == len(masses) == len(inertias) == n:
            raise ModelError(f"finger {i}: per-link lists must all have length {n}")
        if min(lengths) <= 0 or min(masses) <= 0:
            raise ModelError(f"finger {i}: link lengths and masses must be positive")
        for I in inertias:
            if np.any(np.linalg.eigvalsh((I + I.T) / 2) <= 0):
                raise ModelError(f"finger {i}: link inertia must be positive definite")
        R = _as_matrix(fd["base_rotation"], f"finger {i} base rotation", (3, 3))
        _check_rotation(R, f"finger {i} base rotation")
        kwargs = {}
        if "tip_rotation" in fd:
            tipR = _as_matrix(fd["tip_rotation"], f"finger {i} tip rotation", (3, 3))
            _check_rotation(tipR, f"finger {i} tip rotation")
            kwargs["tip_rotation"] = tipR
        radius = float(fd.get("tip_radius", 0.06))
        if radius <= 0:
            raise ModelError(f"finger {i}: tip radius must be positive")
        fingers.append(FingerModel(
            base_position=np.asarray(fd["base_position"], dtype=float),
            base_rotation=R, joint_axes=axes, link_lengths=lengths,
            link_masses=masses, link_inertias=inertias, tip_radius=radius,
            **kwargs,
        ))
    return HandModel(fingers=tuple(fingers))


def load_object(source) -> ObjectModel:
    doc = load_json(source)
    mass = float(doc["mass"])
    if mass <= 0:
        raise ModelError("object mass must be positive")
    inertia = _as_matrix(doc["inertia"], "object inertia", (3, 3))
    if np.any(np.linalg.eigvalsh((inertia + inertia.T) / 2) <= 0):
        raise ModelError("object inertia must be positive definite")
    faces = []
    for i, fd in enumerate(doc.get("faces", [])):
        R = _as_matrix(fd["rotation"], f"face {i} rotation", (3, 3))
        _check_rotation(R, f"face {i} rotation")
        ha, hb = float(fd["half_a"]), float(fd["half_b"])
        if ha <= 0 or hb <= 0:
            raise ModelError(f"face {i}: half extents must be positive")
        faces.append(BoxFace(origin=np.asarray(fd["origin"], dtype=float),
                             rotation=R, half_a=ha, half_b=hb))
    if not faces:
        raise ModelError("object document needs a non-empty 'faces' list")
    return ObjectModel(mass=mass, inertia=inertia, faces=tuple(faces))


def _classk(spec: dict, name: str) -> ExtendedClassK:
    try:
        return ExtendedClassK(kind=spec["kind"], gain=float(spec["gain"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"{name} must be {{'kind': ..., 'gain': ...}}: {exc}") from exc


@dataclass(frozen=True)
class ContactSpec:
    finger: int
    face: int
    xi_co: np.ndarray  # target object-face chart coordinates


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    hand: HandModel
    obj: ObjectModel
    contacts: tuple[ContactSpec, ...]
    duration: float
    sample_time: float
    substeps: int
    gravity: np.ndarray
    mu: float
    mu_hat: float
    pyramid_sides: int
    epsilon: float
    nu_hat: float
    alpha1: ExtendedClassK
    alpha2: ExtendedClassK
    q_min: np.ndarray
    q_max: np.ndarray
    delta_q: float
    beta_q: float
    delta_r: float
    beta_r: float
    contact_box: np.ndarray  # (a_min, a_max, b_min, b_max) on the fingertip
    torque_limit: float
    kp: float
    ki: float
    kd: float
    kf: float
    integral_clamp: float
    reference_offset: np.ndarray
    p_o0: np.ndarray
    euler_o0: np.ndarray
    mass_error: float
    inertia_error: float
    filter_enabled: bool
    tau_e: dict = field(default_factory=dict)
    w_e: dict = field(default_factory=dict)
    raw: dict = field(repr=False, compare=False, default_factory=dict)


def _disturbance(doc: dict, key: str, dim: int) -> dict:
    spec = doc.get(key)
    if spec is None:
        return {"kind": "constant", "value": [0.0] * dim}
    kind = spec.get("kind", "constant")
    if kind == "constant":
        value = np.asarray(spec["value"], dtype=float)
        if value.shape != (dim,):
            raise ModelError(f"{key} constant value must have length {dim}")
        return {"kind": "constant", "value": value.tolist()}
    if kind == "sine":
        amp = np.asarray(spec["amplitude"], dtype=float)
        if amp.shape != (dim,):
            raise ModelError(f"{key} sine amplitude must have length {dim}")
        return {"kind": "sine", "amplitude": amp.tolist(),
                "frequency": float(spec["frequency"]),
                "phase": float(spec.get("phase", 0.0))}
    raise ModelError(f"{key} kind must be 'constant' or 'sine'")


def load_scenario(source, overrides=None) -> ScenarioConfig:
    doc = apply_overrides(load_json(source), overrides)
    if int(doc.get("schema", 1)) != 1:
        raise ModelError(f"unsupported scenario schema {doc.get('schema')!r}")
    hand = load_hand(doc["hand"])
    obj = load_object(doc["object"])

    contacts = []
    for cd in doc["contacts"]:
        fi, fa = int(cd["finger"]), int(cd["face"])
        if not 0 <= fi < hand.n_fingers:
            raise ModelError(f"contact finger index {fi} out of range")
        if not 0 <= fa < len(obj.faces):
            raise ModelError(f"contact face index {fa} out of range")
        xi = np.asarray(cd["xi_co"], dtype=float)
        if not obj.faces[fa].patch.in_domain(xi):
            raise ModelError(f"contact target {xi.tolist()} outside face {fa} extents")
        contacts.append(ContactSpec(finger=fi, face=fa, xi_co=xi))
    if len({c.finger for c in contacts}) != len(contacts):
        raise ModelError("each finger may appear in at most one contact")

    jl = doc["joint_limits"]
    q_min = np.asarray(jl["q_min"], dtype=float)
    q_max = np.asarray(jl["q_max"], dtype=float)
    if q_min.shape != (hand.dof,) or q_max.shape != (hand.dof,):
        raise ModelError(f"joint limits must have length {hand.dof}")
    if np.any(q_min >= q_max):
        raise ModelError("q_min must be strictly below q_max")

    rl = doc["rolling_limits"]
    box = np.asarray(rl["contact_box"], dtype=float)
    if box.shape != (4,) or box[0] >= box[1] or box[2] >= box[3]:
        raise ModelError("contact_box must be (a_min, a_max, b_min, b_max) with min < max")

    gains = doc["gains"]
    pose = doc.get("object_pose", {})
    T = float(doc["sample_time"])
    duration = float(doc["duration"])
    substeps = int(doc.get("substeps", 10))
    if T <= 0 or duration <= 0 or substeps < 1:
        raise ModelError("sample_time, duration must be positive; substeps >= 1")
    mu, mu_hat = float(doc["mu"]), float(doc["mu_hat"])
    if not 0 < mu_hat <= mu:
        raise ModelError("need 0 < mu_hat <= mu")
    sides = int(doc.get("pyramid_sides", 4))
    if sides < 3:
        raise ModelError("friction pyramid needs at least 3 sides")

    return ScenarioConfig(
        name=str(doc.get("name", "scenario")),
        hand=hand, obj=obj, contacts=tuple(contacts),
        duration=duration, sample_time=T, substeps=substeps,
        gravity=np.asarray(doc.get("gravity", [0.0, 0.0, 0.0]), dtype=float),
        mu=mu, mu_hat=mu_hat, pyramid_sides=sides,
        epsilon=float(doc["epsilon"]), nu_hat=float(doc["nu_hat"]),
        alpha1=_classk(doc["alpha1"], "alpha1"),
        alpha2=_classk(doc["alpha2"], "alpha2"),
        q_min=q_min, q_max=q_max,
        delta_q=float(jl["delta"]), beta_q=float(jl["beta"]),
        delta_r=float(rl["delta"]), beta_r=float(rl["beta"]),
        contact_box=box,
        torque_limit=float(doc["torque_limit"]),
        kp=float(gains["kp"]), ki=float(gains["ki"]),
        kd=float(gains["kd"]), kf=float(gains["kf"]),
        integral_clamp=float(doc.get("integral_clamp", 3.0)),
        reference_offset=np.asarray(doc["reference_offset"], dtype=float),
        p_o0=np.asarray(pose.get("position", [0.0, 0.0, 0.0]), dtype=float),
        euler_o0=np.asarray(pose.get("euler", [0.0, 0.0, 0.0]), dtype=float),
        mass_error=float(doc.get("mass_error", 0.0)),
        inertia_error=float(doc.get("inertia_error", 0.0)),
        filter_enabled=bool(doc.get("filter_enabled", True)),
        tau_e=_disturbance(doc, "tau_e", hand.dof),
        w_e=_disturbance(doc, "w_e", 6),
        raw=doc,
    )
