"""Domain types, scenario validation and scenario files.

Units are fixed across the package: micrometres, seconds, um^2/s and um/s.
Scenario files are JSON; unit-suffixed alternatives such as
``mean_velocity_cm_s`` or ``length_mm`` are converted on parse, so the
in-memory scenario always carries the canonical ``_um`` / ``_s`` fields.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Iterable

EMISSION_OFFSET_UM = 0.1


class EndCapPolicy(str, enum.Enum):
    REFLECT_BOTH = "ReflectBoth"
    ABSORB_FAR_END = "AbsorbFarEnd"
    ABSORB_BOTH = "AbsorbBoth"


class FlowKind(str, enum.Enum):
    NONE = "None"
    UNIFORM = "Uniform"
    POISEUILLE = "Poiseuille"


class WallKind(str, enum.Enum):
    REFLECTIVE = "Reflective"
    PERMEABLE = "Permeable"


class ParticleState(str, enum.Enum):
    ALIVE = "Alive"
    ABSORBED = "Absorbed"
    LEAKED = "Leaked"
    DEGRADED = "Degraded"
    EXITED_END = "ExitedEnd"


# integer codes used by the engine
FATE_CODES = {
    ParticleState.ALIVE: 0,
    ParticleState.ABSORBED: 1,
    ParticleState.LEAKED: 2,
    ParticleState.DEGRADED: 3,
    ParticleState.EXITED_END: 4,
}


@dataclass(frozen=True)
class VesselGeometry:
    radius_um: float
    length_um: float
    end_cap_policy: EndCapPolicy = EndCapPolicy.REFLECT_BOTH


@dataclass(frozen=True)
class FlowProfile:
    kind: FlowKind = FlowKind.NONE
    mean_velocity_um_s: float = 0.0


@dataclass(frozen=True)
class MoleculeSpecies:
    species_id: int
    diffusion_um2_s: float
    degradation_rate_per_s: float = 0.0


@dataclass(frozen=True)
class WallModel:
    kind: WallKind = WallKind.REFLECTIVE
    leak_probability: float = 0.0


@dataclass(frozen=True)
class ValveSpec:
    axial_um: float
    period_s: float
    open_fraction: float
    phase_s: float = 0.0


@dataclass(frozen=True)
class TxPosition:
    """Point transmitter on the duct surface at ``(axial, angle)``."""

    axial_um: float
    angle_rad: float = 0.0


@dataclass(frozen=True)
class ReceiverSpec:
    center_axial_um: float
    wall_anchor_angle_rad: float
    radius_um: float

    def center(self, duct_radius_um: float) -> tuple[float, float, float]:
        return (
            self.center_axial_um,
            duct_radius_um * math.cos(self.wall_anchor_angle_rad),
            duct_radius_um * math.sin(self.wall_anchor_angle_rad),
        )


@dataclass
class Particle:
    axial_um: float
    lateral_y_um: float
    lateral_z_um: float
    species_id: int = 0
    state: ParticleState = ParticleState.ALIVE
    event_time_s: float | None = None

    @property
    def alive(self) -> bool:
        return self.state is ParticleState.ALIVE

    def terminate(self, state: ParticleState, time_s: float) -> None:
        if not self.alive:
            raise RuntimeError(f"particle already terminal ({self.state.value})")
        if state is ParticleState.ALIVE:
            raise ValueError("terminate() needs a terminal state")
        if time_s < 0:
            raise ValueError("event time must be non-negative")
        self.state = state
        self.event_time_s = float(time_s)


@dataclass(frozen=True)
class SimulationScenario:
    geometry: VesselGeometry
    flow: FlowProfile
    wall: WallModel
    species: tuple[MoleculeSpecies, ...]
    tx_position: TxPosition
    receivers: tuple[ReceiverSpec, ...]
    valves: tuple[ValveSpec, ...] = ()
    molecules_per_emission: int = 100_000
    time_step_s: float = 1e-3
    end_time_s: float = 10.0
    seed: int = 0

    def species_by_id(self, species_id: int) -> MoleculeSpecies:
        for sp in self.species:
            if sp.species_id == species_id:
                return sp
        raise KeyError(f"no species with id {species_id}")

    def replace(self, **changes: Any) -> "SimulationScenario":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return _to_plain(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationScenario":
        return _scenario_from_dict(normalize_units(data))

    @classmethod
    def from_json(cls, text: str) -> "SimulationScenario":
        return cls.from_dict(json.loads(text))


# ----------------------------------------------------------------- validation


class ScenarioError(ValueError):
    """Raised when a scenario violates one or more invariants.

    ``violations`` lists every problem found, as ``Violation`` records with a
    dotted field path, so a caller can report all of them at once.
    """

    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        super().__init__("; ".join(f"{v.kind} at {v.path}: {v.message}" for v in violations))

    @property
    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


@dataclass(frozen=True)
class Violation:
    kind: str  # InvalidGeometry | StepTooCoarse | BadPlacement | InvalidValue
    path: str
    message: str


def resolution_limit_um(scenario: SimulationScenario) -> float | None:
    radii = [rx.radius_um for rx in scenario.receivers]
    return min(radii) / 4.0 if radii else None


def scenario_violations(scenario: SimulationScenario) -> list[Violation]:
    out: list[Violation] = []
    add = lambda kind, path, msg: out.append(Violation(kind, path, msg))  # noqa: E731

    g = scenario.geometry
    if not g.radius_um > 0:
        add("InvalidGeometry", "geometry.radius_um", f"must be > 0, got {g.radius_um}")
    if not g.length_um > 0:
        add("InvalidGeometry", "geometry.length_um", f"must be > 0, got {g.length_um}")
    for i, rx in enumerate(scenario.receivers):
        if g.length_um <= 2 * rx.radius_um:
            add("InvalidGeometry", "geometry.length_um", f"must exceed twice receiver {i} radius")

    f = scenario.flow
    if f.mean_velocity_um_s < 0:
        add("InvalidValue", "flow.mean_velocity_um_s", "must be >= 0")
    if f.kind is FlowKind.NONE and f.mean_velocity_um_s != 0:
        add("InvalidValue", "flow.mean_velocity_um_s", "must be 0 when flow kind is None")

    w = scenario.wall
    if not 0.0 <= w.leak_probability <= 1.0:
        add("InvalidValue", "wall.leak_probability", "must lie in [0, 1]")
    if w.kind is WallKind.REFLECTIVE and w.leak_probability != 0:
        add("InvalidValue", "wall.leak_probability", "must be 0 for a reflective wall")

    for i, v in enumerate(scenario.valves):
        p = f"valves[{i}]"
        if not 0 < v.axial_um < g.length_um:
            add("BadPlacement", f"{p}.axial_um", "valve plane must lie strictly inside the duct")
        if not v.period_s > 0:
            add("InvalidValue", f"{p}.period_s", "must be > 0")
        if not 0.0 <= v.open_fraction <= 1.0:
            add("InvalidValue", f"{p}.open_fraction", "must lie in [0, 1]")

    if not scenario.species:
        add("InvalidValue", "species", "at least one species is required")
    ids = [sp.species_id for sp in scenario.species]
    if len(set(ids)) != len(ids):
        add("InvalidValue", "species", "species ids must be distinct")
    for i, sp in enumerate(scenario.species):
        if not sp.diffusion_um2_s > 0:
            add("InvalidValue", f"species[{i}].diffusion_um2_s", "must be > 0")
        if sp.degradation_rate_per_s < 0:
            add("InvalidValue", f"species[{i}].degradation_rate_per_s", "must be >= 0")

    tx = scenario.tx_position
    if not 0 <= tx.axial_um <= g.length_um:
        add("BadPlacement", "tx_position.axial_um", "transmitter must lie on the duct surface within [0, L]")
    for i, rx in enumerate(scenario.receivers):
        p = f"receivers[{i}]"
        if not rx.radius_um > 0:
            add("InvalidValue", f"{p}.radius_um", "must be > 0")
        if g.radius_um > 0 and rx.radius_um >= g.radius_um:
            add("BadPlacement", f"{p}.radius_um", "receiver must be smaller than the duct radius")
        if not 0 <= rx.center_axial_um <= g.length_um:
            add("BadPlacement", f"{p}.center_axial_um", "receiver centre must lie on the duct surface within [0, L]")

    if scenario.molecules_per_emission < 0:
        add("InvalidValue", "molecules_per_emission", "must be >= 0")
    dt = scenario.time_step_s
    if not dt > 0:
        add("InvalidValue", "time_step_s", "must be > 0")
    if not scenario.end_time_s >= dt:
        add("InvalidValue", "end_time_s", "must be >= time_step_s")

    limit = resolution_limit_um(scenario)
    if limit is not None and dt > 0:
        for i, sp in enumerate(scenario.species):
            if sp.diffusion_um2_s > 0:
                step = math.sqrt(2.0 * sp.diffusion_um2_s * dt)
                if step > limit:
                    add(
                        "StepTooCoarse",
                        "time_step_s",
                        f"diffusive step {step:.3f} um of species {sp.species_id} exceeds receiver radius / 4 = {limit:.3f} um",
                    )
    return out


def validate_scenario(scenario: SimulationScenario) -> SimulationScenario:
    problems = scenario_violations(scenario)
    if problems:
        raise ScenarioError(problems)
    return scenario


# ------------------------------------------------------------------- file I/O

# (suffix, canonical suffix, factor) -- longer suffixes first
_UNIT_ALIASES = (
    ("_cm2_s", "_um2_s", 1e8),
    ("_mm2_s", "_um2_s", 1e6),
    ("_cm_s", "_um_s", 1e4),
    ("_mm_s", "_um_s", 1e3),
    ("_cm", "_um", 1e4),
    ("_mm", "_um", 1e3),
    ("_ms", "_s", 1e-3),
)


def normalize_units(data: Any) -> Any:
    """Recursively rewrite unit-suffixed keys to the canonical units."""
    if isinstance(data, list):
        return [normalize_units(x) for x in data]
    if not isinstance(data, dict):
        return data
    out = {}
    for key, value in data.items():
        value = normalize_units(value)
        for suffix, canonical, factor in _UNIT_ALIASES:
            if key.endswith(suffix) and isinstance(value, (int, float)) and not isinstance(value, bool):
                key = key[: -len(suffix)] + canonical
                value = value * factor
                break
        out[key] = value
    return out


def _to_plain(obj: Any) -> Any:
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def _f(d: dict, key: str, default: Any = None) -> float:
    if key not in d:
        if default is None:
            raise KeyError(key)
        return float(default)
    return float(d[key])


def _scenario_from_dict(d: dict) -> SimulationScenario:
    g = d["geometry"]
    fl = d.get("flow", {})
    w = d.get("wall", {})
    return SimulationScenario(
        geometry=VesselGeometry(
            radius_um=_f(g, "radius_um"),
            length_um=_f(g, "length_um"),
            end_cap_policy=EndCapPolicy(g.get("end_cap_policy", EndCapPolicy.REFLECT_BOTH.value)),
        ),
        flow=FlowProfile(
            kind=FlowKind(fl.get("kind", "None")),
            mean_velocity_um_s=_f(fl, "mean_velocity_um_s", 0.0),
        ),
        wall=WallModel(kind=WallKind(w.get("kind", "Reflective")), leak_probability=_f(w, "leak_probability", 0.0)),
        valves=tuple(
            ValveSpec(
                axial_um=_f(v, "axial_um"),
                period_s=_f(v, "period_s"),
                open_fraction=_f(v, "open_fraction"),
                phase_s=_f(v, "phase_s", 0.0),
            )
            for v in d.get("valves", [])
        ),
        species=tuple(
            MoleculeSpecies(
                species_id=int(s.get("species_id", i)),
                diffusion_um2_s=_f(s, "diffusion_um2_s"),
                degradation_rate_per_s=_f(s, "degradation_rate_per_s", 0.0),
            )
            for i, s in enumerate(d["species"])
        ),
        tx_position=TxPosition(
            axial_um=_f(d["tx_position"], "axial_um"),
            angle_rad=_f(d["tx_position"], "angle_rad", 0.0),
        ),
        receivers=tuple(
            ReceiverSpec(
                center_axial_um=_f(r, "center_axial_um"),
                wall_anchor_angle_rad=_f(r, "wall_anchor_angle_rad", 0.0),
                radius_um=_f(r, "radius_um"),
            )
            for r in d.get("receivers", [])
        ),
        molecules_per_emission=int(d.get("molecules_per_emission", 100_000)),
        time_step_s=_f(d, "time_step_s", 1e-3),
        end_time_s=_f(d, "end_time_s", 10.0),
        seed=int(d.get("seed", 0)),
    )


def load_scenario(path: str | Path) -> SimulationScenario:
    return SimulationScenario.from_json(Path(path).read_text())


def save_scenario(scenario: SimulationScenario, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(scenario.to_json())
    return path


# -------------------------------------------------------------------- presets


def vein_preset() -> SimulationScenario:
    """Vein parameters: D=670 um^2/s, v=0.5 cm/s, L=2000 um, R=30 um, a=5 um."""
    return SimulationScenario(
        geometry=VesselGeometry(radius_um=30.0, length_um=2000.0, end_cap_policy=EndCapPolicy.REFLECT_BOTH),
        flow=FlowProfile(FlowKind.UNIFORM, 5000.0),
        wall=WallModel(WallKind.REFLECTIVE, 0.0),
        species=(MoleculeSpecies(0, 670.0, 0.0),),
        tx_position=TxPosition(0.0, 0.0),
        receivers=(ReceiverSpec(1995.0, 0.0, 5.0),),
        molecules_per_emission=100_000,
        time_step_s=1e-3,
        end_time_s=10.0,
        seed=1,
    )


def capillary_preset() -> SimulationScenario:
    """Illustrative capillary: narrow, slow Poiseuille flow, leaky wall."""
    return SimulationScenario(
        geometry=VesselGeometry(radius_um=5.0, length_um=500.0, end_cap_policy=EndCapPolicy.ABSORB_FAR_END),
        flow=FlowProfile(FlowKind.POISEUILLE, 1000.0),
        wall=WallModel(WallKind.PERMEABLE, 0.05),
        species=(MoleculeSpecies(0, 100.0, 0.0),),
        tx_position=TxPosition(0.0, 0.0),
        receivers=(ReceiverSpec(498.0, 0.0, 2.0),),
        molecules_per_emission=10_000,
        time_step_s=1e-4,
        end_time_s=2.0,
        seed=1,
    )


def artery_distal_preset() -> SimulationScenario:
    """Illustrative small distal artery: wide duct, uniform flow, reflective wall."""
    return SimulationScenario(
        geometry=VesselGeometry(radius_um=100.0, length_um=5000.0, end_cap_policy=EndCapPolicy.ABSORB_FAR_END),
        flow=FlowProfile(FlowKind.UNIFORM, 10000.0),
        wall=WallModel(WallKind.REFLECTIVE, 0.0),
        species=(MoleculeSpecies(0, 670.0, 0.0),),
        tx_position=TxPosition(0.0, 0.0),
        receivers=(ReceiverSpec(4995.0, 0.0, 5.0),),
        molecules_per_emission=10_000,
        time_step_s=1e-3,
        end_time_s=2.0,
        seed=1,
    )


PRESETS = {
    "vein": vein_preset,
    "capillary": capillary_preset,
    "artery-distal": artery_distal_preset,
}


def preset(name: str) -> SimulationScenario:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# -------------------------------------------------------------- path updates


def set_parameter(scenario: SimulationScenario, path: str, value: Any) -> SimulationScenario:
    """Return a copy with the scalar at dotted ``path`` replaced.

    Numeric fields take numbers; enumeration fields (``flow.kind``) take
    their string value.

    Paths address the JSON layout, e.g. ``wall.leak_probability`` or
    ``species.0.degradation_rate_per_s``.  A bare field name that occurs
    exactly once in the scenario (``leak_probability``) is also accepted.
    A list or object field (``valves``, ``receivers``) can be replaced
    wholesale by a value of the same JSON shape.
    """
    data = scenario.to_dict()
    keys = _resolve_path(data, path, structured=isinstance(value, (dict, list)))
    node = data
    for k in keys[:-1]:
        node = node[int(k)] if isinstance(node, list) else node[k]
    last = keys[-1]
    old = node[int(last)] if isinstance(node, list) else node.get(last)
    if isinstance(old, (dict, list)) or isinstance(value, (dict, list)):
        if type(old) is not type(value):
            raise UnknownParameterPath(f"{path} does not take a {type(value).__name__}")
        new = value
    elif isinstance(old, str):
        new = str(value)
    elif isinstance(old, int) and not isinstance(old, bool) and float(value).is_integer():
        new = int(value)
    else:
        new = float(value)
    if isinstance(node, list):
        node[int(last)] = new
    else:
        node[last] = new
    # a leak probability sweep on a reflective wall implies a permeable wall
    if last == "leak_probability" and isinstance(new, float) and new > 0:
        data["wall"]["kind"] = WallKind.PERMEABLE.value
    return SimulationScenario.from_dict(data)


class UnknownParameterPath(KeyError):
    pass


def _resolve_path(data: dict, path: str, structured: bool = False) -> list[str]:
    parts = path.split(".")
    node: Any = data
    ok = True
    for p in parts:
        if isinstance(node, list) and p.isdigit() and int(p) < len(node):
            node = node[int(p)]
        elif isinstance(node, dict) and p in node:
            node = node[p]
        else:
            ok = False
            break
    if ok and (structured or not isinstance(node, (dict, list))):
        return parts
    if len(parts) == 1:
        hits = list(_find_key(data, parts[0], []))
        if len(hits) == 1:
            return hits[0]
    raise UnknownParameterPath(path)


def _find_key(node: Any, key: str, prefix: list[str]) -> Iterable[list[str]]:
    if isinstance(node, dict):
        for k, v in node.items():
            if k == key and not isinstance(v, (dict, list)):
                yield prefix + [k]
            else:
                yield from _find_key(v, key, prefix + [k])
    elif isinstance(node, list):
        for i, v in enumerate(node):
            yield from _find_key(v, key, prefix + [str(i)])
