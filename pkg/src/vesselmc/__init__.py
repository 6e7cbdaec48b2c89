"""Particle Monte Carlo simulator for molecular communication in blood-vessel ducts."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    EndCapPolicy,
    FlowKind,
    FlowProfile,
    MoleculeSpecies,
    ReceiverSpec,
    ScenarioError,
    SimulationScenario,
    TxPosition,
    ValveSpec,
    VesselGeometry,
    WallKind,
    WallModel,
    load_scenario,
    preset,
    save_scenario,
    set_parameter,
    validate_scenario,
)
from .rng import RngStream  # noqa: E402

__all__ = [
    "EndCapPolicy",
    "FlowKind",
    "FlowProfile",
    "MoleculeSpecies",
    "ReceiverSpec",
    "RngStream",
    "ScenarioError",
    "SimulationScenario",
    "TxPosition",
    "ValveSpec",
    "VesselGeometry",
    "WallKind",
    "WallModel",
    "__version__",
    "load_scenario",
    "preset",
    "save_scenario",
    "set_parameter",
    "validate_scenario",
]
