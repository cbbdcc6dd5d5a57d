"""Scale-free synchronization of identical discrete-time agents over
rooted digraphs with unknown, nonuniform integer communication delays:
protocol synthesis from the agent model alone, deterministic closed-loop
simulation, and frequency-domain stability scans."""

__version__ = "0.1.0"

from .errors import (
    DelaySyncError,
    GainDesignError,
    InfeasibleReferenceError,
    ModelAssumptionError,
    SimulationDivergedError,
    SynthesisIntegrityError,
    UnrootedGraphError,
)
from .graph import NetworkSpec, WeightedDigraph, load_network
from .plant import (
    AgentModel,
    SynthesisResult,
    load_model,
    synthesis_from_json,
    synthesis_to_json,
    synthesize,
)
from .sim import SimConfig, Trajectory, simulate

__all__ = [
    "__version__",
    "AgentModel",
    "SynthesisResult",
    "synthesize",
    "load_model",
    "synthesis_to_json",
    "synthesis_from_json",
    "WeightedDigraph",
    "NetworkSpec",
    "load_network",
    "SimConfig",
    "Trajectory",
    "simulate",
    "DelaySyncError",
    "ModelAssumptionError",
    "GainDesignError",
    "InfeasibleReferenceError",
    "SynthesisIntegrityError",
    "UnrootedGraphError",
    "SimulationDivergedError",
]
