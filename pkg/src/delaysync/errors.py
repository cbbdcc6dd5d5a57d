"""Exception types shared across the toolkit."""


class DelaySyncError(Exception):
    """Base class for all toolkit errors."""


class ModelAssumptionError(DelaySyncError):
    """Agent model violates a design assumption (eigenvalue bound,
    stabilizability or detectability)."""


class GainDesignError(ModelAssumptionError):
    """Stabilizing-gain design failed: pair not stabilizable or the
    Riccati iteration did not converge."""


class InfeasibleReferenceError(DelaySyncError):
    """Requested constant reference lies outside the feasible set."""

    def __init__(self, message, distance=None, component=None):
        super().__init__(message)
        self.distance = distance
        self.component = component


class SynthesisIntegrityError(DelaySyncError):
    """An identity that must hold by construction failed numerically,
    which indicates a bug or a pathological model, not bad user input."""


class UnrootedGraphError(DelaySyncError):
    """Network graph has nodes unreachable from the root set."""


class SimulationDivergedError(DelaySyncError):
    """Simulation produced a non-finite state."""

    def __init__(self, message, tick=None):
        super().__init__(message)
        self.tick = tick
