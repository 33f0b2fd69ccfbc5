"""Few-mode photonic state simulation: interferometers, entangled pairs, measurement."""
from .quantum_core import (
    DensityOperator,
    ModeBasis,
    OutcomeSample,
    StateVector,
    UnitaryElement,
    apply_unitary,
    born_probabilities,
    density_of,
    is_entangled,
    make_rng,
    make_state,
    partial_trace,
    purity,
    sample_outcome,
    tensor,
)

__version__ = "0.1.0"

__all__ = [
    "DensityOperator",
    "ModeBasis",
    "OutcomeSample",
    "StateVector",
    "UnitaryElement",
    "apply_unitary",
    "born_probabilities",
    "density_of",
    "is_entangled",
    "make_rng",
    "make_state",
    "partial_trace",
    "purity",
    "sample_outcome",
    "tensor",
]
