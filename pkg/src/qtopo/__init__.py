"""Quantum topology optimization of the MBB beam, simulated classically end to end."""

from .fem import (
    GuardError,
    Material,
    MbbDomain,
    StructureConfig,
    SymMatrix,
    assemble_global,
    compliance_direct,
    element_stiffness,
    enumerate_thetas,
    offset_delta,
    reduce_free,
    volume_fraction,
)

__all__ = [
    "GuardError",
    "Material",
    "MbbDomain",
    "StructureConfig",
    "SymMatrix",
    "assemble_global",
    "compliance_direct",
    "element_stiffness",
    "enumerate_thetas",
    "offset_delta",
    "reduce_free",
    "volume_fraction",
]

__version__ = "0.1.0"
