"""Synthetic wave flume: incident waves, moored floating box, gauge records."""

from .body import FloatBody, HydroCoefficients, WaveExcitation, body_step
from .flume import FlumeLayout, TransmissionModel, downstream_elevation, generate_dataset
from .mooring import MooringLineSpec, MooringState, mooring_forces, mooring_step
from .waves import WaveComponents, WaveCondition, surface_elevation, synthesize_components

__all__ = [
    "FloatBody", "FlumeLayout", "HydroCoefficients", "MooringLineSpec", "MooringState",
    "TransmissionModel", "WaveComponents", "WaveCondition", "WaveExcitation", "body_step",
    "downstream_elevation", "generate_dataset", "mooring_forces", "mooring_step",
    "surface_elevation", "synthesize_components",
]
