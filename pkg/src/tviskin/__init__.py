"""Isoline-based super-resolution analysis for sparse tactile skins."""

from .model import (AttenuationModel, ContactEvent, NoiseModel, TaxelLayout, forward_response,
                    noisy_readings, tvi_force)

__all__ = [
    "AttenuationModel", "ContactEvent", "NoiseModel", "TaxelLayout",
    "forward_response", "noisy_readings", "tvi_force",
]
