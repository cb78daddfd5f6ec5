"""Waveguide-QED simulation and analysis of two-emitter super-radiant emission."""
from .units import (EmitterParams, TwoEmitterSystem, WaveguideSystem, energy_to_angular,
                    angular_to_energy, wavelength_to_energy, waveguide_phase)

__version__ = "0.1.0"

__all__ = ["EmitterParams", "TwoEmitterSystem", "WaveguideSystem", "energy_to_angular",
           "angular_to_energy", "wavelength_to_energy", "waveguide_phase"]
