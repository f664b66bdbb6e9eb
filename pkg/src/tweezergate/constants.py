"""Fixed CODATA 2018 constants used throughout the package."""
from dataclasses import dataclass
import math

__all__ = ["PhysicalConstants", "CONSTANTS", "HBAR", "ELEMENTARY_CHARGE",
           "VACUUM_PERMITTIVITY", "AMU", "CA40_MASS", "TWO_PI"]


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.054571817e-34             # J s
    elementary_charge: float = 1.602176634e-19  # C
    vacuum_permittivity: float = 8.8541878128e-12  # F/m
    atomic_mass_unit: float = 1.66053906660e-27  # kg


CONSTANTS = PhysicalConstants()

HBAR = CONSTANTS.hbar
ELEMENTARY_CHARGE = CONSTANTS.elementary_charge
VACUUM_PERMITTIVITY = CONSTANTS.vacuum_permittivity
AMU = CONSTANTS.atomic_mass_unit

#: Mass of a 40Ca+ ion in kg (electron mass neglected).
CA40_MASS = 39.9625908 * AMU

TWO_PI = 2.0 * math.pi
