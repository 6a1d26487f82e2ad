"""Physical constants (SI) and default atomic parameters.

The atomic defaults describe the Rb-85 D2 line and are configuration inputs,
not baked into any algorithm; every function that needs them takes them as
arguments with these values as documented defaults.
"""

import math

HBAR = 1.054_571_817e-34
"""Reduced Planck constant, J s (CODATA 2018)."""

ATOMIC_MASS_UNIT = 1.660_539_066_60e-27
"""Unified atomic mass unit, kg (CODATA 2018)."""

RB85_MASS = 84.911_789_738 * ATOMIC_MASS_UNIT
"""Mass of a Rb-85 atom, kg."""

RB85_D2_LINEWIDTH = 2.0 * math.pi * 6.066_6e6
"""Natural linewidth of the Rb-85 D2 line, rad/s."""

RB85_D2_SATURATION_INTENSITY = 16.693_3
"""Saturation intensity of the Rb-85 D2 cycling transition, W/m^2."""
