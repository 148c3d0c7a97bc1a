"""Physical constants used throughout the package.

Values are CODATA, hard-coded to six significant figures.  Everything
downstream derives its numbers from these constants; no rounded
practical-unit coefficients are stored anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

from .units import Quantity, Unit

CONSTANTS_VERSION = "codata-6sig-1"


@dataclass(frozen=True)
class PhysicalConstants:
    e2: Quantity = Quantity(1.43996, Unit.EV_NM)  # Coulomb constant e^2
    hbar: Quantity = Quantity(6.58212e-16, Unit.EV_S)
    mc2: Quantity = Quantity(510998.95, Unit.EV)  # electron rest energy
    c: Quantity = Quantity(2.99792e10, Unit.CM_PER_S)
    a0: Quantity = Quantity(0.0529177, Unit.NM)  # Bohr radius
    ry: Quantity = Quantity(13.6057, Unit.EV)  # Rydberg energy

    @property
    def e2_ev_nm(self) -> float:
        return self.e2.canonical

    @property
    def hbar_ev_ns(self) -> float:
        return self.hbar.canonical

    @property
    def mc2_ev(self) -> float:
        return self.mc2.canonical

    @property
    def c_nm_ns(self) -> float:
        return self.c.canonical

    @property
    def mass_ev_ns2_nm2(self) -> float:
        """Electron mass in eV*ns^2/nm^2 (i.e. mc^2 / c^2)."""
        return self.mc2_ev / self.c_nm_ns**2

    @property
    def a0_nm(self) -> float:
        return self.a0.canonical

    @property
    def ry_ev(self) -> float:
        return self.ry.canonical


CONSTANTS = PhysicalConstants()
