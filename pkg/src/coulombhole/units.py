"""Minimal unit system for this project.

Canonical units are eV (energy), nm (length), ns (time) and nm/ns
(velocity); in these units every quantity in the model is within a few
orders of magnitude of unity.  Only the dimensions the model actually
needs are provided; this is deliberately not a general unit-algebra
package.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum


class Dimension(Enum):
    ENERGY = "energy"
    LENGTH = "length"
    TIME = "time"
    VELOCITY = "velocity"
    ENERGY_LENGTH = "energy*length"
    ENERGY_TIME = "energy*time"
    DIMENSIONLESS = "dimensionless"


class Unit(Enum):
    """Unit tags; each carries its dimension and an exact factor to the
    canonical unit of that dimension."""

    EV = ("eV", Dimension.ENERGY, 1.0)
    KEV = ("keV", Dimension.ENERGY, 1e3)
    NM = ("nm", Dimension.LENGTH, 1.0)
    CM = ("cm", Dimension.LENGTH, 1e7)
    NS = ("ns", Dimension.TIME, 1.0)
    S = ("s", Dimension.TIME, 1e9)
    NM_PER_NS = ("nm/ns", Dimension.VELOCITY, 1.0)
    M_PER_S = ("m/s", Dimension.VELOCITY, 1.0)  # numerically identical to nm/ns
    CM_PER_S = ("cm/s", Dimension.VELOCITY, 1e-2)
    EV_NM = ("eV*nm", Dimension.ENERGY_LENGTH, 1.0)
    EV_NS = ("eV*ns", Dimension.ENERGY_TIME, 1.0)
    EV_S = ("eV*s", Dimension.ENERGY_TIME, 1e9)
    DIMENSIONLESS = ("", Dimension.DIMENSIONLESS, 1.0)

    def __init__(self, symbol: str, dimension: Dimension, factor: float):
        self.symbol = symbol
        self.dimension = dimension
        self.factor = factor


class UnitError(ValueError):
    """Malformed quantity string or unknown unit."""


class DimensionMismatchError(UnitError):
    """Conversion between incompatible dimensions."""

    def __init__(self, source: Unit, target: Unit):
        self.source = source
        self.target = target
        super().__init__(
            f"cannot convert {source.symbol or 'dimensionless'} "
            f"({source.dimension.value}) to {target.symbol or 'dimensionless'} "
            f"({target.dimension.value})"
        )


@dataclass(frozen=True)
class Quantity:
    """A real value tagged with a unit.  Immutable."""

    value: float
    unit: Unit

    def to(self, unit: Unit) -> "Quantity":
        """Convert to another unit of the same dimension.

        The conversion is an exact multiplication by the ratio of the
        declared factors; converting to the unit already held returns
        self unchanged.
        """
        if unit is self.unit:
            return self
        if unit.dimension is not self.unit.dimension:
            raise DimensionMismatchError(self.unit, unit)
        return Quantity(self.value * (self.unit.factor / unit.factor), unit)

    @property
    def canonical(self) -> float:
        """Value expressed in the canonical unit of this dimension."""
        if self.unit.factor == 1.0:
            return self.value
        return self.value * self.unit.factor

    def __str__(self) -> str:
        if self.unit is Unit.DIMENSIONLESS:
            return f"{self.value:g}"
        return f"{self.value:g} {self.unit.symbol}"


def convert(q: Quantity, target: Unit) -> Quantity:
    """Convert ``q`` to ``target``; raises DimensionMismatchError if the
    units measure different dimensions."""
    return q.to(target)


# convenience constructors, used heavily in tests and the CLI
def ev(v: float) -> Quantity:
    return Quantity(v, Unit.EV)


def kev(v: float) -> Quantity:
    return Quantity(v, Unit.KEV)


def nm(v: float) -> Quantity:
    return Quantity(v, Unit.NM)


def cm(v: float) -> Quantity:
    return Quantity(v, Unit.CM)


def ns(v: float) -> Quantity:
    return Quantity(v, Unit.NS)


def seconds(v: float) -> Quantity:
    return Quantity(v, Unit.S)


_BY_SYMBOL = {u.symbol: u for u in Unit}
_QUANTITY_RE = re.compile(r"^\s*([-+]?[0-9.]+(?:[eE][-+]?[0-9]+)?)\s*([A-Za-z/*]*)\s*$")


def parse_quantity(text: str, dimension: Dimension | None = None) -> Quantity:
    """Parse strings such as ``50keV``, ``0.17eV``, ``100cm`` or ``0.2ns``.

    When ``dimension`` is given, a bare number (no unit suffix) is
    rejected: dimensioned inputs must always carry their unit.
    """
    m = _QUANTITY_RE.match(text)
    if not m:
        raise UnitError(f"cannot parse quantity {text!r}")
    value = float(m.group(1))
    symbol = m.group(2)
    if symbol not in _BY_SYMBOL:
        raise UnitError(f"unknown unit {symbol!r} in {text!r}")
    unit = _BY_SYMBOL[symbol]
    if dimension is not None:
        if unit is Unit.DIMENSIONLESS:
            raise UnitError(
                f"{text!r}: a unit suffix is required (expected {dimension.value})"
            )
        if unit.dimension is not dimension:
            raise UnitError(
                f"{text!r}: expected a {dimension.value}, got {unit.dimension.value}"
            )
    return Quantity(value, unit)
