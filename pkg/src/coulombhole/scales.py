"""Suppression scales: Coulomb hole vs quantum statistics.

Pauli antibunching suppresses arrival-time correlations of same-spin
electrons over t_HBT = hbar/T_f, where T_f = 2 (dE)^2 / E_f is the
longitudinal beam temperature after adiabatic acceleration (initial
temperature T_i = 2 dE).  Spatial correlations are suppressed over
s_HBT = hbar L / (m v r0), the wavelength over the source's angular
size.  Comparing these with the Coulomb scales tau_c and s_c says
whether the classical hole masks or mimics the quantum signal; named
presets carry the parameters of the two published field-emission
experiments this model is assessed against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .constants import CONSTANTS
from .dynamics import BeamParameters, DomainError, critical_scale
from .units import Quantity, Unit

COULOMB_NEGLIGIBLE = "coulomb_negligible"
COULOMB_RELEVANT = "coulomb_relevant"
COULOMB_DOMINANT = "coulomb_dominant"

# ratio thresholds (negligible above the first, dominant at or below the
# second); conventions of this package, overridable per report
DEFAULT_THRESHOLDS = (100.0, 3.0)


@dataclass(frozen=True)
class DerivedScales:
    """Every derived beam scale, with the two suppression ratios.

    s_hbt and ratio_space are None when the source size r0 is not given
    (absent, not zero).
    """

    v: Quantity
    s_c: Quantity
    tau_c: Quantity
    t_i_temp: Quantity
    t_f_temp: Quantity
    t_hbt: Quantity
    r_tp: Quantity
    ratio_time: float
    s_hbt: Quantity | None = None
    ratio_space: float | None = None


def derive_scales(beam: BeamParameters) -> DerivedScales:
    """All HBT and Coulomb scales for a beam, by direct constant
    arithmetic from the definitions."""
    sc = critical_scale(beam)
    v = beam.v_nm_ns
    t_f_temp = 2.0 * beam.delta_e_ev**2 / beam.e_f_ev
    t_hbt = CONSTANTS.hbar_ev_ns / t_f_temp
    r_tp = CONSTANTS.e2_ev_nm / beam.delta_e_ev
    s_hbt = None
    ratio_space = None
    if beam.r0 is not None:
        s_hbt_nm = CONSTANTS.hbar_ev_ns * beam.l_nm / (
            CONSTANTS.mass_ev_ns2_nm2 * v * beam.r0_nm
        )
        s_hbt = Quantity(s_hbt_nm, Unit.NM)
        ratio_space = s_hbt_nm / sc.s_c_nm
    return DerivedScales(
        v=Quantity(v, Unit.NM_PER_NS),
        s_c=sc.s_c,
        tau_c=sc.tau_c,
        t_i_temp=Quantity(2.0 * beam.delta_e_ev, Unit.EV),
        t_f_temp=Quantity(t_f_temp, Unit.EV),
        t_hbt=Quantity(t_hbt, Unit.NS),
        r_tp=Quantity(r_tp, Unit.NM),
        ratio_time=t_hbt / sc.tau_c_ns,
        s_hbt=s_hbt,
        ratio_space=ratio_space,
    )


def ratio_time_coefficient() -> float:
    """Coefficient k in t_HBT/tau_c = k * E_keV^(11/6) / (dE_eV^2 L_cm^(2/3)),
    evaluated from first principles via the closed form
    2^(-5/6) hbar E^(11/6) / (dE^2 sqrt(m) (e^2)^(1/3) L^(2/3))."""
    e_ev = 1e3  # 1 keV
    l_nm = 1e7  # 1 cm
    return (
        2.0 ** (-5.0 / 6.0)
        * CONSTANTS.hbar_ev_ns
        * e_ev ** (11.0 / 6.0)
        / (
            1.0
            * math.sqrt(CONSTANTS.mass_ev_ns2_nm2)
            * CONSTANTS.e2_ev_nm ** (1.0 / 3.0)
            * l_nm ** (2.0 / 3.0)
        )
    )


def ratio_space_coefficient() -> float:
    """Coefficient in s_HBT/s_c = k * L_cm^(1/3) / (E_keV^(1/6) r_10nm),
    from the closed form hbar L^(1/3) / (sqrt(2m) (2 e^2)^(1/3) r0 E^(1/6))."""
    e_ev = 1e3
    l_nm = 1e7
    r0_nm = 10.0
    return (
        CONSTANTS.hbar_ev_ns
        * l_nm ** (1.0 / 3.0)
        / (
            math.sqrt(2.0 * CONSTANTS.mass_ev_ns2_nm2)
            * (2.0 * CONSTANTS.e2_ev_nm) ** (1.0 / 3.0)
            * r0_nm
            * e_ev ** (1.0 / 6.0)
        )
    )


@dataclass(frozen=True)
class ExperimentPreset:
    """Named experiment parameters; e_f is an inclusive (min, max) range
    in keV, evaluated at both endpoints."""

    name: str
    e_f_kev: tuple[float, float]
    delta_e_ev: float
    l_cm: float

    def beams(self, r0: Quantity | None = None) -> tuple[BeamParameters, ...]:
        endpoints = (
            self.e_f_kev if self.e_f_kev[0] != self.e_f_kev[1] else self.e_f_kev[:1]
        )
        return tuple(
            BeamParameters(
                e_f=Quantity(e, Unit.KEV),
                delta_e=Quantity(self.delta_e_ev, Unit.EV),
                l=Quantity(self.l_cm, Unit.CM),
                r0=r0,
            )
            for e in endpoints
        )


PRESETS = {
    "kot": ExperimentPreset("kot", (50.0, 100.0), 0.17, 100.0),
    "kiesel": ExperimentPreset("kiesel", (0.9, 0.9), 0.13, 1.0),
}


def get_preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise DomainError(
            f"unknown preset {name!r}; available: {sorted(PRESETS)}"
        ) from None


def classify(ratio: float, thresholds: tuple[float, float] = DEFAULT_THRESHOLDS) -> str:
    high, low = thresholds
    if ratio > high:
        return COULOMB_NEGLIGIBLE
    if ratio > low:
        return COULOMB_RELEVANT
    return COULOMB_DOMINANT


@dataclass(frozen=True)
class RegimeReport:
    name: str
    entries: tuple[dict, ...]
    time_regime: str
    space_regime: str | None
    time_thresholds: tuple[float, float]
    space_thresholds: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "time_thresholds": list(self.time_thresholds),
            "space_thresholds": list(self.space_thresholds),
            "entries": list(self.entries),
            "time_regime": self.time_regime,
            "space_regime": self.space_regime,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_table(self) -> str:
        rows = []
        header = (
            f"{'quantity':<22}" + "".join(f"{e['e_f_kev']:>18.6g}" for e in self.entries)
        )
        rows.append(f"report: {self.name}")
        rows.append(header)
        rows.append("-" * len(header))
        fields = [
            ("e_f [keV]", "e_f_kev"),
            ("delta_e [eV]", "delta_e_ev"),
            ("L [cm]", "l_cm"),
            ("r0 [nm]", "r0_nm"),
            ("v [nm/ns]", "v_nm_per_ns"),
            ("s_c [nm]", "s_c_nm"),
            ("tau_c [ns]", "tau_c_ns"),
            ("T_i [eV]", "t_i_temp_ev"),
            ("T_f [eV]", "t_f_temp_ev"),
            ("t_HBT [ns]", "t_hbt_ns"),
            ("s_HBT [nm]", "s_hbt_nm"),
            ("r_tp [nm]", "r_tp_nm"),
            ("t_HBT/tau_c", "ratio_time"),
            ("s_HBT/s_c", "ratio_space"),
        ]
        for label, key in fields:
            cells = []
            for e in self.entries:
                val = e.get(key)
                cells.append(f"{val:>18.6g}" if val is not None else f"{'-':>18}")
            rows.append(f"{label:<22}" + "".join(cells))
        rows.append(f"time-domain regime : {self.time_regime}")
        rows.append(
            f"space-domain regime: {self.space_regime if self.space_regime else '-'}"
        )
        return "\n".join(rows) + "\n"


def _entry(beam: BeamParameters) -> dict:
    d = derive_scales(beam)
    return {
        "e_f_kev": beam.e_f_ev / 1e3,
        "delta_e_ev": beam.delta_e_ev,
        "l_cm": beam.l_nm / 1e7,
        "r0_nm": beam.r0_nm,
        "v_nm_per_ns": d.v.canonical,
        "s_c_nm": d.s_c.canonical,
        "tau_c_ns": d.tau_c.canonical,
        "t_i_temp_ev": d.t_i_temp.canonical,
        "t_f_temp_ev": d.t_f_temp.canonical,
        "t_hbt_ns": d.t_hbt.canonical,
        "s_hbt_nm": None if d.s_hbt is None else d.s_hbt.canonical,
        "r_tp_nm": d.r_tp.canonical,
        "ratio_time": d.ratio_time,
        "ratio_space": d.ratio_space,
    }


def regime_report(
    target: ExperimentPreset | BeamParameters | str,
    r0: Quantity | None = None,
    time_thresholds: tuple[float, float] = DEFAULT_THRESHOLDS,
    space_thresholds: tuple[float, float] = DEFAULT_THRESHOLDS,
) -> RegimeReport:
    """Scales plus categorical Coulomb-importance flags for a preset
    (by name or object) or an explicit beam.  The overall flag uses the
    most Coulomb-affected endpoint (smallest ratio)."""
    if isinstance(target, str):
        target = get_preset(target)
    if isinstance(target, ExperimentPreset):
        name = target.name
        beams = target.beams(r0=r0)
    else:
        name = "custom"
        if r0 is not None and target.r0 is None:
            target = BeamParameters(
                e_f=target.e_f,
                delta_e=target.delta_e,
                l=target.l,
                r0=r0,
                t_bar=target.t_bar,
                t_r=target.t_r,
            )
        beams = (target,)
    entries = tuple(_entry(b) for b in beams)
    for e, b in zip(entries, beams):
        e["time_regime"] = classify(e["ratio_time"], time_thresholds)
        e["space_regime"] = (
            classify(e["ratio_space"], space_thresholds)
            if e["ratio_space"] is not None
            else None
        )
    time_regime = classify(min(e["ratio_time"] for e in entries), time_thresholds)
    space_ratios = [e["ratio_space"] for e in entries if e["ratio_space"] is not None]
    space_regime = classify(min(space_ratios), space_thresholds) if space_ratios else None
    return RegimeReport(
        name=name,
        entries=entries,
        time_regime=time_regime,
        space_regime=space_regime,
        time_thresholds=time_thresholds,
        space_thresholds=space_thresholds,
    )
