"""Classical two-electron relative motion after emission from a tip.

A pair emitted with spatial/temporal offsets (x_i, t_i) and accelerated
to beam velocity v repels itself while flying a distance L to the
detector.  Starting the relative motion from rest, energy conservation
E_rel = m*sdot^2/4 + e^2/s integrates to an implicit relation between
the initial separation s_i and the final separation s_f = sigma * s_i:

    sqrt(4 e^2 / m) * (L / v) = s_i^(3/2) * h(sigma),
    h(sigma) = sqrt(sigma*(sigma-1)) + asinh(sqrt(sigma-1)).

With the critical Coulomb scale s_c = (2 e^2 L^2 / E_f)^(1/3) and
u = s_i/s_c this reduces exactly to u^(3/2) * h(sigma) = 1, which is
what this module solves.  The map u -> u*sigma(u) (final separation in
units of s_c) is non-monotonic: it decreases for small u and tends to
the identity for large u, with a strictly positive minimum -- the
Coulomb hole.  Everything here is a pure function; the ODE integrator
provides an independent cross-check of the closed-form route.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp

from .constants import CONSTANTS
from .units import Dimension, Quantity, Unit

_EPS = np.finfo(float).eps


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class SingularInputError(ValueError):
    """Zero initial separation: the pair map is undefined there."""


class DerivativeUndefinedError(ValueError):
    """Map derivative requested where sigma-1 underflows to zero."""


class IntegrationError(RuntimeError):
    """ODE integration failed; carries the time reached (ns)."""

    def __init__(self, message: str, t_reached_ns: float):
        super().__init__(message)
        self.t_reached_ns = t_reached_ns


def _require_dimension(q: Quantity, dim: Dimension, name: str) -> None:
    if not isinstance(q, Quantity):
        raise TypeError(f"{name} must be a Quantity, got {type(q).__name__}")
    if q.unit.dimension is not dim:
        raise DomainError(f"{name} must be a {dim.value}, got {q.unit.dimension.value}")


RELATIVISTIC_WARNING_FRACTION = 0.25


@dataclass(frozen=True)
class BeamParameters:
    """Experiment inputs.

    e_f : final beam energy (E_f = m v^2 / 2, nonrelativistic throughout)
    delta_e : initial energy spread
    l : tip-to-detector flight distance
    r0 : transverse source size (optional, only for spatial HBT scales)
    t_bar : mean emission interval (optional, only for statistics/MC)
    t_r : detector resolution time (optional, only for statistics)
    """

    e_f: Quantity
    delta_e: Quantity
    l: Quantity
    r0: Quantity | None = None
    t_bar: Quantity | None = None
    t_r: Quantity | None = None

    def __post_init__(self):
        _require_dimension(self.e_f, Dimension.ENERGY, "e_f")
        _require_dimension(self.delta_e, Dimension.ENERGY, "delta_e")
        _require_dimension(self.l, Dimension.LENGTH, "l")
        for name, q, dim in (
            ("r0", self.r0, Dimension.LENGTH),
            ("t_bar", self.t_bar, Dimension.TIME),
            ("t_r", self.t_r, Dimension.TIME),
        ):
            if q is not None:
                _require_dimension(q, dim, name)
                if q.canonical <= 0:
                    raise DomainError(f"{name} must be positive, got {q}")
        if self.e_f.canonical <= 0:
            raise DomainError(f"e_f must be positive, got {self.e_f}")
        if self.delta_e.canonical <= 0:
            raise DomainError(f"delta_e must be positive, got {self.delta_e}")
        if self.l.canonical <= 0:
            raise DomainError(f"l must be positive, got {self.l}")
        if self.e_f.canonical > RELATIVISTIC_WARNING_FRACTION * CONSTANTS.mc2_ev:
            warnings.warn(
                f"e_f = {self.e_f} exceeds {RELATIVISTIC_WARNING_FRACTION:g} of the "
                "electron rest energy; the model kinematics are nonrelativistic",
                stacklevel=2,
            )

    @property
    def e_f_ev(self) -> float:
        return self.e_f.canonical

    @property
    def delta_e_ev(self) -> float:
        return self.delta_e.canonical

    @property
    def l_nm(self) -> float:
        return self.l.canonical

    @property
    def r0_nm(self) -> float | None:
        return None if self.r0 is None else self.r0.canonical

    @property
    def t_bar_ns(self) -> float | None:
        return None if self.t_bar is None else self.t_bar.canonical

    @property
    def t_r_ns(self) -> float | None:
        return None if self.t_r is None else self.t_r.canonical

    @property
    def v_nm_ns(self) -> float:
        """Beam velocity v = c * sqrt(2 E_f / mc^2)."""
        return CONSTANTS.c_nm_ns * math.sqrt(2.0 * self.e_f_ev / CONSTANTS.mc2_ev)


@dataclass(frozen=True)
class PairInitial:
    """Emission offsets of an adjacent pair: transverse x_i, temporal t_i."""

    x_i: Quantity
    t_i: Quantity

    def __post_init__(self):
        _require_dimension(self.x_i, Dimension.LENGTH, "x_i")
        _require_dimension(self.t_i, Dimension.TIME, "t_i")
        if self.x_i.canonical < 0 or self.t_i.canonical < 0:
            raise DomainError("pair offsets must be nonnegative")

    def separation_nm(self, beam: BeamParameters) -> float:
        """Initial spatial separation s_i = sqrt(x_i^2 + (v t_i)^2) in nm."""
        return math.hypot(self.x_i.canonical, beam.v_nm_ns * self.t_i.canonical)


class Branch(Enum):
    LOWER = "lower"  # s_i below the map minimum (small separations, blown apart)
    UPPER = "upper"  # s_i above the minimum (weakly perturbed)
    UNIQUE = "unique"  # at the minimum itself


@dataclass(frozen=True)
class MapSolution:
    """Final-state separations of a propagated pair."""

    sigma: float
    s_f: Quantity
    x_f: Quantity
    t_f: Quantity
    branch: Branch

    def __post_init__(self):
        if not (self.sigma >= 1.0):
            raise DomainError(f"sigma must be >= 1, got {self.sigma}")


@dataclass(frozen=True)
class CoulombScale:
    """Critical Coulomb scales: s_c = v * tau_c = (2 e^2 L^2 / E_f)^(1/3)."""

    s_c: Quantity
    tau_c: Quantity

    @property
    def s_c_nm(self) -> float:
        return self.s_c.canonical

    @property
    def tau_c_ns(self) -> float:
        return self.tau_c.canonical


def critical_scale(beam: BeamParameters) -> CoulombScale:
    """Critical separation s_c and time tau_c = s_c / v for a beam."""
    s_c = (2.0 * CONSTANTS.e2_ev_nm * beam.l_nm**2 / beam.e_f_ev) ** (1.0 / 3.0)
    return CoulombScale(
        s_c=Quantity(s_c, Unit.NM),
        tau_c=Quantity(s_c / beam.v_nm_ns, Unit.NS),
    )


# ---------------------------------------------------------------------------
# dimensionless core of the implicit map
# ---------------------------------------------------------------------------


def _h_of_excess(w):
    """h(sigma) written in terms of w = sigma - 1, accurate for tiny w."""
    return np.sqrt(w * (1.0 + w)) + np.arcsinh(np.sqrt(w))


def _validate_u(u) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if arr.size == 0:
        return arr
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError("u = s_i/s_c must be finite and positive")
    return arr


def sigma_excess(u):
    """Solve u^(3/2) h(sigma) = 1 and return w = sigma - 1.

    Works elementwise on arrays.  Solving in the variable w keeps full
    floating-point resolution when sigma -> 1 (large u), where sigma
    itself would round to 1.0.  Safeguarded Newton iteration: the
    bracket [min(r^2/16, 1/4), max(1, 2r-1)] with r = u^(-3/2) always
    contains the root because h is strictly increasing, and any Newton
    step leaving the bracket falls back to bisection.
    """
    arr = _validate_u(u)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    r = arr**-1.5
    lo = np.minimum(r * r / 16.0, 0.25)
    hi = np.maximum(1.0, 2.0 * r - 1.0)
    # asymptotic seeds: w ~ (r/2)^2 for small r, w ~ r - 1/2 - log(2 sqrt(r)) large r
    small = r < 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        seed_large = r - 0.5 - np.log(2.0 * np.sqrt(np.maximum(r, 1.0))) - 1.0
    w = np.where(small, 0.25 * r * r, np.maximum(seed_large, 0.25))
    w = np.clip(w, lo * (1.0 + 1e-9), hi)

    tol = 1e-13 * r
    for _ in range(160):
        f = _h_of_excess(w) - r
        lo = np.where(f < 0.0, w, lo)
        hi = np.where(f > 0.0, w, hi)
        done = (np.abs(f) <= tol) | ((hi - lo) <= 4.0 * _EPS * np.maximum(w, 1e-300))
        if np.all(done):
            break
        dh = np.sqrt((1.0 + w) / np.maximum(w, 1e-300))  # dh/dsigma
        cand = w - f / dh
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        w = np.where(bad, 0.5 * (lo + hi), cand)
    else:
        resid = np.max(np.abs(_h_of_excess(w) - r) / r)
        if resid > 1e-11:
            raise RuntimeError(f"sigma solve did not converge (residual {resid:.3e})")
    return float(w[0]) if scalar else w.reshape(np.shape(u))


def map_sigma_exact(u):
    """Expansion ratio sigma = s_f/s_i >= 1 for u = s_i/s_c.

    Unique root of u^(3/2) h(sigma) = 1; relative residual of the
    implicit relation is driven below 1e-12.  Vectorized.
    """
    return 1.0 + sigma_excess(u)


def scaled_final_separation(u):
    """Final separation in critical units: s_f/s_c = u * sigma(u)."""
    arr = _validate_u(u)
    w = sigma_excess(arr)
    return arr + arr * w


def map_derivative(u):
    """d(u * sigma(u))/du by implicit differentiation.

    Equals sigma - (3/2) u^(-3/2) sqrt((sigma-1)/sigma).  Tends to 1 for
    large u (identity branch), is negative on the small-u branch and
    vanishes at the map minimum.  Raises DerivativeUndefinedError if
    sigma - 1 underflows to zero (u beyond ~1e200).
    """
    arr = _validate_u(u)
    w = sigma_excess(arr)
    if np.any(np.asarray(w) == 0.0):
        raise DerivativeUndefinedError(
            "sigma is exactly 1 at this u; the branch derivative is undefined"
        )
    r = arr**-1.5
    return (1.0 + w) - 1.5 * r * np.sqrt(w / (1.0 + w))


@lru_cache(maxsize=1)
def map_minimum() -> tuple[float, float]:
    """Location and value of the Coulomb-hole floor.

    Returns (u_star, m_star) with m_star = min_u u*sigma(u); the minimum
    is the root of map_derivative, found by bisection on [0.3, 1.5].
    """
    lo, hi = 0.3, 1.5
    flo = float(map_derivative(lo))
    fhi = float(map_derivative(hi))
    if not (flo < 0.0 < fhi):
        raise RuntimeError("map minimum bracket invalid")  # pragma: no cover
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if float(map_derivative(mid)) < 0.0:
            lo = mid
        else:
            hi = mid
    u_star = 0.5 * (lo + hi)
    return u_star, float(scaled_final_separation(u_star))


def _solve_on_branch(y, lo, hi, maxiter=90):
    """Solve u*sigma(u) = y for u within [lo, hi], where the map is
    monotone.  Vectorized safeguarded Newton; converges on the residual
    |m(u) - y| <= 1e-12 y, so preimages satisfy the forward map tightly
    even right next to the fold where u itself is ill-conditioned.
    """
    y = np.asarray(y, dtype=float)
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    rising = scaled_final_separation(hi) >= scaled_final_separation(lo)
    u = 0.5 * (lo + hi)
    for _ in range(maxiter):
        f = scaled_final_separation(u) - y
        move_lo = (f < 0.0) == rising
        lo = np.where(move_lo, u, lo)
        hi = np.where(move_lo, hi, u)
        if np.all(np.abs(f) <= 1e-12 * y):
            break
        d = map_derivative(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = u - f / d
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        u = np.where(bad, 0.5 * (lo + hi), cand)
    return u


def _invert_scaled(y):
    """Both preimage branches of y = s_f/s_c.  Returns (u_lower, u_upper)
    arrays; entries are NaN below the map minimum and both equal u_star
    within a relative band of 1e-12 around it."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    u_star, m_star = map_minimum()
    u_lower = np.full_like(y, np.nan)
    u_upper = np.full_like(y, np.nan)
    at_min = np.abs(y - m_star) <= 1e-12 * m_star
    u_lower[at_min] = u_star
    u_upper[at_min] = u_star
    above = (y > m_star) & ~at_min
    if np.any(above):
        ya = y[above]
        # lower branch: map ~ u^(-1/2) for small u, so y^-2 sits below the root
        b = np.minimum(u_star, ya**-2.0)
        a = 0.25 * b
        for _ in range(200):
            low = scaled_final_separation(a) <= ya
            if not np.any(low):
                break
            a = np.where(low, 0.25 * a, a)
        u_lower[above] = _solve_on_branch(ya, a, b)
        # upper branch: u <= u*sigma(u), so u = y bounds the root from above
        u_upper[above] = _solve_on_branch(ya, np.full_like(ya, u_star), ya)
    return u_lower, u_upper


def invert_map(s_f: Quantity, sc: CoulombScale) -> list[tuple[Quantity, Branch]]:
    """All initial separations mapping to a given final separation.

    Returns an empty list below the Coulomb-hole floor, the single
    fold-point preimage at the floor (within 1e-12 relative), and the
    two branch preimages (lower first) above it.  Each preimage
    reproduces s_f through the forward map to better than 1e-8 relative.
    """
    _require_dimension(s_f, Dimension.LENGTH, "s_f")
    sf_nm = s_f.canonical
    if not (sf_nm > 0.0) or not math.isfinite(sf_nm):
        raise DomainError(f"s_f must be positive and finite, got {s_f}")
    y = sf_nm / sc.s_c_nm
    u_star, m_star = map_minimum()
    if y < m_star * (1.0 - 1e-12):
        return []
    if abs(y - m_star) <= 1e-12 * m_star:
        return [(Quantity(u_star * sc.s_c_nm, Unit.NM), Branch.UNIQUE)]
    u_lower, u_upper = _invert_scaled(y)
    return [
        (Quantity(float(u_lower[0]) * sc.s_c_nm, Unit.NM), Branch.LOWER),
        (Quantity(float(u_upper[0]) * sc.s_c_nm, Unit.NM), Branch.UPPER),
    ]


def approx_scaled_map(u):
    """Piecewise closed-form approximation of the final separation:
    s_f/s_c = u^(-1/2) for u <= 1, u for u > 1; continuous at u = 1."""
    arr = _validate_u(u)
    return np.where(arr <= 1.0, arr**-0.5, arr)


def map_approx(s_i: Quantity, sc: CoulombScale) -> Quantity:
    """Approximate final separation s_f = s_c (s_c/s_i)^(1/2) below the
    critical scale and s_f = s_i above it."""
    _require_dimension(s_i, Dimension.LENGTH, "s_i")
    si_nm = s_i.canonical
    if not (si_nm > 0.0) or not math.isfinite(si_nm):
        raise DomainError(f"s_i must be positive and finite, got {s_i}")
    u = si_nm / sc.s_c_nm
    return Quantity(float(approx_scaled_map(u)) * sc.s_c_nm, Unit.NM)


def propagate_pair(pair: PairInitial, beam: BeamParameters) -> MapSolution:
    """Propagate an emitted pair to the detector through the exact map.

    The angle of the relative position vector to the beam axis is
    conserved, so all components scale by the same sigma:
    x_f = sigma x_i, t_f = sigma t_i, s_f = sigma s_i.
    """
    sc = critical_scale(beam)
    s_i = pair.separation_nm(beam)
    if s_i == 0.0:
        raise SingularInputError(
            "pair with x_i = 0 and t_i = 0: the repulsion map diverges at zero "
            "initial separation"
        )
    u = s_i / sc.s_c_nm
    w = sigma_excess(u)
    sigma = 1.0 + w
    u_star, _ = map_minimum()
    if abs(u - u_star) <= 1e-9 * u_star:
        branch = Branch.UNIQUE
    elif u < u_star:
        branch = Branch.LOWER
    else:
        branch = Branch.UPPER
    x_nm = pair.x_i.canonical
    t_ns = pair.t_i.canonical
    return MapSolution(
        sigma=sigma,
        s_f=Quantity(s_i + s_i * w, Unit.NM),
        x_f=Quantity(x_nm + x_nm * w, Unit.NM),
        t_f=Quantity(t_ns + t_ns * w, Unit.NS),
        branch=branch,
    )


# ---------------------------------------------------------------------------
# independent ODE oracle
# ---------------------------------------------------------------------------


def ode_oracle(s_i: Quantity, dt: Quantity, rtol: float = 1e-10) -> Quantity:
    """Integrate the relative motion sdd = 2 e^2 / (m s^2) from rest.

    Independent verification path for the closed-form map: an adaptive
    embedded 4th/5th-order Runge-Kutta integration of the scaled system
    y'' = 1/(2 y^2), y(0) = 1, y'(0) = 0, which is the relative motion
    in units of s_i and the free-fall time sqrt(m s_i^3 / 4 e^2).  The
    conserved scaled energy y'^2 + 1/y is monitored; drift at the end
    beyond 10*rtol raises IntegrationError.
    """
    _require_dimension(s_i, Dimension.LENGTH, "s_i")
    _require_dimension(dt, Dimension.TIME, "dt")
    si_nm = s_i.canonical
    dt_ns = dt.canonical
    if not (si_nm > 0.0):
        raise DomainError(f"s_i must be positive, got {s_i}")
    if dt_ns < 0.0:
        raise DomainError(f"dt must be nonnegative, got {dt}")
    if dt_ns == 0.0:
        return s_i.to(Unit.NM)
    t_scale = math.sqrt(
        CONSTANTS.mass_ev_ns2_nm2 * si_nm**3 / (4.0 * CONSTANTS.e2_ev_nm)
    )
    tau_end = dt_ns / t_scale

    def rhs(_tau, yv):
        y, v = yv
        return (v, 0.5 / (y * y))

    sol = solve_ivp(
        rhs,
        (0.0, tau_end),
        (1.0, 0.0),
        method="RK45",
        rtol=0.1 * rtol,
        atol=1e-4 * rtol,
    )
    if not sol.success:
        raise IntegrationError(
            f"relative-motion integration failed: {sol.message}",
            t_reached_ns=float(sol.t[-1]) * t_scale,
        )
    y_end, v_end = sol.y[0, -1], sol.y[1, -1]
    drift = abs(v_end * v_end + 1.0 / y_end - 1.0)
    if drift >= 10.0 * rtol:
        raise IntegrationError(
            f"energy drift {drift:.3e} exceeds {10.0 * rtol:.1e}",
            t_reached_ns=dt_ns,
        )
    return Quantity(si_nm * float(y_end), Unit.NM)


# ---------------------------------------------------------------------------
# point operations
# ---------------------------------------------------------------------------


def turning_point(relative_energy: Quantity) -> Quantity:
    """Classical distance of closest approach, e^2 / E_rel."""
    _require_dimension(relative_energy, Dimension.ENERGY, "relative_energy")
    e_ev = relative_energy.canonical
    if not (e_ev > 0.0) or not math.isfinite(e_ev):
        raise DomainError(f"relative energy must be positive, got {relative_energy}")
    return Quantity(CONSTANTS.e2_ev_nm / e_ev, Unit.NM)


def gamow_factor(eta: float) -> float:
    """Squared relative Coulomb wave function at the origin,
    2 pi eta / (exp(2 pi eta) - 1).

    Returns the limit 1 at eta = 0; expm1 keeps the ratio accurate for
    tiny |eta|.  Greater than 1 for attraction (eta < 0), less than 1
    for repulsion.
    """
    if not math.isfinite(eta):
        raise DomainError(f"eta must be finite, got {eta}")
    x = 2.0 * math.pi * eta
    if x == 0.0:
        return 1.0
    if x > 700.0:  # expm1 would overflow; the factor is ~ x e^-x anyway
        return x * math.exp(-x)
    return x / math.expm1(x)


def coulomb_eta(v_rel: Quantity, z: int, z_prime: int) -> float:
    """Sommerfeld parameter eta = z z' e^2 / (hbar v_rel)."""
    _require_dimension(v_rel, Dimension.VELOCITY, "v_rel")
    v = v_rel.canonical
    if not (v > 0.0) or not math.isfinite(v):
        raise DomainError(f"v_rel must be positive, got {v_rel}")
    return z * z_prime * CONSTANTS.e2_ev_nm / (CONSTANTS.hbar_ev_ns * v)
