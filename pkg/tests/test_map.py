"""The implicit separation map and its inversion.

Derived expectations are frozen from the independent oracles coded
here: plain bisection on h(sigma) for point values and a golden-section
search for the map minimum.
"""

import math

import numpy as np
import pytest

from coulombhole import (
    BeamParameters,
    Branch,
    DomainError,
    PairInitial,
    Quantity,
    Unit,
    critical_scale,
    invert_map,
    map_approx,
    map_derivative,
    map_minimum,
    map_sigma_exact,
    propagate_pair,
    scaled_final_separation,
)
from coulombhole.dynamics import SingularInputError, approx_scaled_map, sigma_excess
from coulombhole.units import cm, ev, kev, nm, ns


def h_of_sigma(sigma: float) -> float:
    return math.sqrt(sigma * (sigma - 1.0)) + math.log(
        math.sqrt(sigma) + math.sqrt(sigma - 1.0)
    )


def bisect_sigma(u: float) -> float:
    """Independent root finder for u^(3/2) h(sigma) = 1."""
    target = u**-1.5
    lo, hi = 1.0 + 1e-15, 1e9
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h_of_sigma(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def golden_section_minimum(f, a, b, iterations=200):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    for _ in range(iterations):
        if f(c) < f(d):
            b, d = d, c
            c = b - invphi * (b - a)
        else:
            a, c = c, d
            d = a + invphi * (b - a)
    x = 0.5 * (a + b)
    return x, f(x)


class TestSigmaExact:
    def test_u_equal_one_against_bisection_oracle(self):
        oracle = bisect_sigma(1.0)
        assert oracle == pytest.approx(1.2322705554978841, rel=1e-10)  # frozen
        assert map_sigma_exact(1.0) == pytest.approx(oracle, rel=1e-10)

    def test_large_u_limit(self):
        # small-excess expansion: sigma - 1 ~ u^-3 / 4
        assert map_sigma_exact(100.0) - 1.0 < 2.6e-6
        assert sigma_excess(100.0) == pytest.approx(0.25e-6, rel=1e-3)

    def test_u_tenth_final_separation(self):
        m = float(scaled_final_separation(0.1))
        assert m == pytest.approx(2.9746067787, rel=1e-9)  # frozen from bisection
        assert m == pytest.approx(0.1 * bisect_sigma(0.1), rel=1e-10)
        # sits a bit below the small-u asymptote u^(-1/2)
        assert m / 0.1**-0.5 == pytest.approx(0.94, abs=0.01)

    def test_round_trip_residual(self):
        u = np.logspace(-3, 2, 113)
        w = sigma_excess(u)
        resid = np.abs(u**1.5 * (np.sqrt(w * (1 + w)) + np.arcsinh(np.sqrt(w))) - 1.0)
        assert np.max(resid) < 1e-10

    def test_sigma_strictly_decreasing_and_above_one(self):
        u = np.logspace(-4, 3, 400)
        sig = map_sigma_exact(u)
        assert np.all(np.diff(sig) < 0.0)
        assert np.all(sig > 1.0)

    def test_final_exceeds_initial_separation(self):
        u = np.logspace(-4, 3, 400)
        assert np.all(scaled_final_separation(u) > u)

    @pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
    def test_domain_errors(self, bad):
        with pytest.raises(DomainError):
            map_sigma_exact(bad)


class TestMapDerivative:
    def test_matches_finite_differences(self):
        for u in np.logspace(-2, 1.5, 25):
            step = 1e-6 * u
            fd = (
                float(scaled_final_separation(u + step))
                - float(scaled_final_separation(u - step))
            ) / (2.0 * step)
            assert float(map_derivative(u)) == pytest.approx(fd, rel=1e-6)

    def test_identity_branch_limit(self):
        assert float(map_derivative(500.0)) == pytest.approx(1.0, abs=1e-6)

    def test_zero_at_the_minimum(self):
        u_star, _ = map_minimum()
        assert abs(float(map_derivative(u_star))) < 1e-6

    def test_negative_on_lower_branch(self):
        assert float(map_derivative(0.1)) < 0.0


class TestMapMinimum:
    def test_against_golden_section_oracle(self):
        u_star, m_star = map_minimum()
        u_gs, m_gs = golden_section_minimum(
            lambda u: float(scaled_final_separation(u)), 0.1, 3.0
        )
        assert u_star == pytest.approx(0.6888705088, rel=1e-6)  # frozen
        assert m_star == pytest.approx(1.1262434620, rel=1e-9)  # frozen
        assert u_star == pytest.approx(u_gs, abs=1e-7)
        assert m_star == pytest.approx(m_gs, rel=1e-12)

    def test_stable_under_grid_refinement(self):
        results = []
        for n in (2001, 8001):
            u = np.linspace(0.4, 1.1, n)
            m = scaled_final_separation(u)
            k = int(np.argmin(m))
            results.append((u[k], m[k]))
        (u1, m1), (u2, m2) = results
        assert abs(u1 - u2) < 1e-4
        assert abs(m1 - m2) / m2 < 1e-4

    def test_floor_strictly_positive(self):
        _, m_star = map_minimum()
        assert m_star > 1.0


class TestInvertMap:
    def setup_method(self):
        self.beam = BeamParameters(e_f=kev(1), delta_e=ev(1), l=cm(1))
        self.sc = critical_scale(self.beam)

    def test_below_floor_empty(self):
        _, m_star = map_minimum()
        s_f = Quantity(0.5 * m_star * self.sc.s_c_nm, Unit.NM)
        assert invert_map(s_f, self.sc) == []

    def test_at_floor_unique(self):
        u_star, m_star = map_minimum()
        s_f = Quantity(m_star * self.sc.s_c_nm, Unit.NM)
        result = invert_map(s_f, self.sc)
        assert len(result) == 1
        preimage, branch = result[0]
        assert branch is Branch.UNIQUE
        assert preimage.canonical == pytest.approx(u_star * self.sc.s_c_nm, rel=1e-9)

    def test_two_preimages_above_floor(self):
        s_f = Quantity(10.0 * self.sc.s_c_nm, Unit.NM)
        result = invert_map(s_f, self.sc)
        assert [b for _, b in result] == [Branch.LOWER, Branch.UPPER]
        u_lo = result[0][0].canonical / self.sc.s_c_nm
        u_up = result[1][0].canonical / self.sc.s_c_nm
        # lower preimage near the asymptote (s_c/s_f)^2, upper near s_f
        assert u_lo == pytest.approx(0.01, rel=0.01)
        assert u_up == pytest.approx(10.0, rel=1e-3)

    @pytest.mark.parametrize("y", [1.2, 1.5, 3.0, 10.0, 300.0, 8000.0])
    def test_forward_map_round_trip(self, y):
        s_f = Quantity(y * self.sc.s_c_nm, Unit.NM)
        for preimage, _branch in invert_map(s_f, self.sc):
            u = preimage.canonical / self.sc.s_c_nm
            assert float(scaled_final_separation(u)) == pytest.approx(y, rel=1e-8)

    @pytest.mark.parametrize("u", [0.02, 0.3, 0.68, 0.70, 2.0, 40.0])
    def test_invert_recovers_propagated_pair(self, u):
        t_i = u * self.sc.tau_c_ns
        pair = PairInitial(x_i=nm(0), t_i=ns(t_i))
        sol = propagate_pair(pair, self.beam)
        preimages = invert_map(sol.s_f, self.sc)
        s_i = pair.separation_nm(self.beam)
        matching = [p for p, b in preimages if b is sol.branch or b is Branch.UNIQUE]
        assert matching, f"no preimage on branch {sol.branch}"
        assert matching[0].canonical == pytest.approx(s_i, rel=1e-8)


class TestApproxMap:
    def setup_method(self):
        self.sc = critical_scale(BeamParameters(e_f=kev(1), delta_e=ev(1), l=cm(1)))

    def test_joint_continuity(self):
        s_c = self.sc.s_c_nm
        assert map_approx(Quantity(s_c, Unit.NM), self.sc).canonical == pytest.approx(
            s_c, rel=1e-12
        )

    def test_lower_branch_value(self):
        s_c = self.sc.s_c_nm
        out = map_approx(Quantity(s_c / 4.0, Unit.NM), self.sc)
        assert out.canonical == pytest.approx(2.0 * s_c, rel=1e-12)

    def test_upper_branch_identity(self):
        s_c = self.sc.s_c_nm
        out = map_approx(Quantity(2.0 * s_c, Unit.NM), self.sc)
        assert out.canonical == pytest.approx(2.0 * s_c, rel=1e-12)

    def test_quality_small_u(self):
        u = np.logspace(-4, -1, 40)
        ratio = scaled_final_separation(u) / approx_scaled_map(u)
        assert np.all(ratio >= 0.85) and np.all(ratio <= 1.0)

    def test_quality_large_u(self):
        u = np.logspace(1, 3, 40)
        ratio = scaled_final_separation(u) / approx_scaled_map(u)
        assert np.all(ratio >= 1.0) and np.all(ratio <= 1.001)


class TestPropagatePair:
    def setup_method(self):
        self.beam = BeamParameters(e_f=kev(1), delta_e=ev(1), l=cm(1))
        self.sc = critical_scale(self.beam)

    def test_angle_conservation(self):
        v = self.beam.v_nm_ns
        pair = PairInitial(x_i=nm(3.0), t_i=ns(4.0 / v))  # s_i = 5 nm
        assert pair.separation_nm(self.beam) == pytest.approx(5.0, rel=1e-12)
        sol = propagate_pair(pair, self.beam)
        assert sol.x_f.canonical / 3.0 == pytest.approx(sol.sigma, rel=1e-12)
        assert sol.t_f.canonical / pair.t_i.canonical == pytest.approx(
            sol.sigma, rel=1e-12
        )
        assert sol.s_f.canonical / 5.0 == pytest.approx(sol.sigma, rel=1e-12)

    def test_pure_longitudinal(self):
        pair = PairInitial(x_i=nm(0.0), t_i=ns(1e-4))
        sol = propagate_pair(pair, self.beam)
        assert sol.x_f.canonical == 0.0
        assert sol.t_f.canonical == pytest.approx(sol.sigma * 1e-4, rel=1e-12)

    def test_large_separation_nearly_free(self):
        t_i = 100.0 * self.sc.tau_c_ns
        sol = propagate_pair(PairInitial(x_i=nm(0.0), t_i=ns(t_i)), self.beam)
        assert sol.branch is Branch.UPPER
        assert abs(sol.t_f.canonical / t_i - 1.0) < 1e-3

    def test_zero_separation_rejected(self):
        with pytest.raises(SingularInputError):
            propagate_pair(PairInitial(x_i=nm(0.0), t_i=ns(0.0)), self.beam)


class TestCriticalScale:
    def test_practical_coefficient(self):
        sc = critical_scale(BeamParameters(e_f=kev(1), delta_e=ev(1), l=cm(1)))
        assert sc.s_c_nm / 1e7 == pytest.approx(6.5e-4, rel=0.03)
        assert sc.s_c_nm == pytest.approx(6603.79, rel=1e-5)  # frozen

    def test_derived_50kev_100cm(self):
        sc = critical_scale(BeamParameters(e_f=kev(50), delta_e=ev(0.17), l=cm(100)))
        assert sc.s_c_nm / 1e7 == pytest.approx(3.8619e-3, rel=1e-4)

    def test_power_law_in_flight_distance(self):
        b1 = BeamParameters(e_f=kev(1), delta_e=ev(1), l=cm(1))
        b4 = BeamParameters(e_f=kev(1), delta_e=ev(1), l=cm(4))
        ratio = critical_scale(b4).s_c_nm / critical_scale(b1).s_c_nm
        assert ratio == pytest.approx(4.0 ** (2.0 / 3.0), rel=1e-12)

    def test_internal_invariants(self, beam_1kev):
        sc = critical_scale(beam_1kev)
        assert sc.s_c_nm == pytest.approx(beam_1kev.v_nm_ns * sc.tau_c_ns, rel=1e-12)

    def test_relativistic_warning(self):
        with pytest.warns(UserWarning, match="nonrelativistic"):
            BeamParameters(e_f=kev(200), delta_e=ev(0.17), l=cm(100))

    def test_invalid_beam_rejected(self):
        with pytest.raises(DomainError):
            BeamParameters(e_f=kev(-1), delta_e=ev(1), l=cm(1))
        with pytest.raises(DomainError):
            BeamParameters(e_f=kev(1), delta_e=ev(1), l=cm(1), t_bar=ns(0.0))
