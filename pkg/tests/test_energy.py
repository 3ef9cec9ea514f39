import numpy as np
import pytest
from hypothesis import given, strategies as st

from fairsched.energy import (EfficiencyTable, SolarTrace, WptParams, apply_frame_energy,
                              diurnal_solar_mw, efficiency_from_table, harvested_energy,
                              wpt_power)
from fairsched.model import EnergyConstants, NodeState

C = EnergyConstants()
TABLE = EfficiencyTable(
    distance_curve=((0.2, 40.0), (0.5, 20.0), (1.0, 8.0), (2.0, 2.0)),
    orientation_curve=((0.0, 10.0), (90.0, 1.0), (180.0, 10.0), (270.0, 1.0)),
)


class TestWptPower:
    def test_defaults(self):
        assert wpt_power(WptParams(3.0, 0.5, 0.5, 1.0)) == pytest.approx(0.75, rel=1e-15)

    @pytest.mark.parametrize("kw", [dict(p_tx_wpt=0.0), dict(delta_d=0.0),
                                    dict(delta_theta=0.0), dict(channel_gain_sq=0.0)])
    def test_annihilator(self, kw):
        assert wpt_power(WptParams(**kw)) == 0.0

    def test_identity(self):
        assert wpt_power(WptParams(2.5, 1.0, 1.0, 1.0)) == 2.5

    @pytest.mark.parametrize("kw", [dict(delta_d=1.5), dict(delta_theta=-0.1), dict(tau_wpt=-1.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            WptParams(**kw)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_delta(self, a, b, c):
        lo, hi = sorted((a, b))
        assert wpt_power(WptParams(delta_d=lo, delta_theta=c)) <= wpt_power(WptParams(delta_d=hi, delta_theta=c))


class TestHarvested:
    def test_wpt_only(self):
        assert harvested_energy(WptParams(tau_wpt=10.0), 0.0, 0.0) == pytest.approx(7.5)

    def test_solar_only(self):
        assert harvested_energy(WptParams(p_tx_wpt=0.0), 5e-3, 100.0) == pytest.approx(0.5)

    def test_zero_durations(self):
        assert harvested_energy(WptParams(tau_wpt=0.0), 5e-3, 0.0) == 0.0


class TestEfficiency:
    def test_distance_max(self):
        assert efficiency_from_table(TABLE, 0.2, 0.0) == (1.0, 1.0)

    def test_orthogonal_minimum(self):
        _, dt = efficiency_from_table(TABLE, 1.0, 90.0)
        assert dt == pytest.approx(0.1)
        _, dt270 = efficiency_from_table(TABLE, 1.0, 270.0)
        assert dt270 == pytest.approx(0.1)
        assert all(efficiency_from_table(TABLE, 1.0, a)[1] >= dt for a in range(0, 360, 5))

    def test_midpoints(self):
        dd, dt = efficiency_from_table(TABLE, 0.35, 45.0)
        assert dd == pytest.approx(0.75)
        assert dt == pytest.approx(0.55)

    def test_wraps(self):
        # 315 degrees sits between 270 (0.1) and 360 == 0 (1.0)
        assert efficiency_from_table(TABLE, 1.0, 315.0)[1] == pytest.approx(0.55)
        assert efficiency_from_table(TABLE, 1.0, 405.0) == efficiency_from_table(TABLE, 1.0, 45.0)

    def test_below_floor(self):
        with pytest.raises(ValueError):
            efficiency_from_table(TABLE, 0.1, 0.0)

    def test_clamped_positive(self):
        t = EfficiencyTable(((0.2, 5.0), (1.0, 0.0)), ((0.0, 1.0),))
        dd, _ = efficiency_from_table(t, 5.0, 0.0)
        assert 0.0 < dd <= 1.0

    @pytest.mark.parametrize("dist,orient", [
        (((0.1, 1.0),), ((0.0, 1.0),)),
        (((0.5, 1.0),), ((360.0, 1.0),)),
        ((), ((0.0, 1.0),)),
        (((0.5, 1.0), (0.4, 2.0)), ((0.0, 1.0),)),
    ])
    def test_invalid_tables(self, dist, orient):
        with pytest.raises(ValueError):
            EfficiencyTable(dist, orient)


class TestSolar:
    def test_half_sine(self):
        day = 86400.0
        assert diurnal_solar_mw(day / 4, 2.0) == pytest.approx(2.0)
        assert diurnal_solar_mw(3 * day / 4, 2.0) == 0.0
        assert np.all(diurnal_solar_mw(np.linspace(0, 2 * day, 97), 1.0) >= 0)

    def test_negative_trace(self):
        with pytest.raises(ValueError):
            SolarTrace(((1, 1, -0.5),))


class TestApplyFrameEnergy:
    def node(self, e=1.0):
        return NodeState(1, 2500, e, e)

    def test_frame_cost(self):
        out, floored = apply_frame_energy(self.node(), True, 100, 0.0, C)
        assert out.energy == pytest.approx(0.98995, rel=1e-12)
        assert not floored

    def test_no_op(self):
        out, _ = apply_frame_energy(self.node(), False, 0, 0.0, C)
        assert out.energy == 1.0

    def test_clamp(self):
        out, _ = apply_frame_energy(self.node(49.9), False, 0, 1.0, C, e_max=50.0)
        assert out.energy == 50.0

    def test_floor(self):
        out, floored = apply_frame_energy(self.node(1e-4), True, 10, 0.0, C)
        assert out.energy == 0.0 and floored

    @given(st.floats(0.0, 49.0), st.booleans(), st.integers(0, 100), st.floats(0.0, 1.0))
    def test_bounded(self, e, rcap, k, h):
        out, floored = apply_frame_energy(self.node(e), rcap, k, h, C, e_max=50.0)
        assert 0.0 <= out.energy <= 50.0
        expected = e - (C.e_rcap if rcap else 0.0) - k * C.e_tx + h
        if 0.0 <= expected <= 50.0:
            assert out.energy == pytest.approx(expected, abs=1e-12)
            assert not floored
