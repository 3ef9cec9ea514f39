import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from fairsched.channel import (DEFAULT_RSSI_TABLE, AnalyticChannel, AnalyticChannelParams,
                               RssiPrrTable, RssiTrace, TableChannel, TraceChannel,
                               hold_table, k1, mean_snr, path_loss, prr_analytic, rssi_to_prr)
from oracles import prr_closed_form

P = AnalyticChannelParams()
# evaluated independently at 30 significant digits as (4 pi f0 / c)^2
K1_24GHZ = 10120.4728843153435


class TestK1:
    def test_wavelength(self):
        assert P.wavelength == pytest.approx(0.1249135, rel=1e-6)

    def test_value(self):
        assert k1(P) == pytest.approx(K1_24GHZ, rel=1e-12)
        assert k1(P) == pytest.approx(1.012e4, rel=1e-3)

    def test_identity(self):
        lam = 0.2
        g = 4 * math.pi / lam
        p = AnalyticChannelParams(g_tx=g, g_rx=g, f0=P.c / lam)
        assert k1(p) == pytest.approx(1.0, rel=1e-12)


class TestPathLoss:
    def test_unit_distance(self):
        assert path_loss(P, 1.0) == pytest.approx(k1(P), rel=1e-15)

    def test_doubling(self):
        assert path_loss(P, 20.0) / path_loss(P, 10.0) == pytest.approx(4.0, rel=1e-12)

    def test_ten_metres(self):
        assert path_loss(P, 10.0) == pytest.approx(K1_24GHZ * 100, rel=1e-12)
        assert path_loss(P, 10.0) == pytest.approx(1.012e6, rel=1e-3)

    @pytest.mark.parametrize("d", [0.0, -1.0, float("nan")])
    def test_bad_distance(self, d):
        with pytest.raises(ValueError):
            path_loss(P, d)


class TestMeanSnr:
    def test_identity(self):
        p = AnalyticChannelParams(p_tx=k1(P) * P.n0)
        assert mean_snr(p, 1.0) == pytest.approx(1.0, rel=1e-12)

    def test_ten_metres(self):
        # 1 mW / (k1 * 1e-12 W * 100); the value is 988.1, i.e. 9.88e2
        p = AnalyticChannelParams(n0=1e-12)
        assert mean_snr(p, 10.0) == pytest.approx(988.096121031849, rel=1e-12)

    def test_vectorised(self):
        d = np.array([1.0, 10.0, 100.0])
        out = mean_snr(P, d)
        assert out.shape == (3,) and np.all(np.diff(out) < 0)


class TestPrr:
    def test_limit_at_zero(self):
        assert prr_analytic(P, 1e-9) == pytest.approx(1.0, abs=1e-12)

    def test_half(self):
        d = math.sqrt(math.log(2) / P.k_src)
        assert prr_analytic(P, d) == pytest.approx(0.5, rel=1e-12)

    def test_defaults_span(self):
        # the default annulus runs from near-perfect links to lossy ones
        assert prr_analytic(P, 1.0) > 0.9999
        assert prr_analytic(P, 300.0) == pytest.approx(math.exp(-K1_24GHZ * 1e-9 * 9e4), rel=1e-12)

    @settings(max_examples=300)
    @given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(1e8, 1e10), st.floats(1.5, 4),
           st.floats(1e-15, 1e-11), st.floats(0.5, 100), st.floats(1e-5, 1e-1),
           st.floats(0.5, 500))
    def test_closed_form(self, gt, gr, f0, k2, n0, g0, ptx, d):
        p = AnalyticChannelParams(gt, gr, f0, P.c, k2, n0, g0, ptx)
        expected = prr_closed_form(gt, gr, f0, P.c, k2, n0, g0, ptx, d)
        assume(expected > 1e-300)
        assert prr_analytic(p, d) == pytest.approx(expected, rel=1e-9)


class TestRssiTable:
    def test_clamp(self):
        assert rssi_to_prr(-120.0) == 0.0
        assert rssi_to_prr(-40.0) == 1.0

    @pytest.mark.parametrize("r,p", DEFAULT_RSSI_TABLE)
    def test_breakpoints(self, r, p):
        assert rssi_to_prr(r) == p

    def test_midpoint(self):
        assert rssi_to_prr(-88.5) == pytest.approx(0.5, rel=1e-12)

    @pytest.mark.parametrize("pts", [[], [(-90, 0.2), (-91, 0.3)], [(-90, 0.5), (-80, 0.4)],
                                     [(-90, 0.5), (-80, 1.2)]])
    def test_invalid(self, pts):
        with pytest.raises(ValueError):
            RssiPrrTable(pts)

    @given(st.lists(st.floats(-120, -40), min_size=2, max_size=20))
    def test_monotone(self, xs):
        xs = sorted(xs)
        ys = [rssi_to_prr(x) for x in xs]
        assert all(a <= b for a, b in zip(ys, ys[1:]))


class TestHold:
    SAMPLES = ((1, 1, -80.0), (1, 4, -95.0), (2, 2, -88.5))

    def test_zero_order_hold(self):
        table, first = hold_table(self.SAMPLES, [1, 2])
        assert first == 1
        assert table[0].tolist() == [-80.0, -80.0, -80.0, -95.0]
        # frames before the first sample take that sample
        assert table[1].tolist() == [-88.5] * 4

    def test_missing_node(self):
        with pytest.raises(ValueError):
            hold_table(self.SAMPLES, [3])

    def test_trace_channel(self):
        ch = TraceChannel(RssiTrace(self.SAMPLES), 3)
        assert ch.prr(1).tolist() == [1.0, 0.5, 1.0]
        assert ch.prr(4).tolist() == [0.0, 0.5, 0.0]
        assert ch.prr(50).tolist() == ch.prr(4).tolist()

    def test_backwards_trace(self):
        with pytest.raises(ValueError):
            RssiTrace(((1, 3, -80.0), (1, 2, -80.0)))


class TestSources:
    def test_analytic_static(self):
        ch = AnalyticChannel(P, [1.0, 50.0])
        assert np.array_equal(ch.prr(1), ch.prr(99))
        assert ch.prr(1)[0] > ch.prr(1)[1]

    def test_table_holds_last(self):
        ch = TableChannel([[0.1, 0.2], [0.3, 0.4]])
        assert ch.prr(1).tolist() == [0.1, 0.3]
        assert ch.prr(5).tolist() == [0.2, 0.4]

    def test_table_range(self):
        with pytest.raises(ValueError):
            TableChannel([[1.5]])


@settings(max_examples=200)
@given(st.floats(0.5, 299.0), st.floats(1.001, 3.0))
def test_prr_decreases_with_distance(d, factor):
    assert prr_analytic(P, d * factor) <= prr_analytic(P, d)


@settings(max_examples=200)
@given(st.floats(1e-5, 1e-1), st.floats(1.001, 10.0), st.floats(1.0, 300.0))
def test_prr_increases_with_power(ptx, factor, d):
    lo = AnalyticChannelParams(p_tx=ptx)
    hi = AnalyticChannelParams(p_tx=ptx * factor)
    assert prr_analytic(hi, d) >= prr_analytic(lo, d)
