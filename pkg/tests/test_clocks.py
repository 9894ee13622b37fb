"""Hardware clock arithmetic, the compensation filter, the virtual clock."""

from __future__ import annotations

import logging

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floodsync.clocks import (
    CompensationFilter,
    HardwareClock,
    VirtualClock,
    sync_error_s,
)
from floodsync.units import parse_duration_ps, seconds

TICK = 42_000
PERIOD_60S = parse_duration_ps("60s")


class TestHardwareClock:
    def test_local_time_identity_without_skew(self):
        clock = HardwareClock()
        assert clock.local_ps(123_456_789) == 123_456_789

    def test_skew_scales_exactly(self):
        clock = HardwareClock(skew_ppb=10_000)  # 10 ppm
        t = 10**12  # one second
        assert clock.local_ps(t) == t + 10**7  # +10 us

    def test_timestamp_floors_to_tick(self):
        clock = HardwareClock()
        assert clock.timestamp(TICK - 1) == 0
        assert clock.timestamp(TICK) == 1

    @given(t=st.integers(0, 10**15), skew=st.integers(-50_000, 50_000), off=st.integers(0, 10**9))
    @settings(max_examples=200, deadline=None)
    def test_next_tick_edge_is_minimal_aligned(self, t, skew, off):
        clock = HardwareClock(skew_ppb=skew, offset_ps=off)
        edge = clock.next_tick_edge(t)
        assert edge >= t
        assert clock.local_ps(edge) % TICK == 0
        if edge > t:
            assert clock.local_ps(edge - 1) % TICK != 0 or clock.local_ps(edge - 1) < clock.local_ps(edge)

    def test_strictly_increasing(self):
        clock = HardwareClock(skew_ppb=-30_000)
        values = [clock.local_ps(t) for t in range(0, 10**6, 10**5)]
        assert all(b > a for a, b in zip(values, values[1:]))


class TestCompensationFilter:
    def test_first_sample_initializes_state(self):
        filt = CompensationFilter(pole=0.75)
        assert filt.update(437e-9) == 437e-9

    def test_outlier_attenuated_by_four(self):
        # steady state x, one outlier x + 4*eps -> x + eps with a = 0.75
        filt = CompensationFilter(pole=0.75, applied_s=1e-6, k=5)
        eps = 40e-9
        assert filt.update(1e-6 + 4 * eps) == pytest.approx(1e-6 + eps, rel=1e-12)

    def test_zero_pole_is_passthrough(self):
        filt = CompensationFilter(pole=0.0)
        filt.update(5e-7)
        assert filt.update(9e-7) == 9e-7

    @pytest.mark.parametrize("pole", [-0.1, 1.0, 1.5])
    def test_pole_domain(self, pole):
        with pytest.raises(ValueError):
            CompensationFilter(pole=pole)

    @given(
        pole=st.floats(0.0, 0.95),
        c0=st.floats(-1e-6, 1e-6),
        target=st.floats(-1e-6, 1e-6),
        k=st.integers(1, 60),
    )
    @settings(max_examples=150, deadline=None)
    def test_geometric_convergence(self, pole, c0, target, k):
        filt = CompensationFilter(pole=pole)
        filt.update(c0)
        value = c0
        for _ in range(k):
            value = filt.update(target)
        assert abs(value - target) <= pole**k * abs(c0 - target) + 1e-18


def _synced_clock(delay_s: float = 0.0, compensate: bool = True) -> VirtualClock:
    """Clock synced at t = delay (flood arrived late by `delay`), zero residual."""
    vc = VirtualClock(period_ps=PERIOD_60S, compensate=compensate)
    arrival = round(delay_s * 1e12)
    vc.resync(arrival, 0.0, seconds(PERIOD_60S))
    return vc


class TestVirtualClock:
    def test_uncompensated_error_equals_true_delay(self):
        delay = 906e-9
        vc = _synced_clock(delay, compensate=False)
        probe = 30 * 10**12
        assert sync_error_s(vc, probe) == pytest.approx(delay, rel=1e-6)

    def test_correction_reaches_target_within_one_period(self):
        vc = _synced_clock(906e-9)
        vc.apply_correction(10**9, 906e-9)
        applied = vc.correction_value(10**9 + PERIOD_60S)
        assert applied >= 897e-9  # >= 99% of the step after one period

    def test_compensated_error_converges_to_zero(self):
        delay = 906e-9
        vc = _synced_clock(delay)
        vc.apply_correction(10**9, delay)
        assert abs(sync_error_s(vc, 2 * PERIOD_60S)) < 10e-9

    def test_fixed_point_target_leaves_clock_unchanged(self):
        vc = _synced_clock(500e-9)
        vc.apply_correction(10**9, 500e-9)
        before = [vc.value(2 * 10**12 + i * TICK) for i in range(4)]
        vc.apply_correction(2 * 10**12, 500e-9)  # same target again
        after = [vc.value(2 * 10**12 + i * TICK) for i in range(4)]
        assert before == after

    def test_negative_step_keeps_slope_above_floor(self):
        vc = _synced_clock(0.0)
        vc.apply_correction(10**9, 2e-6)
        start = 10**9 + 2 * PERIOD_60S
        vc.apply_correction(start, 0.0)  # -2 us step
        # dense tick-granularity sampling across the ramp
        floor = vc.slope_floor * vc.slope
        prev = vc.value(start)
        for i in range(1, 20_000):
            t = start + i * TICK
            now = vc.value(t)
            slope = (now - prev) / seconds(TICK)
            assert now > prev
            assert slope >= floor - 1e-9
            prev = now
        assert vc.min_slope_bound() >= floor

    def test_slope_floor_clamp_stretches_the_ramp(self, caplog):
        vc = VirtualClock(period_ps=10**9, slope_floor=0.5)  # 1 ms period
        vc.resync(0, 0.0, seconds(10**9))
        vc.apply_correction(10**6, 1e-3)
        with caplog.at_level(logging.WARNING):
            vc.apply_correction(2 * 10**9, 0.0)  # -1 ms against a 1 ms period
        assert "slope floor" in caplog.text
        drop = vc.ramp_from_s - vc.ramp_target_s
        assert vc.ramp_tau_s == pytest.approx(drop / (0.5 * vc.slope))
        assert vc.min_slope_bound() >= 0.5 * vc.slope - 1e-9

    def test_compensation_disabled_never_ramps(self):
        vc = _synced_clock(1e-6, compensate=False)
        vc.apply_correction(10**9, 1e-6)
        assert vc.correction_value(PERIOD_60S) == 0.0

    def test_monotonic_across_resyncs(self):
        vc = _synced_clock(300e-9)
        t = 10**9
        prev = vc.value(t)
        for k in range(1, 6):
            arrival = k * PERIOD_60S + 300_000
            vc.resync(arrival, 0.0, seconds((k + 1) * PERIOD_60S) + (-1) ** k * 100e-9)
            vc.apply_correction(arrival + 10**9, (-1) ** k * 150e-9 + 300e-9)
            for i in range(0, 2000):
                now = vc.value(arrival + 10**9 + i * TICK)
                assert now > prev
                prev = now

    def test_unsynced_clock_rejects_reads(self):
        vc = VirtualClock(period_ps=PERIOD_60S)
        with pytest.raises(ValueError):
            vc.value(0)
