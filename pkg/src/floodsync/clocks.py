"""Hardware clocks, the abstracted flooding sync scheme, and compensation.

The underlying synchronization scheme is modeled as a black box that, at
every flood, delivers a timestamp offset by the true accumulated
propagation delay plus a zero-mean residual. Its virtual clock slews
between sync points, so it is strictly monotonic by construction. The
delay compensator adds two stages on top: a one-pole lowpass on the
measured cumulated delay, and a monotonicity-preserving exponential ramp
that applies the filtered correction to the virtual clock within one
synchronization period.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .units import seconds

log = logging.getLogger(__name__)

# Fraction of a correction step the ramp has applied after one period.
RAMP_CONVERGENCE = 0.995
RAMP_LOG = math.log(1.0 / (1.0 - RAMP_CONVERGENCE))

DEFAULT_FILTER_POLE = 0.75
DEFAULT_SLOPE_FLOOR = 0.5
DEFAULT_RESIDUAL_STD_S = 150e-9


@dataclass
class HardwareClock:
    """Free-running counter clock: local(t) = t + skew*t + offset.

    Skew is held in integer parts-per-1e9 so local time stays exact
    integer picoseconds over arbitrarily long runs.
    """

    tick_ps: int = 42_000
    skew_ppb: int = 0
    offset_ps: int = 0

    def local_ps(self, t_ps: int) -> int:
        return t_ps + (t_ps * self.skew_ppb) // 10**9 + self.offset_ps

    def timestamp(self, t_ps: int) -> int:
        """Tick count latched at true time t (counter floor)."""
        return self.local_ps(t_ps) // self.tick_ps

    def next_tick_edge(self, t_ps: int) -> int:
        """Earliest true time >= t at which the local counter increments.

        Hardware-timed transmission fires on these edges, so transmit
        timestamps carry no quantization error.
        """
        local = self.local_ps(t_ps)
        target = -(-local // self.tick_ps) * self.tick_ps  # ceil to tick
        t = t_ps + (target - local)  # local advances ~1 per ps
        while self.local_ps(t) < target:
            t += 1
        while t > t_ps and self.local_ps(t - 1) >= target:
            t -= 1
        return t


@dataclass
class CompensationFilter:
    """One-pole lowpass on the measured cumulated delay.

    applied(k) = a*applied(k-1) + (1-a)*c(k) for k > 0; the first sample
    initializes the state directly so convergence starts from the best
    available guess. 1-a is the one-step attenuation of a pulse outlier.
    """

    pole: float = DEFAULT_FILTER_POLE
    applied_s: float | None = None
    k: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.pole < 1.0:
            raise ValueError(f"filter pole {self.pole} outside [0, 1)")

    def update(self, c_k_s: float) -> float:
        if self.applied_s is None:
            self.applied_s = c_k_s
        else:
            self.applied_s = self.pole * self.applied_s + (1.0 - self.pole) * c_k_s
        self.k += 1
        return self.applied_s


@dataclass
class VirtualClock:
    """Monotonic virtual clock: scheme baseline plus compensation ramp.

    The baseline is piecewise linear between sync knots with slope within
    ppm of one; the compensation ramp moves the applied correction toward
    its target as a first-order exponential whose pole is chosen so the
    step is >= RAMP_CONVERGENCE applied after one period, clamped if it
    would push the instantaneous slope below `slope_floor` times the
    scheme-predicted slope.
    """

    period_ps: int
    slope_floor: float = DEFAULT_SLOPE_FLOOR
    compensate: bool = True

    anchor_ps: int | None = None
    anchor_value_s: float = 0.0
    slope: float = 1.0

    ramp_start_ps: int | None = None
    ramp_from_s: float = 0.0
    ramp_target_s: float = 0.0
    ramp_tau_s: float = 0.0

    @property
    def synced(self) -> bool:
        return self.anchor_ps is not None

    def base_value(self, t_ps: int) -> float:
        if self.anchor_ps is None:
            raise ValueError("virtual clock not yet synced")
        return self.anchor_value_s + self.slope * seconds(t_ps - self.anchor_ps)

    def correction_value(self, t_ps: int) -> float:
        if self.ramp_start_ps is None or t_ps <= self.ramp_start_ps:
            return self.ramp_from_s if self.ramp_start_ps is not None else 0.0
        gap = self.ramp_from_s - self.ramp_target_s
        return self.ramp_target_s + gap * math.exp(
            -seconds(t_ps - self.ramp_start_ps) / self.ramp_tau_s
        )

    def value(self, t_ps: int) -> float:
        return self.base_value(t_ps) + self.correction_value(t_ps)

    def resync(self, arrival_ps: int, knot_value_s: float, next_knot_value_s: float) -> None:
        """Anchor the baseline at a flood arrival and aim at the next knot.

        The baseline stays continuous: after the first sync the anchor
        value is the clock's own current reading, which tracks the knot
        value to within slope-error times arrival jitter (sub-fs here).
        """
        if self.anchor_ps is None:
            value = knot_value_s
        else:
            value = self.base_value(arrival_ps)
        slope = (next_knot_value_s - value) / seconds(self.period_ps)
        if slope <= 0:
            raise ValueError(f"sync scheme produced non-increasing slope {slope}")
        self.anchor_ps = arrival_ps
        self.anchor_value_s = value
        self.slope = slope

    def apply_correction(self, now_ps: int, target_s: float) -> None:
        """Start ramping the applied correction toward `target_s`.

        Downward steps flatten the clock while the ramp runs; the pole is
        clamped so the slope never drops below slope_floor * slope.
        """
        if not self.compensate:
            return
        current = self.correction_value(now_ps)
        tau = seconds(self.period_ps) / RAMP_LOG
        drop = current - target_s
        if drop > 0:
            # slope(t) >= slope - drop/tau must stay >= slope_floor*slope
            min_tau = drop / ((1.0 - self.slope_floor) * self.slope)
            if min_tau > tau:
                log.warning(
                    "correction step %.1f ns would violate the slope floor; "
                    "stretching ramp time constant %.3g s -> %.3g s",
                    drop * 1e9,
                    tau,
                    min_tau,
                )
                tau = min_tau
        self.ramp_start_ps = now_ps
        self.ramp_from_s = current
        self.ramp_target_s = target_s
        self.ramp_tau_s = tau

    def min_slope_bound(self) -> float:
        """Closed-form lower bound on the instantaneous slope of value()."""
        if self.ramp_start_ps is None:
            return self.slope
        drop = self.ramp_from_s - self.ramp_target_s
        if drop <= 0:
            return self.slope
        return self.slope - drop / self.ramp_tau_s


def sync_error_s(clock: VirtualClock, t_ps: int) -> float:
    """Signed synchronization error at a probe instant.

    Positive means the node's events fire late relative to the master:
    with no compensation and zero residual this equals the accumulated
    propagation delay, because flood timestamps arrive that late.
    """
    return seconds(t_ps) - clock.value(t_ps)
