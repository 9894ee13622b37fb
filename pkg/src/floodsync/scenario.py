"""Run configuration: scenario dataclasses, TOML parsing, validation.

Scenario files are TOML with explicit unit suffixes on every dimensioned
quantity; a bare number where a duration or length is expected is a
validation error. Validation collects every violation before failing so a
bad file is fixed in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import units
from .flooding import DisconnectedTopologyError, assign_hops
from .protocol import ProtocolConfig
from .radio import NodePosition, RadioParams, Topology


class ScenarioValidationError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("invalid scenario:\n" + "\n".join(f"  - {v}" for v in violations))


@dataclass(frozen=True)
class NodeSpec:
    id: int
    x_m: float
    y_m: float
    skew_ppb: int = 0
    hop: int | None = None  # forced hop number


@dataclass(frozen=True)
class SyncConfig:
    filter_pole: float = 0.75
    residual_std_s: float = 150e-9
    slope_floor: float = 0.5
    compensation: bool = True


@dataclass(frozen=True)
class MatrixConfig:
    """Grid of channel-fusion trials: two equal-power senders plus an
    optional weaker interferer, swept over skew, interferer level, payload
    size and receiver distance."""

    skews_ns: tuple[int, ...] = (80, 160, 320, 640)
    interferer_rel_db: tuple[float | None, ...] = (None, -18.0, -7.0, -2.0)
    payload_bytes: tuple[int, ...] = (16, 64)
    distances_m: tuple[float, ...] = (5.0, 60.0)
    trials: int = 1000
    pair_values: tuple[int, int] = (5, 8)
    interferer_value: int = 24  # far enough from the pair to overrun the decode threshold
    pair_offset_m: float = 0.02

    def cells(self) -> list[tuple[int, float | None, int, float]]:
        return [
            (skew, rel, size, dist)
            for dist in self.distances_m
            for size in self.payload_bytes
            for rel in self.interferer_rel_db
            for skew in self.skews_ns
        ]


@dataclass(frozen=True)
class SweepSpec:
    axis: str  # distance | pole | seed | skew | interferer
    values: tuple = ()


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int = 42
    periods: int = 300
    period_ps: int = units.parse_duration_ps("1s")
    master: int = 0
    nodes: tuple[NodeSpec, ...] = ()
    radio: RadioParams = field(default_factory=RadioParams)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    sync: SyncConfig = field(default_factory=SyncConfig)
    slots: int = 1
    slot_gap_ps: int = units.parse_duration_ps("5ms")
    reserved_offset_ps: int = units.parse_duration_ps("50ms")
    matrix: MatrixConfig | None = None
    sweep: SweepSpec | None = None

    @property
    def kind(self) -> str:
        return "matrix" if self.matrix is not None else "protocol"

    @property
    def slave_ids(self) -> list[int]:
        return sorted(n.id for n in self.nodes if n.id != self.master)

    @property
    def forced_hops(self) -> dict[int, int] | None:
        if any(n.hop is not None for n in self.nodes):
            return {n.id: n.hop for n in self.nodes}
        return None

    def topology(self) -> Topology:
        return Topology({n.id: NodePosition(n.x_m, n.y_m) for n in self.nodes})

    def validate(self) -> None:
        problems = validate_scenario(self)
        if problems:
            raise ScenarioValidationError(problems)


def validate_scenario(sc: Scenario) -> list[str]:
    """Collect every violation; empty list means the scenario is runnable."""
    out: list[str] = []
    if sc.periods < 1:
        out.append(f"periods must be >= 1, got {sc.periods}")
    if sc.period_ps <= 0:
        out.append("period must be positive")
    if sc.protocol.tick_ps <= 0:
        out.append("tick must be positive")
    if sc.protocol.tau_w_ps <= 0:
        out.append("tau_w must be positive")
    if not 0 <= sc.protocol.flip_other_prob <= 1:
        out.append(f"flip_other_prob {sc.protocol.flip_other_prob} outside [0, 1]")
    if sc.protocol.codec_threshold < 0:
        out.append("codec_threshold must be >= 0")
    if not 1 <= sc.protocol.payload_nibbles <= 254 or sc.protocol.payload_nibbles % 2:
        out.append(
            f"payload_nibbles {sc.protocol.payload_nibbles} must be even in [2, 254]"
        )
    if not 0 <= sc.sync.filter_pole < 1:
        out.append(f"filter_pole {sc.sync.filter_pole} outside [0, 1)")
    if not 0 < sc.sync.slope_floor <= 1:
        out.append(f"slope_floor {sc.sync.slope_floor} outside (0, 1]")
    if sc.sync.residual_std_s < 0:
        out.append("residual_std must be >= 0")
    if sc.radio.capture_window_db <= 0:
        out.append("capture_window must be > 0 dB")
    if sc.radio.skew_tolerance_ps <= 0:
        out.append("skew_tolerance must be > 0")
    if sc.radio.radio_range_m <= 0:
        out.append("radio_range must be > 0")

    if sc.kind == "matrix":
        m = sc.matrix
        if m.trials < 1:
            out.append("matrix trials must be >= 1")
        max_value = 2 * min(m.payload_bytes, default=0)
        for v in (*m.pair_values, m.interferer_value):
            if not 0 <= v <= max_value:
                out.append(f"matrix value {v} outside [0, {max_value}] nibbles")
        if any(s <= 0 for s in m.skews_ns):
            out.append("matrix skews must be positive")
        if any(d <= 0 for d in m.distances_m):
            out.append("matrix distances must be positive")
        return out

    ids = [n.id for n in sc.nodes]
    if not ids:
        out.append("scenario has no nodes")
        return out
    if len(set(ids)) != len(ids):
        out.append("duplicate node ids")
    if sc.master not in ids:
        out.append(f"master id {sc.master} is not a node")
        return out

    n_slaves = len(sc.slave_ids)
    if n_slaves < 1:
        out.append("need at least one slave node")
    elif not 1 <= sc.slots <= n_slaves:
        out.append(f"slots must satisfy 1 <= s <= n slaves ({n_slaves}), got {sc.slots}")
    if sc.reserved_offset_ps + sc.slots * sc.slot_gap_ps >= sc.period_ps:
        out.append("reserved window (offset + slots*slot_gap) does not fit in the period")

    forced = sc.forced_hops
    if forced is not None and any(h is None for h in forced.values()):
        out.append("either all nodes or none must carry a forced hop")
        return out
    if not out:
        try:
            assign_hops(sc.topology(), sc.master, sc.radio, forced)
        except DisconnectedTopologyError as exc:
            out.append(str(exc))
        except ValueError as exc:
            out.append(str(exc))
    return out


def _dur(table: dict, key: str, default_ps: int, where: str, problems: list[str]) -> int:
    if key not in table:
        return default_ps
    try:
        return units.parse_duration_ps(table[key])
    except units.UnitError as exc:
        problems.append(f"{where}.{key}: {exc}")
        return default_ps


def _length(table: dict, key: str, default_m: float, where: str, problems: list[str]) -> float:
    if key not in table:
        return default_m
    try:
        return units.parse_length_m(table[key])
    except units.UnitError as exc:
        problems.append(f"{where}.{key}: {exc}")
        return default_m


def _db(table: dict, key: str, default: float, where: str, problems: list[str]) -> float:
    if key not in table:
        return default
    try:
        return units.parse_decibel(table[key])
    except units.UnitError as exc:
        problems.append(f"{where}.{key}: {exc}")
        return default


def scenario_from_dict(data: dict, name_fallback: str = "scenario") -> Scenario:
    """Build and validate a Scenario from parsed TOML data."""
    problems: list[str] = []
    sc_tab = data.get("scenario", {})
    radio_tab = data.get("radio", {})
    proto_tab = data.get("protocol", {})
    sync_tab = data.get("sync", {})

    capture_window = _db(radio_tab, "capture_window", 5.0, "radio", problems)
    if capture_window <= 0:
        problems.append(f"radio.capture_window must be > 0 dB, got {capture_window}")
        capture_window = 5.0
    skew_tolerance = _dur(radio_tab, "skew_tolerance", 500_000, "radio", problems)
    if skew_tolerance <= 0:
        problems.append("radio.skew_tolerance must be positive")
        skew_tolerance = 500_000
    radio_kwargs = dict(
        tx_power_dbm=_db(radio_tab, "tx_power", 0.0, "radio", problems),
        radio_range_m=_length(radio_tab, "radio_range", 100.0, "radio", problems),
        path_loss_exponent=float(radio_tab.get("path_loss_exponent", 2.0)),
        capture_window_db=capture_window,
        skew_tolerance_ps=skew_tolerance,
        symbol_duration_ps=_dur(radio_tab, "symbol_duration", 16_000_000, "radio", problems),
        sfd_detection_lag_ps=_dur(radio_tab, "sfd_detection_lag", 42_000, "radio", problems),
        sfd_jitter_std_ps=_dur(radio_tab, "sfd_jitter_std", 42_000, "radio", problems),
    )

    payload_bytes = int(proto_tab.get("payload_bytes", 127))
    proto_kwargs = dict(
        tick_ps=_dur(proto_tab, "tick", 42_000, "protocol", problems),
        tau_w_ps=_dur(proto_tab, "tau_w", 192_000_000, "protocol", problems),
        payload_nibbles=2 * payload_bytes,
        codec_threshold=int(proto_tab.get("codec_threshold", 16)),
        flip_other_prob=float(proto_tab.get("flip_other_prob", 0.01)),
        sanity_margin_ps=_dur(proto_tab, "sanity_margin", 210_000, "protocol", problems),
        delay_bias_ps=_dur(proto_tab, "delay_bias", 0, "protocol", problems),
    )

    residual = sync_tab.get("residual_std", "150ns")
    try:
        residual_s = units.parse_duration_ps(residual) / units.PS_PER_SECOND
    except units.UnitError as exc:
        problems.append(f"sync.residual_std: {exc}")
        residual_s = 150e-9
    sync_cfg = SyncConfig(
        filter_pole=float(sync_tab.get("filter_pole", 0.75)),
        residual_std_s=residual_s,
        slope_floor=float(sync_tab.get("slope_floor", 0.5)),
        compensation=bool(sync_tab.get("compensation", True)),
    )

    nodes = []
    for i, tab in enumerate(data.get("nodes", [])):
        where = f"nodes[{i}]"
        if "tx_power" in tab:
            problems.append(f"{where}: per-node tx_power is not allowed; "
                            "transmit power is a network-wide radio setting")
        skew_ppb = 0
        if "skew" in tab:
            try:
                skew_ppb = round(units.parse_ppm(tab["skew"]) * 1000)
            except units.UnitError as exc:
                problems.append(f"{where}.skew: {exc}")
        nodes.append(
            NodeSpec(
                id=int(tab.get("id", i)),
                x_m=_length(tab, "x", 0.0, where, problems),
                y_m=_length(tab, "y", 0.0, where, problems),
                skew_ppb=skew_ppb,
                hop=int(tab["hop"]) if "hop" in tab else None,
            )
        )

    matrix = None
    if "matrix" in data:
        m = data["matrix"]
        rel: list[float | None] = []
        for item in m.get("interferer_rel_db", ["off", "-18dB", "-7dB", "-2dB"]):
            if item in ("off", None):
                rel.append(None)
            else:
                try:
                    rel.append(units.parse_decibel(item))
                except units.UnitError as exc:
                    problems.append(f"matrix.interferer_rel_db: {exc}")
        skews = []
        for item in m.get("skews", ["80ns", "160ns", "320ns", "640ns"]):
            try:
                skews.append(units.parse_duration_ps(item) // 1000)
            except units.UnitError as exc:
                problems.append(f"matrix.skews: {exc}")
        dists = []
        for item in m.get("distances", ["5m", "60m"]):
            try:
                dists.append(units.parse_length_m(item))
            except units.UnitError as exc:
                problems.append(f"matrix.distances: {exc}")
        matrix = MatrixConfig(
            skews_ns=tuple(skews),
            interferer_rel_db=tuple(rel),
            payload_bytes=tuple(int(b) for b in m.get("payload_bytes", [16, 64])),
            distances_m=tuple(dists),
            trials=int(m.get("trials", 1000)),
            pair_values=tuple(int(v) for v in m.get("pair_values", [5, 8])),
            interferer_value=int(m.get("interferer_value", 24)),
        )

    sweep = None
    if "sweep" in data:
        s = data["sweep"]
        axis = s.get("axis", "")
        raw_values = s.get("values", [])
        values: list = []
        for v in raw_values:
            try:
                values.append(parse_sweep_value(axis, v))
            except (units.UnitError, ValueError) as exc:
                problems.append(f"sweep.values: {exc}")
        if axis not in SWEEP_AXES:
            problems.append(f"sweep.axis must be one of {sorted(SWEEP_AXES)}, got {axis!r}")
        if not values:
            problems.append("sweep.values must be non-empty")
        sweep = SweepSpec(axis=axis, values=tuple(values))

    scenario = Scenario(
        name=str(sc_tab.get("name", name_fallback)),
        seed=int(sc_tab.get("seed", 42)),
        periods=int(sc_tab.get("periods", 300)),
        period_ps=_dur(sc_tab, "period", units.parse_duration_ps("1s"), "scenario", problems),
        master=int(sc_tab.get("master", 0)),
        nodes=tuple(nodes),
        radio=RadioParams(**radio_kwargs),
        protocol=ProtocolConfig(**proto_kwargs),
        sync=sync_cfg,
        slots=int(sc_tab.get("slots", 1)),
        slot_gap_ps=_dur(sc_tab, "slot_gap", units.parse_duration_ps("5ms"), "scenario", problems),
        reserved_offset_ps=_dur(
            sc_tab, "reserved_offset", units.parse_duration_ps("50ms"), "scenario", problems
        ),
        matrix=matrix,
        sweep=sweep,
    )
    problems.extend(validate_scenario(scenario))
    if problems:
        raise ScenarioValidationError(problems)
    return scenario


def load_scenario(path: str) -> Scenario:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ScenarioValidationError([f"TOML parse error: {exc}"]) from exc
    import os

    fallback = os.path.splitext(os.path.basename(path))[0]
    return scenario_from_dict(data, name_fallback=fallback)


SWEEP_AXES = ("distance", "pole", "seed", "skew", "interferer")


def parse_sweep_value(axis: str, raw):
    if axis == "distance":
        return units.parse_length_m(raw) if isinstance(raw, str) else _reject_bare(raw, "distance")
    if axis == "skew":
        return units.parse_duration_ps(raw) // 1000 if isinstance(raw, str) else _reject_bare(raw, "skew")
    if axis == "interferer":
        if raw in ("off", None):
            return None
        return units.parse_decibel(raw) if isinstance(raw, str) else _reject_bare(raw, "interferer")
    if axis == "pole":
        return float(raw)
    if axis == "seed":
        return int(raw)
    raise ValueError(f"unknown sweep axis {axis!r}")


def _reject_bare(raw, what: str):
    raise units.UnitError(f"{what} sweep value {raw!r} needs a unit suffix")


def apply_sweep_value(sc: Scenario, axis: str, value) -> Scenario:
    """Instantiate one grid point of a sweep as a standalone scenario."""
    base = replace(sc, sweep=None)
    if axis == "seed":
        return replace(base, name=f"{sc.name}_seed{value}", seed=int(value))
    if axis == "pole":
        return replace(
            base,
            name=f"{sc.name}_a{value:g}",
            sync=replace(sc.sync, filter_pole=float(value)),
        )
    if axis == "distance":
        slaves = sc.slave_ids
        if len(slaves) != 1:
            raise ScenarioValidationError(
                ["distance sweep needs a single master + single slave scenario"]
            )
        nodes = tuple(
            n if n.id == sc.master else replace(n, x_m=float(value), y_m=0.0)
            for n in sc.nodes
        )
        return replace(base, name=f"{sc.name}_d{value:g}m", nodes=nodes)
    if axis == "skew":
        if sc.matrix is None:
            raise ScenarioValidationError(["skew sweep applies to a matrix scenario"])
        return replace(
            base,
            name=f"{sc.name}_skew{value}ns",
            matrix=replace(sc.matrix, skews_ns=(int(value),)),
        )
    if axis == "interferer":
        if sc.matrix is None:
            raise ScenarioValidationError(["interferer sweep applies to a matrix scenario"])
        label = "off" if value is None else f"{value:g}dB"
        return replace(
            base,
            name=f"{sc.name}_int{label}",
            matrix=replace(sc.matrix, interferer_rel_db=(value,)),
        )
    raise ScenarioValidationError([f"unknown sweep axis {axis!r}"])
