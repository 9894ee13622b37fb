"""Metric rows, summary statistics and deterministic file writers.

Every statistic in a summary block is recomputable from the raw rows; the
writers use fixed format strings so a (scenario, seed) pair produces
byte-identical files run after run.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

CATEGORIES = ("correct", "false_positive", "failed", "lost")

PROTOCOL_COLUMNS = (
    "period",
    "node",
    "hop",
    "true_delay_ns",
    "estimate_ns",
    "applied_ns",
    "sync_error_ns",
    "n_correct",
    "n_false_positive",
    "n_failed",
    "n_lost",
)

MATRIX_COLUMNS = (
    "skew_ns",
    "interferer_db",
    "payload_bytes",
    "distance_m",
    "trials",
    "n_correct",
    "n_false_positive",
    "n_failed",
    "n_lost",
)


@dataclass(frozen=True)
class MetricsRow:
    """One per-period, per-slave output row of a protocol run."""

    period: int
    node: int
    hop: int
    true_delay_ns: float
    estimate_ns: float
    applied_ns: float
    sync_error_ns: float
    n_correct: int
    n_false_positive: int
    n_failed: int
    n_lost: int

    def csv_fields(self) -> list[str]:
        return [
            str(self.period),
            str(self.node),
            str(self.hop),
            _fmt(self.true_delay_ns),
            _fmt(self.estimate_ns),
            _fmt(self.applied_ns),
            _fmt(self.sync_error_ns),
            str(self.n_correct),
            str(self.n_false_positive),
            str(self.n_failed),
            str(self.n_lost),
        ]


@dataclass(frozen=True)
class MatrixRow:
    """Classification totals for one cell of the channel-fusion grid."""

    skew_ns: int
    interferer_db: float | None
    payload_bytes: int
    distance_m: float
    trials: int
    n_correct: int
    n_false_positive: int
    n_failed: int
    n_lost: int

    def csv_fields(self) -> list[str]:
        return [
            str(self.skew_ns),
            "off" if self.interferer_db is None else f"{self.interferer_db:g}",
            str(self.payload_bytes),
            f"{self.distance_m:g}",
            str(self.trials),
            str(self.n_correct),
            str(self.n_false_positive),
            str(self.n_failed),
            str(self.n_lost),
        ]

    def fraction(self, category: str) -> float:
        return getattr(self, f"n_{category}") / self.trials


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _mean(xs: list[float]) -> float:
    return sum(xs) / len(xs) if xs else math.nan


def _std(xs: list[float]) -> float:
    if len(xs) < 2:
        return math.nan
    mu = _mean(xs)
    return math.sqrt(sum((x - mu) ** 2 for x in xs) / (len(xs) - 1))


@dataclass(frozen=True)
class HopStats:
    hop: int
    samples: int
    mean_true_ns: float
    mean_err_ns: float
    std_err_ns: float
    mean_rel_err: float
    mean_sync_ns: float
    std_sync_ns: float


def hop_statistics(rows: list[MetricsRow], warmup_periods: int) -> list[HopStats]:
    """Per-hop estimation and sync error statistics over post-warmup rows."""
    usable = [
        r
        for r in rows
        if r.period >= warmup_periods and not math.isnan(r.estimate_ns)
    ]
    out = []
    for hop in sorted({r.hop for r in usable}):
        sub = [r for r in usable if r.hop == hop]
        errs = [r.estimate_ns - r.true_delay_ns for r in sub]
        syncs = [r.sync_error_ns for r in sub if not math.isnan(r.sync_error_ns)]
        mean_true = _mean([r.true_delay_ns for r in sub])
        mean_err = _mean(errs)
        out.append(
            HopStats(
                hop=hop,
                samples=len(sub),
                mean_true_ns=mean_true,
                mean_err_ns=mean_err,
                std_err_ns=_std(errs),
                mean_rel_err=abs(mean_err) / mean_true if mean_true else math.nan,
                mean_sync_ns=_mean(syncs),
                std_sync_ns=_std(syncs),
            )
        )
    return out


def classification_totals(rows) -> dict[str, int]:
    totals = {c: 0 for c in CATEGORIES}
    for r in rows:
        for c in CATEGORIES:
            totals[c] += getattr(r, f"n_{c}")
    return totals


def summary_lines(
    scenario_name: str,
    seed: int,
    warmup_periods: int,
    rows: list[MetricsRow],
) -> list[str]:
    lines = [
        "summary",
        f"scenario={scenario_name} seed={seed} warmup_periods={warmup_periods}",
    ]
    for st in hop_statistics(rows, warmup_periods):
        lines.append(
            f"hop={st.hop} samples={st.samples} mean_true_ns={_fmt(st.mean_true_ns)} "
            f"mean_err_ns={_fmt(st.mean_err_ns)} std_err_ns={_fmt(st.std_err_ns)} "
            f"mean_rel_err={st.mean_rel_err:.6f} "
            f"mean_sync_ns={_fmt(st.mean_sync_ns)} std_sync_ns={_fmt(st.std_sync_ns)}"
        )
    totals = classification_totals(rows)
    n = sum(totals.values())
    if n:
        parts = " ".join(f"{c}={totals[c]} ({100.0 * totals[c] / n:.2f}%)" for c in CATEGORIES)
        lines.append(f"classification {parts}")
    return lines


def matrix_summary_lines(scenario_name: str, seed: int, rows: list[MatrixRow]) -> list[str]:
    lines = ["summary", f"scenario={scenario_name} seed={seed}"]
    for r in rows:
        pct = " ".join(f"{c}={100.0 * r.fraction(c):.2f}%" for c in CATEGORIES)
        interferer = "off" if r.interferer_db is None else f"{r.interferer_db:g}dB"
        lines.append(
            f"cell skew={r.skew_ns}ns interferer={interferer} payload={r.payload_bytes}B "
            f"distance={r.distance_m:g}m trials={r.trials} {pct}"
        )
    return lines


def comparison_lines(
    off_rows: list[MetricsRow], on_rows: list[MetricsRow], warmup_periods: int
) -> list[str]:
    """Seed-paired compensation-off vs compensation-on sync error table."""
    off_stats = {s.hop: s for s in hop_statistics(off_rows, warmup_periods)}
    on_stats = {s.hop: s for s in hop_statistics(on_rows, warmup_periods)}
    lines = ["comparison compensation off/on (seed-paired)"]
    for hop in sorted(off_stats):
        off = off_stats[hop]
        on = on_stats.get(hop)
        if on is None:
            continue
        lines.append(
            f"hop={hop} mean_sync_off_ns={_fmt(off.mean_sync_ns)} "
            f"mean_sync_on_ns={_fmt(on.mean_sync_ns)} "
            f"diff_ns={_fmt(off.mean_sync_ns - on.mean_sync_ns)}"
        )
    return lines


def write_csv(path: str, columns: tuple[str, ...], rows, footer: list[str]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(row.csv_fields()) + "\n")
        for line in footer:
            fh.write(f"# {line}\n")


def write_jsonl(path: str, rows, footer: list[str]) -> None:
    with open(path, "w", newline="\n") as fh:
        for row in rows:
            payload = {k: (None if isinstance(v, float) and math.isnan(v) else v)
                       for k, v in asdict(row).items()}
            fh.write(json.dumps(payload, sort_keys=True) + "\n")
        if footer:
            fh.write(json.dumps({"summary": footer}, sort_keys=True) + "\n")
