"""File formats: datasets, sweep results, plot exports, limits, store snapshots.

All formats are delimited text with a versioned `#`-prefixed header block,
UTC timestamps, and floats serialized with 17 significant digits so that
round trips are lossless.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable

from .errors import DataFormatError
from .evaluation import LimitValue, ModelLimits, ModelMetrics, SweepResult, SweepStep
from .store import SYNTHETIC_PREFIX, HistoryStore

DATASET_MAGIC = "#rba-dataset v1"
SWEEP_MAGIC = "#rba-sweep v1"
PLOT_MAGIC = "#rba-plot v1"
LIMITS_MAGIC = "#rba-limits v1"
STORE_MAGIC = "#rba-store v1"


def _fmt(x: float) -> str:
    return format(x, ".17g")


@dataclass(frozen=True)
class LoginEvent:
    """One successful authentication: who, when, and the feature values."""

    user_id: str
    timestamp: datetime
    values: tuple[str, ...]


@dataclass
class Dataset:
    feature_ids: tuple[str, ...]
    events: list[LoginEvent]
    codec_meta: dict[str, str] = field(default_factory=dict)

    @property
    def user_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for ev in self.events:
            seen.setdefault(ev.user_id, None)
        return list(seen)


def format_timestamp(ts: datetime) -> str:
    ts = ts.astimezone(timezone.utc)
    if ts.microsecond:
        return ts.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str, row: int | None = None) -> datetime:
    for fmt in ("%Y-%m-%dT%H:%M:%SZ", "%Y-%m-%dT%H:%M:%S.%fZ"):
        try:
            return datetime.strptime(text, fmt).replace(tzinfo=timezone.utc)
        except ValueError:
            continue
    raise DataFormatError(f"invalid UTC timestamp {text!r}", row=row)


# -- dataset files -------------------------------------------------------


def write_dataset(dataset: Dataset, path: str):
    with open(path, "w", newline="") as fh:
        fh.write(DATASET_MAGIC + "\n")
        fh.write("#features " + ",".join(dataset.feature_ids) + "\n")
        if dataset.codec_meta:
            meta = " ".join(f"{k}={v}" for k, v in sorted(dataset.codec_meta.items()))
            fh.write("#codec " + meta + "\n")
        writer = csv.writer(fh)
        writer.writerow(["user_id", "timestamp", *dataset.feature_ids])
        for ev in dataset.events:
            writer.writerow([ev.user_id, format_timestamp(ev.timestamp), *ev.values])


def read_dataset(path: str) -> Dataset:
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != DATASET_MAGIC:
            raise DataFormatError(
                f"unsupported dataset header {first!r}, expected {DATASET_MAGIC!r}"
            )
        feature_ids: tuple[str, ...] | None = None
        codec_meta: dict[str, str] = {}
        pos = fh.tell()
        line = fh.readline()
        while line.startswith("#"):
            stripped = line.rstrip("\n")
            if stripped.startswith("#features "):
                feature_ids = tuple(stripped[len("#features "):].split(","))
            elif stripped.startswith("#codec "):
                for item in stripped[len("#codec "):].split():
                    key, _, value = item.partition("=")
                    codec_meta[key] = value
            pos = fh.tell()
            line = fh.readline()
        fh.seek(pos)
        reader = csv.reader(fh)
        try:
            columns = next(reader)
        except StopIteration:
            raise DataFormatError("missing column header row") from None
        if feature_ids is None:
            feature_ids = tuple(columns[2:])
        if list(columns) != ["user_id", "timestamp", *feature_ids]:
            raise DataFormatError(
                f"column header {columns!r} does not match features {feature_ids!r}"
            )
        events: list[LoginEvent] = []
        previous: datetime | None = None
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 2 + len(feature_ids):
                raise DataFormatError(
                    f"expected {2 + len(feature_ids)} fields, found {len(row)}",
                    row=row_no,
                )
            ts = parse_timestamp(row[1], row=row_no)
            if previous is not None and ts < previous:
                raise DataFormatError("timestamps are not in chronological order", row=row_no)
            previous = ts
            events.append(LoginEvent(row[0], ts, tuple(row[2:])))
        return Dataset(feature_ids=feature_ids, events=events, codec_meta=codec_meta)


# -- sweep result files --------------------------------------------------

_SWEEP_COLUMNS = [
    "model", "step", "threshold", "tpr", "rsr_basic",
    "tpr_relative", "rsr_relative", "additional_entries", "baseline_entries", "valid",
]


def write_sweep_result(result: SweepResult, path: str):
    with open(path, "w", newline="") as fh:
        fh.write(SWEEP_MAGIC + "\n")
        fh.write(f"#enhancement {result.enhancement}\n")
        fh.write(f"#seed {result.seed}\n")
        fh.write(f"#target_tpr {_fmt(result.target_tpr)}\n")
        fh.write(f"#attempts_per_victim {result.attempts_per_victim}\n")
        fh.write("#models " + ",".join(result.attacker_models) + "\n")
        fh.write(f"#rsr_limit_delta {_fmt(result.rsr_limit_delta)}\n")
        writer = csv.writer(fh)
        writer.writerow(_SWEEP_COLUMNS)
        for step in result.steps:
            for model in result.attacker_models:
                m = step.metrics[model]
                writer.writerow([
                    model, step.step, _fmt(m.threshold), _fmt(m.tpr), _fmt(m.rsr_basic),
                    _fmt(m.tpr_relative), _fmt(m.rsr_relative),
                    step.additional_entries, step.baseline_entries,
                    "true" if m.valid else "false",
                ])


def read_sweep_result(path: str) -> SweepResult:
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != SWEEP_MAGIC:
            raise DataFormatError(
                f"unsupported sweep header {first!r}, expected {SWEEP_MAGIC!r}"
            )
        headers: dict[str, str] = {}
        pos = fh.tell()
        line = fh.readline()
        while line.startswith("#"):
            key, _, value = line.rstrip("\n").lstrip("#").partition(" ")
            headers[key] = value
            pos = fh.tell()
            line = fh.readline()
        fh.seek(pos)
        reader = csv.reader(fh)
        columns = next(reader)
        if columns != _SWEEP_COLUMNS:
            raise DataFormatError(f"unexpected sweep columns {columns!r}")
        models = tuple(headers.get("models", "").split(",")) if headers.get("models") else ()
        steps: dict[int, SweepStep] = {}
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(_SWEEP_COLUMNS):
                raise DataFormatError("malformed sweep row", row=row_no)
            model, step_s, thr, tpr, rsr, tpr_rel, rsr_rel, add, base, valid = row
            step_no = int(step_s)
            step = steps.setdefault(
                step_no,
                SweepStep(step=step_no, metrics={}, additional_entries=int(add),
                          baseline_entries=int(base)),
            )
            step.metrics[model] = ModelMetrics(
                tpr=float(tpr), rsr_basic=float(rsr),
                tpr_relative=float(tpr_rel), rsr_relative=float(rsr_rel),
                threshold=float(thr), valid=(valid == "true"),
            )
        return SweepResult(
            enhancement=headers.get("enhancement", ""),
            steps=[steps[k] for k in sorted(steps)],
            seed=int(headers.get("seed", "0")),
            target_tpr=float(headers.get("target_tpr", "0.995")),
            attempts_per_victim=int(headers.get("attempts_per_victim", "0")),
            attacker_models=models,
            rsr_limit_delta=float(headers.get("rsr_limit_delta", "0.01")),
        )


# -- plot data export ----------------------------------------------------


def export_plot_data(result: SweepResult, path: str):
    """Per-model series of (step, tpr_relative) and (step, rsr_relative) in
    a flat delimited form; k-anonymity sweeps carry the padding overhead.
    """
    overhead = result.enhancement == "k_anonymity"
    with open(path, "w", newline="") as fh:
        fh.write(PLOT_MAGIC + "\n")
        fh.write(f"#enhancement {result.enhancement}\n")
        writer = csv.writer(fh)
        writer.writerow(["series", "model", "step", "value", "additional_entries"])
        for series in ("tpr_relative", "rsr_relative"):
            for model in result.attacker_models:
                for step in result.steps:
                    value = getattr(step.metrics[model], series)
                    writer.writerow([
                        series, model, step.step, _fmt(value),
                        step.additional_entries if overhead else "",
                    ])


# -- limits files --------------------------------------------------------


def write_limits(limits: dict[str, ModelLimits], path: str):
    with open(path, "w", newline="") as fh:
        fh.write(LIMITS_MAGIC + "\n")
        writer = csv.writer(fh)
        writer.writerow(["model", "test", "limit_step", "open_ended"])
        for model, ml in limits.items():
            for test, lv in (("tpr", ml.tpr_limit), ("rsr", ml.rsr_limit),
                             ("combined", ml.combined)):
                writer.writerow([model, test, lv.step, "true" if lv.open_ended else "false"])


def read_limits(path: str) -> dict[str, ModelLimits]:
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != LIMITS_MAGIC:
            raise DataFormatError(f"unsupported limits header {first!r}")
        reader = csv.reader(fh)
        next(reader)
        parts: dict[str, dict[str, LimitValue]] = {}
        for row in reader:
            if not row:
                continue
            model, test, step, open_ended = row
            parts.setdefault(model, {})[test] = LimitValue(
                step=int(step), open_ended=(open_ended == "true")
            )
        return {
            model: ModelLimits(
                tpr_limit=entry["tpr"], rsr_limit=entry["rsr"], combined=entry["combined"]
            )
            for model, entry in parts.items()
        }


# -- store snapshots -----------------------------------------------------


def write_store_snapshot(store: HistoryStore, path: str):
    """Histogram-only snapshot: global and per-user counts plus the
    padding ledger. Retention event logs are not serialized.
    """
    with open(path, "w", newline="") as fh:
        fh.write(STORE_MAGIC + "\n")
        fh.write("#features " + ",".join(store.feature_ids) + "\n")
        fh.write(
            f"#ledger additional={store.ledger.additional_entries} "
            f"baseline={store.ledger.baseline_entries} real={store.total_logins}\n"
        )
        writer = csv.writer(fh)
        writer.writerow(["section", "user", "feature", "value", "count"])
        for feature_id, counts in store.global_counts.items():
            for value, count in counts.items():
                writer.writerow(["global", "", feature_id, value, count])
        for user_id, per_feature in store.user_counts.items():
            for feature_id, counts in per_feature.items():
                for value, count in counts.items():
                    writer.writerow(["user", user_id, feature_id, value, count])


def read_store_snapshot(path: str) -> HistoryStore:
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != STORE_MAGIC:
            raise DataFormatError(f"unsupported store header {first!r}")
        feature_ids: tuple[str, ...] = ()
        ledger_meta: dict[str, int] = {}
        pos = fh.tell()
        line = fh.readline()
        while line.startswith("#"):
            stripped = line.rstrip("\n")
            if stripped.startswith("#features "):
                feature_ids = tuple(stripped[len("#features "):].split(","))
            elif stripped.startswith("#ledger "):
                for item in stripped[len("#ledger "):].split():
                    key, _, value = item.partition("=")
                    ledger_meta[key] = int(value)
            pos = fh.tell()
            line = fh.readline()
        fh.seek(pos)
        store = HistoryStore(feature_ids)
        reader = csv.reader(fh)
        next(reader)
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 5:
                raise DataFormatError("malformed snapshot row", row=row_no)
            section, user_id, feature_id, value, count_s = row
            count = int(count_s)
            if feature_id not in store.global_counts:
                raise DataFormatError(f"unknown feature {feature_id!r}", row=row_no)
            if section == "global":
                store.global_counts[feature_id][value] = count
                store.global_totals[feature_id] += count
            elif section == "user":
                store._ensure_user(user_id)
                store.user_counts[user_id][feature_id][value] = count
                store._holders[feature_id].setdefault(value, set()).add(user_id)
                if user_id.startswith(SYNTHETIC_PREFIX):
                    store.synthetic_users.add(user_id)
                    if user_id not in store._synthetic_order:
                        store._synthetic_order.append(user_id)
                else:
                    store._real_users.add(user_id)
            else:
                raise DataFormatError(f"unknown section {section!r}", row=row_no)
        # user totals are entry counts: every entry contributes once per feature
        first_feature = store.feature_ids[0]
        for user_id, per_feature in store.user_counts.items():
            store.user_totals[user_id] = sum(per_feature[first_feature].values())
        store.ledger.additional_entries = ledger_meta.get("additional", 0)
        store.ledger.baseline_entries = ledger_meta.get("baseline", 0)
        store._real_entries = ledger_meta.get(
            "real", sum(store.user_totals[u] for u in store._real_users)
        )
        return store
