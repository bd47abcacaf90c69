"""Run-log schema and JSONL/CSV persistence.

Every entry carries ``type`` and ``schema_version``.  A log starts with one
config-echo and ends with one final-summary; serialization is canonical
(sorted keys, LF endings) so identical runs write identical bytes.
"""

from __future__ import annotations

import json
import os
from typing import Any

from .config import RunConfig
from .metrics import RoundRecord

SCHEMA_VERSION = 1

COMPARE_CSV_HEADER = "variant,best_acc,final_acc,mean_filtering_acc"


class LogFormatError(ValueError):
    pass


def _entry(entry_type: str, payload: dict[str, Any]) -> dict[str, Any]:
    return {"type": entry_type, "schema_version": SCHEMA_VERSION, **payload}


def config_echo_entry(config: RunConfig) -> dict:
    return _entry("config-echo", {"config": config.to_dict()})


def partition_summary_entry(env, config: RunConfig) -> dict:
    class_counts = []
    for ds in env.client_datasets:
        counts = [0] * config.num_classes
        for label in ds.true_labels:
            counts[int(label)] += 1
        class_counts.append(counts)
    indicator = env.plan.indicator.astype(int).tolist() if env.plan.indicator is not None else None
    return _entry("partition-summary", {
        "mode": config.partition_mode,
        "client_sizes": env.plan.client_sizes(),
        "class_counts": class_counts,
        "indicator": indicator,
    })


def noise_summary_entry(env) -> dict:
    mismatch = [float((ds.given_labels != ds.true_labels).mean()) if len(ds) else 0.0
                for ds in env.client_datasets]
    return _entry("noise-summary", {
        "client_noise_levels": [float(v) for v in env.noise.client_noise_levels],
        "corrupted_counts": [int(len(pos)) for pos in env.noise.corrupted_indices],
        "realized_mismatch_rates": mismatch,
    })


def round_record_entry(record: RoundRecord) -> dict:
    return _entry("round-record", record.to_payload())


def final_summary_entry(summary: dict) -> dict:
    return _entry("final-summary", {"summary": summary})


def dumps_entry(entry: dict) -> str:
    return json.dumps(entry, sort_keys=True, separators=(",", ":"))


def write_jsonl(path: str, entries: list[dict]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for entry in entries:
            fh.write(dumps_entry(entry))
            fh.write("\n")


def write_summary(path: str, summary: dict) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_log(path: str) -> list[dict]:
    """Parse and structurally validate a run log."""
    entries: list[dict] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogFormatError(f"line {line_no}: invalid JSON ({exc})") from exc
            if not isinstance(entry, dict) or "type" not in entry or "schema_version" not in entry:
                raise LogFormatError(f"line {line_no}: missing type or schema_version")
            entries.append(entry)
    if not entries:
        raise LogFormatError("log is empty")
    if entries[0]["type"] != "config-echo":
        raise LogFormatError("log must begin with a config-echo entry")
    if entries[-1]["type"] != "final-summary":
        raise LogFormatError("log must end with a final-summary entry")
    return entries


def format_inspect_table(entries: list[dict]) -> str:
    """Human-readable per-round summary of a parsed log."""
    lines = [f"{'round':>6} {'phase':>7} {'test_acc':>9} {'stability':>11} {'filter_acc':>11}"]
    for entry in entries:
        if entry["type"] != "round-record":
            continue
        participants = entry.get("participants", [])
        values = [p["filtering_accuracy"] for p in participants
                  if p.get("filtering_accuracy") is not None]
        mean_filter = f"{sum(values) / len(values):.4f}" if values else "-"
        stability = entry.get("training_stability")
        stability_text = f"{stability:.6f}" if stability is not None else "-"
        lines.append(f"{entry['round']:>6} {entry['phase']:>7} "
                     f"{entry['test_accuracy']:>9.4f} {stability_text:>11} {mean_filter:>11}")
    summary = entries[-1]["summary"]
    lines.append(f"best test accuracy {summary['best_test_accuracy']:.4f} "
                 f"(round {summary['best_round']}), "
                 f"final {summary['final_test_accuracy']:.4f}")
    return "\n".join(lines)
