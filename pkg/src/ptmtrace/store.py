"""File-based run store: append-only JSON-lines streams per pipeline stage.

Each record carries a ``schema`` version field and references its ancestors
by stable ids (line id, pair index, event id), so downstream stages and the
integrity check can validate the whole store without a database. Stage
completion state and input content hashes live in ``state.json`` to make
re-runs skip stages whose inputs did not change.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable

SCHEMA_VERSION = 1

STREAMS = (
    "catalog",
    "lines",
    "rejections",
    "snapshots",
    "pairs",
    "events",
    "candidates",
    "baseline_events",
    "baseline_counts",
    "line_metrics",
    "artifacts",
)

JSON_DOCS = ("metrics", "stats")

STAGES = (
    "catalog",
    "lines",
    "snapshot",
    "diff",
    "baseline",
    "harvest",
    "metrics",
    "stats",
)


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def content_hash(*parts: bytes | str) -> str:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, str):
            part = part.encode("utf-8")
        h.update(part)
        h.update(b"\x00")
    return h.hexdigest()


def hash_file(path: str | Path) -> str:
    return content_hash(Path(path).read_bytes())


class RunStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    # -- streams --

    def stream_path(self, name: str) -> Path:
        return self.root / f"{name}.jsonl"

    def write_stream(self, name: str, records: Iterable[dict]) -> int:
        path = self.stream_path(name)
        count = 0
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for record in records:
                record = dict(record)
                record.setdefault("schema", SCHEMA_VERSION)
                fh.write(_dumps(record))
                fh.write("\n")
                count += 1
        return count

    def read_stream(self, name: str) -> list[dict]:
        path = self.stream_path(name)
        if not path.exists():
            return []
        records = []
        for raw in path.read_text(encoding="utf-8").splitlines():
            if raw.strip():
                records.append(json.loads(raw))
        return records

    # -- whole-document outputs --

    def write_json(self, name: str, obj: Any) -> None:
        path = self.root / f"{name}.json"
        path.write_text(_dumps(obj) + "\n", encoding="utf-8")

    def read_json(self, name: str) -> Any:
        path = self.root / f"{name}.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    # -- stage state --

    def _state(self) -> dict:
        path = self.root / "state.json"
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))
        return {}

    def stage_state(self, stage: str) -> dict | None:
        return self._state().get(stage)

    def mark_stage(self, stage: str, input_hash: str) -> None:
        state = self._state()
        state[stage] = {"input_hash": input_hash, "complete": True}
        (self.root / "state.json").write_text(_dumps(state) + "\n", encoding="utf-8")

    def stage_complete(self, stage: str, input_hash: str) -> bool:
        info = self.stage_state(stage)
        return bool(info and info.get("complete") and info.get("input_hash") == input_hash)

    def completed_stages(self) -> list[str]:
        state = self._state()
        return [s for s in STAGES if state.get(s, {}).get("complete")]

    # -- integrity --

    def check(self) -> list[str]:
        """Validate referential integrity across streams; return violations."""
        problems: list[str] = []
        line_ids = {r["line_id"] for r in self.read_stream("lines")}
        pair_keys = {(r["line_id"], r["pair_index"]) for r in self.read_stream("pairs")}
        event_ids = set()
        for record in self.read_stream("snapshots"):
            if record["line_id"] not in line_ids:
                problems.append(f"snapshot references unknown line {record['line_id']}")
        for record in self.read_stream("pairs"):
            if record["line_id"] not in line_ids:
                problems.append(f"pair references unknown line {record['line_id']}")
        for record in self.read_stream("events"):
            event_ids.add(record["event_id"])
            key = (record["line_id"], record["pair_index"])
            if key not in pair_keys:
                problems.append(f"event {record['event_id']} references unknown pair {key}")
        baseline_ids = set()
        for record in self.read_stream("baseline_events"):
            baseline_ids.add(record["event_id"])
            key = (record["line_id"], record["pair_index"])
            if key not in pair_keys:
                problems.append(f"baseline event references unknown pair {key}")
        for record in self.read_stream("artifacts"):
            known = baseline_ids if record.get("domain") == "library" else event_ids
            for eid in record["event_ids"]:
                if eid not in known:
                    problems.append(
                        f"artifact {record['artifact_id']} references unknown event {eid}"
                    )
        return problems
