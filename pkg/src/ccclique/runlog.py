"""Run-time assertion log shared by the coloring pipelines.

Hard invariants raise immediately; expected-to-mostly-hold events (the
"with high probability" claims) are recorded and trigger fallbacks without
aborting the run.  Harness reports embed the log.
"""

from __future__ import annotations


class RunLog:
    def __init__(self):
        self.entries: list[dict] = []

    def record(self, name: str, ok: bool, **info) -> bool:
        entry = {"check": name, "ok": bool(ok)}
        entry.update(info)
        self.entries.append(entry)
        return ok

    def require(self, name: str, ok: bool, **info) -> None:
        self.record(name, ok, **info)
        if not ok:
            raise AssertionError(f"invariant {name} failed: {info}")

    def note(self, name: str, **info) -> None:
        entry = {"note": name}
        entry.update(info)
        self.entries.append(entry)

    @property
    def failures(self) -> list[dict]:
        return [e for e in self.entries if "ok" in e and not e["ok"]]
