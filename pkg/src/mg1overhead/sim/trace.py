"""Event traces and a replay checker for the scheduling rules.

A trace line is ``time<TAB>kind<TAB>class<TAB>job``.  Tracing is meant for
short conformance runs; it stores every event in memory.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from ..model import Mode
from . import kernel as K

__all__ = ["Trace", "conformance_violations"]


@dataclass
class Trace:
    time: np.ndarray
    kind: np.ndarray
    cls: np.ndarray
    job: np.ndarray

    def __len__(self) -> int:
        return int(self.time.shape[0])

    def __iter__(self) -> Iterator[tuple[float, str, int, int]]:
        for t, k, c, j in zip(self.time, self.kind, self.cls, self.job):
            yield float(t), K.TRACE_KINDS[k], int(c), int(j)

    def lines(self) -> Iterator[str]:
        for t, kind, c, j in self:
            yield f"{t!r}\t{kind}\t{c}\t{j}"

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.lines():
                fh.write(line + "\n")


def conformance_violations(trace: Trace, mode: Mode = Mode.PAUSE_RESUME, limit: int = 20) -> list[str]:
    """Replay ``trace`` and list breaches of the scheduling rules (empty when conformant).

    Checked: every service or resume start goes to the best-priority job
    present (lowest class, FCFS within class); a resume is followed by a
    pause exactly when a higher-priority arrival came during it; overheads
    are never interrupted; preemption happens only on a higher-priority
    arrival during service; an arrival is tagged early exactly when no
    same-class job present has started service.
    """
    events = list(trace)
    problems: list[str] = []
    jobs: dict[int, list] = {}  # id -> [class, arrival seq, started, paused]
    seq = 0
    activity: tuple[str, int] | None = None  # (state, job)
    resume_hit = False

    def report(i: int, msg: str) -> None:
        if len(problems) < limit:
            t, kind, c, j = events[i]
            problems.append(f"event {i} (t={t}, {kind}, class {c}, job {j}): {msg}")

    def best() -> int | None:
        if not jobs:
            return None
        return min(jobs, key=lambda x: (jobs[x][0], jobs[x][1]))

    for i, (t, kind, c, j) in enumerate(events):
        nxt = events[i + 1] if i + 1 < len(events) else None
        if kind == "arrival":
            started_same = any(v[0] == c and v[2] for v in jobs.values())
            tagged = nxt is not None and nxt[1] == "early" and nxt[3] == j
            if tagged == started_same:
                report(i, f"early tag {tagged} but started same-class job present={started_same}")
            jobs[j] = [c, seq, False, False]
            seq += 1
            if activity is not None:
                state, owner = activity
                k = jobs[owner][0]
                if state == "resume" and c < k:
                    resume_hit = True
                if state == "serve" and c < k:
                    follow = "pause_start" if mode is Mode.PAUSE_RESUME else "restart"
                    if nxt is None or nxt[1] not in ("early", follow):
                        report(i, "higher-priority arrival during service did not preempt")
        elif kind == "early":
            continue
        elif kind in ("service_start", "resume_start"):
            if activity is not None:
                report(i, f"start while {activity[0]} of job {activity[1]} in progress")
            if j not in jobs:
                report(i, "job not in system")
                continue
            if j != best():
                report(i, f"job {j} started but best-priority job is {best()}")
            if kind == "resume_start":
                if not jobs[j][3]:
                    report(i, "resume of a job that was not paused")
                activity, resume_hit = ("resume", j), False
            else:
                if jobs[j][3]:
                    report(i, "paused job served without a resume")
                jobs[j][2] = True
                activity = ("serve", j)
        elif kind == "service_end":
            if activity != ("serve", j):
                report(i, "service end without matching service")
            jobs.pop(j, None)
            activity = None
        elif kind == "pause_start":
            if activity not in (("serve", j), None):
                report(i, f"pause started during {activity}")
            if j in jobs:
                jobs[j][3] = True
            activity = ("pause", j)
        elif kind == "pause_end":
            if activity != ("pause", j):
                report(i, "pause end without matching pause")
            activity = None
            if jobs and (nxt is None or nxt[1] not in ("service_start", "resume_start") or nxt[0] != t):
                if nxt is not None:
                    report(i, "no dispatch right after pause end")
        elif kind == "resume_end":
            if activity != ("resume", j):
                report(i, "resume end without matching resume")
            activity = None
            want = "pause_start" if resume_hit else "service_start"
            if nxt is not None and (nxt[1] != want or nxt[3] != j):
                report(i, f"expected {want} of job {j} after resume (higher-priority arrival during resume: {resume_hit})")
            if not resume_hit and j in jobs:
                jobs[j][3] = False
                # the service start that follows is not a fresh dispatch
                activity = None
        elif kind == "restart":
            if activity != ("serve", j):
                report(i, "restart of a job not in service")
            activity = None
    return problems
