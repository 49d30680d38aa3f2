"""Discrete-event simulator of the queue, regenerative estimators and Monte-Carlo oracles.

A class-<k arrival during a class-k pause does not interrupt the pause
(overheads are nonpreemptible); it just joins its queue and is picked up
at the next dispatch.
"""

from __future__ import annotations

from .engine import SimOptions, encode_distribution, simulate, stream_states, structural_counters
from .estimates import Estimate, SimEstimates
from .oracles import JointSample, sample_chains, sample_jobs
from .trace import Trace, conformance_violations

__all__ = [
    "Estimate",
    "JointSample",
    "SimEstimates",
    "SimOptions",
    "Trace",
    "conformance_violations",
    "encode_distribution",
    "sample_chains",
    "sample_jobs",
    "simulate",
    "stream_states",
    "structural_counters",
]
