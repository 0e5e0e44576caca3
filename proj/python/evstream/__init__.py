import json

from ._core import (
    EvstreamError,
    budget_events,
    build_tensor,
    event_dtype,
    generate,
    partition_bucket,
    partition_round_robin,
    read_evst,
    reconstruct_bucket,
    sample_even,
    track_rate,
    truncate_tail,
    window_split,
    write_evst,
)
from . import _core


def simulate(**config):
    """Run the simulator; returns (summary dict, list of per-window metric dicts)."""
    out = _core.simulate(**config)
    return json.loads(out["summary"]), out["metrics"]


__all__ = [
    "EvstreamError",
    "budget_events",
    "build_tensor",
    "event_dtype",
    "generate",
    "partition_bucket",
    "partition_round_robin",
    "read_evst",
    "reconstruct_bucket",
    "sample_even",
    "simulate",
    "track_rate",
    "truncate_tail",
    "window_split",
    "write_evst",
]
