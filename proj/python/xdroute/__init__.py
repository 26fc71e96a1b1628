"""Python bindings for the xdroute multi-domain routing core."""

from ._xdroute import (
    Graph,
    Simulator,
    XdrError,
    candidate_count,
    decode_message,
    default_config,
    encode_message,
    epsilon,
    evaluate_baselines,
    k_shortest_paths,
    link_loss,
    link_throughput,
    normalize,
    shortest_path,
)

__all__ = [
    "Graph",
    "Simulator",
    "XdrError",
    "candidate_count",
    "decode_message",
    "default_config",
    "encode_message",
    "epsilon",
    "evaluate_baselines",
    "k_shortest_paths",
    "link_loss",
    "link_throughput",
    "normalize",
    "shortest_path",
]
