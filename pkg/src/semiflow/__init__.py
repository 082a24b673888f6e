"""Exact, depth-truncated flow networks on the binary tree and the semi-measures they induce."""
from .engine import RunConfig, RunResult, resume, run
from .flow import FlowTable, flow_table
from .network import EdgeRecord, NetworkState
from .rationals import Rational, format_rat, parse_rat

__all__ = [
    "EdgeRecord", "FlowTable", "NetworkState", "Rational", "RunConfig", "RunResult",
    "flow_table", "format_rat", "parse_rat", "resume", "run",
]
