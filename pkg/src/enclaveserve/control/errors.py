from __future__ import annotations


class ControlError(Exception):
    """Base error for telemetry and control loops."""


class NodeUnreachable(ControlError):
    """Sample could not be taken; the cycle records a gap."""


class InsufficientSamples(ControlError):
    pass


class SloUnattainable(ControlError):
    """Profiled p99 exceeds the SLO even with zero paging."""


class PlacementFailure(ControlError):
    """No node available for a requested replica."""
