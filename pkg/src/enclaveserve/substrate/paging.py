"""Paging-throughput and latency-inflation models.

Both models are pluggable; the defaults reproduce the orderings the rest
of the stack depends on (zero throughput without over-commitment, latency
monotone in throughput, 5x at the full-thrash reference rate).
"""

from __future__ import annotations

from typing import Iterable, Protocol

DEFAULT_T_REF_PAGES_PER_S = 1.0e4
PAGE_BYTES = 4096


class _EnclaveLike(Protocol):
    working_set_bytes: int
    page_access_rate: float


class PagingModel(Protocol):
    def throughput(self, epc_usable_bytes: int, enclaves: Iterable[_EnclaveLike]) -> float:
        """Pages/second swapped on a node hosting `enclaves`."""


class ProportionalOverflowModel:
    """Throughput = overflow fraction of total working set, times total access rate.

    overflow_fraction = max(0, sum(ws) - epc_usable) / sum(ws)
    """

    def throughput(self, epc_usable_bytes: int, enclaves: Iterable[_EnclaveLike]) -> float:
        specs = list(enclaves)
        total_ws = sum(e.working_set_bytes for e in specs)
        if total_ws <= epc_usable_bytes or total_ws == 0:
            return 0.0
        fraction = (total_ws - epc_usable_bytes) / total_ws
        return fraction * sum(e.page_access_rate for e in specs)


class LatencyModel(Protocol):
    def inflate(self, base: float, paging: float) -> float:
        """Service latency given a base latency and node paging throughput."""


class LinearLatencyModel:
    """latency = base * (1 + kappa * paging / t_ref).

    kappa = 4 makes full thrash (paging == t_ref) cost 5x the base.
    """

    def __init__(self, kappa: float = 4.0, t_ref: float = DEFAULT_T_REF_PAGES_PER_S) -> None:
        if kappa < 0 or t_ref <= 0:
            raise ValueError("kappa must be >= 0 and t_ref > 0")
        self.kappa = kappa
        self.t_ref = t_ref

    def inflate(self, base: float, paging: float) -> float:
        return base * (1.0 + self.kappa * paging / self.t_ref)


def inflate_latency(base: float, paging: float, model: LatencyModel | None = None) -> float:
    if base <= 0:
        raise ValueError("base latency must be positive")
    if paging < 0:
        raise ValueError("paging throughput must be nonnegative")
    return (model or LinearLatencyModel()).inflate(base, paging)
