"""Open-loop Poisson workload generation.

The full arrival stream is drawn up front from the workload seed, so send
times cannot depend on response latencies and identical seeds give
identical streams.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass


@dataclass(frozen=True)
class WorkloadSpec:
    service_id: str
    rate_per_s: float
    duration_s: float
    rng_seed: int = 0
    payload_bytes: int = 64
    timeout_s: float = 10.0

    def __post_init__(self) -> None:
        if self.rate_per_s <= 0:
            raise ValueError("rate_per_s must be positive")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if self.payload_bytes < 1 or self.timeout_s <= 0:
            raise ValueError("payload_bytes and timeout_s must be positive")


def generate_arrivals(spec: WorkloadSpec) -> list[float]:
    """Send offsets in [0, duration): i.i.d. exponential gaps, mean 1/rate."""
    rng = random.Random(spec.rng_seed)
    arrivals: list[float] = []
    t = rng.expovariate(spec.rate_per_s)
    while t < spec.duration_s:
        arrivals.append(t)
        t += rng.expovariate(spec.rate_per_s)
    return arrivals


def request_payload(spec: WorkloadSpec, index: int) -> bytes:
    """Deterministic opaque payload for request `index`."""
    seed = hashlib.sha256(f"{spec.service_id}:{spec.rng_seed}:{index}".encode()).digest()
    reps = (spec.payload_bytes + len(seed) - 1) // len(seed)
    return (seed * reps)[: spec.payload_bytes]
