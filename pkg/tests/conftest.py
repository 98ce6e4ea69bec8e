from __future__ import annotations

import random

import pytest

from enclaveserve.clock import EventLoop
from enclaveserve.confine import reset_taint, taint_events
from enclaveserve.substrate.node import NodeSpec, Substrate


@pytest.fixture(autouse=True)
def taint_guard():
    """Private-key confinement holds across the entire suite: any raw-bytes
    export outside the enclave-boundary purposes fails the test."""
    reset_taint()
    yield
    assert taint_events() == [], f"confined secrets leaked via: {taint_events()}"


@pytest.fixture
def loop() -> EventLoop:
    return EventLoop()


@pytest.fixture
def substrate(loop: EventLoop) -> Substrate:
    return Substrate(loop)


def make_node_spec(node_id: str = "node-0", seed: int = 0, **kwargs) -> NodeSpec:
    rng = random.Random(seed)
    return NodeSpec(
        node_id=node_id,
        root_seal_key=rng.randbytes(32),
        platform_attestation_key=rng.randbytes(32),
        **kwargs,
    )
