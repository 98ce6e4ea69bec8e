"""Nodes, enclaves, and EPC residency accounting.

Each node serializes its mutations through one lock (the per-node substrate
authority); telemetry reads take a consistent snapshot under the same lock.
Paging counters integrate the model throughput over clock time, so samples
taken at any instant reflect everything scheduled before them.

A node can be over-committed: launches never fail for capacity, the paging
model absorbs the overflow. Residency under contention is split in
proportion to working-set demand and always sums to at most the usable EPC.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from ..clock import Clock
from . import attest, sealing
from .errors import DuplicateEnclave, EnclaveNotRunning
from .paging import (
    DEFAULT_T_REF_PAGES_PER_S,
    LatencyModel,
    LinearLatencyModel,
    PAGE_BYTES,
    PagingModel,
    ProportionalOverflowModel,
)

MIB = 1024 * 1024
DEFAULT_EPC_USABLE_BYTES = 93 * MIB


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    root_seal_key: bytes
    platform_attestation_key: bytes
    epc_usable_bytes: int = DEFAULT_EPC_USABLE_BYTES
    cpu_cores: int = 1

    def __post_init__(self) -> None:
        if self.epc_usable_bytes <= 0:
            raise ValueError("epc_usable_bytes must be positive")
        if self.cpu_cores < 1:
            raise ValueError("cpu_cores must be >= 1")
        if len(self.root_seal_key) != 32 or len(self.platform_attestation_key) != 32:
            raise ValueError("node keys must be 32 bytes")


@dataclass(frozen=True)
class EnclaveSpec:
    enclave_id: str
    measurement: bytes
    requested_epc_bytes: int
    working_set_bytes: int
    page_access_rate: float = 0.0
    system_enclave: bool = False

    def __post_init__(self) -> None:
        if len(self.measurement) != 32:
            raise ValueError("measurement must be 32 bytes")
        if self.requested_epc_bytes <= 0:
            raise ValueError("requested_epc_bytes must be positive")
        if not 0 <= self.working_set_bytes <= self.requested_epc_bytes:
            raise ValueError("working_set_bytes must be within [0, requested_epc_bytes]")
        if self.page_access_rate < 0:
            raise ValueError("page_access_rate must be nonnegative")


@dataclass(frozen=True)
class NodePagingState:
    """Telemetry snapshot of one node, mirroring a driver's proc files."""

    node_id: str
    resident_bytes: dict[str, int]
    pages_in_total: int
    pages_out_total: int
    enclaves: tuple[EnclaveSpec, ...]


@dataclass
class EnclaveHandle:
    node: "Node"
    spec: EnclaveSpec
    running: bool = True

    def create_report(self, report_data: bytes) -> attest.EnclaveReport:
        return self.node.create_report(self, report_data)

    def seal(self, plaintext: bytes) -> sealing.SealedBlob:
        return self.node.seal(self, plaintext)

    def unseal(self, blob: sealing.SealedBlob) -> bytes:
        return self.node.unseal(self, blob)


class Node:
    def __init__(
        self,
        spec: NodeSpec,
        clock: Clock,
        paging_model: PagingModel | None = None,
        latency_model: LatencyModel | None = None,
        t_ref: float = DEFAULT_T_REF_PAGES_PER_S,
    ) -> None:
        self.spec = spec
        self.t_ref = t_ref
        self.clock = clock
        self._paging_model = paging_model or ProportionalOverflowModel()
        self.latency_model = latency_model or LinearLatencyModel(t_ref=t_ref)
        self._lock = threading.RLock()
        self._enclaves: dict[str, EnclaveHandle] = {}
        self._pages_in = 0.0
        self._pages_out = 0.0
        self._last_advance = clock.now()
        self._seal_counter = 0

    @property
    def node_id(self) -> str:
        return self.spec.node_id

    # -- enclave lifecycle --------------------------------------------------

    def launch_enclave(self, spec: EnclaveSpec) -> EnclaveHandle:
        with self._lock:
            self._advance()
            if spec.enclave_id in self._enclaves:
                raise DuplicateEnclave(
                    f"enclave {spec.enclave_id!r} already running on {self.node_id!r}"
                )
            handle = EnclaveHandle(self, spec)
            self._enclaves[spec.enclave_id] = handle
            return handle

    def terminate_enclave(self, handle: EnclaveHandle) -> None:
        with self._lock:
            self._advance()
            existing = self._enclaves.get(handle.spec.enclave_id)
            if existing is not handle or not handle.running:
                raise EnclaveNotRunning(f"enclave {handle.spec.enclave_id!r} is not running")
            handle.running = False
            del self._enclaves[handle.spec.enclave_id]

    def running_enclaves(self) -> list[EnclaveSpec]:
        with self._lock:
            return [h.spec for h in self._enclaves.values()]

    def enclave_handle(self, enclave_id: str) -> EnclaveHandle | None:
        with self._lock:
            return self._enclaves.get(enclave_id)

    # -- paging accounting ---------------------------------------------------

    def _advance(self) -> None:
        now = self.clock.now()
        dt = now - self._last_advance
        if dt > 0:
            rate = self._paging_model.throughput(
                self.spec.epc_usable_bytes, [h.spec for h in self._enclaves.values()]
            )
            # page-in and page-out move in lockstep when the EPC is full
            self._pages_in += rate * dt / 2.0
            self._pages_out += rate * dt / 2.0
        self._last_advance = now

    def paging_throughput(self) -> float:
        with self._lock:
            return self._paging_model.throughput(
                self.spec.epc_usable_bytes, [h.spec for h in self._enclaves.values()]
            )

    def residency(self) -> dict[str, int]:
        with self._lock:
            return self._residency_locked()

    def _residency_locked(self) -> dict[str, int]:
        specs = [h.spec for h in self._enclaves.values()]
        total_ws = sum(s.working_set_bytes for s in specs)
        epc = self.spec.epc_usable_bytes
        if total_ws <= epc:
            return {s.enclave_id: s.working_set_bytes for s in specs}
        return {s.enclave_id: epc * s.working_set_bytes // total_ws for s in specs}

    def service_latency(self, base: float) -> float:
        """Base latency inflated by the node's current paging throughput."""
        with self._lock:
            return self.latency_model.inflate(base, self.paging_throughput())

    def paging_state(self) -> NodePagingState:
        with self._lock:
            self._advance()
            return NodePagingState(
                node_id=self.node_id,
                resident_bytes=self._residency_locked(),
                pages_in_total=int(self._pages_in),
                pages_out_total=int(self._pages_out),
                enclaves=tuple(h.spec for h in self._enclaves.values()),
            )

    def proc_snapshot(self) -> str:
        """Stable textual export, one `id measurement resident_pages flag`
        line per enclave, then a `pages_in pages_out` stats line."""
        state = self.paging_state()
        lines = []
        for spec in state.enclaves:
            resident_pages = state.resident_bytes[spec.enclave_id] // PAGE_BYTES
            flag = 1 if spec.system_enclave else 0
            lines.append(f"{spec.enclave_id} {spec.measurement.hex()} {resident_pages} {flag}")
        lines.append(f"{state.pages_in_total} {state.pages_out_total}")
        return "\n".join(lines) + "\n"

    # -- enclave-boundary operations ------------------------------------------

    def _require_running(self, handle: EnclaveHandle) -> None:
        if not handle.running or self._enclaves.get(handle.spec.enclave_id) is not handle:
            raise EnclaveNotRunning(f"enclave {handle.spec.enclave_id!r} is not running")

    def create_report(self, handle: EnclaveHandle, report_data: bytes) -> attest.EnclaveReport:
        with self._lock:
            self._require_running(handle)
            return attest.make_report(
                self.spec.platform_attestation_key,
                handle.spec.measurement,
                self.node_id,
                report_data,
            )

    def seal(self, handle: EnclaveHandle, plaintext: bytes) -> sealing.SealedBlob:
        with self._lock:
            self._require_running(handle)
            self._seal_counter += 1
            nonce = bytes(4) + self._seal_counter.to_bytes(8, "big")
            return sealing.seal_bytes(
                self.spec.root_seal_key, self.node_id, handle.spec.measurement, nonce, plaintext
            )

    def unseal(self, handle: EnclaveHandle, blob: sealing.SealedBlob) -> bytes:
        with self._lock:
            self._require_running(handle)
            return sealing.unseal_bytes(self.spec.root_seal_key, handle.spec.measurement, blob)


class Substrate:
    """The cluster: every node plus the verifier-trusted platform registry."""

    def __init__(self, clock: Clock) -> None:
        self.clock = clock
        self.registry = attest.PlatformRegistry()
        self._nodes: dict[str, Node] = {}

    def add_node(
        self,
        spec: NodeSpec,
        paging_model: PagingModel | None = None,
        latency_model: LatencyModel | None = None,
        t_ref: float = DEFAULT_T_REF_PAGES_PER_S,
    ) -> Node:
        if spec.node_id in self._nodes:
            raise ValueError(f"node {spec.node_id!r} already exists")
        node = Node(spec, self.clock, paging_model, latency_model, t_ref)
        self._nodes[spec.node_id] = node
        self.registry.register(spec.node_id, spec.platform_attestation_key)
        return node

    def node(self, node_id: str) -> Node:
        return self._nodes[node_id]

    def nodes(self) -> list[Node]:
        return list(self._nodes.values())

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes
