"""Model-server replicas.

A replica serves only after acquiring its service PKI: it generates a
temporary X25519 pair inside its enclave, creates a report whose user data
is the hash of the temporary public key, asks the keystore to provision the
PKI, and decrypts the response in-enclave. Every replica of a service ends
up presenting the byte-identical certificate, which is what makes frontend
failover invisible to clients.

Inference itself is a calibrated stub: the response echoes the payload and
the service time is the replica's base time inflated by the node's paging
throughput at the moment service starts.
"""

from __future__ import annotations

import random
import struct
import threading
import time
from collections import deque

from .. import crypto
from ..aecs.errors import AecsError
from ..aecs.service import decode_pki
from ..aecs.wire import AecsClient, ProvisionRequest
from ..channel import record
from ..channel.certs import ServicePki
from ..channel.errors import SecureChannelError
from ..channel.handshake import server_handshake
from ..channel.transport import FrameTransport
from ..clock import Clock
from ..substrate.errors import SubstrateError
from ..substrate.node import EnclaveHandle, EnclaveSpec, Node
from .errors import EnclaveLaunchFailed, ProvisioningFailed, SessionError


class ModelServerReplica:
    def __init__(
        self,
        replica_id: str,
        service_id: str,
        node: Node,
        enclave: EnclaveHandle,
        pki: ServicePki,
        base_inference_time: float,
        parallelism: int = 1,
    ) -> None:
        self.replica_id = replica_id
        self.service_id = service_id
        self.node = node
        self.enclave = enclave
        self.pki = pki
        self.base_inference_time = base_inference_time
        self.parallelism = parallelism
        self.active_connections = 0
        self._lock = threading.Lock()
        self._closed_busy: deque[tuple[float, float]] = deque()
        self._open_busy: dict[int, float] = {}
        self._busy_token = 0
        self.crashed = False

    @property
    def certificate(self):
        return self.pki.certificate

    # -- latency -----------------------------------------------------------------

    def compute_service_time(self, base_time: float | None = None) -> float:
        """Base inference time inflated by the node's paging at this instant."""
        return self.node.service_latency(
            self.base_inference_time if base_time is None else base_time
        )

    def serve_inference(self, payload: bytes, *, base_time: float | None = None) -> tuple[bytes, float]:
        """One inference: returns (response payload, service time). The
        caller is responsible for spending the service time (sleeping in
        real-clock mode, scheduling a completion event in virtual mode)."""
        return bytes(payload), self.compute_service_time(base_time)

    # -- busy-time accounting -------------------------------------------------------

    def begin_request(self, now: float) -> int:
        with self._lock:
            self.active_connections += 1
            self._busy_token += 1
            self._open_busy[self._busy_token] = now
            return self._busy_token

    def end_request(self, token: int, now: float) -> None:
        with self._lock:
            self.active_connections -= 1
            start = self._open_busy.pop(token)
            self._closed_busy.append((start, now))

    def busy_time(self, window_start: float, now: float) -> float:
        with self._lock:
            while self._closed_busy and self._closed_busy[0][1] < window_start:
                self._closed_busy.popleft()
            total = 0.0
            for start, end in self._closed_busy:
                total += max(0.0, min(end, now) - max(start, window_start))
            for start in self._open_busy.values():
                total += max(0.0, now - max(start, window_start))
            return total


def replica_cpu_utilization(replica: ModelServerReplica, window: float, now: float) -> float:
    """Busy time over the window divided by (window x allotted cores), in [0, 1]."""
    if window <= 0:
        raise ValueError("window must be positive")
    busy = replica.busy_time(now - window, now)
    return min(1.0, busy / (window * replica.parallelism))


def start_replica(
    service_id: str,
    replica_id: str,
    aecs_client: AecsClient,
    node: Node,
    enclave_spec: EnclaveSpec,
    base_inference_time: float,
    rng: random.Random,
    parallelism: int = 1,
) -> ModelServerReplica:
    """Launch the enclave, run the provisioning flow, and return a replica
    ready to serve. The temporary private key never leaves this function."""
    try:
        enclave = node.launch_enclave(enclave_spec)
    except SubstrateError as exc:
        raise EnclaveLaunchFailed(str(exc)) from exc
    try:
        temp = crypto.new_exchange_key(rng)
        temp_pub = crypto.exchange_public_bytes(temp.public_key())
        report = enclave.create_report(crypto.sha256(temp_pub))
        ciphertext = aecs_client.provision_pki(ProvisionRequest(service_id, report, temp_pub))
        pki = decode_pki(crypto.pk_decrypt(temp, ciphertext))
    except (AecsError, crypto.DecryptionError, ValueError) as exc:
        node.terminate_enclave(enclave)
        raise ProvisioningFailed(str(exc)) from exc
    return ModelServerReplica(
        replica_id, service_id, node, enclave, pki, base_inference_time, parallelism
    )


def stop_replica(replica: ModelServerReplica) -> None:
    if replica.enclave.running:
        replica.node.terminate_enclave(replica.enclave)


def crash_replica(replica: ModelServerReplica) -> None:
    """Simulate an abrupt failure; the reconciler restores it next cycle."""
    replica.crashed = True
    stop_replica(replica)


# -- inference RPC (real-clock mode) -----------------------------------------------

def encode_inference_response(payload: bytes, service_time: float) -> bytes:
    return struct.pack(">d", service_time) + payload


def decode_inference_response(plaintext: bytes) -> tuple[bytes, float]:
    (service_time,) = struct.unpack_from(">d", plaintext, 0)
    return plaintext[8:], service_time


def serve_connection(
    replica: ModelServerReplica,
    transport: FrameTransport,
    rng: random.Random,
    clock: Clock,
    *,
    max_requests: int | None = None,
) -> None:
    """Blocking per-connection server loop: handshake, then request records
    in, response records out, sleeping each request's service time."""
    try:
        session = server_handshake(transport, replica.pki, rng)
        served = 0
        while max_requests is None or served < max_requests:
            payload = record.open_record(session, transport.recv_frame(10.0))
            token = replica.begin_request(clock.now())
            response, service_time = replica.serve_inference(payload)
            time.sleep(service_time)
            replica.end_request(token, clock.now())
            transport.send_frame(
                record.seal_record(session, encode_inference_response(response, service_time))
            )
            served += 1
    except SecureChannelError as exc:
        raise SessionError(str(exc)) from exc
