"""Keystore replicas: bootstrap, PKI lifecycle, and attested release.

One deployment runs several replicas, each inside a substrate enclave with
the deployment's own measurement. Replicas share no channel except the
untrusted store (CAS) and the attested storage-key fetch; whichever replica
wins the create-if-absent race on the leader marker generates the storage
key, everyone else recovers it by unsealing a local blob or fetching it
from a serving peer after remote attestation.
"""

from __future__ import annotations

import random
import struct
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .. import crypto
from ..channel.certs import Certificate, ServicePki, generate_pki
from ..clock import Clock
from ..confine import ConfinedSecret
from ..substrate.attest import PlatformRegistry, verify_report
from ..substrate.errors import AttestationError
from ..substrate.node import EnclaveHandle
from ..substrate.sealing import SealedBlob
from . import wire
from .errors import (
    AttestationMismatch,
    BindingMismatch,
    BootstrapTimeout,
    NotServing,
    ObjectExists,
    ObjectMissing,
    ServiceExists,
    StoreConflictExhausted,
    UnknownService,
    VersionConflict,
)
from .keymap import KeyMap, KeyMapEntry, decrypt_keymap, encrypt_keymap
from .store import UntrustedStore

GENERATION_LEN = 16
_SEALED_MAGIC = b"aecs-seal-v1"

LEADER_OBJECT = "aecs/leader"
KEYMAP_OBJECT = "aecs/keymap"

# default code identity of the keystore enclave itself; replicas attest to
# this measurement when fetching the storage key from a peer
AECS_MEASUREMENT = crypto.sha256(b"enclave:aecs-deployment-v1")


@dataclass
class AecsDeployment:
    """Cluster-wide configuration and instrumentation shared by replicas."""

    measurement: bytes
    registry: PlatformRegistry
    store: UntrustedStore
    bootstrap_timeout: float = 5.0
    max_cas_retries: int = 8
    cas_backoff: float = 0.002
    _peers: list["AecsReplica"] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock)
    generation_events: int = 0
    ra_fetch_calls: int = 0

    def register(self, replica: "AecsReplica") -> None:
        with self._lock:
            if replica not in self._peers:
                self._peers.append(replica)

    def unregister(self, replica: "AecsReplica") -> None:
        with self._lock:
            if replica in self._peers:
                self._peers.remove(replica)

    def serving_peers(self, exclude: "AecsReplica") -> list["AecsReplica"]:
        with self._lock:
            return [p for p in self._peers if p is not exclude and p.serving]

    def count_generation(self) -> None:
        with self._lock:
            self.generation_events += 1

    def count_ra_fetch(self) -> None:
        with self._lock:
            self.ra_fetch_calls += 1


class AecsReplica:
    """One keystore backend, hosted by a substrate enclave."""

    def __init__(
        self,
        replica_id: str,
        enclave: EnclaveHandle,
        deployment: AecsDeployment,
        sealed_path: Path | str,
        rng: random.Random,
        clock: Clock | None = None,
    ) -> None:
        self.replica_id = replica_id
        self.enclave = enclave
        self.deployment = deployment
        self.sealed_path = Path(sealed_path)
        self._rng = rng
        self._clock = clock
        self._storage_key: ConfinedSecret | None = None
        self._generation: bytes | None = None
        self._mutate_lock = threading.Lock()
        self.serving = False

    # -- bootstrap ------------------------------------------------------------

    def bootstrap(self) -> None:
        """Obtain the deployment storage key and start serving.

        Election, local unsealing, and peer fetch are attempted in that
        order; a corrupt or stale sealed blob silently falls back to the
        attested fetch path.
        """
        store = self.deployment.store
        generation = self._rng.randbytes(GENERATION_LEN)
        try:
            store.create_if_absent(LEADER_OBJECT, generation)
            won = True
        except ObjectExists:
            won = False
            generation, _ = store.get(LEADER_OBJECT)

        if won:
            key = ConfinedSecret(self._rng.randbytes(32))
            self._adopt(generation, key)
            self.deployment.count_generation()
            self._ensure_keymap_object()
            self.serving = True
            self.deployment.register(self)
            return

        if self._try_unseal(generation):
            self._ensure_keymap_object()
            self.serving = True
            self.deployment.register(self)
            return

        deadline = time.monotonic() + self.deployment.bootstrap_timeout
        while time.monotonic() < deadline:
            for peer in self.deployment.serving_peers(exclude=self):
                try:
                    self._fetch_from_peer(peer, generation)
                    self.serving = True
                    self.deployment.register(self)
                    return
                except (AttestationMismatch, BindingMismatch, NotServing):
                    continue
            time.sleep(0.002)
        raise BootstrapTimeout(
            f"replica {self.replica_id!r}: no sealed blob and no serving peer answered"
        )

    def shutdown(self) -> None:
        self.serving = False
        self._storage_key = None
        self._generation = None
        self.deployment.unregister(self)

    def _adopt(self, generation: bytes, key: ConfinedSecret) -> None:
        self._generation = generation
        self._storage_key = key
        plaintext = _SEALED_MAGIC + generation + key.reveal("seal")
        blob = self.enclave.seal(plaintext)
        self.sealed_path.parent.mkdir(parents=True, exist_ok=True)
        self.sealed_path.write_bytes(blob.encode())

    def _try_unseal(self, current_generation: bytes) -> bool:
        if not self.sealed_path.exists():
            return False
        from ..substrate.errors import UnsealFailure

        try:
            blob = SealedBlob.decode(self.sealed_path.read_bytes())
            plaintext = self.enclave.unseal(blob)
        except UnsealFailure:
            return False
        if len(plaintext) != len(_SEALED_MAGIC) + GENERATION_LEN + 32:
            return False
        if not plaintext.startswith(_SEALED_MAGIC):
            return False
        off = len(_SEALED_MAGIC)
        generation = plaintext[off : off + GENERATION_LEN]
        if generation != current_generation:
            # stale blob from an earlier bootstrap round
            return False
        self._generation = generation
        self._storage_key = ConfinedSecret(plaintext[off + GENERATION_LEN :])
        return True

    def _fetch_from_peer(self, peer: "AecsReplica", generation: bytes) -> None:
        temp = crypto.new_exchange_key(self._rng)
        temp_pub = crypto.exchange_public_bytes(temp.public_key())
        report = self.enclave.create_report(crypto.sha256(temp_pub))
        req = wire.ProvisionRequest("aecs", report, temp_pub)
        self.deployment.count_ra_fetch()
        ciphertext = peer.fetch_storage_key(req)
        plaintext = crypto.pk_decrypt(temp, ciphertext)
        if len(plaintext) != GENERATION_LEN + 32:
            raise BindingMismatch("unexpected storage-key payload")
        fetched_generation = plaintext[:GENERATION_LEN]
        if fetched_generation != generation:
            raise NotServing("peer serving a different generation")
        self._adopt(fetched_generation, ConfinedSecret(plaintext[GENERATION_LEN:]))

    def _ensure_keymap_object(self) -> None:
        key = self._require_key()
        try:
            self.deployment.store.get(KEYMAP_OBJECT)
        except ObjectMissing:
            try:
                self.deployment.store.create_if_absent(
                    KEYMAP_OBJECT, encrypt_keymap(KeyMap(), key, self._rng)
                )
            except ObjectExists:
                pass

    def _require_key(self) -> ConfinedSecret:
        if self._storage_key is None:
            raise NotServing(f"replica {self.replica_id!r} has not completed bootstrap")
        return self._storage_key

    # -- key-map access -------------------------------------------------------

    def _load_map(self) -> tuple[KeyMap, int]:
        key = self._require_key()
        data, version = self.deployment.store.get(KEYMAP_OBJECT)
        return decrypt_keymap(data, key), version

    def _mutate(self, apply) -> None:
        """CAS loop with reread-merge: `apply` edits a fresh KeyMap in place
        (and may raise); bounded retries, then StoreConflictExhausted."""
        key = self._require_key()
        with self._mutate_lock:
            backoff = self.deployment.cas_backoff
            for attempt in range(self.deployment.max_cas_retries):
                keymap, store_version = self._load_map()
                apply(keymap)
                keymap.version += 1
                blob = encrypt_keymap(keymap, key, self._rng)
                try:
                    self.deployment.store.put(KEYMAP_OBJECT, blob, store_version)
                    return
                except VersionConflict:
                    time.sleep(backoff * (2**attempt) * self._rng.random())
            raise StoreConflictExhausted(
                f"gave up after {self.deployment.max_cas_retries} CAS attempts"
            )

    # -- RPC operations ---------------------------------------------------------

    def create_service_pki(self, service_id: str, code_measurement: bytes) -> Certificate:
        """Generate and register a PKI; only the certificate leaves."""
        now = self._clock.now() if self._clock else 0.0
        pki = generate_pki(service_id, self._rng, now=now)

        def apply(keymap: KeyMap) -> None:
            if service_id in keymap.entries:
                raise ServiceExists(service_id)
            keymap.entries[service_id] = KeyMapEntry(code_measurement, pki)

        self._mutate(apply)
        return pki.certificate

    def get_certificate(self, service_id: str) -> Certificate:
        keymap, _ = self._load_map()
        try:
            return keymap.entries[service_id].pki.certificate
        except KeyError:
            raise UnknownService(service_id) from None

    def delete_service_pki(self, service_id: str) -> None:
        def apply(keymap: KeyMap) -> None:
            if service_id not in keymap.entries:
                raise UnknownService(service_id)
            del keymap.entries[service_id]

        self._mutate(apply)

    def _check_release(self, req: wire.ProvisionRequest, expected_measurement: bytes) -> None:
        """Attestation gate shared by every secret-release path."""
        try:
            verify_report(req.enclave_report, expected_measurement, self.deployment.registry)
        except AttestationError as exc:
            raise AttestationMismatch(str(exc)) from exc
        if req.enclave_report.report_data != crypto.sha256(req.temp_public_key):
            raise BindingMismatch("report does not bind the presented temporary key")

    def provision_pki(self, req: wire.ProvisionRequest) -> bytes:
        """Release a service PKI, encrypted to the attested temporary key."""
        keymap, _ = self._load_map()
        try:
            entry = keymap.entries[req.service_id]
        except KeyError:
            raise UnknownService(req.service_id) from None
        self._check_release(req, entry.measurement)
        plaintext = _encode_pki(entry.pki)
        return crypto.pk_encrypt(req.temp_public_key, plaintext, self._rng)

    def fetch_storage_key(self, req: wire.ProvisionRequest) -> bytes:
        """Release the storage key to a new replica of this same deployment."""
        key = self._require_key()
        self._check_release(req, self.deployment.measurement)
        assert self._generation is not None
        plaintext = self._generation + key.reveal("provision-encrypt")
        return crypto.pk_encrypt(req.temp_public_key, plaintext, self._rng)

    # -- wire server ---------------------------------------------------------

    def handle_frame(self, frame: bytes) -> bytes:
        """Serve one framed RPC; errors travel back as status codes."""
        from .errors import AecsError

        try:
            if len(frame) < 2 or frame[0] != wire.VERSION:
                raise AecsError("malformed request frame")
            opcode, body = frame[1], frame[2:]
            if opcode == wire.OP_CREATE:
                service_id, off = wire._unpack_str(body, 0)
                measurement = body[off : off + 32]
                if len(measurement) != 32 or off + 32 != len(body):
                    raise AecsError("malformed create body")
                cert = self.create_service_pki(service_id, measurement)
                return wire.ok_response(cert.encode())
            if opcode == wire.OP_GET_CERT:
                service_id, off = wire._unpack_str(body, 0)
                if off != len(body):
                    raise AecsError("malformed get body")
                return wire.ok_response(self.get_certificate(service_id).encode())
            if opcode == wire.OP_PROVISION:
                return wire.ok_response(self.provision_pki(wire.decode_provision_body(body)))
            if opcode == wire.OP_FETCH_KEY:
                return wire.ok_response(self.fetch_storage_key(wire.decode_provision_body(body)))
            if opcode == wire.OP_DELETE:
                service_id, off = wire._unpack_str(body, 0)
                if off != len(body):
                    raise AecsError("malformed delete body")
                self.delete_service_pki(service_id)
                return wire.ok_response()
            raise AecsError(f"unknown opcode {opcode}")
        except AecsError as exc:
            return wire.error_response(exc)
        except (ValueError, struct.error, UnicodeDecodeError) as exc:
            return wire.error_response(AecsError(f"malformed request: {exc}"))

    def client(self, capture: list[bytes] | None = None) -> wire.AecsClient:
        """Loopback client over the wire surface; frames can be captured
        for traffic byte-scans."""

        def send(request: bytes) -> bytes:
            if capture is not None:
                capture.append(bytes(request))
            response = self.handle_frame(request)
            if capture is not None:
                capture.append(bytes(response))
            return response

        return wire.AecsClient(send)


def _encode_pki(pki: ServicePki) -> bytes:
    cert = pki.certificate.encode()
    return struct.pack(">I", len(cert)) + cert + pki.private_key.private_bytes("provision-encrypt")


def decode_pki(plaintext: bytes) -> ServicePki:
    """Parse the provisioning payload back into a PKI (inside the enclave)."""
    from ..channel.certs import ConfinedSigningKey

    (cert_len,) = struct.unpack_from(">I", plaintext, 0)
    cert = Certificate.decode(plaintext[4 : 4 + cert_len])
    priv = plaintext[4 + cert_len :]
    if len(priv) != 32:
        raise ValueError("malformed PKI payload")
    return ServicePki(cert, ConfinedSigningKey(priv))
