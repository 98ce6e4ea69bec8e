"""Server-authenticated handshake.

Modeled on a TLS handshake but reduced to what the trust model needs: the
client already holds the one certificate it will accept, so there is no
negotiation and no chain building. Three flights:

    ClientHello:    hs1c | client_random(32) | client_ephemeral_x25519(32)
    ServerHello:    hs1s | server_random(32) | server_ephemeral_x25519(32) |
                    u32 cert_len | cert | signature(64)
    ClientFinished: hs1f | hmac(finished_key, "client finished" | transcript)

The server's signature covers the hash of ClientHello plus everything in
ServerHello before the signature, proving possession of the certificate's
private key and binding both ephemeral shares: substituting either share
invalidates the signature. Session keys come from HKDF over the X25519
shared secret, salted with the full-transcript hash, one key per direction.

The message-level state machines are synchronous and transport-free; the
``client_handshake`` / ``server_handshake`` wrappers drive them over any
framed transport.
"""

from __future__ import annotations

import hmac
import random
import struct

from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PublicKey

from .. import crypto
from .certs import Certificate, ServicePki
from .errors import CertificateMismatch, HandshakeFailure, SignatureInvalid
from .record import Session
from .transport import FrameTransport

_CLIENT_MAGIC = b"hs1c"
_SERVER_MAGIC = b"hs1s"
_FINISHED_MAGIC = b"hs1f"
_SIG_CONTEXT = b"enclaveserve transcript signature v1"
_FINISHED_CONTEXT = b"client finished"


def _derive(shared: bytes, transcript_hash: bytes) -> tuple[bytes, bytes, bytes]:
    master = crypto.hkdf(shared, salt=transcript_hash, info=b"master")
    c2s = crypto.hkdf(master, salt=b"", info=b"client-to-server")
    s2c = crypto.hkdf(master, salt=b"", info=b"server-to-client")
    finished = crypto.hkdf(master, salt=b"", info=b"finished")
    return c2s, s2c, finished


class ClientHandshake:
    def __init__(
        self,
        expected_cert: Certificate,
        rng: random.Random,
        *,
        now: float | None = None,
    ) -> None:
        self._expected = expected_cert
        self._now = now
        self._eph = crypto.new_exchange_key(rng)
        self._random = rng.randbytes(32)
        self._hello: bytes | None = None
        self._session: Session | None = None

    def hello(self) -> bytes:
        self._hello = (
            _CLIENT_MAGIC + self._random + crypto.exchange_public_bytes(self._eph.public_key())
        )
        return self._hello

    def finish(self, server_hello: bytes) -> bytes:
        """Verify the server flight; returns the Finished message to send."""
        if self._hello is None:
            raise HandshakeFailure("finish() before hello()")
        server_eph, cert_bytes, signature, prefix = _parse_server_hello(server_hello)
        if cert_bytes != self._expected.encode():
            raise CertificateMismatch("server certificate differs from the expected certificate")
        cert = self._expected
        if self._now is not None and not (cert.not_before <= self._now <= cert.not_after):
            raise HandshakeFailure("certificate outside its validity window")
        sig_input = _SIG_CONTEXT + crypto.sha256(self._hello + prefix)
        if not crypto.verify_signature(cert.public_key, signature, sig_input):
            raise SignatureInvalid("transcript signature does not verify")
        shared = self._eph.exchange(X25519PublicKey.from_public_bytes(server_eph))
        transcript_hash = crypto.sha256(self._hello + server_hello)
        c2s, s2c, finished_key = _derive(shared, transcript_hash)
        self._session = Session(send_key=c2s, recv_key=s2c, transcript_hash=transcript_hash)
        mac = crypto.hmac_sha256(finished_key, _FINISHED_CONTEXT + transcript_hash)
        return _FINISHED_MAGIC + mac

    def session(self) -> Session:
        if self._session is None:
            raise HandshakeFailure("handshake not complete")
        return self._session


class ServerHandshake:
    def __init__(self, pki: ServicePki, rng: random.Random) -> None:
        self._pki = pki
        self._eph = crypto.new_exchange_key(rng)
        self._random = rng.randbytes(32)
        self._finished_key: bytes | None = None
        self._transcript_hash: bytes | None = None
        self._session: Session | None = None
        self._complete = False

    def respond(self, client_hello: bytes) -> bytes:
        client_eph = _parse_client_hello(client_hello)
        cert_bytes = self._pki.certificate.encode()
        prefix = (
            _SERVER_MAGIC
            + self._random
            + crypto.exchange_public_bytes(self._eph.public_key())
            + struct.pack(">I", len(cert_bytes))
            + cert_bytes
        )
        signature = self._pki.private_key.sign(
            _SIG_CONTEXT + crypto.sha256(client_hello + prefix)
        )
        server_hello = prefix + signature
        shared = self._eph.exchange(X25519PublicKey.from_public_bytes(client_eph))
        self._transcript_hash = crypto.sha256(client_hello + server_hello)
        c2s, s2c, self._finished_key = _derive(shared, self._transcript_hash)
        self._session = Session(send_key=s2c, recv_key=c2s, transcript_hash=self._transcript_hash)
        return server_hello

    def complete(self, client_finished: bytes) -> None:
        if self._finished_key is None or self._transcript_hash is None:
            raise HandshakeFailure("complete() before respond()")
        if len(client_finished) != len(_FINISHED_MAGIC) + 32 or not client_finished.startswith(
            _FINISHED_MAGIC
        ):
            raise HandshakeFailure("malformed finished message")
        expected = crypto.hmac_sha256(
            self._finished_key, _FINISHED_CONTEXT + self._transcript_hash
        )
        if not hmac.compare_digest(client_finished[len(_FINISHED_MAGIC) :], expected):
            raise HandshakeFailure("finished MAC mismatch: peer derived different keys")
        self._complete = True

    def session(self) -> Session:
        if not self._complete or self._session is None:
            raise HandshakeFailure("handshake not complete")
        return self._session


def _parse_client_hello(data: bytes) -> bytes:
    if len(data) != len(_CLIENT_MAGIC) + 64 or not data.startswith(_CLIENT_MAGIC):
        raise HandshakeFailure("malformed client hello")
    return data[len(_CLIENT_MAGIC) + 32 :]


def _parse_server_hello(data: bytes) -> tuple[bytes, bytes, bytes, bytes]:
    """Returns (server_ephemeral, cert_bytes, signature, signed_prefix)."""
    base = len(_SERVER_MAGIC)
    try:
        if not data.startswith(_SERVER_MAGIC):
            raise ValueError("bad magic")
        server_eph = data[base + 32 : base + 64]
        (cert_len,) = struct.unpack_from(">I", data, base + 64)
        cert_start = base + 68
        cert_bytes = data[cert_start : cert_start + cert_len]
        signature = data[cert_start + cert_len :]
        if len(server_eph) != 32 or len(cert_bytes) != cert_len or len(signature) != 64:
            raise ValueError("truncated server hello")
        return server_eph, cert_bytes, signature, data[: cert_start + cert_len]
    except (ValueError, struct.error) as exc:
        raise HandshakeFailure(f"malformed server hello: {exc}") from exc


def client_handshake(
    transport: FrameTransport,
    expected_cert: Certificate,
    rng: random.Random,
    *,
    now: float | None = None,
    timeout: float | None = 10.0,
) -> Session:
    hs = ClientHandshake(expected_cert, rng, now=now)
    transport.send_frame(hs.hello())
    finished = hs.finish(transport.recv_frame(timeout))
    transport.send_frame(finished)
    return hs.session()


def server_handshake(
    transport: FrameTransport,
    pki: ServicePki,
    rng: random.Random,
    *,
    timeout: float | None = 10.0,
) -> Session:
    hs = ServerHandshake(pki, rng)
    transport.send_frame(hs.respond(transport.recv_frame(timeout)))
    hs.complete(transport.recv_frame(timeout))
    return hs.session()


def handshake_in_process(
    expected_cert: Certificate,
    pki: ServicePki,
    client_rng: random.Random,
    server_rng: random.Random,
    *,
    now: float | None = None,
) -> tuple[Session, Session]:
    """Run both state machines back to back; used by single-threaded
    virtual-clock runs where the wire is a function call."""
    client = ClientHandshake(expected_cert, client_rng, now=now)
    server = ServerHandshake(pki, server_rng)
    hello = client.hello()
    finished = client.finish(server.respond(hello))
    server.complete(finished)
    return client.session(), server.session()
