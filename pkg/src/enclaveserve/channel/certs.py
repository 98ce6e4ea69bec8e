"""Self-signed service certificates and confined private keys.

The wire encoding is a deterministic length-prefixed binary layout (not
X.509): clients compare certificates by byte equality, so any two encodings
of the same certificate must be identical.

    cert-v1 | u32 subject_len | subject | pubkey(32) |
    f64 not_before | f64 not_after | signature(64)

The self-signature covers everything before it.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from .. import crypto
from ..confine import ConfinedSecret
from .errors import HandshakeFailure

_MAGIC = b"cert-v1"
SIGNATURE_LEN = 64
DEFAULT_VALIDITY_SECONDS = 7 * 86400.0


@dataclass(frozen=True)
class Certificate:
    subject: str
    public_key: bytes
    not_before: float
    not_after: float
    self_signature: bytes

    def signed_body(self) -> bytes:
        return _signed_body(self.subject, self.public_key, self.not_before, self.not_after)

    def verify_self_signature(self) -> bool:
        return crypto.verify_signature(self.public_key, self.self_signature, self.signed_body())

    def encode(self) -> bytes:
        return self.signed_body() + self.self_signature

    @classmethod
    def decode(cls, data: bytes) -> "Certificate":
        try:
            if data[: len(_MAGIC)] != _MAGIC:
                raise ValueError("bad magic")
            off = len(_MAGIC)
            (subject_len,) = struct.unpack_from(">I", data, off)
            off += 4
            subject = data[off : off + subject_len].decode()
            off += subject_len
            public_key = data[off : off + 32]
            off += 32
            not_before, not_after = struct.unpack_from(">dd", data, off)
            off += 16
            signature = data[off : off + SIGNATURE_LEN]
            if len(signature) != SIGNATURE_LEN or len(public_key) != 32 or not subject:
                raise ValueError("truncated certificate")
            if off + SIGNATURE_LEN != len(data):
                raise ValueError("trailing bytes")
            return cls(subject, public_key, not_before, not_after, signature)
        except (ValueError, struct.error, UnicodeDecodeError) as exc:
            raise HandshakeFailure(f"malformed certificate: {exc}") from exc


def _signed_body(subject: str, public_key: bytes, not_before: float, not_after: float) -> bytes:
    sub = subject.encode()
    return b"".join(
        (_MAGIC, struct.pack(">I", len(sub)), sub, public_key, struct.pack(">dd", not_before, not_after))
    )


class ConfinedSigningKey:
    """Ed25519 private key that signs freely but exports raw bytes only
    through declared enclave-boundary purposes (see ``confine``)."""

    def __init__(self, raw: bytes) -> None:
        if len(raw) != 32:
            raise ValueError("signing key must be 32 bytes")
        self._secret = ConfinedSecret(raw)
        self._key = Ed25519PrivateKey.from_private_bytes(raw)

    @classmethod
    def generate(cls, rng: random.Random) -> "ConfinedSigningKey":
        return cls(rng.randbytes(32))

    def sign(self, message: bytes) -> bytes:
        return self._key.sign(message)

    def public_bytes(self) -> bytes:
        return crypto.signing_public_bytes(self._key.public_key())

    def private_bytes(self, purpose: str) -> bytes:
        return self._secret.reveal(purpose)

    def __repr__(self) -> str:
        return "ConfinedSigningKey(<redacted>)"


@dataclass(frozen=True)
class ServicePki:
    """A certificate plus its confined private key: the unit the keystore
    generates for one service and synchronizes across its replicas."""

    certificate: Certificate
    private_key: ConfinedSigningKey

    def __post_init__(self) -> None:
        if self.private_key.public_bytes() != self.certificate.public_key:
            raise ValueError("private key does not match certificate public key")


def generate_pki(
    subject: str,
    rng: random.Random,
    *,
    now: float = 0.0,
    validity_seconds: float = DEFAULT_VALIDITY_SECONDS,
) -> ServicePki:
    if not subject:
        raise ValueError("subject must be non-empty")
    key = ConfinedSigningKey.generate(rng)
    body = _signed_body(subject, key.public_bytes(), now, now + validity_seconds)
    cert = Certificate(
        subject=subject,
        public_key=key.public_bytes(),
        not_before=now,
        not_after=now + validity_seconds,
        self_signature=key.sign(body),
    )
    return ServicePki(cert, key)
