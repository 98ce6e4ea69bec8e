"""Sealing: encrypt enclave data for untrusted persistence.

The seal key is derived from the node's root sealing key and the sealing
enclave's measurement, so a blob opens only on the same node by an enclave
running the same code.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .. import crypto
from .errors import UnsealFailure

_SEAL_INFO = b"enclaveserve seal v1"


@dataclass(frozen=True)
class SealedBlob:
    node_id: str
    measurement: bytes
    nonce: bytes
    ciphertext: bytes
    auth_tag: bytes

    def encode(self) -> bytes:
        nid = self.node_id.encode()
        parts = [b"sealed-v1", struct.pack(">I", len(nid)), nid, self.measurement, self.nonce]
        parts.append(struct.pack(">I", len(self.ciphertext)))
        parts.append(self.ciphertext)
        parts.append(self.auth_tag)
        return b"".join(parts)

    @classmethod
    def decode(cls, data: bytes) -> "SealedBlob":
        try:
            if data[:9] != b"sealed-v1":
                raise ValueError("bad magic")
            off = 9
            (nid_len,) = struct.unpack_from(">I", data, off)
            off += 4
            node_id = data[off : off + nid_len].decode()
            off += nid_len
            measurement = data[off : off + 32]
            off += 32
            nonce = data[off : off + crypto.NONCE_LEN]
            off += crypto.NONCE_LEN
            (ct_len,) = struct.unpack_from(">I", data, off)
            off += 4
            ciphertext = data[off : off + ct_len]
            off += ct_len
            auth_tag = data[off : off + crypto.TAG_LEN]
            if len(auth_tag) != crypto.TAG_LEN or len(measurement) != 32:
                raise ValueError("truncated blob")
            return cls(node_id, measurement, nonce, ciphertext, auth_tag)
        except (ValueError, struct.error, UnicodeDecodeError) as exc:
            raise UnsealFailure(f"malformed sealed blob: {exc}") from exc


def derive_seal_key(root_seal_key: bytes, measurement: bytes) -> bytes:
    return crypto.hkdf(root_seal_key, salt=b"seal-key", info=_SEAL_INFO + measurement)


def seal_bytes(
    root_seal_key: bytes, node_id: str, measurement: bytes, nonce: bytes, plaintext: bytes
) -> SealedBlob:
    key = derive_seal_key(root_seal_key, measurement)
    blob = crypto.aead_encrypt(key, nonce, plaintext, aad=_SEAL_INFO)
    return SealedBlob(node_id, measurement, nonce, blob[:-crypto.TAG_LEN], blob[-crypto.TAG_LEN:])


def unseal_bytes(root_seal_key: bytes, measurement: bytes, blob: SealedBlob) -> bytes:
    """Decrypt with the key this node+measurement would derive; reject otherwise."""
    key = derive_seal_key(root_seal_key, measurement)
    try:
        return crypto.aead_decrypt(
            key, blob.nonce, blob.ciphertext + blob.auth_tag, aad=_SEAL_INFO
        )
    except crypto.DecryptionError as exc:
        raise UnsealFailure("sealed blob does not open under this node and measurement") from exc
