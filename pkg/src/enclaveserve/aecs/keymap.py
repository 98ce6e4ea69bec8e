"""The replicated service->PKI map and its encrypted persistence.

The map is serialized deterministically (entries sorted by service id),
encrypted as one AES-GCM blob under the deployment storage key, and stored
on the untrusted store. Private keys exist in plaintext only inside the
serialization step, whose output feeds the cipher directly.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field

from .. import crypto
from ..channel.certs import Certificate, ConfinedSigningKey, ServicePki
from ..confine import ConfinedSecret
from .errors import AecsError

_MAGIC = b"keymap-v1"


@dataclass(frozen=True)
class KeyMapEntry:
    measurement: bytes
    pki: ServicePki


@dataclass
class KeyMap:
    version: int = 0
    entries: dict[str, KeyMapEntry] = field(default_factory=dict)

    def encode(self) -> bytes:
        parts = [_MAGIC, struct.pack(">Q", self.version), struct.pack(">I", len(self.entries))]
        for service_id in sorted(self.entries):
            entry = self.entries[service_id]
            sid = service_id.encode()
            cert = entry.pki.certificate.encode()
            priv = entry.pki.private_key.private_bytes("keymap-encrypt")
            parts.append(struct.pack(">I", len(sid)))
            parts.append(sid)
            parts.append(entry.measurement)
            parts.append(struct.pack(">I", len(cert)))
            parts.append(cert)
            parts.append(priv)
        return b"".join(parts)

    @classmethod
    def decode(cls, data: bytes) -> "KeyMap":
        try:
            if data[: len(_MAGIC)] != _MAGIC:
                raise ValueError("bad magic")
            off = len(_MAGIC)
            (version,) = struct.unpack_from(">Q", data, off)
            off += 8
            (count,) = struct.unpack_from(">I", data, off)
            off += 4
            entries: dict[str, KeyMapEntry] = {}
            for _ in range(count):
                (sid_len,) = struct.unpack_from(">I", data, off)
                off += 4
                service_id = data[off : off + sid_len].decode()
                off += sid_len
                measurement = data[off : off + 32]
                off += 32
                (cert_len,) = struct.unpack_from(">I", data, off)
                off += 4
                cert = Certificate.decode(data[off : off + cert_len])
                off += cert_len
                priv = data[off : off + 32]
                off += 32
                entries[service_id] = KeyMapEntry(measurement, ServicePki(cert, ConfinedSigningKey(priv)))
            if off != len(data):
                raise ValueError("trailing bytes")
            return cls(version=version, entries=entries)
        except (ValueError, struct.error, UnicodeDecodeError) as exc:
            raise AecsError(f"malformed key map: {exc}") from exc


_CIPHER_INFO = b"enclaveserve keymap cipher v1"


def encrypt_keymap(keymap: KeyMap, storage_key: ConfinedSecret, rng: random.Random) -> bytes:
    key = storage_key.reveal("keymap-encrypt")
    nonce = rng.randbytes(crypto.NONCE_LEN)
    return nonce + crypto.aead_encrypt(key, nonce, keymap.encode(), aad=_CIPHER_INFO)


def decrypt_keymap(blob: bytes, storage_key: ConfinedSecret) -> KeyMap:
    if len(blob) < crypto.NONCE_LEN + crypto.TAG_LEN:
        raise AecsError("key map blob too short")
    key = storage_key.reveal("keymap-encrypt")
    try:
        plain = crypto.aead_decrypt(
            key, blob[: crypto.NONCE_LEN], blob[crypto.NONCE_LEN :], aad=_CIPHER_INFO
        )
    except crypto.DecryptionError as exc:
        raise AecsError("key map blob does not decrypt under the storage key") from exc
    return KeyMap.decode(plain)
