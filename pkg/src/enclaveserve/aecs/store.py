"""Untrusted versioned object stores.

The store is availability infrastructure only: everything sensitive that
lands here is already encrypted. Two backends share one contract:

  get(name)                    -> (bytes, version)
  put(name, data, expected)    -> new version, or VersionConflict
  create_if_absent(name, data) -> version 1 for exactly one caller

Versions start at 1 and increase by 1 per successful put.
"""

from __future__ import annotations

import os
import re
import struct
import threading
from pathlib import Path
from typing import Protocol

from .errors import ObjectExists, ObjectMissing, VersionConflict


class UntrustedStore(Protocol):
    def get(self, name: str) -> tuple[bytes, int]: ...

    def put(self, name: str, data: bytes, expected_version: int) -> int: ...

    def create_if_absent(self, name: str, data: bytes) -> int: ...


class MemoryStore:
    """In-process store for tests and virtual-clock runs; thread-safe."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._objects: dict[str, tuple[bytes, int]] = {}

    def get(self, name: str) -> tuple[bytes, int]:
        with self._lock:
            try:
                data, version = self._objects[name]
            except KeyError:
                raise ObjectMissing(name) from None
            return data, version

    def put(self, name: str, data: bytes, expected_version: int) -> int:
        with self._lock:
            if name not in self._objects:
                raise ObjectMissing(name)
            _, current = self._objects[name]
            if current != expected_version:
                raise VersionConflict(f"{name}: expected v{expected_version}, at v{current}")
            self._objects[name] = (bytes(data), current + 1)
            return current + 1

    def create_if_absent(self, name: str, data: bytes) -> int:
        with self._lock:
            if name in self._objects:
                raise ObjectExists(name)
            self._objects[name] = (bytes(data), 1)
            return 1

    def dump(self) -> dict[str, bytes]:
        """All stored bytes, for never-plaintext scans."""
        with self._lock:
            return {name: data for name, (data, _) in self._objects.items()}


_HEADER = struct.Struct(">8sQ")
_MAGIC = b"storeob1"


class DirectoryStore:
    """One file per object under a directory; used by CLI runs.

    Single-process safety only: writers are serialized by an in-process
    lock and files are replaced atomically.
    """

    def __init__(self, root: Path | str) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, name: str) -> Path:
        safe = re.sub(r"[^A-Za-z0-9._-]", "_", name)
        return self.root / f"{safe}.obj"

    def _read(self, path: Path) -> tuple[bytes, int]:
        raw = path.read_bytes()
        magic, version = _HEADER.unpack_from(raw)
        if magic != _MAGIC:
            raise ObjectMissing(f"corrupt object file {path}")
        return raw[_HEADER.size :], version

    def _write(self, path: Path, data: bytes, version: int) -> None:
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(_HEADER.pack(_MAGIC, version) + data)
        os.replace(tmp, path)

    def get(self, name: str) -> tuple[bytes, int]:
        with self._lock:
            path = self._path(name)
            if not path.exists():
                raise ObjectMissing(name)
            return self._read(path)

    def put(self, name: str, data: bytes, expected_version: int) -> int:
        with self._lock:
            path = self._path(name)
            if not path.exists():
                raise ObjectMissing(name)
            _, current = self._read(path)
            if current != expected_version:
                raise VersionConflict(f"{name}: expected v{expected_version}, at v{current}")
            self._write(path, data, current + 1)
            return current + 1

    def create_if_absent(self, name: str, data: bytes) -> int:
        with self._lock:
            path = self._path(name)
            if path.exists():
                raise ObjectExists(name)
            self._write(path, data, 1)
            return 1

    def dump(self) -> dict[str, bytes]:
        with self._lock:
            out = {}
            for path in sorted(self.root.glob("*.obj")):
                data, _ = self._read(path)
                out[path.stem] = data
            return out
