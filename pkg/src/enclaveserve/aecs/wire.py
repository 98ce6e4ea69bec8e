"""Keystore RPC framing.

Request:   0x01 | opcode | body        Response:  0x01 | status | body

Opcodes: 1 CreateServicePki, 2 GetCertificate, 3 ProvisionPki,
4 FetchStorageKey, 5 DeleteServicePki. Status 0 is success; nonzero maps
onto the keystore error types below. Strings are u32-length-prefixed
UTF-8; fixed-width fields are raw.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Callable

from ..channel.certs import Certificate
from ..substrate.attest import EnclaveReport
from . import errors

VERSION = 0x01

OP_CREATE = 1
OP_GET_CERT = 2
OP_PROVISION = 3
OP_FETCH_KEY = 4
OP_DELETE = 5

STATUS_OK = 0

_STATUS_ERRORS: dict[int, type[errors.AecsError]] = {
    1: errors.ServiceExists,
    2: errors.UnknownService,
    3: errors.AttestationMismatch,
    4: errors.BindingMismatch,
    5: errors.StoreConflictExhausted,
    6: errors.NotServing,
    7: errors.AecsError,
}
_ERROR_STATUS = {cls: code for code, cls in _STATUS_ERRORS.items()}


@dataclass(frozen=True)
class ProvisionRequest:
    """Attested request for secret release: the report's user data must be
    the hash of the temporary public key, binding the two together."""

    service_id: str
    enclave_report: EnclaveReport
    temp_public_key: bytes


def _pack_str(s: str) -> bytes:
    raw = s.encode()
    return struct.pack(">I", len(raw)) + raw


def _unpack_str(data: bytes, off: int) -> tuple[str, int]:
    (length,) = struct.unpack_from(">I", data, off)
    off += 4
    return data[off : off + length].decode(), off + length


def _pack_report(report: EnclaveReport) -> bytes:
    return (
        report.measurement
        + _pack_str(report.node_id)
        + report.report_data
        + report.platform_tag
    )


def _unpack_report(data: bytes, off: int) -> tuple[EnclaveReport, int]:
    measurement = data[off : off + 32]
    off += 32
    node_id, off = _unpack_str(data, off)
    report_data = data[off : off + 32]
    off += 32
    platform_tag = data[off : off + 32]
    off += 32
    if len(platform_tag) != 32:
        raise ValueError("truncated report")
    return EnclaveReport(measurement, node_id, report_data, platform_tag), off


def encode_request(opcode: int, body: bytes) -> bytes:
    return bytes((VERSION, opcode)) + body


def encode_create(service_id: str, measurement: bytes) -> bytes:
    return encode_request(OP_CREATE, _pack_str(service_id) + measurement)


def encode_get_cert(service_id: str) -> bytes:
    return encode_request(OP_GET_CERT, _pack_str(service_id))


def encode_provision(req: ProvisionRequest) -> bytes:
    body = _pack_str(req.service_id) + _pack_report(req.enclave_report) + req.temp_public_key
    return encode_request(OP_PROVISION, body)


def encode_fetch_key(req: ProvisionRequest) -> bytes:
    body = _pack_str(req.service_id) + _pack_report(req.enclave_report) + req.temp_public_key
    return encode_request(OP_FETCH_KEY, body)


def encode_delete(service_id: str) -> bytes:
    return encode_request(OP_DELETE, _pack_str(service_id))


def decode_provision_body(body: bytes) -> ProvisionRequest:
    service_id, off = _unpack_str(body, 0)
    report, off = _unpack_report(body, off)
    temp_pub = body[off : off + 32]
    if len(temp_pub) != 32 or off + 32 != len(body):
        raise ValueError("malformed provision body")
    return ProvisionRequest(service_id, report, temp_pub)


def ok_response(body: bytes = b"") -> bytes:
    return bytes((VERSION, STATUS_OK)) + body


def error_response(exc: errors.AecsError) -> bytes:
    code = _ERROR_STATUS.get(type(exc), _ERROR_STATUS[errors.AecsError])
    return bytes((VERSION, code)) + str(exc).encode()


def raise_for_response(frame: bytes) -> bytes:
    """Return the success body, or raise the transported keystore error."""
    if len(frame) < 2 or frame[0] != VERSION:
        raise errors.AecsError("malformed response frame")
    status = frame[1]
    body = frame[2:]
    if status == STATUS_OK:
        return body
    exc_type = _STATUS_ERRORS.get(status, errors.AecsError)
    raise exc_type(body.decode(errors="replace"))


class AecsClient:
    """Client stub over any frame carrier (a callable taking request bytes
    and returning response bytes)."""

    def __init__(self, send: Callable[[bytes], bytes]) -> None:
        self._send = send

    def create_service_pki(self, service_id: str, measurement: bytes) -> Certificate:
        body = raise_for_response(self._send(encode_create(service_id, measurement)))
        return Certificate.decode(body)

    def get_certificate(self, service_id: str) -> Certificate:
        body = raise_for_response(self._send(encode_get_cert(service_id)))
        return Certificate.decode(body)

    def provision_pki(self, req: ProvisionRequest) -> bytes:
        return raise_for_response(self._send(encode_provision(req)))

    def fetch_storage_key(self, req: ProvisionRequest) -> bytes:
        return raise_for_response(self._send(encode_fetch_key(req)))

    def delete_service_pki(self, service_id: str) -> None:
        raise_for_response(self._send(encode_delete(service_id)))
