from __future__ import annotations


class SubstrateError(Exception):
    """Base error for the simulated SGX platform."""


class DuplicateEnclave(SubstrateError):
    pass


class EnclaveNotRunning(SubstrateError):
    pass


class UnsealFailure(SubstrateError):
    """Sealed blob not decryptable here: wrong node, wrong measurement, or tampered."""


class AttestationError(SubstrateError):
    """Base for report verification rejections."""


class UnknownPlatform(AttestationError):
    """Verifier has no platform key registered for the report's node."""


class PlatformTagInvalid(AttestationError):
    """Report tag does not verify under the registered platform key."""


class MeasurementMismatch(AttestationError):
    """Report is authentic but carries an unexpected code measurement."""
