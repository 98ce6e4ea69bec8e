from __future__ import annotations


class AecsError(Exception):
    """Base error for the keystore service."""


class ServiceExists(AecsError):
    pass


class UnknownService(AecsError):
    pass


class StoreConflictExhausted(AecsError):
    """CAS retries exhausted while persisting a key-map mutation."""


class BootstrapTimeout(AecsError):
    """No storage-key source (leader election, sealed blob, peer fetch) in time."""


class AttestationMismatch(AecsError):
    """Requester's enclave report failed verification against the expected measurement."""


class BindingMismatch(AecsError):
    """Report's user data does not bind the presented temporary public key."""


class NotServing(AecsError):
    """Replica has not finished bootstrap and holds no storage key."""


class StoreError(AecsError):
    pass


class VersionConflict(StoreError):
    """Compare-and-swap lost: supplied version is no longer current."""


class ObjectExists(StoreError):
    pass


class ObjectMissing(StoreError):
    pass
