from .attest import EnclaveReport, PlatformRegistry, make_report, verify_report
from .errors import (
    AttestationError,
    DuplicateEnclave,
    EnclaveNotRunning,
    MeasurementMismatch,
    PlatformTagInvalid,
    SubstrateError,
    UnknownPlatform,
    UnsealFailure,
)
from .node import (
    DEFAULT_EPC_USABLE_BYTES,
    MIB,
    EnclaveHandle,
    EnclaveSpec,
    Node,
    NodePagingState,
    NodeSpec,
    Substrate,
)
from .paging import (
    DEFAULT_T_REF_PAGES_PER_S,
    PAGE_BYTES,
    LatencyModel,
    LinearLatencyModel,
    PagingModel,
    ProportionalOverflowModel,
    inflate_latency,
)
from .sealing import SealedBlob, seal_bytes, unseal_bytes

__all__ = [
    "AttestationError",
    "DEFAULT_EPC_USABLE_BYTES",
    "DEFAULT_T_REF_PAGES_PER_S",
    "DuplicateEnclave",
    "EnclaveHandle",
    "EnclaveNotRunning",
    "EnclaveReport",
    "EnclaveSpec",
    "LatencyModel",
    "LinearLatencyModel",
    "MIB",
    "MeasurementMismatch",
    "Node",
    "NodePagingState",
    "NodeSpec",
    "PAGE_BYTES",
    "PagingModel",
    "PlatformRegistry",
    "PlatformTagInvalid",
    "ProportionalOverflowModel",
    "SealedBlob",
    "Substrate",
    "SubstrateError",
    "UnknownPlatform",
    "UnsealFailure",
    "inflate_latency",
    "make_report",
    "seal_bytes",
    "unseal_bytes",
    "verify_report",
]
