from .errors import (
    EnclaveLaunchFailed,
    NoEligibleEndpoint,
    ProvisioningFailed,
    ServingError,
    SessionError,
    UnknownEndpoint,
)
from .frontend import ALGORITHMS, Endpoint, VirtualService, WeightChange
from .replica import (
    ModelServerReplica,
    crash_replica,
    decode_inference_response,
    encode_inference_response,
    replica_cpu_utilization,
    serve_connection,
    start_replica,
    stop_replica,
)

__all__ = [
    "ALGORITHMS",
    "Endpoint",
    "EnclaveLaunchFailed",
    "ModelServerReplica",
    "NoEligibleEndpoint",
    "ProvisioningFailed",
    "ServingError",
    "SessionError",
    "UnknownEndpoint",
    "VirtualService",
    "WeightChange",
    "crash_replica",
    "decode_inference_response",
    "encode_inference_response",
    "replica_cpu_utilization",
    "serve_connection",
    "start_replica",
    "stop_replica",
]
