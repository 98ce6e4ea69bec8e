"""Scenario execution.

The virtual runner drives everything from one discrete-event loop: request
arrivals, replica service completions, request timeouts, telemetry ticks,
controller actuations, and scripted interference, all on the virtual
clock. Runs are single-threaded and every random draw comes from streams
derived from the scenario seed, so a (scenario, seed) pair replays to the
byte.

Each request is one L4 connection: the frontend picks a backend, the
client handshakes against the service certificate, and encrypted records
carry the payload both ways. The frontend only moves ciphertext; session
keys live at the client and inside the replica.
"""

from __future__ import annotations

import tempfile
from collections import deque
from dataclasses import dataclass
from pathlib import Path

from .. import crypto
from ..aecs.service import AECS_MEASUREMENT, AecsDeployment, AecsReplica
from ..aecs.store import MemoryStore, UntrustedStore
from ..channel.handshake import handshake_in_process
from ..channel.record import Session, open_record, seal_record
from ..clock import EventLoop
from ..control.autoscale import Autoscaler, ScalePolicy
from ..control.errors import NodeUnreachable
from ..control.reconcile import Reconciler
from ..control.slo import NodeObservation, SloController, SloPolicy, observation_from_samples
from ..control.telemetry import NodeTelemetry, collect, epc_csv_row, service_csv_row
from ..profiles import ModelProfile
from ..serving.errors import NoEligibleEndpoint
from ..serving.frontend import Endpoint, VirtualService
from ..serving.replica import (
    ModelServerReplica,
    encode_inference_response,
    replica_cpu_utilization,
    start_replica,
)
from ..substrate.node import EnclaveSpec, MIB, Node, NodeSpec, Substrate
from .errors import ScenarioFailed
from .metrics import (
    Recorder,
    RequestRecord,
    RunReport,
    STATUS_OK,
    STATUS_REJECTED,
    STATUS_TIMEOUT,
)
from .scenario import ScenarioConfig
from .workload import WorkloadSpec, generate_arrivals, request_payload

INTERFERENCE_MEASUREMENT = crypto.sha256(b"enclave:interference-batch")

AECS_ENCLAVE_REQUESTED = 16 * MIB
AECS_ENCLAVE_WORKING_SET = 8 * MIB


@dataclass
class _Request:
    index: int
    send_ts: float
    endpoint: Endpoint
    replica: ModelServerReplica
    client_session: Session
    server_session: Session
    payload: bytes
    token: int = 0
    service_time: float = 0.0
    completed: bool = False
    timed_out: bool = False


class _ReplicaServer:
    """Virtual-mode execution of one replica: a `parallelism`-wide server
    with a FIFO queue, producing completion events on the loop."""

    def __init__(self, runner: "VirtualRunner", replica: ModelServerReplica) -> None:
        self.runner = runner
        self.replica = replica
        self.busy = 0
        self.queue: deque[_Request] = deque()

    def submit(self, req: _Request) -> None:
        if self.busy < self.replica.parallelism:
            self._start(req)
        else:
            self.queue.append(req)

    def _start(self, req: _Request) -> None:
        loop = self.runner.loop
        now = loop.now()
        self.busy += 1
        req.token = self.replica.begin_request(now)
        base = self.runner.profile.sample_base_time(self.runner.jitter_rng)
        # paging is read at service start, as the latency contract requires
        req.service_time = self.replica.compute_service_time(base)
        loop.call_later(req.service_time, lambda: self._finish(req))

    def _finish(self, req: _Request) -> None:
        now = self.runner.loop.now()
        self.busy -= 1
        self.replica.end_request(req.token, now)
        self.runner.complete_request(req)
        if self.queue:
            self._start(self.queue.popleft())


class VirtualRunner:
    def __init__(self, config: ScenarioConfig, store: UntrustedStore | None = None) -> None:
        self.config = config
        self.profile: ModelProfile = config.profile
        self.loop = EventLoop()
        self.recorder = Recorder()
        self.epc_rows: list[str] = []
        self.service_rows: list[str] = []
        self.traffic_capture: list[bytes] = []
        self.store = store if store is not None else MemoryStore()
        self.jitter_rng = crypto.derived_rng(config.seed, "service-jitter")
        self.crypto_rng = crypto.derived_rng(config.seed, "session-crypto")
        self._servers: dict[str, _ReplicaServer] = {}
        self._telemetry: dict[str, NodeTelemetry] = {}
        self.telemetry_gaps = 0
        self.vs: VirtualService | None = None
        self.controller: SloController | None = None
        self.autoscaler: Autoscaler | None = None
        self.reconciler: Reconciler | None = None
        self.aecs_replicas: list[AecsReplica] = []

    # -- topology -----------------------------------------------------------------

    def _build_cluster(self, sealed_root: Path) -> None:
        config = self.config
        node_rng = crypto.derived_rng(config.seed, "node-keys")
        self.substrate = Substrate(self.loop)
        for node_config in config.nodes:
            self.substrate.add_node(
                NodeSpec(
                    node_id=node_config.node_id,
                    root_seal_key=node_rng.randbytes(32),
                    platform_attestation_key=node_rng.randbytes(32),
                    epc_usable_bytes=node_config.epc_mib * MIB,
                    cpu_cores=node_config.cores,
                ),
                t_ref=config.t_ref_pages_per_s,
            )
            self._telemetry[node_config.node_id] = NodeTelemetry(node_config.node_id)

        deployment = AecsDeployment(
            measurement=AECS_MEASUREMENT, registry=self.substrate.registry, store=self.store
        )
        for placement in config.aecs_placements:
            node = self.substrate.node(placement.node_id)
            enclave = node.launch_enclave(
                EnclaveSpec(
                    enclave_id=f"aecs/{placement.replica_id}",
                    measurement=AECS_MEASUREMENT,
                    requested_epc_bytes=AECS_ENCLAVE_REQUESTED,
                    working_set_bytes=AECS_ENCLAVE_WORKING_SET,
                    page_access_rate=0.0,
                    system_enclave=True,
                )
            )
            replica = AecsReplica(
                replica_id=placement.replica_id,
                enclave=enclave,
                deployment=deployment,
                sealed_path=sealed_root / f"{placement.replica_id}.sealed",
                rng=crypto.derived_rng(config.seed, f"aecs:{placement.replica_id}"),
                clock=self.loop,
            )
            replica.bootstrap()
            self.aecs_replicas.append(replica)

        capture = self.traffic_capture if config.capture_traffic else None
        self.aecs_client = self.aecs_replicas[0].client(capture=capture)
        self.aecs_client.create_service_pki(config.service_id, self.profile.measurement())
        self.expected_cert = self.aecs_client.get_certificate(config.service_id)

        frontend_algorithm = "sed" if config.algorithm == "sgx_aware" else config.algorithm
        self.vs = VirtualService(config.service_id, frontend_algorithm)
        if config.autoscale.enabled:
            # the placement list is the pool; the reconciler owns membership
            self.reconciler = Reconciler(
                config.service_id,
                self.vs,
                placements=[(p.replica_id, p.node_id) for p in config.replica_placements],
                starter=self._make_replica,
            )
            self.reconciler.step(0.0, config.autoscale.min_replicas)
        else:
            for placement in config.replica_placements:
                endpoint = Endpoint(
                    endpoint_id=placement.replica_id,
                    replica=self._make_replica(placement.replica_id, placement.node_id),
                )
                self.vs.add_endpoint(endpoint)

        if config.algorithm == "sgx_aware":
            assert config.slo is not None
            policy = SloPolicy(
                service_id=config.service_id,
                slo_p99=self.profile.slo_s,
                boundary_pages_per_s=config.slo.boundary_pages_per_s,
                threshold_fraction=config.slo.theta,
                consecutive_cycles=config.slo.consecutive_cycles,
                sample_interval=config.slo.sample_interval_s,
            )
            self.controller = SloController(policy, self.vs)

        if config.autoscale.enabled:
            self.autoscaler = Autoscaler(
                ScalePolicy(
                    service_id=config.service_id,
                    target_utilization=config.autoscale.target_utilization,
                    min_replicas=config.autoscale.min_replicas,
                    max_replicas=config.autoscale.max_replicas,
                    cooldown=config.autoscale.cooldown_s,
                )
            )

    def _make_replica(self, replica_id: str, node_id: str) -> ModelServerReplica:
        replica = start_replica(
            service_id=self.config.service_id,
            replica_id=replica_id,
            aecs_client=self.aecs_client,
            node=self.substrate.node(node_id),
            enclave_spec=self.profile.enclave_spec(f"{self.config.service_id}/{replica_id}"),
            base_inference_time=self.profile.base_time_s,
            rng=crypto.derived_rng(self.config.seed, f"replica:{replica_id}"),
            parallelism=self.config.parallelism,
        )
        self._servers[replica_id] = _ReplicaServer(self, replica)
        return replica

    # -- scripted interference -------------------------------------------------------

    def _schedule_interference(self) -> None:
        for script_index, script in enumerate(self.config.interference):
            node = self.substrate.node(script.node_id)
            for window_index, (start, end) in enumerate(script.windows):
                spec = EnclaveSpec(
                    enclave_id=f"stress-{script.node_id}-{script_index}-{window_index}",
                    measurement=INTERFERENCE_MEASUREMENT,
                    requested_epc_bytes=script.epc_mib * MIB,
                    # the batch task keeps refreshing its whole allocation
                    working_set_bytes=script.epc_mib * MIB,
                    page_access_rate=script.rate_pages_per_s,
                )
                self.loop.call_at(start, self._launcher(node, spec))
                self.loop.call_at(end, self._terminator(node, spec.enclave_id))

    def _launcher(self, node: Node, spec: EnclaveSpec):
        def launch() -> None:
            node.launch_enclave(spec)

        return launch

    def _terminator(self, node: Node, enclave_id: str):
        def terminate() -> None:
            handle = node.enclave_handle(enclave_id)
            if handle is not None:
                node.terminate_enclave(handle)

        return terminate

    # -- telemetry / control ticks ------------------------------------------------------

    def _schedule_ticks(self) -> None:
        interval = self.config.slo.sample_interval_s if self.config.slo else 1.0
        ticks = int(self.config.duration_s / interval) + 1
        for k in range(ticks):
            self.loop.call_at(k * interval, self._tick)

    def _tick(self) -> None:
        now = self.loop.now()
        interval = self.config.slo.sample_interval_s if self.config.slo else 1.0
        observations: dict[str, NodeObservation] = {}
        for node in self.substrate.nodes():
            try:
                sample = collect(node)
            except NodeUnreachable:
                # a gap this cycle: the controller must not act on stale data
                self.telemetry_gaps += 1
                observations[node.node_id] = NodeObservation(throughput=None)
                continue
            self._telemetry[node.node_id].add(sample)
            self.epc_rows.append(epc_csv_row(sample))
            observations[node.node_id] = observation_from_samples(
                self._telemetry[node.node_id].window(2)
            )

        assert self.vs is not None
        if self.controller is not None:
            self.controller.step(observations, now)

        for endpoint in self.vs.endpoints():
            util = replica_cpu_utilization(endpoint.replica, window=interval, now=now)
            self.service_rows.append(
                service_csv_row(
                    now,
                    self.config.service_id,
                    endpoint.endpoint_id,
                    endpoint.weight,
                    endpoint.active_connections,
                    util,
                )
            )

        if self.autoscaler is not None and self.reconciler is not None:
            utils = [
                replica_cpu_utilization(ep.replica, window=interval, now=now)
                for ep in self.vs.endpoints()
                if ep.weight == 1
            ]
            desired = self.autoscaler.step(now, len(self.vs.endpoints()), utils)
            self.reconciler.step(now, desired)

    # -- request path ------------------------------------------------------------------

    def _schedule_workload(self) -> WorkloadSpec:
        spec = WorkloadSpec(
            service_id=self.config.service_id,
            rate_per_s=self.config.workload.rate_per_s,
            duration_s=self.config.duration_s,
            rng_seed=self.config.seed,
            payload_bytes=self.config.workload.payload_bytes,
            timeout_s=self.config.workload.timeout_s,
        )
        self.arrivals = generate_arrivals(spec)
        for index, when in enumerate(self.arrivals):
            self.loop.call_at(when, self._sender(spec, index))
        return spec

    def _sender(self, spec: WorkloadSpec, index: int):
        def send() -> None:
            self._send(spec, index)

        return send

    def _send(self, spec: WorkloadSpec, index: int) -> None:
        now = self.loop.now()
        self.recorder.count_send()
        assert self.vs is not None
        try:
            endpoint = self.vs.pick_endpoint()
        except NoEligibleEndpoint:
            self.recorder.record(
                RequestRecord(index, now, now, "", spec.timeout_s, STATUS_REJECTED)
            )
            return
        self.vs.dispatch(endpoint)
        replica: ModelServerReplica = endpoint.replica
        client_session, server_session = handshake_in_process(
            self.expected_cert, replica.pki, self.crypto_rng, self.crypto_rng, now=now
        )
        payload = request_payload(spec, index)
        wire_record = seal_record(client_session, payload)
        if self.config.capture_traffic:
            self.traffic_capture.append(wire_record)
        server_payload = open_record(server_session, wire_record)
        req = _Request(
            index=index,
            send_ts=now,
            endpoint=endpoint,
            replica=replica,
            client_session=client_session,
            server_session=server_session,
            payload=server_payload,
        )
        self._servers[endpoint.endpoint_id].submit(req)
        self.loop.call_later(spec.timeout_s, self._timeout_cb(req, spec.timeout_s))

    def _timeout_cb(self, req: _Request, timeout_s: float):
        def fire() -> None:
            if req.completed or req.timed_out:
                return
            req.timed_out = True
            self.recorder.record(
                RequestRecord(
                    req.index,
                    req.send_ts,
                    req.send_ts + timeout_s,
                    req.endpoint.endpoint_id,
                    timeout_s,
                    STATUS_TIMEOUT,
                )
            )

        return fire

    def complete_request(self, req: _Request) -> None:
        now = self.loop.now()
        response = seal_record(
            req.server_session, encode_inference_response(req.payload, req.service_time)
        )
        if self.config.capture_traffic:
            self.traffic_capture.append(response)
        open_record(req.client_session, response)
        assert self.vs is not None
        self.vs.complete(req.endpoint)
        req.completed = True
        if req.timed_out:
            return  # client gave up; the late response is dropped
        self.recorder.record(
            RequestRecord(
                req.index,
                req.send_ts,
                now,
                req.endpoint.endpoint_id,
                now - req.send_ts,
                STATUS_OK,
            )
        )

    # -- entry point -------------------------------------------------------------------

    def run(self) -> RunReport:
        with tempfile.TemporaryDirectory(prefix="enclaveserve-sealed-") as sealed_root:
            try:
                self._build_cluster(Path(sealed_root))
                self._schedule_interference()
                self._schedule_ticks()
                self._schedule_workload()
            except Exception as exc:
                raise ScenarioFailed(f"scenario setup failed: {exc}") from exc
            # run to the cutoff, then drain completions and timeouts
            self.loop.run(until=self.config.duration_s)
            self.loop.run()
        assert self.vs is not None
        return RunReport(
            scenario=self.config.name,
            seed=self.config.seed,
            model=self.config.model,
            algorithm=self.config.algorithm,
            duration_s=self.config.duration_s,
            slo_s=self.profile.slo_s,
            records=self.recorder.records(),
            sent=self.recorder.sent,
            weight_events=list(self.vs.weight_log),
            epc_rows=list(self.epc_rows),
            service_rows=list(self.service_rows),
        )


def run_scenario(config: ScenarioConfig, store: UntrustedStore | None = None) -> RunReport:
    """Execute one scenario on the virtual clock. The keystore's untrusted
    store defaults to in-memory; CLI runs pass a directory-backed one."""
    return VirtualRunner(config, store=store).run()
