"""Deployment reconciliation: keep the running replica set at the desired
count, restart crashes, and drain before stopping on scale-down.

Placement is a static ordered pool of (replica id, node id) slots; the
first `desired` slots are the target set. Scale-down victims are zeroed
first and stopped only once their connections drain (or the drain timeout
passes), so in-flight requests finish cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..serving.frontend import Endpoint, VirtualService
from ..serving.replica import ModelServerReplica, stop_replica
from .errors import PlacementFailure


@dataclass(frozen=True)
class ReconcileAction:
    kind: str  # "start" | "restart" | "drain" | "stop"
    replica_id: str
    node_id: str = ""


class Reconciler:
    def __init__(
        self,
        service_id: str,
        vs: VirtualService,
        placements: list[tuple[str, str]],
        starter: Callable[[str, str], ModelServerReplica],
        drain_timeout: float = 10.0,
    ) -> None:
        self.service_id = service_id
        self.vs = vs
        self.placements = list(placements)
        self.starter = starter
        self.drain_timeout = drain_timeout
        self.replicas: dict[str, ModelServerReplica] = {}
        self._draining: dict[str, float] = {}

    def _start(self, replica_id: str, node_id: str) -> ModelServerReplica:
        replica = self.starter(replica_id, node_id)
        self.replicas[replica_id] = replica
        self.vs.add_endpoint(Endpoint(endpoint_id=replica_id, replica=replica))
        return replica

    def _stop(self, replica_id: str) -> None:
        replica = self.replicas.pop(replica_id)
        self.vs.remove_endpoint(replica_id)
        self._draining.pop(replica_id, None)
        stop_replica(replica)

    def step(self, now: float, desired_count: int) -> list[ReconcileAction]:
        """One reconcile cycle; returns the actions taken, in order."""
        if desired_count > len(self.placements):
            raise PlacementFailure(
                f"want {desired_count} replicas but only {len(self.placements)} placements"
            )
        actions: list[ReconcileAction] = []
        target = dict(self.placements[:desired_count])

        # restart crashed replicas that should be running
        for replica_id in list(self.replicas):
            replica = self.replicas[replica_id]
            if replica_id in target and (replica.crashed or not replica.enclave.running):
                self.vs.remove_endpoint(replica_id)
                del self.replicas[replica_id]
                self._start(replica_id, target[replica_id])
                actions.append(ReconcileAction("restart", replica_id, target[replica_id]))

        # start missing replicas
        for replica_id, node_id in self.placements[:desired_count]:
            if replica_id not in self.replicas:
                self._start(replica_id, node_id)
                actions.append(ReconcileAction("start", replica_id, node_id))

        # drain then stop the excess
        for replica_id in list(self.replicas):
            if replica_id in target:
                if replica_id in self._draining:
                    # scale-up rescued a draining replica
                    self._draining.pop(replica_id)
                    self.vs.set_weight(replica_id, 1, ts=now, reason="scale-up")
                continue
            if replica_id not in self._draining:
                self.vs.set_weight(replica_id, 0, ts=now, reason="scale-down-drain")
                self._draining[replica_id] = now
                actions.append(ReconcileAction("drain", replica_id))
                continue
            endpoint = self.vs.endpoint(replica_id)
            drained = endpoint.active_connections == 0
            if drained or now - self._draining[replica_id] >= self.drain_timeout:
                node_id = self.replicas[replica_id].node.node_id
                self._stop(replica_id)
                actions.append(ReconcileAction("stop", replica_id, node_id))
        return actions
