"""Deterministic synchronous simulation engine.

Frames move between components (fabric, NIC switch, vswitch
compartments, tenant VMs) through per-component inboxes.  Each step
drains every inbox in ascending component-id order, so a run is a pure
function of the plan, the injected frames and their order.

The engine works on a deep copy of the plan: learning tables, rule-hit
counters and VM state always start cold, which keeps repeated runs
byte-identical.
"""

from __future__ import annotations

import copy
from collections import deque
from dataclasses import dataclass, replace

from .dataplane import VswitchInstance
from .endpoints import TenantVm, tenant_handle
from .frames import EthernetFrame, Ipv4Packet, VxlanEnvelope
from .nic import DropRecord, PortId, PortKind

LOC_FABRIC = "fabric"
LOC_NIC = "nic"
LOC_VSWITCH = "vswitch"
LOC_TENANT = "tenant"

HOST_SINK = "host"
FABRIC_SINK = "fabric"

DEFAULT_STEP_BOUND = 10_000


class NonQuiescent(Exception):
    """The step loop exceeded its bound; the topology is looping frames."""


@dataclass(frozen=True)
class TraceEvent:
    """One hop of one packet: where it was seen and what its headers were."""

    step: int
    location: str
    name: str
    port: str
    packet_id: tuple
    dst_mac: str
    src_mac: str
    vlan: int | None
    dst_ip: str | None
    vni: int | None

    def render(self) -> str:
        vlan = f" vlan={self.vlan}" if self.vlan is not None else ""
        vni = f" vni={self.vni}" if self.vni is not None else ""
        ip = f" dst_ip={self.dst_ip}" if self.dst_ip else ""
        return (f"[{self.step:04d}] {self.name}({self.port}) "
                f"dst={self.dst_mac} src={self.src_mac}{vlan}{ip}{vni}")


@dataclass(frozen=True)
class Delivery:
    component: str
    port: str
    frame: EthernetFrame
    packet_id: tuple
    terminal: bool


@dataclass(frozen=True)
class Injection:
    packet_id: tuple
    flow_id: str
    component: str
    src_port: PortId | None
    frame: EthernetFrame


def _snapshot_fields(frame: EthernetFrame) -> tuple[str, str, int | None, str | None, int | None]:
    dst_ip = None
    vni = None
    payload = frame.payload
    if isinstance(payload, Ipv4Packet):
        dst_ip = str(payload.dst)
        if isinstance(payload.body, VxlanEnvelope):
            vni = payload.body.vni
    return str(frame.dst), str(frame.src), frame.vlan, dst_ip, vni


class Engine:
    """Runs frames through one deployment until the system is quiescent."""

    def __init__(self, plan, step_bound: int = DEFAULT_STEP_BOUND):
        self.plan = copy.deepcopy(plan)
        self.step_bound = step_bound
        self.step = 0
        self.trace: list[TraceEvent] = []
        self.deliveries: list[Delivery] = []
        self.drops: list[tuple[tuple, DropRecord]] = []
        self.injections: list[Injection] = []
        self._inboxes: dict[str, deque] = {LOC_NIC: deque()}
        self._vswitch_by_id: dict[str, VswitchInstance] = {}
        self._vm_by_id: dict[str, TenantVm] = {}
        self._port_owner: dict[PortId, str] = {}
        self._sw_peers: dict[PortId, tuple[str, str]] = {}

        for vs in self.plan.vswitches:
            self._vswitch_by_id[vs.id] = vs
            self._inboxes[vs.id] = deque()
            for port in vs.ports():
                if port.kind is not PortKind.SW:
                    self._port_owner[port] = vs.id
        for vm in self.plan.tenant_vms:
            self._vm_by_id[vm.id] = vm
            self._inboxes[vm.id] = deque()
            if vm.vf.kind is PortKind.SW:
                self._sw_peers[vm.vf] = (self.plan.vswitch_of_tenant[vm.tenant], vm.id)
            else:
                self._port_owner[vm.vf] = vm.id

    # -- injection ------------------------------------------------------

    def _record(self, location: str, name: str, port: PortId | str,
                packet_id: tuple, frame: EthernetFrame) -> None:
        self.step += 1
        dst, src, vlan, dst_ip, vni = _snapshot_fields(frame)
        self.trace.append(TraceEvent(
            self.step, location, name, str(port), packet_id, dst, src, vlan, dst_ip, vni,
        ))

    def inject_fabric(self, frame: EthernetFrame, packet_id: tuple,
                      flow_id: str = "", port: PortId | None = None) -> None:
        """A frame arrives from the wire on a fabric port."""
        port = port or self.plan.nic.fabric_ports[0]
        self.injections.append(Injection(packet_id, flow_id, FABRIC_SINK, port, frame))
        self._record(LOC_FABRIC, FABRIC_SINK, port, packet_id, frame)
        self._inboxes[LOC_NIC].append((packet_id, port, frame))

    def inject_at_vm(self, vm_id: str, frame: EthernetFrame,
                     packet_id: tuple, flow_id: str = "") -> None:
        """A tenant VM emits a frame on its own port (honest endpoint)."""
        vm = self._vm_by_id[vm_id]
        self.injections.append(Injection(packet_id, flow_id, vm_id, vm.vf, frame))
        self._record(LOC_TENANT, vm_id, vm.vf, packet_id, frame)
        self._route_from_endpoint(vm, frame, packet_id)

    def inject_at_port(self, port: PortId, frame: EthernetFrame,
                       packet_id: tuple, flow_id: str = "") -> None:
        """Attacker injector: arbitrary bytes pushed into the NIC at a VF,
        bypassing any honest endpoint behavior."""
        owner = self._port_owner.get(port, "")
        self.injections.append(Injection(packet_id, flow_id, owner, port, frame))
        self._inboxes[LOC_NIC].append((packet_id, port, frame))

    def _route_from_endpoint(self, vm: TenantVm, frame: EthernetFrame,
                             packet_id: tuple) -> None:
        if vm.vf.kind is PortKind.SW:
            vswitch_id, _ = self._sw_peers[vm.vf]
            self._inboxes[vswitch_id].append((packet_id, vm.vf, frame))
        else:
            self._inboxes[LOC_NIC].append((packet_id, vm.vf, frame))

    # -- the step loop ----------------------------------------------------

    def run(self) -> None:
        steps = 0
        while any(self._inboxes.values()):
            steps += 1
            if steps > self.step_bound:
                raise NonQuiescent(
                    f"still {sum(map(len, self._inboxes.values()))} frames in "
                    f"flight after {self.step_bound} steps"
                )
            for component in sorted(self._inboxes):
                inbox = self._inboxes[component]
                pending = list(inbox)
                inbox.clear()
                for packet_id, port, frame in pending:
                    self._process(component, packet_id, port, frame)

    def _process(self, component: str, packet_id: tuple,
                 port: PortId, frame: EthernetFrame) -> None:
        if component == LOC_NIC:
            self._process_nic(packet_id, port, frame)
        elif component in self._vswitch_by_id:
            self._process_vswitch(self._vswitch_by_id[component], packet_id, port, frame)
        else:
            self._process_vm(self._vm_by_id[component], packet_id, port, frame)

    def _process_nic(self, packet_id: tuple, in_port: PortId, frame: EthernetFrame) -> None:
        nic = self.plan.nic
        vlan = nic.classify_vlan(in_port, frame)
        # Snapshot the classified state so traces show the tag between
        # classification and the egress pop.
        self._record(LOC_NIC, LOC_NIC, in_port, packet_id,
                     replace(frame, vlan=vlan if vlan > 0 else None))
        outputs, drops = nic.switch_frame(in_port, frame)
        for record in drops:
            self.drops.append((packet_id, record))
        for out_port, out_frame in outputs:
            self._deliver_from_nic(packet_id, out_port, out_frame)

    def _deliver_from_nic(self, packet_id: tuple, port: PortId,
                          frame: EthernetFrame) -> None:
        if port.kind is PortKind.FABRIC:
            self._record(LOC_FABRIC, FABRIC_SINK, port, packet_id, frame)
            self.deliveries.append(Delivery(FABRIC_SINK, str(port), frame, packet_id, True))
            return
        owner = self._port_owner.get(port)
        if owner is None or owner == HOST_SINK:
            self.deliveries.append(Delivery(HOST_SINK, str(port), frame, packet_id, True))
            return
        if owner in self._vswitch_by_id:
            self.deliveries.append(Delivery(owner, str(port), frame, packet_id, False))
            self._inboxes[owner].append((packet_id, port, frame))
        else:
            self._inboxes[owner].append((packet_id, port, frame))

    def _process_vswitch(self, vs: VswitchInstance, packet_id: tuple,
                         in_port: PortId, frame: EthernetFrame) -> None:
        self._record(LOC_VSWITCH, vs.id, in_port, packet_id, frame)
        outputs, drops = vs.process_frame(in_port, frame)
        for record in drops:
            self.drops.append((packet_id, record))
        for out_port, out_frame in outputs:
            if out_port.kind is PortKind.SW:
                _, vm_id = self._sw_peers[out_port]
                self._inboxes[vm_id].append((packet_id, out_port, out_frame))
            else:
                self._inboxes[LOC_NIC].append((packet_id, out_port, out_frame))

    def _process_vm(self, vm: TenantVm, packet_id: tuple,
                    port: PortId, frame: EthernetFrame) -> None:
        self._record(LOC_TENANT, vm.id, port, packet_id, frame)
        continuations = tenant_handle(vm, frame)
        self.deliveries.append(
            Delivery(vm.id, str(port), frame, packet_id, not continuations)
        )
        for out in continuations:
            self._route_from_endpoint(vm, out, packet_id)

    # -- post-run views ---------------------------------------------------

    def trace_of(self, packet_id: tuple) -> list[TraceEvent]:
        return [ev for ev in self.trace if ev.packet_id == packet_id]

    def deliveries_of(self, packet_id: tuple) -> list[Delivery]:
        return [d for d in self.deliveries if d.packet_id == packet_id]

    def drops_of(self, packet_id: tuple) -> list[DropRecord]:
        return [rec for pid, rec in self.drops if pid == packet_id]
