"""Vswitch compartments: prioritized match-action tables and rule builders.

A :class:`VswitchInstance` holds one compartment's flow table and
evaluates it first-match, highest priority first with installation
order breaking ties.  The builders below synthesize the per-tenant rule
sets that realize the ingress/egress forwarding chains: destination-IP
delivery toward the tenant gateway port, a default route toward the
external network, a gateway ARP responder, and optional VXLAN
encap/decap variants keyed on the tenant's tunnel id.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .frames import (
    ARP_REPLY,
    ARP_REQUEST,
    ArpMessage,
    EthernetFrame,
    Ipv4Address,
    Ipv4Packet,
    MacAddress,
    VxlanEnvelope,
    vxlan_decap,
    vxlan_encap,
)
from .nic import DropRecord, PortId

DROP_TABLE_MISS = "TableMiss"

# Priority bands for generated rules.  VXLAN rules sit above their plain
# counterparts so overlay tenants encapsulate instead of falling through.
PRIO_ARP = 200
PRIO_VXLAN_INGRESS = 110
PRIO_INGRESS = 100
PRIO_VXLAN_EGRESS = 20
PRIO_EGRESS = 10


class DuplicateVni(Exception):
    """Two tenants of one vswitch were assigned the same tunnel id."""


class IncompleteAddressing(Exception):
    """Rule generation needs every VM MAC and IP assigned up front."""


class ExecContext(enum.Enum):
    HOST_KERNEL = "HostKernel"
    HOST_USER = "HostUser"
    VM_KERNEL = "VmKernel"
    VM_USER = "VmUser"


@dataclass(frozen=True)
class FlowMatch:
    """Conjunctive match; a frame matches iff every set field matches.

    When ``vni`` is set the frame must be VXLAN-encapsulated with that
    tunnel id, and ``dst_ip_prefix`` then tests the *inner* frame's
    destination address.
    """

    in_port: PortId | None = None
    dst_ip_prefix: tuple[Ipv4Address, int] | None = None
    vni: int | None = None
    dst_mac: MacAddress | None = None
    is_arp_request_for: Ipv4Address | None = None

    def __post_init__(self) -> None:
        if all(
            v is None
            for v in (
                self.in_port,
                self.dst_ip_prefix,
                self.vni,
                self.dst_mac,
                self.is_arp_request_for,
            )
        ):
            raise ValueError("a FlowMatch needs at least one field set")

    def matches(self, in_port: PortId, frame: EthernetFrame) -> bool:
        if self.in_port is not None and in_port != self.in_port:
            return False
        if self.dst_mac is not None and frame.dst != self.dst_mac:
            return False
        if self.is_arp_request_for is not None:
            payload = frame.payload
            if not isinstance(payload, ArpMessage) or payload.op != ARP_REQUEST:
                return False
            if payload.target_ip != self.is_arp_request_for:
                return False
        ip_frame = frame
        if self.vni is not None:
            payload = frame.payload
            if not isinstance(payload, Ipv4Packet) or not isinstance(
                payload.body, VxlanEnvelope
            ):
                return False
            if payload.body.vni != self.vni:
                return False
            ip_frame = payload.body.inner
        if self.dst_ip_prefix is not None:
            payload = ip_frame.payload
            if not isinstance(payload, Ipv4Packet):
                return False
            net, plen = self.dst_ip_prefix
            if not payload.dst.in_prefix(net, plen):
                return False
        return True

    def render(self) -> str:
        parts = []
        if self.in_port is not None:
            parts.append(f"in_port={self.in_port}")
        if self.vni is not None:
            parts.append(f"vni={self.vni}")
        if self.dst_ip_prefix is not None:
            net, plen = self.dst_ip_prefix
            parts.append(f"dst_ip={net}/{plen}")
        if self.dst_mac is not None:
            parts.append(f"dst_mac={self.dst_mac}")
        if self.is_arp_request_for is not None:
            parts.append(f"arp_req_for={self.is_arp_request_for}")
        return " ".join(parts)


# -- actions ---------------------------------------------------------------


@dataclass(frozen=True)
class SetDstMac:
    mac: MacAddress

    def render(self) -> str:
        return f"set_dst_mac:{self.mac}"


@dataclass(frozen=True)
class SetSrcMac:
    mac: MacAddress

    def render(self) -> str:
        return f"set_src_mac:{self.mac}"


@dataclass(frozen=True)
class PushVxlan:
    vni: int
    outer_src_mac: MacAddress
    outer_dst_mac: MacAddress
    outer_src_ip: Ipv4Address
    outer_dst_ip: Ipv4Address

    def render(self) -> str:
        return f"push_vxlan:{self.vni}>{self.outer_dst_ip}"


@dataclass(frozen=True)
class PopVxlan:
    def render(self) -> str:
        return "pop_vxlan"


@dataclass(frozen=True)
class Output:
    port: PortId

    def render(self) -> str:
        return f"output:{self.port}"


@dataclass(frozen=True)
class ArpReply:
    """Answer an ARP request with this MAC, out the port it came in on."""

    mac: MacAddress

    def render(self) -> str:
        return f"arp_reply:{self.mac}"


Action = SetDstMac | SetSrcMac | PushVxlan | PopVxlan | Output | ArpReply


@dataclass(frozen=True)
class FlowRule:
    priority: int
    match: FlowMatch
    actions: tuple[Action, ...]
    seq: int = 0

    def __post_init__(self) -> None:
        terminals = [a for a in self.actions if isinstance(a, (Output, ArpReply))]
        if len(terminals) > 1:
            raise ValueError("at most one Output/ArpReply per rule")
        if terminals and not isinstance(self.actions[-1], (Output, ArpReply)):
            raise ValueError("Output/ArpReply must be the last action")

    def render(self) -> str:
        actions = ",".join(a.render() for a in self.actions)
        return f"prio={self.priority} seq={self.seq} match{{{self.match.render()}}} actions[{actions}]"


def render_rules(rules) -> str:
    return "\n".join(r.render() for r in rules)


@dataclass
class VswitchInstance:
    """One vswitch compartment: its ports, flow table and execution context."""

    id: str
    inout_vfs: list[PortId]
    gw_vfs: dict[str, PortId]
    exec_ctx: ExecContext
    table: list[FlowRule] = field(default_factory=list)
    rule_hits: dict[int, int] = field(default_factory=dict)
    _next_seq: int = 0

    def install(self, rule: FlowRule) -> FlowRule:
        stamped = replace(rule, seq=self._next_seq)
        self._next_seq += 1
        self.table.append(stamped)
        return stamped

    def install_all(self, rules) -> None:
        for rule in rules:
            self.install(rule)

    def ports(self) -> list[PortId]:
        seen: list[PortId] = list(self.inout_vfs)
        for port in self.gw_vfs.values():
            if port not in seen:
                seen.append(port)
        return seen

    def lookup(self, in_port: PortId, frame: EthernetFrame) -> FlowRule | None:
        best: FlowRule | None = None
        for rule in self.table:
            if not rule.match.matches(in_port, frame):
                continue
            if best is None or (rule.priority, -rule.seq) > (best.priority, -best.seq):
                best = rule
        return best

    def process_frame(
        self, in_port: PortId, frame: EthernetFrame
    ) -> tuple[list[tuple[PortId, EthernetFrame]], list[DropRecord]]:
        """Apply the highest-priority matching rule's actions in order."""
        rule = self.lookup(in_port, frame)
        if rule is None:
            return [], [DropRecord(DROP_TABLE_MISS, in_port, frame,
                                   f"no rule in {self.id}")]
        self.rule_hits[rule.seq] = self.rule_hits.get(rule.seq, 0) + 1
        outputs: list[tuple[PortId, EthernetFrame]] = []
        current = frame
        for action in rule.actions:
            if isinstance(action, SetDstMac):
                current = replace(current, dst=action.mac)
            elif isinstance(action, SetSrcMac):
                current = replace(current, src=action.mac)
            elif isinstance(action, PushVxlan):
                current = vxlan_encap(
                    current,
                    action.vni,
                    action.outer_src_mac,
                    action.outer_dst_mac,
                    action.outer_src_ip,
                    action.outer_dst_ip,
                )
            elif isinstance(action, PopVxlan):
                _, current = vxlan_decap(current)
            elif isinstance(action, Output):
                outputs.append((action.port, current))
            elif isinstance(action, ArpReply):
                request = current.payload
                assert isinstance(request, ArpMessage)
                reply = EthernetFrame(
                    dst=current.src,
                    src=action.mac,
                    payload=ArpMessage(
                        ARP_REPLY,
                        sender_mac=action.mac,
                        sender_ip=request.target_ip,
                        target_mac=request.sender_mac,
                        target_ip=request.sender_ip,
                    ),
                )
                outputs.append((in_port, reply))
        return outputs, []


# -- rule builders ----------------------------------------------------------


@dataclass(frozen=True)
class VmAddress:
    mac: MacAddress | None
    ip: Ipv4Address | None


@dataclass(frozen=True)
class TenantWiring:
    """Everything the builders need to wire one tenant through a vswitch."""

    tenant: str
    vlan: int
    gw_vf: PortId
    gw_mac: MacAddress
    inout_vf: PortId
    gateway_ip: Ipv4Address
    external_gw_mac: MacAddress
    vms: tuple[VmAddress, ...]


@dataclass(frozen=True)
class VxlanUnderlay:
    outer_src_mac: MacAddress
    outer_dst_mac: MacAddress
    outer_src_ip: Ipv4Address
    outer_dst_ip: Ipv4Address


def _require_complete(wiring: TenantWiring) -> None:
    for i, vm in enumerate(wiring.vms):
        if vm.mac is None or vm.ip is None:
            raise IncompleteAddressing(
                f"tenant {wiring.tenant} VM {i} is missing a MAC or IP"
            )


def build_tenant_rules(wiring: TenantWiring) -> list[FlowRule]:
    """Per-tenant logical datapath: one ingress rule per VM, one shared
    default-egress rule, and one ARP responder for the virtual gateway."""
    _require_complete(wiring)
    rules: list[FlowRule] = []
    seq = 0
    for vm in wiring.vms:
        rules.append(
            FlowRule(
                PRIO_INGRESS,
                FlowMatch(dst_ip_prefix=(vm.ip, 32)),
                (SetDstMac(vm.mac), Output(wiring.gw_vf)),
                seq,
            )
        )
        seq += 1
    rules.append(
        FlowRule(
            PRIO_EGRESS,
            FlowMatch(in_port=wiring.gw_vf,
                      dst_ip_prefix=(Ipv4Address(0), 0)),
            (SetDstMac(wiring.external_gw_mac), Output(wiring.inout_vf)),
            seq,
        )
    )
    rules.append(
        FlowRule(
            PRIO_ARP,
            FlowMatch(is_arp_request_for=wiring.gateway_ip),
            (ArpReply(wiring.gw_mac),),
            seq + 1,
        )
    )
    return rules


def build_vxlan_rules(
    wiring: TenantWiring, vni: int, underlay: VxlanUnderlay
) -> list[FlowRule]:
    """Overlay variant: decapsulate on ingress keyed on (vni, inner dst IP),
    encapsulate with the tenant's vni on egress."""
    _require_complete(wiring)
    if not 0 <= vni < 2**24:
        raise ValueError(f"VNI {vni} outside 24-bit range")
    rules: list[FlowRule] = []
    seq = 0
    for vm in wiring.vms:
        rules.append(
            FlowRule(
                PRIO_VXLAN_INGRESS,
                FlowMatch(vni=vni, dst_ip_prefix=(vm.ip, 32)),
                (PopVxlan(), SetDstMac(vm.mac), Output(wiring.gw_vf)),
                seq,
            )
        )
        seq += 1
    rules.append(
        FlowRule(
            PRIO_VXLAN_EGRESS,
            FlowMatch(in_port=wiring.gw_vf,
                      dst_ip_prefix=(Ipv4Address(0), 0)),
            (
                PushVxlan(
                    vni,
                    underlay.outer_src_mac,
                    underlay.outer_dst_mac,
                    underlay.outer_src_ip,
                    underlay.outer_dst_ip,
                ),
                Output(wiring.inout_vf),
            ),
            seq,
        )
    )
    return rules


def build_vswitch_rules(
    wirings: list[TenantWiring],
    vxlan: dict[str, tuple[int, VxlanUnderlay]] | None = None,
) -> list[FlowRule]:
    """Assemble one compartment's full table from its tenants' wirings.

    Raises :class:`DuplicateVni` when two tenants on the same vswitch
    claim one tunnel id.
    """
    vxlan = vxlan or {}
    claimed: dict[int, str] = {}
    rules: list[FlowRule] = []
    for wiring in wirings:
        rules.extend(build_tenant_rules(wiring))
        if wiring.tenant in vxlan:
            vni, underlay = vxlan[wiring.tenant]
            if vni in claimed:
                raise DuplicateVni(
                    f"vni {vni} claimed by both {claimed[vni]} and {wiring.tenant}"
                )
            claimed[vni] = wiring.tenant
            rules.extend(build_vxlan_rules(wiring, vni, underlay))
    return [replace(rule, seq=i) for i, rule in enumerate(rules)]
