"""Tenant VM behavior: packet sourcing, sinking, echo and MAC-rewrite forwarding.

A tenant VM resolves next hops from its ARP table (normally a single
static entry pointing at its gateway port's MAC), emits IPv4 frames
with deterministic counter-generated payloads, and reacts to delivered
frames according to its configured application behavior.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .frames import (
    ARP_REQUEST,
    BROADCAST_MAC,
    ETH_HEADER_LEN,
    IPV4_HEADER_LEN,
    ArpMessage,
    ARP_REPLY,
    EthernetFrame,
    Ipv4Address,
    Ipv4Packet,
    MacAddress,
    ZERO_MAC,
)
from .nic import PortId

# IP protocol number used for generated test traffic (RFC 3692 experimental).
TEST_PROTOCOL = 253


class UnresolvableNextHop(Exception):
    """No ARP entry for the destination and no responder to ask."""


@dataclass(frozen=True)
class Source:
    """Originates ``count`` frames of ``size`` bytes toward ``dst_ip``."""

    dst_ip: Ipv4Address
    count: int = 1
    size: int = 64


@dataclass(frozen=True)
class Sink:
    """Absorbs every delivered frame."""


@dataclass(frozen=True)
class Echo:
    """Swaps L2 and L3 endpoints and sends the frame back."""


@dataclass(frozen=True)
class L2Fwd:
    """Rewrites dst to a fixed next hop and src to the VM's own MAC.

    Mirrors the benchmark forwarder the evaluation runs inside tenant
    VMs; the payload is passed through untouched.
    """

    next_hop_mac: MacAddress


AppBehavior = Source | Sink | Echo | L2Fwd


@dataclass
class TenantVm:
    id: str
    tenant: str
    vf: PortId
    mac: MacAddress
    ip: Ipv4Address
    gateway_ip: Ipv4Address
    static_arp: dict[Ipv4Address, MacAddress] = field(default_factory=dict)
    app: AppBehavior = field(default_factory=Sink)
    arp_responder: bool = False
    payload_seed: int = 0
    tx_seq: int = 0


def _payload_bytes(vm: TenantVm, length: int) -> bytes:
    # Seeded counter stream: byte i of frame n is (seed + n + i) mod 256.
    base = vm.payload_seed + vm.tx_seq
    return bytes((base + i) & 0xFF for i in range(length))


def _resolve_next_hop(vm: TenantVm, dst_ip: Ipv4Address) -> MacAddress | None:
    if dst_ip in vm.static_arp:
        return vm.static_arp[dst_ip]
    return vm.static_arp.get(vm.gateway_ip)


def make_packet(vm: TenantVm, dst_ip: Ipv4Address, size: int = 64) -> EthernetFrame:
    """Build the next frame toward ``dst_ip``.

    Off-link destinations use the gateway's ARP entry.  When nothing
    resolves but the deployment runs an ARP responder, the returned
    frame is the gateway ARP request; once the reply has been absorbed
    (:func:`absorb_arp_reply`) a further call yields the data frame.
    ``size`` is the serialized frame length; payload bytes come from a
    seeded counter.
    """
    next_hop = _resolve_next_hop(vm, dst_ip)
    if next_hop is None:
        if vm.arp_responder:
            return make_arp_request(vm, vm.gateway_ip)
        raise UnresolvableNextHop(
            f"{vm.id} has no ARP entry for {dst_ip} and no responder to ask"
        )
    body_len = max(0, size - ETH_HEADER_LEN - IPV4_HEADER_LEN)
    frame = EthernetFrame(
        dst=next_hop,
        src=vm.mac,
        payload=Ipv4Packet(vm.ip, dst_ip, TEST_PROTOCOL, _payload_bytes(vm, body_len)),
    )
    vm.tx_seq += 1
    return frame


def make_arp_request(vm: TenantVm, target_ip: Ipv4Address) -> EthernetFrame:
    return EthernetFrame(
        dst=BROADCAST_MAC,
        src=vm.mac,
        payload=ArpMessage(ARP_REQUEST, vm.mac, vm.ip, ZERO_MAC, target_ip),
    )


def absorb_arp_reply(vm: TenantVm, frame: EthernetFrame) -> bool:
    """Install the mapping carried by an ARP reply; True if one was learned."""
    payload = frame.payload
    if isinstance(payload, ArpMessage) and payload.op == ARP_REPLY:
        vm.static_arp[payload.sender_ip] = payload.sender_mac
        return True
    return False


def tenant_handle(vm: TenantVm, frame: EthernetFrame) -> list[EthernetFrame]:
    """React to a frame delivered on the VM's port.

    Honest endpoints never emit a frame with a source other than their
    own MAC, so spoof-check drops can only come from explicit attacker
    injection.
    """
    app = vm.app
    if isinstance(app, (Sink, Source)):
        absorb_arp_reply(vm, frame)
        return []
    if isinstance(app, Echo):
        if frame.dst != vm.mac:
            # Flooded or misdelivered frame; echoing it would forge a source.
            return []
        swapped = replace(frame, dst=frame.src, src=frame.dst)
        payload = frame.payload
        if isinstance(payload, Ipv4Packet):
            swapped = replace(
                swapped, payload=replace(payload, src=payload.dst, dst=payload.src)
            )
        return [swapped]
    if isinstance(app, L2Fwd):
        return [replace(frame, dst=app.next_hop_mac, src=vm.mac)]
    raise TypeError(f"unknown app behavior {app!r}")
