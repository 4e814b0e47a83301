"""Embedded L2 switch of an SR-IOV NIC.

Models VEB-style forwarding among the fabric port(s), physical
functions and virtual functions: per-VLAN MAC learning with a static
fallback to configured port addresses, PVID tag push/pop at VF
boundaries, source-MAC anti-spoofing, and prioritized wildcard filters.

The switch is the mediation substrate the rest of the simulator builds
on: every tenant byte crosses it, so its pipeline order is fixed and
documented on :meth:`NicSwitch.switch_frame`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .frames import (
    ETHERTYPE_ARP,
    ETHERTYPE_IPV4,
    ArpMessage,
    EthernetFrame,
    Ipv4Packet,
    MacAddress,
)

# DropRecord reason codes; emitted verbatim in harness reports.
DROP_SPOOF = "SpoofBlocked"
DROP_FILTER = "FilterDrop"
DROP_UNKNOWN_UNICAST = "UnknownUnicastIsolated"
DROP_NO_ROUTE = "NoRoute"


class PrivilegeError(Exception):
    """Configuration attempted from a context other than the host."""


class DuplicateMacError(Exception):
    """A MAC address is already configured on another port of this NIC."""


class VfExhaustion(Exception):
    """More virtual functions requested than the device supports."""


class PortKind(enum.Enum):
    FABRIC = "fabric"
    PF = "pf"
    VF = "vf"
    # Software ports exist only for the Baseline's host-resident vswitch,
    # whose tenant links bypass the NIC entirely.
    SW = "sw"


@dataclass(frozen=True)
class PortId:
    kind: PortKind
    index: int

    def sort_key(self) -> tuple[str, int]:
        return (self.kind.value, self.index)

    @classmethod
    def fabric(cls, index: int = 0) -> "PortId":
        return cls(PortKind.FABRIC, index)

    @classmethod
    def pf(cls, index: int = 0) -> "PortId":
        return cls(PortKind.PF, index)

    @classmethod
    def vf(cls, index: int) -> "PortId":
        return cls(PortKind.VF, index)

    @classmethod
    def sw(cls, index: int) -> "PortId":
        return cls(PortKind.SW, index)

    def __str__(self) -> str:
        return f"{self.kind.value}{self.index}"


class VfRole(enum.Enum):
    IN_OUT = "InOut"
    GATEWAY = "Gateway"
    TENANT = "Tenant"


@dataclass(frozen=True)
class VfConfig:
    """Per-VF state the host programs into the NIC."""

    mac: MacAddress
    pvid: int = 0
    spoof_check: bool = False
    attached_to: str = ""
    role: VfRole = VfRole.TENANT

    def __post_init__(self) -> None:
        if not 0 <= self.pvid <= 4094:
            raise ValueError(f"PVID out of range: {self.pvid}")
        if self.role in (VfRole.GATEWAY, VfRole.TENANT) and self.pvid == 0:
            raise ValueError(f"{self.role.value} VF requires a tenant VLAN (pvid > 0)")
        if self.role is VfRole.IN_OUT and self.pvid != 0:
            raise ValueError("InOut VF must be untagged (pvid 0)")


class FilterAction(enum.Enum):
    ALLOW = "Allow"
    DROP = "Drop"


@dataclass(frozen=True)
class WildcardFilter:
    """Flow-based wildcard filter; unset fields match anything.

    ``vlan`` matches the frame's own tag (0 for untagged); ``ethertype``
    matches the logical payload type, looking through any 802.1Q tag.
    """

    priority: int
    action: FilterAction
    in_port: PortId | None = None
    src_mac: MacAddress | None = None
    dst_mac: MacAddress | None = None
    vlan: int | None = None
    ethertype: int | None = None

    def matches(self, in_port: PortId, frame: EthernetFrame) -> bool:
        if self.in_port is not None and in_port != self.in_port:
            return False
        if self.src_mac is not None and frame.src != self.src_mac:
            return False
        if self.dst_mac is not None and frame.dst != self.dst_mac:
            return False
        if self.vlan is not None and (frame.vlan or 0) != self.vlan:
            return False
        if self.ethertype is not None and _payload_ethertype(frame) != self.ethertype:
            return False
        return True


def _payload_ethertype(frame: EthernetFrame) -> int:
    payload = frame.payload
    if isinstance(payload, Ipv4Packet):
        return ETHERTYPE_IPV4
    if isinstance(payload, ArpMessage):
        return ETHERTYPE_ARP
    return payload.ethertype


@dataclass(frozen=True)
class DropRecord:
    reason: str
    port: PortId
    frame: EthernetFrame
    note: str = ""


@dataclass(frozen=True)
class PrivilegeContext:
    """Identity of the software asking for a configuration change."""

    component: str

    @property
    def is_host(self) -> bool:
        return self.component == "host"


HOST_CONTEXT = PrivilegeContext("host")


class NicSwitch:
    """One SR-IOV device: fabric uplinks, PFs, VFs, and the switch between them.

    A single simulation engine owns and mutates an instance; switching and
    configuration never interleave.
    """

    def __init__(self, fabric_ports: int = 1, pfs: int = 1, max_vfs_per_pf: int = 64):
        if fabric_ports < 1 or pfs < 1:
            raise ValueError("a NIC needs at least one fabric port and one PF")
        self.max_vfs_per_pf = max_vfs_per_pf
        self.fabric_ports = tuple(PortId.fabric(i) for i in range(fabric_ports))
        self.pf_ports = tuple(PortId.pf(i) for i in range(pfs))
        self.pf_macs: dict[PortId, MacAddress] = {}
        self.vf_configs: dict[PortId, VfConfig] = {}
        self._vf_home_pf: dict[PortId, int] = {}
        self.learning: dict[tuple[int, MacAddress], PortId] = {}
        self.filters: list[WildcardFilter] = []
        self._owners: dict[MacAddress, PortId] = {}
        self._next_vf = 0

    # -- configuration ------------------------------------------------

    @property
    def ports(self) -> tuple[PortId, ...]:
        return self.fabric_ports + self.pf_ports + tuple(sorted(self.vf_configs, key=PortId.sort_key))

    def add_vf(self, pf: int = 0) -> PortId:
        if not 0 <= pf < len(self.pf_ports):
            raise ValueError(f"no such PF index {pf}")
        burden = sum(1 for home in self._vf_home_pf.values() if home == pf)
        if burden >= self.max_vfs_per_pf:
            raise VfExhaustion(
                f"pf{pf} already carries {burden} VFs (limit {self.max_vfs_per_pf})"
            )
        port = PortId.vf(self._next_vf)
        self._next_vf += 1
        self._vf_home_pf[port] = pf
        self.vf_configs[port] = VfConfig(
            mac=MacAddress(bytes([0x02, 0xFF, 0xFF, 0, port.index >> 8, port.index & 0xFF])),
            role=VfRole.IN_OUT,
        )
        self._owners[self.vf_configs[port].mac] = port
        return port

    def set_pf_mac(self, index: int, mac: MacAddress) -> None:
        port = PortId.pf(index)
        if port not in self.pf_ports:
            raise ValueError(f"no such PF index {index}")
        self._check_mac_free(mac, port)
        old = self.pf_macs.get(port)
        if old is not None:
            self._owners.pop(old, None)
        self.pf_macs[port] = mac
        self._owners[mac] = port

    def configure_vf(self, ctx: PrivilegeContext, vf: PortId, cfg: VfConfig) -> "NicSwitch":
        """Replace a VF's configuration; host context only.

        Learning entries for the VF's previous MAC are purged so stale
        forwarding state cannot outlive a reconfiguration.
        """
        if not ctx.is_host:
            raise PrivilegeError(
                f"{ctx.component!r} may not configure VFs; only the host context can"
            )
        if vf.kind is not PortKind.VF or vf not in self.vf_configs:
            raise ValueError(f"{vf} is not a VF on this NIC")
        self._check_mac_free(cfg.mac, vf)
        old = self.vf_configs[vf]
        self._owners.pop(old.mac, None)
        self.learning = {
            key: port for key, port in self.learning.items() if key[1] != old.mac
        }
        self.vf_configs[vf] = cfg
        self._owners[cfg.mac] = vf
        return self

    def add_filter(self, filt: WildcardFilter) -> None:
        self.filters.append(filt)

    def _check_mac_free(self, mac: MacAddress, for_port: PortId) -> None:
        owner = self._owners.get(mac)
        if owner is not None and owner != for_port:
            raise DuplicateMacError(f"MAC {mac} already configured on {owner}")

    def port_pvid(self, port: PortId) -> int:
        """Effective PVID; PF and fabric ports behave as untagged (0)."""
        cfg = self.vf_configs.get(port)
        return cfg.pvid if cfg is not None else 0

    # -- switching ----------------------------------------------------

    def classify_vlan(self, in_port: PortId, frame: EthernetFrame) -> int:
        """Internal VLAN a frame is switched in: the ingress PVID if the
        port has one, otherwise the frame's own tag (0 when untagged)."""
        pvid = self.port_pvid(in_port)
        if pvid > 0:
            return pvid
        return frame.vlan or 0

    def switch_frame(
        self, in_port: PortId, frame: EthernetFrame
    ) -> tuple[list[tuple[PortId, EthernetFrame]], list[DropRecord]]:
        """Run one frame through the switch pipeline.

        Stages, in order: source-MAC spoof check, wildcard filters
        (default verdict Allow), VLAN classification, MAC learning,
        destination lookup (learned entries, then configured port
        addresses), and egress tag handling.  Unknown unicast in VLAN 0
        goes to the fabric uplink; in a tenant VLAN it is dropped, and a
        tenant VLAN never forwards to the fabric regardless of what the
        learning table says.
        """
        if in_port not in set(self.ports):
            raise ValueError(f"{in_port} does not exist on this NIC")

        cfg = self.vf_configs.get(in_port)
        if cfg is not None and cfg.spoof_check and frame.src != cfg.mac:
            return [], [DropRecord(DROP_SPOOF, in_port, frame,
                                   f"src {frame.src} != configured {cfg.mac}")]

        verdict = self._filter_verdict(in_port, frame)
        if verdict is FilterAction.DROP:
            return [], [DropRecord(DROP_FILTER, in_port, frame)]

        vlan = self.classify_vlan(in_port, frame)
        # The classified VLAN replaces any tag the frame arrived with.
        frame = replace(frame, vlan=vlan if vlan > 0 else None)

        if not frame.src.is_broadcast:
            self.learning[(vlan, frame.src)] = in_port

        if frame.dst.is_broadcast:
            targets = self._flood_targets(vlan, in_port)
            if not targets:
                return [], [DropRecord(DROP_NO_ROUTE, in_port, frame,
                                       f"vlan {vlan} has no other members")]
            return [(p, self._egress(frame, vlan, p)) for p in targets], []

        out = self._resolve(vlan, frame.dst)
        if out is None:
            if vlan == 0:
                targets = [p for p in self.fabric_ports if p != in_port]
                if not targets:
                    return [], [DropRecord(DROP_NO_ROUTE, in_port, frame,
                                           "no other uplink to flood")]
                return [(p, self._egress(frame, vlan, p)) for p in targets], []
            if frame.dst in self._owners:
                return [], [DropRecord(DROP_NO_ROUTE, in_port, frame,
                                       f"{frame.dst} lives outside vlan {vlan}")]
            return [], [DropRecord(DROP_UNKNOWN_UNICAST, in_port, frame,
                                   f"vlan {vlan} floods nowhere")]
        if out == in_port:
            return [], [DropRecord(DROP_NO_ROUTE, in_port, frame,
                                   "destination is the ingress port")]
        if vlan > 0 and out.kind is PortKind.FABRIC:
            # Tenant VLANs are NIC-internal; never let them reach the wire.
            return [], [DropRecord(DROP_UNKNOWN_UNICAST, in_port, frame,
                                   f"vlan {vlan} is isolated from the fabric")]
        return [(out, self._egress(frame, vlan, out))], []

    def _filter_verdict(self, in_port: PortId, frame: EthernetFrame) -> FilterAction:
        ranked = sorted(
            enumerate(self.filters), key=lambda item: (-item[1].priority, item[0])
        )
        for _, filt in ranked:
            if filt.matches(in_port, frame):
                return filt.action
        return FilterAction.ALLOW

    def _resolve(self, vlan: int, dst: MacAddress) -> PortId | None:
        port = self.learning.get((vlan, dst))
        if port is not None:
            return port
        owner = self._owners.get(dst)
        if owner is not None and self.port_pvid(owner) == vlan:
            return owner
        return None

    def _flood_targets(self, vlan: int, in_port: PortId) -> list[PortId]:
        if vlan > 0:
            members = [p for p, c in self.vf_configs.items() if c.pvid == vlan]
        else:
            members = list(self.fabric_ports) + list(self.pf_ports)
            members += [p for p, c in self.vf_configs.items() if c.pvid == 0]
        return sorted((p for p in members if p != in_port), key=PortId.sort_key)

    def _egress(self, frame: EthernetFrame, vlan: int, out: PortId) -> EthernetFrame:
        if vlan == 0 or self.port_pvid(out) == vlan:
            return replace(frame, vlan=None)
        return replace(frame, vlan=vlan)


def traversal_count(trace) -> int:
    """Number of NIC-switch crossings along one packet's trace."""
    return sum(1 for event in trace if event.location == "nic")
