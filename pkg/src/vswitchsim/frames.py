"""Ethernet frame model with bit-exact wire serialization.

Value types for the L2 header, 802.1Q tag, IPv4, ARP and the VXLAN
overlay envelope.  Every frame constructible from this model survives
``parse(serialize(frame))`` structurally intact, which is what the
golden-byte tests and trace dumps rely on.

Modeling notes:

* IPv4/UDP checksums are serialized as zero and never validated.
* Frames carry their exact logical length; the 60-byte Ethernet
  minimum is not padded out.
* A frame's ``vlan`` field is present iff an 802.1Q tag is on the wire;
  VID 0 (priority tag) is not representable.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_ARP = 0x0806
TPID_8021Q = 0x8100

ETH_HEADER_LEN = 14
VLAN_TAG_LEN = 4
IPV4_HEADER_LEN = 20
UDP_HEADER_LEN = 8
VXLAN_HEADER_LEN = 8
ARP_BODY_LEN = 28

IPPROTO_UDP = 17
VXLAN_UDP_PORT = 4789
# Fixed source port keeps encapsulated frames reproducible byte for byte.
VXLAN_UDP_SRC_PORT = 49152
VXLAN_FLAG_VNI_VALID = 0x08

DEFAULT_TTL = 64

VXLAN_OVERHEAD = ETH_HEADER_LEN + IPV4_HEADER_LEN + UDP_HEADER_LEN + VXLAN_HEADER_LEN


class TruncatedFrameError(ValueError):
    """Raised when wire bytes are too short for the advertised structure."""


class NotVxlanError(ValueError):
    """Raised when a frame expected to carry a VXLAN envelope does not."""


class VniOutOfRange(ValueError):
    """Raised for VXLAN network identifiers outside the 24-bit space."""


@dataclass(frozen=True)
class MacAddress:
    """A 48-bit Ethernet address; canonical text form is lowercase colons."""

    octets: bytes

    def __post_init__(self) -> None:
        if len(self.octets) != 6:
            raise ValueError(f"MAC address needs 6 octets, got {len(self.octets)}")

    @classmethod
    def parse(cls, text: str) -> "MacAddress":
        parts = text.strip().split(":")
        if len(parts) != 6:
            raise ValueError(f"malformed MAC address {text!r}")
        return cls(bytes(int(p, 16) for p in parts))

    @property
    def is_broadcast(self) -> bool:
        return self.octets == b"\xff" * 6

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)


BROADCAST_MAC = MacAddress(b"\xff" * 6)
ZERO_MAC = MacAddress(b"\x00" * 6)


@dataclass(frozen=True)
class Ipv4Address:
    """IPv4 address held as a 32-bit integer; prints as dotted quad."""

    value: int

    def __post_init__(self) -> None:
        if not 0 <= self.value < 2**32:
            raise ValueError(f"IPv4 address out of range: {self.value}")

    @classmethod
    def parse(cls, text: str) -> "Ipv4Address":
        parts = text.strip().split(".")
        if len(parts) != 4:
            raise ValueError(f"malformed IPv4 address {text!r}")
        octets = [int(p) for p in parts]
        if any(not 0 <= o <= 255 for o in octets):
            raise ValueError(f"malformed IPv4 address {text!r}")
        return cls((octets[0] << 24) | (octets[1] << 16) | (octets[2] << 8) | octets[3])

    def in_prefix(self, network: "Ipv4Address", prefix_len: int) -> bool:
        if not 0 <= prefix_len <= 32:
            raise ValueError(f"bad prefix length {prefix_len}")
        if prefix_len == 0:
            return True
        mask = ~((1 << (32 - prefix_len)) - 1) & 0xFFFFFFFF
        return (self.value & mask) == (network.value & mask)

    def __str__(self) -> str:
        v = self.value
        return f"{v >> 24 & 255}.{v >> 16 & 255}.{v >> 8 & 255}.{v & 255}"


def _check_vlan(vlan: int | None) -> None:
    if vlan is not None and not 1 <= vlan <= 4094:
        raise ValueError(f"VLAN tag must be 1..4094, got {vlan}")


@dataclass(frozen=True)
class Opaque:
    """Uninterpreted L2 payload; keeps its ethertype so parsing round-trips."""

    ethertype: int
    data: bytes = b""

    def __post_init__(self) -> None:
        if not 0 <= self.ethertype <= 0xFFFF:
            raise ValueError(f"bad ethertype {self.ethertype:#x}")


ARP_REQUEST = 1
ARP_REPLY = 2


@dataclass(frozen=True)
class ArpMessage:
    op: int
    sender_mac: MacAddress
    sender_ip: Ipv4Address
    target_mac: MacAddress
    target_ip: Ipv4Address

    def __post_init__(self) -> None:
        if self.op not in (ARP_REQUEST, ARP_REPLY):
            raise ValueError(f"bad ARP op {self.op}")
        if self.op == ARP_REQUEST and self.target_mac != ZERO_MAC:
            raise ValueError("ARP request must carry a zeroed target MAC")


@dataclass(frozen=True)
class VxlanEnvelope:
    vni: int
    inner: "EthernetFrame"

    def __post_init__(self) -> None:
        if not 0 <= self.vni < 2**24:
            raise VniOutOfRange(f"VNI {self.vni} outside 24-bit range")


@dataclass(frozen=True)
class Ipv4Packet:
    src: Ipv4Address
    dst: Ipv4Address
    protocol: int
    body: VxlanEnvelope | bytes = b""

    def __post_init__(self) -> None:
        if not 0 <= self.protocol <= 255:
            raise ValueError(f"bad IP protocol {self.protocol}")


@dataclass(frozen=True)
class EthernetFrame:
    dst: MacAddress
    src: MacAddress
    vlan: int | None = None
    payload: Ipv4Packet | ArpMessage | Opaque = field(
        default_factory=lambda: Opaque(0x0000)
    )

    def __post_init__(self) -> None:
        _check_vlan(self.vlan)

    @property
    def is_vxlan(self) -> bool:
        return isinstance(self.payload, Ipv4Packet) and isinstance(
            self.payload.body, VxlanEnvelope
        )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _serialize_arp(arp: ArpMessage) -> bytes:
    return struct.pack(
        ">HHBBH6s4s6s4s",
        1,                      # htype: Ethernet
        ETHERTYPE_IPV4,         # ptype
        6,                      # hlen
        4,                      # plen
        arp.op,
        arp.sender_mac.octets,
        struct.pack(">I", arp.sender_ip.value),
        arp.target_mac.octets,
        struct.pack(">I", arp.target_ip.value),
    )


def _serialize_ipv4(pkt: Ipv4Packet) -> bytes:
    if isinstance(pkt.body, VxlanEnvelope):
        inner = serialize(pkt.body.inner)
        udp_len = UDP_HEADER_LEN + VXLAN_HEADER_LEN + len(inner)
        body = struct.pack(
            ">HHHH", VXLAN_UDP_SRC_PORT, VXLAN_UDP_PORT, udp_len, 0
        )
        body += bytes([VXLAN_FLAG_VNI_VALID, 0, 0, 0])
        body += struct.pack(">I", pkt.body.vni << 8)
        body += inner
    else:
        body = pkt.body
    header = struct.pack(
        ">BBHHHBBHII",
        0x45,                   # version 4, IHL 5
        0,                      # DSCP/ECN
        IPV4_HEADER_LEN + len(body),
        0,                      # identification
        0,                      # flags / fragment offset
        DEFAULT_TTL,
        pkt.protocol,
        0,                      # checksum always zero in this model
        pkt.src.value,
        pkt.dst.value,
    )
    return header + body


def serialize(frame: EthernetFrame) -> bytes:
    """Render a frame to wire bytes."""
    out = frame.dst.octets + frame.src.octets
    if frame.vlan is not None:
        out += struct.pack(">HH", TPID_8021Q, frame.vlan)
    payload = frame.payload
    if isinstance(payload, Ipv4Packet):
        out += struct.pack(">H", ETHERTYPE_IPV4) + _serialize_ipv4(payload)
    elif isinstance(payload, ArpMessage):
        out += struct.pack(">H", ETHERTYPE_ARP) + _serialize_arp(payload)
    else:
        out += struct.pack(">H", payload.ethertype) + payload.data
    return out


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _parse_arp(data: bytes) -> ArpMessage:
    if len(data) < ARP_BODY_LEN:
        raise TruncatedFrameError(f"ARP body needs {ARP_BODY_LEN} bytes, got {len(data)}")
    if len(data) > ARP_BODY_LEN:
        raise ValueError("trailing bytes after ARP body")
    htype, ptype, hlen, plen, op = struct.unpack(">HHBBH", data[:8])
    if (htype, ptype, hlen, plen) != (1, ETHERTYPE_IPV4, 6, 4):
        raise ValueError("unsupported ARP header combination")
    sender_mac = MacAddress(data[8:14])
    sender_ip = Ipv4Address(struct.unpack(">I", data[14:18])[0])
    target_mac = MacAddress(data[18:24])
    target_ip = Ipv4Address(struct.unpack(">I", data[24:28])[0])
    return ArpMessage(op, sender_mac, sender_ip, target_mac, target_ip)


def _try_parse_vxlan(body: bytes) -> VxlanEnvelope | None:
    if len(body) < UDP_HEADER_LEN + VXLAN_HEADER_LEN:
        return None
    _sport, dport, udp_len, _csum = struct.unpack(">HHHH", body[:8])
    if dport != VXLAN_UDP_PORT or udp_len != len(body):
        return None
    if body[8] & VXLAN_FLAG_VNI_VALID == 0:
        return None
    vni = struct.unpack(">I", body[12:16])[0] >> 8
    try:
        inner = parse(body[16:])
    except ValueError:
        return None
    return VxlanEnvelope(vni, inner)


def _parse_ipv4(data: bytes) -> Ipv4Packet:
    if len(data) < IPV4_HEADER_LEN:
        raise TruncatedFrameError(f"IPv4 header needs {IPV4_HEADER_LEN} bytes, got {len(data)}")
    version_ihl = data[0]
    if version_ihl != 0x45:
        raise ValueError(f"only IPv4 with a 20-byte header is modeled, got {version_ihl:#x}")
    total_len = struct.unpack(">H", data[2:4])[0]
    if total_len != len(data):
        raise TruncatedFrameError(
            f"IPv4 total length {total_len} disagrees with {len(data)} bytes on the wire"
        )
    protocol = data[9]
    src = Ipv4Address(struct.unpack(">I", data[12:16])[0])
    dst = Ipv4Address(struct.unpack(">I", data[16:20])[0])
    body: VxlanEnvelope | bytes = data[IPV4_HEADER_LEN:]
    if protocol == IPPROTO_UDP:
        envelope = _try_parse_vxlan(data[IPV4_HEADER_LEN:])
        if envelope is not None:
            body = envelope
    return Ipv4Packet(src, dst, protocol, body)


def parse(data: bytes) -> EthernetFrame:
    """Parse wire bytes back into the frame model.

    Raises :class:`TruncatedFrameError` on inputs shorter than the
    structure they advertise.
    """
    if len(data) < ETH_HEADER_LEN:
        raise TruncatedFrameError(f"frame needs {ETH_HEADER_LEN} bytes, got {len(data)}")
    dst = MacAddress(data[0:6])
    src = MacAddress(data[6:12])
    ethertype = struct.unpack(">H", data[12:14])[0]
    offset = 14
    vlan: int | None = None
    if ethertype == TPID_8021Q:
        if len(data) < offset + 4:
            raise TruncatedFrameError("802.1Q tag truncated")
        tci = struct.unpack(">H", data[offset : offset + 2])[0]
        vlan = tci & 0x0FFF
        if vlan == 0:
            raise ValueError("priority-tagged frames (VID 0) are not modeled")
        ethertype = struct.unpack(">H", data[offset + 2 : offset + 4])[0]
        offset += 4
    rest = data[offset:]
    payload: Ipv4Packet | ArpMessage | Opaque
    if ethertype == ETHERTYPE_IPV4:
        payload = _parse_ipv4(rest)
    elif ethertype == ETHERTYPE_ARP:
        payload = _parse_arp(rest)
    else:
        payload = Opaque(ethertype, rest)
    return EthernetFrame(dst, src, vlan, payload)


# ---------------------------------------------------------------------------
# VXLAN encap / decap
# ---------------------------------------------------------------------------


def vxlan_encap(
    inner: EthernetFrame,
    vni: int,
    outer_src_mac: MacAddress,
    outer_dst_mac: MacAddress,
    outer_src_ip: Ipv4Address,
    outer_dst_ip: Ipv4Address,
) -> EthernetFrame:
    """Wrap ``inner`` in a VXLAN envelope addressed with the given outer headers.

    The inner frame is carried untouched; the outer frame is always
    untagged.  Raises :class:`VniOutOfRange` for a VNI >= 2**24.
    """
    envelope = VxlanEnvelope(vni, inner)
    packet = Ipv4Packet(outer_src_ip, outer_dst_ip, IPPROTO_UDP, envelope)
    return EthernetFrame(outer_dst_mac, outer_src_mac, None, packet)


def vxlan_decap(frame: EthernetFrame) -> tuple[int, EthernetFrame]:
    """Return ``(vni, inner frame)`` from a VXLAN-encapsulated frame.

    Raises :class:`NotVxlanError` when the payload lacks the envelope.
    """
    payload = frame.payload
    if not isinstance(payload, Ipv4Packet) or not isinstance(payload.body, VxlanEnvelope):
        raise NotVxlanError("frame does not carry a VXLAN envelope")
    return payload.body.vni, payload.body.inner


# ---------------------------------------------------------------------------
# hex-dump trace format: one frame per line, lowercase hex, no separators
# ---------------------------------------------------------------------------


def to_hex(frame: EthernetFrame) -> str:
    return serialize(frame).hex()


def from_hex(line: str) -> EthernetFrame:
    return parse(bytes.fromhex(line.strip()))
