"""Frames on the wire: serialization, hex dumps, VXLAN encap/decap.

Builds a few frames by hand, shows their exact byte layout, and walks
through the overlay encapsulation round trip.
"""

from vswitchsim import (
    ArpMessage,
    EthernetFrame,
    Ipv4Address,
    Ipv4Packet,
    MacAddress,
    parse,
    serialize,
    vxlan_decap,
    vxlan_encap,
)
from vswitchsim.frames import ARP_REQUEST, BROADCAST_MAC, ZERO_MAC, to_hex

vm_mac = MacAddress.parse("02:00:00:00:00:03")
gw_mac = MacAddress.parse("02:00:00:00:00:02")
vm_ip = Ipv4Address.parse("10.1.0.10")
ext_ip = Ipv4Address.parse("198.51.100.9")

# A plain IPv4 data frame, as a tenant VM would emit it toward its gateway.
data = EthernetFrame(gw_mac, vm_mac, payload=Ipv4Packet(vm_ip, ext_ip, 253, b"hello"))
print("data frame:", to_hex(data))
print("  length:", len(serialize(data)), "bytes")
assert parse(serialize(data)) == data

# The ARP request the VM would send if it had no static gateway entry.
arp = EthernetFrame(
    BROADCAST_MAC, vm_mac,
    payload=ArpMessage(ARP_REQUEST, vm_mac, vm_ip, ZERO_MAC, Ipv4Address.parse("10.1.0.1")),
)
print("\narp request:", to_hex(arp))
print("  14-byte Ethernet header + 28-byte ARP body =", len(serialize(arp)), "bytes")

# Overlay networks wrap tenant frames in a VXLAN envelope.  The outer
# frame costs exactly 14 + 20 + 8 + 8 = 50 bytes on top of the inner one.
outer = vxlan_encap(
    data, vni=7,
    outer_src_mac=MacAddress.parse("02:00:00:00:00:01"),
    outer_dst_mac=MacAddress.parse("02:ee:00:00:00:01"),
    outer_src_ip=Ipv4Address.parse("172.31.0.1"),
    outer_dst_ip=Ipv4Address.parse("172.31.255.1"),
)
print("\nvxlan outer:", to_hex(outer))
print("  overhead:", len(serialize(outer)) - len(serialize(data)), "bytes")

vni, inner = vxlan_decap(outer)
print("decapsulated vni:", vni, "- inner intact:", serialize(inner) == serialize(data))
