"""The NIC's embedded switch, configured by hand.

Builds the two-compartment layout port by port, then probes the
forwarding pipeline: PVID tagging, MAC resolution, spoof blocking,
and the VLAN isolation drops.
"""

from vswitchsim import MacAddress, NicSwitch, VfConfig, WildcardFilter
from vswitchsim.frames import EthernetFrame, Opaque
from vswitchsim.nic import FilterAction, HOST_CONTEXT, PortId, VfRole

nic = NicSwitch(fabric_ports=1, pfs=1)
nic.set_pf_mac(0, MacAddress.parse("02:00:00:00:01:00"))

inout = nic.add_vf()
gw_red = nic.add_vf()
vm_red = nic.add_vf()
gw_blue = nic.add_vf()

nic.configure_vf(HOST_CONTEXT, inout, VfConfig(
    MacAddress.parse("02:00:00:00:00:01"), pvid=0, attached_to="vswitch-0",
    role=VfRole.IN_OUT))
nic.configure_vf(HOST_CONTEXT, gw_red, VfConfig(
    MacAddress.parse("02:00:00:00:00:02"), pvid=1, attached_to="vswitch-0",
    role=VfRole.GATEWAY))
nic.configure_vf(HOST_CONTEXT, vm_red, VfConfig(
    MacAddress.parse("02:00:00:00:00:03"), pvid=1, spoof_check=True,
    attached_to="red-vm0", role=VfRole.TENANT))
nic.configure_vf(HOST_CONTEXT, gw_blue, VfConfig(
    MacAddress.parse("02:00:00:00:00:04"), pvid=2, attached_to="vswitch-1",
    role=VfRole.GATEWAY))
nic.add_filter(WildcardFilter(priority=1000, action=FilterAction.DROP,
                              in_port=vm_red, dst_mac=nic.pf_macs[PortId.pf(0)]))


def probe(label, in_port, dst, src, vlan=None):
    frame = EthernetFrame(dst, src, vlan, Opaque(0x88B5, b""))
    outputs, drops = nic.switch_frame(in_port, frame)
    where = ", ".join(f"{p} (vlan {f.vlan})" for p, f in outputs) or "-"
    why = ", ".join(d.reason for d in drops) or "-"
    print(f"{label:<46} -> out: {where:<18} drops: {why}")


ext = MacAddress.parse("02:f0:00:00:00:99")
print("port map: fabric0, pf0, inout=vf0, gw_red=vf1 (vlan1), vm_red=vf2 (vlan1), gw_blue=vf3 (vlan2)\n")

probe("fabric -> In/Out VF (untagged delivery)", PortId.fabric(0),
      nic.vf_configs[inout].mac, ext)
probe("gateway -> tenant (tag pushed, then popped)", gw_red,
      nic.vf_configs[vm_red].mac, ext)
probe("tenant -> gateway", vm_red,
      nic.vf_configs[gw_red].mac, nic.vf_configs[vm_red].mac)
probe("tenant spoofing its source MAC", vm_red,
      nic.vf_configs[gw_red].mac, nic.vf_configs[gw_red].mac)
probe("tenant -> host PF (security filter)", vm_red,
      nic.pf_macs[PortId.pf(0)], nic.vf_configs[vm_red].mac)
probe("tenant -> blue gateway (cross-VLAN)", vm_red,
      nic.vf_configs[gw_blue].mac, nic.vf_configs[vm_red].mac)
probe("tenant -> unknown MAC (isolated VLAN)", vm_red,
      ext, nic.vf_configs[vm_red].mac)
probe("In/Out -> unknown MAC (uplink flood)", inout,
      ext, nic.vf_configs[inout].mac)

print("\nlearning table after the probes:")
for (vlan, mac), port in sorted(nic.learning.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
    print(f"  vlan {vlan}  {mac}  ->  {port}")
