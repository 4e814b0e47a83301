"""NIC switch pipeline tests: privilege, spoofing, VLANs, filters, learning."""

import pytest

from vswitchsim.frames import (
    BROADCAST_MAC,
    EthernetFrame,
    Ipv4Address,
    MacAddress,
    Opaque,
)
from vswitchsim.nic import (
    DROP_FILTER,
    DROP_NO_ROUTE,
    DROP_SPOOF,
    DROP_UNKNOWN_UNICAST,
    DuplicateMacError,
    FilterAction,
    HOST_CONTEXT,
    NicSwitch,
    PortId,
    PrivilegeContext,
    PrivilegeError,
    VfConfig,
    VfExhaustion,
    VfRole,
    WildcardFilter,
)

PF_MAC = MacAddress.parse("02:00:00:00:01:00")
INOUT_MAC = MacAddress.parse("02:00:00:00:00:01")
GW_MAC = MacAddress.parse("02:00:00:00:00:02")
VM_MAC = MacAddress.parse("02:00:00:00:00:03")
GW2_MAC = MacAddress.parse("02:00:00:00:00:04")
VM2_MAC = MacAddress.parse("02:00:00:00:00:05")
EXT_MAC = MacAddress.parse("02:00:00:00:00:99")


def opaque_frame(dst, src, vlan=None, tag=b""):
    return EthernetFrame(dst, src, vlan, Opaque(0x88B5, tag))


@pytest.fixture
def nic():
    """Two gateway/tenant compartments side by side: vlan 1 and vlan 2."""
    n = NicSwitch(fabric_ports=1, pfs=1)
    n.set_pf_mac(0, PF_MAC)
    inout = n.add_vf()
    gw = n.add_vf()
    vm = n.add_vf()
    gw2 = n.add_vf()
    vm2 = n.add_vf()
    n.configure_vf(HOST_CONTEXT, inout, VfConfig(INOUT_MAC, 0, False, "vswitch-0", VfRole.IN_OUT))
    n.configure_vf(HOST_CONTEXT, gw, VfConfig(GW_MAC, 1, False, "vswitch-0", VfRole.GATEWAY))
    n.configure_vf(HOST_CONTEXT, vm, VfConfig(VM_MAC, 1, True, "red-vm0", VfRole.TENANT))
    n.configure_vf(HOST_CONTEXT, gw2, VfConfig(GW2_MAC, 2, False, "vswitch-1", VfRole.GATEWAY))
    n.configure_vf(HOST_CONTEXT, vm2, VfConfig(VM2_MAC, 2, True, "blue-vm0", VfRole.TENANT))
    n.ports_by_name = {"inout": inout, "gw": gw, "vm": vm, "gw2": gw2, "vm2": vm2}
    return n


def test_configure_requires_host_context(nic):
    vm = nic.ports_by_name["vm"]
    with pytest.raises(PrivilegeError):
        nic.configure_vf(PrivilegeContext("red-vm0"), vm, VfConfig(VM_MAC, 1, True, "red-vm0", VfRole.TENANT))


def test_duplicate_mac_rejected(nic):
    vm = nic.ports_by_name["vm"]
    with pytest.raises(DuplicateMacError):
        nic.configure_vf(HOST_CONTEXT, vm, VfConfig(GW_MAC, 1, True, "red-vm0", VfRole.TENANT))
    with pytest.raises(DuplicateMacError):
        nic.set_pf_mac(0, VM_MAC)


def test_role_pvid_consistency():
    with pytest.raises(ValueError):
        VfConfig(VM_MAC, 0, True, "x", VfRole.TENANT)
    with pytest.raises(ValueError):
        VfConfig(VM_MAC, 3, False, "x", VfRole.IN_OUT)


def test_reconfigure_purges_learning(nic):
    vm = nic.ports_by_name["vm"]
    nic.switch_frame(vm, opaque_frame(GW_MAC, VM_MAC))
    assert (1, VM_MAC) in nic.learning
    new_mac = MacAddress.parse("02:00:00:00:00:33")
    nic.configure_vf(HOST_CONTEXT, vm, VfConfig(new_mac, 1, True, "red-vm0", VfRole.TENANT))
    assert (1, VM_MAC) not in nic.learning


def test_fabric_to_inout_untagged(nic):
    # Ingress step: fabric frame addressed to the In/Out VF arrives untagged.
    frame = opaque_frame(INOUT_MAC, EXT_MAC)
    outputs, drops = nic.switch_frame(PortId.fabric(0), frame)
    assert drops == []
    assert [(str(p), f.vlan) for p, f in outputs] == [("vf0", None)]


def test_gw_to_tenant_tag_pushed_then_popped(nic):
    # The vswitch emits on the gateway VF; the NIC classifies into the
    # tenant VLAN, resolves the tenant VF, and pops the tag on delivery.
    gw, vm = nic.ports_by_name["gw"], nic.ports_by_name["vm"]
    frame = opaque_frame(VM_MAC, EXT_MAC)
    outputs, drops = nic.switch_frame(gw, frame)
    assert drops == []
    [(out_port, out_frame)] = outputs
    assert out_port == vm
    assert out_frame.vlan is None
    assert nic.classify_vlan(gw, frame) == 1


def test_tenant_to_gw(nic):
    gw = nic.ports_by_name["gw"]
    outputs, drops = nic.switch_frame(nic.ports_by_name["vm"], opaque_frame(GW_MAC, VM_MAC))
    assert drops == [] and [p for p, _ in outputs] == [gw]


def test_spoof_check_blocks_forged_source(nic):
    vm = nic.ports_by_name["vm"]
    outputs, drops = nic.switch_frame(vm, opaque_frame(GW_MAC, GW_MAC))
    assert outputs == []
    assert [d.reason for d in drops] == [DROP_SPOOF]


def test_spoof_check_off_learns_forged_source(nic):
    vm = nic.ports_by_name["vm"]
    cfg = nic.vf_configs[vm]
    nic.configure_vf(HOST_CONTEXT, vm, VfConfig(cfg.mac, 1, False, cfg.attached_to, cfg.role))
    nic.switch_frame(vm, opaque_frame(BROADCAST_MAC, GW_MAC))
    assert nic.learning[(1, GW_MAC)] == vm


def test_drop_to_host_filter(nic):
    vm = nic.ports_by_name["vm"]
    nic.add_filter(WildcardFilter(priority=100, action=FilterAction.DROP,
                                  in_port=vm, dst_mac=PF_MAC))
    outputs, drops = nic.switch_frame(vm, opaque_frame(PF_MAC, VM_MAC))
    assert outputs == []
    assert [d.reason for d in drops] == [DROP_FILTER]


def test_filter_priority_then_install_order(nic):
    vm = nic.ports_by_name["vm"]
    nic.add_filter(WildcardFilter(priority=1, action=FilterAction.DROP, in_port=vm))
    nic.add_filter(WildcardFilter(priority=5, action=FilterAction.ALLOW, in_port=vm))
    outputs, drops = nic.switch_frame(vm, opaque_frame(GW_MAC, VM_MAC))
    assert drops == []  # the higher-priority Allow wins
    nic.add_filter(WildcardFilter(priority=5, action=FilterAction.DROP, in_port=vm))
    outputs, drops = nic.switch_frame(vm, opaque_frame(GW_MAC, VM_MAC))
    assert drops == []  # equal priority: earlier install order wins


def test_filter_matches_src_vlan_ethertype(nic):
    vm = nic.ports_by_name["vm"]
    nic.add_filter(WildcardFilter(priority=9, action=FilterAction.DROP,
                                  src_mac=VM_MAC, vlan=0, ethertype=0x88B5))
    _, drops = nic.switch_frame(vm, opaque_frame(GW_MAC, VM_MAC))
    assert [d.reason for d in drops] == [DROP_FILTER]
    # An ARP frame from the same port slips past the ethertype match.
    from vswitchsim.frames import ARP_REQUEST, ArpMessage, Ipv4Address, ZERO_MAC
    arp = EthernetFrame(GW_MAC, VM_MAC, None, ArpMessage(
        ARP_REQUEST, VM_MAC, Ipv4Address.parse("10.1.0.10"),
        ZERO_MAC, Ipv4Address.parse("10.1.0.1")))
    _, drops = nic.switch_frame(vm, arp)
    assert drops == []


def test_unknown_unicast_vlan0_goes_to_fabric(nic):
    inout = nic.ports_by_name["inout"]
    outputs, drops = nic.switch_frame(inout, opaque_frame(EXT_MAC, INOUT_MAC))
    assert drops == []
    assert [p.kind.value for p, _ in outputs] == ["fabric"]


def test_unknown_unicast_tenant_vlan_dropped(nic):
    vm = nic.ports_by_name["vm"]
    outputs, drops = nic.switch_frame(vm, opaque_frame(EXT_MAC, VM_MAC))
    assert outputs == []
    assert [d.reason for d in drops] == [DROP_UNKNOWN_UNICAST]


def test_cross_vlan_unicast_is_no_route(nic):
    # Misconfiguration probe: a known MAC living in another VLAN.
    vm = nic.ports_by_name["vm"]
    outputs, drops = nic.switch_frame(vm, opaque_frame(GW2_MAC, VM_MAC))
    assert outputs == []
    assert [d.reason for d in drops] == [DROP_NO_ROUTE]


def test_tenant_vlan_never_reaches_fabric_even_when_learned(nic):
    # A tagged frame from the wire plants a vlan-1 fabric entry; the
    # design still refuses to forward vlan-1 traffic back to the wire.
    nic.switch_frame(PortId.fabric(0), opaque_frame(VM_MAC, EXT_MAC, vlan=1))
    assert nic.learning[(1, EXT_MAC)] == PortId.fabric(0)
    outputs, drops = nic.switch_frame(nic.ports_by_name["vm"], opaque_frame(EXT_MAC, VM_MAC))
    assert outputs == []
    assert [d.reason for d in drops] == [DROP_UNKNOWN_UNICAST]


def test_broadcast_floods_own_vlan_only(nic):
    vm = nic.ports_by_name["vm"]
    outputs, drops = nic.switch_frame(vm, opaque_frame(BROADCAST_MAC, VM_MAC))
    assert drops == []
    assert sorted(str(p) for p, _ in outputs) == [str(nic.ports_by_name["gw"])]
    assert all(f.vlan is None for _, f in outputs)


def test_broadcast_vlan0_floods_fabric_and_untagged(nic):
    inout = nic.ports_by_name["inout"]
    outputs, _ = nic.switch_frame(PortId.fabric(0), opaque_frame(BROADCAST_MAC, EXT_MAC))
    got = sorted(str(p) for p, _ in outputs)
    assert got == ["pf0", str(inout)]


def test_own_tag_overridden_by_pvid(nic):
    # Tagged frames from a PVID port are reclassified into the PVID vlan.
    vm = nic.ports_by_name["vm"]
    outputs, drops = nic.switch_frame(vm, opaque_frame(GW_MAC, VM_MAC, vlan=2))
    assert drops == []
    assert [p for p, _ in outputs] == [nic.ports_by_name["gw"]]


def test_frame_to_self_is_no_route(nic):
    vm = nic.ports_by_name["vm"]
    outputs, drops = nic.switch_frame(vm, opaque_frame(VM_MAC, VM_MAC))
    assert outputs == []
    assert [d.reason for d in drops] == [DROP_NO_ROUTE]


def test_determinism(nic):
    vm = nic.ports_by_name["vm"]
    frame = opaque_frame(BROADCAST_MAC, VM_MAC)
    first = nic.switch_frame(vm, frame)
    second = nic.switch_frame(vm, frame)
    assert first == second


def test_vf_budget_per_pf():
    n = NicSwitch(fabric_ports=1, pfs=1, max_vfs_per_pf=3)
    for _ in range(3):
        n.add_vf()
    with pytest.raises(VfExhaustion):
        n.add_vf()


def test_nonexistent_port_rejected(nic):
    with pytest.raises(ValueError):
        nic.switch_frame(PortId.vf(99), opaque_frame(GW_MAC, VM_MAC))
