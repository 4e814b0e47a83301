"""Boundary counting and compromise reachability."""

import pytest

from vswitchsim.orchestrator import (
    DeploymentSpec,
    ResourceMode,
    SecurityLevel,
    TenantSpec,
    plan_deployment,
)
from vswitchsim.secmodel import (
    EDGE_SOFTWARE_DIRECT,
    HOST_KERNEL,
    Mechanism,
    UnknownComponent,
    compromise,
    security_mechanisms,
    tenant_node,
)


def plan_for(level, mode=ResourceMode.SHARED, n=4):
    spec = DeploymentSpec(
        tenants=tuple(TenantSpec(f"t{i}") for i in range(n)),
        level=level,
        mode=mode,
    )
    return plan_deployment(spec)


def test_mechanisms_baseline_kernel_empty():
    assert security_mechanisms(plan_for(SecurityLevel.baseline())) == frozenset()


def test_mechanisms_baseline_user():
    plan = plan_for(SecurityLevel.baseline(user_space=True), ResourceMode.ISOLATED)
    assert security_mechanisms(plan) == {Mechanism.USER_KERNEL_SEPARATION}


def test_mechanisms_compartment_kernel():
    assert security_mechanisms(plan_for(SecurityLevel.level1())) == {Mechanism.VM_ISOLATION}
    assert security_mechanisms(plan_for(SecurityLevel.level2())) == {Mechanism.VM_ISOLATION}


def test_mechanisms_compartment_plus_user_space_gives_two():
    for level in (SecurityLevel.level1(user_space=True),
                  SecurityLevel.level2(user_space=True)):
        plan = plan_for(level, ResourceMode.ISOLATED)
        got = security_mechanisms(plan)
        assert got == {Mechanism.VM_ISOLATION, Mechanism.USER_KERNEL_SEPARATION}
        assert len(got) == 2


def test_two_boundaries_iff_compartment_and_user_space():
    cases = [
        (SecurityLevel.baseline(), ResourceMode.SHARED, False),
        (SecurityLevel.baseline(user_space=True), ResourceMode.ISOLATED, False),
        (SecurityLevel.level1(), ResourceMode.SHARED, False),
        (SecurityLevel.level2(), ResourceMode.SHARED, False),
        (SecurityLevel.level1(user_space=True), ResourceMode.ISOLATED, True),
        (SecurityLevel.level2(user_space=True), ResourceMode.ISOLATED, True),
    ]
    for level, mode, expect_two in cases:
        size = len(security_mechanisms(plan_for(level, mode)))
        assert (size >= 2) == expect_two, level.describe()


def test_compromise_baseline_vswitch_reaches_host_and_all_tenants():
    report = compromise(plan_for(SecurityLevel.baseline()), "vswitch-0")
    assert report.host_reachable
    assert report.reachable_tenants == {"t0", "t1", "t2", "t3"}


def test_compromise_level1_vswitch_all_tenants_no_host():
    report = compromise(plan_for(SecurityLevel.level1()), "vswitch-0")
    assert not report.host_reachable
    assert report.reachable_tenants == {"t0", "t1", "t2", "t3"}


def test_compromise_level2_vswitch_single_tenant():
    plan = plan_for(SecurityLevel.level2())
    for i, vs in enumerate(plan.vswitches):
        report = compromise(plan, vs.id)
        assert report.reachable_tenants == {f"t{i}"}
        assert not report.host_reachable


def test_compromise_level2_grouped():
    level = SecurityLevel.level2(groups=[["t0", "t1"], ["t2", "t3"]])
    report = compromise(plan_for(level), "vswitch-1")
    assert report.reachable_tenants == {"t2", "t3"}
    assert not report.host_reachable


def test_compromised_tenant_confined_to_its_vlan():
    plan = plan_for(SecurityLevel.level2())
    report = compromise(plan, "t2")
    assert report.reachable_tenants == {"t2"}
    assert not report.host_reachable
    by_vm = compromise(plan, "t2-vm0")
    assert by_vm.reachable_tenants == {"t2"}


def test_unknown_component():
    plan = plan_for(SecurityLevel.level1())
    with pytest.raises(UnknownComponent):
        compromise(plan, "mainframe")
    with pytest.raises(UnknownComponent):
        compromise(plan, "nic")  # trusted base, not a compromise target


def test_graph_compartmentalized_has_no_software_edge_to_host():
    plan = plan_for(SecurityLevel.level2())
    g = plan.component_graph
    for tenant in plan.tenant_ids():
        node = tenant_node(tenant)
        for _, peer, data in g.edges(node, data=True):
            assert not (data["label"] == EDGE_SOFTWARE_DIRECT and peer == HOST_KERNEL)
    assert all(
        data["label"] != EDGE_SOFTWARE_DIRECT
        for _, _, data in g.edges(data=True)
    )


def test_graph_baseline_has_software_edges():
    g = plan_for(SecurityLevel.baseline()).component_graph
    labels = {data["label"] for _, _, data in g.edges(data=True)}
    assert EDGE_SOFTWARE_DIRECT in labels


def test_report_renders():
    report = compromise(plan_for(SecurityLevel.level2()), "vswitch-0")
    text = report.render_text()
    assert "vswitch-0" in text and "no" in text
    doc = report.to_json_dict()
    assert doc["reachable_tenants"] == ["t0"]
