"""Acceptance suite: one test per criterion, each printing a pass line.

Run with ``pytest -v -s tests/test_acceptance.py`` to see the per-criterion
lines.  Every tolerance is exact; runtime bounds are asserted where the
criterion states one.
"""

import json
import random
import time

import pytest

from vswitchsim.frames import (
    ARP_REQUEST,
    ArpMessage,
    BROADCAST_MAC,
    EthernetFrame,
    Ipv4Address,
    MacAddress,
    Opaque,
    VXLAN_OVERHEAD,
    ZERO_MAC,
    parse,
    serialize,
    vxlan_encap,
)
from vswitchsim.harness import (
    FlowSpec,
    Scenario,
    ScenarioKind,
    default_flows,
    golden_chain_check,
    run_scenario,
    strip_spoof_checks,
    verify_isolation,
)
from vswitchsim.nic import VfExhaustion
from vswitchsim.orchestrator import (
    DeploymentSpec,
    ResourceMode,
    SecurityLevel,
    TenantSpec,
    account_resources,
    count_vfs,
    plan_deployment,
)
from vswitchsim.secmodel import Mechanism, compromise, security_mechanisms

from test_frames import random_frame


def make_spec(n_tenants, vm_count=1, level=None, mode=ResourceMode.SHARED, **kw):
    return DeploymentSpec(
        tenants=tuple(TenantSpec(f"t{i}", vm_count) for i in range(n_tenants)),
        level=level or SecurityLevel.level1(),
        mode=mode,
        **kw,
    )


def report(n, text):
    print(f"\n[criterion {n}] PASS  {text}")


def test_criterion_1_vf_count_formulas():
    start = time.perf_counter()
    assert count_vfs(make_spec(1, 1)) == 3
    assert count_vfs(make_spec(4, 1)) == 9
    assert count_vfs(make_spec(2, 1, level=SecurityLevel.level2())) == 6
    assert count_vfs(make_spec(4, 1, level=SecurityLevel.level2())) == 12
    with pytest.raises(VfExhaustion):
        count_vfs(make_spec(32, 1))  # 65 VFs on a single 64-VF PF
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    report(1, f"VF formulas 3/9/6/12 exact, exhaustion past 64/PF ({elapsed:.3f}s)")


def test_criterion_2_golden_forwarding_chains():
    start = time.perf_counter()
    plans = [
        plan_deployment(make_spec(1, 1)),
        plan_deployment(make_spec(4, 1)),
        plan_deployment(make_spec(4, 2)),
        plan_deployment(make_spec(2, 1, level=SecurityLevel.level2())),
        plan_deployment(make_spec(4, 1, level=SecurityLevel.level2())),
        plan_deployment(make_spec(
            4, 1, level=SecurityLevel.level2(groups=[["t0", "t1"], ["t2", "t3"]]))),
        plan_deployment(make_spec(
            4, 1, level=SecurityLevel.level1(user_space=True), mode=ResourceMode.ISOLATED)),
        plan_deployment(make_spec(
            4, 1, level=SecurityLevel.level2(user_space=True), mode=ResourceMode.ISOLATED)),
    ]
    for plan in plans:
        for tenant in plan.tenant_ids():
            result = golden_chain_check(plan, tenant)
            assert result.passed, (plan.spec.level.describe(), tenant,
                                   result.first_divergence)
            assert result.steps_matched == 10
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    report(2, f"ingress/egress chains match all 10 hop snapshots on "
              f"{len(plans)} plans ({elapsed:.3f}s)")


def test_criterion_3_isolation_fuzz():
    start = time.perf_counter()
    plan = plan_deployment(make_spec(4, 1, level=SecurityLevel.level2()))
    violations = verify_isolation(plan, frames=10_000, seed=7)
    assert violations == []
    faulty = strip_spoof_checks(plan)
    flagged = verify_isolation(faulty, frames=200, seed=7)
    assert len(flagged) >= 1
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    report(3, f"40,000 adversarial frames: zero leaks; spoof-stripped variant "
              f"flags {len(flagged)} deliveries ({elapsed:.1f}s)")


def test_criterion_4_compromise_table():
    tenants = {"t0", "t1", "t2", "t3"}
    base = plan_deployment(make_spec(4, 1, level=SecurityLevel.baseline()))
    rep = compromise(base, "vswitch-0")
    assert rep.host_reachable is True and rep.reachable_tenants == tenants

    l1 = plan_deployment(make_spec(4, 1, level=SecurityLevel.level1()))
    rep = compromise(l1, "vswitch-0")
    assert rep.host_reachable is False and rep.reachable_tenants == tenants

    l2 = plan_deployment(make_spec(4, 1, level=SecurityLevel.level2()))
    for i in range(4):
        rep = compromise(l2, f"vswitch-{i}")
        assert rep.host_reachable is False
        assert rep.reachable_tenants == {f"t{i}"}
    report(4, "baseline: host+all; level1: all tenants, no host; "
              "level2 per-tenant: exactly one tenant")


def test_criterion_5_boundary_counting():
    sizes = {}
    cases = {
        "baseline-kernel": (SecurityLevel.baseline(), ResourceMode.SHARED, 0),
        "baseline-user": (SecurityLevel.baseline(user_space=True), ResourceMode.ISOLATED, 1),
        "level1-kernel": (SecurityLevel.level1(), ResourceMode.SHARED, 1),
        "level2-kernel": (SecurityLevel.level2(), ResourceMode.SHARED, 1),
        "level1-user": (SecurityLevel.level1(user_space=True), ResourceMode.ISOLATED, 2),
        "level2-user": (SecurityLevel.level2(user_space=True), ResourceMode.ISOLATED, 2),
    }
    for name, (level, mode, expected) in cases.items():
        plan = plan_deployment(make_spec(4, 1, level=level, mode=mode))
        got = security_mechanisms(plan)
        assert len(got) == expected, name
        sizes[name] = len(got)
        two_expected = level.compartmentalized and level.user_space
        assert (len(got) >= 2) == two_expected
    assert security_mechanisms(
        plan_deployment(make_spec(4, 1, level=SecurityLevel.level1(user_space=True),
                                  mode=ResourceMode.ISOLATED))
    ) == {Mechanism.VM_ISOLATION, Mechanism.USER_KERNEL_SEPARATION}
    report(5, f"mechanism set sizes {sizes}")


def test_criterion_6_resource_accounting():
    baseline = account_resources(make_spec(4, 1, level=SecurityLevel.baseline()))
    level1_iso = account_resources(make_spec(4, 1, mode=ResourceMode.ISOLATED))
    assert level1_iso.total_cores - baseline.total_cores == 1

    shared_levels = {
        1: SecurityLevel.level1(),
        2: SecurityLevel.level2(groups=[["t0", "t1"], ["t2", "t3"]]),
        4: SecurityLevel.level2(),
    }
    ram = {}
    for compartments, level in shared_levels.items():
        acct = account_resources(make_spec(4, 1, level=level))
        assert acct.vswitch_cores == 1, f"{compartments} compartments"
        ram[compartments] = acct.total_ram_gb
    assert ram[2] - ram[1] == acct.ram_gb_per_vm
    assert ram[4] - ram[2] == 2 * acct.ram_gb_per_vm

    user_cases = {
        SecurityLevel.baseline(user_space=True): 1,
        SecurityLevel.level1(user_space=True): 1,
        SecurityLevel.level2(user_space=True): 4,
    }
    for level, compartments in user_cases.items():
        acct = account_resources(make_spec(4, 1, level=level, mode=ResourceMode.ISOLATED))
        assert acct.vswitch_cores == compartments
        assert acct.total_cores == 1 + compartments
    report(6, "isolated level1 costs exactly 1 extra core; shared stays at 1 "
              "core with linear RAM; user space adds 1 core per compartment")


def test_criterion_7_hop_count_deltas():
    start = time.perf_counter()
    l1 = plan_deployment(make_spec(4, 1))
    base = plan_deployment(make_spec(4, 1, level=SecurityLevel.baseline()))

    def traversals(plan, kind):
        metrics, _ = run_scenario(
            plan, Scenario(kind, default_flows(plan, count=25), seed=5))
        per_flow = set()
        for fm in metrics.flows.values():
            assert fm.injected == fm.delivered == 25
            assert len(set(fm.traversals)) == 1
            per_flow.add(fm.traversals[0])
        assert len(per_flow) == 1
        return per_flow.pop()

    def hops(plan, kind):
        metrics, _ = run_scenario(
            plan, Scenario(kind, default_flows(plan, count=5), seed=5))
        return metrics.flows["f0:t0"].hops_mean

    assert traversals(l1, ScenarioKind.P2V) - traversals(base, ScenarioKind.P2V) == 2
    assert traversals(l1, ScenarioKind.V2V) - traversals(base, ScenarioKind.V2V) == 4
    for plan in (l1, base):
        assert hops(plan, ScenarioKind.P2P) < hops(plan, ScenarioKind.P2V) \
            < hops(plan, ScenarioKind.V2V)
    assert traversals(l1, ScenarioKind.P2P) < traversals(l1, ScenarioKind.P2V) \
        < traversals(l1, ScenarioKind.V2V)
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    report(7, f"p2v delta=2, tenant-to-tenant (v2v) delta=4, "
              f"p2p<p2v<v2v ordering ({elapsed:.2f}s)")


def test_criterion_8_determinism_and_conservation():
    plan = plan_deployment(make_spec(4, 2, level=SecurityLevel.level2()))
    sc = Scenario(ScenarioKind.P2V, default_flows(plan, count=20), seed=11)
    runs = []
    for _ in range(2):
        metrics, trace = run_scenario(plan, sc)
        runs.append((json.dumps(metrics.to_json_dict(), sort_keys=True),
                     "\n".join(ev.render() for ev in trace)))
    assert runs[0] == runs[1]

    l1 = plan_deployment(make_spec(3, 2))
    rng = random.Random(42)
    for _ in range(100):
        kind = rng.choice([ScenarioKind.P2P, ScenarioKind.P2V])
        flows = tuple(
            FlowSpec(tenant=f"t{rng.randrange(3)}", vm=rng.randrange(2),
                     count=rng.randint(1, 6), size=rng.choice([64, 128, 512]))
            for _ in range(rng.randint(1, 4))
        )
        metrics, _ = run_scenario(l1, Scenario(kind, flows, seed=rng.randrange(1000)))
        for fid, fm in metrics.flows.items():
            assert fm.injected == fm.delivered + fm.dropped, fid
    report(8, "repeat runs byte-identical; injected = delivered + dropped "
              "across a 100-run randomized suite")


def test_criterion_9_wire_format_oracle():
    start = time.perf_counter()
    for seed in range(1000):
        frame = random_frame(random.Random(seed))
        assert parse(serialize(frame)) == frame

    inner = EthernetFrame(
        MacAddress.parse("02:00:00:00:00:02"), MacAddress.parse("02:00:00:00:00:01"),
        payload=Opaque(0x88B5, b"\xde\xad\xbe\xef"),
    )
    outer = vxlan_encap(inner, 0x123456,
                        MacAddress.parse("02:00:00:00:00:aa"),
                        MacAddress.parse("02:00:00:00:00:bb"),
                        Ipv4Address.parse("192.0.2.1"), Ipv4Address.parse("192.0.2.2"))
    assert len(serialize(outer)) == len(serialize(inner)) + VXLAN_OVERHEAD
    assert serialize(outer).hex() == "".join([
        "0200000000bb", "0200000000aa", "0800",          # outer Ethernet
        "45", "00", "0036", "0000", "0000", "40", "11",  # IPv4 header
        "0000", "c0000201", "c0000202",
        "c000", "12b5", "0022", "0000",                  # UDP to port 4789
        "08", "000000", "123456", "00",                  # VXLAN header
        "020000000002", "020000000001", "88b5", "deadbeef",
    ])

    arp = EthernetFrame(
        BROADCAST_MAC, MacAddress.parse("02:00:00:00:00:01"),
        payload=ArpMessage(ARP_REQUEST, MacAddress.parse("02:00:00:00:00:01"),
                           Ipv4Address.parse("10.1.0.10"), ZERO_MAC,
                           Ipv4Address.parse("10.1.0.1")),
    )
    assert serialize(arp).hex() == (
        "ffffffffffff020000000001080600010800060400010200000000010a01000a"
        "0000000000000a010001"
    )
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    report(9, f"1000-seed round-trip identity, VXLAN length formula and "
              f"golden hex dumps byte-exact ({elapsed:.3f}s)")
