"""p2p / p2v / v2v traffic across security levels.

The latency proxy at desk scale is the NIC-switch traversal count:
compartmentalized deployments pay one extra NIC round-trip per
vswitch-to-VM leg, which this table makes visible.  Intra-server
VM-to-VM traffic shows the same effect without the fabric legs.
"""

from vswitchsim import (
    DeploymentSpec,
    Scenario,
    ScenarioKind,
    SecurityLevel,
    TenantSpec,
    default_flows,
    plan_deployment,
    run_scenario,
    run_vm_to_vm,
)


def build(level):
    return plan_deployment(DeploymentSpec(
        tenants=tuple(TenantSpec(f"t{i}", 2) for i in range(4)),
        level=level,
    ))


plans = {
    "baseline": build(SecurityLevel.baseline()),
    "level1": build(SecurityLevel.level1()),
    "level2 (2 groups)": build(SecurityLevel.level2(groups=[["t0", "t1"], ["t2", "t3"]])),
}

print(f"{'deployment':<20}{'scenario':<8}{'delivered':>10}{'drops':>7}"
      f"{'traversals':>12}{'path hops':>11}")
for name, plan in plans.items():
    for kind in ScenarioKind:
        scenario = Scenario(kind, default_flows(plan, count=50), seed=1)
        metrics, _ = run_scenario(plan, scenario)
        delivered = sum(f.delivered for f in metrics.flows.values())
        dropped = sum(f.dropped for f in metrics.flows.values())
        f0 = metrics.flows["f0:t0"]
        print(f"{name:<20}{kind.value:<8}{delivered:>10}{dropped:>7}"
              f"{f0.traversals_mean:>12.0f}{f0.hops_mean:>11.0f}")

print("\nintra-server VM-to-VM (tenant t0, vm0 -> vm1):")
for name, plan in plans.items():
    metrics, _ = run_vm_to_vm(plan, "t0-vm0", "t0-vm1", count=10)
    fm = metrics.flows["t0-vm0->t0-vm1"]
    print(f"  {name:<20} delivered {fm.delivered:>3}   NIC traversals {fm.traversals_mean:.0f}")
