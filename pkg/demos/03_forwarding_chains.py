"""The ingress and egress forwarding chains, hop by hop.

Plans a two-compartment deployment, prints its generated flow rules,
and replays the golden chains so every header transformation is
visible: MAC rewrite at the vswitch, tag push at NIC classification,
tag pop before delivery.
"""

from vswitchsim import (
    DeploymentSpec,
    SecurityLevel,
    TenantSpec,
    golden_chain_check,
    plan_deployment,
)

spec = DeploymentSpec(
    tenants=(TenantSpec("red", 1, "10.1.0.0/24"), TenantSpec("blue", 1, "10.2.0.0/24")),
    level=SecurityLevel.level2(),
)
plan = plan_deployment(spec)

print("generated flow rules:")
print(plan.rules_text())

print("\nNIC view of the red tenant:")
wiring = plan.tenant_wirings["red"]
print(f"  vlan {wiring.vlan}, In/Out {wiring.inout_vf}, Gw {wiring.gw_vf} ({wiring.gw_mac})")
for vm in plan.vms_of("red"):
    print(f"  {vm.id}: {vm.vf} mac {vm.mac} ip {vm.ip} static-arp {vm.gateway_ip} -> {vm.static_arp[vm.gateway_ip]}")

result = golden_chain_check(plan, "red")
print(f"\ngolden chains: {'pass' if result.passed else 'FAIL'} "
      f"({result.steps_matched}/10 hop snapshots)")
for line in result.details:
    print(" ", line)
if not result.passed:
    print("first divergence:", result.first_divergence)
