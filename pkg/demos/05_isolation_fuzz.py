"""Adversarial isolation fuzzing.

Every tenant VF gets a stream of hostile frames: spoofed sources,
foreign destinations, stray VLAN tags, unknown ethertypes.  On a
per-tenant compartment plan nothing may cross a tenant boundary; with
the spoof filters stripped, forged-source frames start getting through,
which is exactly what the filters exist to stop.
"""

from collections import Counter

from vswitchsim import (
    DeploymentSpec,
    SecurityLevel,
    TenantSpec,
    plan_deployment,
    strip_spoof_checks,
    verify_isolation,
)

plan = plan_deployment(DeploymentSpec(
    tenants=tuple(TenantSpec(f"t{i}", 1) for i in range(4)),
    level=SecurityLevel.level2(),
))

violations = verify_isolation(plan, frames=2000, seed=7)
print(f"hardened plan, 4 x 2000 adversarial frames: {len(violations)} violations")

faulty = strip_spoof_checks(plan)
flagged = verify_isolation(faulty, frames=200, seed=7)
print(f"spoof checks stripped, 4 x 200 frames:      {len(flagged)} violations")
print("by kind:", dict(Counter(v.kind for v in flagged)))
for v in flagged[:5]:
    print(f"  {v.kind}: {v.injected_at} -> {v.delivered_to} ({v.detail})")
print("  ...")
