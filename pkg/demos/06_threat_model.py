"""Compromise analysis and boundary counting across security levels.

Who can a compromised vswitch reach, and how many independent
mechanisms must fail before tenant code controls the host kernel?
"""

from vswitchsim import (
    DeploymentSpec,
    ResourceMode,
    SecurityLevel,
    TenantSpec,
    compromise,
    plan_deployment,
    security_mechanisms,
)

LEVELS = [
    ("baseline kernel", SecurityLevel.baseline(), ResourceMode.SHARED),
    ("baseline + user space", SecurityLevel.baseline(user_space=True), ResourceMode.ISOLATED),
    ("level1", SecurityLevel.level1(), ResourceMode.SHARED),
    ("level1 + user space", SecurityLevel.level1(user_space=True), ResourceMode.ISOLATED),
    ("level2 per-tenant", SecurityLevel.level2(), ResourceMode.SHARED),
    ("level2 + user space", SecurityLevel.level2(user_space=True), ResourceMode.ISOLATED),
]


def build(level, mode):
    return plan_deployment(DeploymentSpec(
        tenants=tuple(TenantSpec(f"t{i}", 1) for i in range(4)),
        level=level, mode=mode,
    ))


print(f"{'deployment':<24}{'boundaries':<12}mechanisms")
for name, level, mode in LEVELS:
    plan = build(level, mode)
    mechanisms = security_mechanisms(plan)
    names = ", ".join(sorted(m.value for m in mechanisms)) or "(none)"
    print(f"{name:<24}{len(mechanisms):<12}{names}")

print("\ncompromising the first vswitch in each deployment:")
for name, level, mode in LEVELS[::2]:
    plan = build(level, mode)
    report = compromise(plan, "vswitch-0")
    print(f"\n== {name} ==")
    print(report.render_text())

print("\ncompromising a tenant VM stays confined to its own VLAN:")
plan = build(SecurityLevel.level2(), ResourceMode.SHARED)
print(compromise(plan, "t2-vm0").render_text())
