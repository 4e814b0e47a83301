"""What each security level costs: cores, RAM, hugepages, VFs.

One core and one hugepage always belong to the host OS.  Shared mode
keeps all compartments on a single extra core; isolated mode pins one
core per compartment; user-space packet processing needs a dedicated
core per compartment, the baseline included.
"""

from vswitchsim import (
    DeploymentSpec,
    ResourceMode,
    SecurityLevel,
    TenantSpec,
    account_resources,
    count_vfs,
)

TENANTS = tuple(TenantSpec(f"t{i}", 1) for i in range(4))

ROWS = [
    ("baseline", SecurityLevel.baseline(), ResourceMode.SHARED),
    ("baseline isolated(4)", SecurityLevel.baseline(), ResourceMode.ISOLATED),
    ("baseline dpdk", SecurityLevel.baseline(user_space=True), ResourceMode.ISOLATED),
    ("level1 shared", SecurityLevel.level1(), ResourceMode.SHARED),
    ("level1 isolated", SecurityLevel.level1(), ResourceMode.ISOLATED),
    ("level1 dpdk", SecurityLevel.level1(user_space=True), ResourceMode.ISOLATED),
    ("level2x2 shared", SecurityLevel.level2(groups=[["t0", "t1"], ["t2", "t3"]]), ResourceMode.SHARED),
    ("level2x4 shared", SecurityLevel.level2(), ResourceMode.SHARED),
    ("level2x4 isolated", SecurityLevel.level2(), ResourceMode.ISOLATED),
    ("level2x4 dpdk", SecurityLevel.level2(user_space=True), ResourceMode.ISOLATED),
]

print(f"{'deployment':<22}{'cores':>6}{'ram GB':>8}{'hugepg GB':>11}{'VFs':>5}")
for name, level, mode in ROWS:
    kwargs = {"comparison_compartments": 4} if "isolated(4)" in name else {}
    spec = DeploymentSpec(tenants=TENANTS, level=level, mode=mode, **kwargs)
    acct = account_resources(spec)
    print(f"{name:<22}{acct.total_cores:>6}{acct.total_ram_gb:>8}"
          f"{acct.total_hugepage_gb:>11}{acct.total_vfs:>5}")

print("\nVF formula spot checks:")
for n, level, label in [
    (1, SecurityLevel.level1(), "level1, 1 tenant"),
    (4, SecurityLevel.level1(), "level1, 4 tenants"),
    (2, SecurityLevel.level2(), "level2, 2 tenants"),
    (4, SecurityLevel.level2(), "level2, 4 tenants"),
]:
    spec = DeploymentSpec(tenants=tuple(TenantSpec(f"t{i}", 1) for i in range(n)), level=level)
    print(f"  {label:<20} {count_vfs(spec)} VFs")
