"""Simulator and deployment planner for compartmentalized SR-IOV virtual switching.

The package models an SR-IOV NIC's embedded L2 switch, vswitch
compartments with match-action flow tables, and tenant VMs; plans
deployments at increasing security levels; and verifies forwarding
chains, tenant isolation and resource formulas deterministically.
"""

from .frames import (
    ArpMessage,
    EthernetFrame,
    Ipv4Address,
    Ipv4Packet,
    MacAddress,
    Opaque,
    VxlanEnvelope,
    parse,
    serialize,
    vxlan_decap,
    vxlan_encap,
)
from .nic import (
    DropRecord,
    NicSwitch,
    PortId,
    PrivilegeContext,
    VfConfig,
    VfExhaustion,
    VfRole,
    WildcardFilter,
    traversal_count,
)
from .dataplane import (
    FlowMatch,
    FlowRule,
    VswitchInstance,
    build_tenant_rules,
    build_vxlan_rules,
)
from .endpoints import TenantVm, make_packet, tenant_handle
from .orchestrator import (
    DeploymentPlan,
    DeploymentSpec,
    ResourceMode,
    SecurityLevel,
    TenantSpec,
    account_resources,
    count_vfs,
    load_spec,
    plan_deployment,
)
from .secmodel import CompromiseReport, Mechanism, compromise, security_mechanisms
from .engine import Engine, NonQuiescent, TraceEvent
from .harness import (
    FlowSpec,
    Metrics,
    Scenario,
    ScenarioKind,
    default_flows,
    golden_chain_check,
    run_scenario,
    run_vm_to_vm,
    strip_spoof_checks,
    verify_isolation,
)

__version__ = "0.1.0"
