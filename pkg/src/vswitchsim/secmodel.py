"""Executable threat model over a deployment plan.

Derives a component graph (tenants, vswitch compartments, NIC, host)
from a plan, answers "what can a compromised component reach", and
counts the independent security mechanisms standing between untrusted
tenant code and the host kernel.

The NIC switch and the hypervisor are the trusted base and are never
modeled as compromisable; crossing a boundary is modeled as the failure
of the corresponding mechanism, not as a concrete exploit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import networkx as nx

from .dataplane import ExecContext

HOST_KERNEL = "host-kernel"
HOST_USER = "host-user"
NIC_NODE = "nic"

EDGE_NIC_MEDIATED = "NicMediated"
EDGE_SOFTWARE_DIRECT = "SoftwareDirect"
EDGE_CO_RESIDENT = "CoResident"


class UnknownComponent(Exception):
    """The named component is not a compromisable part of this plan."""


class Mechanism(enum.Enum):
    VM_ISOLATION = "VmIsolation"
    USER_KERNEL_SEPARATION = "UserKernelSeparation"


def tenant_node(tenant_id: str) -> str:
    return f"tenant-{tenant_id}"


def build_component_graph(plan) -> nx.Graph:
    """Mechanically derive the communication graph of a plan.

    Nodes carry a ``kind`` attribute (host/nic/vswitch/tenant); edges a
    ``label`` naming the channel.  Compartmentalized levels have no
    SoftwareDirect edge between any tenant and the host kernel.
    """
    g = nx.Graph()
    g.add_node(HOST_KERNEL, kind="host")
    g.add_node(HOST_USER, kind="host")
    g.add_node(NIC_NODE, kind="nic")
    g.add_edge(HOST_USER, HOST_KERNEL, label=EDGE_CO_RESIDENT)
    g.add_edge(NIC_NODE, HOST_KERNEL, label=EDGE_NIC_MEDIATED)

    for tenant in plan.tenant_ids():
        g.add_node(tenant_node(tenant), kind="tenant")

    for vs in plan.vswitches:
        g.add_node(vs.id, kind="vswitch", exec_ctx=vs.exec_ctx.value)
        if vs.exec_ctx is ExecContext.HOST_KERNEL:
            g.add_edge(vs.id, HOST_KERNEL, label=EDGE_CO_RESIDENT)
        elif vs.exec_ctx is ExecContext.HOST_USER:
            g.add_edge(vs.id, HOST_USER, label=EDGE_CO_RESIDENT)
        else:
            g.add_edge(vs.id, NIC_NODE, label=EDGE_NIC_MEDIATED)
        for tenant in vs.gw_vfs:
            label = (
                EDGE_SOFTWARE_DIRECT
                if vs.exec_ctx in (ExecContext.HOST_KERNEL, ExecContext.HOST_USER)
                else EDGE_NIC_MEDIATED
            )
            g.add_edge(vs.id, tenant_node(tenant), label=label)

    if plan.spec.level.compartmentalized:
        for tenant in plan.tenant_ids():
            g.add_edge(tenant_node(tenant), NIC_NODE, label=EDGE_NIC_MEDIATED)
    return g


def security_mechanisms(plan, tenant: str | None = None) -> frozenset[Mechanism]:
    """Mechanisms that must all fail for tenant code, attacking through
    the vswitch, to control the host kernel.

    The baseline kernel vswitch IS host-kernel code, so the set is
    empty; a compartment adds VM isolation; user-space execution adds
    user/kernel separation; both together give the two independent
    boundaries the hardened designs aim for.
    """
    if tenant is not None and tenant not in plan.tenant_ids():
        raise UnknownComponent(f"no tenant {tenant!r} in this plan")
    mechanisms: set[Mechanism] = set()
    if plan.spec.level.compartmentalized:
        mechanisms.add(Mechanism.VM_ISOLATION)
    if plan.spec.level.user_space:
        mechanisms.add(Mechanism.USER_KERNEL_SEPARATION)
    return frozenset(mechanisms)


@dataclass(frozen=True)
class CompromiseReport:
    compromised: str
    reachable_tenants: frozenset[str]
    host_reachable: bool
    paths: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "compromised": self.compromised,
            "reachable_tenants": sorted(self.reachable_tenants),
            "host_reachable": self.host_reachable,
            "paths": list(self.paths),
        }

    def render_text(self) -> str:
        lines = [
            f"compromised component : {self.compromised}",
            f"host reachable        : {'yes' if self.host_reachable else 'no'}",
            f"reachable tenants     : {', '.join(sorted(self.reachable_tenants)) or '(none)'}",
        ]
        if self.paths:
            lines.append("paths:")
            lines.extend(f"  - {p}" for p in self.paths)
        return "\n".join(lines)


def _resolve_component(plan, component: str) -> tuple[str, str]:
    """Map a user-supplied name to (kind, canonical id)."""
    for vs in plan.vswitches:
        if component == vs.id:
            return "vswitch", vs.id
    if component in plan.tenant_ids():
        return "tenant", component
    for vm in plan.tenant_vms:
        if component == vm.id:
            return "tenant", vm.tenant
    raise UnknownComponent(
        f"{component!r} is not a vswitch, tenant or VM of this plan "
        f"(the NIC and hypervisor are trusted base)"
    )


def compromise(plan, component: str) -> CompromiseReport:
    """Reachable set once ``component`` is attacker-controlled.

    A compromised vswitch controls exactly the tenant networks attached
    to it, and reaches the host only when it co-resides with the host
    OS (the baseline).  A compromised tenant VM stays confined to its
    own VLAN members; its attack surface toward the rest of the system
    is its vswitch's gateway port.
    """
    kind, name = _resolve_component(plan, component)
    graph = plan.component_graph
    paths: list[str] = []

    if kind == "vswitch":
        vs = plan.vswitch(name)
        tenants = frozenset(vs.gw_vfs)
        host = vs.exec_ctx in (ExecContext.HOST_KERNEL, ExecContext.HOST_USER)
        for tenant in sorted(tenants):
            label = graph.edges[name, tenant_node(tenant)]["label"]
            paths.append(f"{name} -> {tenant_node(tenant)} [{label}]")
        if host:
            target = HOST_KERNEL if vs.exec_ctx is ExecContext.HOST_KERNEL else HOST_USER
            paths.append(f"{name} -> {target} [{EDGE_CO_RESIDENT}]")
        else:
            paths.append(
                f"{name} -/-> {HOST_KERNEL}: only NIC-mediated channels, "
                f"{len(security_mechanisms(plan))} mechanism(s) in the way"
            )
        return CompromiseReport(name, tenants, host, tuple(paths))

    vs = plan.vswitch_for(name)
    paths.append(
        f"{tenant_node(name)} -> vlan {plan.vlan_map.get(name)} members only; "
        f"attack surface: {vs.id} via its gateway port"
    )
    return CompromiseReport(component, frozenset({name}), False, tuple(paths))
