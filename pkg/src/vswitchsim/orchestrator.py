"""Deployment planning: from a declarative tenant spec to a wired topology.

Turns tenants + a security level + a resource mode into a
:class:`DeploymentPlan`: a fully configured NIC switch, vswitch
compartments with installed flow tables, tenant VMs with static ARP
entries, NIC security filters, a resource account, and a component
graph for the threat model.

Security levels:

* ``baseline``   - one vswitch co-resident with the host; tenant links are
                   software edges that never touch the NIC.
* ``level1``     - one vswitch compartment (VM); all tenant traffic is
                   mediated by the NIC switch.
* ``level2``     - one compartment per tenant, or per explicit group.
* ``user_space`` - modifier on any of the above: the vswitch processes
                   packets in user space (forces the isolated resource
                   mode and one core per compartment).
"""

from __future__ import annotations

import enum
import ipaddress
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import secmodel
from .dataplane import (
    ExecContext,
    FlowMatch,
    FlowRule,
    Output,
    PopVxlan,
    PushVxlan,
    PRIO_EGRESS,
    PRIO_INGRESS,
    PRIO_VXLAN_EGRESS,
    PRIO_VXLAN_INGRESS,
    PRIO_ARP,
    ArpReply,
    SetDstMac,
    TenantWiring,
    VmAddress,
    VswitchInstance,
    VxlanUnderlay,
    build_vswitch_rules,
)
from .endpoints import Sink, TenantVm
from .frames import Ipv4Address, MacAddress
from .nic import (
    FilterAction,
    HOST_CONTEXT,
    NicSwitch,
    PortId,
    VfConfig,
    VfExhaustion,
    VfRole,
    WildcardFilter,
)

SPEC_VERSION = 1

RAM_GB_PER_VM = 4
HUGEPAGE_GB_PER_VM = 1

# Drop-to-host filters sit above any operator-added filter noise.
FILTER_PRIO_DROP_TO_HOST = 1000


class DuplicateTenantId(Exception):
    """Two tenants in a deployment spec share an id."""


class LevelKind(enum.Enum):
    BASELINE = "baseline"
    LEVEL1 = "level1"
    LEVEL2 = "level2"


@dataclass(frozen=True)
class SecurityLevel:
    kind: LevelKind
    groups: tuple[tuple[str, ...], ...] | None = None
    user_space: bool = False

    @classmethod
    def baseline(cls, user_space: bool = False) -> "SecurityLevel":
        return cls(LevelKind.BASELINE, None, user_space)

    @classmethod
    def level1(cls, user_space: bool = False) -> "SecurityLevel":
        return cls(LevelKind.LEVEL1, None, user_space)

    @classmethod
    def level2(cls, groups=None, user_space: bool = False) -> "SecurityLevel":
        frozen = tuple(tuple(g) for g in groups) if groups is not None else None
        return cls(LevelKind.LEVEL2, frozen, user_space)

    @property
    def compartmentalized(self) -> bool:
        return self.kind in (LevelKind.LEVEL1, LevelKind.LEVEL2)

    def describe(self) -> str:
        tag = self.kind.value
        if self.user_space:
            tag += "+user_space"
        return tag


class ResourceMode(enum.Enum):
    SHARED = "shared"
    ISOLATED = "isolated"


@dataclass(frozen=True)
class TenantSpec:
    id: str
    vm_count: int = 1
    ip_block: str = ""


@dataclass(frozen=True)
class DeploymentSpec:
    tenants: tuple[TenantSpec, ...]
    level: SecurityLevel
    mode: ResourceMode = ResourceMode.SHARED
    fabric_ports: int = 1
    max_vfs_per_pf: int = 64
    external_gw_mac: MacAddress = MacAddress.parse("02:ee:00:00:00:01")
    vxlan: dict[str, int] = field(default_factory=dict)
    # In/Out and gateway VF counts follow the fabric port count unless a
    # deployment pins them explicitly (the two setups in use differ).
    inout_vfs_per_vswitch: int | None = None
    gw_vfs_per_tenant: int | None = None
    # Cores granted to the Baseline vswitch in the isolated mode, where it
    # is sized proportionally to the compartment count it is compared with.
    comparison_compartments: int = 1

    @property
    def inout_per_vswitch(self) -> int:
        return self.inout_vfs_per_vswitch or self.fabric_ports

    @property
    def gw_per_tenant(self) -> int:
        return self.gw_vfs_per_tenant or self.fabric_ports


@dataclass(frozen=True)
class ResourceAccount:
    host_cores: int
    vswitch_cores: int
    vswitch_vm_count: int
    tenant_vm_count: int
    total_vfs: int
    ram_gb_per_vm: int = RAM_GB_PER_VM
    hugepage_gb_per_vm: int = HUGEPAGE_GB_PER_VM
    host_hugepage_gb: int = 1

    @property
    def total_cores(self) -> int:
        return self.host_cores + self.vswitch_cores

    @property
    def total_ram_gb(self) -> int:
        return self.ram_gb_per_vm * (self.vswitch_vm_count + self.tenant_vm_count)

    @property
    def total_hugepage_gb(self) -> int:
        vm_pages = self.hugepage_gb_per_vm * (self.vswitch_vm_count + self.tenant_vm_count)
        return self.host_hugepage_gb + vm_pages

    def to_json_dict(self) -> dict:
        return {
            "host_cores": self.host_cores,
            "vswitch_cores": self.vswitch_cores,
            "total_cores": self.total_cores,
            "vswitch_vm_count": self.vswitch_vm_count,
            "tenant_vm_count": self.tenant_vm_count,
            "ram_gb_per_vm": self.ram_gb_per_vm,
            "total_ram_gb": self.total_ram_gb,
            "hugepage_gb_per_vm": self.hugepage_gb_per_vm,
            "host_hugepage_gb": self.host_hugepage_gb,
            "total_hugepage_gb": self.total_hugepage_gb,
            "total_vfs": self.total_vfs,
        }


@dataclass
class DeploymentPlan:
    spec: DeploymentSpec
    nic: NicSwitch
    vswitches: list[VswitchInstance]
    tenant_vms: list[TenantVm]
    vlan_map: dict[str, int]
    resources: ResourceAccount
    tenant_wirings: dict[str, TenantWiring]
    vswitch_of_tenant: dict[str, str]
    baseline_vswitch_mac: MacAddress | None = None
    component_graph: object = None

    # -- lookups used by the harness and CLI ---------------------------

    def vswitch(self, vswitch_id: str) -> VswitchInstance:
        for vs in self.vswitches:
            if vs.id == vswitch_id:
                return vs
        raise KeyError(vswitch_id)

    def vswitch_for(self, tenant: str) -> VswitchInstance:
        return self.vswitch(self.vswitch_of_tenant[tenant])

    def vms_of(self, tenant: str) -> list[TenantVm]:
        return [vm for vm in self.tenant_vms if vm.tenant == tenant]

    def vm(self, vm_id: str) -> TenantVm:
        for vm in self.tenant_vms:
            if vm.id == vm_id:
                return vm
        raise KeyError(vm_id)

    def tenant_ids(self) -> list[str]:
        return [t.id for t in self.spec.tenants]

    def port_mac(self, port: PortId) -> MacAddress:
        cfg = self.nic.vf_configs.get(port)
        if cfg is not None:
            return cfg.mac
        if port in self.nic.pf_macs:
            return self.nic.pf_macs[port]
        if self.baseline_vswitch_mac is not None:
            return self.baseline_vswitch_mac
        raise KeyError(f"no MAC known for {port}")

    def injection_dst_mac(self, tenant: str) -> MacAddress:
        """Destination MAC the load generator uses to reach a tenant's
        vswitch from the fabric."""
        wiring = self.tenant_wirings[tenant]
        return self.port_mac(wiring.inout_vf)

    def rules_text(self) -> str:
        blocks = []
        for vs in self.vswitches:
            lines = [f"# {vs.id} ({vs.exec_ctx.value})"]
            lines += [rule.render() for rule in vs.table]
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks)

    def to_json_dict(self) -> dict:
        return {
            "version": SPEC_VERSION,
            "level": self.spec.level.describe(),
            "mode": self.spec.mode.value,
            "vlan_map": dict(self.vlan_map),
            "nic": {
                "fabric_ports": len(self.nic.fabric_ports),
                "pfs": {str(p): str(m) for p, m in sorted(
                    self.nic.pf_macs.items(), key=lambda kv: kv[0].sort_key())},
                "vfs": {
                    str(port): {
                        "mac": str(cfg.mac),
                        "pvid": cfg.pvid,
                        "spoof_check": cfg.spoof_check,
                        "attached_to": cfg.attached_to,
                        "role": cfg.role.value,
                    }
                    for port, cfg in sorted(
                        self.nic.vf_configs.items(), key=lambda kv: kv[0].sort_key())
                },
                "filters": [
                    {
                        "priority": f.priority,
                        "action": f.action.value,
                        "in_port": str(f.in_port) if f.in_port else None,
                        "dst_mac": str(f.dst_mac) if f.dst_mac else None,
                    }
                    for f in self.nic.filters
                ],
            },
            "vswitches": [
                {
                    "id": vs.id,
                    "exec_ctx": vs.exec_ctx.value,
                    "inout_vfs": [str(p) for p in vs.inout_vfs],
                    "gw_vfs": {t: str(p) for t, p in vs.gw_vfs.items()},
                    "rules": [r.render() for r in vs.table],
                }
                for vs in self.vswitches
            ],
            "tenant_vms": [
                {
                    "id": vm.id,
                    "tenant": vm.tenant,
                    "port": str(vm.vf),
                    "mac": str(vm.mac),
                    "ip": str(vm.ip),
                    "static_arp": {str(ip): str(mac) for ip, mac in vm.static_arp.items()},
                }
                for vm in self.tenant_vms
            ],
            "resources": self.resources.to_json_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# spec validation and JSON loading
# ---------------------------------------------------------------------------


def _groups_of(spec: DeploymentSpec) -> list[list[str]]:
    ids = [t.id for t in spec.tenants]
    level = spec.level
    if level.kind is LevelKind.LEVEL2:
        if level.groups is None:
            return [[tid] for tid in ids]
        return [list(g) for g in level.groups]
    return [ids]


def validate_spec(spec: DeploymentSpec) -> None:
    ids = [t.id for t in spec.tenants]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise DuplicateTenantId(f"duplicate tenant id(s): {', '.join(dupes)}")
    if not spec.tenants:
        raise ValueError("a deployment needs at least one tenant")
    for t in spec.tenants:
        if t.vm_count < 1:
            raise ValueError(f"tenant {t.id}: vm_count must be >= 1")
    if len(ids) > 4094:
        raise ValueError("more tenants than assignable VLAN ids")
    if spec.fabric_ports < 1:
        raise ValueError("fabric_ports must be >= 1")
    if spec.level.user_space and spec.mode is not ResourceMode.ISOLATED:
        raise ValueError("user_space packet processing requires the isolated resource mode")
    if spec.level.kind is LevelKind.LEVEL2 and spec.level.groups is not None:
        flat = [tid for g in spec.level.groups for tid in g]
        if sorted(flat) != sorted(ids):
            raise ValueError("level2 groups must cover every tenant exactly once")
    for tenant in spec.vxlan:
        if tenant not in ids:
            raise ValueError(f"vxlan mapping names unknown tenant {tenant!r}")
    vnis = list(spec.vxlan.values())
    if len(set(vnis)) != len(vnis):
        raise ValueError("tenant VNIs must be unique across the deployment")


def load_spec(source: str | Path | dict) -> DeploymentSpec:
    """Read a versioned deployment spec document (schema version 1)."""
    if isinstance(source, dict):
        doc = source
    else:
        doc = json.loads(Path(source).read_text())
    if doc.get("version") != SPEC_VERSION:
        raise ValueError(f"unsupported spec version {doc.get('version')!r}")
    tenants = tuple(
        TenantSpec(
            id=str(t["id"]),
            vm_count=int(t.get("vm_count", 1)),
            ip_block=str(t.get("ip_block", "")),
        )
        for t in doc["tenants"]
    )
    kind = LevelKind(doc.get("level", "baseline"))
    groups = doc.get("groups")
    level = SecurityLevel(
        kind,
        tuple(tuple(g) for g in groups) if groups else None,
        bool(doc.get("user_space", False)),
    )
    spec = DeploymentSpec(
        tenants=tenants,
        level=level,
        mode=ResourceMode(doc.get("mode", "shared")),
        fabric_ports=int(doc.get("fabric_ports", 1)),
        max_vfs_per_pf=int(doc.get("max_vfs_per_pf", 64)),
        external_gw_mac=MacAddress.parse(doc.get("external_gw_mac", "02:ee:00:00:00:01")),
        vxlan={str(k): int(v) for k, v in doc.get("vxlan", {}).items()},
        inout_vfs_per_vswitch=doc.get("inout_vfs_per_vswitch"),
        gw_vfs_per_tenant=doc.get("gw_vfs_per_tenant"),
        comparison_compartments=int(doc.get("comparison_compartments", 1)),
    )
    validate_spec(spec)
    return spec


# ---------------------------------------------------------------------------
# VF counting and resource accounting
# ---------------------------------------------------------------------------


def count_vfs(spec: DeploymentSpec) -> int:
    """Total virtual functions the deployment needs.

    Per compartment: its In/Out VFs, one gateway VF per tenant per
    configured port pairing, and one VF per tenant VM.  Raises
    :class:`VfExhaustion` when the total exceeds what the device offers
    (``max_vfs_per_pf`` per physical function).
    """
    if not spec.level.compartmentalized:
        raise ValueError("the baseline deploys no VFs; count_vfs applies to level1/level2")
    validate_spec(spec)
    by_id = {t.id: t for t in spec.tenants}
    total = 0
    for group in _groups_of(spec):
        total += spec.inout_per_vswitch
        total += spec.gw_per_tenant * len(group)
        total += sum(by_id[tid].vm_count for tid in group)
    budget = spec.max_vfs_per_pf * spec.fabric_ports
    if total > budget:
        raise VfExhaustion(
            f"deployment needs {total} VFs but {spec.fabric_ports} PF(s) "
            f"offer at most {budget}"
        )
    return total


def account_resources(spec: DeploymentSpec) -> ResourceAccount:
    """Compute the plan's compute/memory/VF footprint.

    One core and one hugepage are always dedicated to the host OS.  The
    kernel baseline shares the host core; in the isolated mode vswitch
    compartments get a core each (the baseline proportionally, per
    ``comparison_compartments``); user-space processing costs one core
    per compartment, the baseline included.
    """
    validate_spec(spec)
    compartments = len(_groups_of(spec))
    tenant_vms = sum(t.vm_count for t in spec.tenants)
    is_baseline = spec.level.kind is LevelKind.BASELINE

    if spec.level.user_space:
        vswitch_cores = spec.comparison_compartments if is_baseline else compartments
    elif spec.mode is ResourceMode.SHARED:
        vswitch_cores = 0 if is_baseline else 1
    else:
        vswitch_cores = spec.comparison_compartments if is_baseline else compartments

    return ResourceAccount(
        host_cores=1,
        vswitch_cores=vswitch_cores,
        vswitch_vm_count=0 if is_baseline else compartments,
        tenant_vm_count=tenant_vms,
        total_vfs=0 if is_baseline else count_vfs(spec),
    )


# ---------------------------------------------------------------------------
# plan materialization
# ---------------------------------------------------------------------------


class _MacPool:
    """Locally administered, deterministic MAC sequence (02:00:00::/24)."""

    def __init__(self) -> None:
        self._next = 1

    def take(self) -> MacAddress:
        n = self._next
        self._next += 1
        if n >= 2**24:
            raise ValueError("MAC pool exhausted")
        return MacAddress(bytes([0x02, 0, 0, (n >> 16) & 0xFF, (n >> 8) & 0xFF, n & 0xFF]))


def _tenant_network(spec: DeploymentSpec, index: int, tenant: TenantSpec):
    block = tenant.ip_block or f"10.{index + 1}.0.0/24"
    net = ipaddress.IPv4Network(block, strict=True)
    if tenant.vm_count + 10 > net.num_addresses - 2:
        raise ValueError(f"tenant {tenant.id}: ip_block {block} too small for {tenant.vm_count} VMs")
    gateway = Ipv4Address(int(net.network_address) + 1)
    vm_ips = [Ipv4Address(int(net.network_address) + 10 + j) for j in range(tenant.vm_count)]
    return gateway, vm_ips


def _exec_ctx(level: SecurityLevel) -> ExecContext:
    if level.kind is LevelKind.BASELINE:
        return ExecContext.HOST_USER if level.user_space else ExecContext.HOST_KERNEL
    return ExecContext.VM_USER if level.user_space else ExecContext.VM_KERNEL


def _underlay_for(spec: DeploymentSpec, vswitch_index: int, tenant_index: int,
                  outer_src_mac: MacAddress) -> VxlanUnderlay:
    return VxlanUnderlay(
        outer_src_mac=outer_src_mac,
        outer_dst_mac=spec.external_gw_mac,
        outer_src_ip=Ipv4Address.parse(f"172.31.0.{vswitch_index + 1}"),
        outer_dst_ip=Ipv4Address.parse(f"172.31.255.{tenant_index + 1}"),
    )


def _build_baseline_rules(
    wirings: list[TenantWiring],
    vm_ports: dict[str, list[PortId]],
    egress_port: PortId,
    spec: DeploymentSpec,
) -> list[FlowRule]:
    """Baseline table: per-VM delivery to software ports, per-tenant ARP
    responder, one shared default egress toward the physical function."""
    rules: list[FlowRule] = []
    for wiring in wirings:
        ports = vm_ports[wiring.tenant]
        vni = spec.vxlan.get(wiring.tenant)
        for vm, port in zip(wiring.vms, ports):
            if vni is not None:
                rules.append(FlowRule(
                    PRIO_VXLAN_INGRESS,
                    FlowMatch(vni=vni, dst_ip_prefix=(vm.ip, 32)),
                    (PopVxlan(), SetDstMac(vm.mac), Output(port)),
                ))
            rules.append(FlowRule(
                PRIO_INGRESS,
                FlowMatch(dst_ip_prefix=(vm.ip, 32)),
                (SetDstMac(vm.mac), Output(port)),
            ))
            if vni is not None:
                underlay = _underlay_for(spec, 0, 0, wiring.gw_mac)
                rules.append(FlowRule(
                    PRIO_VXLAN_EGRESS,
                    FlowMatch(in_port=port, dst_ip_prefix=(Ipv4Address(0), 0)),
                    (PushVxlan(vni, underlay.outer_src_mac, underlay.outer_dst_mac,
                               underlay.outer_src_ip, underlay.outer_dst_ip),
                     Output(egress_port)),
                ))
        rules.append(FlowRule(
            PRIO_ARP,
            FlowMatch(is_arp_request_for=wiring.gateway_ip),
            (ArpReply(wiring.gw_mac),),
        ))
    rules.append(FlowRule(
        PRIO_EGRESS,
        FlowMatch(dst_ip_prefix=(Ipv4Address(0), 0)),
        (SetDstMac(spec.external_gw_mac), Output(egress_port)),
    ))
    return rules


def plan_deployment(spec: DeploymentSpec) -> DeploymentPlan:
    """Materialize a deployment: NIC config, compartments, rules, VMs.

    Deterministic: VLANs follow tenant declaration order starting at 1,
    MACs come from a sequential locally-administered pool, so identical
    specs produce byte-identical plans.
    """
    validate_spec(spec)
    if spec.level.compartmentalized:
        count_vfs(spec)  # enforce the VF budget before building anything

    tenants = list(spec.tenants)
    tenant_index = {t.id: i for i, t in enumerate(tenants)}
    by_id = {t.id: t for t in tenants}
    vlan_map = {t.id: i + 1 for i, t in enumerate(tenants)}
    groups = _groups_of(spec)
    macs = _MacPool()
    exec_ctx = _exec_ctx(spec.level)

    nic = NicSwitch(
        fabric_ports=spec.fabric_ports,
        pfs=spec.fabric_ports,
        max_vfs_per_pf=spec.max_vfs_per_pf,
    )
    for i in range(spec.fabric_ports):
        nic.set_pf_mac(i, macs.take())

    addressing: dict[str, tuple[Ipv4Address, list[Ipv4Address]]] = {
        t.id: _tenant_network(spec, tenant_index[t.id], t) for t in tenants
    }

    vswitches: list[VswitchInstance] = []
    tenant_vms: list[TenantVm] = []
    tenant_wirings: dict[str, TenantWiring] = {}
    vswitch_of_tenant: dict[str, str] = {}
    baseline_vswitch_mac: MacAddress | None = None

    if spec.level.kind is LevelKind.BASELINE:
        baseline_vswitch_mac = macs.take()
        vs_id = "vswitch-0"
        wirings: list[TenantWiring] = []
        vm_ports: dict[str, list[PortId]] = {}
        gw_map: dict[str, PortId] = {}
        next_sw = 0
        for tid in [t.id for t in tenants]:
            gateway_ip, vm_ips = addressing[tid]
            ports: list[PortId] = []
            vms: list[VmAddress] = []
            for j, vm_ip in enumerate(vm_ips):
                port = PortId.sw(next_sw)
                next_sw += 1
                mac = macs.take()
                ports.append(port)
                vms.append(VmAddress(mac, vm_ip))
                tenant_vms.append(TenantVm(
                    id=f"{tid}-vm{j}", tenant=tid, vf=port, mac=mac, ip=vm_ip,
                    gateway_ip=gateway_ip,
                    static_arp={gateway_ip: baseline_vswitch_mac},
                    app=Sink(),
                ))
            vm_ports[tid] = ports
            gw_map[tid] = ports[0]
            wirings.append(TenantWiring(
                tenant=tid, vlan=0, gw_vf=ports[0], gw_mac=baseline_vswitch_mac,
                inout_vf=PortId.pf(0), gateway_ip=gateway_ip,
                external_gw_mac=spec.external_gw_mac, vms=tuple(vms),
            ))
            tenant_wirings[tid] = wirings[-1]
            vswitch_of_tenant[tid] = vs_id
        vs = VswitchInstance(
            id=vs_id,
            inout_vfs=[PortId.pf(i) for i in range(spec.fabric_ports)],
            gw_vfs=gw_map,
            exec_ctx=exec_ctx,
        )
        vs.install_all(_build_baseline_rules(wirings, vm_ports, PortId.pf(0), spec))
        vswitches.append(vs)
    else:
        for gi, group in enumerate(groups):
            vs_id = f"vswitch-{gi}"
            inout_ports: list[PortId] = []
            for _ in range(spec.inout_per_vswitch):
                port = nic.add_vf(pf=len(inout_ports) % spec.fabric_ports)
                nic.configure_vf(HOST_CONTEXT, port, VfConfig(
                    mac=macs.take(), pvid=0, spoof_check=False,
                    attached_to=vs_id, role=VfRole.IN_OUT,
                ))
                inout_ports.append(port)
            gw_map = {}
            wirings = []
            vxlan_args: dict[str, tuple[int, VxlanUnderlay]] = {}
            for tid in group:
                vlan = vlan_map[tid]
                gateway_ip, vm_ips = addressing[tid]
                gw_ports: list[PortId] = []
                for k in range(spec.gw_per_tenant):
                    port = nic.add_vf(pf=k % spec.fabric_ports)
                    nic.configure_vf(HOST_CONTEXT, port, VfConfig(
                        mac=macs.take(), pvid=vlan, spoof_check=False,
                        attached_to=vs_id, role=VfRole.GATEWAY,
                    ))
                    gw_ports.append(port)
                gw_map[tid] = gw_ports[0]
                gw_mac = nic.vf_configs[gw_ports[0]].mac
                vms = []
                for j, vm_ip in enumerate(vm_ips):
                    vm_id = f"{tid}-vm{j}"
                    port = nic.add_vf(pf=j % spec.fabric_ports)
                    mac = macs.take()
                    nic.configure_vf(HOST_CONTEXT, port, VfConfig(
                        mac=mac, pvid=vlan, spoof_check=True,
                        attached_to=vm_id, role=VfRole.TENANT,
                    ))
                    vms.append(VmAddress(mac, vm_ip))
                    tenant_vms.append(TenantVm(
                        id=vm_id, tenant=tid, vf=port, mac=mac, ip=vm_ip,
                        gateway_ip=gateway_ip,
                        static_arp={gateway_ip: gw_mac},
                        app=Sink(),
                    ))
                wiring = TenantWiring(
                    tenant=tid, vlan=vlan, gw_vf=gw_ports[0], gw_mac=gw_mac,
                    inout_vf=inout_ports[0], gateway_ip=gateway_ip,
                    external_gw_mac=spec.external_gw_mac, vms=tuple(vms),
                )
                wirings.append(wiring)
                tenant_wirings[tid] = wiring
                vswitch_of_tenant[tid] = vs_id
                if tid in spec.vxlan:
                    vxlan_args[tid] = (
                        spec.vxlan[tid],
                        _underlay_for(spec, gi, tenant_index[tid],
                                      nic.vf_configs[inout_ports[0]].mac),
                    )
            vs = VswitchInstance(
                id=vs_id, inout_vfs=inout_ports, gw_vfs=gw_map, exec_ctx=exec_ctx,
            )
            vs.install_all(build_vswitch_rules(wirings, vxlan_args))
            vswitches.append(vs)

        # Hardening filters: tenant VFs must never reach the host's PF.
        for port, cfg in sorted(nic.vf_configs.items(), key=lambda kv: kv[0].sort_key()):
            if cfg.role is not VfRole.TENANT:
                continue
            for pf_mac in nic.pf_macs.values():
                nic.add_filter(WildcardFilter(
                    priority=FILTER_PRIO_DROP_TO_HOST,
                    action=FilterAction.DROP,
                    in_port=port,
                    dst_mac=pf_mac,
                ))

    plan = DeploymentPlan(
        spec=spec,
        nic=nic,
        vswitches=vswitches,
        tenant_vms=tenant_vms,
        vlan_map=vlan_map,
        resources=account_resources(spec),
        tenant_wirings=tenant_wirings,
        vswitch_of_tenant=vswitch_of_tenant,
        baseline_vswitch_mac=baseline_vswitch_mac,
    )
    plan.component_graph = secmodel.build_component_graph(plan)
    _check_plan(plan)
    return plan


def _check_plan(plan: DeploymentPlan) -> None:
    """Re-derive the invariants a finished plan must satisfy."""
    vlans = list(plan.vlan_map.values())
    assert len(set(vlans)) == len(vlans), "tenant VLANs must be unique"
    macs = [str(c.mac) for c in plan.nic.vf_configs.values()]
    macs += [str(m) for m in plan.nic.pf_macs.values()]
    assert len(set(macs)) == len(macs), "NIC-wide MAC uniqueness"
    for cfg in plan.nic.vf_configs.values():
        if cfg.role is VfRole.TENANT:
            assert cfg.spoof_check, "tenant VFs must be spoof-checked"
    if plan.spec.level.compartmentalized:
        assert count_vfs(plan.spec) == len(plan.nic.vf_configs), \
            "configured NIC must match the VF formula"
    seen_ports: set[PortId] = set()
    for vs in plan.vswitches:
        mine = set(vs.ports())
        assert not (mine & seen_ports), "vswitch ports must be disjoint"
        seen_ports |= mine
