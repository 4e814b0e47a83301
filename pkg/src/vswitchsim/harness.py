"""Traffic scenarios, metrics, golden forwarding chains, isolation fuzzing.

Time in this harness is hop count, not seconds: hardware latencies are
not reproducible at desk scale, so reports use NIC-switch traversal
counts as the latency proxy and per-packet path lengths for ordering
comparisons.
"""

from __future__ import annotations

import enum
import io
import random
from collections import Counter
from dataclasses import dataclass, field, replace

from .dataplane import FlowMatch, FlowRule, Output, SetDstMac
from .endpoints import L2Fwd, Sink, make_packet
from .engine import Engine, LOC_NIC, NonQuiescent, TraceEvent
from .frames import (
    ARP_REQUEST,
    ArpMessage,
    BROADCAST_MAC,
    EthernetFrame,
    Ipv4Address,
    Ipv4Packet,
    MacAddress,
    Opaque,
    ZERO_MAC,
)
from .nic import PortKind
from .orchestrator import DeploymentPlan

__all__ = [
    "Scenario",
    "ScenarioKind",
    "FlowSpec",
    "Metrics",
    "FlowMetrics",
    "GoldenResult",
    "Violation",
    "run_scenario",
    "run_vm_to_vm",
    "golden_chain_check",
    "verify_isolation",
    "strip_spoof_checks",
    "default_flows",
    "NonQuiescent",
]

# Load-generator identity on the fabric side.
LG_MAC = MacAddress.parse("02:f0:00:00:00:01")
LG_IP = Ipv4Address.parse("198.18.0.1")
EXTERNAL_PROBE_IP = Ipv4Address.parse("198.51.100.200")

TEST_PROTOCOL = 253
IP_OVERHEAD = 34  # Ethernet + IPv4 headers

# Benchmark wiring sits above every generated rule: it mirrors the
# adapted forwarder setup, where returned packets must not re-match the
# ingress rule that delivered them.
PRIO_BENCH = 300

# Fuzz generator shape: ethertype classes and their fixed weights.
FUZZ_ETHERTYPE_WEIGHTS = (
    ("ipv4", 0.5),
    ("arp", 0.15),
    ("tagged", 0.2),
    ("unknown", 0.15),
)
FUZZ_UNKNOWN_ETHERTYPE = 0x88B5


class ScenarioKind(enum.Enum):
    P2P = "p2p"
    P2V = "p2v"
    V2V = "v2v"


@dataclass(frozen=True)
class FlowSpec:
    """One measured flow: traffic toward a tenant (or through it, for p2p)."""

    tenant: str
    vm: int = 0
    count: int = 1
    size: int = 64
    forwarder: tuple[str, int] | None = None


@dataclass(frozen=True)
class Scenario:
    kind: ScenarioKind
    flows: tuple[FlowSpec, ...]
    seed: int = 0


def default_flows(plan: DeploymentPlan, count: int, size: int = 64) -> tuple[FlowSpec, ...]:
    """The canonical setup: one flow per tenant, toward its first VM."""
    return tuple(FlowSpec(tenant=t, vm=0, count=count, size=size)
                 for t in plan.tenant_ids())


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass
class FlowMetrics:
    injected: int = 0
    delivered: int = 0
    dropped: int = 0
    drops_by_reason: Counter = field(default_factory=Counter)
    traversals: list[int] = field(default_factory=list)
    path_hops: list[int] = field(default_factory=list)

    @property
    def traversals_mean(self) -> float:
        return sum(self.traversals) / len(self.traversals) if self.traversals else 0.0

    @property
    def traversals_min(self) -> int:
        return min(self.traversals) if self.traversals else 0

    @property
    def traversals_max(self) -> int:
        return max(self.traversals) if self.traversals else 0

    @property
    def hops_mean(self) -> float:
        return sum(self.path_hops) / len(self.path_hops) if self.path_hops else 0.0


@dataclass
class Metrics:
    flows: dict[str, FlowMetrics] = field(default_factory=dict)
    drops_by_reason: Counter = field(default_factory=Counter)
    per_link: Counter = field(default_factory=Counter)
    rule_hits: dict[str, dict[int, int]] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "flows": {
                fid: {
                    "injected": fm.injected,
                    "delivered": fm.delivered,
                    "dropped": fm.dropped,
                    "drops_by_reason": dict(sorted(fm.drops_by_reason.items())),
                    "nic_traversals": {
                        "min": fm.traversals_min,
                        "max": fm.traversals_max,
                        "mean": fm.traversals_mean,
                    },
                    "path_hops_mean": fm.hops_mean,
                }
                for fid, fm in self.flows.items()
            },
            "drops_by_reason": dict(sorted(self.drops_by_reason.items())),
            "per_link_frames": dict(sorted(self.per_link.items())),
            "rule_hits": {
                vs: dict(sorted(hits.items())) for vs, hits in sorted(self.rule_hits.items())
            },
        }

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("flow_id,injected,delivered,dropped,drop_reason_breakdown,nic_traversals_mean\n")
        for fid, fm in self.flows.items():
            breakdown = ";".join(f"{k}={v}" for k, v in sorted(fm.drops_by_reason.items()))
            out.write(f"{fid},{fm.injected},{fm.delivered},{fm.dropped},"
                      f"{breakdown},{fm.traversals_mean:g}\n")
        return out.getvalue()


def _build_metrics(engine: Engine, flow_order: list[str]) -> Metrics:
    metrics = Metrics()
    for fid in flow_order:
        metrics.flows[fid] = FlowMetrics()

    events_by_packet: dict[tuple, list[TraceEvent]] = {}
    for ev in engine.trace:
        events_by_packet.setdefault(ev.packet_id, []).append(ev)
        metrics.per_link[f"{ev.name}:{ev.port}"] += 1

    terminal: set[tuple] = {d.packet_id for d in engine.deliveries if d.terminal}
    dropped: dict[tuple, list] = {}
    for pid, record in engine.drops:
        dropped.setdefault(pid, []).append(record)

    for injection in engine.injections:
        fm = metrics.flows.setdefault(injection.flow_id, FlowMetrics())
        fm.injected += 1
        pid = injection.packet_id
        if pid in terminal:
            fm.delivered += 1
            events = events_by_packet.get(pid, [])
            fm.traversals.append(sum(1 for ev in events if ev.location == LOC_NIC))
            fm.path_hops.append(len(events))
        elif pid in dropped:
            fm.dropped += 1
            for record in dropped[pid]:
                fm.drops_by_reason[record.reason] += 1
                metrics.drops_by_reason[record.reason] += 1

    for vs in engine.plan.vswitches:
        metrics.rule_hits[vs.id] = dict(vs.rule_hits)
    return metrics


# ---------------------------------------------------------------------------
# scenario execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _ResolvedFlow:
    flow_id: str
    tenant: str
    dst_ip: Ipv4Address
    count: int
    size: int
    dst_vm: str | None
    forwarder_vm: str | None


def _next_hop_mac(plan: DeploymentPlan, tenant: str) -> MacAddress:
    if plan.baseline_vswitch_mac is not None:
        return plan.baseline_vswitch_mac
    return plan.tenant_wirings[tenant].gw_mac


def _return_in_port(plan: DeploymentPlan, vm) -> "PortId":
    # Where the vswitch sees a tenant VM's frames arrive: its gateway VF
    # under NIC mediation, the VM's own software port in the baseline.
    if vm.vf.kind is PortKind.SW:
        return vm.vf
    return plan.tenant_wirings[vm.tenant].gw_vf


def _resolve_flows(plan: DeploymentPlan, scenario: Scenario) -> list[_ResolvedFlow]:
    resolved = []
    for i, flow in enumerate(scenario.flows):
        if flow.tenant not in plan.vswitch_of_tenant:
            raise ValueError(f"flow names unknown tenant {flow.tenant!r}")
        flow_id = f"f{i}:{flow.tenant}"
        if scenario.kind is ScenarioKind.P2P:
            resolved.append(_ResolvedFlow(
                flow_id, flow.tenant, Ipv4Address.parse(f"198.51.100.{i + 1}"),
                flow.count, flow.size, None, None,
            ))
            continue
        vms = plan.vms_of(flow.tenant)
        if flow.vm >= len(vms):
            raise ValueError(f"tenant {flow.tenant} has no VM index {flow.vm}")
        dst_vm = vms[flow.vm]
        forwarder_vm = None
        if scenario.kind is ScenarioKind.V2V:
            if flow.forwarder is not None:
                fw_tenant, fw_idx = flow.forwarder
                forwarder_vm = plan.vms_of(fw_tenant)[fw_idx].id
            else:
                vs = plan.vswitch_for(flow.tenant)
                others = [t for t in vs.gw_vfs if t != flow.tenant]
                if not others:
                    raise ValueError(
                        f"v2v flow for {flow.tenant}: its compartment hosts no "
                        f"other tenant to forward through"
                    )
                forwarder_vm = plan.vms_of(others[0])[0].id
            if forwarder_vm == dst_vm.id:
                raise ValueError("v2v forwarder must differ from the destination VM")
        resolved.append(_ResolvedFlow(
            flow_id, flow.tenant, dst_vm.ip, flow.count, flow.size,
            dst_vm.id, forwarder_vm,
        ))
    return resolved


def _install_bench_wiring(engine: Engine, kind: ScenarioKind,
                          flows: list[_ResolvedFlow]) -> None:
    plan = engine.plan
    for fr in flows:
        vs = plan.vswitch_for(fr.tenant)
        entry_port = vs.inout_vfs[0]
        egress_port = vs.inout_vfs[-1]
        if kind is ScenarioKind.P2P:
            vs.install(FlowRule(PRIO_BENCH,
                                FlowMatch(in_port=entry_port, dst_ip_prefix=(fr.dst_ip, 32)),
                                (SetDstMac(plan.spec.external_gw_mac), Output(egress_port))))
            continue

        dst_vm = plan.vm(fr.dst_vm)
        dst_vm.app = L2Fwd(_next_hop_mac(plan, dst_vm.tenant))
        vs.install(FlowRule(PRIO_BENCH,
                            FlowMatch(in_port=_return_in_port(plan, dst_vm),
                                      dst_ip_prefix=(fr.dst_ip, 32)),
                            (SetDstMac(plan.spec.external_gw_mac), Output(egress_port))))

        if kind is ScenarioKind.V2V:
            fwd_vm = plan.vm(fr.forwarder_vm)
            fwd_vm.app = L2Fwd(_next_hop_mac(plan, fwd_vm.tenant))
            fwd_out = (fwd_vm.vf if fwd_vm.vf.kind is PortKind.SW
                       else plan.tenant_wirings[fwd_vm.tenant].gw_vf)
            dst_out = (dst_vm.vf if dst_vm.vf.kind is PortKind.SW
                       else plan.tenant_wirings[dst_vm.tenant].gw_vf)
            # Chain entry: external packets for the destination detour
            # through the forwarder; each hop is keyed on its ingress port.
            vs.install(FlowRule(PRIO_BENCH + 2,
                                FlowMatch(in_port=entry_port, dst_ip_prefix=(fr.dst_ip, 32)),
                                (SetDstMac(fwd_vm.mac), Output(fwd_out))))
            vs.install(FlowRule(PRIO_BENCH + 1,
                                FlowMatch(in_port=_return_in_port(plan, fwd_vm),
                                          dst_ip_prefix=(fr.dst_ip, 32)),
                                (SetDstMac(dst_vm.mac), Output(dst_out))))


def _lg_frame(plan: DeploymentPlan, fr: _ResolvedFlow, seq: int, seed: int) -> EthernetFrame:
    body_len = max(0, fr.size - IP_OVERHEAD)
    body = bytes((seed + seq + k) & 0xFF for k in range(body_len))
    return EthernetFrame(
        dst=plan.injection_dst_mac(fr.tenant),
        src=LG_MAC,
        payload=Ipv4Packet(LG_IP, fr.dst_ip, TEST_PROTOCOL, body),
    )


def run_scenario(plan: DeploymentPlan, scenario: Scenario,
                 step_bound: int = 10_000) -> tuple[Metrics, list[TraceEvent]]:
    """Drive one traffic scenario to quiescence and collect metrics.

    Works on a copy of the plan; repeated invocations with the same
    (plan, scenario) produce byte-identical metrics and traces.  Raises
    :class:`NonQuiescent` if frames still circulate after ``step_bound``
    engine steps.
    """
    flows = _resolve_flows(plan, scenario)
    engine = Engine(plan, step_bound=step_bound)
    _install_bench_wiring(engine, scenario.kind, flows)
    most = max((fr.count for fr in flows), default=0)
    for seq in range(most):
        for fr in flows:
            if seq < fr.count:
                engine.inject_fabric(_lg_frame(engine.plan, fr, seq, scenario.seed),
                                     packet_id=(fr.flow_id, seq), flow_id=fr.flow_id)
    engine.run()
    return _build_metrics(engine, [fr.flow_id for fr in flows]), engine.trace


def run_vm_to_vm(plan: DeploymentPlan, src_vm: str, dst_vm: str,
                 count: int = 1, size: int = 64, seed: int = 0,
                 ) -> tuple[Metrics, list[TraceEvent]]:
    """Intra-server VM-to-VM traffic through the vswitch (no fabric leg)."""
    engine = Engine(plan)
    src = engine.plan.vm(src_vm)
    dst = engine.plan.vm(dst_vm)
    dst.app = Sink()
    src.payload_seed = seed
    flow_id = f"{src_vm}->{dst_vm}"
    for seq in range(count):
        frame = make_packet(src, dst.ip, size)
        engine.inject_at_vm(src_vm, frame, packet_id=(flow_id, seq), flow_id=flow_id)
    engine.run()
    return _build_metrics(engine, [flow_id]), engine.trace


# ---------------------------------------------------------------------------
# golden forwarding chains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GoldenResult:
    passed: bool
    steps_matched: int
    first_divergence: str | None
    details: tuple[str, ...] = ()


ANY_MAC = "*"


def _chain_expectations(plan: DeploymentPlan, tenant: str, vm) -> tuple[list, list]:
    wiring = plan.tenant_wirings[tenant]
    inout_mac = str(plan.injection_dst_mac(tenant))
    gw_mac = str(wiring.gw_mac)
    vm_mac = str(vm.mac)
    ext_mac = str(plan.spec.external_gw_mac)
    vs_id = plan.vswitch_of_tenant[tenant]
    vlan = plan.vlan_map[tenant]
    ingress = [
        ("fabric", "fabric", inout_mac, None),
        ("nic", "nic", inout_mac, None),
        ("vswitch", vs_id, inout_mac, None),
        ("nic", "nic", vm_mac, vlan),
        ("tenant", vm.id, vm_mac, None),
    ]
    egress = [
        # The emission itself is the tenant's own act; the chain verifies
        # the system's handling of it from the NIC lookup onward.
        ("tenant", vm.id, ANY_MAC, None),
        ("nic", "nic", gw_mac, vlan),
        ("vswitch", vs_id, gw_mac, None),
        ("nic", "nic", ext_mac, None),
        ("fabric", "fabric", ext_mac, None),
    ]
    return ingress, egress


def _compare_chain(expected: list, events: list[TraceEvent], offset: int):
    matched = 0
    for i, (exp, ev) in enumerate(zip(expected, events)):
        loc, name, dst, vlan = exp
        want_dst = ev.dst_mac if dst == ANY_MAC else dst
        got = (ev.location, ev.name, ev.dst_mac, ev.vlan)
        if got != (loc, name, want_dst, vlan):
            return matched, (
                f"step {offset + i + 1}: expected {loc}/{name} dst={dst} vlan={vlan}, "
                f"got {ev.location}/{ev.name} dst={ev.dst_mac} vlan={ev.vlan}"
            )
        matched += 1
    if len(events) != len(expected):
        return matched, (
            f"step {offset + min(len(events), len(expected)) + 1}: expected "
            f"{len(expected)} hops, observed {len(events)}"
        )
    return matched, None


def golden_chain_check(plan: DeploymentPlan, tenant: str | None = None) -> GoldenResult:
    """Replay one ingress and one egress packet against the exact
    expected header states at every hop.

    Checks, hop for hop: destination-MAC rewrite points (exactly once
    per vswitch transit), the tag push after NIC classification and its
    pop before delivery, and untagged delivery into the vswitch VM.
    """
    if not plan.spec.level.compartmentalized:
        raise ValueError("golden chains are defined for level1/level2 plans")
    tenant = tenant or plan.tenant_ids()[0]
    vm_ref = plan.vms_of(tenant)[0]
    ingress_exp, egress_exp = _chain_expectations(plan, tenant, vm_ref)
    details: list[str] = []

    engine = Engine(plan)
    engine.plan.vm(vm_ref.id).app = Sink()
    probe = EthernetFrame(
        dst=plan.injection_dst_mac(tenant), src=LG_MAC,
        payload=Ipv4Packet(LG_IP, vm_ref.ip, TEST_PROTOCOL, b""),
    )
    engine.inject_fabric(probe, packet_id=("golden-in", 0))
    engine.run()
    ingress_events = engine.trace_of(("golden-in", 0))
    matched_in, diverged = _compare_chain(ingress_exp, ingress_events, 0)
    details += [ev.render() for ev in ingress_events]
    if diverged is not None:
        return GoldenResult(False, matched_in, diverged, tuple(details))

    engine = Engine(plan)
    vm = engine.plan.vm(vm_ref.id)
    vm.app = Sink()
    out_frame = make_packet(vm, EXTERNAL_PROBE_IP, size=64)
    engine.inject_at_vm(vm.id, out_frame, packet_id=("golden-out", 0))
    engine.run()
    egress_events = engine.trace_of(("golden-out", 0))
    matched_out, diverged = _compare_chain(egress_exp, egress_events, 5)
    details += [ev.render() for ev in egress_events]
    if diverged is not None:
        return GoldenResult(False, matched_in + matched_out, diverged, tuple(details))
    return GoldenResult(True, matched_in + matched_out, None, tuple(details))


# ---------------------------------------------------------------------------
# isolation fuzzing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    packet_id: tuple
    tenant: str
    injected_at: str
    delivered_to: str
    detail: str = ""


def strip_spoof_checks(plan: DeploymentPlan) -> DeploymentPlan:
    """Induced-fault variant: the same plan with source-MAC spoof
    prevention removed from every VF."""
    import copy as _copy

    faulty = _copy.deepcopy(plan)
    for port, cfg in list(faulty.nic.vf_configs.items()):
        if cfg.spoof_check:
            faulty.nic.vf_configs[port] = replace(cfg, spoof_check=False)
    return faulty


class _FuzzMaterials:
    """Address pools the generator draws from, per injecting VM."""

    def __init__(self, plan: DeploymentPlan):
        nic = plan.nic
        self.pf_macs = [m for _, m in sorted(nic.pf_macs.items(), key=lambda kv: kv[0].sort_key())]
        self.inout_macs = []
        self.gw_mac_of: dict[str, MacAddress] = {}
        for t, w in plan.tenant_wirings.items():
            self.gw_mac_of[t] = w.gw_mac
        for vs in plan.vswitches:
            for port in vs.inout_vfs:
                if port.kind is PortKind.VF:
                    self.inout_macs.append(nic.vf_configs[port].mac)
        self.vm_macs = {vm.id: vm.mac for vm in plan.tenant_vms}
        self.vm_ips = {vm.id: vm.ip for vm in plan.tenant_vms}
        self.all_vms = list(plan.tenant_vms)
        self.vlans = sorted(plan.vlan_map.values())

    def macs_for(self, vm) -> list[MacAddress]:
        pool = [self.gw_mac_of[vm.tenant], BROADCAST_MAC]
        pool += [m for vid, m in sorted(self.vm_macs.items()) if vid != vm.id]
        pool += [self.gw_mac_of[t] for t in sorted(self.gw_mac_of) if t != vm.tenant]
        pool += self.inout_macs + self.pf_macs
        return pool

    def ips_for(self, vm) -> list[Ipv4Address]:
        pool = [vm.gateway_ip, vm.ip, EXTERNAL_PROBE_IP]
        pool += [ip for vid, ip in sorted(self.vm_ips.items()) if vid != vm.id]
        return pool


def _fuzz_frame(rng: random.Random, materials: _FuzzMaterials, vm) -> EthernetFrame:
    spoof = rng.random() < 0.5
    src = rng.choice(materials.macs_for(vm)) if spoof else vm.mac
    while src.is_broadcast and spoof:
        src = rng.choice(materials.macs_for(vm))
    dst = rng.choice(materials.macs_for(vm) + [vm.mac])
    dst_ip = rng.choice(materials.ips_for(vm))

    roll = rng.random()
    acc = 0.0
    kind = "ipv4"
    for name, weight in FUZZ_ETHERTYPE_WEIGHTS:
        acc += weight
        if roll < acc:
            kind = name
            break

    vlan = None
    if kind == "tagged":
        vlan = rng.choice(materials.vlans + [rng.randint(1, 4094)])
        kind = "ipv4"
    if kind == "arp":
        return EthernetFrame(
            BROADCAST_MAC, src, vlan,
            ArpMessage(ARP_REQUEST, src, vm.ip, ZERO_MAC, dst_ip),
        )
    if kind == "unknown":
        return EthernetFrame(dst, src, vlan, Opaque(FUZZ_UNKNOWN_ETHERTYPE, b"\x00\x01"))
    body = bytes([rng.randrange(256) for _ in range(rng.randrange(8))])
    return EthernetFrame(dst, src, vlan, Ipv4Packet(vm.ip, dst_ip, TEST_PROTOCOL, body))


def verify_isolation(plan: DeploymentPlan, frames: int = 1000, seed: int = 0) -> list[Violation]:
    """Adversarial fuzz at every tenant-role VF.

    Violations are deliveries that break the isolation contract: a
    frame reaching another tenant's VLAN member, a foreign compartment's
    In/Out VF, the host PF, the fabric while still carrying a tenant
    VLAN tag, or any delivery of a frame whose injected source MAC was
    not the VF's configured address (spoof totality).
    """
    rng = random.Random(seed)
    engine = Engine(plan)
    for vm in engine.plan.tenant_vms:
        vm.app = Sink()
    materials = _FuzzMaterials(engine.plan)

    injectable = [vm for vm in engine.plan.tenant_vms if vm.vf.kind is PortKind.VF]
    meta: dict[tuple, tuple] = {}
    for seq in range(frames):
        for vm in injectable:
            frame = _fuzz_frame(rng, materials, vm)
            pid = (f"fuzz:{vm.id}", seq)
            spoofed = frame.src != engine.plan.nic.vf_configs[vm.vf].mac
            meta[pid] = (vm.id, vm.tenant, spoofed)
            engine.inject_at_port(vm.vf, frame, pid, flow_id=f"fuzz:{vm.id}")
            engine.run()

    violations: list[Violation] = []
    plan_ref = engine.plan
    vswitch_ids = {vs.id for vs in plan_ref.vswitches}
    inout_ports = {vs.id: {str(p) for p in vs.inout_vfs} for vs in plan_ref.vswitches}
    gw_tenant_by_port = {}
    for t, w in plan_ref.tenant_wirings.items():
        gw_tenant_by_port[str(w.gw_vf)] = t

    for delivery in engine.deliveries:
        origin = meta.get(delivery.packet_id)
        if origin is None:
            continue
        vm_id, tenant, spoofed = origin

        def flag(kind: str, detail: str = "") -> None:
            violations.append(Violation(
                kind, delivery.packet_id, tenant, vm_id, delivery.component, detail,
            ))

        if delivery.component in vswitch_ids:
            own_vs = plan_ref.vswitch_of_tenant[tenant]
            if delivery.component != own_vs:
                if delivery.port in inout_ports.get(delivery.component, set()):
                    flag("ForeignInOutDelivery", f"via {delivery.port}")
                else:
                    foreign = gw_tenant_by_port.get(delivery.port, "?")
                    flag("CrossTenantDelivery", f"foreign gateway of {foreign}")
        elif delivery.component == "host":
            flag("HostDelivery", f"PF {delivery.port}")
        elif delivery.component == "fabric":
            if delivery.frame.vlan is not None:
                flag("FabricTenantLeak", f"vlan {delivery.frame.vlan} on the wire")
        else:
            victim = plan_ref.vm(delivery.component)
            if victim.tenant != tenant:
                flag("CrossTenantDelivery", f"VM of tenant {victim.tenant}")

        if spoofed:
            flag("SpoofedDelivery", f"forged source {delivery.frame.src}")

    return violations
