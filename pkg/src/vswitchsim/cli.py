"""Command-line front end.

Subcommands:

* ``plan``       materialize a deployment and emit it as JSON (or rule text)
* ``run``        drive a traffic scenario and emit metrics (JSON or CSV)
* ``verify``     adversarial isolation fuzz; exit 1 on any violation
* ``attack``     compromise analysis; exit 1 when an expectation encoded
                 in the spec file's ``expect`` block is breached
* ``resources``  resource accounting as a table or CSV

Every source of randomness flows from the single ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import (
    Scenario,
    ScenarioKind,
    default_flows,
    run_scenario,
    verify_isolation,
)
from .orchestrator import account_resources, load_spec, plan_deployment
from .secmodel import UnknownComponent, compromise


def _load(path: str):
    doc = json.loads(Path(path).read_text())
    return doc, load_spec(doc)


def _cmd_plan(args) -> int:
    _, spec = _load(args.spec)
    plan = plan_deployment(spec)
    if args.rules:
        out = plan.rules_text()
    else:
        out = plan.to_json()
    if args.out:
        Path(args.out).write_text(out + "\n")
    else:
        print(out)
    return 0


def _cmd_run(args) -> int:
    _, spec = _load(args.spec)
    plan = plan_deployment(spec)
    scenario = Scenario(
        kind=ScenarioKind(args.scenario),
        flows=default_flows(plan, count=args.packets, size=args.size),
        seed=args.seed,
    )
    metrics, trace = run_scenario(plan, scenario)
    if args.csv:
        print(metrics.to_csv(), end="")
        return 0
    doc = metrics.to_json_dict()
    if args.trace:
        doc["trace"] = [ev.render() for ev in trace]
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _cmd_verify(args) -> int:
    _, spec = _load(args.spec)
    plan = plan_deployment(spec)
    violations = verify_isolation(plan, frames=args.frames, seed=args.seed)
    report = {
        "frames_per_vf": args.frames,
        "seed": args.seed,
        "violations": [
            {
                "kind": v.kind,
                "tenant": v.tenant,
                "injected_at": v.injected_at,
                "delivered_to": v.delivered_to,
                "detail": v.detail,
            }
            for v in violations
        ],
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return 1 if violations else 0


def _cmd_attack(args) -> int:
    doc, spec = _load(args.spec)
    plan = plan_deployment(spec)
    try:
        report = compromise(plan, args.compromise)
    except UnknownComponent as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.json:
        print(json.dumps(report.to_json_dict(), indent=2, sort_keys=True))
    else:
        print(report.render_text())

    expectation = doc.get("expect", {}).get(args.compromise)
    if expectation is None:
        return 0
    breached = []
    if "host_reachable" in expectation and \
            bool(expectation["host_reachable"]) != report.host_reachable:
        breached.append(
            f"host_reachable: expected {expectation['host_reachable']}, "
            f"got {report.host_reachable}"
        )
    if "reachable_tenants" in expectation and \
            sorted(expectation["reachable_tenants"]) != sorted(report.reachable_tenants):
        breached.append(
            f"reachable_tenants: expected {sorted(expectation['reachable_tenants'])}, "
            f"got {sorted(report.reachable_tenants)}"
        )
    for line in breached:
        print(f"expectation breached: {line}", file=sys.stderr)
    return 1 if breached else 0


def _cmd_resources(args) -> int:
    _, spec = _load(args.spec)
    acct = account_resources(spec)
    doc = acct.to_json_dict()
    if args.csv:
        keys = list(doc)
        print(",".join(keys))
        print(",".join(str(doc[k]) for k in keys))
        return 0
    width = max(len(k) for k in doc)
    for key, value in doc.items():
        print(f"{key:<{width}}  {value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vswitchsim",
        description="simulate and plan compartmentalized SR-IOV virtual switching",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="materialize a deployment plan")
    p.add_argument("spec")
    p.add_argument("--rules", action="store_true", help="print flow-rule text instead of JSON")
    p.add_argument("--out", help="write output to a file")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("run", help="run a traffic scenario")
    p.add_argument("spec")
    p.add_argument("--scenario", required=True, choices=[k.value for k in ScenarioKind])
    p.add_argument("--packets", type=int, default=100)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", action="store_true", help="include the per-packet trace")
    p.add_argument("--csv", action="store_true", help="emit metrics as CSV")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("verify", help="isolation fuzzing")
    p.add_argument("spec")
    p.add_argument("--frames", type=int, default=1000, help="frames per tenant VF")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("attack", help="compromise analysis")
    p.add_argument("spec")
    p.add_argument("--compromise", required=True, metavar="COMPONENT")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("resources", help="resource accounting")
    p.add_argument("spec")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=_cmd_resources)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
