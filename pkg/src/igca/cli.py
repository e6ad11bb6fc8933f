"""Command-line front end.

Subcommands: ``scenario`` (what-if over a case-study job, with overrides and
sweeps), ``compare`` (computed estimates next to the bundled reference
figures; exit status reflects per-row ordering agreement), ``serve`` (run
the routing service), ``jobs`` and ``broker`` (registry and directory
administration).

Exit codes: 0 ok, 1 usage, 2 load error, 3 ordering mismatch, 4 service error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import signal
import sys
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from igca import broker, registry, service
from igca.decision import NoCompliantDestination, what_if
from igca.energy import DESTINATIONS, SERVICE_CLASSES, ClassMismatch, UnboundDestination, estimate
from igca.policy import QOS_TIERS, PolicyEnvelope

LOAD_ERRORS = (registry.RegistryError, broker.BrokerError, OSError)

SWEEPABLE_FIELDS = {
    "storage": ("file_size_gb", "downloads_per_hour", "users"),
    "software": ("file_size_gb", "frame_rate_mbps", "users"),
    "processing": ("encodings_per_week", "hours_per_encoding", "hours_per_week", "frame_rate_mbps"),
}
INT_FIELDS = ("users", "encodings_per_week")


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    overrides: dict

    def validated(self) -> "ScenarioSpec":
        allowed = SWEEPABLE_FIELDS[self.name]
        for field_name in self.overrides:
            if field_name not in allowed:
                raise UsageError(
                    f"field {field_name!r} cannot be overridden for a {self.name} job"
                    f" (allowed: {', '.join(allowed)})"
                )
        return self


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def default_fixture() -> Path:
    return Path(str(resources.files("igca").joinpath("fixtures/axy.xml")))


def default_reference() -> Path:
    return Path(str(resources.files("igca").joinpath("fixtures/axy_reference.json")))


def _parse_clock(value: str | None):
    if value is None:
        return lambda: datetime.now(timezone.utc)
    fixed = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if fixed.tzinfo is None:
        fixed = fixed.replace(tzinfo=timezone.utc)
    return lambda: fixed


def _coerce(field_name: str, raw: str | float):
    if field_name in INT_FIELDS:
        value = float(raw)
        if value != int(value):
            raise UsageError(f"field {field_name!r} takes an integer, got {raw}")
        return int(value)
    return float(raw)


def _parse_overrides(pairs: list[str]) -> dict:
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise UsageError(f"--set expects field=value, got {pair!r}")
        name, raw = pair.split("=", 1)
        try:
            overrides[name.strip()] = raw.strip()
        except ValueError as exc:
            raise UsageError(str(exc))
    return overrides


def _parse_sweep(text: str) -> tuple[str, list[float]]:
    # field=a..b:step
    try:
        field_name, span = text.split("=", 1)
        bounds, step_text = span.split(":", 1)
        start_text, stop_text = bounds.split("..", 1)
        start, stop, step = float(start_text), float(stop_text), float(step_text)
    except ValueError:
        raise UsageError(f"--sweep expects field=start..stop:step, got {text!r}")
    if step <= 0 or stop < start:
        raise UsageError("--sweep needs step > 0 and stop >= start")
    values = []
    value = start
    while value <= stop + 1e-9:
        values.append(round(value, 12))
        value += step
    return field_name.strip(), values


def _emit_table(headers: list[str], rows: list[list[str]], fmt: str) -> None:
    if fmt == "csv":
        writer = csv.writer(sys.stdout)
        writer.writerow(headers)
        writer.writerows(rows)
        return
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    print("  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip())
    for row in rows:
        print("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())


def _entry_for_class(reg: registry.RegistryFile, service_class: str) -> registry.RegistryEntry:
    for entry in reg.entries:
        if entry.job.service_class == service_class:
            return entry
    raise UsageError(f"fixture has no {service_class!r} job")


def _offer_for(job, policy, args, clock) -> broker.GreenOffer | None:
    path = getattr(args, "broker_dir", None) or os.environ.get(service.ENV_BROKER_DIR)
    if not path:
        return None
    directory = broker.load_directory(path)
    at_hour = args.at_hour if args.at_hour is not None else clock().astimezone(timezone.utc).hour
    try:
        return broker.select_greenest(
            job.service_class, policy, directory.ced, directory.offers, at_hour
        )
    except (broker.NoOffer, broker.NoCompliantOffer):
        return None


# ---------------------------------------------------------------------------
# scenario

def cmd_scenario(args) -> int:
    spec = ScenarioSpec(args.name, _parse_overrides(args.set)).validated()
    reg = registry.load(args.fixture)
    entry = _entry_for_class(reg, spec.name)
    clock = _parse_clock(args.clock)
    job = entry.job
    for field_name, raw in spec.overrides.items():
        job = replace(job, **{field_name: _coerce(field_name, raw)})

    if args.sweep:
        field_name, values = _parse_sweep(args.sweep)
        if field_name not in SWEEPABLE_FIELDS[spec.name]:
            raise UsageError(f"field {field_name!r} cannot be swept for a {spec.name} job")
        headers = [field_name, *DESTINATIONS]
        rows = []
        for value in values:
            swept = replace(job, **{field_name: _coerce(field_name, value)})
            estimates = {d: estimate(swept, reg.infrastructure, d) for d in DESTINATIONS}
            if args.format == "csv":
                rows.append([repr(float(value)), *[repr(estimates[d].value) for d in DESTINATIONS]])
            else:
                rows.append([f"{value:g}", *[f"{estimates[d].value:.2f}" for d in DESTINATIONS]])
        _emit_table(headers, rows, args.format)
        return 0

    offer = _offer_for(job, entry.policy, args, clock)
    decision = what_if(job, entry.policy, reg.infrastructure, offer, reg.thresholds)
    headers = ["destination", "power_w", "compliant", "note"]
    rows = []
    for dest in DESTINATIONS:
        est = decision.estimates[dest]
        note = "greenest" if dest == decision.chosen else ""
        compliant = "yes" if dest in decision.compliant else "no"
        value = repr(est.value) if args.format == "csv" else f"{est.value:.2f}"
        rows.append([dest, value, compliant, note])
    _emit_table(headers, rows, args.format)
    if args.format != "csv":
        print(f"recommendation: {decision.chosen}")
        for advisory in decision.advisories:
            if advisory.triggered:
                print(
                    f"advisory [{advisory.deployment}/{advisory.energy_component}]"
                    f" significant: {advisory.condition}"
                )
    return 0


# ---------------------------------------------------------------------------
# compare

def _ordering(values: dict[str, float]) -> tuple[str, ...]:
    return tuple(sorted(DESTINATIONS, key=lambda d: (values[d], DESTINATIONS.index(d))))


def cmd_compare(args) -> int:
    reg = registry.load(args.fixture)
    reference = json.loads(Path(args.reference).read_text())["rows"]
    mismatch = False
    headers = ["job_class", "destination", "computed_w", "reference_w", "residual_w"]
    rows = []
    ordering_lines = []
    for service_class in SERVICE_CLASSES:
        entry = _entry_for_class(reg, service_class)
        computed = {d: estimate(entry.job, reg.infrastructure, d).value for d in DESTINATIONS}
        reported = {d: float(reference[service_class][d]) for d in DESTINATIONS}
        for dest in DESTINATIONS:
            if args.format == "csv":
                rows.append([service_class, dest, repr(computed[dest]), repr(reported[dest]),
                             repr(computed[dest] - reported[dest])])
            else:
                rows.append([service_class, dest, f"{computed[dest]:.2f}", f"{reported[dest]:.2f}",
                             f"{computed[dest] - reported[dest]:+.2f}"])
        computed_order = _ordering(computed)
        reference_order = _ordering(reported)
        agree = computed_order == reference_order
        mismatch = mismatch or not agree
        ordering_lines.append(
            f"ordering {service_class}: computed {'<'.join(computed_order)}"
            f" reference {'<'.join(reference_order)} {'OK' if agree else 'MISMATCH'}"
        )
    _emit_table(headers, rows, args.format)
    if args.format != "csv":
        for line in ordering_lines:
            print(line)
    return 3 if mismatch else 0


# ---------------------------------------------------------------------------
# serve

def cmd_serve(args) -> int:
    registry_path = args.registry or os.environ.get(service.ENV_REGISTRY)
    if not registry_path:
        raise UsageError(f"--registry or ${service.ENV_REGISTRY} is required")
    broker_path = args.broker_dir or os.environ.get(service.ENV_BROKER_DIR)
    tcp_port = args.port if args.port is not None else int(os.environ.get(service.ENV_TCP_PORT, service.DEFAULT_TCP_PORT))
    http_port = args.http_port if args.http_port is not None else int(os.environ.get(service.ENV_HTTP_PORT, service.DEFAULT_HTTP_PORT))
    if tcp_port <= 0 or http_port <= 0:
        raise UsageError("ports must be positive")

    config = service.ServiceConfig(
        registry_path=registry_path,
        broker_path=broker_path,
        host=args.host,
        tcp_port=tcp_port,
        http_port=http_port,
        clock=_parse_clock(args.clock),
    )
    try:
        middleware = service.MiddlewareService(config)
    except LOAD_ERRORS:
        raise
    middleware.start()
    revision = middleware.registry.snapshot().revision
    print(f"routing: tcp://{args.host}:{middleware.tcp_port}")
    print(f"management: http://{args.host}:{middleware.http_port}")
    print(f"registry: {registry_path} (revision {revision})", flush=True)
    stop = {"flag": False}

    def _stop(signum, frame):
        stop["flag"] = True

    signal.signal(signal.SIGINT, _stop)
    signal.signal(signal.SIGTERM, _stop)
    try:
        while not stop["flag"]:
            signal.pause()
    except KeyboardInterrupt:
        pass
    finally:
        middleware.stop()
    return 0


# ---------------------------------------------------------------------------
# jobs

def _registry_path(args) -> Path:
    path = args.registry or os.environ.get(service.ENV_REGISTRY)
    if not path:
        raise UsageError(f"--registry or ${service.ENV_REGISTRY} is required")
    return Path(path)


def cmd_jobs_list(args) -> int:
    reg = registry.load(_registry_path(args))
    headers = ["id", "class", "destination", "confirmed_by", "confirmed_at"]
    rows = []
    for entry in reg.entries:
        dest = entry.destination.kind
        if entry.destination.server_id:
            dest = f"{dest}:{entry.destination.server_id}"
        rows.append([
            entry.job.job_id, entry.job.service_class, dest,
            entry.confirmed_by, registry.format_timestamp(entry.confirmed_at),
        ])
    _emit_table(headers, rows, args.format)
    if args.format != "csv":
        print(f"revision: {reg.revision}")
    return 0


def cmd_jobs_add(args) -> int:
    path = _registry_path(args)
    reg = registry.load(path)
    clock = _parse_clock(args.clock)
    job = registry.JobProfile(
        job_id=args.id,
        service_class=args.service_class,
        name=args.name,
        dept=args.dept,
        frequency=args.frequency,
        file_size_gb=args.file_size_gb,
        downloads_per_hour=args.downloads_per_hour,
        users=args.users,
        frame_rate_mbps=args.frame_rate_mbps,
        encodings_per_week=args.encodings_per_week,
        hours_per_encoding=args.hours_per_encoding,
        hours_per_week=args.hours_per_week,
        bandwidth_mbps=args.bandwidth_mbps,
    )
    policy = PolicyEnvelope(
        security_level=args.security_level,
        qos_tier=args.qos,
        budget=args.budget,
        availability_req=args.availability,
    )
    destination = registry.Destination(args.destination, args.server)
    entry = registry.RegistryEntry(
        job=job, policy=policy, destination=destination,
        confirmed_by=args.confirmed_by,
        confirmed_at=clock().astimezone(timezone.utc).replace(microsecond=0),
    )
    try:
        updated = registry.upsert(reg, entry)
    except (ValueError, ClassMismatch) as exc:
        raise UsageError(str(exc))
    registry.save(updated, path)
    print(f"job {args.id} saved (revision {updated.revision})")
    return 0


def cmd_jobs_set_destination(args) -> int:
    path = _registry_path(args)
    reg = registry.load(path)
    clock = _parse_clock(args.clock)
    entry = registry.lookup(reg, args.job_id)
    destination = registry.Destination(args.destination, args.server)
    try:
        destination.validate()
    except ValueError as exc:
        raise UsageError(str(exc))
    updated_entry = replace(
        entry, destination=destination, confirmed_by=args.confirmed_by,
        confirmed_at=clock().astimezone(timezone.utc).replace(microsecond=0),
    )
    updated = registry.upsert(reg, updated_entry)
    registry.save(updated, path)
    dest = args.destination if not args.server else f"{args.destination}:{args.server}"
    print(f"job {args.job_id} -> {dest} (revision {updated.revision})")
    return 0


# ---------------------------------------------------------------------------
# broker

def _broker_path(args) -> Path:
    path = args.broker_dir or os.environ.get(service.ENV_BROKER_DIR)
    if not path:
        raise UsageError(f"--broker-dir or ${service.ENV_BROKER_DIR} is required")
    return Path(path)


def cmd_broker_add_csp(args) -> int:
    path = _broker_path(args)
    directory = broker.load_directory(path) if path.exists() else broker.BrokerDirectory()
    record = broker.CspRecord(
        csp_id=args.id,
        service_class=args.service_class,
        carbon_intensity_g_per_kwh=args.carbon,
        energy_kwh_per_unit_hour=args.energy,
        region=args.region,
    )
    try:
        record.validate()
    except ValueError as exc:
        raise UsageError(str(exc))
    ced = tuple(r for r in directory.ced if not (r.csp_id == args.id and r.service_class == args.service_class))
    broker.save_directory(replace(directory, ced=ced + (record,)), path)
    print(f"csp {args.id} ({args.service_class}) saved")
    return 0


def cmd_broker_add_offer(args) -> int:
    path = _broker_path(args)
    directory = broker.load_directory(path) if path.exists() else broker.BrokerDirectory()
    windows = []
    for span in args.window or []:
        try:
            start_text, end_text = span.split("-", 1)
            windows.append(broker.GreenWindow(int(start_text), int(end_text)))
        except ValueError:
            raise UsageError(f"--window expects start-end hours, got {span!r}")
    offer = broker.GreenOffer(
        offer_id=args.id,
        csp_id=args.csp,
        service_class=args.service_class,
        price=args.price,
        qos_tier=args.qos,
        availability=args.availability,
        green_windows=tuple(windows),
    )
    try:
        offer.validate()
    except ValueError as exc:
        raise UsageError(str(exc))
    offers = tuple(o for o in directory.offers if o.offer_id != args.id)
    broker.save_directory(replace(directory, offers=offers + (offer,)), path)
    print(f"offer {args.id} ({args.service_class}, csp {args.csp}) saved")
    return 0


def cmd_broker_select(args) -> int:
    path = _broker_path(args)
    directory = broker.load_directory(path)
    policy = PolicyEnvelope(
        security_level=1, qos_tier=args.qos, budget=args.budget, availability_req=args.availability
    )
    at_hour = args.at_hour if args.at_hour is not None else datetime.now(timezone.utc).hour
    try:
        offer = broker.select_greenest(
            args.service_class, policy, directory.ced, directory.offers, at_hour
        )
    except (broker.NoOffer, broker.NoCompliantOffer) as exc:
        print(f"no offer: {exc}", file=sys.stderr)
        return 4
    rate = broker.effective_carbon_rate(offer, directory.ced, at_hour)
    print(f"{offer.offer_id} csp={offer.csp_id} carbon_g_per_hour={rate:g} price={offer.price:g}")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="igca", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    scenario = sub.add_parser("scenario", help="what-if estimates for a case-study job")
    scenario.add_argument("name", choices=SERVICE_CLASSES)
    scenario.add_argument("--fixture", type=Path, default=default_fixture())
    scenario.add_argument("--set", action="append", metavar="FIELD=VALUE")
    scenario.add_argument("--sweep", metavar="FIELD=A..B:STEP")
    scenario.add_argument("--format", choices=("table", "csv"), default="table")
    scenario.add_argument("--broker-dir")
    scenario.add_argument("--at-hour", type=int, default=None)
    scenario.add_argument("--clock")
    scenario.set_defaults(func=cmd_scenario)

    compare = sub.add_parser("compare", help="computed estimates vs bundled reference figures")
    compare.add_argument("--fixture", type=Path, default=default_fixture())
    compare.add_argument("--reference", type=Path, default=default_reference())
    compare.add_argument("--format", choices=("table", "csv"), default="table")
    compare.set_defaults(func=cmd_compare)

    serve = sub.add_parser("serve", help="run the routing service")
    serve.add_argument("--registry")
    serve.add_argument("--broker-dir")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--http-port", type=int, default=None)
    serve.add_argument("--clock")
    serve.set_defaults(func=cmd_serve)

    jobs = sub.add_parser("jobs", help="administer the registry")
    jobs_sub = jobs.add_subparsers(dest="jobs_command", required=True)

    jobs_list = jobs_sub.add_parser("list")
    jobs_list.add_argument("--registry")
    jobs_list.add_argument("--format", choices=("table", "csv"), default="table")
    jobs_list.set_defaults(func=cmd_jobs_list)

    jobs_add = jobs_sub.add_parser("add")
    jobs_add.add_argument("--registry")
    jobs_add.add_argument("--id", required=True)
    jobs_add.add_argument("--class", dest="service_class", required=True, choices=SERVICE_CLASSES)
    jobs_add.add_argument("--name", default="")
    jobs_add.add_argument("--dept", default="")
    jobs_add.add_argument("--frequency", default="intermittent")
    jobs_add.add_argument("--file-size-gb", type=float, default=0.0)
    jobs_add.add_argument("--downloads-per-hour", type=float, default=0.0)
    jobs_add.add_argument("--users", type=int, default=0)
    jobs_add.add_argument("--frame-rate-mbps", type=float, default=0.0)
    jobs_add.add_argument("--encodings-per-week", type=int, default=0)
    jobs_add.add_argument("--hours-per-encoding", type=float, default=0.0)
    jobs_add.add_argument("--hours-per-week", type=float, default=0.0)
    jobs_add.add_argument("--bandwidth-mbps", type=float, default=0.0)
    jobs_add.add_argument("--security-level", type=int, default=1)
    jobs_add.add_argument("--qos", choices=QOS_TIERS, default="bronze")
    jobs_add.add_argument("--budget", type=float, default=0.0)
    jobs_add.add_argument("--availability", type=float, default=0.0)
    jobs_add.add_argument("--destination", choices=("local", "private", "public"), default="local")
    jobs_add.add_argument("--server", default=None)
    jobs_add.add_argument("--confirmed-by", default="cli")
    jobs_add.add_argument("--clock")
    jobs_add.set_defaults(func=cmd_jobs_add)

    jobs_set = jobs_sub.add_parser("set-destination")
    jobs_set.add_argument("job_id")
    jobs_set.add_argument("destination", choices=("local", "private", "public"))
    jobs_set.add_argument("server", nargs="?", default=None)
    jobs_set.add_argument("--registry")
    jobs_set.add_argument("--confirmed-by", default="cli")
    jobs_set.add_argument("--clock")
    jobs_set.set_defaults(func=cmd_jobs_set_destination)

    broker_cmd = sub.add_parser("broker", help="administer the green broker directories")
    broker_sub = broker_cmd.add_subparsers(dest="broker_command", required=True)

    add_csp = broker_sub.add_parser("add-csp")
    add_csp.add_argument("--broker-dir")
    add_csp.add_argument("--id", required=True)
    add_csp.add_argument("--class", dest="service_class", required=True, choices=SERVICE_CLASSES)
    add_csp.add_argument("--carbon", type=float, required=True, help="grid intensity, gCO2/kWh")
    add_csp.add_argument("--energy", type=float, required=True, help="kWh per service unit-hour")
    add_csp.add_argument("--region", default="")
    add_csp.set_defaults(func=cmd_broker_add_csp)

    add_offer = broker_sub.add_parser("add-offer")
    add_offer.add_argument("--broker-dir")
    add_offer.add_argument("--id", required=True)
    add_offer.add_argument("--csp", required=True)
    add_offer.add_argument("--class", dest="service_class", required=True, choices=SERVICE_CLASSES)
    add_offer.add_argument("--price", type=float, required=True)
    add_offer.add_argument("--qos", choices=QOS_TIERS, default="bronze")
    add_offer.add_argument("--availability", type=float, default=0.0)
    add_offer.add_argument("--window", action="append", metavar="START-END")
    add_offer.set_defaults(func=cmd_broker_add_offer)

    select = broker_sub.add_parser("select")
    select.add_argument("--broker-dir")
    select.add_argument("--class", dest="service_class", required=True, choices=SERVICE_CLASSES)
    select.add_argument("--budget", type=float, required=True)
    select.add_argument("--qos", choices=QOS_TIERS, default="bronze")
    select.add_argument("--availability", type=float, default=0.0)
    select.add_argument("--at-hour", type=int, default=None)
    select.set_defaults(func=cmd_broker_select)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"igca: error: {exc}", file=sys.stderr)
        return 1
    except registry.NotRegistered as exc:
        print(f"igca: {exc}", file=sys.stderr)
        return 2
    except (registry.RegistryError, broker.DirectoryError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"igca: load error: {exc}", file=sys.stderr)
        return 2
    except (ClassMismatch, UnboundDestination, NoCompliantDestination) as exc:
        print(f"igca: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"igca: service error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
