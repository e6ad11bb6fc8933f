"""XML persistence for infrastructure, jobs, policies and confirmed placements.

One file is the source of truth the router reads. The on-disk form is
canonical — fixed element and attribute order, 2-space indent, UTF-8,
shortest-round-trip numbers — so saving the same registry twice yields
byte-identical files and golden-file tests are possible. Writes go through
a temp file plus atomic rename, so a concurrent reader sees either the old
or the new complete file, never a torn one.

Layout::

    <igca version="1" revision="N">
      <infrastructure>
        <machine id powerW diskGb diskPowerW/>
        <server id function frequency mode capacityMbps powerW diskGb diskPowerW users/>
        <path scope="private|public"> <element name powerW capacityMbps/> </path>
        <coefficients contentServerJPerMb transportOverrideJPerMb?/>
        <thresholds .../>
      </infrastructure>
      <jobs>
        <job id name dept class frequency>
          <profile .../> <policy .../> <destination type server?/> <audit .../>
        </job>
      </jobs>
    </igca>

``transportOverrideJPerMb`` pins the public-scope transport intensity;
``contentServerJPerMb`` applies to every path. Audit timestamps are UTC at
second precision.
"""

from __future__ import annotations

import os
import tempfile
import xml.etree.ElementTree as ET
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from xml.sax.saxutils import escape

from igca.energy import (
    InfrastructureSpec,
    JobProfile,
    MachineSpec,
    NetworkElement,
    ServerSpec,
    TransportPath,
)
from igca.policy import PolicyEnvelope, Thresholds

DESTINATION_KINDS = ("local", "private", "public")


class RegistryError(Exception):
    """Base class for registry failures."""


class NotFound(RegistryError):
    """Registry file does not exist."""


class ParseError(RegistryError):
    """The file is not well-formed XML."""


class SchemaError(RegistryError):
    """Well-formed XML that violates the registry schema."""


class UnknownServer(RegistryError):
    """A private destination names a server the infrastructure lacks."""


class NotRegistered(RegistryError):
    """Lookup miss; drives the router's unknown-job notification path."""


@dataclass(frozen=True)
class Destination:
    kind: str
    server_id: str | None = None

    def validate(self) -> None:
        if self.kind not in DESTINATION_KINDS:
            raise ValueError(f"unknown destination kind {self.kind!r}")
        if (self.kind == "private") != (self.server_id is not None):
            raise ValueError("server_id is required iff kind is 'private'")


@dataclass(frozen=True)
class RegistryEntry:
    job: JobProfile
    policy: PolicyEnvelope
    destination: Destination
    confirmed_by: str = ""
    confirmed_at: datetime | None = None


@dataclass(frozen=True)
class RegistryFile:
    revision: int = 0
    entries: tuple[RegistryEntry, ...] = ()
    infrastructure: InfrastructureSpec = InfrastructureSpec()
    thresholds: Thresholds = Thresholds()


# ---------------------------------------------------------------------------
# formatting helpers

def _num(value: float | int) -> str:
    f = float(value)
    if f == int(f) and abs(f) < 1e15:
        return str(int(f))
    return repr(f)


def _attr(value) -> str:
    return escape(str(value), {'"': "&quot;"})


def format_timestamp(at: datetime | None) -> str:
    if at is None:
        return ""
    if at.tzinfo is None:
        at = at.replace(tzinfo=timezone.utc)
    return at.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_time(text: str, where: str) -> datetime | None:
    if not text:
        return None
    try:
        parsed = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError as exc:
        raise SchemaError(f"{where}: bad timestamp {text!r}") from exc
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc).replace(microsecond=0)


def utc_now() -> datetime:
    """Second-precision UTC timestamp, the registry's canonical clock."""
    return datetime.now(timezone.utc).replace(microsecond=0)


# ---------------------------------------------------------------------------
# serialization

def dumps(reg: RegistryFile) -> str:
    infra = reg.infrastructure
    out: list[str] = ['<?xml version="1.0" encoding="UTF-8"?>']
    out.append(f'<igca version="1" revision="{int(reg.revision)}">')
    out.append("  <infrastructure>")
    for m in infra.machines:
        out.append(
            f'    <machine id="{_attr(m.id)}" powerW="{_num(m.active_power_w)}"'
            f' diskGb="{_num(m.disk_capacity_gb)}" diskPowerW="{_num(m.disk_power_w)}"/>'
        )
    for s in infra.servers:
        out.append(
            f'    <server id="{_attr(s.id)}" function="{_attr(s.function)}"'
            f' frequency="{_attr(s.usage_frequency)}" mode="{_attr(s.mode)}"'
            f' capacityMbps="{_num(s.capacity_mbps)}" powerW="{_num(s.power_w)}"'
            f' diskGb="{_num(s.disk_capacity_gb)}" diskPowerW="{_num(s.disk_power_w)}"'
            f' users="{int(s.concurrent_users)}"/>'
        )
    for scope in sorted(infra.paths):
        path = infra.paths[scope]
        out.append(f'    <path scope="{_attr(scope)}">')
        for e in path.elements:
            out.append(
                f'      <element name="{_attr(e.name)}" powerW="{_num(e.power_w)}"'
                f' capacityMbps="{_num(e.capacity_mbps)}"/>'
            )
        out.append("    </path>")
    content_server = 0.0
    for scope in sorted(infra.paths):
        content_server = infra.paths[scope].content_server_j_per_mb
        break
    coeff = f'    <coefficients contentServerJPerMb="{_num(content_server)}"'
    if infra.transport_override_j_per_mb is not None:
        coeff += f' transportOverrideJPerMb="{_num(infra.transport_override_j_per_mb)}"'
    out.append(coeff + "/>")
    t = reg.thresholds
    out.append(
        f'    <thresholds highFrameRateMbps="{_num(t.high_frame_rate_mbps)}"'
        f' fewUsersPerServer="{_num(t.few_users_per_server)}"'
        f' lowDownloadsPerHour="{_num(t.low_downloads_per_hour)}"'
        f' highDownloadsPerHour="{_num(t.high_downloads_per_hour)}"'
        f' mediumEncodingsPerWeek="{_num(t.medium_encodings_per_week)}"/>'
    )
    out.append("  </infrastructure>")
    if reg.entries:
        out.append("  <jobs>")
        for entry in reg.entries:
            out.extend(_dump_entry(entry))
        out.append("  </jobs>")
    else:
        out.append("  <jobs/>")
    out.append("</igca>")
    return "\n".join(out) + "\n"


def _dump_entry(entry: RegistryEntry) -> list[str]:
    j = entry.job
    p = entry.policy
    d = entry.destination
    lines = [
        f'    <job id="{_attr(j.job_id)}" name="{_attr(j.name)}" dept="{_attr(j.dept)}"'
        f' class="{_attr(j.service_class)}" frequency="{_attr(j.frequency)}">',
        f'      <profile fileSizeGb="{_num(j.file_size_gb)}"'
        f' downloadsPerHour="{_num(j.downloads_per_hour)}" users="{int(j.users)}"'
        f' frameRateMbps="{_num(j.frame_rate_mbps)}"'
        f' encodingsPerWeek="{int(j.encodings_per_week)}"'
        f' hoursPerEncoding="{_num(j.hours_per_encoding)}"'
        f' hoursPerWeek="{_num(j.hours_per_week)}" bandwidthMbps="{_num(j.bandwidth_mbps)}"/>',
        f'      <policy securityLevel="{int(p.security_level)}" qos="{_attr(p.qos_tier)}"'
        f' budget="{_num(p.budget)}" availability="{_num(p.availability_req)}"/>',
    ]
    if d.kind == "private":
        lines.append(f'      <destination type="private" server="{_attr(d.server_id)}"/>')
    else:
        lines.append(f'      <destination type="{_attr(d.kind)}"/>')
    lines.append(
        f'      <audit confirmedBy="{_attr(entry.confirmed_by)}"'
        f' confirmedAt="{format_timestamp(entry.confirmed_at)}"/>'
    )
    lines.append("    </job>")
    return lines


def save(reg: RegistryFile, path: str | Path) -> None:
    """Atomic canonical write: temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = dumps(reg).encode("utf-8")
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


# ---------------------------------------------------------------------------
# parsing

def _check_attrs(elem: ET.Element, required: tuple[str, ...], optional: tuple[str, ...] = ()) -> dict[str, str]:
    allowed = set(required) | set(optional)
    extra = set(elem.attrib) - allowed
    if extra:
        raise SchemaError(f"<{elem.tag}>: unknown attribute(s) {sorted(extra)}")
    missing = [a for a in required if a not in elem.attrib]
    if missing:
        raise SchemaError(f"<{elem.tag}>: missing attribute(s) {missing}")
    return dict(elem.attrib)


def _float(attrs: dict[str, str], name: str, tag: str, default: float | None = None) -> float:
    raw = attrs.get(name)
    if raw is None:
        if default is None:
            raise SchemaError(f"<{tag}>: missing attribute {name!r}")
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise SchemaError(f"<{tag}>: attribute {name} is not a number: {raw!r}") from exc


def _int(attrs: dict[str, str], name: str, tag: str, default: int | None = None) -> int:
    raw = attrs.get(name)
    if raw is None:
        if default is None:
            raise SchemaError(f"<{tag}>: missing attribute {name!r}")
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise SchemaError(f"<{tag}>: attribute {name} is not an integer: {raw!r}") from exc


def loads(text: str | bytes) -> RegistryFile:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        line, column = exc.position
        raise ParseError(f"malformed XML at line {line}, column {column}: {exc.msg}") from exc
    if root.tag != "igca":
        raise SchemaError(f"root element must be <igca>, got <{root.tag}>")
    attrs = _check_attrs(root, ("version", "revision"))
    if attrs["version"] != "1":
        raise SchemaError(f"<igca>: unsupported version {attrs['version']!r}")
    revision = _int(attrs, "revision", "igca")
    if revision < 0:
        raise SchemaError("<igca>: revision must be >= 0")

    infra_elem = None
    jobs_elem = None
    for child in root:
        if child.tag == "infrastructure":
            if infra_elem is not None:
                raise SchemaError("duplicate <infrastructure> element")
            infra_elem = child
        elif child.tag == "jobs":
            if jobs_elem is not None:
                raise SchemaError("duplicate <jobs> element")
            jobs_elem = child
        else:
            raise SchemaError(f"unknown element <{child.tag}> under <igca>")
    if infra_elem is None:
        raise SchemaError("missing <infrastructure> element")
    if jobs_elem is None:
        raise SchemaError("missing <jobs> element")

    infra, thresholds = _parse_infrastructure(infra_elem)
    entries = _parse_jobs(jobs_elem, infra)
    return RegistryFile(revision=revision, entries=entries, infrastructure=infra, thresholds=thresholds)


def _parse_infrastructure(elem: ET.Element) -> tuple[InfrastructureSpec, Thresholds]:
    machines: list[MachineSpec] = []
    servers: list[ServerSpec] = []
    raw_paths: dict[str, tuple[NetworkElement, ...]] = {}
    content_server = 0.0
    transport_override: float | None = None
    thresholds = Thresholds()
    seen_coefficients = False
    seen_thresholds = False

    for child in elem:
        if child.tag == "machine":
            attrs = _check_attrs(child, ("id", "powerW", "diskGb", "diskPowerW"))
            machine = MachineSpec(
                id=attrs["id"],
                active_power_w=_float(attrs, "powerW", "machine"),
                disk_capacity_gb=_float(attrs, "diskGb", "machine"),
                disk_power_w=_float(attrs, "diskPowerW", "machine"),
            )
            _validate(machine, "machine")
            machines.append(machine)
        elif child.tag == "server":
            attrs = _check_attrs(
                child,
                ("id", "function", "frequency", "mode", "capacityMbps", "powerW", "diskGb", "diskPowerW", "users"),
            )
            server = ServerSpec(
                id=attrs["id"],
                function=attrs["function"],
                usage_frequency=attrs["frequency"],
                mode=attrs["mode"],
                capacity_mbps=_float(attrs, "capacityMbps", "server"),
                power_w=_float(attrs, "powerW", "server"),
                disk_capacity_gb=_float(attrs, "diskGb", "server"),
                disk_power_w=_float(attrs, "diskPowerW", "server"),
                concurrent_users=_int(attrs, "users", "server"),
            )
            _validate(server, "server")
            servers.append(server)
        elif child.tag == "path":
            attrs = _check_attrs(child, ("scope",))
            scope = attrs["scope"]
            if scope not in ("private", "public"):
                raise SchemaError(f"<path>: scope must be private or public, got {scope!r}")
            if scope in raw_paths:
                raise SchemaError(f"duplicate <path scope={scope!r}>")
            elements = []
            for sub in child:
                if sub.tag != "element":
                    raise SchemaError(f"unknown element <{sub.tag}> under <path>")
                eattrs = _check_attrs(sub, ("name", "powerW", "capacityMbps"))
                power = _float(eattrs, "powerW", "element")
                capacity = _float(eattrs, "capacityMbps", "element")
                if power <= 0 or capacity <= 0:
                    raise SchemaError(f"<element {eattrs['name']!r}>: power and capacity must be > 0")
                elements.append(NetworkElement(eattrs["name"], power, capacity))
            raw_paths[scope] = tuple(elements)
        elif child.tag == "coefficients":
            if seen_coefficients:
                raise SchemaError("duplicate <coefficients> element")
            seen_coefficients = True
            attrs = _check_attrs(child, (), ("contentServerJPerMb", "transportOverrideJPerMb"))
            content_server = _float(attrs, "contentServerJPerMb", "coefficients", default=0.0)
            if "transportOverrideJPerMb" in attrs:
                transport_override = _float(attrs, "transportOverrideJPerMb", "coefficients")
        elif child.tag == "thresholds":
            if seen_thresholds:
                raise SchemaError("duplicate <thresholds> element")
            seen_thresholds = True
            attrs = _check_attrs(
                child,
                (),
                ("highFrameRateMbps", "fewUsersPerServer", "lowDownloadsPerHour",
                 "highDownloadsPerHour", "mediumEncodingsPerWeek"),
            )
            defaults = Thresholds()
            thresholds = Thresholds(
                high_frame_rate_mbps=_float(attrs, "highFrameRateMbps", "thresholds", defaults.high_frame_rate_mbps),
                few_users_per_server=_float(attrs, "fewUsersPerServer", "thresholds", defaults.few_users_per_server),
                low_downloads_per_hour=_float(attrs, "lowDownloadsPerHour", "thresholds", defaults.low_downloads_per_hour),
                high_downloads_per_hour=_float(attrs, "highDownloadsPerHour", "thresholds", defaults.high_downloads_per_hour),
                medium_encodings_per_week=_float(attrs, "mediumEncodingsPerWeek", "thresholds", defaults.medium_encodings_per_week),
            )
        else:
            raise SchemaError(f"unknown element <{child.tag}> under <infrastructure>")

    paths = {
        scope: TransportPath(elements, content_server_j_per_mb=content_server)
        for scope, elements in raw_paths.items()
    }
    infra = InfrastructureSpec(
        machines=tuple(machines),
        servers=tuple(servers),
        paths=paths,
        transport_override_j_per_mb=transport_override,
    )
    return infra, thresholds


def _parse_jobs(elem: ET.Element, infra: InfrastructureSpec) -> tuple[RegistryEntry, ...]:
    entries: list[RegistryEntry] = []
    seen: set[str] = set()
    for child in elem:
        if child.tag != "job":
            raise SchemaError(f"unknown element <{child.tag}> under <jobs>")
        entry = _parse_job(child, infra)
        if entry.job.job_id in seen:
            raise SchemaError(f"<job>: duplicate job id {entry.job.job_id!r}")
        seen.add(entry.job.job_id)
        entries.append(entry)
    return tuple(entries)


def _parse_job(elem: ET.Element, infra: InfrastructureSpec) -> RegistryEntry:
    attrs = _check_attrs(elem, ("id", "name", "dept", "class", "frequency"))
    profile_elem = policy_elem = destination_elem = audit_elem = None
    for sub in elem:
        if sub.tag == "profile":
            profile_elem = sub
        elif sub.tag == "policy":
            policy_elem = sub
        elif sub.tag == "destination":
            destination_elem = sub
        elif sub.tag == "audit":
            audit_elem = sub
        else:
            raise SchemaError(f"unknown element <{sub.tag}> under <job>")
    for name, sub in (("profile", profile_elem), ("policy", policy_elem),
                      ("destination", destination_elem), ("audit", audit_elem)):
        if sub is None:
            raise SchemaError(f"<job {attrs['id']!r}>: missing <{name}> element")

    pattrs = _check_attrs(
        profile_elem,
        (),
        ("fileSizeGb", "downloadsPerHour", "users", "frameRateMbps",
         "encodingsPerWeek", "hoursPerEncoding", "hoursPerWeek", "bandwidthMbps"),
    )
    job = JobProfile(
        job_id=attrs["id"],
        service_class=attrs["class"],
        name=attrs["name"],
        dept=attrs["dept"],
        frequency=attrs["frequency"],
        file_size_gb=_float(pattrs, "fileSizeGb", "profile", 0.0),
        downloads_per_hour=_float(pattrs, "downloadsPerHour", "profile", 0.0),
        users=_int(pattrs, "users", "profile", 0),
        frame_rate_mbps=_float(pattrs, "frameRateMbps", "profile", 0.0),
        encodings_per_week=_int(pattrs, "encodingsPerWeek", "profile", 0),
        hours_per_encoding=_float(pattrs, "hoursPerEncoding", "profile", 0.0),
        hours_per_week=_float(pattrs, "hoursPerWeek", "profile", 0.0),
        bandwidth_mbps=_float(pattrs, "bandwidthMbps", "profile", 0.0),
    )
    _validate(job, "job")

    qattrs = _check_attrs(policy_elem, ("securityLevel", "qos", "budget", "availability"))
    policy = PolicyEnvelope(
        security_level=_int(qattrs, "securityLevel", "policy"),
        qos_tier=qattrs["qos"],
        budget=_float(qattrs, "budget", "policy"),
        availability_req=_float(qattrs, "availability", "policy"),
    )
    _validate(policy, "policy")

    dattrs = _check_attrs(destination_elem, ("type",), ("server",))
    destination = Destination(kind=dattrs["type"], server_id=dattrs.get("server"))
    try:
        destination.validate()
    except ValueError as exc:
        raise SchemaError(f"<destination>: {exc}") from exc
    if destination.kind == "private" and not any(s.id == destination.server_id for s in infra.servers):
        raise SchemaError(f"<destination>: unknown server {destination.server_id!r}")

    aattrs = _check_attrs(audit_elem, ("confirmedBy", "confirmedAt"))
    confirmed_at = _parse_time(aattrs["confirmedAt"], f"<audit> of job {attrs['id']!r}")

    return RegistryEntry(
        job=job,
        policy=policy,
        destination=destination,
        confirmed_by=aattrs["confirmedBy"],
        confirmed_at=confirmed_at,
    )


def _validate(obj, tag: str) -> None:
    try:
        obj.validate()
    except ValueError as exc:
        raise SchemaError(f"<{tag}>: {exc}") from exc


def load(path: str | Path) -> RegistryFile:
    path = Path(path)
    if not path.exists():
        raise NotFound(f"registry file not found: {path}")
    return loads(path.read_bytes())


# ---------------------------------------------------------------------------
# mutations and lookup

def lookup(reg: RegistryFile, job_id: str) -> RegistryEntry:
    """Case-sensitive exact match by job id."""
    for entry in reg.entries:
        if entry.job.job_id == job_id:
            return entry
    raise NotRegistered(f"job {job_id!r} is not registered")


def upsert(reg: RegistryFile, entry: RegistryEntry) -> RegistryFile:
    """Insert or replace by job id; bumps the revision by exactly one."""
    entry.job.validate()
    entry.job.require_class_fields()
    entry.policy.validate()
    entry.destination.validate()
    if entry.destination.kind == "private":
        if not any(s.id == entry.destination.server_id for s in reg.infrastructure.servers):
            raise UnknownServer(f"no such server: {entry.destination.server_id!r}")
    entries = list(reg.entries)
    for i, existing in enumerate(entries):
        if existing.job.job_id == entry.job.job_id:
            entries[i] = entry
            break
    else:
        entries.append(entry)
    return replace(reg, revision=reg.revision + 1, entries=tuple(entries))
