"""Power estimation for running a job locally, in the private cloud or in a public cloud.

Every operation here evaluates a static formula over configured equipment
coefficients and returns a nominal wattage. The figures are only ever
compared between the three destinations of one job, never across jobs and
never against metered hardware, so the nominal unit cancels out of every
decision that consumes them.

Unit conventions:

- Transport legs are costed by an intensity in joules per megabit, obtained
  by summing ``power_w / capacity_mbps`` over the network elements on the
  path (a watt per megabit-per-second is a joule per megabit).
- File sizes are decimal gigabytes and convert to megabits at 8000 Mb/GB;
  hourly download rates convert to per-second flows. A megabit/second flow
  times a joule/megabit intensity is watts.
- The weekly processing formula mixes hour-weighted terms with an
  instantaneous transport term; it is evaluated literally as configured and
  compared only against the same formula at the other destinations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

SERVICE_CLASSES = ("storage", "software", "processing")
DESTINATIONS = ("local", "private", "public")
SERVER_FUNCTIONS = ("storage", "processing", "backup")
USAGE_FREQUENCIES = ("rare", "intermittent", "continuous")
SERVER_MODES = ("heavy_duty", "sleep", "hibernate")

MB_PER_GB = 8000.0
SECONDS_PER_HOUR = 3600.0
HOURS_PER_WEEK = 168.0

# Scale applied to a server's rated power by operating mode.
DEFAULT_MODE_FACTORS = {"heavy_duty": 1.0, "sleep": 0.1, "hibernate": 0.05}


class EnergyModelError(Exception):
    """Base class for estimation failures."""


class EmptyPath(EnergyModelError):
    """A transport path with no network elements has no intensity."""


class InvalidElement(EnergyModelError):
    """A network element with non-positive power or capacity."""


class ClassMismatch(EnergyModelError):
    """The job's service class does not fit the requested formula."""


class InvalidServer(EnergyModelError):
    """A server spec that cannot support per-user accounting."""


class UnboundDestination(EnergyModelError):
    """The infrastructure has no machine/server/path for the destination."""


@dataclass(frozen=True)
class NetworkElement:
    """One hop on a transport path. Power in watts, capacity in Mb/s."""

    name: str
    power_w: float
    capacity_mbps: float


@dataclass(frozen=True)
class TransportPath:
    """Ordered network elements plus the content-server intensity (J/Mb)."""

    elements: tuple[NetworkElement, ...]
    content_server_j_per_mb: float = 0.0


@dataclass(frozen=True)
class MachineSpec:
    """A client PC: active power draw and disk capacity/power."""

    id: str
    active_power_w: float
    disk_capacity_gb: float
    disk_power_w: float

    @property
    def disk_w_per_gb(self) -> float:
        return self.disk_power_w / self.disk_capacity_gb

    def validate(self) -> None:
        if self.active_power_w <= 0:
            raise ValueError(f"machine {self.id}: active_power_w must be > 0")
        if self.disk_capacity_gb <= 0:
            raise ValueError(f"machine {self.id}: disk_capacity_gb must be > 0")
        if self.disk_power_w < 0:
            raise ValueError(f"machine {self.id}: disk_power_w must be >= 0")


@dataclass(frozen=True)
class ServerSpec:
    """A cloud server: role, duty mode, rated power and per-user sharing."""

    id: str
    function: str = "processing"
    usage_frequency: str = "continuous"
    mode: str = "heavy_duty"
    capacity_mbps: float = 0.0
    power_w: float = 0.0
    disk_capacity_gb: float = 1.0
    disk_power_w: float = 0.0
    concurrent_users: int = 1

    @property
    def disk_w_per_gb(self) -> float:
        return self.disk_power_w / self.disk_capacity_gb

    def effective_power_w(self, mode_factors: dict[str, float] | None = None) -> float:
        factors = DEFAULT_MODE_FACTORS if mode_factors is None else mode_factors
        return self.power_w * factors.get(self.mode, 1.0)

    def validate(self) -> None:
        if self.function not in SERVER_FUNCTIONS:
            raise ValueError(f"server {self.id}: unknown function {self.function!r}")
        if self.usage_frequency not in USAGE_FREQUENCIES:
            raise ValueError(f"server {self.id}: unknown frequency {self.usage_frequency!r}")
        if self.mode not in SERVER_MODES:
            raise ValueError(f"server {self.id}: unknown mode {self.mode!r}")
        if self.power_w <= 0:
            raise ValueError(f"server {self.id}: power_w must be > 0")
        if self.capacity_mbps <= 0:
            raise ValueError(f"server {self.id}: capacity_mbps must be > 0")
        if self.disk_capacity_gb <= 0:
            raise ValueError(f"server {self.id}: disk_capacity_gb must be > 0")
        if self.disk_power_w < 0:
            raise ValueError(f"server {self.id}: disk_power_w must be >= 0")
        if self.concurrent_users < 1:
            raise ValueError(f"server {self.id}: concurrent_users must be >= 1")


@dataclass(frozen=True)
class JobProfile:
    """Workload parameters for one job; which fields matter depends on service_class."""

    job_id: str
    service_class: str
    name: str = ""
    dept: str = ""
    file_size_gb: float = 0.0
    downloads_per_hour: float = 0.0
    users: int = 0
    frame_rate_mbps: float = 0.0
    encodings_per_week: int = 0
    hours_per_encoding: float = 0.0
    hours_per_week: float = 0.0
    bandwidth_mbps: float = 0.0
    frequency: str = "intermittent"

    def validate(self) -> None:
        if not self.job_id:
            raise ValueError("job_id must be non-empty")
        if self.service_class not in SERVICE_CLASSES:
            raise ValueError(f"job {self.job_id}: unknown service class {self.service_class!r}")
        if self.frequency not in USAGE_FREQUENCIES:
            raise ValueError(f"job {self.job_id}: unknown frequency {self.frequency!r}")
        numeric = {
            "file_size_gb": self.file_size_gb,
            "downloads_per_hour": self.downloads_per_hour,
            "users": self.users,
            "frame_rate_mbps": self.frame_rate_mbps,
            "encodings_per_week": self.encodings_per_week,
            "hours_per_encoding": self.hours_per_encoding,
            "hours_per_week": self.hours_per_week,
            "bandwidth_mbps": self.bandwidth_mbps,
        }
        for name, value in numeric.items():
            if value < 0:
                raise ValueError(f"job {self.job_id}: {name} must be >= 0")
        if self.hours_per_week > HOURS_PER_WEEK:
            raise ValueError(f"job {self.job_id}: hours_per_week must be <= {HOURS_PER_WEEK:g}")

    def require_class_fields(self) -> None:
        """Reject a job whose class-driving workload fields are zero."""
        required = {
            "storage": ("file_size_gb", "downloads_per_hour", "users"),
            "software": ("frame_rate_mbps", "file_size_gb"),
            "processing": ("encodings_per_week", "hours_per_encoding", "hours_per_week"),
        }[self.service_class]
        for name in required:
            if getattr(self, name) <= 0:
                raise ClassMismatch(
                    f"job {self.job_id}: {self.service_class} service requires {name} > 0"
                )


@dataclass(frozen=True)
class EnergyEstimate:
    """A destination-tagged nominal wattage plus its term breakdown.

    ``terms`` holds the named contributions in evaluation order; ``combine``
    says whether the value is their sum or their product.
    """

    destination: str
    value: float
    terms: tuple[tuple[str, float], ...]
    combine: str = "sum"

    def recombined(self) -> float:
        values = [v for _, v in self.terms]
        if self.combine == "product":
            return math.prod(values)
        return sum(values)

    def term(self, name: str) -> float:
        for key, value in self.terms:
            if key == name:
                return value
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "destination": self.destination,
            "value": self.value,
            "combine": self.combine,
            "terms": dict(self.terms),
        }


@dataclass(frozen=True)
class InfrastructureSpec:
    """Everything estimates draw on: client machines, servers and transport paths.

    ``paths`` maps the cloud scope (``private``/``public``) to its transport
    path. ``transport_override_j_per_mb``, when set, replaces the computed
    intensity of the *public* path; it exists so a fixture can pin a
    measured or fitted end-to-end internet figure that the per-element sum
    cannot represent.
    """

    machines: tuple[MachineSpec, ...] = ()
    servers: tuple[ServerSpec, ...] = ()
    paths: dict[str, TransportPath] = field(default_factory=dict)
    transport_override_j_per_mb: float | None = None

    @property
    def client_machine(self) -> MachineSpec:
        if not self.machines:
            raise UnboundDestination("no client machine configured")
        return self.machines[0]

    def server_for(self, service_class: str) -> ServerSpec:
        """Pick the server a cloud job of this class would land on.

        Storage jobs prefer a storage server, software and processing jobs a
        processing server; falls back to the first non-backup server, then
        the first server of any kind.
        """
        if not self.servers:
            raise UnboundDestination("no cloud server configured")
        wanted = "storage" if service_class == "storage" else "processing"
        for server in self.servers:
            if server.function == wanted:
                return server
        for server in self.servers:
            if server.function != "backup":
                return server
        return self.servers[0]

    def path_for(self, destination: str) -> TransportPath:
        try:
            return self.paths[destination]
        except KeyError:
            raise UnboundDestination(f"no transport path configured for {destination!r}") from None

    def transport_intensity_for(self, destination: str) -> float:
        if destination == "public" and self.transport_override_j_per_mb is not None:
            return self.transport_override_j_per_mb
        return transport_intensity(self.path_for(destination))


def transport_intensity(path: TransportPath) -> float:
    """Sum power/capacity over the path's elements, in joules per megabit."""
    if not path.elements:
        raise EmptyPath("transport path has no elements")
    total = 0.0
    for element in path.elements:
        if element.capacity_mbps <= 0 or element.power_w <= 0:
            raise InvalidElement(
                f"element {element.name!r}: power and capacity must be > 0"
            )
        total += element.power_w / element.capacity_mbps
    return total


def _require_class(job: JobProfile, allowed: tuple[str, ...], formula: str) -> None:
    if job.service_class not in allowed:
        raise ClassMismatch(
            f"{formula} does not apply to a {job.service_class!r} job ({job.job_id})"
        )


def storage_cloud_power(
    job: JobProfile,
    path: TransportPath,
    destination: str = "private",
    transport_override: float | None = None,
) -> EnergyEstimate:
    """Cloud cost of a storage service::

        file_size_mb * downloads_per_second * (transport + content_server) * users

    The factors multiply out to watts (Mb x 1/s x J/Mb x count).
    """
    _require_class(job, ("storage",), "storage_cloud_power")
    base = transport_intensity(path) if transport_override is None else transport_override
    intensity = base + path.content_server_j_per_mb
    file_size_mb = job.file_size_gb * MB_PER_GB
    downloads_per_second = job.downloads_per_hour / SECONDS_PER_HOUR
    users = float(job.users)
    value = file_size_mb * downloads_per_second * intensity * users
    terms = (
        ("file_size_mb", file_size_mb),
        ("downloads_per_second", downloads_per_second),
        ("path_intensity_j_per_mb", intensity),
        ("users", users),
    )
    return EnergyEstimate(destination, value, terms, combine="product")


def storage_local_power(job: JobProfile, machine: MachineSpec) -> EnergyEstimate:
    """Local cost of a storage or software service::

        machine_power + file_size_gb * disk_w_per_gb
    """
    _require_class(job, ("storage", "software"), "storage_local_power")
    disk = job.file_size_gb * machine.disk_w_per_gb
    value = machine.active_power_w + disk
    terms = (("local_machine_w", machine.active_power_w), ("local_disk_w", disk))
    return EnergyEstimate("local", value, terms)


def software_cloud_power(
    job: JobProfile,
    machine: MachineSpec,
    server: ServerSpec,
    path: TransportPath,
    destination: str = "private",
    transport_override: float | None = None,
    mode_factors: dict[str, float] | None = None,
) -> EnergyEstimate:
    """Cloud cost of a software service::

        machine_power + server_power/users + frame_rate * transport
                      + file_size_gb * server_disk_w_per_gb
    """
    _require_class(job, ("software",), "software_cloud_power")
    if server.concurrent_users <= 0:
        raise InvalidServer(f"server {server.id}: concurrent_users must be >= 1")
    intensity = transport_intensity(path) if transport_override is None else transport_override
    per_user = server.effective_power_w(mode_factors) / server.concurrent_users
    transport = job.frame_rate_mbps * intensity
    server_disk = job.file_size_gb * server.disk_w_per_gb
    value = machine.active_power_w + per_user + transport + server_disk
    terms = (
        ("local_machine_w", machine.active_power_w),
        ("server_per_user_w", per_user),
        ("transport_w", transport),
        ("server_disk_w", server_disk),
    )
    return EnergyEstimate(destination, value, terms)


def processing_cloud_energy(
    job: JobProfile,
    machine: MachineSpec,
    server: ServerSpec,
    path: TransportPath,
    destination: str = "private",
    transport_override: float | None = None,
    mode_factors: dict[str, float] | None = None,
) -> EnergyEstimate:
    """Weekly cloud cost of a processing service::

        machine_power * hours_per_week
        + encodings_per_week * hours_per_encoding * server_power
        + frame_rate * transport

    Serves the private and the public destination alike; only the supplied
    server and path differ.
    """
    _require_class(job, ("processing",), "processing_cloud_energy")
    intensity = transport_intensity(path) if transport_override is None else transport_override
    local = machine.active_power_w * job.hours_per_week
    encoding = job.encodings_per_week * job.hours_per_encoding * server.effective_power_w(mode_factors)
    transport = job.frame_rate_mbps * intensity
    value = local + encoding + transport
    terms = (
        ("local_machine_wh", local),
        ("encoding_wh", encoding),
        ("transport_w", transport),
    )
    return EnergyEstimate(destination, value, terms)


def processing_local_energy(job: JobProfile, machine: MachineSpec) -> EnergyEstimate:
    """Weekly local cost of a processing service: machine_power * hours_per_week."""
    _require_class(job, ("processing",), "processing_local_energy")
    value = machine.active_power_w * job.hours_per_week
    return EnergyEstimate("local", value, (("local_machine_wh", value),))


def estimate(
    job: JobProfile,
    infra: InfrastructureSpec,
    destination: str,
    mode_factors: dict[str, float] | None = None,
) -> EnergyEstimate:
    """Dispatch to the class-appropriate formula for one destination."""
    if destination not in DESTINATIONS:
        raise UnboundDestination(f"unknown destination {destination!r}")
    machine = infra.client_machine
    if destination == "local":
        if job.service_class == "processing":
            return processing_local_energy(job, machine)
        return storage_local_power(job, machine)

    path = infra.path_for(destination)
    override = (
        infra.transport_override_j_per_mb if destination == "public" else None
    )
    if job.service_class == "storage":
        return storage_cloud_power(job, path, destination, transport_override=override)
    server = infra.server_for(job.service_class)
    if job.service_class == "software":
        return software_cloud_power(
            job, machine, server, path, destination,
            transport_override=override, mode_factors=mode_factors,
        )
    return processing_cloud_energy(
        job, machine, server, path, destination,
        transport_override=override, mode_factors=mode_factors,
    )


def estimate_all(
    job: JobProfile,
    infra: InfrastructureSpec,
    mode_factors: dict[str, float] | None = None,
) -> dict[str, EnergyEstimate]:
    """Estimates for all three destinations, keyed by destination."""
    return {d: estimate(job, infra, d, mode_factors) for d in DESTINATIONS}


def scaled_job(job: JobProfile, **overrides) -> JobProfile:
    """Copy a job with some workload fields replaced (what-if sweeps)."""
    return replace(job, **overrides)
