"""Resident placement router: TCP line protocol, HTTP management API, event feed.

Wire protocol (UTF-8, one JSON object per line, responses in request order
per connection)::

    request   {"type": "route", "jobId": "...", "clientId": "...", "cachedRevision": 3}
    response  {"type": "decision", "jobId": "...", "action": "EXECUTE_LOCAL",
               "cacheable": true, "registryRevision": 3}
    error     {"type": "error", "code": "NO_GREEN_OFFER", "message": "..."}

Actions are EXECUTE_LOCAL, EXECUTE_PRIVATE (carries ``server``),
EXECUTE_PUBLIC (carries ``offerId``) and UNKNOWN_JOB. Only EXECUTE_LOCAL is
cacheable: a client may keep answering identical requests itself until it
observes a response with a newer registry revision.

Every handled request appends to an in-process event feed consumed by the
console over ``GET /events`` (server-sent events):

- routed local/private: one ``decision`` event
- routed public: ``broker_selection`` then ``decision``
- unknown job: ``unknown_job_notice`` then ``manager_notice``
- no green offer: one ``manager_notice`` plus the error frame

The HTTP API (JSON over HTTP/1.1) exposes the registry and the what-if
estimator; mutations are serialized through a single writer and bump the
registry revision; reads work on immutable snapshots reloaded only when the
file on disk changes.
"""

from __future__ import annotations

import json
import os
import socketserver
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable
from urllib.parse import parse_qs, urlparse

from igca import broker, registry
from igca.decision import NoCompliantDestination, PlacementDecision, decide
from igca.energy import (
    DESTINATIONS,
    ClassMismatch,
    EnergyEstimate,
    InfrastructureSpec,
    JobProfile,
    MachineSpec,
    NetworkElement,
    ServerSpec,
    TransportPath,
    UnboundDestination,
    estimate,
)
from igca.policy import PolicyEnvelope, Thresholds, compliant_destinations, significance_flags

DEFAULT_TCP_PORT = 7421
DEFAULT_HTTP_PORT = 7422

ENV_REGISTRY = "IGCA_REGISTRY"
ENV_BROKER_DIR = "IGCA_BROKER_DIR"
ENV_TCP_PORT = "IGCA_PORT"
ENV_HTTP_PORT = "IGCA_HTTP_PORT"

ACTION_LOCAL = "EXECUTE_LOCAL"
ACTION_PRIVATE = "EXECUTE_PRIVATE"
ACTION_PUBLIC = "EXECUTE_PUBLIC"
ACTION_UNKNOWN = "UNKNOWN_JOB"


class NoGreenOffer(Exception):
    """Public placement could not be backed by any (compliant) offer."""

    code = "NO_GREEN_OFFER"


@dataclass(frozen=True)
class RouteRequest:
    job_id: str
    client_id: str
    cached_revision: int | None = None


@dataclass(frozen=True)
class RouteResponse:
    action: str
    server_id: str | None = None
    offer_id: str | None = None
    cacheable: bool = False
    registry_revision: int = 0

    def to_frame(self, job_id: str) -> dict:
        frame: dict = {"type": "decision", "jobId": job_id, "action": self.action}
        if self.server_id is not None:
            frame["server"] = self.server_id
        if self.offer_id is not None:
            frame["offerId"] = self.offer_id
        frame["cacheable"] = self.cacheable
        frame["registryRevision"] = self.registry_revision
        return frame


@dataclass(frozen=True)
class Event:
    seq: int
    kind: str
    payload: dict
    at: str

    def to_json(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "payload": self.payload, "at": self.at}


class EventLog:
    """Append-only feed with strictly increasing, gap-free sequence numbers."""

    def __init__(self, clock: Callable[[], datetime] | None = None):
        self._events: list[Event] = []
        self._cond = threading.Condition()
        self._clock = clock or (lambda: datetime.now(timezone.utc))

    def append(self, kind: str, payload: dict) -> Event:
        with self._cond:
            at = self._clock().astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
            event = Event(seq=len(self._events) + 1, kind=kind, payload=payload, at=at)
            self._events.append(event)
            self._cond.notify_all()
            return event

    def since(self, seq: int) -> list[Event]:
        with self._cond:
            return self._events[seq:]

    def wait_beyond(self, seq: int, timeout: float) -> bool:
        with self._cond:
            return self._cond.wait_for(lambda: len(self._events) > seq, timeout)

    def __len__(self) -> int:
        with self._cond:
            return len(self._events)


def client_cache_check(
    cached_action: str,
    cached_revision: int,
    last_seen_revision: int | None,
) -> str:
    """Client-side contract for reusing a cached routing answer.

    Only EXECUTE_LOCAL answers are cacheable, and only while the client has
    not observed a registry revision newer than the one the answer carried.
    """
    if cached_action != ACTION_LOCAL:
        return "revalidate"
    if last_seen_revision is not None and last_seen_revision > cached_revision:
        return "revalidate"
    return "serve_from_cache"


class ClientCache:
    """Tiny reference client cache honoring the revision-invalidation rule."""

    def __init__(self):
        self._entries: dict[str, tuple[str, int]] = {}
        self._last_seen: int | None = None

    def observe(self, frame: dict) -> None:
        revision = frame.get("registryRevision")
        if revision is None:
            return
        if self._last_seen is not None and revision > self._last_seen:
            self._entries.clear()
        self._last_seen = revision if self._last_seen is None else max(self._last_seen, revision)
        if frame.get("cacheable"):
            self._entries[frame["jobId"]] = (frame["action"], revision)

    def check(self, job_id: str) -> str:
        if job_id not in self._entries:
            return "revalidate"
        action, revision = self._entries[job_id]
        return client_cache_check(action, revision, self._last_seen)


def handle_request(
    req: RouteRequest,
    reg: registry.RegistryFile,
    broker_dir: broker.BrokerDirectory | None,
    events: EventLog,
    at_hour: int,
    discount: float = broker.DEFAULT_GREEN_WINDOW_DISCOUNT,
) -> RouteResponse:
    """Resolve one routing request against a registry snapshot.

    Raises NoGreenOffer (after emitting a manager notice) when a public
    placement cannot be matched with an offer.
    """
    try:
        entry = registry.lookup(reg, req.job_id)
    except registry.NotRegistered:
        events.append("unknown_job_notice", {"jobId": req.job_id, "clientId": req.client_id})
        events.append(
            "manager_notice",
            {"jobId": req.job_id, "clientId": req.client_id, "reason": "unknown job"},
        )
        return RouteResponse(ACTION_UNKNOWN, registry_revision=reg.revision)

    destination = entry.destination
    if destination.kind == "local":
        response = RouteResponse(ACTION_LOCAL, cacheable=True, registry_revision=reg.revision)
    elif destination.kind == "private":
        response = RouteResponse(
            ACTION_PRIVATE, server_id=destination.server_id, registry_revision=reg.revision
        )
    else:
        if broker_dir is None:
            events.append(
                "manager_notice",
                {"jobId": req.job_id, "clientId": req.client_id, "reason": "no broker directory configured"},
            )
            raise NoGreenOffer("no broker directory configured")
        try:
            offer = broker.select_greenest(
                entry.job.service_class, entry.policy, broker_dir.ced, broker_dir.offers,
                at_hour, discount,
            )
        except (broker.NoOffer, broker.NoCompliantOffer) as exc:
            events.append(
                "manager_notice",
                {"jobId": req.job_id, "clientId": req.client_id, "reason": str(exc)},
            )
            raise NoGreenOffer(str(exc)) from exc
        events.append(
            "broker_selection",
            {
                "jobId": req.job_id,
                "offerId": offer.offer_id,
                "cspId": offer.csp_id,
                "carbonRate": broker.effective_carbon_rate(offer, broker_dir.ced, at_hour, discount),
                "atHour": at_hour,
            },
        )
        response = RouteResponse(
            ACTION_PUBLIC, offer_id=offer.offer_id, registry_revision=reg.revision
        )

    payload: dict = {"jobId": req.job_id, "clientId": req.client_id, "action": response.action}
    if response.server_id is not None:
        payload["server"] = response.server_id
    if response.offer_id is not None:
        payload["offerId"] = response.offer_id
    payload["registryRevision"] = response.registry_revision
    events.append("decision", payload)
    return response


# ---------------------------------------------------------------------------
# stores

class RegistryStore:
    """Single-writer registry access with change-detection reloads."""

    def __init__(self, path: str | Path):
        self._path = Path(path)
        self._lock = threading.RLock()
        self._reg = registry.load(self._path)
        self._stamp = self._stat()

    def _stat(self):
        st = os.stat(self._path)
        return (st.st_mtime_ns, st.st_size, st.st_ino)

    @property
    def path(self) -> Path:
        return self._path

    def snapshot(self) -> registry.RegistryFile:
        with self._lock:
            try:
                stamp = self._stat()
            except FileNotFoundError:
                return self._reg
            if stamp != self._stamp:
                self._reg = registry.load(self._path)
                self._stamp = stamp
            return self._reg

    def mutate(self, fn: Callable[[registry.RegistryFile], registry.RegistryFile]) -> registry.RegistryFile:
        with self._lock:
            updated = fn(self.snapshot())
            registry.save(updated, self._path)
            self._reg = updated
            self._stamp = self._stat()
            return updated


class BrokerStore:
    def __init__(self, path: str | Path | None):
        self._path = Path(path) if path else None
        self._lock = threading.RLock()
        self._directory = broker.load_directory(self._path) if self._path else None
        self._stamp = self._stat() if self._path else None

    def _stat(self):
        st = os.stat(self._path)
        return (st.st_mtime_ns, st.st_size, st.st_ino)

    def snapshot(self) -> broker.BrokerDirectory | None:
        with self._lock:
            if self._path is None:
                return None
            try:
                stamp = self._stat()
            except FileNotFoundError:
                return self._directory
            if stamp != self._stamp:
                self._directory = broker.load_directory(self._path)
                self._stamp = stamp
            return self._directory


# ---------------------------------------------------------------------------
# JSON codecs shared by the HTTP API and the CLI

def estimate_to_json(est: EnergyEstimate) -> dict:
    return {
        "destination": est.destination,
        "value": est.value,
        "combine": est.combine,
        "terms": dict(est.terms),
    }


def entry_to_json(entry: registry.RegistryEntry) -> dict:
    job = entry.job
    destination: dict = {"type": entry.destination.kind}
    if entry.destination.server_id is not None:
        destination["server"] = entry.destination.server_id
    return {
        "id": job.job_id,
        "name": job.name,
        "dept": job.dept,
        "class": job.service_class,
        "frequency": job.frequency,
        "profile": {
            "fileSizeGb": job.file_size_gb,
            "downloadsPerHour": job.downloads_per_hour,
            "users": job.users,
            "frameRateMbps": job.frame_rate_mbps,
            "encodingsPerWeek": job.encodings_per_week,
            "hoursPerEncoding": job.hours_per_encoding,
            "hoursPerWeek": job.hours_per_week,
            "bandwidthMbps": job.bandwidth_mbps,
        },
        "policy": {
            "securityLevel": entry.policy.security_level,
            "qos": entry.policy.qos_tier,
            "budget": entry.policy.budget,
            "availability": entry.policy.availability_req,
        },
        "destination": destination,
        "audit": {
            "confirmedBy": entry.confirmed_by,
            "confirmedAt": registry.format_timestamp(entry.confirmed_at),
        },
    }


def job_from_json(body: dict) -> JobProfile:
    profile = body.get("profile", {})
    return JobProfile(
        job_id=body.get("id", ""),
        service_class=body.get("class", ""),
        name=body.get("name", ""),
        dept=body.get("dept", ""),
        frequency=body.get("frequency", "intermittent"),
        file_size_gb=float(profile.get("fileSizeGb", 0.0)),
        downloads_per_hour=float(profile.get("downloadsPerHour", 0.0)),
        users=int(profile.get("users", 0)),
        frame_rate_mbps=float(profile.get("frameRateMbps", 0.0)),
        encodings_per_week=int(profile.get("encodingsPerWeek", 0)),
        hours_per_encoding=float(profile.get("hoursPerEncoding", 0.0)),
        hours_per_week=float(profile.get("hoursPerWeek", 0.0)),
        bandwidth_mbps=float(profile.get("bandwidthMbps", 0.0)),
    )


def policy_from_json(body: dict) -> PolicyEnvelope:
    return PolicyEnvelope(
        security_level=int(body.get("securityLevel", 1)),
        qos_tier=body.get("qos", "bronze"),
        budget=float(body.get("budget", 0.0)),
        availability_req=float(body.get("availability", 0.0)),
    )


def infra_to_json(infra: InfrastructureSpec, thresholds: Thresholds) -> dict:
    paths = {}
    content_server = 0.0
    for scope in sorted(infra.paths):
        path = infra.paths[scope]
        content_server = path.content_server_j_per_mb
        paths[scope] = [
            {"name": e.name, "powerW": e.power_w, "capacityMbps": e.capacity_mbps}
            for e in path.elements
        ]
    return {
        "machines": [
            {"id": m.id, "powerW": m.active_power_w, "diskGb": m.disk_capacity_gb, "diskPowerW": m.disk_power_w}
            for m in infra.machines
        ],
        "servers": [
            {
                "id": s.id,
                "function": s.function,
                "frequency": s.usage_frequency,
                "mode": s.mode,
                "capacityMbps": s.capacity_mbps,
                "powerW": s.power_w,
                "diskGb": s.disk_capacity_gb,
                "diskPowerW": s.disk_power_w,
                "users": s.concurrent_users,
            }
            for s in infra.servers
        ],
        "paths": paths,
        "coefficients": {
            "contentServerJPerMb": content_server,
            "transportOverrideJPerMb": infra.transport_override_j_per_mb,
        },
        "thresholds": {
            "highFrameRateMbps": thresholds.high_frame_rate_mbps,
            "fewUsersPerServer": thresholds.few_users_per_server,
            "lowDownloadsPerHour": thresholds.low_downloads_per_hour,
            "highDownloadsPerHour": thresholds.high_downloads_per_hour,
            "mediumEncodingsPerWeek": thresholds.medium_encodings_per_week,
        },
    }


def infra_from_json(body: dict) -> tuple[InfrastructureSpec, Thresholds]:
    machines = tuple(
        MachineSpec(
            id=m["id"],
            active_power_w=float(m["powerW"]),
            disk_capacity_gb=float(m["diskGb"]),
            disk_power_w=float(m["diskPowerW"]),
        )
        for m in body.get("machines", [])
    )
    servers = tuple(
        ServerSpec(
            id=s["id"],
            function=s.get("function", "processing"),
            usage_frequency=s.get("frequency", "continuous"),
            mode=s.get("mode", "heavy_duty"),
            capacity_mbps=float(s.get("capacityMbps", 0.0)),
            power_w=float(s.get("powerW", 0.0)),
            disk_capacity_gb=float(s.get("diskGb", 1.0)),
            disk_power_w=float(s.get("diskPowerW", 0.0)),
            concurrent_users=int(s.get("users", 1)),
        )
        for s in body.get("servers", [])
    )
    coefficients = body.get("coefficients", {})
    content_server = float(coefficients.get("contentServerJPerMb", 0.0))
    override = coefficients.get("transportOverrideJPerMb")
    paths = {
        scope: TransportPath(
            tuple(
                NetworkElement(e["name"], float(e["powerW"]), float(e["capacityMbps"]))
                for e in elements
            ),
            content_server_j_per_mb=content_server,
        )
        for scope, elements in body.get("paths", {}).items()
    }
    thresh_body = body.get("thresholds", {})
    defaults = Thresholds()
    thresholds = Thresholds(
        high_frame_rate_mbps=float(thresh_body.get("highFrameRateMbps", defaults.high_frame_rate_mbps)),
        few_users_per_server=float(thresh_body.get("fewUsersPerServer", defaults.few_users_per_server)),
        low_downloads_per_hour=float(thresh_body.get("lowDownloadsPerHour", defaults.low_downloads_per_hour)),
        high_downloads_per_hour=float(thresh_body.get("highDownloadsPerHour", defaults.high_downloads_per_hour)),
        medium_encodings_per_week=float(thresh_body.get("mediumEncodingsPerWeek", defaults.medium_encodings_per_week)),
    )
    for machine in machines:
        machine.validate()
    for server in servers:
        server.validate()
    infra = InfrastructureSpec(
        machines=machines,
        servers=servers,
        paths=paths,
        transport_override_j_per_mb=float(override) if override is not None else None,
    )
    return infra, thresholds


def advisory_to_json(advisory) -> dict:
    return {
        "serviceClass": advisory.service_class,
        "component": advisory.energy_component,
        "deployment": advisory.deployment,
        "significance": advisory.significance,
        "condition": advisory.condition,
        "triggered": advisory.triggered,
    }


def offer_to_json(offer: broker.GreenOffer, rate: float | None = None) -> dict:
    body: dict = {
        "offerId": offer.offer_id,
        "cspId": offer.csp_id,
        "class": offer.service_class,
        "price": offer.price,
        "qos": offer.qos_tier,
        "availability": offer.availability,
        "greenWindows": [{"startHour": w.start_hour, "endHour": w.end_hour} for w in offer.green_windows],
    }
    if rate is not None:
        body["carbonRate"] = rate
    return body


def decision_to_json(decision: PlacementDecision, revision: int, offer_json: dict | None = None) -> dict:
    body: dict = {
        "jobId": decision.job_id,
        "registryRevision": revision,
        "estimates": {d: estimate_to_json(decision.estimates[d]) for d in DESTINATIONS},
        "compliant": [d for d in DESTINATIONS if d in decision.compliant],
        "recommendation": decision.chosen,
        "rationale": list(decision.rationale),
        "advisories": [advisory_to_json(a) for a in decision.advisories],
    }
    if offer_json is not None:
        body["offer"] = offer_json
    return body


# ---------------------------------------------------------------------------
# the service

@dataclass
class ServiceConfig:
    registry_path: str | Path
    broker_path: str | Path | None = None
    host: str = "127.0.0.1"
    tcp_port: int = DEFAULT_TCP_PORT
    http_port: int = DEFAULT_HTTP_PORT
    green_window_discount: float = broker.DEFAULT_GREEN_WINDOW_DISCOUNT
    clock: Callable[[], datetime] | None = None


class MiddlewareService:
    """Hosts the TCP router and the HTTP management API over shared state."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.registry = RegistryStore(config.registry_path)
        self.broker = BrokerStore(config.broker_path)
        self.clock = config.clock or (lambda: datetime.now(timezone.utc))
        self.events = EventLog(self.clock)
        self.running = False

        self._tcp = _RoutingServer((config.host, config.tcp_port), _RoutingHandler)
        self._tcp.service = self
        self._http = _ApiServer((config.host, config.http_port), _ApiHandler)
        self._http.service = self
        self._threads: list[threading.Thread] = []

    @property
    def tcp_port(self) -> int:
        return self._tcp.server_address[1]

    @property
    def http_port(self) -> int:
        return self._http.server_address[1]

    def at_hour(self) -> int:
        return self.clock().astimezone(timezone.utc).hour

    def start(self) -> None:
        self.running = True
        for server, name in ((self._tcp, "igca-tcp"), (self._http, "igca-http")):
            thread = threading.Thread(target=server.serve_forever, kwargs={"poll_interval": 0.1},
                                      name=name, daemon=True)
            thread.start()
            self._threads.append(thread)

    def stop(self) -> None:
        self.running = False
        for server in (self._tcp, self._http):
            server.shutdown()
            server.server_close()
        for thread in self._threads:
            thread.join(timeout=2.0)
        self._threads.clear()

    def __enter__(self) -> "MiddlewareService":
        self.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.stop()


class _RoutingServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True
    service: MiddlewareService


class _RoutingHandler(socketserver.StreamRequestHandler):
    def _send(self, frame: dict) -> None:
        self.wfile.write((json.dumps(frame, separators=(",", ":")) + "\n").encode("utf-8"))
        self.wfile.flush()

    def handle(self) -> None:
        service: MiddlewareService = self.server.service
        for raw in self.rfile:
            line = raw.strip()
            if not line:
                continue
            try:
                message = json.loads(line)
            except json.JSONDecodeError as exc:
                self._send({"type": "error", "code": "PARSE_ERROR", "message": str(exc)})
                continue
            if not isinstance(message, dict) or message.get("type") != "route":
                self._send({"type": "error", "code": "BAD_REQUEST", "message": "expected a route request"})
                continue
            job_id = message.get("jobId")
            client_id = message.get("clientId")
            if not job_id or not client_id:
                self._send({"type": "error", "code": "BAD_REQUEST", "message": "jobId and clientId are required"})
                continue
            request = RouteRequest(
                job_id=job_id,
                client_id=client_id,
                cached_revision=message.get("cachedRevision"),
            )
            snapshot = service.registry.snapshot()
            try:
                response = handle_request(
                    request, snapshot, service.broker.snapshot(), service.events,
                    service.at_hour(), service.config.green_window_discount,
                )
            except NoGreenOffer as exc:
                self._send({"type": "error", "code": exc.code, "message": str(exc)})
                continue
            self._send(response.to_frame(job_id))


class _ApiServer(ThreadingHTTPServer):
    allow_reuse_address = True
    daemon_threads = True
    service: MiddlewareService


class _ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class _ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "igca"

    def log_message(self, format: str, *args) -> None:  # noqa: A002 - stdlib signature
        pass

    @property
    def service(self) -> MiddlewareService:
        return self.server.service

    # -- plumbing ----------------------------------------------------------

    def _json_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0) or 0)
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        try:
            body = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise _ApiError(422, "BAD_JSON", f"request body is not valid JSON: {exc}")
        if not isinstance(body, dict):
            raise _ApiError(422, "BAD_JSON", "request body must be a JSON object")
        return body

    def _reply(self, status: int, body: dict) -> None:
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(data)

    def _fail(self, error: _ApiError) -> None:
        self._reply(error.status, {"error": {"code": error.code, "message": error.message}})

    def _dispatch(self, method: str) -> None:
        parsed = urlparse(self.path)
        parts = [p for p in parsed.path.split("/") if p]
        try:
            handler = self._route(method, parts, parse_qs(parsed.query))
        except _ApiError as exc:
            self._fail(exc)
            return
        except BrokenPipeError:
            return
        if handler is not None:
            self._reply(*handler)

    def do_GET(self) -> None:
        self._dispatch("GET")

    def do_POST(self) -> None:
        self._dispatch("POST")

    def do_PUT(self) -> None:
        self._dispatch("PUT")

    def do_OPTIONS(self) -> None:
        # CORS preflight: the console may be served from a different origin
        # than the API (intranet tool, no auth layer by design).
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type, Last-Event-ID")
        self.send_header("Content-Length", "0")
        self.end_headers()

    # -- routing -----------------------------------------------------------

    def _route(self, method: str, parts: list[str], query: dict) -> tuple[int, dict] | None:
        if method == "GET" and parts == ["health"]:
            snapshot = self.service.registry.snapshot()
            return 200, {
                "status": "ok",
                "registryRevision": snapshot.revision,
                "eventCount": len(self.service.events),
            }
        if method == "GET" and parts == ["jobs"]:
            snapshot = self.service.registry.snapshot()
            return 200, {
                "registryRevision": snapshot.revision,
                "jobs": [entry_to_json(e) for e in snapshot.entries],
            }
        if method == "POST" and parts == ["jobs"]:
            return self._create_job()
        if method == "GET" and len(parts) == 2 and parts[0] == "jobs":
            snapshot = self.service.registry.snapshot()
            entry = self._entry_or_404(snapshot, parts[1])
            return 200, {"registryRevision": snapshot.revision, "entry": entry_to_json(entry)}
        if method == "POST" and len(parts) == 3 and parts[0] == "jobs" and parts[2] == "estimate":
            return self._estimate_job(parts[1])
        if method == "PUT" and len(parts) == 3 and parts[0] == "jobs" and parts[2] == "destination":
            return self._set_destination(parts[1])
        if method == "GET" and parts == ["infrastructure"]:
            snapshot = self.service.registry.snapshot()
            return 200, {
                "registryRevision": snapshot.revision,
                "infrastructure": infra_to_json(snapshot.infrastructure, snapshot.thresholds),
            }
        if method == "PUT" and parts == ["infrastructure"]:
            return self._put_infrastructure()
        if method == "POST" and parts == ["broker", "select"]:
            return self._broker_select()
        if method == "GET" and parts == ["events"]:
            self._stream_events(query)
            return None
        raise _ApiError(404, "NOT_FOUND", f"no such endpoint: {method} /{'/'.join(parts)}")

    def _entry_or_404(self, snapshot: registry.RegistryFile, job_id: str) -> registry.RegistryEntry:
        try:
            return registry.lookup(snapshot, job_id)
        except registry.NotRegistered:
            raise _ApiError(404, "UNKNOWN_JOB", f"job {job_id!r} is not registered")

    def _create_job(self) -> tuple[int, dict]:
        body = self._json_body()
        try:
            job = job_from_json(body)
            policy = policy_from_json(body.get("policy", {}))
            destination_body = body.get("destination", {"type": "local"})
            destination = registry.Destination(
                kind=destination_body.get("type", "local"),
                server_id=destination_body.get("server"),
            )
            entry = registry.RegistryEntry(
                job=job,
                policy=policy,
                destination=destination,
                confirmed_by=body.get("confirmedBy", "api"),
                confirmed_at=self.service.clock().astimezone(timezone.utc).replace(microsecond=0),
            )
        except (TypeError, ValueError) as exc:
            raise _ApiError(422, "INVALID_JOB", str(exc))
        try:
            updated = self.service.registry.mutate(lambda reg: registry.upsert(reg, entry))
        except registry.UnknownServer as exc:
            raise _ApiError(409, "UNKNOWN_SERVER", str(exc))
        except (ValueError, ClassMismatch) as exc:
            raise _ApiError(422, "INVALID_JOB", str(exc))
        return 200, {"registryRevision": updated.revision, "entry": entry_to_json(entry)}

    def _estimate_job(self, job_id: str) -> tuple[int, dict]:
        body = self._json_body()
        snapshot = self.service.registry.snapshot()
        entry = self._entry_or_404(snapshot, job_id)
        job = entry.job
        policy = entry.policy
        try:
            profile_overrides = body.get("profile", {})
            if profile_overrides:
                merged = entry_to_json(entry)["profile"]
                merged.update(profile_overrides)
                job = job_from_json({"id": job.job_id, "class": job.service_class, "name": job.name,
                                     "dept": job.dept, "frequency": job.frequency, "profile": merged})
            if body.get("policy"):
                policy = policy_from_json(body["policy"])
            job.validate()
            job.require_class_fields()
            policy.validate()
        except (TypeError, ValueError, ClassMismatch) as exc:
            raise _ApiError(422, "INVALID_JOB", str(exc))

        at_hour = int(body.get("atHour", self.service.at_hour()))
        directory = self.service.broker.snapshot()
        offer = None
        rate = None
        if directory is not None:
            try:
                offer = broker.select_greenest(
                    job.service_class, policy, directory.ced, directory.offers,
                    at_hour, self.service.config.green_window_discount,
                )
                rate = broker.effective_carbon_rate(
                    offer, directory.ced, at_hour, self.service.config.green_window_discount
                )
            except (broker.NoOffer, broker.NoCompliantOffer):
                offer = None

        try:
            estimates = {d: estimate(job, snapshot.infrastructure, d) for d in DESTINATIONS}
            compliant = compliant_destinations(job, policy, offer)
            advisories = tuple(
                significance_flags(job, "public", snapshot.thresholds)
                + significance_flags(job, "private", snapshot.thresholds)
            )
            decision = decide(job, estimates, compliant, advisories)
        except UnboundDestination as exc:
            raise _ApiError(422, "UNBOUND_DESTINATION", str(exc))
        except NoCompliantDestination as exc:
            raise _ApiError(409, "NO_COMPLIANT_DESTINATION", str(exc))
        offer_json = offer_to_json(offer, rate) if offer is not None else None
        return 200, decision_to_json(decision, snapshot.revision, offer_json)

    def _set_destination(self, job_id: str) -> tuple[int, dict]:
        body = self._json_body()
        snapshot = self.service.registry.snapshot()
        entry = self._entry_or_404(snapshot, job_id)
        if "ifRevision" in body and int(body["ifRevision"]) != snapshot.revision:
            raise _ApiError(
                409, "STALE_REVISION",
                f"registry moved to revision {snapshot.revision}, re-estimate before confirming",
            )
        try:
            destination = registry.Destination(
                kind=body.get("type", ""), server_id=body.get("server")
            )
            destination.validate()
        except ValueError as exc:
            raise _ApiError(422, "INVALID_DESTINATION", str(exc))
        updated_entry = replace(
            entry,
            destination=destination,
            confirmed_by=body.get("confirmedBy", "api"),
            confirmed_at=self.service.clock().astimezone(timezone.utc).replace(microsecond=0),
        )
        try:
            updated = self.service.registry.mutate(lambda reg: registry.upsert(reg, updated_entry))
        except registry.UnknownServer as exc:
            raise _ApiError(409, "UNKNOWN_SERVER", str(exc))
        return 200, {"registryRevision": updated.revision, "entry": entry_to_json(updated_entry)}

    def _put_infrastructure(self) -> tuple[int, dict]:
        body = self._json_body()
        try:
            infra, thresholds = infra_from_json(body)
        except (KeyError, TypeError, ValueError) as exc:
            raise _ApiError(422, "INVALID_INFRASTRUCTURE", str(exc))

        def apply(reg: registry.RegistryFile) -> registry.RegistryFile:
            for entry in reg.entries:
                if entry.destination.kind == "private" and not any(
                    s.id == entry.destination.server_id for s in infra.servers
                ):
                    raise registry.UnknownServer(
                        f"job {entry.job.job_id!r} is placed on missing server {entry.destination.server_id!r}"
                    )
            return replace(reg, revision=reg.revision + 1, infrastructure=infra, thresholds=thresholds)

        try:
            updated = self.service.registry.mutate(apply)
        except registry.UnknownServer as exc:
            raise _ApiError(409, "UNKNOWN_SERVER", str(exc))
        return 200, {"registryRevision": updated.revision}

    def _broker_select(self) -> tuple[int, dict]:
        directory = self.service.broker.snapshot()
        if directory is None:
            raise _ApiError(503, "BROKER_UNAVAILABLE", "no broker directory configured")
        body = self._json_body()
        service_class = body.get("class", "")
        try:
            policy = PolicyEnvelope(
                security_level=1,
                qos_tier=body.get("qos", "bronze"),
                budget=float(body.get("budget", 0.0)),
                availability_req=float(body.get("availability", 0.0)),
            )
            policy.validate()
        except (TypeError, ValueError) as exc:
            raise _ApiError(422, "INVALID_POLICY", str(exc))
        at_hour = int(body.get("atHour", self.service.at_hour()))
        try:
            offer = broker.select_greenest(
                service_class, policy, directory.ced, directory.offers,
                at_hour, self.service.config.green_window_discount,
            )
        except broker.NoOffer as exc:
            raise _ApiError(409, "NO_OFFER", str(exc))
        except broker.NoCompliantOffer as exc:
            raise _ApiError(409, "NO_COMPLIANT_OFFER", str(exc))
        rate = broker.effective_carbon_rate(
            offer, directory.ced, at_hour, self.service.config.green_window_discount
        )
        self.service.events.append(
            "broker_selection",
            {"jobId": None, "offerId": offer.offer_id, "cspId": offer.csp_id,
             "carbonRate": rate, "atHour": at_hour},
        )
        return 200, {"offer": offer_to_json(offer, rate), "atHour": at_hour}

    def _stream_events(self, query: dict) -> None:
        since = 0
        if "since" in query:
            since = int(query["since"][0])
        header_id = self.headers.get("Last-Event-ID")
        if header_id:
            since = max(since, int(header_id))

        self.send_response(200)
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Connection", "close")
        self.end_headers()

        last = since
        try:
            while self.service.running:
                events = self.service.events.since(last)
                if not events:
                    self.service.events.wait_beyond(last, timeout=0.5)
                    continue
                for event in events:
                    data = json.dumps(event.to_json(), separators=(",", ":"))
                    self.wfile.write(f"id: {event.seq}\ndata: {data}\n\n".encode("utf-8"))
                    last = event.seq
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError):
            return
