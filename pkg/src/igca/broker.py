"""Simulated green broker: carbon directory, offer directory, greenest-offer selection.

The carbon emission directory (CED) holds per-provider energy and grid
intensity figures; the offer directory holds purchasable service offers
with price, QoS tier, availability and optional green windows (UTC hours in
which the offer runs on its cleanest supply). Selection filters offers by
the job's policy, discounts carbon rates inside an active green window, and
returns the argmin by carbon rate with price and offer id as tie-breakers.

Directories persist in one XML file following the registry conventions::

    <greenbroker version="1">
      <ced> <csp id class carbonGPerKwh energyKwhPerUnitHour region/> </ced>
      <offers>
        <offer id csp class price qos availability>
          <window startHour endHour/>
        </offer>
      </offers>
    </greenbroker>
"""

from __future__ import annotations

import os
import tempfile
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

from igca.energy import SERVICE_CLASSES
from igca.policy import QOS_ORDER, PolicyEnvelope

DEFAULT_GREEN_WINDOW_DISCOUNT = 0.8


class BrokerError(Exception):
    """Base class for broker failures."""


class UnlistedCsp(BrokerError):
    """An offer references a provider/class pair missing from the CED."""


class NoOffer(BrokerError):
    """No offer exists for the requested service class."""


class NoCompliantOffer(BrokerError):
    """Offers exist but none passes the policy predicates."""


class DirectoryError(BrokerError):
    """Broker directory file missing or malformed."""


@dataclass(frozen=True)
class CspRecord:
    csp_id: str
    service_class: str
    carbon_intensity_g_per_kwh: float
    energy_kwh_per_unit_hour: float
    region: str = ""

    def validate(self) -> None:
        if not self.csp_id:
            raise ValueError("csp_id must be non-empty")
        if self.service_class not in SERVICE_CLASSES:
            raise ValueError(f"csp {self.csp_id}: unknown service class {self.service_class!r}")
        if self.carbon_intensity_g_per_kwh < 0:
            raise ValueError(f"csp {self.csp_id}: carbon intensity must be >= 0")
        if self.energy_kwh_per_unit_hour <= 0:
            raise ValueError(f"csp {self.csp_id}: energy per unit-hour must be > 0")


@dataclass(frozen=True)
class GreenWindow:
    start_hour: int
    end_hour: int

    def contains(self, hour: int) -> bool:
        return self.start_hour <= hour < self.end_hour

    def validate(self) -> None:
        if not (0 <= self.start_hour < self.end_hour <= 24):
            raise ValueError(f"green window must satisfy 0 <= start < end <= 24, got {self.start_hour}..{self.end_hour}")


@dataclass(frozen=True)
class GreenOffer:
    offer_id: str
    csp_id: str
    service_class: str
    price: float
    qos_tier: str = "bronze"
    availability: float = 0.0
    green_windows: tuple[GreenWindow, ...] = ()

    def in_green_window(self, hour: int) -> bool:
        return any(w.contains(hour) for w in self.green_windows)

    def validate(self) -> None:
        if not self.offer_id:
            raise ValueError("offer_id must be non-empty")
        if self.service_class not in SERVICE_CLASSES:
            raise ValueError(f"offer {self.offer_id}: unknown service class {self.service_class!r}")
        if self.qos_tier not in QOS_ORDER:
            raise ValueError(f"offer {self.offer_id}: unknown qos tier {self.qos_tier!r}")
        if self.price < 0:
            raise ValueError(f"offer {self.offer_id}: price must be >= 0")
        if not 0.0 <= self.availability <= 1.0:
            raise ValueError(f"offer {self.offer_id}: availability must be within 0..1")
        for window in self.green_windows:
            window.validate()


@dataclass(frozen=True)
class BrokerDirectory:
    ced: tuple[CspRecord, ...] = ()
    offers: tuple[GreenOffer, ...] = ()


def carbon_rate(offer: GreenOffer, ced: tuple[CspRecord, ...] | list[CspRecord]) -> float:
    """Grams of CO2 per hour for the offer: grid intensity times unit energy."""
    for record in ced:
        if record.csp_id == offer.csp_id and record.service_class == offer.service_class:
            return record.carbon_intensity_g_per_kwh * record.energy_kwh_per_unit_hour
    raise UnlistedCsp(f"csp {offer.csp_id!r} has no {offer.service_class!r} record in the CED")


def effective_carbon_rate(
    offer: GreenOffer,
    ced,
    at_hour: int,
    discount: float = DEFAULT_GREEN_WINDOW_DISCOUNT,
) -> float:
    """Carbon rate with the green-window discount applied when active."""
    rate = carbon_rate(offer, ced)
    if offer.in_green_window(at_hour):
        return rate * discount
    return rate


def offer_is_compliant(offer: GreenOffer, policy: PolicyEnvelope) -> bool:
    return (
        offer.price <= policy.budget
        and QOS_ORDER[offer.qos_tier] >= QOS_ORDER[policy.qos_tier]
        and offer.availability >= policy.availability_req
    )


def select_greenest(
    service_class: str,
    policy: PolicyEnvelope,
    ced,
    offers,
    at_hour: int,
    discount: float = DEFAULT_GREEN_WINDOW_DISCOUNT,
) -> GreenOffer:
    """Least-carbon compliant offer of the class; ties break by price, then id."""
    of_class = [o for o in offers if o.service_class == service_class]
    if not of_class:
        raise NoOffer(f"no offers for service class {service_class!r}")
    compliant = [o for o in of_class if offer_is_compliant(o, policy)]
    if not compliant:
        raise NoCompliantOffer(f"no {service_class!r} offer satisfies the policy")
    return min(
        compliant,
        key=lambda o: (effective_carbon_rate(o, ced, at_hour, discount), o.price, o.offer_id),
    )


# ---------------------------------------------------------------------------
# XML persistence

def _num(value: float | int) -> str:
    f = float(value)
    if f == int(f) and abs(f) < 1e15:
        return str(int(f))
    return repr(f)


def _attr(value) -> str:
    return escape(str(value), {'"': "&quot;"})


def dumps_directory(directory: BrokerDirectory) -> str:
    out = ['<?xml version="1.0" encoding="UTF-8"?>', '<greenbroker version="1">']
    if directory.ced:
        out.append("  <ced>")
        for record in directory.ced:
            out.append(
                f'    <csp id="{_attr(record.csp_id)}" class="{_attr(record.service_class)}"'
                f' carbonGPerKwh="{_num(record.carbon_intensity_g_per_kwh)}"'
                f' energyKwhPerUnitHour="{_num(record.energy_kwh_per_unit_hour)}"'
                f' region="{_attr(record.region)}"/>'
            )
        out.append("  </ced>")
    else:
        out.append("  <ced/>")
    if directory.offers:
        out.append("  <offers>")
        for offer in directory.offers:
            head = (
                f'    <offer id="{_attr(offer.offer_id)}" csp="{_attr(offer.csp_id)}"'
                f' class="{_attr(offer.service_class)}" price="{_num(offer.price)}"'
                f' qos="{_attr(offer.qos_tier)}" availability="{_num(offer.availability)}"'
            )
            if offer.green_windows:
                out.append(head + ">")
                for window in offer.green_windows:
                    out.append(
                        f'      <window startHour="{int(window.start_hour)}" endHour="{int(window.end_hour)}"/>'
                    )
                out.append("    </offer>")
            else:
                out.append(head + "/>")
        out.append("  </offers>")
    else:
        out.append("  <offers/>")
    out.append("</greenbroker>")
    return "\n".join(out) + "\n"


def save_directory(directory: BrokerDirectory, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = dumps_directory(directory).encode("utf-8")
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


def _check_attrs(elem: ET.Element, required: tuple[str, ...], optional: tuple[str, ...] = ()) -> dict[str, str]:
    allowed = set(required) | set(optional)
    extra = set(elem.attrib) - allowed
    if extra:
        raise DirectoryError(f"<{elem.tag}>: unknown attribute(s) {sorted(extra)}")
    missing = [a for a in required if a not in elem.attrib]
    if missing:
        raise DirectoryError(f"<{elem.tag}>: missing attribute(s) {missing}")
    return dict(elem.attrib)


def loads_directory(text: str | bytes) -> BrokerDirectory:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        line, column = exc.position
        raise DirectoryError(f"malformed XML at line {line}, column {column}: {exc.msg}") from exc
    if root.tag != "greenbroker":
        raise DirectoryError(f"root element must be <greenbroker>, got <{root.tag}>")
    attrs = _check_attrs(root, ("version",))
    if attrs["version"] != "1":
        raise DirectoryError(f"<greenbroker>: unsupported version {attrs['version']!r}")

    ced: list[CspRecord] = []
    offers: list[GreenOffer] = []
    for child in root:
        if child.tag == "ced":
            for sub in child:
                if sub.tag != "csp":
                    raise DirectoryError(f"unknown element <{sub.tag}> under <ced>")
                cattrs = _check_attrs(sub, ("id", "class", "carbonGPerKwh", "energyKwhPerUnitHour"), ("region",))
                record = CspRecord(
                    csp_id=cattrs["id"],
                    service_class=cattrs["class"],
                    carbon_intensity_g_per_kwh=float(cattrs["carbonGPerKwh"]),
                    energy_kwh_per_unit_hour=float(cattrs["energyKwhPerUnitHour"]),
                    region=cattrs.get("region", ""),
                )
                _validate(record)
                ced.append(record)
        elif child.tag == "offers":
            for sub in child:
                if sub.tag != "offer":
                    raise DirectoryError(f"unknown element <{sub.tag}> under <offers>")
                oattrs = _check_attrs(sub, ("id", "csp", "class", "price", "qos", "availability"))
                windows = []
                for wsub in sub:
                    if wsub.tag != "window":
                        raise DirectoryError(f"unknown element <{wsub.tag}> under <offer>")
                    wattrs = _check_attrs(wsub, ("startHour", "endHour"))
                    windows.append(GreenWindow(int(wattrs["startHour"]), int(wattrs["endHour"])))
                offer = GreenOffer(
                    offer_id=oattrs["id"],
                    csp_id=oattrs["csp"],
                    service_class=oattrs["class"],
                    price=float(oattrs["price"]),
                    qos_tier=oattrs["qos"],
                    availability=float(oattrs["availability"]),
                    green_windows=tuple(windows),
                )
                _validate(offer)
                offers.append(offer)
        else:
            raise DirectoryError(f"unknown element <{child.tag}> under <greenbroker>")
    return BrokerDirectory(ced=tuple(ced), offers=tuple(offers))


def _validate(obj) -> None:
    try:
        obj.validate()
    except ValueError as exc:
        raise DirectoryError(str(exc)) from exc


def load_directory(path: str | Path) -> BrokerDirectory:
    path = Path(path)
    if not path.exists():
        raise DirectoryError(f"broker directory file not found: {path}")
    return loads_directory(path.read_bytes())
