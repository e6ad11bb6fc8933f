"""Destination gating and significance advisories.

``compliant_destinations`` filters {local, private, public} for one job:
the public cloud is off the table when the job's security level is at the
most restricted grade, when no broker offer is on hand, or when the offer
fails the budget/QoS/availability contract. ``significance_flags`` grades
where the job's energy footprint actually matters (transport, storage or
processing, per deployment) against configurable thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from igca.energy import JobProfile

if TYPE_CHECKING:
    from igca.broker import GreenOffer

QOS_TIERS = ("bronze", "silver", "gold")
QOS_ORDER = {tier: rank for rank, tier in enumerate(QOS_TIERS)}

# security_level 3 is the most restricted grade and forbids the public cloud.
MAX_SECURITY_LEVEL = 3

ENERGY_COMPONENTS = ("transport", "storage", "processing")
DEPLOYMENTS = ("public", "private")


@dataclass(frozen=True)
class PolicyEnvelope:
    """Per-job contract: security grade, QoS tier, monthly budget, availability."""

    security_level: int = 1
    qos_tier: str = "bronze"
    budget: float = 0.0
    availability_req: float = 0.0

    def validate(self) -> None:
        if self.security_level not in (1, 2, 3):
            raise ValueError(f"security_level must be 1..3, got {self.security_level}")
        if self.qos_tier not in QOS_ORDER:
            raise ValueError(f"unknown qos_tier {self.qos_tier!r}")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if not 0.0 <= self.availability_req <= 1.0:
            raise ValueError("availability_req must be within 0..1")


@dataclass(frozen=True)
class Thresholds:
    """Tunable cut-offs for the significance advisories."""

    high_frame_rate_mbps: float = 10.0
    few_users_per_server: float = 50.0
    low_downloads_per_hour: float = 1.0
    high_downloads_per_hour: float = 100.0
    medium_encodings_per_week: float = 5.0


@dataclass(frozen=True)
class Advisory:
    service_class: str
    energy_component: str
    deployment: str
    significance: str  # never | conditional | always
    condition: str
    triggered: bool


def compliant_destinations(
    job: JobProfile,
    policy: PolicyEnvelope,
    offer: "GreenOffer | None" = None,
    *,
    allow_local: bool = True,
    allow_private: bool = True,
) -> set[str]:
    """Destinations the job may run on under its policy.

    ``job`` is part of the contract for per-job allow-lists, which arrive as
    the ``allow_local`` / ``allow_private`` keywords (both default to
    allowed). The public cloud requires a concrete ``offer`` that fits the
    budget, meets or beats the QoS tier and satisfies the availability
    requirement; security level 3 excludes it outright.
    """
    del job  # per-job exclusions are carried by the allow_* keywords
    result: set[str] = set()
    if allow_local:
        result.add("local")
    if allow_private:
        result.add("private")
    if (
        policy.security_level < MAX_SECURITY_LEVEL
        and offer is not None
        and offer.price <= policy.budget
        and QOS_ORDER[offer.qos_tier] >= QOS_ORDER[policy.qos_tier]
        and offer.availability >= policy.availability_req
    ):
        result.add("public")
    return result


# (service_class, component, deployment) -> (significance, condition key).
# Missing keys mean the combination carries no advisory at all.
_SIGNIFICANCE_RULES: dict[tuple[str, str, str], tuple[str, str | None]] = {
    ("software", "transport", "public"): ("conditional", "high_frame_rate"),
    ("software", "transport", "private"): ("never", None),
    ("software", "storage", "public"): ("never", None),
    ("software", "storage", "private"): ("never", None),
    ("software", "processing", "public"): ("conditional", "few_users"),
    ("software", "processing", "private"): ("conditional", "few_users"),
    ("storage", "transport", "public"): ("always", None),
    ("storage", "transport", "private"): ("conditional", "high_downloads"),
    ("storage", "storage", "public"): ("conditional", "low_downloads"),
    ("storage", "storage", "private"): ("conditional", "low_downloads"),
    ("storage", "processing", "public"): ("never", None),
    ("storage", "processing", "private"): ("conditional", "high_downloads"),
    ("processing", "transport", "public"): ("conditional", "medium_encodings"),
    ("processing", "transport", "private"): ("never", None),
    ("processing", "processing", "public"): ("conditional", "medium_encodings"),
    ("processing", "processing", "private"): ("conditional", "medium_encodings"),
}


def _condition(key: str, job: JobProfile, thresholds: Thresholds) -> tuple[str, bool]:
    if key == "high_frame_rate":
        limit = thresholds.high_frame_rate_mbps
        return f"frame_rate_mbps > {limit:g}", job.frame_rate_mbps > limit
    if key == "few_users":
        limit = thresholds.few_users_per_server
        return f"users < {limit:g}", job.users < limit
    if key == "low_downloads":
        limit = thresholds.low_downloads_per_hour
        return f"downloads_per_hour < {limit:g}", job.downloads_per_hour < limit
    if key == "high_downloads":
        limit = thresholds.high_downloads_per_hour
        return f"downloads_per_hour > {limit:g}", job.downloads_per_hour > limit
    if key == "medium_encodings":
        limit = thresholds.medium_encodings_per_week
        return f"encodings_per_week >= {limit:g}", job.encodings_per_week >= limit
    raise KeyError(key)


def significance_flags(
    job: JobProfile,
    deployment: str,
    thresholds: Thresholds | None = None,
) -> list[Advisory]:
    """Advisories for one deployment, in transport/storage/processing order."""
    if deployment not in DEPLOYMENTS:
        raise ValueError(f"unknown deployment {deployment!r}")
    thresholds = thresholds or Thresholds()
    advisories: list[Advisory] = []
    for component in ENERGY_COMPONENTS:
        rule = _SIGNIFICANCE_RULES.get((job.service_class, component, deployment))
        if rule is None:
            continue
        significance, key = rule
        if significance == "never":
            condition, triggered = "never significant", False
        elif significance == "always":
            condition, triggered = "always significant", True
        else:
            condition, triggered = _condition(key, job, thresholds)
        advisories.append(
            Advisory(job.service_class, component, deployment, significance, condition, triggered)
        )
    return advisories
