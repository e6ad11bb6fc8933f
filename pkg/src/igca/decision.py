"""Turn estimates plus compliance into a placement recommendation.

The rule is filter-then-argmin: drop non-compliant destinations, then take
the cheapest estimate. Ties break local over private over public, which
keeps the least transport-dependent option. A recommendation never commits
anything; persisting the manager's choice is a separate registry action.
"""

from __future__ import annotations

from dataclasses import dataclass

from igca.energy import DESTINATIONS, EnergyEstimate, InfrastructureSpec, JobProfile, estimate
from igca.policy import Advisory, PolicyEnvelope, Thresholds, compliant_destinations, significance_flags

TIE_ORDER = ("local", "private", "public")


class NoCompliantDestination(Exception):
    """Every destination was filtered out; the manager has to intervene."""


@dataclass(frozen=True)
class PlacementDecision:
    job_id: str
    chosen: str
    estimates: dict[str, EnergyEstimate]
    compliant: frozenset[str]
    rationale: tuple[str, ...]
    advisories: tuple[Advisory, ...] = ()


def decide(
    job: JobProfile,
    estimates: dict[str, EnergyEstimate],
    compliant: set[str] | frozenset[str],
    advisories: tuple[Advisory, ...] = (),
) -> PlacementDecision:
    """Pick the compliant destination with the lowest estimate."""
    if set(estimates) != set(DESTINATIONS):
        raise ValueError(f"estimates must cover exactly {DESTINATIONS}")
    unknown = set(compliant) - set(DESTINATIONS)
    if unknown:
        raise ValueError(f"unknown destinations in compliant set: {sorted(unknown)}")
    if not compliant:
        raise NoCompliantDestination(f"job {job.job_id}: no compliant destination")

    rationale: list[str] = []
    for dest in TIE_ORDER:
        if dest not in compliant:
            rationale.append(f"excluded {dest}: not compliant with policy")
    rationale.append(
        "estimates: " + " ".join(f"{d}={estimates[d].value:.4f}" for d in TIE_ORDER)
    )
    chosen = min(compliant, key=lambda d: (estimates[d].value, TIE_ORDER.index(d)))
    rationale.append(f"chosen {chosen}: lowest estimate among compliant destinations")
    return PlacementDecision(
        job_id=job.job_id,
        chosen=chosen,
        estimates=dict(estimates),
        compliant=frozenset(compliant),
        rationale=tuple(rationale),
        advisories=advisories,
    )


def what_if(
    job: JobProfile,
    policy: PolicyEnvelope,
    infra: InfrastructureSpec,
    offer=None,
    thresholds: Thresholds | None = None,
    *,
    allow_local: bool = True,
    allow_private: bool = True,
) -> PlacementDecision:
    """Full manager view: three estimates, compliance, advisories, recommendation."""
    job.validate()
    job.require_class_fields()
    policy.validate()
    estimates = {d: estimate(job, infra, d) for d in DESTINATIONS}
    compliant = compliant_destinations(
        job, policy, offer, allow_local=allow_local, allow_private=allow_private
    )
    advisories = tuple(
        significance_flags(job, "public", thresholds)
        + significance_flags(job, "private", thresholds)
    )
    return decide(job, estimates, compliant, advisories)
