"""Energy-aware job placement middleware.

Estimates the power cost of running a job on the local machine, in the
company's private cloud or in a public cloud, gates the candidate
destinations by policy (security, QoS, budget, availability), records the
manager-confirmed placement in an XML registry, and routes job execution
requests accordingly. Public placements are resolved through a simulated
green broker that picks the compliant offer with the least carbon emission.
"""

__version__ = "0.1.0"

from igca.decision import PlacementDecision, decide, what_if
from igca.energy import (
    EnergyEstimate,
    InfrastructureSpec,
    JobProfile,
    MachineSpec,
    NetworkElement,
    ServerSpec,
    TransportPath,
    estimate,
)
from igca.policy import Advisory, PolicyEnvelope, Thresholds, compliant_destinations, significance_flags

__all__ = [
    "Advisory",
    "EnergyEstimate",
    "InfrastructureSpec",
    "JobProfile",
    "MachineSpec",
    "NetworkElement",
    "PlacementDecision",
    "PolicyEnvelope",
    "ServerSpec",
    "Thresholds",
    "TransportPath",
    "compliant_destinations",
    "decide",
    "estimate",
    "significance_flags",
    "what_if",
    "__version__",
]
