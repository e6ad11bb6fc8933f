from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from igca.broker import GreenOffer
from igca.energy import JobProfile
from igca.policy import (
    PolicyEnvelope,
    Thresholds,
    compliant_destinations,
    significance_flags,
)
from tests.generators import rand_job


def _job(service_class="storage", **kw) -> JobProfile:
    base = dict(job_id="J", service_class=service_class, file_size_gb=1.0,
                downloads_per_hour=2.0, users=5, frame_rate_mbps=5.0,
                encodings_per_week=2, hours_per_encoding=1.0, hours_per_week=10.0)
    base.update(kw)
    return JobProfile(**base)


def _offer(price=50.0, qos="gold", availability=0.999) -> GreenOffer:
    return GreenOffer("OFF", "CSP", "storage", price, qos, availability)


def test_security_three_excludes_public_regardless_of_offer():
    policy = PolicyEnvelope(3, "bronze", 1000.0, 0.0)
    assert "public" not in compliant_destinations(_job(), policy, _offer())


def test_all_three_compliant_with_good_offer():
    policy = PolicyEnvelope(1, "silver", 100.0, 0.99)
    result = compliant_destinations(_job(), policy, _offer(50.0, "gold", 0.999))
    assert result == {"local", "private", "public"}


def test_offer_over_budget_excludes_public():
    policy = PolicyEnvelope(1, "silver", 100.0, 0.99)
    assert compliant_destinations(_job(), policy, _offer(price=200.0)) == {"local", "private"}


def test_absent_offer_excludes_public():
    policy = PolicyEnvelope(1, "bronze", 1000.0, 0.0)
    assert compliant_destinations(_job(), policy, None) == {"local", "private"}


def test_qos_and_availability_gates():
    policy = PolicyEnvelope(1, "gold", 1000.0, 0.999)
    assert "public" not in compliant_destinations(_job(), policy, _offer(qos="silver"))
    assert "public" not in compliant_destinations(_job(), policy, _offer(availability=0.99))
    assert "public" in compliant_destinations(_job(), policy, _offer(qos="gold", availability=0.999))


def test_allow_lists_exclude_local_and_private():
    policy = PolicyEnvelope(1, "bronze", 1000.0, 0.0)
    assert compliant_destinations(_job(), policy, _offer(), allow_local=False) == {"private", "public"}
    assert compliant_destinations(_job(), policy, None, allow_local=False, allow_private=False) == set()


def test_budget_monotone_and_security_antitone():
    rng = random.Random(7)
    for _ in range(200):
        job = rand_job(rng, rng.choice(("storage", "software", "processing")))
        offer = GreenOffer("O", "C", job.service_class, rng.uniform(0, 200),
                           rng.choice(("bronze", "silver", "gold")), rng.uniform(0, 1))
        budget = rng.uniform(0, 200)
        for level in (1, 2, 3):
            lower = compliant_destinations(job, PolicyEnvelope(level, "bronze", budget, 0.0), offer)
            higher = compliant_destinations(job, PolicyEnvelope(level, "bronze", budget + 50, 0.0), offer)
            assert lower <= higher  # raising budget never removes a destination
        for level in (1, 2):
            looser = compliant_destinations(job, PolicyEnvelope(level, "bronze", budget, 0.0), offer)
            stricter = compliant_destinations(job, PolicyEnvelope(level + 1, "bronze", budget, 0.0), offer)
            assert stricter <= looser  # raising security never adds one


def test_pure_function_of_inputs():
    policy = PolicyEnvelope(2, "silver", 75.0, 0.95)
    offer = _offer(60.0, "silver", 0.97)
    first = compliant_destinations(_job(), policy, offer)
    second = compliant_destinations(_job(), policy, offer)
    assert first == second


# --- significance advisories -------------------------------------------------

def test_software_public_transport_high_frame_rate():
    advisories = significance_flags(_job("software", frame_rate_mbps=20.0), "public")
    transport = [a for a in advisories if a.energy_component == "transport"][0]
    assert transport.significance == "conditional"
    assert transport.triggered
    below = significance_flags(_job("software", frame_rate_mbps=5.0), "public")
    assert not [a for a in below if a.energy_component == "transport"][0].triggered


def test_software_storage_rows_never_trigger():
    for deployment in ("public", "private"):
        advisories = significance_flags(_job("software", frame_rate_mbps=1000.0), deployment)
        storage_row = [a for a in advisories if a.energy_component == "storage"][0]
        assert storage_row.significance == "never"
        assert not storage_row.triggered


def test_storage_public_transport_always_triggers():
    advisories = significance_flags(_job("storage", downloads_per_hour=0.0001), "public")
    transport = [a for a in advisories if a.energy_component == "transport"][0]
    assert transport.significance == "always"
    assert transport.triggered


def test_processing_storage_row_produces_no_advisory():
    for deployment in ("public", "private"):
        advisories = significance_flags(_job("processing"), deployment)
        assert not [a for a in advisories if a.energy_component == "storage"]
        assert {a.energy_component for a in advisories} == {"transport", "processing"}


def test_threshold_boundaries():
    thresholds = Thresholds()
    # strictly-above semantics for high frame rate
    at = significance_flags(_job("software", frame_rate_mbps=10.0), "public", thresholds)
    above = significance_flags(_job("software", frame_rate_mbps=10.0001), "public", thresholds)
    assert not [a for a in at if a.energy_component == "transport"][0].triggered
    assert [a for a in above if a.energy_component == "transport"][0].triggered
    # strictly-below semantics for few users
    at = significance_flags(_job("software", users=50), "private", thresholds)
    below = significance_flags(_job("software", users=49), "private", thresholds)
    assert not [a for a in at if a.energy_component == "processing"][0].triggered
    assert [a for a in below if a.energy_component == "processing"][0].triggered
    # inclusive semantics for medium-to-high encodings
    at = significance_flags(_job("processing", encodings_per_week=5), "public", thresholds)
    under = significance_flags(_job("processing", encodings_per_week=4), "public", thresholds)
    assert [a for a in at if a.energy_component == "processing"][0].triggered
    assert not [a for a in under if a.energy_component == "processing"][0].triggered


def test_custom_thresholds_respected():
    tight = Thresholds(high_frame_rate_mbps=1.0)
    advisories = significance_flags(_job("software", frame_rate_mbps=5.0), "public", tight)
    assert [a for a in advisories if a.energy_component == "transport"][0].triggered


@given(st.data())
@settings(max_examples=200)
def test_never_and_always_invariants(data):
    rng = random.Random(data.draw(st.integers(0, 2**32 - 1)))
    service_class = data.draw(st.sampled_from(("storage", "software", "processing")))
    deployment = data.draw(st.sampled_from(("public", "private")))
    job = rand_job(rng, service_class)
    for advisory in significance_flags(job, deployment):
        if advisory.significance == "never":
            assert not advisory.triggered
        if advisory.significance == "always":
            assert advisory.triggered


def test_policy_validation():
    with pytest.raises(ValueError):
        PolicyEnvelope(0, "bronze", 10.0, 0.5).validate()
    with pytest.raises(ValueError):
        PolicyEnvelope(1, "platinum", 10.0, 0.5).validate()
    with pytest.raises(ValueError):
        PolicyEnvelope(1, "bronze", -1.0, 0.5).validate()
    with pytest.raises(ValueError):
        PolicyEnvelope(1, "bronze", 1.0, 1.5).validate()
    PolicyEnvelope(2, "silver", 10.0, 0.95).validate()
