from __future__ import annotations

import random

import pytest

from igca import broker
from igca.policy import QOS_ORDER, PolicyEnvelope
from tests.generators import rand_directory, rand_policy


def _ced(*triples) -> tuple[broker.CspRecord, ...]:
    return tuple(
        broker.CspRecord(csp_id, "storage", intensity, energy)
        for csp_id, intensity, energy in triples
    )


def _offer(offer_id, csp_id, price=50.0, qos="silver", availability=0.99, windows=()) -> broker.GreenOffer:
    return broker.GreenOffer(offer_id, csp_id, "storage", price, qos, availability, windows)


def oracle_select(service_class, policy, ced, offers, at_hour, discount=0.8):
    """Exhaustive enumeration with explicit constraint checks."""
    rates = {}
    for record in ced:
        rates[(record.csp_id, record.service_class)] = (
            record.carbon_intensity_g_per_kwh * record.energy_kwh_per_unit_hour
        )
    candidates = []
    saw_class = False
    for offer in offers:
        if offer.service_class != service_class:
            continue
        saw_class = True
        if offer.price > policy.budget:
            continue
        if QOS_ORDER[offer.qos_tier] < QOS_ORDER[policy.qos_tier]:
            continue
        if offer.availability < policy.availability_req:
            continue
        rate = rates[(offer.csp_id, offer.service_class)]
        if any(w.start_hour <= at_hour < w.end_hour for w in offer.green_windows):
            rate *= discount
        candidates.append(((rate, offer.price, offer.offer_id), offer))
    if not saw_class:
        return "no_offer"
    if not candidates:
        return "no_compliant"
    return min(candidates, key=lambda pair: pair[0])[1]


# --- carbon rate ---------------------------------------------------------------

def test_carbon_rate_zero_intensity():
    ced = _ced(("A", 0.0, 3.0))
    assert broker.carbon_rate(_offer("O", "A"), ced) == 0.0


def test_carbon_rate_hand_value():
    ced = _ced(("A", 500.0, 2.0))
    assert broker.carbon_rate(_offer("O", "A"), ced) == pytest.approx(1000.0, rel=1e-12)


def test_carbon_rate_unlisted_csp():
    with pytest.raises(broker.UnlistedCsp):
        broker.carbon_rate(_offer("O", "GHOST"), _ced(("A", 1.0, 1.0)))
    # listed csp but for another class
    record = broker.CspRecord("A", "software", 1.0, 1.0)
    with pytest.raises(broker.UnlistedCsp):
        broker.carbon_rate(_offer("O", "A"), (record,))


# --- selection -----------------------------------------------------------------

POLICY = PolicyEnvelope(1, "bronze", 100.0, 0.0)


def test_single_compliant_offer_selected():
    ced = _ced(("A", 500.0, 2.0))
    offer = _offer("ONLY", "A")
    assert broker.select_greenest("storage", POLICY, ced, [offer], at_hour=12) is offer


def test_three_csp_example_picks_lowest_carbon():
    ced = _ced(("A", 500.0, 2.0), ("B", 300.0, 2.0), ("C", 700.0, 2.0))
    offers = [_offer("OFF-A", "A"), _offer("OFF-B", "B"), _offer("OFF-C", "C")]
    assert broker.select_greenest("storage", POLICY, ced, offers, at_hour=12).offer_id == "OFF-B"


def test_over_budget_argmin_skipped_for_next_best():
    ced = _ced(("A", 500.0, 2.0), ("B", 300.0, 2.0), ("C", 700.0, 2.0))
    offers = [_offer("OFF-A", "A"), _offer("OFF-B", "B", price=500.0), _offer("OFF-C", "C")]
    assert broker.select_greenest("storage", POLICY, ced, offers, at_hour=12).offer_id == "OFF-A"


def test_empty_directory_raises_no_offer():
    with pytest.raises(broker.NoOffer):
        broker.select_greenest("storage", POLICY, (), [], at_hour=0)


def test_none_compliant_raises():
    ced = _ced(("A", 500.0, 2.0))
    with pytest.raises(broker.NoCompliantOffer):
        broker.select_greenest("storage", POLICY, ced, [_offer("O", "A", price=1000.0)], at_hour=0)


def test_green_window_discount_flips_selection():
    ced = _ced(("A", 500.0, 2.0), ("B", 450.0, 2.0))
    window = (broker.GreenWindow(8, 12),)
    offers = [_offer("OFF-A", "A", windows=window), _offer("OFF-B", "B")]
    # outside the window B has the lower rate (900 < 1000)
    assert broker.select_greenest("storage", POLICY, ced, offers, at_hour=13).offer_id == "OFF-B"
    # inside, A is discounted to 800
    assert broker.select_greenest("storage", POLICY, ced, offers, at_hour=8).offer_id == "OFF-A"
    assert broker.select_greenest("storage", POLICY, ced, offers, at_hour=11).offer_id == "OFF-A"
    # window end is exclusive
    assert broker.select_greenest("storage", POLICY, ced, offers, at_hour=12).offer_id == "OFF-B"


def test_ties_break_on_price_then_id():
    ced = _ced(("A", 300.0, 2.0), ("B", 300.0, 2.0))
    offers = [_offer("OFF-Z", "A", price=30.0), _offer("OFF-Y", "B", price=20.0)]
    assert broker.select_greenest("storage", POLICY, ced, offers, at_hour=0).offer_id == "OFF-Y"
    offers = [_offer("OFF-Z", "A", price=20.0), _offer("OFF-Y", "B", price=20.0)]
    assert broker.select_greenest("storage", POLICY, ced, offers, at_hour=0).offer_id == "OFF-Y"


def test_adding_non_compliant_offer_never_changes_result():
    ced = _ced(("A", 500.0, 2.0), ("B", 300.0, 2.0))
    offers = [_offer("OFF-A", "A"), _offer("OFF-B", "B")]
    baseline = broker.select_greenest("storage", POLICY, ced, offers, at_hour=0)
    spoiler_ced = ced + (broker.CspRecord("Z", "storage", 0.0, 1.0),)
    spoiler = _offer("OFF-Z", "Z", price=10_000.0)  # zero carbon but unaffordable
    assert broker.select_greenest("storage", POLICY, spoiler_ced, offers + [spoiler], at_hour=0) == baseline


def test_selection_matches_enumeration_oracle():
    rng = random.Random(606)
    for _ in range(500):
        directory = rand_directory(rng)
        policy = rand_policy(rng)
        service_class = rng.choice(("storage", "software", "processing"))
        at_hour = rng.randint(0, 23)
        expected = oracle_select(service_class, policy, directory.ced, directory.offers, at_hour)
        if expected == "no_offer":
            with pytest.raises(broker.NoOffer):
                broker.select_greenest(service_class, policy, directory.ced, directory.offers, at_hour)
        elif expected == "no_compliant":
            with pytest.raises(broker.NoCompliantOffer):
                broker.select_greenest(service_class, policy, directory.ced, directory.offers, at_hour)
        else:
            chosen = broker.select_greenest(service_class, policy, directory.ced, directory.offers, at_hour)
            assert chosen == expected
            assert broker.offer_is_compliant(chosen, policy)


def test_argmin_invariant_under_intensity_scaling():
    rng = random.Random(607)
    for _ in range(100):
        directory = rand_directory(rng)
        policy = rand_policy(rng)
        at_hour = rng.randint(0, 23)
        scale = rng.uniform(0.1, 50.0)
        scaled_ced = tuple(
            broker.CspRecord(r.csp_id, r.service_class, r.carbon_intensity_g_per_kwh * scale,
                             r.energy_kwh_per_unit_hour, r.region)
            for r in directory.ced
        )
        for service_class in ("storage", "software", "processing"):
            try:
                base = broker.select_greenest(service_class, policy, directory.ced, directory.offers, at_hour)
            except broker.BrokerError as exc:
                with pytest.raises(type(exc)):
                    broker.select_greenest(service_class, policy, scaled_ced, directory.offers, at_hour)
                continue
            scaled = broker.select_greenest(service_class, policy, scaled_ced, directory.offers, at_hour)
            assert scaled.offer_id == base.offer_id


# --- persistence ------------------------------------------------------------------

def test_directory_round_trip(tmp_path):
    rng = random.Random(77)
    directory = rand_directory(rng)
    path = tmp_path / "broker.xml"
    broker.save_directory(directory, path)
    assert broker.load_directory(path) == directory
    assert broker.dumps_directory(directory) == broker.dumps_directory(broker.load_directory(path))


def test_fixture_directory_loads(broker_path):
    directory = broker.load_directory(broker_path)
    assert {o.offer_id for o in directory.offers} >= {"OFF-A", "OFF-B", "OFF-C"}
    chosen = broker.select_greenest("storage", POLICY, directory.ced, directory.offers, at_hour=12)
    assert chosen.offer_id == "OFF-B"


def test_directory_errors(tmp_path):
    with pytest.raises(broker.DirectoryError):
        broker.load_directory(tmp_path / "missing.xml")
    with pytest.raises(broker.DirectoryError, match="unknown attribute"):
        broker.loads_directory('<greenbroker version="1" shade="green"><ced/><offers/></greenbroker>')
    with pytest.raises(broker.DirectoryError, match="window"):
        broker.loads_directory(
            '<greenbroker version="1"><ced><csp id="A" class="storage" carbonGPerKwh="1"'
            ' energyKwhPerUnitHour="1"/></ced><offers><offer id="O" csp="A" class="storage"'
            ' price="1" qos="bronze" availability="0.5"><window startHour="9" endHour="3"/>'
            "</offer></offers></greenbroker>"
        )
