"""Scenario parsing, oracle classification, reports, transcript verification."""

import copy
import json

import pytest

from swarmsim import auction, harness
from swarmsim.harness import (
    InvalidFlags,
    InvalidScenario,
    SchemaMismatch,
    agent_signing_key,
    bidder_address,
    build_scenario_dict,
    derive_auction_id,
    oracle_from_contributions,
    parse_scenario,
    run_scenario,
    run_scenario_dict,
    verify_transcript,
)
from swarmsim.ledger import FundingWindow

# frozen regression values for the stock scenario (seed 7, 12 bidders,
# 4 items, 3 agents, threshold 2); any drift in population derivation,
# clearing, wire encoding, or transcript layout shows up here
GOLDEN_PRICE = "488"
GOLDEN_DIGEST = "efa3af70ce8d0b94e600013ce4193fd96b0ab5e92a601429f9a0b1d3f81e67d2"
GOLDEN_TRANSCRIPT_HASH = (
    "eb15ce830e308c7c9951be6569ac628d8265ba2441809cb9fdd7e7686ee504dd"
)


def write_scenario(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    return path


def test_default_scenario_settles_like_the_oracle():
    tr, rep = run_scenario_dict(build_scenario_dict())
    assert rep.outcome == "SETTLED_CORRECT"
    assert rep.on_chain_tx_count == 1
    assert rep.conservation_ok
    assert rep.oracle["clearing_price"] == GOLDEN_PRICE
    assert rep.executed["digest"] == GOLDEN_DIGEST
    assert rep.transcript_hash == GOLDEN_TRANSCRIPT_HASH


def test_threshold_above_agent_count_invalid():
    data = build_scenario_dict()
    data["agents"]["m"] = 4
    with pytest.raises(InvalidScenario) as err:
        parse_scenario(data, b"")
    assert any("m" in p for p in err.value.problems)


def test_diagnostics_are_collected_not_first_only():
    data = build_scenario_dict()
    data["agents"]["m"] = 9
    data["auction"]["n_items"] = 0
    data["max_time"] = 0
    with pytest.raises(InvalidScenario) as err:
        parse_scenario(data, b"")
    assert len(err.value.problems) >= 3


def test_unknown_top_level_field_rejected():
    data = build_scenario_dict()
    data["extra"] = 1
    with pytest.raises(InvalidScenario):
        parse_scenario(data, b"")


def test_bidders_requires_exactly_one_source():
    data = build_scenario_dict()
    data["bidders"] = {
        "explicit": [],
        "generator": {"count": 1, "distribution": {"kind": "uniform", "lo": 1, "hi": 2}},
    }
    with pytest.raises(InvalidScenario):
        parse_scenario(data, b"")


def test_explicit_bidder_validation():
    data = build_scenario_dict()
    data["bidders"] = {
        "explicit": [
            {"address": "zz", "amount": 5, "height": 1},
            {"address": "aa" * 20, "amount": 0, "height": 1},
            {"address": "aa" * 20, "amount": 5, "height": 99},
        ]
    }
    with pytest.raises(InvalidScenario) as err:
        parse_scenario(data, b"")
    assert len(err.value.problems) == 3


def test_funding_heights_capped_by_delivery_floor():
    data = build_scenario_dict()
    # window ends at 5, delay_min 1: height 6 is the last admissible
    data["bidders"] = {
        "explicit": [{"address": "aa" * 20, "amount": 5, "height": 6}]
    }
    sc = parse_scenario(data, b"")
    assert sc.bidders[0].height == 6
    data["bidders"]["explicit"][0]["height"] = 7
    with pytest.raises(InvalidScenario):
        parse_scenario(data, b"")


def test_amounts_accept_decimal_strings():
    data = build_scenario_dict()
    data["bidders"] = {
        "explicit": [{"address": "aa" * 20, "amount": str(1 << 80), "height": 1}]
    }
    sc = parse_scenario(data, b"")
    assert sc.bidders[0].amount == 1 << 80


def test_generated_population_is_a_pure_function_of_seed():
    a = parse_scenario(build_scenario_dict(seed=13), b"")
    b = parse_scenario(build_scenario_dict(seed=13), b"")
    c = parse_scenario(build_scenario_dict(seed=14), b"")
    assert a.bidders == b.bidders
    assert a.bidders != c.bidders
    assert all(len(e.address) == 20 for e in a.bidders)
    assert all(a.window.contains(e.height) for e in a.bidders)


def test_pareto_amounts_at_least_scale_floor():
    data = build_scenario_dict(dist="pareto:50,1.2", bidders=40)
    sc = parse_scenario(data, b"")
    assert all(e.amount >= 50 for e in sc.bidders)


def test_key_derivations_are_stable():
    assert agent_signing_key(7, 0) == agent_signing_key(7, 0)
    assert agent_signing_key(7, 0) != agent_signing_key(7, 1)
    assert bidder_address(7, 3) == bidder_address(7, 3)
    assert len(bidder_address(7, 3)) == 20
    assert len(derive_auction_id(7)) == 32


def test_oracle_handles_aggregation_and_window_edges():
    window = FundingWindow(1, 2)
    a, b = b"\xaa" * 20, b"\xbb" * 20
    contribs = [
        (a, 5, 0, b"\x00" * 32),  # early: refunded in full
        (a, 3, 1, b"\x01" * 32),
        (b, 4, 1, b"\x02" * 32),
        (a, 4, 2, b"\x03" * 32),  # A totals 7 in-window
        (b, 9, 3, b"\x04" * 32),  # late: refunded in full
    ]
    tx, price = oracle_from_contributions(b"\x05" * 32, 1, window, contribs)
    assert price == 7
    assert tx.mints == ((a, 1),)
    assert tx.partial_refunds == ()
    assert tx.full_refunds == ((b, 4), (a, 5), (b, 9))


def test_oracle_matches_engine_on_random_instances():
    import random

    rng = random.Random(1234)
    window = FundingWindow(1, 4)
    for trial in range(100):
        n_items = rng.randint(1, 8)
        contribs = []
        for i in range(rng.randint(0, 40)):
            sender = bytes([rng.randint(1, 12)]) * 20
            amount = rng.randint(1, 30)
            height = rng.randint(0, 5)
            contribs.append((sender, amount, height, rng.randbytes(32)))
        oracle_tx, _ = oracle_from_contributions(b"\x06" * 32, n_items, window, contribs)

        from swarmsim.ledger import Contribution

        cfg = auction.AuctionConfig(
            n_items=n_items, window=window, auction_id=b"\x06" * 32
        )
        ledger_view = [
            Contribution(sender=s, amount=a, block_height=h, tx_id=t)
            for s, a, h, t in contribs
        ]
        bids, late = auction.aggregate(ledger_view, window)
        engine_tx = auction.build_settlement(
            cfg, auction.compute_clearing(cfg, auction.canonical_sort(bids), late)
        )
        assert auction.encode_settlement(engine_tx) == auction.encode_settlement(
            oracle_tx
        )


def test_run_scenario_reads_files(tmp_path):
    path = write_scenario(tmp_path, build_scenario_dict(seed=21))
    tr, rep = run_scenario(path.as_posix())
    assert rep.outcome == "SETTLED_CORRECT"
    header = json.loads(tr.text().splitlines()[0])
    assert header["seed"] == 21


def test_verify_round_trip(tmp_path):
    spath = write_scenario(tmp_path, build_scenario_dict(seed=21))
    tr, rep = run_scenario(spath.as_posix())
    tpath = tmp_path / "t.jsonl"
    tr.write(tpath.as_posix())
    result = verify_transcript(tpath.as_posix(), spath.as_posix())
    assert result.accepted and result.outcome == "SETTLED_CORRECT"


def test_verify_rejects_edited_line(tmp_path):
    spath = write_scenario(tmp_path, build_scenario_dict(seed=21))
    tr, _ = run_scenario(spath.as_posix())
    lines = tr.text().splitlines()
    victim = next(i for i, ln in enumerate(lines) if '"kind":"funding_received"' in ln)
    lines[victim] = lines[victim].replace('"amount":"', '"amount":"9', 1)
    tpath = tmp_path / "t.jsonl"
    tpath.write_text("\n".join(lines) + "\n", encoding="utf-8")
    result = verify_transcript(tpath.as_posix(), spath.as_posix())
    assert not result.accepted
    assert result.reason == "divergence"
    assert result.line_number == victim + 1
    assert result.got != result.expected


def test_verify_rejects_foreign_scenario(tmp_path):
    spath = write_scenario(tmp_path, build_scenario_dict(seed=21))
    other = write_scenario(tmp_path, build_scenario_dict(seed=22), name="other.json")
    tr, _ = run_scenario(spath.as_posix())
    tpath = tmp_path / "t.jsonl"
    tr.write(tpath.as_posix())
    result = verify_transcript(tpath.as_posix(), other.as_posix())
    assert not result.accepted and result.reason == "scenario_hash_mismatch"


def test_verify_rejects_header_seed_swap(tmp_path):
    spath = write_scenario(tmp_path, build_scenario_dict(seed=21))
    tr, _ = run_scenario(spath.as_posix())
    lines = tr.text().splitlines()
    header = json.loads(lines[0])
    header["seed"] = 22
    from swarmsim.transcript import canonical_json

    lines[0] = canonical_json(header)
    tpath = tmp_path / "t.jsonl"
    tpath.write_text("\n".join(lines) + "\n", encoding="utf-8")
    result = verify_transcript(tpath.as_posix(), spath.as_posix())
    assert not result.accepted and result.reason == "seed_mismatch"


def test_verify_rejects_truncated_transcript(tmp_path):
    spath = write_scenario(tmp_path, build_scenario_dict(seed=21))
    tr, _ = run_scenario(spath.as_posix())
    lines = tr.text().splitlines()
    tpath = tmp_path / "t.jsonl"
    tpath.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")
    result = verify_transcript(tpath.as_posix(), spath.as_posix())
    assert not result.accepted and result.reason == "divergence"
    assert result.got == "<missing line>"


def test_verify_unsupported_schema_raises(tmp_path):
    spath = write_scenario(tmp_path, build_scenario_dict(seed=21))
    tr, _ = run_scenario(spath.as_posix())
    lines = tr.text().splitlines()
    lines[0] = lines[0].replace('"schema_version":1', '"schema_version":2')
    tpath = tmp_path / "t.jsonl"
    tpath.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with pytest.raises(SchemaMismatch):
        verify_transcript(tpath.as_posix(), spath.as_posix())


def test_build_scenario_dict_validates_flags():
    with pytest.raises(InvalidFlags):
        build_scenario_dict(agents=3, threshold=4)
    with pytest.raises(InvalidFlags):
        build_scenario_dict(dist="normal:1,2")
    with pytest.raises(InvalidFlags):
        build_scenario_dict(faults=("0:crash",))
    with pytest.raises(InvalidFlags):
        build_scenario_dict(faults=("9:silent",))


def test_large_scale_flags_are_valid():
    data = build_scenario_dict(bidders=15000, items=10000, dist="pareto:1000,1.5")
    sc = parse_scenario(data, b"")
    assert len(sc.bidders) == 15000 and sc.n_items == 10000


def test_report_serializes_to_json():
    _, rep = run_scenario_dict(build_scenario_dict())
    blob = json.dumps(rep.to_dict())
    assert json.loads(blob)["outcome"] == "SETTLED_CORRECT"
    assert any("clearing price" in ln for ln in rep.summary_lines())
