"""
One compromised agent out of three
==================================

Each fault kind is injected into agent 0 of an otherwise honest 2-of-3
swarm. A single bad agent can slow a run down or force an abort, but it
can never make the other two sign a wrong settlement.
"""

from swarmsim import build_scenario_dict, run_scenario_dict

FAULTS = (
    {"agent_index": 0, "kind": "crash", "at_time": 5},
    {"agent_index": 0, "kind": "silent"},
    {"agent_index": 0, "kind": "wrong_root", "perturb_seed": 1},
    {"agent_index": 0, "kind": "equivocate"},
    {"agent_index": 0, "kind": "bad_attestation"},
)

for fault in FAULTS:
    scenario = build_scenario_dict(seed=7)
    scenario["agents"]["faults"] = [fault]
    _, report = run_scenario_dict(scenario)
    # the safety bound: never SETTLED_FRAUDULENT with one fault
    assert report.outcome in ("SETTLED_CORRECT", "ABORTED")
    print(
        f"{fault['kind']:<16} -> {report.outcome:<16}"
        f" rounds={report.rounds_used}"
        f" nacks={report.message_counts.get('nack', 0)}"
        f" settlements={report.on_chain_tx_count}"
    )
