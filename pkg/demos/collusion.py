"""
Two colluders beat a 2-of-3 threshold
=====================================

Agents 0 and 1 both observe the same corrupted bid stream, so they agree
with each other, outvote the honest agent, and settle a wrong result.
The swarm cannot stop this (m colluders meet the signing threshold by
definition), but the run classifier catches it from scenario inputs alone.
"""

from swarmsim import build_scenario_dict, run_scenario_dict

# same perturb_seed means both colluders see the identical corrupted view
scenario = build_scenario_dict(
    seed=7, faults=("0:wrong_root:5", "1:wrong_root:5")
)
_, report = run_scenario_dict(scenario)

print("outcome:", report.outcome)
print("honest-oracle digest:", report.oracle["digest"][:16], "...")
print("executed digest:     ", report.executed["digest"][:16], "...")
print(
    "retained by auction:  oracle",
    report.oracle["retained"],
    "vs executed",
    report.executed["retained"],
)
assert report.outcome == "SETTLED_FRAUDULENT"

# money is still conserved on the ledger: the fraud shifts value between
# refunds and retained amount, it does not mint anything
print("ledger conservation still holds:", report.conservation_ok)

# colluders with different perturbations disagree with everyone, including
# each other, and the honest minority's nacks burn the rounds instead
scenario = build_scenario_dict(
    seed=7, faults=("0:wrong_root:5", "1:wrong_root:9")
)
_, report = run_scenario_dict(scenario)
print("mismatched colluders ->", report.outcome)
