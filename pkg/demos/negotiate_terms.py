"""Walk through one bilateral bargaining session and the utility functions behind it."""

import numpy as np

from saasbroker import datasets, global_utility, utility_cost, utility_gain
from saasbroker.scenario import load_scenario, run_scenario

# gain curve F for availability-like terms, cost curve G for latency-like terms
x = np.linspace(0, 1, 6)
for beta in (1, 2, 4):
    f = [utility_gain(v, 0.99, beta) for v in x]
    g = [utility_cost(v, 0.20, beta) for v in x]
    print(f"beta={beta}  F={np.round(f, 3)}  G={np.round(g, 3)}")

scenario = datasets.negotiation_scenario()
session, agent = load_scenario(scenario)
print("threshold", session.threshold, "max rounds", session.max_rounds)
print("provider opens at", agent.opening_terms, "U =", round(global_utility(agent.opening_terms, session.params), 4))

result = run_scenario(scenario)


def rounded(terms):
    return {k: round(v, 4) for k, v in (terms or {}).items()}


for m in result.transcript:
    u = f"U={global_utility(m.terms, session.params):.4f}" if m.terms else ""
    print(f"round {m.round:2d} {m.sender.value:8s} {m.kind.value:12s} {rounded(m.terms)} {u}")
print("outcome:", result.outcome.value, "terms:", rounded(result.final_terms))

# a provider that never concedes: the broker runs out of rounds
frozen = run_scenario(scenario, {"gamma": 0.0, "delta": 0.0})
print("no concessions:", frozen.outcome.value, "after", frozen.session.round, "rounds")

# utility surface over the two terms, maximum at full availability and zero latency
grid = np.linspace(0, 1, 11)
surface = np.array([[global_utility({"Availability": a, "Response-time": r}, session.params) for r in grid]
                    for a in grid])
i, j = np.unravel_index(surface.argmax(), surface.shape)
print("surface max at availability", grid[i], "response time", grid[j], "U =", surface[i, j])
