"""Rank the bundled fleet of 24 SaaS offers against the consumer's requirements."""

from dataclasses import replace

import numpy as np

from saasbroker import datasets, normalize, select_best, to_requirement, topsis_rank

offers = datasets.case_study_offers()
request = datasets.case_study_request()
requirement, specs = to_requirement(request)

for s in specs:
    print(f"{s.name:14s} weight={s.weight:.2f} direction={s.direction.value}")

# normalized matrix, one row per provider, columns in spec order
matrix = normalize(offers, requirement, specs)
names = [s.name for s in specs]
q = np.array([[matrix.rows[o.provider_id][n] for n in names] for o in offers])
print("normalized matrix shape", q.shape, "column means", np.round(q.mean(axis=0), 3))

# weighted utility and TOPSIS closeness, top five each
utility = select_best(offers, requirement, specs)
closeness = topsis_rank(offers, requirement, specs)
for table in (utility, closeness):
    print(table.method.value)
    for e in table.entries[:5]:
        print(f"  {e.rank:2d}  provider {e.provider_id:>2s}  {100 * e.score:6.2f}%")

# does the winner meet every requested value?
best = utility.best.provider_id
print("provider", best, "meets:", matrix.satisfaction()[best])

# all weight on price: the cheapest offer wins instead
cheap = [replace(s, weight=1.0 if s.name == "Cost" else 0.0) for s in specs]
print("cost-only winner:", select_best(offers, requirement, cheap).best.provider_id)
