"""
When do people shop?
====================

Visits are counted by the weekday and hour in which they start. The
simulator uses weekend rates at about a third of the working-day rates,
and the visit matrix should show that.
"""

import numpy as np

from intersite import SynthSpec, generate, group_sessions, normalize, visit_matrix
from intersite.aggregate import WEEKDAYS

spec = SynthSpec(n_users=5000, days=28)
result = generate(spec, seed=2)
groups = group_sessions(normalize(r) for r in result.requests)

# %%
# Visits per weekday, for all visits and for those touching two shops.
everything = visit_matrix(groups, "all_visits")
multi = visit_matrix(groups, "multi_shop_visits")
for day, a, m in zip(WEEKDAYS, everything.counts.sum(axis=1), multi.counts.sum(axis=1)):
    print(f"{day:<10} {a:6d} {m:6d}")

# %%
# The busiest hour of each day.
peaks = everything.counts.argmax(axis=1)
print("peak hours:", dict(zip(WEEKDAYS, peaks.tolist())))
print("share of visits at weekends: "
      f"{everything.counts[5:].sum() / everything.total:.1%}")
assert np.all(multi.counts <= everything.counts)
