# Builds per-user accuracy samples whose aligned / non-personalized means and
# Welch p-value reproduce a documented summary line; the p-value is checked
# with scipy.
import json
import numpy as np
from scipy import stats

rng = np.random.default_rng(2024)
n = 12
base_a = rng.beta(6, 1, n)
base_b = rng.beta(4, 1.2, n)
base_a = (base_a - base_a.mean()) / base_a.std(ddof=1)
base_b = (base_b - base_b.mean()) / base_b.std(ddof=1)

def build(sd):
    a = np.round(0.8589 + sd * base_a, 6)
    b = np.round(0.7665 + sd * base_b, 6)
    a += 0.8589 - a.mean()
    b += 0.7665 - b.mean()
    return a, b

lo, hi = 0.01, 0.5
for _ in range(200):
    mid = (lo + hi) / 2
    a, b = build(mid)
    p = stats.ttest_ind(a, b, equal_var=False).pvalue
    if p < 0.008:
        lo = mid
    else:
        hi = mid
a, b = build(lo)
res = stats.ttest_ind(a, b, equal_var=False)
assert 0 <= a.min() and a.max() <= 1 and 0 <= b.min() and b.max() <= 1
assert round(res.pvalue, 3) == 0.008
out = {
    "aligned": a.tolist(),
    "nonpersonalized": b.tolist(),
    "aligned_mean_pct": 100 * a.mean(),
    "nonpersonalized_mean_pct": 100 * b.mean(),
    "welch_p": res.pvalue,
    "summary": "personalized (aligned) 85.89% vs non-personalized 76.65% (p=0.008)",
}
with open("group_means.json", "w") as f:
    json.dump(out, f, indent=1)
print(out["aligned_mean_pct"], out["nonpersonalized_mean_pct"], out["welch_p"])
