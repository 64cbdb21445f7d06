# Reference p-values for the significance tests, computed with scipy.
# Run: python3 tests/oracles/make_significance.py > tests/oracles/significance.json
import json

import numpy as np
from scipy import stats

rng = np.random.default_rng(7)
pairs = [
    ("small_distinct", [1.1, 2.4, 3.9, 0.7, 5.2, 2.2], [3.3, 4.8, 6.1, 5.5, 7.0, 2.9, 4.1]),
    ("medium_distinct", list(np.round(rng.normal(0.0, 1.0, 15), 6)), list(np.round(rng.normal(0.8, 1.5, 12), 6))),
    ("likert_ties", [int(v) for v in rng.integers(1, 5, 25)], [int(v) for v in rng.integers(2, 5, 30)]),
    ("large_normal", list(np.round(rng.normal(76.65, 12.0, 40), 4)), list(np.round(rng.normal(85.89, 9.0, 35), 4))),
    ("small_ties", [1, 2, 2, 3, 3, 3, 4, 4], [2, 3, 3, 4, 4, 4, 4, 1, 4]),
]
out = []
for name, a, b in pairs:
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    ties = len(set(a + b)) < len(a) + len(b)
    exact = not ties and len(a) <= 20 and len(b) <= 20
    mw = stats.mannwhitneyu(a, b, alternative="two-sided", use_continuity=True,
                            method="exact" if exact else "asymptotic")
    welch = stats.ttest_ind(a, b, equal_var=False)
    student = stats.ttest_ind(a, b, equal_var=True)
    out.append({"name": name, "a": a, "b": b,
                "welch_t": float(welch.statistic), "welch_p": float(welch.pvalue),
                "student_t": float(student.statistic), "student_p": float(student.pvalue),
                "u": float(mw.statistic), "mannwhitney_p": float(mw.pvalue), "exact": exact})
print(json.dumps(out, indent=1))
