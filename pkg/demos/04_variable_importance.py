"""Conditional variable importance with correlated predictors.

Plain permutation importance overstates a predictor that is merely
correlated with a causal one: permuting it breaks the correlation, not
just its own contribution.  CVIM instead permutes each predictor within
strata of the peers it is chi-square-dependent on, which preserves the
correlation structure and isolates the predictor's own effect.  Here x1
is causal and x2 is a noisy copy of x1; the conditional measure should
separate them far more sharply than their raw correlation suggests.
"""

import numpy as np

from snpkit import Dataset, cvim

rng = np.random.default_rng(21)
N = 500
x1 = rng.integers(0, 3, size=N)
# x2 mirrors x1 with 15% noise, x3 and x4 are pure noise
x2 = np.where(rng.random(N) < 0.85, x1, rng.integers(0, 3, size=N))
x3 = rng.integers(0, 3, size=N)
x4 = rng.integers(0, 3, size=N)
X = np.column_stack([x1, x2, x3, x4])

y = np.where(x1 >= 1, 1, -1)
flip = rng.random(N) < 0.1
y[flip] = -y[flip]
ds = Dataset(predictors=X, phenotype=y)

report = cvim(ds, B=100, seed=0)
print(f"conditional variable importance ({report.B} replicates)\n")
for i in report.ranking():
    peers = [ds.predictor_names[j] for j in report.conditioning[i]]
    print(f"  {ds.predictor_names[i]:>4s}: CVIM {report.values[i]:+.4f}   "
          f"conditioned on {peers or 'nothing'} "
          f"({report.effective_B[i]} replicates used)")

print("\nx2 is screened by conditioning on its dependent peer x1: its "
      "importance collapses toward the pure-noise level of x3 and x4.")
