import time, numpy as np
from scipy import stats
def mc(n=10_000_000, strata=1000, seed=7, lam=1.0, w=1.0):
    rng = np.random.default_rng(seed)
    per = n // strata
    means = np.empty(strata); var = np.empty(strata)
    # |k| strata of equal chi(3) probability; k0 plain normal
    u = (np.arange(strata)[:, None] + rng.random((strata, per))) / strata
    k = stats.chi.ppf(u, 3) / w
    k0 = rng.normal(0.0, 1.0 / w, (strata, per))
    ind = (np.abs(k0 * k0 - k * k) < lam * lam).astype(float)
    means = ind.mean(axis=1); var = ind.var(axis=1, ddof=1)
    return means.mean(), np.sqrt(var.sum() / per) / strata
t0 = time.time(); print(mc(), time.time() - t0)
