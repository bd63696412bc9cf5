import csv

import numpy as np
import pytest
from scipy.special import expit

from shadowmnar import ScenarioConfig, analysis_spec, generate


def write_home_price_csv(path, n=3126, seed=20240715, gamma=-0.5):
    """Synthetic survey file in the home-pricing schema: a log current
    price with outcome-dependent nonresponse, the log original price as
    its shadow, and fully observed household covariates.

    Missingness targets roughly 19 percent. Returns the generating truth.
    """
    rng = np.random.default_rng(seed)
    urban = rng.binomial(1, 0.5, n).astype(float)
    lsiz = rng.standard_normal(n)
    lfminc = rng.standard_normal(n)
    delta = -gamma
    sigma1, sigma2 = 0.6, 0.5
    mu1 = 2.6 + 0.3 * urban + 0.4 * lsiz + 0.2 * lfminc
    logit0 = 2.67 + 0.4 * urban + 0.3 * lsiz
    p1 = expit(logit0 - (delta * mu1 + 0.5 * delta**2 * sigma1**2))
    r = (rng.random(n) < p1).astype(int)
    y = mu1 + (1 - r) * delta * sigma1**2 + sigma1 * rng.standard_normal(n)
    z = 1.8 + 0.2 * lsiz + 0.8 * y + sigma2 * rng.standard_normal(n)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["urban", "lsiz", "lfminc", "loripr", "lhmpr"])
        for i in range(n):
            w.writerow([urban[i], repr(float(lsiz[i])), repr(float(lfminc[i])),
                        repr(float(z[i])),
                        repr(float(y[i])) if r[i] == 1 else ""])
    return {"gamma": gamma, "missing_fraction": 1.0 - r.mean(), "mu_full": y.mean()}


@pytest.fixture(scope="session")
def tt_data_5k():
    """One moderate TT draw shared by estimator tests."""
    return generate(ScenarioConfig("TT", n=5000, seed=20240601))


@pytest.fixture(scope="session")
def tt_data_100k():
    """One large TT draw for recovery checks."""
    return generate(ScenarioConfig("TT", n=100_000, seed=20240602))


@pytest.fixture(scope="session")
def spec_b():
    return analysis_spec()


@pytest.fixture()
def rng():
    return np.random.default_rng(987654321)
