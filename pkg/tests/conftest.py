"""Shared helpers: chi-square tests with tail merging, common parameters."""

from __future__ import annotations

import numpy as np
from scipy import stats

from mpsts.distributions import CountHistogram, ModelParams, Pmf

WORKING_POINT = ModelParams(mu0=0.264, m=2, M=3, K=3)
QUAD_POINT = ModelParams(mu0=0.752, m=1, M=5, K=4)


def hist_to_array(hist: CountHistogram, size: int) -> np.ndarray:
    out = np.zeros(size)
    for n_val, c in hist.counts.items():
        if n_val <= size - 1:
            out[n_val] += c
        else:
            out[-1] += c
    return out


def _merge_tail(obs: np.ndarray, exp: np.ndarray, min_expected: float):
    obs = obs.copy()
    exp = exp.copy()
    while exp.size > 2 and exp[-1] < min_expected:
        exp[-2] += exp[-1]
        obs[-2] += obs[-1]
        exp, obs = exp[:-1], obs[:-1]
    return obs, exp


def chi_square_gof(hist: CountHistogram, pmf: Pmf, min_expected: float = 5.0) -> float:
    """Goodness-of-fit p-value of a histogram against a model pmf.

    Cells are merged from the right until every expected count reaches
    min_expected; the model's truncation tail is folded into the last cell.
    """
    n = hist.n
    exp = n * pmf.probabilities
    obs = hist_to_array(hist, exp.size)
    obs, exp = _merge_tail(obs, exp, min_expected)
    exp[-1] += n * max(0.0, 1.0 - pmf.probabilities.sum())
    chi2 = float(np.sum((obs - exp) ** 2 / exp))
    dof = exp.size - 1
    return float(1.0 - stats.chi2.cdf(chi2, dof))


def chi_square_two_sample(
    a: CountHistogram, b: CountHistogram, min_expected: float = 5.0
) -> float:
    """Two-sample chi-square homogeneity p-value."""
    size = max(a.max_count(), b.max_count()) + 1
    oa = hist_to_array(a, size)
    ob = hist_to_array(b, size)
    keep = (oa + ob) > 0
    oa, ob = oa[keep], ob[keep]
    pooled = (oa + ob) / (a.n + b.n)
    ea, eb = a.n * pooled, b.n * pooled
    order = np.argsort(ea)[::-1]
    oa, ob, ea, eb = oa[order], ob[order], ea[order], eb[order]
    oa, ea = _merge_tail(oa, ea, min_expected)
    ob, eb = _merge_tail(ob, eb, min_expected)
    k = min(ea.size, eb.size)
    oa, ea, ob, eb = oa[:k], ea[:k], ob[:k], eb[:k]
    chi2 = float(np.sum((oa - ea) ** 2 / ea) + np.sum((ob - eb) ** 2 / eb))
    dof = max(k - 1, 1)
    return float(1.0 - stats.chi2.cdf(chi2, dof))
