import json
import math

import numpy as np
import pytest
from scipy import stats

from hazmix.data_io import builtin_leukemia
from hazmix.gibbs import MomentEstimates
from hazmix.inference import (SUMMARY_COLUMNS, isotonic_cdf, kaplan_meier, marginal_intervals,
                              median_survival_riemann, median_survival_time, t_by_t_summaries,
                              write_median_json, write_summary_csv)
from hazmix.validation import SyntheticFamily, analytic_moments, true_hpd


def test_all_ones_gives_zero():
    grid = np.linspace(0.1, 1.0, 10)
    ms = median_survival_time(np.ones(10), grid)
    assert ms.m_hat == 0.0
    assert ms.lo == ms.hi == grid[0]


def test_step_cdf_follows_the_sum_formula():
    grid = 0.5 * np.arange(1, 11)
    c = np.zeros(10)
    c[4:] = 1.0
    ms = median_survival_time(c, grid)
    # mass c_{i+1} - c_i sits at t_i, so a jump at index j lands on t_{j-1}
    assert ms.m_hat == pytest.approx(grid[3])
    assert ms.lo == ms.hi == grid[4]


def test_two_forms_agree_within_a_cell(rng):
    for _ in range(20):
        q = int(rng.integers(20, 200))
        M = rng.uniform(1, 10)
        grid = M * np.arange(1, q + 1) / q
        c = np.sort(rng.random(q))
        c[-1] = 1.0
        a = median_survival_time(c, grid).m_hat
        b = median_survival_riemann(c, M)
        assert abs(a - b) <= M / q * 1.000001 + M / (q - 1)


def test_isotonic_and_range():
    assert list(isotonic_cdf([0.1, 0.05, 0.3, -0.2, 1.4])) == [0.1, 0.1, 0.3, 0.3, 1.0]
    grid = np.linspace(0.5, 5, 10)
    ms = median_survival_time(np.linspace(0, 0.9, 10), grid)
    assert 0 <= ms.m_hat <= 5
    assert ms.hi == pytest.approx(5.5)  # leftover mass sits past the grid
    with pytest.raises(ValueError):
        median_survival_time([0.5], [1.0])


def test_marginal_intervals():
    assert np.all(marginal_intervals(np.full((50, 3), 0.4)) == 0.4)
    trace = np.repeat([[0.0], [1.0]], 500, axis=0)
    lo, hi = marginal_intervals(trace)[0]
    assert lo == 0.0 and hi == 1.0
    with pytest.raises(ValueError):
        marginal_intervals(np.zeros((0, 3)))


def test_kaplan_meier_cases():
    km = kaplan_meier([3, 1, 2, 4], [1, 1, 1, 1])
    assert list(km.survival) == pytest.approx([0.75, 0.5, 0.25, 0.0])
    flat = kaplan_meier([1, 2], [0, 0])
    assert np.all(flat(np.array([0.5, 3.0])) == 1.0)
    _, placebo = builtin_leukemia()
    assert kaplan_meier(placebo.times, placebo.events).median() == 8
    treat, _ = builtin_leukemia()
    km = kaplan_meier(treat.times, treat.events)
    # classical product-limit value at 6 weeks: 3 deaths out of 21 at risk
    assert float(km(6.0)) == pytest.approx(18 / 21)
    with pytest.raises(ValueError):
        kaplan_meier([], [])


def _synthetic_estimates(fam, order=10, kept=40):
    grid = fam.grid
    mom = np.array([analytic_moments(fam, t, order)[1:] for t in grid])
    trace = np.tile(mom[:, 0], (kept, 1))
    return MomentEstimates(grid, mom, trace, np.zeros((kept, 4)))


def test_beta_family_summaries_match_analytic_intervals():
    fam = SyntheticFamily("beta")
    est = _synthetic_estimates(fam)
    summ = t_by_t_summaries(est, n_samples=20_000, seed=3)
    for g, t in enumerate(fam.grid):
        lo, hi = true_hpd(fam, t)
        assert summ.hpd[g] == pytest.approx([lo, hi], abs=0.01)
        a, b = fam.beta_components(t)[0]
        assert summ.median[g] == pytest.approx(stats.beta.ppf(0.5, a, b), abs=0.01)
        assert summ.mean[g] == est.moments[g, 0]
    assert np.all(np.diff(isotonic_cdf(summ.c)) >= 0)
    assert np.all((summ.hpd[:, 0] <= summ.median) & (summ.median <= summ.hpd[:, 1]))
    assert np.all((summ.hpd[:, 0] <= summ.mode) & (summ.mode <= summ.hpd[:, 1]))


def test_point_mass_fallback():
    grid = np.array([0.1, 0.2])
    mom = np.array([[0.9, 0.81, 0.729, 0.6561], [0.5, 0.3, 0.2, 0.15]])
    est = MomentEstimates(grid, mom, np.tile(mom[:, 0], (5, 1)), np.zeros((5, 4)))
    summ = t_by_t_summaries(est, n_samples=500)
    assert summ.orders[0] == 0
    assert summ.median[0] == summ.mode[0] == summ.hpd[0, 0] == pytest.approx(0.9)
    assert summ.orders[1] > 0


def test_writers(tmp_path):
    fam = SyntheticFamily("beta", n_grid=5)
    summ = t_by_t_summaries(_synthetic_estimates(fam, order=4), n_samples=200)
    write_summary_csv(tmp_path / "s.csv", summ)
    lines = (tmp_path / "s.csv").read_text().split("\n")
    assert lines[0] == ",".join(SUMMARY_COLUMNS) and len(lines) == 7 and lines[-1] == ""
    write_median_json(tmp_path / "m.json", summ.median_survival())
    obj = json.loads((tmp_path / "m.json").read_text())
    assert set(obj) == {"m_hat", "interval", "level", "t", "c"} and len(obj["c"]) == 5
