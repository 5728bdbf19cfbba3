import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from heaptrees.distributions import (
    OffspringDistribution,
    RandomStream,
    hash64,
    marked_ppp_arrays,
    sample_marked_ppp,
    sample_offspring,
    sample_sink_process,
    sample_sources,
    sink_cumulative,
)


def test_dirac_is_deterministic():
    d = OffspringDistribution.dirac(2)
    assert all(sample_offspring(d, s) == 2 for s in range(20))
    assert d.mean() == 2


def test_geometric_mean_within_three_se():
    alpha, n = 0.5, 10**6
    x = OffspringDistribution.geometric(alpha).sample(np.random.default_rng(1), n)
    assert x.min() >= 1
    se = math.sqrt((1 - alpha) / alpha**2 / n)
    assert abs(x.mean() - 1 / alpha) < 3 * se


def test_geometric_pmf_by_chi_square():
    alpha = 0.3
    x = OffspringDistribution.geometric(alpha).sample(np.random.default_rng(2), 50_000)
    k = np.arange(1, 15)
    expected = alpha * (1 - alpha) ** (k - 1)
    observed = np.array([(x == v).sum() for v in k] + [(x >= 15).sum()])
    expected = np.append(expected, (1 - alpha) ** 14) * len(x)
    assert stats.chisquare(observed, expected).pvalue > 0.01


def test_table_mean_within_three_se():
    d = OffspringDistribution.table({1: 0.5, 10: 0.5})
    n = 10**6
    x = d.sample(np.random.default_rng(3), n)
    assert set(np.unique(x)) == {1, 10}
    assert abs(x.mean() - 5.5) < 3 * 4.5 / math.sqrt(n)


@pytest.mark.parametrize("spec", ["table:0=0.5,1=0.5", "dirac:0", "geom:1", "geom:0",
                                  "table:1=0.5,2=0.4", "poisson:1", "dirac", "table:1"])
def test_parse_rejects(spec):
    with pytest.raises(ValueError):
        OffspringDistribution.parse(spec)


def test_parse_round_trip():
    for spec in ["dirac:3", "geom:0.25", "table:1=1/2,3=1/2", "geom:4/21"]:
        d = OffspringDistribution.parse(spec)
        assert OffspringDistribution.parse(d.spec()) == d
    assert OffspringDistribution.parse("geom:4/21").alpha == 4 / 21
    assert OffspringDistribution.parse("table:1=1/3,2=2/3").mean() == pytest.approx(5 / 3)


def test_table_rejects_bad_sum():
    with pytest.raises(ValueError):
        OffspringDistribution.table({1: 0.5, 2: 0.6})


def test_streams_reproducible_and_distinct():
    a = RandomStream.for_replica(11, "exp", 3).generator().random(5)
    b = RandomStream.for_replica(11, "exp", 3).generator().random(5)
    c = RandomStream.for_replica(11, "exp", 4).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert hash64("exp", 3) != hash64("exp", 4) != hash64("exq", 3)


def test_ppp_determinism():
    d = OffspringDistribution.geometric(0.5)
    s = RandomStream(5, 9)
    assert sample_marked_ppp(0, 3, 0, 2, d, s) == sample_marked_ppp(0, 3, 0, 2, d, s)


def test_ppp_zero_area_and_inverted():
    d = OffspringDistribution.dirac(1)
    assert sample_marked_ppp(0.5, 0.5, 0, 1, d, 1) == []
    with pytest.raises(ValueError):
        sample_marked_ppp(1, 0, 0, 1, d, 1)
    with pytest.raises(ValueError):
        sample_marked_ppp(0, 1, 2, 1, d, 1)


def test_ppp_unit_square_mean_count():
    gen = np.random.default_rng(4)
    d = OffspringDistribution.dirac(1)
    n = 10**5
    counts = [len(marked_ppp_arrays(0, 1, 0, 1, d, gen)[0]) for _ in range(n)]
    assert abs(np.mean(counts) - 1.0) < 3 * math.sqrt(1 / n)


def test_ppp_count_variance_is_area():
    gen = np.random.default_rng(5)
    d = OffspringDistribution.dirac(1)
    counts = [len(marked_ppp_arrays(0, 2, 0, 3, d, gen)[0]) for _ in range(10**4)]
    assert abs(np.var(counts, ddof=1) - 6) < 0.6


def test_ppp_grid_cells_independent_poisson():
    # 4x4 grid of the unit square scaled to area 16; each cell Poisson(1)
    gen = np.random.default_rng(6)
    d = OffspringDistribution.dirac(1)
    reps = 10**4
    cells = np.zeros((reps, 16), dtype=int)
    for r in range(reps):
        x, t, _ = marked_ppp_arrays(0, 4, 0, 4, d, gen)
        idx = np.floor(x).astype(int) * 4 + np.floor(t).astype(int)
        cells[r] = np.bincount(idx, minlength=16)
    # counts 0,1,2,3+ per cell against Poisson(1)
    p = stats.poisson.pmf([0, 1, 2], 1)
    p = np.append(p, 1 - p.sum())
    pvals = []
    for c in range(16):
        obs = np.bincount(np.minimum(cells[:, c], 3), minlength=4)
        pvals.append(stats.chisquare(obs, p * reps).pvalue)
    assert min(pvals) > 0.01 / 16
    corr = np.corrcoef(cells.T)[np.triu_indices(16, 1)]
    assert np.abs(corr).max() < 4 / math.sqrt(reps)


def test_ppp_sorted_by_time():
    atoms = sample_marked_ppp(0, 5, 0, 5, OffspringDistribution.geometric(0.5), 8)
    times = [a.time for a in atoms]
    assert times == sorted(times)
    assert all(a.lives >= 1 for a in atoms)


def test_sink_mean_count():
    reps = 10**4
    gen = np.random.default_rng(7)
    counts = [len(sample_sink_process(1.0, 0.5, 6.0, gen)) for _ in range(reps)]
    mean = 2 * math.log(4)
    assert sink_cumulative(1.0, 0.5, 0, 6) == pytest.approx(mean)
    assert abs(np.mean(counts) - mean) < 3 * math.sqrt(mean / reps)


def test_sink_subinterval_mean():
    reps, a, b, lam, alpha = 10**4, 1.0, 4.0, 2.0, 1 / 3
    gen = np.random.default_rng(8)
    counts = []
    for _ in range(reps):
        s = sample_sink_process(lam, alpha, 5.0, gen)
        counts.append(int(((s >= a) & (s <= b)).sum()))
    mean = math.log((lam + (1 - alpha) * b) / (lam + (1 - alpha) * a)) / (1 - alpha)
    assert abs(np.mean(counts) - mean) < 3 * math.sqrt(mean / reps)


def test_sink_classical_is_rate_one():
    gen = np.random.default_rng(9)
    counts = [len(sample_sink_process(1.0, 1.0, 5.0, gen)) for _ in range(4000)]
    assert abs(np.mean(counts) - 5) < 3 * math.sqrt(5 / 4000)


def test_sink_small_horizon_vanishes():
    gen = np.random.default_rng(10)
    assert sum(len(sample_sink_process(1.0, 0.5, 1e-6, gen)) for _ in range(1000)) <= 1


def test_sink_errors():
    with pytest.raises(ValueError):
        sample_sink_process(0.0, 1.0, 1.0, 1, t_min=0.1)
    with pytest.raises(ValueError):
        sample_sink_process(0.0, 0.5, 1.0, 1)
    with pytest.raises(ValueError):
        sample_sink_process(1.0, 0.5, 0.0, 1)
    s = sample_sink_process(0.0, 0.5, 3.0, 1, t_min=0.2)
    assert np.all(s > 0.2) and np.all(np.diff(s) >= 0)


def test_sources_sorted():
    pos, lives = sample_sources(-2, 3, 1.5, OffspringDistribution.geometric(0.5), 11)
    assert np.all(np.diff(pos) > 0) and len(pos) == len(lives)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.1, 10))
def test_sink_cumulative_additive(alpha, lam, a, b):
    lo, hi = sorted((a, b))
    mid = (lo + hi) / 2
    whole = sink_cumulative(lam, alpha, lo, hi)
    assert whole == pytest.approx(sink_cumulative(lam, alpha, lo, mid) + sink_cumulative(lam, alpha, mid, hi))
