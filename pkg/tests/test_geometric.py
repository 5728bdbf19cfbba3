import math

import numpy as np
import pytest
from scipy import stats

from heaptrees import geometric as geo
from heaptrees import hammersley_process as hp
from heaptrees.distributions import OffspringDistribution


def test_all_red_is_classical_hammersley():
    gen = np.random.default_rng(401)
    for _ in range(200):
        n = int(gen.poisson(8))
        labels, times = gen.random(n), np.sort(gen.random(n)) * 3
        atoms = [geo.ColoredAtom(float(u), float(t), geo.RED) for u, t in zip(labels, times)]
        rb = geo.simulate_redblue(0, 1, 3, 0.5, rng=gen, atoms=atoms)
        rec = hp.simulate(0, 1, 3, OffspringDistribution.dirac(1),
                          atoms=[hp.Atom(a.label, a.time, 1) for a in atoms])
        assert rb.alive_positions(3).tolist() == rec.alive_positions(3).tolist()


def test_blue_atoms_are_inert():
    atoms = [geo.ColoredAtom(0.3, 1.0, geo.BLUE), geo.ColoredAtom(0.6, 2.0, geo.BLUE),
             geo.ColoredAtom(0.8, 2.5, geo.RED)]
    rb = geo.simulate_redblue(0, 1, 3, 0.5, atoms=atoms)
    assert rb.alive_positions(3).tolist() == [0.3, 0.8]


def test_red_sink_kills_rightmost_blue_sink_inert():
    atoms = [geo.ColoredAtom(0.3, 1.0, geo.BLUE), geo.ColoredAtom(0.6, 2.0, geo.BLUE)]
    b = hp.SourcesSinks(sinks=[1.5, 2.5], sink_colors=[geo.BLUE, geo.RED])
    rb = geo.simulate_redblue(0, 1, 3, 0.5, b, atoms=atoms)
    assert rb.alive_positions(3).tolist() == [0.3]
    assert rb.sink_targets == [-1, 1]


def test_alpha_out_of_range():
    with pytest.raises(ValueError):
        geo.simulate_redblue(0, 1, 1, 1.0, rng=1)


def test_redblue_matches_direct_in_law():
    gen = np.random.default_rng(402)
    alpha, reps = 2 / 3, 4000
    dist = OffspringDistribution.geometric(alpha)
    rb = [geo.simulate_redblue(0, 1, 5, alpha, rng=gen).count(5) for _ in range(reps)]
    direct = [len(hp.simulate(0, 1, 5, dist, rng=gen).alive_positions(5)) for _ in range(reps)]
    top = max(max(rb), max(direct)) + 1
    table = np.array([np.bincount(rb, minlength=top), np.bincount(direct, minlength=top)])
    table = table[:, table.sum(axis=0) >= 10]
    assert stats.chi2_contingency(table).pvalue > 0.01
    assert abs(np.mean(rb) - np.mean(direct)) < 0.05 * np.mean(direct)


def test_redblue_stationary_boundary():
    gen = np.random.default_rng(403)
    lam, alpha, t, reps = 1.0, 0.5, 3.0, 4000
    counts = []
    for _ in range(reps):
        b = geo.redblue_boundary(0, 1, t, lam, alpha, gen)
        counts.append(geo.simulate_redblue(0, 1, t, alpha, b, gen).count(t))
    mean = lam + (1 - alpha) * t
    assert abs(np.mean(counts) - mean) < 3 * math.sqrt(mean / reps)


def test_tagged_trajectory_shape_and_csv():
    tr = geo.track_tagged_particle(1.0, 0.5, 10.0, m_gaps=2, rng=404, sample_times=[0, 5, 10])
    assert np.all(np.diff(tr.x) >= 0)
    assert tr.x[0] >= 0
    assert tr.gaps.shape == (3, 2) and np.all(tr.gaps > 0)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,X,gap_1,gap_2" and len(lines) == 4
    again = geo.track_tagged_particle(1.0, 0.5, 10.0, m_gaps=2, rng=404, sample_times=[0, 5, 10])
    assert again.to_csv() == tr.to_csv()


def test_tagged_initial_gaps_exponential():
    gen = np.random.default_rng(405)
    g = np.array([geo.track_tagged_particle(2.0, 0.5, 1.0, m_gaps=2, rng=gen, sample_times=[0]).gaps[0]
                  for _ in range(1500)])
    for col in g.T:
        assert stats.kstest(col, "expon", args=(0, 0.5)).pvalue > 0.005


def test_tagged_window_expansion_keeps_result_valid():
    tr = geo.track_tagged_particle(1.0, 0.5, 5.0, m_gaps=4, rng=406, right_width=1.0, sample_times=[0, 5])
    assert tr.expansions >= 1
    assert tr.window[1] > 1.0


def test_tagged_errors():
    with pytest.raises(ValueError):
        geo.track_tagged_particle(0.0, 0.5, 1.0, rng=1)
    with pytest.raises(ValueError):
        geo.track_tagged_particle(1.0, 0.5, 1.0, rng=1, sample_times=[2.0])


def test_formulas():
    assert geo.first_gap_mean(1, 0.5, 4) == pytest.approx(1 / 3)
    assert geo.mean_displacement(1, 0.5, 50) == pytest.approx(25 / 26)
    assert geo.mean_displacement(1, 0.5, 200) == pytest.approx(100 / 101)
    assert geo.default_left_width(1, 0.5) == pytest.approx(10.0)


def test_trees_crossing_origin_small():
    gen = np.random.default_rng(407)
    counts = [geo.trees_crossing_origin(1.0, 0.5, 5.0, 10.0, gen) for _ in range(200)]
    assert np.mean(counts) >= 0.5
    assert max(counts) < 20
