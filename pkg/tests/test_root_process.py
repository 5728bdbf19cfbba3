import math

import numpy as np
import pytest
from scipy import stats

from heaptrees import hammersley_process as hp
from heaptrees import root_process as rp
from heaptrees.distributions import Atom, OffspringDistribution, sample_marked_ppp

GEOM = OffspringDistribution.geometric(0.5)
EXAMPLE_ATOMS = [Atom(0.2, 1 / 7, 1), Atom(0.5, 2 / 7, 2), Atom(0.3, 3 / 7, 1),
        Atom(0.1, 4 / 7, 2), Atom(0.7, 5 / 7, 4), Atom(0.9, 6 / 7, 2)]
# a small instance reproducing the ordering 1 < 2 < 3 of the three falling-map counts
FALL_F = rp.MonotoneBoundary((0.5,), (0.9,), 1.0)
FALL_ATOMS = [Atom(0.51, 2.55, 1), Atom(0.89, 0.98, 1), Atom(0.63, 1.3, 2),
              Atom(0.86, 2.64, 2), Atom(0.15, 0.45, 1)]


def test_no_events_returns_sinks():
    conf, _ = rp.evolve([0.2, 0.7], [], [], 5.0, 1.0)
    assert conf.heights == [0.2, 0.7]


def test_atom_removes_at_most_available_above():
    conf, _ = rp.evolve([0.1, 0.5, 0.8], [], [Atom(-0.3, 0.4, 3)], 1.0, 1.0)
    assert conf.heights == [0.1, 0.4]


def test_source_removes_lowest():
    conf, _ = rp.evolve([0.1, 0.5, 0.8], [(-0.3, 2)], [], 1.0, 1.0)
    assert conf.heights == [0.8]


def test_errors_and_ties():
    with pytest.raises(ValueError):
        rp.evolve([], [], [Atom(-0.3, 1.0, 1)], 1.0, 1.0)
    with pytest.raises(ValueError):
        rp.evolve([0.4], [], [Atom(-0.3, 0.4, 1)], 1.0, 1.0)
    with pytest.raises(ValueError):
        rp.evolve([], [], [Atom(0.3, 0.4, 1)], 1.0, 1.0)


def test_checkpoints_and_x_max():
    atoms = [Atom(-0.2, 0.5, 1), Atom(-0.6, 0.3, 1), Atom(-0.9, 0.1, 1)]
    conf, snaps = rp.evolve([], [], atoms, 0.7, 1.0, checkpoints=[0.1, 0.4, 0.7])
    assert conf.heights == [0.3]
    assert snaps[0.1].heights == [] and snaps[0.4].heights == [0.5] and snaps[0.7].heights == [0.3]


def test_single_atom_and_six_atom_duality():
    assert rp.duality_check([Atom(0.4, 0.7, 2)]) == (1, 1)
    conf = rp.roots_of_box(EXAMPLE_ATOMS, 0, 1, 1)
    assert len(conf) == 3
    rec = hp.simulate(0, 1, 1, None, atoms=EXAMPLE_ATOMS)
    assert conf.heights == rec.root_events


def test_duality_random():
    gen = np.random.default_rng(301)
    for _ in range(1000):
        n = int(gen.integers(1, 101))
        atoms = [Atom(float(u), float(t), int(v))
                 for u, t, v in zip(gen.random(n), gen.random(n), GEOM.sample(gen, n))]
        rec = hp.simulate(0, 1, 1, None, atoms=atoms)
        assert rp.roots_of_box(atoms, 0, 1, 1).heights == rec.root_events


def test_duality_with_sources_and_sinks():
    gen = np.random.default_rng(302)
    for _ in range(300):
        b = hp.stationary_boundary(-1, 2, 4, 1.0, 0.5, GEOM, gen)
        rec = hp.simulate(-1, 2, 4, GEOM, b, gen)
        assert rp.roots_of_box(rec.atoms, -1, 2, 4, b.sources, b.sinks).heights == rec.left_exits


def _random_sets(gen):
    n = int(gen.integers(0, 40))
    atoms = [Atom(-float(u), float(t), int(v))
             for u, t, v in zip(gen.random(n) * 3, gen.random(n), GEOM.sample(gen, n))]
    sinks = gen.random(int(gen.integers(0, 10))).tolist()
    return atoms, sinks


def test_monotone_in_initial_configuration():
    gen = np.random.default_rng(303)
    for _ in range(1000):
        atoms, sinks = _random_sets(gen)
        extra = sinks + gen.random(int(gen.integers(1, 5))).tolist()
        sources = [(-float(u), int(v)) for u, v in zip(gen.random(3) * 3, GEOM.sample(gen, 3))]
        cps = np.linspace(0, 3, 7).tolist()
        c1, s1 = rp.evolve(sinks, sources, atoms, 3.0, 1.0, cps)
        c2, s2 = rp.evolve(extra, sources, atoms, 3.0, 1.0, cps)
        assert c1 <= c2
        assert all(s1[x] <= s2[x] for x in cps)


def test_sources_never_create_roots():
    gen = np.random.default_rng(304)
    for _ in range(1000):
        atoms, _ = _random_sets(gen)
        sources = [(-float(u), int(v)) for u, v in zip(gen.random(4) * 3, GEOM.sample(gen, 4))]
        with_src, _ = rp.evolve([], sources, atoms, 3.0, 1.0)
        without, _ = rp.evolve([], [], atoms, 3.0, 1.0)
        assert with_src <= without


def test_classical_self_duality_in_law():
    # lives all 1: root count of the box matches the particle count of H in law
    gen = np.random.default_rng(305)
    dirac = OffspringDistribution.dirac(1)
    roots, particles = [], []
    for _ in range(3000):
        atoms = sample_marked_ppp(-3, 0, 0, 1, dirac, gen)
        roots.append(len(rp.evolve([], [], atoms, 3.0, 1.0)[0]))
        rec = hp.simulate(0, 1, 3, dirac, rng=gen)
        particles.append(len(rec.alive_positions(3)))
    assert stats.ks_2samp(roots, particles).pvalue > 0.01


def test_boundary_evaluation():
    f = rp.MonotoneBoundary((0.2, 0.5), (1.0, 2.0), 0.8)
    assert [f(0.1), f(0.2), f(0.49), f(0.5), f(0.79), f(0.8)] == [0, 1, 1, 2, 2, math.inf]
    g = rp.MonotoneBoundary.majorant([(0.3, 0.5), (0.1, 0.2), (0.6, 0.4)])
    assert g.breaks == (0.1, 0.3) and g.values == (0.2, 0.5)
    with pytest.raises(ValueError):
        rp.MonotoneBoundary((0.2, 0.5), (2.0, 1.0))


def test_falling_map_identity_and_errors():
    atoms = [Atom(0.2, 0.5, 1), Atom(0.7, 0.9, 3)]
    assert rp.falling_map(atoms, rp.MonotoneBoundary.zero()) == atoms
    with pytest.raises(ValueError):
        rp.falling_map(atoms, rp.MonotoneBoundary((0.5,), (0.9,)))
    with pytest.raises(ValueError):
        rp.falling_map(atoms, rp.MonotoneBoundary((0.1,), (0.1,), 0.6))


def test_falling_map_three_panel_instance():
    assert rp.falling_counts(FALL_ATOMS, FALL_F, 1.0) == (1, 2, 3)


def random_falling_instance(gen):
    k = int(gen.integers(0, 4))
    breaks = np.sort(gen.choice(np.linspace(0.05, 0.95, 19), k, replace=False))
    values = np.sort(gen.random(k) * 2)
    a_f = float(gen.uniform(breaks[-1] if k else 0.05, 1.0)) if gen.random() < 0.5 else math.inf
    f = rp.MonotoneBoundary(tuple(breaks.tolist()), tuple(values.tolist()), a_f)
    top = 4.0
    x_hi = min(a_f, 1.0)
    n = gen.poisson(x_hi * top)
    atoms = []
    for u, t, v in zip(gen.random(n) * x_hi, gen.random(n) * top, GEOM.sample(gen, n)):
        if t > f(u):
            atoms.append(Atom(float(u), float(t), int(v)))
    return atoms, f, float(gen.uniform(0.2, 3.0))


def test_falling_map_inequalities_random():
    gen = np.random.default_rng(306)
    for _ in range(1000):
        atoms, f, t = random_falling_instance(gen)
        a, b, c = rp.falling_counts(atoms, f, t)
        assert a <= b <= c
