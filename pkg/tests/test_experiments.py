import json
import math

import numpy as np
import pytest

from heaptrees import experiments as ex
from heaptrees.distributions import OffspringDistribution

GEOM = OffspringDistribution.geometric(0.5)
DIRAC2 = OffspringDistribution.dirac(2)
MU = OffspringDistribution.table({1: 0.5, 3: 0.5})


def _draw(gen):
    return float(gen.random())


def test_run_replicas_order_and_determinism():
    a = ex.run_replicas(_draw, "k", 5, 20)
    b = ex.run_replicas(_draw, "k", 5, 20)
    assert a == b
    assert len(set(a)) == 20
    assert ex.run_replicas(_draw, "k", 6, 20) != a
    assert ex.run_replicas(_draw, "k", 5, 5) == a[:5]


def test_run_replicas_parallel_matches_serial():
    assert ex.run_replicas(_draw, "k", 5, 40, jobs=2) == ex.run_replicas(_draw, "k", 5, 40)


def test_run_replicas_rejects_zero():
    with pytest.raises(ValueError):
        ex.run_replicas(_draw, "k", 5, 0)


def test_report_json_is_stable_and_excludes_timing():
    rep = ex.EstimateReport("demo", None, {"a": 1}, 3, 9, "demo|key", 1.5, 0.1)
    rep.add("ok", 1.0, 1.0, "equal", True)
    text = rep.to_json()
    rep.wall_clock = 123.4
    assert rep.to_json() == text
    data = json.loads(text)
    assert data["passed"] is True
    assert data["streams"]["ids"]["demo|key"] == [ex.hash64("demo|key", r) for r in range(3)]
    rep.add("bad", 0.0, 1.0, "equal", False)
    assert not rep.passed
    rep.add("info", 0.0, 1.0, "reported", False, informational=True)
    assert "FAIL" in rep.summary_csv() and "INFO" in rep.summary_csv()


def test_report_omits_large_stream_lists():
    rep = ex.EstimateReport("demo", None, {}, ex.MAX_LISTED_STREAMS + 1, 9, "k")
    assert rep.to_dict()["streams"]["ids"] is None


def test_poisson_and_geometric_gof_calibration():
    gen = np.random.default_rng(3)
    assert ex.poisson_gof(gen.poisson(2.0, 5000), 2.0) > 0.001
    assert ex.poisson_gof(gen.poisson(2.6, 5000), 2.0) < 1e-6
    lives = GEOM.sample(gen, 5000)
    assert ex.geometric_gof(lives, 0.5) > 0.001
    assert ex.geometric_gof(lives, 0.4) < 1e-6


def test_wilson_interval_known_values():
    lo, hi = ex.wilson_interval(50, 100, 0.95)
    # closed form at p = 1/2: centre 1/2, half width z sqrt(1/4n + z^2/4n^2) / (1 + z^2/n)
    z = 1.959963984540054
    half = z * math.sqrt(0.25 / 100 + z * z / 40000) / (1 + z * z / 100)
    assert lo == pytest.approx(0.5 - half) and hi == pytest.approx(0.5 + half)
    assert ex.wilson_interval(0, 10)[0] == 0.0


def test_c_slope_degenerate_grid():
    with pytest.raises(ValueError):
        ex.estimate_c_slope(GEOM, [100], 5, 1)
    with pytest.raises(ValueError):
        ex.estimate_c_slope(GEOM, [100, 100], 5, 1)
    with pytest.raises(ValueError):
        ex.estimate_c_slope(GEOM, [100, 10], 5, 1)


def test_c_slope_small_run_and_rerun():
    tol = {"range": [1.0, 3.0]}
    rep = ex.estimate_c_slope(GEOM, [100, 1000, 10000], 30, 4, tolerances=tol)
    assert rep.passed
    lo, hi = rep.details["ci"]
    assert lo <= rep.estimate <= hi
    again = ex.estimate_c_slope(GEOM, [100, 1000, 10000], 30, 4, tolerances=tol)
    assert again.to_json() == rep.to_json()


def test_unknown_tolerance_key():
    with pytest.raises(ValueError):
        ex.estimate_c_slope(GEOM, [10, 100], 5, 1, tolerances={"bogus": 1})


def test_c_via_d_trivial_and_exact():
    rep = ex.estimate_c_via_D(GEOM, 1, 50, 1)
    assert rep.estimate == 1.0 and rep.stderr == 0.0
    rep = ex.estimate_c_via_D(OffspringDistribution.table({1: 0.5, 10: 0.5}), 2, 200, 1,
                              tolerances={"exact": 1.25})
    assert rep.details["exact"] == pytest.approx(1.25, abs=1e-15)
    assert rep.passed


def test_c_via_d_monotone_report():
    rep = ex.estimate_c_via_D(GEOM, 2000, 300, 2, sub_grid=[10, 100, 1000])
    mono = [c for c in rep.checks if c.name == "monotone_in_n"]
    assert mono and mono[0].passed
    assert np.all(np.diff(rep.details["mean_D"]) >= -0.2)


def test_stationarity_small_run():
    rep = ex.stationarity_suite(1.0, 0.5, [1.0], 2000, 3)
    failing = [c.name for c in rep.checks if not c.passed]
    assert failing == []
    assert any("roots" in c.name for c in rep.checks)


def test_stationarity_rejects_bad_parameters():
    with pytest.raises(ValueError):
        ex.stationarity_suite(-1.0, 0.5, [1.0], 10, 1)
    with pytest.raises(ValueError):
        ex.stationarity_suite(0.0, 1.0, [1.0], 10, 1)


def test_particle_count_mean_matches_intensity():
    counts = [ex._hammersley_replica(np.random.default_rng(i), 1.0, 0.5, 3.0, 5)[0] for i in range(1500)]
    # intensity lam + (1 - alpha) t = 2.5; a count of 3 would be 6 standard errors away
    assert abs(np.mean(counts) - 2.5) < 0.15


def test_halfplane_box_validation():
    with pytest.raises(ValueError):
        ex.halfplane_fixation(DIRAC2, (0, 1, 1, 2), [5, 10], 0.0, 5, 1)
    with pytest.raises(ValueError):
        ex.halfplane_fixation(DIRAC2, (0, 6, 1, 2), [5, 10], -1.0, 5, 1)
    with pytest.raises(ValueError):
        ex.halfplane_fixation(DIRAC2, (0, 1, 2, 1), [5, 10], -1.0, 5, 1)


def test_halfplane_trace_independent_of_left_edge():
    from heaptrees import hammersley_process as hp

    gen = np.random.default_rng(9)
    box = (0.0, 2.0, 0.5, 3.0)
    lab, tim, liv = ex.marked_ppp_arrays(-6.0, 10.0, 0.0, 3.0, GEOM, gen)
    traces = set()
    for a in (-6.0, -3.0, -0.5):
        keep = lab >= a
        rec = hp._run(a, 10.0, 3.0, lab[keep], tim[keep], liv[keep], hp.SourcesSinks())
        traces.add((ex._trace_signature(rec, box), ex._crossings(rec, box)))
    assert len(traces) == 1


def test_halfplane_fixation_dirac_small():
    rep = ex.halfplane_fixation(DIRAC2, (0, 1, 1, 2), [5, 10, 20, 50], -10.0, 400, 2,
                                tolerances={"fixation_min": 0.9})
    fr = rep.details["fixation_fraction_by_step"]
    assert fr[-1] >= 0.9
    assert rep.passed


def test_tagged_particle_small():
    rep = ex.tagged_particle(1.0, 0.5, [4.0], 300, 3, gap_times=[4.0])
    assert rep.passed
    assert rep.details["mean_first_gap"][0] == pytest.approx(1.0, rel=0.2)


def test_coupling_trivial_and_example():
    rep = ex.coupling_inequality_check([0.4], MU, DIRAC2)
    assert rep.details["E_R_mu"] == rep.details["E_R_mu_prime"] == 1.0
    rep = ex.coupling_inequality_check([0.3, 0.6, 0.1, 0.8, 0.5], MU, DIRAC2)
    assert rep.passed
    assert rep.details["E_R_mu_prime"] <= rep.details["E_R_mu"]


def test_coupling_errors():
    with pytest.raises(ValueError, match="means differ"):
        ex.coupling_inequality_check([0.1, 0.2], MU, OffspringDistribution.dirac(3))
    with pytest.raises(ValueError):
        ex.coupling_inequality_check([0.1, 0.2], OffspringDistribution.table({1: 0.5, 5: 0.5}), MU)
    with pytest.raises(ValueError):
        ex.coupling_inequality_check(list(np.linspace(0, 1, 9)), MU, DIRAC2)


def test_coupling_monte_carlo_mode():
    labels = [0.62, 0.38, 1.0, 0.98, 0.69, 0.65]
    exact = ex.coupling_inequality_check(labels, MU, DIRAC2)
    assert exact.details == {"E_R_mu": 2.5, "E_R_mu_prime": 2.0}
    rep = ex.coupling_inequality_check(labels, MU, DIRAC2, exact=False, replicas=4000)
    assert rep.passed
    assert abs(rep.estimate - exact.estimate) < 4 * rep.stderr


def test_heapable_small_n():
    rep = ex.heapable_probability(DIRAC2, 1, 100, 1)
    assert rep.estimate == 1.0
    rep = ex.heapable_probability(GEOM, 2, 20000, 1, block=5000)
    assert rep.passed
    assert abs(rep.estimate - 0.5) < 0.02


def test_exact_heapable():
    assert ex.exact_heapable(1, {2: 1.0}) == 1.0
    assert ex.exact_heapable(2, {1: 0.5, 3: 0.5}) == 0.5
    # binary trees on three labels: the minimum must come first, then any order works
    assert ex.exact_heapable(3, {2: 1.0}) == pytest.approx(1 / 3)
    # a single life allows only the increasing order
    assert ex.exact_heapable(3, {1: 1.0}) == pytest.approx(1 / 6)


def test_heapable_block_size_does_not_matter_for_law():
    a = ex.heapable_probability(DIRAC2, 6, 20000, 2, block=20000)
    b = ex.heapable_probability(DIRAC2, 6, 20000, 2, block=1000)
    exact = a.details["exact"]
    assert a.passed and b.passed
    assert abs(a.estimate - exact) < 4 * a.stderr and abs(b.estimate - exact) < 4 * b.stderr


@pytest.mark.slow
def test_heapable_dirac2_n20():
    rep = ex.heapable_probability(DIRAC2, 20, 10**6, 1)
    assert rep.passed
    assert rep.details["wilson"][1] <= 1 / 20


def test_suites_small():
    for rep in (ex.optimality_suite(100, 1), ex.life_sweep_suite(100, 1), ex.coupling_corpus(10, 1),
                ex.falling_map_suite(100, 1)):
        assert rep.passed, rep.lines()


def test_manifest_validation():
    with pytest.raises(ValueError, match="bogus"):
        ex.validate_manifest({"experiment": "optimality", "replicas": 1, "seed": 1, "bogus": 0})
    with pytest.raises(ValueError):
        ex.validate_manifest({"experiment": "optimality", "replicas": 0, "seed": 1})
    with pytest.raises(ValueError):
        ex.validate_manifest({"experiment": "nope", "replicas": 1, "seed": 1})
    with pytest.raises(ValueError):
        ex.validate_manifest({"experiment": "optimality", "seed": 1})
    with pytest.raises(ValueError):
        ex.run_manifest({"experiment": "c_slope", "replicas": 2, "seed": 1, "params": {"n_grid": [10, 100]}})


def test_manifest_report_is_rerunnable_from_itself():
    m = {"experiment": "c_via_D", "dist": "geom:0.5", "params": {"n": 500, "sub_grid": [50]},
         "replicas": 40, "seed": 11, "tolerances": {"monotone_se": 2.0}}
    rep = ex.run_manifest(m)
    again = ex.run_manifest(json.loads(rep.to_json())["details"]["manifest"])
    assert again.to_json() == rep.to_json()


def test_packaged_manifests_validate():
    from heaptrees.cli import _load_manifest, packaged_manifests

    names = packaged_manifests()
    assert "stationarity_1_half" in names
    for name in names:
        m = _load_manifest(name)
        assert m["seed"] == 1
