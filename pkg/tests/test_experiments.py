#!/usr/bin/env python3
"""
Test tallies, chunk planning and the experiment kernels on small inputs.
"""

import sys
import math
import pytest
import numpy as np
from pathlib import Path

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from config import EXPERIMENT_NAMES, ConfigError, config_from_values
from model import MATRIX_CHANNEL, MatrixSample, ModelParams, sample_bernoulli, stream_id_for
from nets import MAX_COVER_N
from expansion import EVENT_NAMES
from probability import (
    hypergeometric_bound_informative,
    operator_norm_statistic,
    prob_zero_rowcol_asymptotic,
    prob_zero_rowcol_exact,
)
from experiments import (
    BOUND_FAMILIES,
    EXPERIMENTS,
    Chunk,
    StatRecord,
    Tally,
    atom_concentration,
    bounds_grid,
    calibration_id,
    get_experiment,
    omega_rc_prediction,
    plan_chunks,
    sample_digest,
)


def make_config(experiment: str, **values):
    values.setdefault("trials", 10)
    return config_from_values({"experiment": experiment, **values})


def run_kernel(cfg):
    """Evaluate every chunk in order and finalize, as the harness does."""
    kernel = get_experiment(cfg.experiment)
    kernel.validate(cfg)
    tally = Tally()
    for chunk in plan_chunks(cfg.trials, cfg.chunk_size):
        tally = tally.merge(Tally.from_dict(kernel.run_chunk(cfg, chunk)["tally"]))
    return {record.name: record for record in kernel.finalize(cfg, tally)}


class TestTally:
    """Test additive partial results"""

    def test_add_counts_booleans(self):
        tally = Tally()
        tally.add("hits", True)
        tally.add("hits", np.bool_(False))
        tally.add("hits")
        tally.add("mass", np.float64(0.5))
        assert tally.get("hits") == 2
        assert tally.get("mass") == 0.5
        assert tally.get("absent") == 0

    def test_vectors_and_positions(self):
        tally = Tally()
        tally.add_vector("below", [True, False, True])
        tally.add_vector("below", [1, 1, 1])
        tally.add_at("hist", 2, 4)
        tally.add_at("hist", 2, 4)
        assert tally.get("below") == [2, 1, 2]
        assert tally.get("hist") == [0, 0, 2, 0]

    def test_extrema(self):
        tally = Tally()
        for value in (3.0, -1.0, 2.0):
            tally.maximum("top", value)
            tally.minimum("bottom", value)
        assert tally.maxima["top"] == 3.0
        assert tally.minima["bottom"] == -1.0

    def test_merge_is_order_independent_for_counts(self):
        a, b = Tally(), Tally()
        a.add("x", 2)
        a.add_vector("v", [1, 0])
        a.maximum("m", 1.0)
        b.add("x", 5)
        b.add("y")
        b.add_vector("v", [0, 3])
        b.maximum("m", 4.0)
        assert a.merge(b).to_dict() == b.merge(a).to_dict()
        assert a.merge(b).get("v") == [1, 3]

    def test_merge_leaves_inputs_unchanged(self):
        a, b = Tally(), Tally()
        a.add_vector("v", [1, 1])
        b.add_vector("v", [2, 2])
        a.merge(b)
        assert a.get("v") == [1, 1]

    def test_dict_round_trip(self):
        tally = Tally()
        tally.add("x", 3)
        tally.minimum("s", 0.25)
        assert Tally.from_dict(tally.to_dict()).to_dict() == tally.to_dict()


class TestChunks:
    """Test chunk planning and sample digests"""

    def test_plan_chunks(self):
        assert plan_chunks(10, 4) == [Chunk(0, 0, 4), Chunk(1, 4, 8), Chunk(2, 8, 10)]
        assert plan_chunks(3, 10) == [Chunk(0, 0, 3)]
        assert plan_chunks(10, 4)[-1].size == 2
        assert list(Chunk(1, 4, 6).trials) == [4, 5]

    def test_digest_follows_matrix_bits(self):
        params = ModelParams(12, 0.3, seed=1)
        a = sample_bernoulli(params, 0)
        assert sample_digest(a) == sample_digest(sample_bernoulli(params, 0))
        assert sample_digest(a) != sample_digest(sample_bernoulli(params, 3))

    def test_digest_distinguishes_dtypes(self):
        assert sample_digest(np.zeros(3, dtype=np.int64)) != sample_digest(np.zeros(3, dtype=np.float64))
        assert sample_digest(None) == sample_digest(None)
        assert sample_digest(["binomial-upper", 20, 0.1, 4]) != sample_digest(["binomial-upper", 20, 0.1, 5])

    def test_stat_record_round_trip(self):
        record = StatRecord("zero_rowcol", 30, 0.1, 1, 0.2, 0.01, prediction=0.21, tolerance="3sigma", passed=True)
        data = record.to_dict()
        assert data["pass"] is True
        assert StatRecord.from_dict(data) == record


class TestRegistry:
    """Every experiment kind has a kernel"""

    def test_every_name_registered(self):
        assert set(EXPERIMENTS) == set(EXPERIMENT_NAMES)
        for name in EXPERIMENT_NAMES:
            assert get_experiment(name).name == name

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            get_experiment("everything")

    def test_trial_stream_ranges(self):
        ranges = get_experiment("smin-tail").stream_ranges(Chunk(1, 4, 8))
        assert ranges == {"matrix": [stream_id_for(4, MATRIX_CHANNEL), stream_id_for(7, MATRIX_CHANNEL)]}

    def test_chunk_stream_ranges(self):
        ranges = get_experiment("rogozin-audit").stream_ranges(Chunk(3, 30, 40))
        assert ranges["matrix"] == [stream_id_for(3, MATRIX_CHANNEL)] * 2

    def test_replay_digest_matches_run(self):
        cfg = make_config("zero-prob", n=15, p=0.2, trials=6)
        kernel = get_experiment("zero-prob")
        chunk = Chunk(0, 0, 6)
        assert kernel.replay_digest(cfg, chunk) == kernel.run_chunk(cfg, chunk)["digest"]


class TestPredictions:
    """Exact and asymptotic zero-pattern predictions"""

    def test_exact_in_range(self):
        assert omega_rc_prediction(30, 0.1, 1) == pytest.approx(prob_zero_rowcol_exact(30, 0.1))

    def test_asymptotic_beyond_range(self):
        n = 1000
        p = math.log(n) / n
        assert omega_rc_prediction(n, p, 1) == pytest.approx(prob_zero_rowcol_asymptotic(n, p))


class TestSpectralKernels:
    """Spectral experiments on fixed and sampled inputs"""

    def test_smin_tail_on_identity(self):
        cfg = make_config("smin-tail", n=5, p=0.5, trials=4, chunk_size=3, fixed_input="identity",
                          t_grid=(0.5, 2.0))
        records = run_kernel(cfg)
        assert records["smin_tail[t=0.5]"].empirical == 0.0
        assert records["smin_tail[t=2]"].empirical == 1.0
        assert records["smin_minimum"].empirical == pytest.approx(1.0)
        assert records["omega_rc_complement"].prediction is None
        assert records["corank_implication"].passed

    def test_corank_census_on_zeros(self):
        cfg = make_config("corank-census", n=4, p=0.5, trials=3, fixed_input="zeros")
        records = run_kernel(cfg)
        assert records["mean_corank"].empirical == 4.0
        assert records["corank_ge_beta"].empirical == 1.0
        assert records["corank_share[4]"].empirical == 1.0
        assert records["corank_implication"].passed

    def test_corank_census_sampled(self):
        records = run_kernel(make_config("corank-census", n=10, p=0.15, trials=40, seed=2))
        assert records["corank_implication"].passed
        assert records["corank_ge_beta"].prediction == pytest.approx(omega_rc_prediction(10, 0.15, 1))

    def test_corank_census_records_rank_method(self):
        exact = run_kernel(make_config("corank-census", n=6, p=0.3, trials=4, seed=1))
        assert exact["rank_method[exact]"].empirical == 1.0
        assert "rank_method[floating]" not in exact
        floating = run_kernel(make_config("corank-census", n=6, p=0.3, trials=4, seed=1, exact_rank_max_n=5))
        assert floating["rank_method[floating]"].empirical == 1.0
        assert "rank_method[exact]" not in floating

    def test_zero_prob_on_zeros(self):
        records = run_kernel(make_config("zero-prob", n=10, p=0.5, trials=5, fixed_input="zeros"))
        assert records["zero_rowcol"].empirical == 1.0
        assert records["mean_zero_columns"].empirical == 10.0
        assert "zero_rowcol_asymptotic" not in records

    def test_zero_prob_sampled(self):
        records = run_kernel(make_config("zero-prob", n=20, p=0.1, beta=2, trials=200, chunk_size=64))
        assert records["zero_rowcol"].prediction == pytest.approx(prob_zero_rowcol_exact(20, 0.1))
        assert 0.0 <= records["zero_rowcol"].empirical <= 1.0
        assert "omega_rc_complement" in records

    def test_minmax_audit(self):
        cfg = make_config("minmax-audit", n=8, p=0.3, beta=2, trials=10, subset_trials=5, svd_method="jacobi")
        records = run_kernel(cfg)
        assert records["minmax_holds"].passed

    def test_distance_diagnostic(self):
        records = run_kernel(make_config("distance-diagnostic", n=8, p=0.4, trials=5))
        assert records["smin_below_distance"].passed
        assert records["smin_above_distance_over_sqrt_n"].passed


class TestStructureKernels:
    """Partition and anticoncentration experiments"""

    def test_partition_check(self):
        records = run_kernel(make_config("partition-check", n=500, pn="log", trials=25, chunk_size=10))
        assert records["partition_completeness"].passed
        shares = sum(records[f"witness_share[{kind}]"].empirical
                     for kind in ("zero", "steep", "gradual", "anticoncentration", "counterexample"))
        assert shares == pytest.approx(1.0)

    def test_partition_check_needs_ladder(self):
        with pytest.raises(ConfigError, match="vector classes"):
            run_kernel(make_config("partition-check", n=100, p=0.3, trials=2))

    def test_net_audit_scale_limit(self):
        with pytest.raises(ConfigError, match="desk scale"):
            get_experiment("net-audit").validate(make_config("net-audit", n=MAX_COVER_N + 1, pn="log"))

    def test_t23_individual_small_ball(self):
        records = run_kernel(make_config("t23-anticoncentration", n=400, pn="log", trials=20, seed=4))
        assert records["small_image"].passed
        record = records["indiv_small_ball[T2prime]"]
        assert 0.0 < record.bound < 1.0
        # q < 1 and m1 = m0 for T2', so only T3' can reach the spread estimate
        assert "indiv_spread[T2prime]" not in records
        for name, record in records.items():
            if name.startswith("indiv_"):
                assert record.passed, name

    def test_net_audit_basic(self):
        records = run_kernel(make_config("net-audit", n=6, p=0.5, trials=20, chunk_size=7,
                                         net_kind="basic", net_l=2))
        assert records["net_coverage[basic]"].passed
        assert records["net_max_distance[basic]"].passed


class TestProbabilityKernels:
    """Bounds, concentration and expansion experiments"""

    def test_bounds_grid_is_inside_regimes(self):
        for point in bounds_grid():
            assert point[0] in BOUND_FAMILIES
            if point[0] == "hypergeometric":
                _, n, m, k, l = point
                assert 1 <= l <= k <= m <= n // 2

    def test_bounds_audit_sweeps_grid(self):
        trials = len(bounds_grid())
        records = run_kernel(make_config("bounds-audit", n=100, p=0.1, trials=trials, chunk_size=500))
        for family in BOUND_FAMILIES:
            assert records[f"{family}_sandwich"].passed
        assert sum(records[f"{f}_points"].empirical for f in BOUND_FAMILIES) == trials
        informative = sum(1 for point in bounds_grid()
                          if point[0] == "hypergeometric" and hypergeometric_bound_informative(*point[1:]))
        assert records["hypergeometric_informative_points"].empirical == informative
        assert 0 < informative < records["hypergeometric_points"].empirical

    def test_atom_concentration(self):
        values = np.array([5.0, 0.0, 1.0])
        counts = np.array([4, 2, 3])
        assert atom_concentration(values, counts, 0.5) == 5
        assert atom_concentration(values, counts, 0.1) == 4

    def test_rogozin_audit(self):
        cfg = make_config("rogozin-audit", n=50, p=0.2, trials=400, chunk_size=150, weights=3,
                          max_weight_length=6)
        records = run_kernel(cfg)
        assert {f"rogozin[{w}]" for w in range(3)} <= set(records)
        for w in range(3):
            assert 0.0 < records[f"rogozin[{w}]"].empirical <= 1.0

    def test_rogozin_needs_open_p(self):
        with pytest.raises(ConfigError):
            get_experiment("rogozin-audit").validate(make_config("rogozin-audit", n=10, p=0.0))

    def test_expansion_audit_validation(self):
        kernel = get_experiment("expansion-audit")
        with pytest.raises(ConfigError, match="j1"):
            kernel.validate(make_config("expansion-audit", n=10, p=0.1, j1=5, j2=4))
        with pytest.raises(ConfigError, match="support"):
            kernel.validate(make_config("expansion-audit", n=10, p=0.1, m1=10, support=11))
        with pytest.raises(ConfigError, match="overlap_sizes"):
            kernel.validate(make_config("expansion-audit", n=10, p=0.1, overlap_sizes=(20,)))

    def test_expansion_audit_runs(self):
        cfg = make_config("expansion-audit", n=10, p=0.1, trials=30, m1=200, j1=2, j2=4, support=6,
                          lemma_r=6.0, overlap_sizes=(20, 4, 4))
        records = run_kernel(cfg)
        assert 0.0 <= records["expansion_lemma"].empirical <= 1.0
        assert "overlap_tail" in records
        assert records["mean_expansion_size"].bound == pytest.approx(3.0)


def event_tally(trials: int, omega_1: int, steep_checked: int, steep_holds: int) -> Tally:
    sums = {"events_total": trials, "events_holds_all": trials,
            "steep_checked": trials, "steep_holds": trials - 1,
            "steep_checked_typical": steep_checked, "steep_holds_typical": steep_holds}
    sums.update({f"event[{name}]": trials for name in EVENT_NAMES})
    sums["event[omega_1]"] = omega_1
    return Tally(sums)


class TestEventCensus:
    """Typical-matrix events, their bounds and the steep-vector guarantee"""

    def test_sparse_run_passes(self):
        records = run_kernel(make_config("event-census", n=200, pn="log", trials=40, chunk_size=20, seed=3))
        for name in EVENT_NAMES:
            assert f"event[{name}]" in records
        assert records["omega_1_complement"].bound == pytest.approx(10 / 200 ** 2)
        assert records["omega_1_complement"].passed
        # floor(pn/2) = 2 at pn = log 200
        assert {"low_support_exceeds[k=1]", "low_support_exceeds[k=2]"} <= set(records)
        assert not any(name.startswith("low_support_exceeds[k=3") for name in records)
        failures = [name for name, record in records.items() if record.passed is False]
        assert failures == []

    def test_dense_run_checks_support_excess(self):
        records = run_kernel(make_config("event-census", n=300, pn="2log", trials=10, chunk_size=5, seed=3))
        assert records["omega_1_complement"].passed is None
        assert records["support_excess"].bound < 1e-3
        assert records["support_excess"].passed
        assert not any(name.startswith("low_support_exceeds") for name in records)

    def test_omega_1_complement_verdict(self):
        cfg = make_config("event-census", n=200, pn="log", trials=1000)
        kernel = get_experiment("event-census")
        clean = {r.name: r for r in kernel.finalize(cfg, event_tally(1000, 1000, 50, 50))}
        assert clean["omega_1_complement"].empirical == 0.0
        assert clean["omega_1_complement"].passed
        broken = {r.name: r for r in kernel.finalize(cfg, event_tally(1000, 970, 50, 50))}
        assert broken["omega_1_complement"].empirical == pytest.approx(0.03)
        assert broken["omega_1_complement"].passed is False

    def test_steep_guarantee_verdict(self):
        cfg = make_config("event-census", n=200, pn="log", trials=1000)
        kernel = get_experiment("event-census")
        held = {r.name: r for r in kernel.finalize(cfg, event_tally(1000, 1000, 50, 50))}
        assert held["steep_guarantee_typical"].passed
        assert held["steep_guarantee_typical"].tolerance == "exact"
        # outside the typical events nothing is promised
        assert held["steep_guarantee"].passed is None
        missed = {r.name: r for r in kernel.finalize(cfg, event_tally(1000, 1000, 50, 49))}
        assert missed["steep_guarantee_typical"].passed is False

    def test_fixed_input_has_no_verdicts(self):
        records = run_kernel(make_config("event-census", n=200, pn="log", trials=2, fixed_input="zeros"))
        assert records["omega_1_complement"].passed is None
        assert all(records[f"low_support_exceeds[k={k}]"].passed is None for k in (1, 2))


class TestNormCalibration:
    """Calibration of the operator norm constant"""

    def test_takes_the_worst_sample(self):
        cfg = make_config("norm-calibration", n=60, p=0.1, trials=10, chunk_size=4, seed=7)
        records = run_kernel(cfg)
        worst = max(
            operator_norm_statistic(sample_bernoulli(cfg.model, stream_id_for(t, MATRIX_CHANNEL)), 0.1)
            for t in range(10)
        )
        assert records["c_norm_calibrated"].empirical == pytest.approx(max(1.0, worst))
        assert records["c_norm_calibrated"].passed is None

    def test_assumed_constant_coverage(self):
        cfg = make_config("norm-calibration", n=60, p=0.1, trials=10, seed=7, c_norm=1000.0)
        records = run_kernel(cfg)
        assert records["assumed_c_norm_coverage"].empirical == 1.0
        assert records["assumed_c_norm_coverage"].bound == 1000.0
        assert records["c_norm_calibrated"].empirical < 1000.0

    def test_needs_open_p(self):
        with pytest.raises(ConfigError, match="0 < p < 1"):
            get_experiment("norm-calibration").validate(make_config("norm-calibration", n=10, p=0.0))

    def test_calibration_id_names_the_identity(self):
        cfg = make_config("norm-calibration", n=60, p=0.1)
        other = make_config("norm-calibration", n=60, p=0.1, seed=1)
        assert calibration_id(cfg.identity()).startswith("norm-calibration-")
        assert calibration_id(cfg.identity()) == calibration_id(cfg.identity())
        assert calibration_id(cfg.identity()) != calibration_id(other.identity())
