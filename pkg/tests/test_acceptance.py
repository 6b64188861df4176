#!/usr/bin/env python3
"""
Acceptance suite.

The quick tests run each criterion at reduced scale. The catalogue presets
run the criteria at full scale and take minutes to hours; set
SPECTRA_FULL_ACCEPTANCE=1 (and optionally SPECTRA_WORKERS) to include them.
"""

import os
import sys
import math
import time
import pytest
from pathlib import Path

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from config import ExperimentCatalog, build_config, config_from_values
from harness import replay_ledger, run
from probability import prob_zero_rowcol_asymptotic, prob_zero_rowcol_exact

CATALOG = str(Path(__file__).parent.parent / "experiments.json")
FULL = os.environ.get("SPECTRA_FULL_ACCEPTANCE") == "1"
WORKERS = int(os.environ.get("SPECTRA_WORKERS", "8"))

FULL_PRESETS = [
    "acceptance-4",
    "acceptance-5-beta1",
    "acceptance-5-beta2",
    "acceptance-6",
    "acceptance-8",
    "acceptance-9-p01",
    "acceptance-9-p03",
    "acceptance-10",
    "acceptance-11",
    "event-census-sparse",
]


def quick(experiment: str, **values):
    values.setdefault("seed", 2026)
    return run(config_from_values({"experiment": experiment, **values}), progress=False)


def records_of(result):
    return {record.name: record for record in result.records}


class TestQuickAcceptance:
    """Each criterion at a scale that runs in seconds"""

    def test_asymptotic_runtime(self):
        start = time.time()
        for n in (500, 1000, 2000):
            p = math.log(n) / n
            exact = prob_zero_rowcol_exact(n, p, max_n=n)
            assert abs(exact - prob_zero_rowcol_asymptotic(n, p)) / exact <= 0.05
        assert time.time() - start < 10.0

    def test_corank_implication_in_tail_run(self):
        result = quick("smin-tail", n=12, p=0.15, trials=300, chunk_size=100, t_grid=(1e-12,))
        assert records_of(result)["corank_implication"].passed

    def test_minmax_property(self):
        for beta in (1, 2):
            result = quick("minmax-audit", n=20, p=0.3, beta=beta, trials=40, chunk_size=20,
                           subset_trials=20, svd_method="jacobi")
            assert records_of(result)["minmax_holds"].passed

    def test_partition_completeness(self):
        result = quick("partition-check", n=500, pn="log", trials=400, chunk_size=100)
        assert records_of(result)["partition_completeness"].passed

    def test_bounds_sandwich(self):
        start = time.time()
        result = quick("bounds-audit", n=100, p=0.1, trials=1000, chunk_size=1000)
        assert result.passed
        assert time.time() - start < 10.0

    def test_event_census_preset(self):
        overrides = {"trials": 40, "chunk_size": 20, "seed": 3}
        config = build_config("event-census-sparse", overrides=overrides, catalog=ExperimentCatalog(CATALOG))
        result = run(config, progress=False)
        assert result.passed, [r.name for r in result.failures]
        names = {record.name for record in result.records}
        assert {"event[omega_1]", "omega_1_complement", "low_support_exceeds[k=1]"} <= names

    def test_determinism_across_workers(self):
        values = {"experiment": "smin-tail", "n": 40, "pn": "log", "trials": 120, "chunk_size": 16,
                  "t_grid": (1e-12, 1e-3), "seed": 7}
        single = run(config_from_values({**values, "workers": 1}), progress=False)
        pooled = run(config_from_values({**values, "workers": 3}), progress=False)
        assert single.to_json() == pooled.to_json()
        assert replay_ledger(single) == []


@pytest.mark.skipif(not FULL, reason="full-scale acceptance runs need SPECTRA_FULL_ACCEPTANCE=1")
class TestFullAcceptance:
    """Catalogue presets at the scale of the acceptance criteria"""

    @pytest.mark.parametrize("preset", FULL_PRESETS)
    def test_preset_passes(self, preset):
        config = build_config(preset, overrides={"workers": WORKERS}, catalog=ExperimentCatalog(CATALOG))
        result = run(config, progress=False)
        assert result.status == "complete"
        assert result.passed, [r.name for r in result.failures]

    def test_tail_run_is_byte_identical_across_workers(self):
        catalog = ExperimentCatalog(CATALOG)
        single = run(build_config("acceptance-4", overrides={"workers": 1}, catalog=catalog), progress=False)
        pooled = run(build_config("acceptance-4", overrides={"workers": WORKERS}, catalog=catalog), progress=False)
        assert single.to_json() == pooled.to_json()
