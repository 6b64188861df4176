#!/usr/bin/env python3
"""
Test the scale ladder, growth function and vector classification.
"""

import sys
import math
import pytest
import numpy as np
from pathlib import Path

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from model import LARGE_P, SMALL_P, stream_generator
from structure import (
    VECTOR_FAMILIES,
    ClassParams,
    DegenerateLadderError,
    GrowthFunction,
    StructureError,
    class_representative,
    classify_vector,
    growth_bn,
    growth_cap_holds,
    growth_eval,
    partition_witness,
    psi_ladder,
    random_vector,
    scale_sequence,
    steep_norm_bound,
    triple_norm,
)


def ladder(n: int, p: float, beta: int = 1):
    cp = ClassParams.defaults(beta)
    seq = scale_sequence(n, p, beta, cp.gamma, cp.r)
    return cp, seq, GrowthFunction.build(seq, cp)


class TestClassParams:
    """Test class constant validation"""

    def test_defaults_are_valid(self):
        cp = ClassParams.defaults(3)
        assert cp.beta == 3
        assert cp.k_threshold > 24
        assert 0 < cp.phi0 < 1 / 6

    @pytest.mark.parametrize("overrides", [
        {"r": 0.2},
        {"delta": 0.02},
        {"rho": 0.0},
        {"phi": 1.0},
        {"gamma": 0.5},
        {"k_threshold": 8},
        {"phi0": 0.6},
    ])
    def test_invalid_constants(self, overrides):
        with pytest.raises(StructureError):
            ClassParams.defaults(1, **overrides)

    def test_validate_against_reports_empty_t3(self):
        cp, seq, _ = ladder(500, math.log(500) / 500)
        notes = cp.validate_against(seq)
        assert any("T3 is empty" in note for note in notes)


class TestScaleSequence:
    """Test ladder construction in both regimes"""

    def test_small_p_ladder(self):
        n = 500
        p = math.log(n) / n
        _, seq, _ = ladder(n, p)
        assert seq.regime == SMALL_P
        rungs = seq.n_j[:seq.s + 1]
        assert rungs[0] == 1
        assert all(b > a for a, b in zip(rungs, rungs[1:]))
        assert seq.n_j[seq.s] == math.ceil(1 / (4.0 * p))
        assert seq.n_j[seq.s + 1] == math.ceil(math.sqrt(n / p))
        assert seq.r_index == math.floor(0.05 * n)
        assert seq.base_fallback

    def test_large_p_ladder(self):
        _, seq, _ = ladder(500, 0.1)
        assert seq.regime == LARGE_P
        assert seq.n_j[:seq.s + 1] == (1, 2, 3)

    def test_small_n_truncation(self):
        _, seq, _ = ladder(60, math.log(60) / 60)
        rungs = seq.n_j[:seq.s + 1]
        assert all(b > a for a, b in zip(rungs, rungs[1:]))

    def test_pn_too_small(self):
        with pytest.raises(StructureError):
            scale_sequence(100, 0.005)

    def test_collapsing_ladder(self):
        with pytest.raises(DegenerateLadderError):
            scale_sequence(100, 0.3)

    def test_psi_ladder(self):
        psis, m = psi_ladder(100.0, 6.0)
        assert m == len(psis)
        assert psis[0] == pytest.approx(1 / math.sqrt(2))
        assert psis[-2] < 100.0 ** 2 * 6.0 <= 3 * psis[-2]


class TestGrowthFunction:
    """The growth-function contract"""

    @pytest.mark.parametrize("n,p", [(500, math.log(500) / 500), (2000, math.log(2000) / 2000), (500, 0.1)])
    def test_growth_property(self, n, p):
        _, _, g = ladder(n, p)
        ts = np.logspace(0, math.log10(n), 60)
        for a in range(2, 65):
            assert np.all(g(a * ts) >= g(ts) + a - 1e-9 * g(a * ts))

    def test_nondecreasing(self):
        _, _, g = ladder(1000, math.log(1000) / 1000)
        values = g(np.linspace(1, 5000, 4000))
        assert np.all(np.diff(values) >= 0)

    def test_partial_products_bounded_by_k3(self):
        _, _, g = ladder(500, math.log(500) / 500)
        assert np.all(g.partial_products(60) <= g.k3 * (1 + 1e-12))

    @pytest.mark.parametrize("n,p", [(500, 0.1), (2000, 0.05)])
    def test_b_n_bound(self, n, p):
        _, _, g = ladder(n, p)
        assert g.b_n <= n ** 1.3 * (p * n) ** 7

    def test_domain(self):
        _, _, g = ladder(500, 0.1)
        with pytest.raises(StructureError):
            g(0.5)
        with pytest.raises(StructureError):
            growth_eval(g, 0.5)

    def test_scalar_evaluators(self):
        n = 500
        _, _, g = ladder(n, 0.1)
        value = growth_eval(g, 7.0)
        assert isinstance(value, float)
        assert value == float(g(np.array([7.0]))[0])
        assert growth_eval(g, 14.0) >= value + 2 - 1e-9 * growth_eval(g, 14.0)
        assert growth_bn(g) == pytest.approx(math.sqrt(float(np.sum(g.profile() ** 2))))


class TestClassification:
    """Class representatives land in their classes"""

    def setup_method(self):
        self.n = 400
        self.p = math.log(self.n) / self.n
        self.cp, self.seq, self.g = ladder(self.n, self.p)
        self.rng = stream_generator(7, 1)

    def test_zero_vector(self):
        witness = partition_witness(np.zeros(self.n), self.cp, self.seq, self.g)
        assert witness.kind == "zero"

    def test_t1_representative(self):
        x = class_representative("T1", self.seq, self.cp, self.rng, j=1)
        label = classify_vector(x, self.cp, self.seq, self.g)
        assert label.t1_index == 1

    def test_t2_representative(self):
        x = class_representative("T2prime", self.seq, self.cp, self.rng)
        label = classify_vector(x, self.cp, self.seq, self.g)
        assert label.has("T2")
        assert partition_witness(x, self.cp, self.seq, self.g).kind == "steep"

    def test_almost_constant_representative(self):
        x = class_representative("AC", self.seq, self.cp, self.rng)
        label = classify_vector(x, self.cp, self.seq, self.g)
        assert label.has("AC")
        assert not label.steep

    def test_gradual_representative(self):
        x = class_representative("V", self.seq, self.cp, self.rng, g=self.g)
        label = classify_vector(x, self.cp, self.seq, self.g)
        assert label.has("V")
        assert growth_cap_holds(x, self.seq, self.g)

    def test_representative_errors(self):
        with pytest.raises(StructureError):
            class_representative("V", self.seq, self.cp, self.rng)
        with pytest.raises(StructureError):
            class_representative("T1", self.seq, self.cp, self.rng, j=self.seq.s + 1)
        with pytest.raises(StructureError):
            class_representative("T9", self.seq, self.cp, self.rng)

    def test_wrong_length_rejected(self):
        with pytest.raises(StructureError):
            classify_vector(np.ones(self.n + 1), self.cp, self.seq, self.g)

    def test_partition_covers_random_families(self):
        n = 500
        cp, seq, g = ladder(n, math.log(n) / n)
        rng = stream_generator(3, 1)
        for i in range(200):
            family = VECTOR_FAMILIES[i % len(VECTOR_FAMILIES)]
            witness = partition_witness(random_vector(family, n, rng), cp, seq, g)
            assert witness.found, witness.label.describe()

    def test_unknown_family(self):
        with pytest.raises(StructureError):
            random_vector("uniform", 10, self.rng)


class TestNorms:
    """Triple norm and the steep norm bound"""

    def test_triple_norm_on_constant_vector(self):
        n, p = 100, 0.05
        assert triple_norm(np.ones(n), p) == pytest.approx(math.sqrt(p * n) * math.sqrt(n))

    def test_triple_norm_on_mean_zero_vector(self):
        assert triple_norm([1.0, -1.0], 0.5) == pytest.approx(math.sqrt(2))

    def test_steep_norm_bound_range(self):
        cp, seq, _ = ladder(500, 0.1)
        assert steep_norm_bound(1, seq, cp, 500, 0.1) > 0
        with pytest.raises(StructureError):
            steep_norm_bound(0, seq, cp, 500, 0.1)
