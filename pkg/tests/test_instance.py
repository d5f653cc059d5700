import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jdp_pack.instance import (
    GENERATOR_KINDS,
    InstanceError,
    generate,
    load,
    save,
    validate,
)
from conftest import make_instance


class TestValidate:
    def test_minimal_valid_instance(self):
        inst = make_instance([0.5], [[0.5]], 1.0)
        assert validate(inst).ok

    def test_value_out_of_bounds_reports_index(self):
        inst = make_instance([0.2, 1.5], [[0.1], [0.1]], 1.0)
        report = validate(inst)
        assert not report.ok
        assert "index 1" in report.problems[0]

    def test_zero_supply_rejected(self):
        inst = make_instance([0.5], [[0.5]], 0.0)
        report = validate(inst)
        assert not report.ok
        assert "supply must be positive" in report.problems[0]

    def test_demand_out_of_bounds_reports_position(self):
        inst = make_instance([0.5, 0.5], [[0.1, 0.2], [0.3, -0.4]], 1.0)
        report = validate(inst)
        assert not report.ok
        assert "agent 1" in report.problems[0] and "resource 1" in report.problems[0]

    def test_mismatched_shapes_rejected_at_construction(self):
        with pytest.raises(InstanceError):
            make_instance([0.5, 0.5], [[0.5]], 1.0)


class TestGenerate:
    def test_deterministic_given_seed(self):
        a = generate("uniform", 10, 2, 5.0, seed=7)
        b = generate("uniform", 10, 2, 5.0, seed=7)
        assert a == b

    def test_different_seeds_differ(self):
        a = generate("uniform", 10, 2, 5.0, seed=7)
        b = generate("uniform", 10, 2, 5.0, seed=8)
        assert a != b

    @pytest.mark.parametrize("kind", GENERATOR_KINDS)
    def test_entries_in_unit_interval(self, kind):
        inst = generate(kind, 10, 2, 5.0, seed=7)
        assert validate(inst).ok

    def test_tight_column_sums_near_twice_supply(self):
        # direct computation: every resource's total demand in [1.8b, 2.2b]
        inst = generate("tight", 1000, 1, 100.0, seed=1)
        sums = inst.demands.sum(axis=0)
        assert np.all(sums >= 1.8 * 100.0) and np.all(sums <= 2.2 * 100.0)

    def test_tight_column_sums_across_shapes(self):
        for seed in range(5):
            inst = generate("tight", 2000, 4, 80.0, seed=seed)
            sums = inst.demands.sum(axis=0)
            assert np.all(sums >= 1.8 * 80.0) and np.all(sums <= 2.2 * 80.0)

    def test_correlated_values_track_demand(self):
        inst = generate("correlated", 500, 3, 50.0, seed=3)
        expected = np.clip(inst.demands.mean(axis=1), 0.0, 1.0)
        assert np.array_equal(inst.values, expected)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown generator kind"):
            generate("adversarial", 10, 2, 5.0, seed=0)

    def test_degenerate_sizes_rejected(self):
        with pytest.raises(ValueError):
            generate("uniform", 0, 2, 5.0, seed=0)
        with pytest.raises(ValueError):
            generate("uniform", 10, 2, 0.0, seed=0)


class TestSerialization:
    @pytest.mark.parametrize("kind", GENERATOR_KINDS)
    def test_round_trip_identity(self, tmp_path, kind):
        inst = generate(kind, 37, 3, 7.5, seed=11)
        path = tmp_path / "inst.json"
        save(inst, path)
        assert load(path) == inst

    def test_malformed_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"n": 1, "m": 1,\n  "b": oops}')
        with pytest.raises(InstanceError, match="parse error at line 2"):
            load(path)

    def test_invariant_violation_rejected_on_load(self, tmp_path):
        path = tmp_path / "bad.json"
        payload = {"n": 1, "m": 1, "b": 1.0, "values": [0.5], "demands": [[2.0]]}
        path.write_text(json.dumps(payload))
        with pytest.raises(InstanceError, match="demand out of"):
            load(path)

    def test_missing_field_named(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n": 1, "m": 1, "b": 1.0, "values": [0.5]}))
        with pytest.raises(InstanceError, match="'demands'"):
            load(path)

    def test_shape_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        payload = {"n": 2, "m": 1, "b": 1.0, "values": [0.5], "demands": [[0.5]]}
        path.write_text(json.dumps(payload))
        with pytest.raises(InstanceError, match="declared shape"):
            load(path)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=1, max_value=30), st.integers(min_value=1, max_value=4),
           st.integers(min_value=0, max_value=10_000))
    def test_round_trip_property(self, tmp_path_factory, n, m, seed):
        inst = generate("uniform", n, m, 3.25, seed=seed)
        path = tmp_path_factory.mktemp("rt") / "inst.json"
        save(inst, path)
        assert load(path) == inst
