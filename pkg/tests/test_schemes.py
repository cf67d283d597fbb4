import json
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hpcycle.errors import BudgetExceeded, ConfigError
from hpcycle.hadamard import hpo_ratio
from hpcycle.schemes import (
    PhaseScheme,
    build_cpc,
    build_hpc,
    build_scheme,
    build_tpc,
    class_weight,
    next_pow2,
    reference_pulse,
    scheme_complexity,
    search_complete_cycles,
    verify_scheme,
)


def _direct_ratio(scheme, exclude_reference=None):
    """Oracle: walk every class and sum its weight row by row."""
    ref = reference_pulse(scheme) if exclude_reference is None else (1 if exclude_reference else None)
    pulses = [j for j in range(1, scheme.m + 1) if j != ref]
    total = cancelled = 0
    for q in range(1, len(pulses) + 1):
        for f in combinations(pulses, q):
            total += 1
            cancelled += class_weight(scheme, f) == 0
    return Fraction(cancelled, total) if total else Fraction(1)


class TestBuilders:
    """Row layouts and complexities of the three constructions."""

    def test_tpc(self):
        s = build_tpc(3)
        assert s.rows.tolist() == [[1, 1, 1, 1], [-1, 1, 1, 1]]
        assert s.sign.tolist() == [1, -1]

    def test_cpc_two_pulses_matches_four_row_table(self):
        s = build_cpc(2)
        # prep +X throughout; inversion phases (+,+), (+,-), (-,+), (-,-); all added
        assert s.rows.tolist() == [[1, 1, 1], [1, 1, -1], [1, -1, 1], [1, -1, -1]]
        assert s.sign.tolist() == [1, 1, 1, 1]

    def test_cpc_four_pulses_matches_sixteen_row_table(self):
        s = build_cpc(4)
        expected = [[1, *(1 - 2 * ((i >> b) & 1) for b in (3, 2, 1, 0))] for i in range(16)]
        assert s.rows.tolist() == expected

    def test_cpc_combined_form(self):
        s = build_cpc(3, combine_tpc=True)
        assert s.n_rows == 8
        assert np.all(s.rows[:, 1] == 1)
        assert np.array_equal(s.sign, s.prep)

    def test_cpc_budget(self):
        with pytest.raises(BudgetExceeded, match="2\\*\\*30"):
            build_cpc(30)

    def test_hpc_layout(self):
        s = build_hpc(4)
        assert s.n_rows == 16
        assert np.all(s.rows[:, 1] == 1)
        assert np.array_equal(s.sign, s.prep)
        assert s.rows[:8, 0].tolist() == [1] * 8 and s.rows[8:, 0].tolist() == [-1] * 8

    @pytest.mark.parametrize("m,rows", [(32, 128), (34, 256), (16, 64), (1, 4), (5, 32)])
    def test_hpc_row_counts(self, m, rows):
        assert build_hpc(m).n_rows == rows == scheme_complexity("hpc", m)

    @given(st.integers(2, 200))
    def test_hpc_complexity_bounds(self, m):
        rows = scheme_complexity("hpc", m)
        assert 4 * m <= rows <= 8 * m - 8

    def test_complexities(self):
        assert scheme_complexity("tpc", 8) == 2
        assert scheme_complexity("cpc", 16) == 65536
        assert next_pow2(17) == 32
        with pytest.raises(ValueError):
            scheme_complexity("xyz", 3)
        with pytest.raises(ValueError):
            build_scheme("xyz", 3)


class TestSchemeJson:
    """Serialization and validation with every problem listed."""

    @pytest.mark.parametrize("kind", ["tpc", "cpc", "hpc"])
    def test_round_trip(self, kind):
        s = build_scheme(kind, 5)
        back = PhaseScheme.from_json(s.to_json())
        assert back.kind == s.kind and back.m == s.m
        assert np.array_equal(back.rows, s.rows) and np.array_equal(back.sign, s.sign)

    def test_all_problems_reported(self):
        bad = {"m": 2, "kind": "weird", "sign": [1, 2], "rows": [[1, 1, 0], [1, 1]]}
        with pytest.raises(ConfigError) as err:
            PhaseScheme.from_dict(bad)
        text = "\n".join(err.value.problems)
        assert "kind" in text and "sign[1]" in text and "rows[0][2]" in text and "rows[1]" in text

    def test_missing_keys_and_bad_json(self):
        with pytest.raises(ConfigError) as err:
            PhaseScheme.from_dict({"m": 1})
        assert len(err.value.problems) == 3
        with pytest.raises(ConfigError, match="line 1"):
            PhaseScheme.from_json("{not json")


class TestVerification:
    """Orthogonality reports from the exact and sampled routes."""

    @pytest.mark.parametrize("m", range(1, 13))
    def test_cpc_complete(self, m):
        assert verify_scheme(build_cpc(m)).ratio == 1.0
        assert verify_scheme(build_cpc(m, combine_tpc=True)).ratio == 1.0

    def test_tpc_cancels_nothing(self):
        r = verify_scheme(build_tpc(6))
        assert r.ratio == 0.0 and r.desired_survives

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_hpc_power_of_two_matches_pooled_ratio(self, n):
        r = verify_scheme(build_hpc(2**n))
        assert r.ratio_exact == hpo_ratio("stacked", n)

    @pytest.mark.parametrize("m", [2, 3, 4, 5, 7, 8, 11, 12])
    def test_methods_agree_with_direct_walk(self, m):
        s = build_hpc(m)
        exhaustive = verify_scheme(s, method="exhaustive")
        subspace = verify_scheme(s, method="subspace")
        assert exhaustive.ratio_exact == subspace.ratio_exact == _direct_ratio(s)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 12), st.data())
    def test_random_schemes(self, m, n_rows, data):
        rows = np.array(data.draw(st.lists(st.lists(st.sampled_from([1, -1]), min_size=m + 1, max_size=m + 1),
                                           min_size=n_rows, max_size=n_rows)))
        sign = np.array(data.draw(st.lists(st.sampled_from([1, -1]), min_size=n_rows, max_size=n_rows)))
        s = PhaseScheme(m=m, kind="custom", rows=rows, sign=sign)
        for excl in (False, True):
            a = verify_scheme(s, method="exhaustive", exclude_reference=excl)
            b = verify_scheme(s, method="subspace", exclude_reference=excl)
            assert a.ratio_exact == b.ratio_exact == _direct_ratio(s, excl)

    def test_flipped_entry_leaves_survivors(self):
        s = build_cpc(3)
        rows = s.rows.copy()
        rows[2, 3] *= -1
        edited = PhaseScheme(m=3, kind="custom", rows=rows, sign=s.sign)
        r = verify_scheme(edited)
        assert r.ratio < 1 and r.surviving_classes
        for f in r.surviving_classes:
            assert class_weight(edited, f) != 0

    def test_reference_pulse_rule(self):
        assert reference_pulse(build_hpc(8)) == 1
        assert reference_pulse(build_cpc(3)) is None
        assert reference_pulse(build_tpc(3)) == 1

    def test_sampled_close_to_exact(self):
        s = build_hpc(16)
        exact = verify_scheme(s)
        sampled = verify_scheme(s, method="sampled", samples=20000, seed=1)
        assert not sampled.exact and sampled.samples == 20000
        assert abs(sampled.ratio - exact.ratio) < 5 * sampled.standard_error + 1e-3

    @pytest.mark.parametrize("m", range(17, 65))
    def test_hpc_above_98_percent(self, m):
        assert verify_scheme(build_hpc(m)).ratio > 0.98

    def test_report_serializes(self):
        d = verify_scheme(build_hpc(8)).to_dict()
        json.dumps(d)
        assert d["ratio_exact"] == str(Fraction(d["cancelled"], d["total_classes"]))

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            verify_scheme(build_hpc(40), method="exhaustive", budget=2**20)


class TestMinimality:
    """No complete cycle below 2**m rows."""

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_none_below_full_size(self, m):
        assert not search_complete_cycles(m).exists

    @pytest.mark.parametrize("m", [1, 2])
    def test_found_at_full_size(self, m):
        assert search_complete_cycles(m, max_rows=2**m).exists

    def test_limit(self):
        with pytest.raises(BudgetExceeded):
            search_complete_cycles(4, limit=1000)
