import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hpcycle.errors import BudgetExceeded
from hpcycle.pathways import (
    Pathway,
    classify,
    echo_phase_shift,
    echo_time,
    enumerate_pathways,
    pathway_report,
    pathway_sum,
    pathway_weight,
    predict_echoes,
    transfer_matrix,
)
from hpcycle.schemes import build_cpc, build_hpc, class_weight
from hpcycle.simulator import NoiseModel, build_sequence, run_circuit


class TestPathwayBasics:
    """Orders, deltas, classes and echo positions."""

    @pytest.mark.parametrize("orders,expected", [
        ((0, -1, 1, -1), 1.0),
        ((0, 1, 1, -1), 3.0),
        ((0, 0, 1, -1), 2.0),
        ((0, 1, 0, -1), 1.0),
    ])
    def test_echo_positions(self, orders, expected):
        assert echo_time(Pathway(orders), (1.0, 2.0)) == expected

    def test_cpmg2_echo_table(self):
        seq = build_sequence("CPMG", 2, tau=1.0)
        found = {pw.orders: echo_time(pw) for pw in enumerate_pathways(seq, -1, echo_only=True)}
        assert found == {(0, -1, 1, -1): 1.0, (0, 1, 1, -1): 3.0, (0, 0, 1, -1): 2.0, (0, 1, 0, -1): 1.0}

    def test_deltas_and_class(self):
        pw = Pathway((0, 1, 0, -1))
        assert pw.deltas == (1, -1, -1)
        assert classify(pw) == frozenset({1, 2})
        assert Pathway((0, -1, 1, -1)).class_f == frozenset()

    def test_rejects_bad_orders(self):
        with pytest.raises(ValueError):
            Pathway((1, 0))
        with pytest.raises(ValueError):
            Pathway((0, 2))

    def test_phase_shift(self):
        pw = Pathway((0, 1, 0, -1))
        assert echo_phase_shift(pw, [0, np.pi, 0]) == pytest.approx(np.pi)
        assert echo_phase_shift(pw, [0, np.pi, np.pi]) == 0.0

    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_enumeration_count(self, m):
        seq = build_sequence("CP", m, tau=1.0)
        assert len(enumerate_pathways(seq, -1)) == 3**m
        assert len(enumerate_pathways(seq, None)) == 3 ** (m + 1)

    def test_budget(self):
        with pytest.raises(BudgetExceeded):
            enumerate_pathways(build_sequence("CP", 20, tau=1.0))

    @given(st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
    def test_transfer_columns_preserve_norm(self, beta, phi):
        # conjugation is unitary on operators; the order basis has norms 1, 1, 1/2
        t = transfer_matrix(beta, phi)
        weights = np.array([1.0, 0.5, 1.0])
        for p_in in range(3):
            assert np.sum(weights * np.abs(t[:, p_in]) ** 2) == pytest.approx(weights[p_in], abs=1e-12)

    def test_ideal_inversion_swaps_orders(self):
        t = transfer_matrix(np.pi, 0.0)
        assert abs(t[2, 0]) == pytest.approx(1.0)
        assert abs(t[0, 2]) == pytest.approx(1.0)
        assert abs(t[1, 1]) == pytest.approx(1.0)


class TestWeights:
    """Scheme weights of pathways follow their class."""

    @pytest.mark.parametrize("scheme", [build_cpc(3), build_hpc(3)])
    def test_weight_equals_class_weight(self, scheme):
        seq = build_sequence("CPMG", 3, tau=1.0)
        for pw in enumerate_pathways(seq, -1):
            # preparation always changes order by 1, so only the inversion class matters
            if abs(pw.deltas[0]) != 1:
                continue
            assert pathway_weight(pw, scheme) == class_weight(scheme, sorted(pw.class_f))


@st.composite
def oracle_case(draw):
    n_inv = draw(st.integers(1, 5))
    gaps = draw(st.lists(st.floats(0.2, 2.0), min_size=n_inv, max_size=n_inv))
    times = np.cumsum(gaps)
    phases = draw(st.lists(st.floats(0, 2 * np.pi), min_size=n_inv, max_size=n_inv))
    row = draw(st.lists(st.sampled_from([1, -1]), min_size=n_inv + 1, max_size=n_inv + 1))
    t2 = draw(st.floats(0.5, 20.0))
    noise = NoiseModel(
        t1=t2 * draw(st.floats(1.0, 1e3)),
        t2=t2,
        flip_error=draw(st.floats(-0.3, 0.3)),
        phase_error=draw(st.floats(-0.2, 0.2)),
    )
    seq = build_sequence("custom", n_inv, times=times, total_time=2 * times[-1], phases=phases)
    detuning = draw(st.floats(-5.0, 5.0))
    after = draw(st.floats(0.0, 3.0))
    return seq, noise, detuning, row, after


class TestOracle:
    """Pathway sum reproduces direct propagation."""

    @settings(max_examples=150, deadline=None)
    @given(oracle_case())
    def test_pathway_sum_equals_propagation(self, case):
        seq, noise, detuning, row, after = case
        t = seq.last_pulse + after
        direct = run_circuit(seq, row, noise, detuning, times=[t]).bloch[0]
        summed = pathway_sum(seq, noise, detuning, row=row, after=after)
        scale = max(np.linalg.norm(direct), 1e-3)
        assert np.linalg.norm(summed - direct) / scale < 1e-10


class TestReport:
    """Echo predictions and their CSV rendering."""

    def test_report_columns(self):
        seq = build_sequence("CPMG", 2, tau=1.0)
        preds = predict_echoes(seq, NoiseModel(flip_error=0.15))
        rows = list(csv.reader(io.StringIO(pathway_report(preds))))
        assert rows[0] == ["orders", "F", "echo_time", "phase", "|amp|"]
        assert len(rows) == 10
        by_orders = {r[0]: r for r in rows[1:]}
        assert by_orders["0 -1 1 -1"][2] == "1"
        assert by_orders["0 1 0 -1"][1] == "1 2"

    def test_ideal_desired_amplitude(self):
        seq = build_sequence("CPMG", 2, tau=1.0)
        preds = {p.pathway.orders: p for p in predict_echoes(seq)}
        assert abs(preds[(0, -1, 1, -1)].amplitude) == pytest.approx(0.5)
        assert abs(preds[(0, 1, 0, -1)].amplitude) < 1e-12
