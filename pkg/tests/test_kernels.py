import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hpcycle import kernels
from hpcycle.hadamard import pack_columns, pack_weights

BACKENDS = kernels.backends()
needs_compiled = pytest.mark.skipif("compiled" not in BACKENDS, reason="compiled extension not built")


def _sign_matrix(draw, rows, cols):
    bits = draw(st.lists(st.booleans(), min_size=rows * cols, max_size=rows * cols))
    return np.where(np.array(bits).reshape(rows, cols), -1, 1)


@st.composite
def census_inputs(draw, all_positive=False):
    k = draw(st.integers(1, 9))
    dim = draw(st.sampled_from([3, 8, 64, 70, 130]))
    cols = _sign_matrix(draw, k, dim)
    if all_positive:
        w = np.ones(dim, dtype=np.int64)
    else:
        w = np.array(draw(st.lists(st.sampled_from([-1, 0, 1]), min_size=dim, max_size=dim)))
    wpos, wneg, wsum = pack_weights(w)
    target = wsum if all_positive else draw(st.integers(-2, 2))
    return pack_columns(cols), wpos, wneg, wsum, target


def _brute_census(cols, wpos, wneg, wsum, target):
    k = cols.shape[0]
    out = np.zeros(k + 1, dtype=np.int64)
    for mask in range(2**k):
        x = np.zeros(cols.shape[1], dtype=np.uint64)
        for j in range(k):
            if mask >> j & 1:
                x ^= cols[j]
        flipped = int(np.bitwise_count(x & wpos).sum()) - int(np.bitwise_count(x & wneg).sum())
        if wsum - 2 * flipped == target:
            out[bin(mask).count("1")] += 1
    return out


class TestBackendSelection:
    """Import-time selection of the kernel implementation."""

    def test_backend_name(self):
        assert kernels.BACKEND in ("compiled", "python")
        assert "python" in BACKENDS

    def test_selected_functions_match_backend(self):
        ns = BACKENDS[kernels.BACKEND]
        assert kernels.subset_sum_census is ns.subset_sum_census
        assert kernels.propagate is ns.propagate


class TestCensus:
    """Subset-sum census against a direct loop, for each backend."""

    @pytest.mark.parametrize("name", sorted(BACKENDS))
    @settings(max_examples=40, deadline=None)
    @given(data=census_inputs())
    def test_general_weights(self, name, data):
        got = BACKENDS[name].subset_sum_census(*data)
        assert np.array_equal(got, _brute_census(*data))

    @pytest.mark.parametrize("name", sorted(BACKENDS))
    @settings(max_examples=40, deadline=None)
    @given(data=census_inputs(all_positive=True))
    def test_positive_weights(self, name, data):
        got = BACKENDS[name].subset_sum_census(*data)
        assert np.array_equal(got, _brute_census(*data))

    @pytest.mark.parametrize("name", sorted(BACKENDS))
    @settings(max_examples=30, deadline=None)
    @given(data=census_inputs(), q=st.integers(0, 9))
    def test_count_matches_census(self, name, data, q):
        cols = data[0]
        expected = _brute_census(*data)[q] if q <= cols.shape[0] else 0
        assert BACKENDS[name].subset_sum_count(*data, q) == expected


@st.composite
def propagate_inputs(draw):
    n_rows = draw(st.integers(1, 3))
    n_pulses = draw(st.integers(1, 5))
    beta = draw(st.lists(st.floats(0, 2 * np.pi), min_size=n_rows * n_pulses, max_size=n_rows * n_pulses))
    phi = draw(st.lists(st.floats(0, 2 * np.pi), min_size=n_rows * n_pulses, max_size=n_rows * n_pulses))
    from hpcycle.simulator import bloch_rotation

    rot = np.ascontiguousarray(bloch_rotation(np.reshape(beta, (n_rows, n_pulses)), np.reshape(phi, (n_rows, n_pulses))))
    gaps = draw(st.lists(st.floats(0, 2.0), min_size=n_pulses - 1, max_size=n_pulses - 1))
    times = np.concatenate([[0.0], np.cumsum(gaps)])
    extra = draw(st.lists(st.floats(0, 3.0), min_size=1, max_size=4))
    readout = np.sort(times[-1] + np.array(extra))
    detunings = np.array(draw(st.lists(st.floats(-5, 5), min_size=1, max_size=4)))
    inv_t1 = draw(st.floats(0, 2))
    inv_t2 = draw(st.floats(0, 2))
    return rot, times, readout, detunings, inv_t1, inv_t2


@needs_compiled
class TestPropagateBackends:
    """Compiled and numpy propagation agree."""

    @settings(max_examples=60, deadline=None)
    @given(data=propagate_inputs())
    def test_agree(self, data):
        a = BACKENDS["compiled"].propagate(*data)
        b = BACKENDS["python"].propagate(*data)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
