"""Sylvester Hadamard matrices and Hadamard-product orthogonality (HPO).

All sign matrices are exact integer arrays; orthogonality is always an exact
sum-to-zero test. Counts use Python integers and :class:`fractions.Fraction`
so nothing overflows for large groups.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import BudgetExceeded

DEFAULT_BUDGET = 10**8


def _is_power_of_two(n) -> bool:
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


def as_sign_array(values, *, name="matrix") -> np.ndarray:
    """Coerce to an int64 array and reject anything that is not exactly +-1."""
    arr = np.asarray(values)
    if arr.dtype.kind == "f":
        if not np.all(np.isin(arr, (-1.0, 1.0))):
            raise ValueError(f"{name} entries must be exactly +1 or -1")
    arr = arr.astype(np.int64)
    if arr.size and not np.all((arr == 1) | (arr == -1)):
        raise ValueError(f"{name} entries must be exactly +1 or -1")
    return arr


@dataclass(frozen=True)
class SignVectorSet:
    """Ordered set of +-1 column vectors sharing one length.

    ``columns`` has shape ``(count, dimension)``; row ``i`` is the i-th vector.
    """

    columns: np.ndarray

    def __post_init__(self):
        cols = as_sign_array(self.columns, name="columns")
        if cols.ndim != 2:
            raise ValueError("columns must be a 2-D array of shape (count, dimension)")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)

    @classmethod
    def from_matrix(cls, matrix) -> "SignVectorSet":
        """Take the columns of ``matrix`` as the vectors."""
        return cls(np.asarray(matrix).T)

    @property
    def dimension(self) -> int:
        return self.columns.shape[1]

    def __len__(self):
        return self.columns.shape[0]

    def __iter__(self):
        return iter(self.columns)


def _columns(vectors) -> np.ndarray:
    if isinstance(vectors, SignVectorSet):
        return vectors.columns
    cols = as_sign_array(vectors, name="vectors")
    if cols.ndim == 1:
        cols = cols[None, :]
    if cols.ndim != 2:
        raise ValueError("expected a list of equal-length vectors")
    return cols


def sylvester(order: int) -> np.ndarray:
    """Sylvester Hadamard matrix of the given power-of-two order.

    >>> sylvester(2).tolist()
    [[1, 1], [1, -1]]
    """
    if not _is_power_of_two(order):
        raise ValueError(f"Sylvester construction needs a power-of-two order, got {order!r}")
    h = np.ones((1, 1), dtype=np.int64)
    while h.shape[0] < order:
        h = np.block([[h, h], [h, -h]])
    return h


def is_hadamard(matrix) -> bool:
    """True iff ``matrix`` is square, +-1, and ``M.T @ M == n I``."""
    m = as_sign_array(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    n = m.shape[0]
    return bool(np.array_equal(m.T @ m, n * np.eye(n, dtype=np.int64)))


def hadamard_product(vectors) -> np.ndarray:
    """Element-wise product of all given vectors."""
    cols = _columns(vectors)
    if cols.shape[0] == 0:
        raise ValueError("need at least one vector")
    return np.prod(cols, axis=0)


def hpo_check(vectors) -> bool:
    """Hadamard product orthogonality: the element-wise product sums to zero."""
    return int(hadamard_product(vectors).sum()) == 0


class Closure(NamedTuple):
    closed: bool
    witness: tuple[int, int] | None

    def __bool__(self):
        return self.closed


def group_closure_check(vectors) -> Closure:
    """Check closure under the Hadamard product.

    Returns ``Closure(True, None)`` or ``Closure(False, (i, j))`` where the
    product of vectors ``i`` and ``j`` lies outside the set.
    """
    cols = _columns(vectors)
    if not np.any(np.all(cols == 1, axis=1)):
        raise ValueError("the set must contain the all-ones vector E")
    members = {c.tobytes() for c in cols}
    for i in range(len(cols)):
        for j in range(i, len(cols)):
            if (cols[i] * cols[j]).tobytes() not in members:
                return Closure(False, (i, j))
    return Closure(True, None)


def group_elements(n: int) -> np.ndarray:
    """Non-identity columns of ``sylvester(2**n)``, one per row."""
    return sylvester(2**n)[:, 1:].T.copy()


def pack_columns(cols: np.ndarray) -> np.ndarray:
    """Bit-pack +-1 vectors: bit ``r`` is set where entry ``r`` is -1.

    Returns ``uint64`` array of shape ``(count, words)``.
    """
    cols = np.asarray(cols)
    count, dim = cols.shape
    words = max(1, -(-dim // 64))
    bits = np.zeros((count, words * 64), dtype=np.uint64)
    bits[:, :dim] = cols < 0
    shifted = bits.reshape(count, words, 64) << np.arange(64, dtype=np.uint64)
    return np.ascontiguousarray(np.bitwise_or.reduce(shifted, axis=-1))


def pack_weights(weights: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Masks of the +1 and -1 positions of a weight vector, plus its sum."""
    w = np.asarray(weights, dtype=np.int64)
    pos = pack_columns(-np.where(w > 0, 1, -1)[None, :])[0]
    neg = pack_columns(np.where(w < 0, -1, 1)[None, :])[0]
    return pos, neg, int(w.sum())


@dataclass(frozen=True)
class OrthogonalityCount:
    """Number ``D`` of q-subsets of the 2**n - 1 non-identity elements whose
    product is E, and the fraction ``p`` of all q-subsets that this represents."""

    n: int
    q: int
    D: int
    p: Fraction

    @property
    def p_decimal(self) -> float:
        return float(self.p)


def _check_nq(n: int, q: int) -> int:
    if n < 1:
        raise ValueError(f"group exponent must be >= 1, got {n}")
    size = 2**n - 1
    if not 1 <= q <= size:
        raise ValueError(f"subset size q={q} outside 1..{size}")
    return size


def count_nonorthogonal_exact(n: int, q: int) -> OrthogonalityCount:
    """Closed-form D(q), p(q) for the Sylvester group of order 2**n."""
    size = _check_nq(n, q)
    order = 2**n
    k, odd = divmod(q, 2)
    sign = (-1) ** (k + 1) if odd else (-1) ** k
    d = Fraction(comb(size, q), order) + sign * Fraction(size * comb(order // 2 - 1, k), order)
    if d.denominator != 1:
        raise ArithmeticError(f"closed form gave non-integer D({q}) = {d} for n={n}")
    return OrthogonalityCount(n=n, q=q, D=int(d), p=d / comb(size, q))


def nonorthogonal_recursive(n: int) -> list[int]:
    """D(1..2**n - 1) from the subtraction recursion; index 0 is D(1)."""
    size = 2**n - 1
    d = [0] * (size + 1)  # d[0] is a placeholder for q = 0
    for q in range(3, size + 1):
        num = comb(size, q - 1) - d[q - 1] - (2**n - q + 1) * d[q - 2]
        if num % q:
            raise ArithmeticError(f"recursion gave non-integer D({q}) for n={n}")
        d[q] = num // q
    return d[1:]


def p_recursive(n: int) -> list[Fraction]:
    """p(1..2**n - 1) from the normalised recursion; index 0 is p(1)."""
    size = 2**n - 1
    p = [Fraction(0)] * (size + 1)
    for q in range(3, size + 1):
        p[q] = (1 - p[q - 1] - (q - 1) * p[q - 2]) / (2**n - q)
    return p[1:]


def count_nonorthogonal_brute(vectors, q: int, *, budget: int = DEFAULT_BUDGET) -> int:
    """Count q-subsets whose Hadamard product is the all-ones vector, by enumeration."""
    cols = _columns(vectors)
    k, dim = cols.shape
    if not 0 <= q <= k:
        raise ValueError(f"subset size q={q} outside 0..{k}")
    work = comb(k, q)
    if work > budget:
        raise BudgetExceeded(f"C({k}, {q}) = {work} subsets exceeds the enumeration budget {budget}")
    wpos, wneg, wsum = pack_weights(np.ones(dim, dtype=np.int64))
    return int(kernels.subset_sum_count(pack_columns(cols), wpos, wneg, wsum, dim, q))


def nonorthogonal_census(vectors, *, budget: int = DEFAULT_BUDGET) -> list[int]:
    """Counts of product-E subsets for every size 0..k, in one enumeration pass.

    Index 0 counts the empty subset (always 1).
    """
    cols = _columns(vectors)
    k, dim = cols.shape
    if 2**k > budget:
        raise BudgetExceeded(f"2**{k} subsets exceeds the enumeration budget {budget}")
    wpos, wneg, wsum = pack_weights(np.ones(dim, dtype=np.int64))
    return [int(c) for c in kernels.subset_sum_census(pack_columns(cols), wpos, wneg, wsum, dim)]


def stacked_elements(n: int) -> np.ndarray:
    """Columns of ``[[E, H'], [E, -H']]`` excluding the E column, one per row."""
    g = group_elements(n)
    return np.concatenate([g, -g], axis=1)


def hpo_ratio(kind: str, n: int) -> Fraction:
    """Fraction of non-empty subsets of the non-identity columns that satisfy HPO.

    ``kind`` is ``"plain"`` (columns of the Sylvester matrix) or ``"stacked"``
    (the doubled matrix ``[[E, H'], [E, -H']]``, under which every odd-size
    subset is orthogonal).
    """
    if kind not in ("plain", "stacked"):
        raise ValueError(f"kind must be 'plain' or 'stacked', got {kind!r}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    size = 2**n - 1
    qs = range(1, size + 1) if kind == "plain" else range(2, size + 1, 2)
    bad = sum(count_nonorthogonal_exact(n, q).D for q in qs)
    return 1 - Fraction(bad, 2**size - 1)
