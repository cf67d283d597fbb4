"""Phase-cycling schemes for inversion-pulse dynamical decoupling.

A scheme is an ``S x (m+1)`` matrix of +-1 phase flags (column 0 drives the
pi/2 preparation pulse, columns 1..m the inversion pulses) plus a length-S
sign vector used to combine the per-row results.

A pathway class is the set F of inversion pulses at which the coherence
order changes by +-1. Flipping the phase of such a pulse flips the sign of
that pathway's contribution, so class F reaches the combined output with
weight ``sum_r sign[r] * prep[r] * prod_{j in F} rows[r, j]``. A class is
cancelled when that sum is zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, combinations_with_replacement, islice
from math import comb

import numpy as np

from . import kernels
from .errors import BudgetExceeded, ConfigError
from .hadamard import as_sign_array, pack_columns, pack_weights, sylvester

KINDS = ("tpc", "cpc", "hpc", "custom")
CPC_ROW_BUDGET = 2**20
VERIFY_BUDGET = 2**24
SURVIVOR_CAP = 20


def next_pow2(m: int) -> int:
    """Smallest power of two >= m (m >= 1)."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    return 1 << (m - 1).bit_length()


@dataclass(frozen=True)
class PhaseScheme:
    """Per-row pulse phase flags and result-combination signs.

    Attributes
    ----------
    m : int
        Number of inversion pulses.
    kind : str
        One of ``tpc``, ``cpc``, ``hpc``, ``custom``.
    rows : ndarray of int8, shape (S, m+1)
        Column 0 is the preparation pulse.
    sign : ndarray of int8, shape (S,)
    """

    m: int
    kind: str
    rows: np.ndarray
    sign: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if int(self.m) < 0:
            raise ValueError(f"m must be >= 0, got {self.m}")
        rows = as_sign_array(self.rows, name="rows").astype(np.int8)
        sign = as_sign_array(self.sign, name="sign").astype(np.int8)
        if rows.ndim != 2 or rows.shape[1] != self.m + 1:
            raise ValueError(f"rows must have shape (S, {self.m + 1}), got {rows.shape}")
        if sign.shape != (rows.shape[0],):
            raise ValueError(f"sign length {sign.shape} does not match row count {rows.shape[0]}")
        if rows.shape[0] == 0:
            raise ValueError("a scheme needs at least one row")
        rows.setflags(write=False)
        sign.setflags(write=False)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "sign", sign)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def prep(self) -> np.ndarray:
        return self.rows[:, 0]

    @property
    def inversion(self) -> np.ndarray:
        """Inversion-pulse columns, shape (S, m)."""
        return self.rows[:, 1:]

    def desired_weights(self) -> np.ndarray:
        """Per-row weight of the F = {} class: sign times preparation flag."""
        return self.sign.astype(np.int64) * self.prep

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "kind": self.kind,
            "sign": self.sign.tolist(),
            "rows": self.rows.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data) -> "PhaseScheme":
        problems = []
        if not isinstance(data, dict):
            raise ConfigError(["scheme: expected a JSON object"])
        for key in ("m", "kind", "sign", "rows"):
            if key not in data:
                problems.append(f"scheme: missing key {key!r}")
        if problems:
            raise ConfigError(problems)
        m, kind, sign, rows = data["m"], data["kind"], data["sign"], data["rows"]
        if not isinstance(m, int) or isinstance(m, bool) or m < 0:
            problems.append(f"m: expected a non-negative integer, got {m!r}")
        if kind not in KINDS:
            problems.append(f"kind: expected one of {list(KINDS)}, got {kind!r}")
        if not isinstance(sign, list):
            problems.append("sign: expected a list")
        else:
            problems += [f"sign[{i}]: expected +1 or -1, got {v!r}" for i, v in enumerate(sign) if _bad_flag(v)]
        if not isinstance(rows, list):
            problems.append("rows: expected a list of lists")
        else:
            for i, row in enumerate(rows):
                if not isinstance(row, list):
                    problems.append(f"rows[{i}]: expected a list")
                    continue
                if isinstance(m, int) and len(row) != m + 1:
                    problems.append(f"rows[{i}]: expected {m + 1} entries, got {len(row)}")
                problems += [f"rows[{i}][{j}]: expected +1 or -1, got {v!r}" for j, v in enumerate(row) if _bad_flag(v)]
            if isinstance(sign, list) and len(sign) != len(rows):
                problems.append(f"sign: length {len(sign)} does not match {len(rows)} rows")
            if not rows:
                problems.append("rows: a scheme needs at least one row")
        if problems:
            raise ConfigError(problems)
        return cls(m=m, kind=kind, rows=np.array(rows, dtype=np.int8), sign=np.array(sign, dtype=np.int8))

    @classmethod
    def from_json(cls, text: str) -> "PhaseScheme":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"scheme: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"]) from exc
        return cls.from_dict(data)


def _bad_flag(v) -> bool:
    return isinstance(v, bool) or v not in (1, -1)


def _all_configs(m: int) -> np.ndarray:
    """Every +-1 configuration of m flags; first column most significant, + before -."""
    if m == 0:
        return np.ones((1, 0), dtype=np.int8)
    idx = np.arange(2**m, dtype=np.int64)[:, None]
    bits = (idx >> np.arange(m - 1, -1, -1)) & 1
    return (1 - 2 * bits).astype(np.int8)


def build_tpc(m: int) -> PhaseScheme:
    """Two-step cycle: flip only the preparation pulse and subtract."""
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    rows = np.ones((2, m + 1), dtype=np.int8)
    rows[1, 0] = -1
    return PhaseScheme(m=m, kind="tpc", rows=rows, sign=np.array([1, -1]))


def build_cpc(m: int, *, combine_tpc: bool = False, budget: int = CPC_ROW_BUDGET) -> PhaseScheme:
    """Complete cycle over every inversion-pulse phase configuration (2**m rows).

    With ``combine_tpc`` the preparation pulse is cycled +/- as well and the
    first inversion pulse is held fixed, which keeps the row count at 2**m.
    Rows enumerate configurations with the earliest pulse most significant.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if 2**m > budget:
        raise BudgetExceeded(f"CPC for m={m} needs 2**{m} = {2**m} rows, above the row budget {budget}")
    if not combine_tpc:
        rows = np.concatenate([np.ones((2**m, 1), dtype=np.int8), _all_configs(m)], axis=1)
        return PhaseScheme(m=m, kind="cpc", rows=rows, sign=np.ones(2**m, dtype=np.int8))
    tail = _all_configs(m - 1)
    half = tail.shape[0]
    prep = np.repeat(np.array([1, -1], dtype=np.int8), half)[:, None]
    rows = np.concatenate([prep, np.ones((2 * half, 1), dtype=np.int8), np.tile(tail, (2, 1))], axis=1)
    return PhaseScheme(m=m, kind="cpc", rows=rows, sign=prep[:, 0].copy())


def build_hpc(m: int) -> PhaseScheme:
    """Hadamard cycle with 4 * next_pow2(m) rows.

    The first inversion pulse is held at E; pulses 2..m take the non-identity
    Sylvester columns in order (rightmost surplus columns dropped), stacked
    as ``[H'; -H']`` and repeated under a flipped preparation pulse.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    order = next_pow2(m)
    h = sylvester(order)[:, 1:m].astype(np.int8)
    e = np.ones((order, 1), dtype=np.int8)
    blocks = []
    signs = []
    for s in (1, -1):
        for t in (1, -1):
            blocks.append(np.concatenate([s * e, e, t * h], axis=1))
            signs.append(np.full(order, s, dtype=np.int8))
    return PhaseScheme(m=m, kind="hpc", rows=np.concatenate(blocks), sign=np.concatenate(signs))


def build_scheme(kind: str, m: int, **kwargs) -> PhaseScheme:
    builders = {"tpc": build_tpc, "cpc": build_cpc, "hpc": build_hpc}
    if kind not in builders:
        raise ValueError(f"kind must be one of {sorted(builders)}, got {kind!r}")
    return builders[kind](m, **kwargs)


def scheme_complexity(kind: str, m: int) -> int:
    """Row count of the named construction for m inversion pulses."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if kind == "tpc":
        return 2
    if kind == "cpc":
        return 2**m
    if kind == "hpc":
        return 4 * next_pow2(m)
    raise ValueError(f"kind must be tpc, cpc or hpc, got {kind!r}")


# -- verification ------------------------------------------------------------


@dataclass
class OrthogonalityReport:
    """Outcome of checking which pathway classes a scheme cancels.

    ``surviving_classes`` lists 1-based inversion-pulse indices, smallest
    classes first, truncated at the requested cap. ``ratio_exact`` is None
    for sampled verification, where ``standard_error`` is filled instead.
    """

    m: int
    method: str
    exact: bool
    total_classes: int
    cancelled: int
    ratio: float
    ratio_exact: Fraction | None
    desired_sum: int
    reference_pulse: int | None
    surviving_classes: list = field(default_factory=list)
    survivors_truncated: bool = False
    survivors_by_size: list | None = None
    samples: int | None = None
    standard_error: float | None = None

    @property
    def desired_survives(self) -> bool:
        return self.desired_sum != 0

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["ratio_exact"] = None if self.ratio_exact is None else str(self.ratio_exact)
        out["surviving_classes"] = [list(f) for f in self.surviving_classes]
        out["desired_survives"] = self.desired_survives
        return out


def reference_pulse(scheme: PhaseScheme) -> int | None:
    """Inversion pulse treated as the phase reference, if any.

    When the preparation pulse is cycled and the first inversion pulse is
    held constant, classes containing only that pulse differ from the
    desired echo solely by anti-echo order and it is left out of the class
    set. Returns the 1-based pulse index or None.
    """
    if scheme.m < 1:
        return None
    prep_cycled = np.any(scheme.prep != scheme.prep[0])
    first_fixed = np.all(scheme.rows[:, 1] == scheme.rows[0, 1])
    return 1 if prep_cycled and first_fixed else None


def class_weight(scheme: PhaseScheme, pulses) -> int:
    """Combined weight of class F (1-based inversion-pulse indices)."""
    w = scheme.desired_weights()
    for j in pulses:
        if not 1 <= j <= scheme.m:
            raise ValueError(f"pulse index {j} outside 1..{scheme.m}")
        w = w * scheme.rows[:, j]
    return int(w.sum())


def _active(scheme: PhaseScheme, exclude_reference) -> tuple[list[int], int | None]:
    ref = reference_pulse(scheme) if exclude_reference is None else (1 if exclude_reference and scheme.m else None)
    pulses = [j for j in range(1, scheme.m + 1) if j != ref]
    return pulses, ref


def _weighted_sums(x, wpos, wneg, wsum):
    flipped = np.bitwise_count(x & wpos).sum(axis=-1, dtype=np.int64)
    flipped -= np.bitwise_count(x & wneg).sum(axis=-1, dtype=np.int64)
    return wsum - 2 * flipped


def _survivor_listing(cols, wpos, wneg, wsum, pulses, cap, max_checks):
    """Uncancelled classes by increasing size; stops at ``cap`` or ``max_checks``."""
    found = []
    checked = 0
    k = len(pulses)
    for q in range(1, k + 1):
        combos = combinations(range(k), q)
        while True:
            block = np.array(list(islice(combos, 1 << 15)), dtype=np.intp).reshape(-1, q)
            if block.size == 0:
                break
            x = np.bitwise_xor.reduce(cols[block], axis=1)
            bad = np.flatnonzero(_weighted_sums(x, wpos, wneg, wsum) != 0)
            for i in bad[: cap - len(found)]:
                found.append(tuple(pulses[c] for c in block[i]))
            checked += len(block)
            if len(found) >= cap or checked >= max_checks:
                return found, True
    return found, False


def _gf2_coordinates(patterns: list[int]) -> tuple[list[int], int]:
    """Coordinates of each bit pattern in a GF(2) basis of their span."""
    basis: dict[int, tuple[int, int]] = {}
    coords = []
    for v in patterns:
        c = 0
        while v:
            top = v.bit_length() - 1
            if top not in basis:
                break
            bv, bc = basis[top]
            v ^= bv
            c ^= bc
        if v:
            bit = 1 << len(basis)
            basis[v.bit_length() - 1] = (v, bit)
            c ^= bit
        coords.append(c)
    return coords, len(basis)


def _fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform (length a power of two)."""
    a = a.copy()
    h = 1
    while h < len(a):
        v = a.reshape(-1, 2, h)
        lo, hi = v[:, 0].copy(), v[:, 1]
        v[:, 0] += hi
        v[:, 1] = lo - hi
        h *= 2
    return a


def verify_scheme(
    scheme: PhaseScheme,
    *,
    method: str = "auto",
    budget: int = VERIFY_BUDGET,
    survivor_cap: int = SURVIVOR_CAP,
    exclude_reference: bool | None = None,
    samples: int = 100_000,
    seed: int = 0,
) -> OrthogonalityReport:
    """Count the pathway classes F != {} whose combined weight is zero.

    Parameters
    ----------
    method : {"auto", "exhaustive", "subspace", "sampled"}
        ``exhaustive`` walks all 2**k classes (k active pulses);
        ``subspace`` is exact and costs 2**d where d is the GF(2) rank of the
        rows' flip patterns; ``sampled`` draws random classes. ``auto`` picks
        ``subspace`` when 2**d fits the budget and otherwise samples.
    budget : int
        Largest 2**k (exhaustive) or 2**d (subspace) allowed.
    exclude_reference : bool or None
        Leave the first inversion pulse out of the class set. None applies
        the rule of :func:`reference_pulse`.
    """
    if method not in ("auto", "exhaustive", "subspace", "sampled"):
        raise ValueError(f"unknown method {method!r}")
    pulses, ref = _active(scheme, exclude_reference)
    k = len(pulses)
    w = scheme.desired_weights()
    wpos, wneg, wsum = pack_weights(w)
    act = scheme.rows[:, pulses].T if k else np.ones((0, scheme.n_rows), dtype=np.int8)
    cols = pack_columns(act) if k else np.zeros((0, wpos.shape[0]), dtype=np.uint64)
    total = 2**k - 1
    report = dict(m=scheme.m, total_classes=total, desired_sum=int(w.sum()), reference_pulse=ref)

    rank = None
    if method in ("auto", "subspace"):
        flips = (act.T < 0) if k else np.zeros((scheme.n_rows, 0), dtype=bool)
        patterns = [int.from_bytes(np.packbits(r[::-1], bitorder="big").tobytes(), "big") for r in flips]
        coords, rank = _gf2_coordinates(patterns)
        if 2**rank > budget:
            if method == "subspace":
                raise BudgetExceeded(f"flip-pattern rank {rank} needs 2**{rank} work, above budget {budget}")
            method = "sampled"
        else:
            method = "subspace"
    if method == "exhaustive" and 2**k > budget:
        raise BudgetExceeded(f"2**{k} classes exceeds the verification budget {budget}")

    by_size = None
    if method == "subspace":
        agg = np.zeros(2**rank, dtype=np.int64)
        np.add.at(agg, np.array(coords, dtype=np.int64), w)
        sums = _fwht(agg)
        survivors = int(np.count_nonzero(sums)) * 2 ** (k - rank) - int(sums[0] != 0)
        cancelled = total - survivors
    elif method == "exhaustive":
        hits = kernels.subset_sum_census(cols, wpos, wneg, wsum, 0)
        cancelled = int(hits[1:].sum())
        by_size = [comb(k, q) - int(hits[q]) for q in range(1, k + 1)]
    if method in ("subspace", "exhaustive"):
        listed, truncated = [], False
        if survivor_cap > 0 and cancelled < total:
            listed, truncated = _survivor_listing(cols, wpos, wneg, wsum, pulses, survivor_cap, 10**7)
            truncated = truncated and len(listed) < total - cancelled
        ratio = Fraction(cancelled, total) if total else Fraction(1)
        return OrthogonalityReport(
            method=method, exact=True, cancelled=cancelled, ratio=float(ratio), ratio_exact=ratio,
            surviving_classes=listed, survivors_truncated=truncated, survivors_by_size=by_size, **report,
        )

    # sampled: uniform over non-empty classes
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, 2, size=(samples, k), dtype=np.uint8).astype(bool)
    empty = ~picks.any(axis=1)
    while empty.any():
        picks[empty] = rng.integers(0, 2, size=(int(empty.sum()), k), dtype=np.uint8).astype(bool)
        empty = ~picks.any(axis=1)
    zero = 0
    listed = []
    for start in range(0, samples, 4096):
        chunk = picks[start : start + 4096]
        x = np.zeros((len(chunk), cols.shape[1]), dtype=np.uint64)
        for c in range(k):
            x[chunk[:, c]] ^= cols[c]
        ok = _weighted_sums(x, wpos, wneg, wsum) == 0
        zero += int(ok.sum())
        for i in np.flatnonzero(~ok)[: max(0, survivor_cap - len(listed))]:
            listed.append(tuple(pulses[c] for c in np.flatnonzero(chunk[i])))
    ratio = zero / samples
    return OrthogonalityReport(
        method="sampled", exact=False, cancelled=round(ratio * total), ratio=ratio, ratio_exact=None,
        surviving_classes=sorted(listed, key=lambda f: (len(f), f)), survivors_truncated=True,
        samples=samples, standard_error=float(np.sqrt(ratio * (1 - ratio) / samples)), **report,
    )


# -- minimality of the complete cycle ----------------------------------------


@dataclass(frozen=True)
class CompleteCycleSearch:
    m: int
    max_rows: int
    searched: int
    found: tuple

    @property
    def exists(self) -> bool:
        return bool(self.found)


def search_complete_cycles(m: int, max_rows: int | None = None, *, limit: int = 10**7) -> CompleteCycleSearch:
    """Exhaustively look for schemes with <= ``max_rows`` rows cancelling every class.

    Rows are unordered, so the search runs over multisets of (inversion
    pattern, combination weight) pairs, with the preparation flag folded into
    the weight. A hit cancels every F != {} while the desired class survives.
    ``max_rows`` defaults to 2**m - 1.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    max_rows = 2**m - 1 if max_rows is None else max_rows
    configs = _all_configs(m).astype(np.int64)
    chars = np.array([[int(np.prod(c[list(f)])) for f in _all_classes(m)] for c in configs])
    types = np.concatenate([chars, -chars])  # weight +1 then weight -1
    n_types = len(types)
    work = sum(comb(n_types + s - 1, s) for s in range(1, max_rows + 1))
    if work > limit:
        raise BudgetExceeded(f"{work} row multisets exceeds the search limit {limit}")
    found = []
    searched = 0
    for s in range(1, max_rows + 1):
        it = combinations_with_replacement(range(n_types), s)
        while True:
            block = np.array(list(islice(it, 1 << 16)), dtype=np.intp).reshape(-1, s)
            if block.size == 0:
                break
            sums = types[block].sum(axis=1)
            hit = (sums[:, 0] != 0) & np.all(sums[:, 1:] == 0, axis=1)
            for i in np.flatnonzero(hit):
                found.append(tuple(int(t) for t in block[i]))
            searched += len(block)
    return CompleteCycleSearch(m=m, max_rows=max_rows, searched=searched, found=tuple(found))


def _all_classes(m: int):
    """All subsets of range(m), empty set first, by increasing size."""
    return [f for q in range(m + 1) for f in combinations(range(m), q)]


__all__ = [
    "CompleteCycleSearch",
    "OrthogonalityReport",
    "PhaseScheme",
    "build_cpc",
    "build_hpc",
    "build_scheme",
    "build_tpc",
    "class_weight",
    "next_pow2",
    "reference_pulse",
    "scheme_complexity",
    "search_complete_cycles",
    "verify_scheme",
]
