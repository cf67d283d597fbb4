"""Coherence-transfer pathways of a pulse sequence.

A pathway lists the coherence order (-1, 0 or +1) of the qubit in every
interval: ``orders[0] = 0`` before its first pulse, ``orders[i]`` after the
i-th pulse it passes through, the last entry being the order during readout.
Order +1 is the coherence ``rho_01``, order -1 its conjugate, order 0 the
z component (twice the population imbalance).

Pulse numbering follows the sequence: pulse 0 is the preparation pulse and
pulse j >= 1 is inversion pulse j, so class sets use 1-based inversion
indices.

The state of a relaxing qubit is an affine function of its initial state:
every interval also re-seeds order 0 with weight ``1 - exp(-t/T1)``. Pathways
therefore carry an ``origin``: 0 for the initial ground state, ``i`` for the
recovery seeded at the end of the interval before pulse ``i``, and
``len(pulses)`` for recovery during readout itself.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import BudgetExceeded
from .simulator import NoiseModel, PulseSequence, pulse_angles, pulse_unitary

ORDERS = (-1, 0, 1)
PATHWAY_BUDGET = 16

# operator basis: order +1 -> |0><1|, order -1 -> |1><0|, order 0 -> sigma_z / 2
_BASIS = {
    1: np.array([[0, 1], [0, 0]], dtype=complex),
    -1: np.array([[0, 0], [1, 0]], dtype=complex),
    0: np.array([[0.5, 0], [0, -0.5]], dtype=complex),
}


def _coefficients(op: np.ndarray) -> dict:
    """Expand a traceless 2x2 operator in the order basis."""
    return {1: op[0, 1], -1: op[1, 0], 0: op[0, 0] - op[1, 1]}


@dataclass(frozen=True)
class Pathway:
    """Coherence orders per interval, starting at pulse ``origin``.

    ``durations`` are the free-evolution times between consecutive pulses
    the pathway traverses (one fewer than the number of pulses).
    """

    orders: tuple
    durations: tuple = ()
    origin: int = 0

    def __post_init__(self):
        orders = tuple(int(p) for p in self.orders)
        if not orders or orders[0] != 0:
            raise ValueError("a pathway starts from order 0")
        if any(p not in ORDERS for p in orders):
            raise ValueError(f"orders must be -1, 0 or +1, got {orders}")
        if self.durations and len(self.durations) != max(0, len(orders) - 2):
            raise ValueError(f"{len(orders) - 1} pulses need {max(0, len(orders) - 2)} durations, got {len(self.durations)}")
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "durations", tuple(float(t) for t in self.durations))

    @property
    def n_pulses(self) -> int:
        return len(self.orders) - 1

    @property
    def final_order(self) -> int:
        return self.orders[-1]

    @property
    def deltas(self) -> tuple:
        """Order change at each traversed pulse."""
        return tuple(b - a for a, b in zip(self.orders, self.orders[1:]))

    @property
    def class_f(self) -> frozenset:
        return classify(self)

    def negated(self) -> "Pathway":
        return Pathway(tuple(-p for p in self.orders), self.durations, self.origin)


def classify(pathway: Pathway) -> frozenset:
    """Inversion pulses (1-based) at which the order changes by +-1."""
    return frozenset(
        pathway.origin + i
        for i, d in enumerate(pathway.deltas)
        if abs(d) == 1 and pathway.origin + i >= 1
    )


def echo_time(pathway: Pathway, durations=None) -> float | None:
    """Refocusing delay after the last pulse, or None for anti-echoes.

    With ``t = sum_i p_i tau_i`` over the inter-pulse intervals, an order -1
    readout refocuses at ``t`` when ``t > 0`` and an order +1 readout at
    ``-t`` when ``t < 0``.
    """
    durations = pathway.durations if durations is None else tuple(durations)
    inner = pathway.orders[1:-1]
    if len(durations) != len(inner):
        raise ValueError(f"expected {len(inner)} durations, got {len(durations)}")
    t = float(np.dot(inner, durations)) if inner else 0.0
    if pathway.final_order == -1 and t > 0:
        return t
    if pathway.final_order == 1 and t < 0:
        return -t
    return None


def echo_phase_shift(pathway: Pathway, phase_deltas) -> float:
    """Phase acquired by the pathway when pulse phases shift by ``phase_deltas``.

    One entry per traversed pulse; the result lies in [0, 2 pi).
    """
    phase_deltas = np.asarray(phase_deltas, dtype=float)
    if phase_deltas.shape != (pathway.n_pulses,):
        raise ValueError(f"expected {pathway.n_pulses} phase shifts, got {phase_deltas.shape}")
    total = float(np.dot(pathway.deltas, phase_deltas)) % (2 * np.pi)
    return 0.0 if np.isclose(total, 2 * np.pi, rtol=0, atol=1e-12) else total


def enumerate_pathways(
    sequence: PulseSequence,
    final_order: int | None = -1,
    *,
    echo_only: bool = False,
    origin: int = 0,
    budget: int = PATHWAY_BUDGET,
) -> list[Pathway]:
    """All order sequences through the pulses from ``origin`` onward.

    ``final_order=None`` keeps every readout order. ``echo_only`` keeps only
    pathways with a positive :func:`echo_time`. Output is ordered
    lexicographically over (-1, 0, +1).
    """
    n = len(sequence.pulses) - origin
    if n > budget:
        raise BudgetExceeded(f"{n} pulses need 3**{n} pathways, above the budget of {budget} pulses")
    if n < 0:
        raise ValueError(f"origin {origin} beyond the last pulse")
    durations = tuple(np.diff(sequence.times[origin:]))
    finals = ORDERS if final_order is None else (final_order,)
    out = []
    if n == 0:
        return [Pathway((0,), (), origin)] if 0 in finals else []
    for inner in product(ORDERS, repeat=n - 1):
        for final in finals:
            pw = Pathway((0, *inner, final), durations, origin)
            if echo_only and echo_time(pw) is None:
                continue
            out.append(pw)
    return out


def transfer_matrix(beta: float, phi: float) -> np.ndarray:
    """Single-pulse order transfer ``T[p_out + 1, p_in + 1]``.

    Obtained by conjugating each basis operator with the exact pulse unitary.
    """
    u = pulse_unitary(beta, phi)
    t = np.zeros((3, 3), dtype=complex)
    for p_in, op in _BASIS.items():
        for p_out, c in _coefficients(u @ op @ u.conj().T).items():
            t[p_out + 1, p_in + 1] = c
    return t


def interval_factor(order: int, duration: float, detuning: float, noise: NoiseModel) -> complex:
    """Damping and precession of one order over one free interval (excluding recovery)."""
    inv_t1, inv_t2 = noise.rates
    if order == 0:
        return np.exp(-duration * inv_t1)
    return np.exp(-1j * order * detuning * duration - duration * inv_t2)


def pathway_amplitude(
    pathway: Pathway,
    sequence: PulseSequence,
    noise: NoiseModel | None = None,
    detuning: float = 0.0,
    *,
    row=None,
    after: float = 0.0,
) -> complex:
    """Contribution of a unit order-0 seed to the final order's coefficient.

    Multiplies transfer coefficients and interval factors along the pathway,
    including ``after`` seconds of readout evolution past the last pulse.
    ``row`` overrides the sequence's phase flags.
    """
    noise = noise or NoiseModel()
    beta, phi = pulse_angles(sequence, noise, None if row is None else np.asarray(row)[None, :])
    n_total = len(sequence.pulses)
    if pathway.origin + pathway.n_pulses != n_total:
        raise ValueError("pathway must run to the end of the sequence")
    durations = np.diff(sequence.times[pathway.origin :])
    amp = 1.0 + 0j
    for i in range(pathway.n_pulses):
        k = pathway.origin + i
        p_in, p_out = pathway.orders[i], pathway.orders[i + 1]
        amp *= transfer_matrix(beta[0, k], phi[0, k])[p_out + 1, p_in + 1]
        if i < pathway.n_pulses - 1:
            amp *= interval_factor(p_out, durations[i], detuning, noise)
    if after:
        amp *= interval_factor(pathway.final_order, after, detuning, noise)
    return complex(amp)


def recovery_weights(sequence: PulseSequence, noise: NoiseModel, after: float) -> np.ndarray:
    """Order-0 seed weight per origin: 1 for the ground state, ``1 - exp(-t/T1)`` per interval."""
    inv_t1 = noise.rates[0]
    gaps = np.append(np.diff(sequence.times), after)
    return np.concatenate([[1.0], -np.expm1(-gaps * inv_t1)])


def pathway_sum(
    sequence: PulseSequence,
    noise: NoiseModel | None = None,
    detuning: float = 0.0,
    *,
    row=None,
    after: float = 0.0,
) -> np.ndarray:
    """Bloch vector ``after`` seconds past the last pulse, summed over every pathway.

    Independent of the simulator's propagation; used as its oracle.
    """
    noise = noise or NoiseModel()
    coeff = {p: 0j for p in ORDERS}
    seeds = recovery_weights(sequence, noise, after)
    n_total = len(sequence.pulses)
    for origin, weight in enumerate(seeds):
        if weight == 0:
            continue
        if origin == n_total:
            coeff[0] += weight  # recovery during readout never meets a pulse
            continue
        for pw in enumerate_pathways(sequence, None, origin=origin):
            coeff[pw.final_order] += weight * pathway_amplitude(pw, sequence, noise, detuning, row=row, after=after)
    c_minus = coeff[-1]
    return np.array([2 * c_minus.real, 2 * c_minus.imag, coeff[0].real])


def pathway_weight(pathway: Pathway, scheme) -> int:
    """Sign-combined weight of a pathway under a phase-cycling scheme.

    A pi shift of pulse j multiplies the pathway by ``(-1)**delta_j``, so
    row r contributes ``sign[r] * prod over odd-delta pulses of rows[r, j]``.
    """
    w = np.asarray(scheme.sign, dtype=np.int64).copy()
    for i, d in enumerate(pathway.deltas):
        if d % 2:
            w = w * scheme.rows[:, pathway.origin + i]
    return int(w.sum())


@dataclass(frozen=True)
class EchoPrediction:
    pathway: Pathway
    echo_time: float | None
    phase_shift: float
    amplitude: complex

    @property
    def refocusing(self) -> bool:
        return self.echo_time is not None


def predict_echoes(
    sequence: PulseSequence,
    noise: NoiseModel | None = None,
    detuning: float = 0.0,
    *,
    final_order: int | None = -1,
    row=None,
    phase_deltas=None,
) -> list[EchoPrediction]:
    """Echo position, phase shift and amplitude at that position for each pathway.

    Non-refocusing pathways are kept with ``echo_time=None`` and amplitude
    evaluated right after the last pulse.
    """
    noise = noise or NoiseModel()
    phase_deltas = np.zeros(len(sequence.pulses)) if phase_deltas is None else phase_deltas
    out = []
    for pw in enumerate_pathways(sequence, final_order):
        t = echo_time(pw)
        amp = pathway_amplitude(pw, sequence, noise, detuning, row=row, after=t or 0.0)
        out.append(EchoPrediction(pw, t, echo_phase_shift(pw, phase_deltas), amp))
    return out


def pathway_report(predictions, float_format="{:.12g}") -> str:
    """CSV with columns orders, F, echo_time, phase, |amp|."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["orders", "F", "echo_time", "phase", "|amp|"])
    for pred in predictions:
        writer.writerow([
            " ".join(str(p) for p in pred.pathway.orders),
            " ".join(str(j) for j in sorted(pred.pathway.class_f)),
            "" if pred.echo_time is None else float_format.format(pred.echo_time),
            float_format.format(pred.phase_shift),
            float_format.format(abs(pred.amplitude)),
        ])
    return buf.getvalue()


__all__ = [
    "EchoPrediction",
    "Pathway",
    "classify",
    "echo_phase_shift",
    "echo_time",
    "enumerate_pathways",
    "interval_factor",
    "pathway_amplitude",
    "pathway_report",
    "pathway_sum",
    "pathway_weight",
    "predict_echoes",
    "recovery_weights",
    "transfer_matrix",
]
