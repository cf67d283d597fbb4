"""Single-qubit propagation through timed, noisy pulse sequences.

Conventions
-----------
* The state is a Bloch vector ``(x, y, z)`` with ``rho = (I + r.sigma) / 2``;
  ``z = +1`` is the ground state and relaxation drives ``z`` back to +1.
* Pulses are instantaneous right-handed rotations
  ``U = exp(-i beta/2 (cos(phi) sigma_x + sin(phi) sigma_y))``.
* Free evolution with detuning ``dw`` rotates the transverse plane by
  ``+dw * t`` about z, so the coherence ``c+ = rho_01`` (order +1) picks up
  ``exp(-i dw t)``.
* A scheme flag of -1 advances the pulse phase by pi.

Traces report Pauli expectation values (Bloch components), combined across
scheme rows with the sign vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import inf

import numpy as np

from . import kernels
from .errors import ConfigError
from .schemes import PhaseScheme, build_cpc

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SEQUENCE_KINDS = ("CP", "CPMG", "UDD", "custom")


@dataclass(frozen=True)
class QubitState:
    """Excited-state population ``p1`` and coherence ``c_plus = rho_01``."""

    p1: float
    c_plus: complex

    @classmethod
    def ground(cls) -> "QubitState":
        return cls(0.0, 0j)

    @classmethod
    def from_bloch(cls, v) -> "QubitState":
        x, y, z = (float(a) for a in v)
        return cls((1.0 - z) / 2.0, complex(x, -y) / 2.0)

    @classmethod
    def from_rho(cls, rho) -> "QubitState":
        rho = np.asarray(rho, dtype=complex)
        return cls(float(rho[1, 1].real), complex(rho[0, 1]))

    @property
    def bloch(self) -> np.ndarray:
        c = self.c_plus
        return np.array([2 * c.real, -2 * c.imag, 1.0 - 2 * self.p1])

    @property
    def rho(self) -> np.ndarray:
        c = self.c_plus
        return np.array([[1 - self.p1, c], [np.conj(c), self.p1]], dtype=complex)

    def is_physical(self, tol: float = 1e-12) -> bool:
        return abs(self.c_plus) ** 2 <= self.p1 * (1 - self.p1) + tol and -tol <= self.p1 <= 1 + tol


@dataclass(frozen=True)
class PulseSpec:
    time: float
    flip: float
    phase: float = 0.0
    flag: int = 1

    def __post_init__(self):
        if self.time < 0:
            raise ValueError(f"pulse time must be >= 0, got {self.time}")
        if self.flag not in (1, -1):
            raise ValueError(f"phase flag must be +1 or -1, got {self.flag}")


@dataclass(frozen=True)
class PulseSequence:
    """Preparation pulse followed by ``m`` inversion pulses.

    ``echo_time`` is the absolute time at which the desired echo refocuses;
    ``readout`` is ``(start, end, step)`` in seconds.
    """

    kind: str
    m: int
    pulses: tuple
    readout: tuple
    echo_time: float
    tau: float

    def __post_init__(self):
        times = [p.time for p in self.pulses]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("pulse times must be non-decreasing")
        if len(self.pulses) != self.m + 1:
            raise ValueError(f"expected {self.m + 1} pulses, got {len(self.pulses)}")

    @property
    def times(self) -> np.ndarray:
        return np.array([p.time for p in self.pulses])

    @property
    def last_pulse(self) -> float:
        return self.pulses[-1].time

    @property
    def prep_phase(self) -> float:
        return self.pulses[0].phase

    def intervals(self) -> np.ndarray:
        """Free-evolution durations between consecutive pulses."""
        return np.diff(self.times)

    def readout_times(self) -> np.ndarray:
        start, end, step = self.readout
        n = int(round((end - start) / step))
        return start + step * np.arange(n + 1)

    def with_flags(self, row) -> "PulseSequence":
        row = list(row)
        if len(row) != len(self.pulses):
            raise ValueError(f"row width {len(row)} does not match {len(self.pulses)} pulses")
        pulses = tuple(replace(p, flag=int(f)) for p, f in zip(self.pulses, row))
        return replace(self, pulses=pulses)

    def with_readout(self, start=None, end=None, step=None) -> "PulseSequence":
        s, e, d = self.readout
        return replace(self, readout=(s if start is None else start, e if end is None else end, d if step is None else step))

    def quadrature(self) -> np.ndarray:
        """Unit transverse direction the preparation pulse rotates z into."""
        phi = self.prep_phase
        return np.array([np.sin(phi), -np.cos(phi), 0.0])


def udd_times(m: int, total_time: float) -> np.ndarray:
    j = np.arange(1, m + 1)
    return total_time * np.sin(j * np.pi / (2 * (m + 1))) ** 2


def build_sequence(
    kind: str,
    m: int,
    *,
    tau: float | None = None,
    total_time: float | None = None,
    times=None,
    flips=None,
    phases=None,
    prep_phase: float = 0.0,
    readout=None,
) -> PulseSequence:
    """Timed pulse list for CP, CPMG, UDD or a custom sequence.

    CP and CPMG place inversion pulses at ``(2j - 1) tau`` with the echo at
    ``2 m tau``; ``total_time`` may be given instead as ``2 m tau``. CP
    inverts about the preparation axis, CPMG about the orthogonal one. UDD
    places pulses at ``t sin^2(j pi / (2(m+1)))`` with the echo at ``t``;
    ``tau`` may be given instead as ``t / (2m)``. Custom sequences take
    explicit inversion ``times`` (and optional ``flips``/``phases``) with the
    echo at ``total_time``.

    The default readout window runs from the last pulse to
    ``echo + 2 (echo - last)`` in steps of ``tau / 50``.
    """
    if kind not in SEQUENCE_KINDS:
        raise ValueError(f"kind must be one of {SEQUENCE_KINDS}, got {kind!r}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if tau is not None and tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if total_time is not None and total_time <= 0:
        raise ValueError(f"total_time must be positive, got {total_time}")
    if kind == "custom":
        if times is None or total_time is None:
            raise ValueError("custom sequences need inversion times and total_time")
        inv_times = np.asarray(times, dtype=float)
        if inv_times.shape != (m,):
            raise ValueError(f"expected {m} inversion times, got {inv_times.shape}")
        tau = total_time / (2 * m) if tau is None else tau
        echo = float(total_time)
    else:
        if (tau is None) == (total_time is None):
            raise ValueError("give exactly one of tau or total_time")
        tau = total_time / (2 * m) if tau is None else tau
        echo = 2 * m * tau
        if kind == "UDD":
            inv_times = udd_times(m, echo)
        else:
            inv_times = (2 * np.arange(1, m + 1) - 1) * tau
    flips = np.full(m, np.pi) if flips is None else np.asarray(flips, dtype=float)
    if phases is None:
        offset = np.pi / 2 if kind == "CPMG" else 0.0
        phases = np.full(m, prep_phase + offset)
    phases = np.asarray(phases, dtype=float)
    pulses = [PulseSpec(0.0, np.pi / 2, prep_phase)]
    pulses += [PulseSpec(float(t), float(f), float(p)) for t, f, p in zip(inv_times, flips, phases)]
    last = pulses[-1].time
    if readout is None:
        readout = (last, echo + 2 * (echo - last), tau / 50)
    return PulseSequence(kind=kind, m=m, pulses=tuple(pulses), readout=tuple(readout), echo_time=echo, tau=tau)


def _noise_problems(values: dict) -> list[str]:
    out = []
    for name in ("t1", "t2"):
        if name in values and not values[name] > 0:
            out.append(f"{name}: must be positive, got {values[name]}")
    for name in ("detuning_sigma", "flip_jitter", "phase_jitter"):
        if name in values and not values[name] >= 0:
            out.append(f"{name}: must be non-negative, got {values[name]}")
    return out


@dataclass(frozen=True)
class NoiseModel:
    """Relaxation, static detuning ensemble and pulse errors.

    ``flip_error`` and ``phase_error`` are systematic (same on every pulse);
    ``flip_jitter`` and ``phase_jitter`` add independent Gaussian draws per
    pulse and row. The preparation pulse carries the same errors unless
    ``ideal_prep`` is set.
    """

    t1: float = inf
    t2: float = inf
    detuning_sigma: float = 0.0
    flip_error: float = 0.0
    phase_error: float = 0.0
    flip_jitter: float = 0.0
    phase_jitter: float = 0.0
    ideal_prep: bool = False
    seed: int = 0

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ConfigError(problems)

    def problems(self) -> list[str]:
        return _noise_problems({k: getattr(self, k) for k in self.__dataclass_fields__})

    @classmethod
    def ideal(cls) -> "NoiseModel":
        return cls()

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseModel":
        known = set(cls.__dataclass_fields__)
        problems = [f"noise: unknown key {k!r}" for k in data if k not in known]
        kwargs = {}
        for k, v in data.items():
            if k not in known:
                continue
            if k in ("ideal_prep",):
                kwargs[k] = bool(v)
            elif k == "seed":
                if not isinstance(v, int) or isinstance(v, bool):
                    problems.append(f"seed: expected an integer, got {v!r}")
                kwargs[k] = v
            else:
                try:
                    kwargs[k] = inf if v is None else float(v)
                except (TypeError, ValueError):
                    problems.append(f"{k}: expected a number, got {v!r}")
        problems += _noise_problems(kwargs)
        if problems:
            raise ConfigError(problems)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {k: (None if getattr(self, k) == inf else getattr(self, k)) for k in self.__dataclass_fields__}

    @property
    def rates(self) -> tuple[float, float]:
        return 1.0 / self.t1, 1.0 / self.t2

    def detunings(self, ensemble_size: int) -> np.ndarray:
        """Static per-member detunings; a single zero member when sigma is 0."""
        if self.detuning_sigma == 0:
            return np.zeros(1)
        if ensemble_size < 1:
            raise ValueError(f"ensemble_size must be >= 1, got {ensemble_size}")
        return np.random.default_rng(self.seed).normal(0.0, self.detuning_sigma, ensemble_size)


def pulse_angles(sequence: PulseSequence, noise: NoiseModel, rows=None):
    """Actual flip angles and phases, each of shape (R, P).

    ``rows`` is an (R, P) array of phase flags overriding the sequence's own
    flags; jitter draws come from a stream separate from the detunings.
    """
    base_flags = np.array([p.flag for p in sequence.pulses])
    flags = base_flags[None, :] if rows is None else np.atleast_2d(np.asarray(rows))
    n_rows, n_pulses = flags.shape
    flip = np.array([p.flip for p in sequence.pulses])
    phase = np.array([p.phase for p in sequence.pulses])
    eps = np.full(n_pulses, noise.flip_error)
    perr = np.full(n_pulses, noise.phase_error)
    if noise.ideal_prep:
        eps[0] = perr[0] = 0.0
    beta = np.broadcast_to(flip * (1 + eps), (n_rows, n_pulses)).copy()
    phi = phase + perr + np.where(flags < 0, np.pi, 0.0)
    if noise.flip_jitter or noise.phase_jitter:
        rng = np.random.default_rng([noise.seed, 1])
        jb = rng.normal(0.0, noise.flip_jitter, (n_rows, n_pulses)) if noise.flip_jitter else 0.0
        jp = rng.normal(0.0, noise.phase_jitter, (n_rows, n_pulses)) if noise.phase_jitter else 0.0
        if noise.ideal_prep:
            jb = jb * (np.arange(n_pulses) > 0) if noise.flip_jitter else 0.0
            jp = jp * (np.arange(n_pulses) > 0) if noise.phase_jitter else 0.0
        beta = beta + flip * jb
        phi = phi + jp
    return beta, phi


def pulse_unitary(beta: float, phi: float) -> np.ndarray:
    """``exp(-i beta/2 (cos(phi) X + sin(phi) Y))``."""
    c, s = np.cos(beta / 2), np.sin(beta / 2)
    return np.array([[c, -1j * s * np.exp(-1j * phi)], [-1j * s * np.exp(1j * phi), c]])


def bloch_rotation(beta, phi) -> np.ndarray:
    """Right-handed SO(3) rotation by ``beta`` about ``(cos phi, sin phi, 0)``.

    Broadcasts over array inputs; output shape ``beta.shape + (3, 3)``.
    """
    beta, phi = np.broadcast_arrays(np.asarray(beta, float), np.asarray(phi, float))
    nx, ny = np.cos(phi), np.sin(phi)
    c, s = np.cos(beta), np.sin(beta)
    v = 1 - c
    r = np.empty(beta.shape + (3, 3))
    r[..., 0, 0] = c + nx * nx * v
    r[..., 0, 1] = nx * ny * v
    r[..., 0, 2] = ny * s
    r[..., 1, 0] = nx * ny * v
    r[..., 1, 1] = c + ny * ny * v
    r[..., 1, 2] = -nx * s
    r[..., 2, 0] = -ny * s
    r[..., 2, 1] = nx * s
    r[..., 2, 2] = c
    return r


def apply_pulse(state: QubitState, pulse: PulseSpec, noise: NoiseModel | None = None) -> QubitState:
    """Conjugate the density matrix by the (noisy) pulse unitary."""
    noise = noise or NoiseModel()
    beta = pulse.flip * (1 + noise.flip_error)
    phi = pulse.phase + noise.phase_error + (np.pi if pulse.flag < 0 else 0.0)
    u = pulse_unitary(beta, phi)
    return QubitState.from_rho(u @ state.rho @ u.conj().T)


def free_evolve(state: QubitState, duration: float, detuning: float = 0.0, noise: NoiseModel | None = None) -> QubitState:
    """Precess, dephase and relax toward the ground state for ``duration``."""
    if duration < 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    noise = noise or NoiseModel()
    inv_t1, inv_t2 = noise.rates
    c = state.c_plus * np.exp(-1j * detuning * duration - duration * inv_t2)
    return QubitState(state.p1 * np.exp(-duration * inv_t1), c)


@dataclass
class CircuitResult:
    """Trace of one phase-cycling row at one detuning.

    ``final`` is the state at the sequence's echo time.
    """

    times: np.ndarray
    bloch: np.ndarray
    final: QubitState


def _propagate(sequence, noise, rows, times, detunings):
    beta, phi = pulse_angles(sequence, noise, rows)
    rot = np.ascontiguousarray(bloch_rotation(beta, phi))
    inv_t1, inv_t2 = noise.rates
    return kernels.propagate(
        rot,
        np.ascontiguousarray(sequence.times, dtype=float),
        np.ascontiguousarray(times, dtype=float),
        np.ascontiguousarray(detunings, dtype=float),
        float(inv_t1),
        float(inv_t2),
    )


def run_circuit(sequence: PulseSequence, row=None, noise: NoiseModel | None = None, detuning: float = 0.0, times=None) -> CircuitResult:
    """Propagate one row of flags at a single detuning.

    ``times`` are absolute readout times (default: the readout window);
    each must not precede the last pulse.
    """
    noise = noise or NoiseModel()
    times = sequence.readout_times() if times is None else np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < sequence.last_pulse):
        raise ValueError("readout times must not precede the last pulse")
    rows = None if row is None else np.asarray(row)[None, :]
    grid = np.append(times, sequence.echo_time)
    out = _propagate(sequence, noise, rows, grid, [detuning])[0]
    return CircuitResult(times=times, bloch=out[:-1], final=QubitState.from_bloch(out[-1]))


@dataclass
class SchemeResult:
    """Per-row and sign-combined ensemble-averaged traces.

    ``normalization`` is the sum of sign times preparation flag, the gain of
    the desired echo; ``normalized`` is ``combined / normalization``.
    ``v`` is the combined Bloch vector at the echo time.
    """

    times: np.ndarray
    rows: np.ndarray
    combined: np.ndarray
    normalization: int
    v: np.ndarray
    ensemble_size: int

    @property
    def normalized(self) -> np.ndarray:
        return self.combined / self.normalization

    @property
    def v_normalized(self) -> np.ndarray:
        return self.v / self.normalization


def run_scheme(sequence: PulseSequence, scheme, noise: NoiseModel | None = None, ensemble_size: int = 1, times=None) -> SchemeResult:
    """Run every scheme row over a shared detuning ensemble and combine.

    Detunings are drawn once from ``noise.seed`` so that all rows (and any
    sweep re-using the seed) see the same ensemble.
    """
    noise = noise or NoiseModel()
    if ensemble_size < 1:
        raise ValueError(f"ensemble_size must be >= 1, got {ensemble_size}")
    if scheme.m != sequence.m:
        raise ValueError(f"scheme has m={scheme.m} but the sequence has m={sequence.m}")
    times = sequence.readout_times() if times is None else np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < sequence.last_pulse):
        raise ValueError("readout times must not precede the last pulse")
    dw = noise.detunings(ensemble_size)
    grid = np.append(times, sequence.echo_time)
    out = _propagate(sequence, noise, np.asarray(scheme.rows), grid, dw)
    sign = np.asarray(scheme.sign, dtype=float)
    # fixed reduction order over rows keeps results reproducible
    combined = np.zeros(out.shape[1:])
    for r in range(out.shape[0]):
        combined += sign[r] * out[r]
    norm = int(np.dot(scheme.sign.astype(np.int64), scheme.prep))
    return SchemeResult(
        times=times,
        rows=out[:, :-1],
        combined=combined[:-1],
        normalization=norm,
        v=combined[-1],
        ensemble_size=len(dw),
    )


def echo_amplitude(times, trace, expected_time: float, window: float, quadrature=(0.0, -1.0, 0.0)) -> float | None:
    """In-phase magnitude at the local extremum nearest ``expected_time``.

    ``trace`` has shape (K, 3); ``quadrature`` is the transverse direction of
    the prepared coherence. Returns None when no extremum lies within
    ``expected_time +- window`` or the signal there is identically zero.
    """
    times = np.asarray(times, dtype=float)
    q = np.abs(np.asarray(trace, dtype=float) @ np.asarray(quadrature, dtype=float))
    inside = np.flatnonzero(np.abs(times - expected_time) <= window)
    if inside.size == 0:
        return None
    left = np.concatenate([[-np.inf], q[:-1]])
    right = np.concatenate([q[1:], [-np.inf]])
    peaks = inside[(q[inside] >= left[inside]) & (q[inside] >= right[inside]) & (q[inside] > 1e-300)]
    if peaks.size == 0:
        return None
    best = peaks[np.argmin(np.abs(times[peaks] - expected_time))]
    return float(q[best])


def tomography_readout(bloch, axis: str) -> np.ndarray:
    """z after the ideal tomography pre-pulse for ``axis``.

    ``x``: pi/2 about -y; ``y``: pi/2 about +x; ``z``: no pulse. Accepts
    arrays of Bloch vectors with a trailing axis of length 3.
    """
    bloch = np.asarray(bloch, dtype=float)
    if axis == "z":
        return bloch[..., 2].copy()
    if axis == "x":
        rot = bloch_rotation(np.pi / 2, -np.pi / 2)
    elif axis == "y":
        rot = bloch_rotation(np.pi / 2, 0.0)
    else:
        raise ValueError(f"axis must be x, y or z, got {axis!r}")
    return (bloch @ rot.T)[..., 2]


@dataclass
class SweepPoint:
    parameter: float
    amplitude: float
    values: dict = field(default_factory=dict)


def echo_sweep(build, values, scheme_for, noise: NoiseModel, ensemble_size: int, delay=None) -> list[SweepPoint]:
    """Normalized in-phase echo at a fixed delay after the last pulse.

    ``build(value)`` returns a sequence; ``scheme_for(sequence)`` its scheme.
    ``delay`` defaults to the desired echo's own position.
    """
    out = []
    for value in values:
        seq = build(value)
        t = seq.echo_time if delay is None else seq.last_pulse + delay(seq)
        res = run_scheme(seq, scheme_for(seq), noise, ensemble_size, times=[t])
        amp = float(res.normalized[0] @ seq.quadrature())
        out.append(SweepPoint(parameter=float(value), amplitude=amp))
    return out


@dataclass
class SplitResult:
    """Desired and stimulated echo amplitudes of the split experiment.

    ``desired_times``/``stimulated_times`` are the absolute echo times at
    which each channel was read; amplitudes are transverse magnitudes per
    row of the cycle.
    """

    delays: np.ndarray
    desired_times: np.ndarray
    desired: np.ndarray
    stimulated_times: np.ndarray
    stimulated: np.ndarray


def split_schemes() -> tuple[PhaseScheme, PhaseScheme]:
    """Complete two-inversion cycle with a desired and a stimulated channel.

    The desired channel sums all rows, cancelling every class that involves
    an inversion pulse. The stimulated channel weights each row by the
    product of its two inversion flags, keeping only the class where both
    inversion pulses exchange coherence with population.
    """
    base = build_cpc(2)
    stim_sign = base.rows[:, 1] * base.rows[:, 2]
    stim = PhaseScheme(m=2, kind="custom", rows=base.rows, sign=stim_sign)
    return base, stim


def split_experiment(tau: float, delays, noise: NoiseModel, ensemble_size: int) -> SplitResult:
    """Separate the desired and stimulated echoes of a two-inversion sequence.

    Pulses sit at ``0`` (preparation), ``tau`` and ``tau + T`` for each
    delay ``T > tau``. The desired echo refocuses at ``2 T`` and has spent
    the whole time as coherence; the stimulated echo refocuses ``tau`` after
    the last pulse and has spent ``T`` stored as population. Each channel is
    read at its own echo time and cycled to suppress the other.
    """
    delays = np.asarray(delays, dtype=float)
    if np.any(delays <= tau):
        raise ValueError("every delay must exceed tau")
    desired_scheme, stim_scheme = split_schemes()
    d_times, s_times, d_amp, s_amp = [], [], [], []
    for big in delays:
        seq = build_sequence("custom", 2, tau=tau, total_time=2 * big, times=[tau, tau + big],
                             phases=[np.pi / 2, np.pi / 2])
        t_stim = seq.last_pulse + tau
        for scheme, times, amps, t in ((desired_scheme, d_times, d_amp, seq.echo_time),
                                       (stim_scheme, s_times, s_amp, t_stim)):
            res = run_scheme(seq, scheme, noise, ensemble_size, times=[t])
            times.append(t)
            amps.append(float(np.hypot(*res.combined[0, :2])) / scheme.n_rows)
    return SplitResult(delays=delays, desired_times=np.array(d_times), desired=np.array(d_amp),
                       stimulated_times=np.array(s_times), stimulated=np.array(s_amp))


__all__ = [
    "CircuitResult",
    "NoiseModel",
    "PulseSequence",
    "PulseSpec",
    "QubitState",
    "SchemeResult",
    "SplitResult",
    "SweepPoint",
    "apply_pulse",
    "bloch_rotation",
    "build_sequence",
    "echo_amplitude",
    "echo_sweep",
    "free_evolve",
    "pulse_angles",
    "pulse_unitary",
    "run_circuit",
    "run_scheme",
    "split_experiment",
    "split_schemes",
    "tomography_readout",
    "udd_times",
]
