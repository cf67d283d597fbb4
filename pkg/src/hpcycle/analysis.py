"""Decay fitting, scaling exponents, effective states and fidelity benchmarks."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy import optimize, stats

from .errors import FitError
from .schemes import PhaseScheme, build_scheme
from .simulator import NoiseModel, build_sequence, run_scheme, tomography_readout

BETA_MAX = 3.0
T2_STARTS = 8
BETA_STARTS = (0.8, 1.0, 1.5, 2.0)
MODELS = ("mono", "stretched")


@dataclass
class DecayFit:
    """Fitted ``A exp(-(t/T)^beta)`` (plus ``offset`` for recovery fits).

    ``t2`` holds the time constant in the input's time units.
    """

    model: str
    t2: float
    beta: float
    amplitude: float
    residual_rms: float
    offset: float = 0.0
    n_points: int = 0
    starts: int = 0
    converged_starts: int = 0

    def predict(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        core = np.exp(-((t / self.t2) ** self.beta))
        if self.model.startswith("inversion"):
            return self.amplitude * (1 - 2 * core)
        return self.amplitude * core

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _prepare(points):
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("points must be a sequence of (time, amplitude) pairs")
    t, y = data[:, 0], data[:, 1]
    if len(t) < 4:
        raise ValueError(f"need at least 4 points, got {len(t)}")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    if not np.all(np.isfinite(data)):
        raise ValueError("points must be finite")
    return t, y


def _multistart(residuals, starts, t_scale, y_scale, model, n, extra_check=None):
    best = None
    converged = 0
    for x0 in starts:
        try:
            sol = optimize.least_squares(residuals, x0, method="lm", xtol=1e-8, ftol=1e-12, gtol=1e-12, max_nfev=500 * (len(x0) + 1))
        except (ValueError, FloatingPointError):
            continue
        if not sol.success or not np.all(np.isfinite(sol.x)):
            continue
        t2 = np.exp(sol.x[1]) * t_scale
        beta = np.exp(sol.x[2]) if len(sol.x) > 2 else 1.0
        if not (0 < beta <= BETA_MAX) or not np.isfinite(t2):
            continue
        if extra_check is not None and not extra_check(sol.x):
            continue
        converged += 1
        cost = float(np.sum(sol.fun**2))
        if best is None or cost < best[0]:
            best = (cost, sol.x, t2, beta)
    if best is None:
        raise FitError(f"{model} fit did not converge from any of {len(starts)} starts", {"starts": len(starts)})
    cost, x, t2, beta = best
    return x, t2, beta, float(np.sqrt(cost / n)) * y_scale, converged


def fit_decay(points, model: str = "mono") -> DecayFit:
    """Least-squares fit of ``A exp(-(t/T2)^beta)``.

    ``model`` is ``mono`` (beta fixed to 1) or ``stretched``. Damped
    Gauss-Newton (Levenberg-Marquardt) runs from 8 log-spaced T2 starts and,
    for stretched fits, each of beta in {0.8, 1, 1.5, 2}; the lowest-cost
    converged start wins. Data are rescaled to unit time and amplitude
    before fitting, so rescaling the input only rescales the output.

    Raises
    ------
    FitError
        When no start converges or the data carry no decay information.
    """
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}, got {model!r}")
    t, y = _prepare(points)
    y_scale = float(np.max(np.abs(y)))
    if y_scale == 0 or np.ptp(y) <= 1e-12 * y_scale:
        raise FitError("data are flat; no decay to fit", {"ptp": float(np.ptp(y))})
    t_scale = float(t[-1])
    ts, ys = t / t_scale, y / y_scale
    lo = max(np.min(np.diff(ts)), 1e-3)
    taus = np.geomspace(lo, 10.0, T2_STARTS)
    a0 = ys[0] if ys[0] != 0 else 1.0

    if model == "mono":
        def res(x):
            return x[0] * np.exp(-ts / np.exp(x[1])) - ys
        starts = [np.array([a0 * np.exp(ts[0] / tau), np.log(tau)]) for tau in taus]
    else:
        def res(x):
            return x[0] * np.exp(-((ts / np.exp(x[1])) ** np.exp(x[2]))) - ys
        starts = [np.array([a0, np.log(tau), np.log(b)]) for tau in taus for b in BETA_STARTS]
    x, t2, beta, rms, ok = _multistart(res, starts, t_scale, y_scale, model, len(t))
    return DecayFit(model=model, t2=t2, beta=beta, amplitude=float(x[0]) * y_scale, residual_rms=rms,
                    n_points=len(t), starts=len(starts), converged_starts=ok)


def fit_inversion_recovery(points, stretched: bool = False) -> DecayFit:
    """Fit ``A (1 - 2 exp(-(t/T1)^beta))``; the result's ``t2`` field holds T1."""
    t, y = _prepare(points)
    y_scale = float(np.max(np.abs(y)))
    if y_scale == 0 or np.ptp(y) <= 1e-12 * y_scale:
        raise FitError("data are flat; no recovery to fit", {"ptp": float(np.ptp(y))})
    t_scale = float(t[-1])
    ts, ys = t / t_scale, y / y_scale
    taus = np.geomspace(max(np.min(np.diff(ts)), 1e-3), 10.0, T2_STARTS)
    a0 = float(ys[-1]) if ys[-1] != 0 else 1.0
    if stretched:
        def res(x):
            return x[0] * (1 - 2 * np.exp(-((ts / np.exp(x[1])) ** np.exp(x[2])))) - ys
        starts = [np.array([a0, np.log(tau), np.log(b)]) for tau in taus for b in BETA_STARTS]
    else:
        def res(x):
            return x[0] * (1 - 2 * np.exp(-ts / np.exp(x[1]))) - ys
        starts = [np.array([a0, np.log(tau)]) for tau in taus]
    model = "inversion_stretched" if stretched else "inversion"
    x, t1, beta, rms, ok = _multistart(res, starts, t_scale, y_scale, model, len(t))
    return DecayFit(model=model, t2=t1, beta=beta, amplitude=float(x[0]) * y_scale, residual_rms=rms,
                    n_points=len(t), starts=len(starts), converged_starts=ok)


@dataclass(frozen=True)
class ScalingFit:
    """Power law ``T2 = c m^alpha`` from a log-log least-squares line."""

    alpha: float
    stderr: float
    prefactor: float
    n_points: int


def scaling_exponent(series) -> ScalingFit:
    """Ordinary least squares of ln T2 on ln m."""
    data = np.asarray(series, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("series must be a sequence of (m, T2) pairs")
    if len(data) < 3:
        raise ValueError(f"need at least 3 points, got {len(data)}")
    if np.any(data <= 0):
        raise ValueError("m and T2 must be positive")
    fit = stats.linregress(np.log(data[:, 0]), np.log(data[:, 1]))
    return ScalingFit(alpha=float(fit.slope), stderr=float(fit.stderr), prefactor=float(np.exp(fit.intercept)), n_points=len(data))


# -- states and fidelity -----------------------------------------------------

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def bloch_to_rho(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return 0.5 * (np.eye(2) + sum(c * p for c, p in zip(v, PAULI)))


def rho_to_bloch(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return np.array([np.trace(rho @ p).real for p in PAULI])


@dataclass
class EffectiveState:
    """Sign-combined expectations, their unit direction and the pure state it defines."""

    v: np.ndarray
    direction: np.ndarray
    rho: np.ndarray

    @property
    def purity_defect(self) -> float:
        """``det rho``; zero for a pure state."""
        return float(np.linalg.det(self.rho).real)


def effective_state(vx: float, vy: float, vz: float) -> EffectiveState:
    """Normalize the combined expectations and build ``(I + n.sigma) / 2``."""
    v = np.array([vx, vy, vz], dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0 or not np.isfinite(norm):
        raise ValueError("effective state undefined for a zero expectation vector")
    n = v / norm
    return EffectiveState(v=v, direction=n, rho=bloch_to_rho(n))


def _check_density(rho, name, tol=1e-10):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError(f"{name} must be 2x2, got {rho.shape}")
    if not np.allclose(rho, rho.conj().T, atol=tol):
        raise ValueError(f"{name} is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError(f"{name} has trace {np.trace(rho).real}, expected 1")
    if np.min(np.linalg.eigvalsh(rho)) < -tol:
        raise ValueError(f"{name} is not positive semidefinite")
    return rho


def _psd_sqrt(rho):
    w, u = np.linalg.eigh(rho)
    # eigenvalues at round-off level are zero; their square roots would be ~1e-8
    w = np.where(w > 8 * np.finfo(float).eps * max(w[-1], 1.0), w, 0.0)
    return (u * np.sqrt(w)) @ u.conj().T


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`` via eigendecompositions.

    The trace term is the nuclear norm of ``sqrt(rho) sqrt(sigma)``, taken from singular
    values so that rank-deficient inputs do not lose half their digits.
    """
    rho = _check_density(rho, "rho")
    sigma = _check_density(sigma, "sigma")
    nuclear = np.sum(np.linalg.svd(_psd_sqrt(rho) @ _psd_sqrt(sigma), compute_uv=False))
    return float(min(1.0, nuclear**2))


def _det2(a) -> float:
    # explicit 2x2 form is exact for diagonal pure states, unlike LU
    return float((a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]).real)


def fidelity_closed_form(rho, sigma) -> float:
    """Qubit shortcut ``Tr(rho sigma) + 2 sqrt(det rho det sigma)``."""
    rho = _check_density(rho, "rho")
    sigma = _check_density(sigma, "sigma")
    dets = max(0.0, _det2(rho)) * max(0.0, _det2(sigma))
    return float(min(1.0, np.trace(rho @ sigma).real + 2 * np.sqrt(dets)))


def tomography(bloch_rows) -> np.ndarray:
    """Recover (x, y, z) per row from the three pre-pulsed z readouts."""
    return np.stack([tomography_readout(bloch_rows, a) for a in "xyz"], axis=-1)


@dataclass
class FidelityPoint:
    m: int
    fidelity: float
    v: np.ndarray
    target: np.ndarray
    effective: EffectiveState = field(repr=False, default=None)


def ideal_target(sequence) -> np.ndarray:
    """Bloch vector at the echo time with ideal pulses, no relaxation, no detuning."""
    res = run_scheme(sequence, _single_row(sequence), NoiseModel(), 1, times=[sequence.echo_time])
    return res.v


def _single_row(sequence):
    return PhaseScheme(m=sequence.m, kind="custom", rows=np.ones((1, sequence.m + 1)), sign=np.ones(1))


def fidelity_benchmark(family: str, m_list, scheme_kind: str, noise: NoiseModel, *, tau: float = 1.0,
                       ensemble_size: int = 1, scheme_builder=None) -> list[FidelityPoint]:
    """Effective-state fidelity against the ideal final state, per m.

    Each row's final state is read out through the three tomography
    settings, the readouts are combined with the sign vector, and the
    normalized vector defines the effective state.
    """
    if family not in ("CP", "CPMG", "UDD"):
        raise ValueError(f"family must be CP, CPMG or UDD, got {family!r}")
    out = []
    for m in m_list:
        seq = build_sequence(family, int(m), tau=tau)
        scheme = scheme_builder(int(m)) if scheme_builder else build_scheme(scheme_kind, int(m))
        res = run_scheme(seq, scheme, noise, ensemble_size, times=[seq.echo_time])
        readouts = tomography(res.rows[:, 0])
        v = np.asarray(scheme.sign, dtype=float) @ readouts
        eff = effective_state(*v)
        target = ideal_target(seq)
        f = fidelity(eff.rho, bloch_to_rho(target / np.linalg.norm(target)))
        out.append(FidelityPoint(m=int(m), fidelity=f, v=v, target=target, effective=eff))
    return out


# -- fixtures ----------------------------------------------------------------


@dataclass(frozen=True)
class T2Record:
    m: int
    phase_cycling: str
    t2_us: float
    sequence: str


def load_fixture(name: str) -> list[T2Record]:
    """Load a shipped T2 table (``table_s5`` or ``table_s6``)."""
    path = resources.files("hpcycle") / "data" / f"{name}.csv"
    with path.open() as fh:
        return [
            T2Record(int(r["m"]), r["phase_cycling"], float(r["T2_us"]), r["sequence"])
            for r in csv.DictReader(fh)
        ]


def fixture_series(records, phase_cycling: str, sequence: str) -> list[tuple[int, float]]:
    return [(r.m, r.t2_us) for r in records if r.phase_cycling == phase_cycling and r.sequence == sequence]


__all__ = [
    "DecayFit",
    "EffectiveState",
    "FidelityPoint",
    "ScalingFit",
    "T2Record",
    "bloch_to_rho",
    "effective_state",
    "fidelity",
    "fidelity_benchmark",
    "fidelity_closed_form",
    "fit_decay",
    "fit_inversion_recovery",
    "fixture_series",
    "ideal_target",
    "load_fixture",
    "rho_to_bloch",
    "scaling_exponent",
    "tomography",
]
