"""Command-line front end: schemes, verification, pathways, simulation, fits.

Every subcommand resolves its configuration from built-in defaults, an
optional ``--config`` JSON file (an emitted ``manifest.json`` works too) and
explicit flags, in that order of precedence. Validation reports every
problem at once. Each run writes ``manifest.json`` next to its outputs.

Exit codes: 0 success, 2 validation error, 3 budget exceeded,
4 non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import fidelity_benchmark, fit_decay, fixture_series, load_fixture, scaling_exponent
from .errors import BudgetExceeded, ConfigError, FitError
from .pathways import pathway_report, predict_echoes
from .schemes import PhaseScheme, build_scheme, verify_scheme
from .simulator import SEQUENCE_KINDS, NoiseModel, build_sequence, run_scheme, split_experiment

EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_FIT = 0, 2, 3, 4
FLOAT_FORMAT = "{:.12g}"
BUILTIN_SCHEMES = ("tpc", "cpc", "hpc")
SIM_MODES = ("trace", "sweep_m", "decay", "split")
FIT_MODELS = ("mono", "stretched", "scaling")

DEFAULTS = {
    "scheme": {"kind": "hpc", "m": 4, "combine_tpc": False, "verify": True, "out": "out"},
    "verify": {"scheme": None, "method": "auto", "samples": 100000, "seed": 0, "out": "out"},
    "pathways": {"kind": "CPMG", "m": 2, "tau": 1.0, "total_time": None, "noise": {}, "detuning": 0.0,
                 "final_order": -1, "seed": 0, "out": "out"},
    "simulate": {"mode": "trace", "kind": "CPMG", "m": 2, "tau": 1e-6, "total_time": None, "scheme": "hpc",
                 "noise": {}, "ensemble": 1, "seed": 0, "m_list": None, "total_times": None,
                 "delays": None, "model": "mono", "out": "out"},
    "fit": {"data": None, "model": "mono", "phase_cycling": None, "sequence": None, "out": "out"},
    "fidelity": {"kind": "CP", "m_list": [2, 4, 8, 16], "scheme": "hpc,tpc", "tau": 1.0, "noise": {},
                 "ensemble": 1, "seed": 0, "out": "out"},
}


def fmt(x) -> str:
    return FLOAT_FORMAT.format(float(x))


def _plain(obj):
    """JSON-ready copy with floats rounded to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if not math.isfinite(x) else float(fmt(x))
    return obj


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    path.write_text(buf.getvalue())


# -- configuration ----------------------------------------------------------


def _load_json_arg(value, name: str, problems: list):
    """Inline JSON object or a path to a JSON file."""
    if value is None or isinstance(value, dict):
        return value
    text = str(value)
    if not text.lstrip().startswith("{"):
        try:
            text = Path(text).read_text()
        except OSError as exc:
            problems.append(f"{name}: cannot read {value!r}: {exc.strerror}")
            return None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        problems.append(f"{name}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
        return None
    if not isinstance(data, dict):
        problems.append(f"{name}: expected a JSON object")
        return None
    return data


def _number_list(value, name: str, problems: list, integer=False):
    if value is None or isinstance(value, list):
        items = value
    else:
        items = [v for v in str(value).split(",") if v.strip()]
    if items is None:
        return None
    out = []
    for i, v in enumerate(items):
        try:
            x = float(v)
        except (TypeError, ValueError):
            problems.append(f"{name}[{i}]: expected a number, got {v!r}")
            continue
        if integer:
            if not x.is_integer():
                problems.append(f"{name}[{i}]: expected an integer, got {v!r}")
                continue
            x = int(x)
        out.append(x)
    return out


def resolve_config(command: str, args: argparse.Namespace) -> tuple[dict, list]:
    """Merge defaults, ``--config`` and flags; return (config, problems)."""
    problems: list[str] = []
    config = dict(DEFAULTS[command])
    if getattr(args, "config", None):
        loaded = _load_json_arg(args.config, "config", problems) or {}
        if "config" in loaded and "command" in loaded:
            if loaded["command"] != command:
                problems.append(f"config: manifest is for {loaded['command']!r}, not {command!r}")
            loaded = loaded["config"]
        problems += [f"config: unknown key {k!r}" for k in loaded if k not in config]
        config.update({k: v for k, v in loaded.items() if k in config})
    for key in config:
        flag = getattr(args, key, None)
        if flag is not None:
            config[key] = flag
    return config, problems


def _check_int(config, key, problems, minimum=None):
    v = config.get(key)
    try:
        iv = int(v)
        if isinstance(v, bool) or float(v) != iv:
            raise ValueError
    except (TypeError, ValueError):
        problems.append(f"{key}: expected an integer, got {v!r}")
        return
    if minimum is not None and iv < minimum:
        problems.append(f"{key}: must be >= {minimum}, got {iv}")
        return
    config[key] = iv


def _check_positive(config, key, problems, optional=False):
    v = config.get(key)
    if v is None and optional:
        return
    try:
        x = float(v)
    except (TypeError, ValueError):
        problems.append(f"{key}: expected a number, got {v!r}")
        return
    if not (x > 0 and math.isfinite(x)):
        problems.append(f"{key}: must be positive and finite, got {v!r}")
        return
    config[key] = x


def _check_choice(config, key, choices, problems):
    if config.get(key) not in choices:
        problems.append(f"{key}: expected one of {list(choices)}, got {config.get(key)!r}")


def _check_noise(config, problems):
    data = _load_json_arg(config.get("noise"), "noise", problems)
    if data is None:
        return None
    data = dict(data)
    data["seed"] = config.get("seed", data.get("seed", 0))
    try:
        noise = NoiseModel.from_dict(data)
    except ConfigError as exc:
        problems += [f"noise.{p}" if not p.startswith("noise") else p for p in exc.problems]
        return None
    config["noise"] = noise.to_dict()
    return noise


def _check_timing(config, problems):
    if config.get("total_time") is not None:
        _check_positive(config, "total_time", problems)
        config["tau"] = None
    else:
        _check_positive(config, "tau", problems)


def _scheme_specs(value, problems) -> list[str]:
    specs = [s.strip() for s in (value if isinstance(value, list) else str(value).split(",")) if s.strip()]
    if not specs:
        problems.append("scheme: at least one scheme kind or file is required")
    for s in specs:
        if s not in BUILTIN_SCHEMES and not Path(s).is_file():
            problems.append(f"scheme: {s!r} is neither one of {list(BUILTIN_SCHEMES)} nor a readable file")
    return specs


def _load_scheme_file(path) -> PhaseScheme:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"scheme: cannot read {str(path)!r}: {exc.strerror}"]) from exc
    return PhaseScheme.from_json(text)


def _scheme_for(spec: str, m: int) -> PhaseScheme:
    if spec in BUILTIN_SCHEMES:
        return build_scheme(spec, m)
    scheme = _load_scheme_file(spec)
    if scheme.m != m:
        raise ConfigError([f"scheme: {spec!r} has m={scheme.m} but the sequence has m={m}"])
    return scheme


def _sequence(config, m=None, total_time=None):
    kwargs = {"total_time": total_time} if total_time is not None else (
        {"total_time": config["total_time"]} if config.get("total_time") is not None else {"tau": config["tau"]})
    return build_sequence(config["kind"], int(m if m is not None else config["m"]), **kwargs)


def _in_phase(result, sequence) -> float:
    if result.normalization == 0:
        raise ConfigError(["scheme: sign vector cancels the desired echo (zero normalization)"])
    return float(result.normalized[0] @ sequence.quadrature())


# -- commands ---------------------------------------------------------------


def cmd_scheme(config, out: Path) -> dict:
    problems = []
    _check_choice(config, "kind", BUILTIN_SCHEMES, problems)
    _check_int(config, "m", problems, minimum=1)
    if problems:
        raise ConfigError(problems)
    kwargs = {"combine_tpc": bool(config["combine_tpc"])} if config["kind"] == "cpc" else {}
    scheme = build_scheme(config["kind"], config["m"], **kwargs)
    path = out / "scheme.json"
    path.write_text(scheme.to_json() + "\n")
    summary = {"rows": scheme.n_rows, "m": scheme.m, "kind": scheme.kind}
    if config["verify"]:
        report = verify_scheme(scheme)
        summary.update(ratio=report.ratio, method=report.method)
    print(f"rows {scheme.n_rows}" + (f"  predicted ratio {fmt(summary['ratio'])}" if "ratio" in summary else ""))
    return {"outputs": [path.name], "summary": summary}


def cmd_verify(config, out: Path) -> dict:
    problems = []
    if config.get("scheme") is None:
        problems.append("scheme: a scheme file is required")
    _check_choice(config, "method", ("auto", "exhaustive", "subspace", "sampled"), problems)
    _check_int(config, "samples", problems, minimum=1)
    _check_int(config, "seed", problems)
    if problems:
        raise ConfigError(problems)
    scheme = _load_scheme_file(config["scheme"])
    report = verify_scheme(scheme, method=config["method"], samples=config["samples"], seed=config["seed"])
    _dump_json(out / "report.json", report.to_dict())
    lines = [
        f"m                {report.m}",
        f"rows             {scheme.n_rows}",
        f"method           {report.method}",
        f"classes          {report.total_classes}",
        f"cancelled        {report.cancelled}",
        f"ratio            {fmt(report.ratio)}",
        f"desired survives {report.desired_survives}",
    ]
    if report.standard_error is not None:
        lines.append(f"standard error   {fmt(report.standard_error)}")
    for cls in report.surviving_classes:
        lines.append(f"  survivor F = {{{', '.join(str(j) for j in cls)}}}")
    if report.survivors_truncated:
        lines.append("  (survivor listing truncated)")
    print("\n".join(lines))
    return {"outputs": ["report.json"], "summary": {"ratio": report.ratio, "cancelled": report.cancelled}}


def cmd_pathways(config, out: Path) -> dict:
    problems = []
    _check_choice(config, "kind", SEQUENCE_KINDS[:3], problems)
    _check_int(config, "m", problems, minimum=1)
    _check_int(config, "seed", problems)
    _check_timing(config, problems)
    _check_choice(config, "final_order", (-1, 0, 1), problems)
    try:
        config["detuning"] = float(config["detuning"])
    except (TypeError, ValueError):
        problems.append(f"detuning: expected a number, got {config['detuning']!r}")
    noise = _check_noise(config, problems)
    if problems:
        raise ConfigError(problems)
    seq = _sequence(config)
    preds = predict_echoes(seq, noise, config["detuning"], final_order=config["final_order"])
    (out / "pathways.csv").write_text(pathway_report(preds, FLOAT_FORMAT))
    echoes = sum(p.refocusing for p in preds)
    print(f"pathways {len(preds)}  refocusing {echoes}")
    return {"outputs": ["pathways.csv"], "summary": {"pathways": len(preds), "refocusing": echoes}}


def _check_simulate(config) -> tuple[NoiseModel | None, list[str]]:
    problems = []
    _check_choice(config, "mode", SIM_MODES, problems)
    _check_choice(config, "kind", SEQUENCE_KINDS[:3], problems)
    _check_int(config, "m", problems, minimum=1)
    _check_int(config, "ensemble", problems, minimum=1)
    _check_int(config, "seed", problems)
    _check_choice(config, "model", ("mono", "stretched"), problems)
    mode = config.get("mode")
    if mode == "decay":
        config["total_times"] = _number_list(config["total_times"], "total_times", problems)
        if not config["total_times"] or len(config["total_times"]) < 4:
            problems.append("total_times: decay mode needs at least 4 values")
        elif any(t <= 0 for t in config["total_times"]) or np.any(np.diff(config["total_times"]) <= 0):
            problems.append("total_times: values must be positive and strictly increasing")
    else:
        _check_timing(config, problems)
    if mode == "sweep_m":
        config["m_list"] = _number_list(config["m_list"], "m_list", problems, integer=True)
        if not config["m_list"] or any(m < 1 for m in config["m_list"]):
            problems.append("m_list: sweep_m mode needs one or more integers >= 1")
    if mode == "split":
        config["delays"] = _number_list(config["delays"], "delays", problems)
        if not config["delays"] or len(config["delays"]) < 4:
            problems.append("delays: split mode needs at least 4 values")
        elif config.get("tau") is None or any(d <= config["tau"] for d in config["delays"]):
            problems.append("delays: every delay must exceed tau (split mode takes tau, not total_time)")
    else:
        config["scheme"] = _scheme_specs(config["scheme"], problems)
        if mode == "trace" and len(config["scheme"]) != 1:
            problems.append("scheme: trace mode runs exactly one scheme")
    noise = _check_noise(config, problems)
    return noise, problems


def cmd_simulate(config, out: Path) -> dict:
    noise, problems = _check_simulate(config)
    if problems:
        raise ConfigError(problems)
    return {"trace": _sim_trace, "sweep_m": _sim_sweep_m, "decay": _sim_decay, "split": _sim_split}[config["mode"]](
        config, noise, out)


def _sim_trace(config, noise, out):
    seq = _sequence(config)
    scheme = _scheme_for(config["scheme"][0], seq.m)
    res = run_scheme(seq, scheme, noise, config["ensemble"])
    outputs = ["trace_combined.csv"]
    _write_csv(out / "trace_combined.csv", ["time_s", "sx", "sy", "sz"],
               ([t, *v] for t, v in zip(res.times, res.combined.astype(float))))
    rows_dir = out / "rows"
    rows_dir.mkdir(exist_ok=True)
    width = len(str(scheme.n_rows - 1))
    for r in range(scheme.n_rows):
        name = f"row_{r:0{width}d}.csv"
        _write_csv(rows_dir / name, ["time_s", "sx", "sy", "sz"],
                   ([t, *v] for t, v in zip(res.times, res.rows[r].astype(float))))
        outputs.append(f"rows/{name}")
    summary = {
        "echo_time": seq.echo_time,
        "echo_in_phase": _in_phase(run_scheme(seq, scheme, noise, config["ensemble"], times=[seq.echo_time]), seq),
        "v": res.v,
        "normalization": res.normalization,
        "rows": scheme.n_rows,
        "ensemble_size": res.ensemble_size,
    }
    _dump_json(out / "summary.json", summary)
    print(f"echo at {fmt(seq.echo_time)} s  in-phase {fmt(summary['echo_in_phase'])}")
    return {"outputs": outputs + ["summary.json"], "summary": summary}


def _sim_sweep_m(config, noise, out):
    rows = []
    for spec in config["scheme"]:
        for m in config["m_list"]:
            seq = _sequence(config, m=m)
            res = run_scheme(seq, _scheme_for(spec, m), noise, config["ensemble"], times=[seq.echo_time])
            rows.append([m, spec, seq.echo_time, _in_phase(res, seq)])
    _write_csv(out / "echo_vs_m.csv", ["m", "scheme", "echo_time_s", "amplitude"], rows)
    print(f"{len(rows)} points")
    return {"outputs": ["echo_vs_m.csv"], "summary": {"points": len(rows)}}


def _sim_decay(config, noise, out):
    rows, fits = [], {}
    for spec in config["scheme"]:
        points = []
        for total in config["total_times"]:
            seq = _sequence(config, total_time=total)
            res = run_scheme(seq, _scheme_for(spec, seq.m), noise, config["ensemble"], times=[seq.echo_time])
            amp = _in_phase(res, seq)
            points.append((seq.echo_time, amp))
            rows.append([spec, seq.echo_time, amp])
        fits[spec] = fit_decay(points, config["model"]).to_dict()
    _write_csv(out / "decay.csv", ["scheme", "time_s", "amplitude"], rows)
    _dump_json(out / "summary.json", {"fits": fits})
    for spec, f in fits.items():
        print(f"{spec}: apparent T2 {fmt(f['t2'])} s")
    return {"outputs": ["decay.csv", "summary.json"], "summary": {k: v["t2"] for k, v in fits.items()}}


def _sim_split(config, noise, out):
    res = split_experiment(config["tau"], config["delays"], noise, config["ensemble"])
    _write_csv(out / "split_desired.csv", ["time_s", "amplitude"], zip(res.desired_times, res.desired))
    _write_csv(out / "split_stimulated.csv", ["time_s", "amplitude"], zip(res.stimulated_times, res.stimulated))
    desired = fit_decay(np.c_[res.desired_times, res.desired], config["model"])
    stim = fit_decay(np.c_[res.stimulated_times, res.stimulated], config["model"])
    summary = {"desired": desired.to_dict(), "stimulated": stim.to_dict(), "ratio": stim.t2 / desired.t2}
    _dump_json(out / "summary.json", summary)
    print(f"desired {fmt(desired.t2)} s  stimulated {fmt(stim.t2)} s  ratio {fmt(summary['ratio'])}")
    return {"outputs": ["split_desired.csv", "split_stimulated.csv", "summary.json"],
            "summary": {"ratio": summary["ratio"]}}


def _read_fit_data(config) -> tuple[str, list]:
    """Return ('decay'|'scaling', points) from a CSV path or fixture name."""
    source = config["data"]
    if source in ("table_s5", "table_s6"):
        records = load_fixture(source)
        return "scaling", fixture_series(records, config["phase_cycling"], config["sequence"])
    try:
        text = Path(source).read_text()
    except OSError as exc:
        raise ConfigError([f"data: cannot read {str(source)!r}: {exc.strerror}"]) from exc
    reader = csv.DictReader(io.StringIO(text))
    fields = reader.fieldnames or []
    if {"m", "T2_us"} <= set(fields):
        kind, xkey, ykey = "scaling", "m", "T2_us"
    elif {"time_s", "amplitude"} <= set(fields):
        kind, xkey, ykey = "decay", "time_s", "amplitude"
    else:
        raise ConfigError([f"data: header must contain time_s,amplitude or m,T2_us; got {fields}"])
    problems, points = [], []
    for lineno, row in enumerate(reader, start=2):
        if kind == "scaling":
            if config["phase_cycling"] and row.get("phase_cycling") != config["phase_cycling"]:
                continue
            if config["sequence"] and row.get("sequence") != config["sequence"]:
                continue
        try:
            points.append((float(row[xkey]), float(row[ykey])))
        except (TypeError, ValueError):
            problems.append(f"data: row {lineno}: cannot parse {xkey}={row.get(xkey)!r}, {ykey}={row.get(ykey)!r}")
    if problems:
        raise ConfigError(problems)
    return kind, points


def cmd_fit(config, out: Path) -> dict:
    problems = []
    if config.get("data") is None:
        problems.append("data: a CSV file or fixture name (table_s5, table_s6) is required")
    _check_choice(config, "model", FIT_MODELS, problems)
    if config.get("data") in ("table_s5", "table_s6") and not (config["phase_cycling"] and config["sequence"]):
        problems.append("phase_cycling/sequence: fixtures need both filters")
    if problems:
        raise ConfigError(problems)
    kind, points = _read_fit_data(config)
    if not points:
        raise ConfigError(["data: no rows left after filtering"])
    if kind == "scaling" or config["model"] == "scaling":
        if kind != "scaling":
            raise ConfigError(["model: scaling needs m,T2_us data"])
        fit = scaling_exponent(points)
        result = {"kind": "scaling", "alpha": fit.alpha, "stderr": fit.stderr, "prefactor": fit.prefactor,
                  "n_points": fit.n_points}
        print(f"alpha {fmt(fit.alpha)} +- {fmt(fit.stderr)}")
    else:
        fit = fit_decay(sorted(points), config["model"])
        result = {"kind": "decay", **fit.to_dict()}
        print(f"T2 {fmt(fit.t2)}  beta {fmt(fit.beta)}  rms {fmt(fit.residual_rms)}")
    _dump_json(out / "fit.json", result)
    return {"outputs": ["fit.json"], "summary": result}


def cmd_fidelity(config, out: Path) -> dict:
    problems = []
    _check_choice(config, "kind", ("CP", "CPMG", "UDD"), problems)
    config["m_list"] = _number_list(config["m_list"], "m_list", problems, integer=True)
    if not config["m_list"] or any(m < 1 for m in config["m_list"]):
        problems.append("m_list: needs one or more integers >= 1")
    _check_positive(config, "tau", problems)
    _check_int(config, "ensemble", problems, minimum=1)
    _check_int(config, "seed", problems)
    config["scheme"] = [s for s in _scheme_specs(config["scheme"], problems)]
    problems += [f"scheme: fidelity runs take built-in kinds, got {s!r}" for s in config["scheme"]
                 if s not in BUILTIN_SCHEMES]
    noise = _check_noise(config, problems)
    if problems:
        raise ConfigError(problems)
    rows, states = [], []
    for spec in config["scheme"]:
        for pt in fidelity_benchmark(config["kind"], config["m_list"], spec, noise, tau=config["tau"],
                                     ensemble_size=config["ensemble"]):
            rows.append([pt.m, spec, pt.fidelity])
            states.append({"m": pt.m, "scheme": spec, "fidelity": pt.fidelity, "v": pt.v, "target": pt.target,
                           "direction": pt.effective.direction, "rho_real": pt.effective.rho.real,
                           "rho_imag": pt.effective.rho.imag})
    _write_csv(out / "fidelity.csv", ["m", "scheme", "F_eff"], rows)
    _dump_json(out / "effective_states.json", states)
    print(f"{len(rows)} points  min F_eff {fmt(min(r[2] for r in rows))}")
    return {"outputs": ["fidelity.csv", "effective_states.json"], "summary": {"points": len(rows)}}


COMMANDS = {
    "scheme": cmd_scheme,
    "verify": cmd_verify,
    "pathways": cmd_pathways,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "fidelity": cmd_fidelity,
}


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hpcycle", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hpcycle {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file or emitted manifest")
        p.add_argument("--out", help="output directory (default: out)")

    def sequence_flags(p, kinds=SEQUENCE_KINDS[:3]):
        p.add_argument("--kind", help=f"sequence family: {', '.join(kinds)}")
        p.add_argument("--m", type=int, help="number of inversion pulses")
        p.add_argument("--tau", type=float, help="half inter-pulse spacing in seconds")
        p.add_argument("--total-time", dest="total_time", type=float, help="echo time in seconds (instead of --tau)")

    def noise_flags(p):
        p.add_argument("--noise", help="noise model as inline JSON or a path to a JSON file")
        p.add_argument("--seed", type=int, help="seed for the detuning ensemble and pulse jitter")

    p = sub.add_parser("scheme", help="build a phase-cycling scheme")
    common(p)
    p.add_argument("--kind", help="tpc, cpc or hpc")
    p.add_argument("--m", type=int, help="number of inversion pulses")
    p.add_argument("--combine-tpc", dest="combine_tpc", action="store_const", const=True,
                   help="CPC only: also alternate the preparation phase")
    p.add_argument("--no-verify", dest="verify", action="store_const", const=False,
                   help="skip the orthogonality prediction")

    p = sub.add_parser("verify", help="report which pathway classes a scheme cancels")
    common(p)
    p.add_argument("--scheme", help="scheme JSON file")
    p.add_argument("--method", help="auto, exhaustive, subspace or sampled")
    p.add_argument("--samples", type=int, help="sample count for the sampled method")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("pathways", help="enumerate coherence-transfer pathways and echo positions")
    common(p)
    sequence_flags(p)
    noise_flags(p)
    p.add_argument("--detuning", type=float, help="detuning in rad/s")
    p.add_argument("--final-order", dest="final_order", type=int, help="readout coherence order (default -1)")

    p = sub.add_parser("simulate", help="simulate phase-cycled decoupling sequences")
    common(p)
    sequence_flags(p)
    noise_flags(p)
    p.add_argument("--mode", help=f"one of {', '.join(SIM_MODES)}")
    p.add_argument("--scheme", help="tpc, cpc, hpc or a scheme file; comma-separated for sweeps")
    p.add_argument("--ensemble", type=int, help="detuning ensemble size")
    p.add_argument("--m-list", dest="m_list", help="comma-separated m values (sweep_m)")
    p.add_argument("--total-times", dest="total_times", help="comma-separated echo times in seconds (decay)")
    p.add_argument("--delays", help="comma-separated storage delays in seconds (split)")
    p.add_argument("--model", help="decay model for fits: mono or stretched")

    p = sub.add_parser("fit", help="fit a decay curve or a T2 scaling exponent")
    common(p)
    p.add_argument("--data", help="CSV (time_s,amplitude or m,T2_us) or fixture name table_s5/table_s6")
    p.add_argument("--model", help=f"one of {', '.join(FIT_MODELS)}")
    p.add_argument("--phase-cycling", dest="phase_cycling", help="filter for T2 tables, e.g. HPC")
    p.add_argument("--sequence", help="filter for T2 tables, e.g. CPMG")

    p = sub.add_parser("fidelity", help="effective-state fidelity versus m")
    common(p)
    p.add_argument("--kind", help="CP, CPMG or UDD")
    p.add_argument("--m-list", dest="m_list", help="comma-separated m values")
    p.add_argument("--tau", type=float, help="half inter-pulse spacing")
    p.add_argument("--scheme", help="comma-separated scheme kinds")
    p.add_argument("--ensemble", type=int, help="detuning ensemble size")
    noise_flags(p)
    return parser


def _write_manifest(out: Path, command: str, config: dict, status: dict) -> None:
    manifest = {"tool": "hpcycle", "version": __version__, "command": command, "config": config, **status}
    _dump_json(out / "manifest.json", manifest)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    config, problems = resolve_config(command, args)
    out = Path(str(config.get("out") or "out"))
    try:
        if problems:
            raise ConfigError(problems)
        out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[command](config, out)
        code = EXIT_OK
        status = {"status": "ok", "exit_code": code, "outputs": result["outputs"]}
    except ConfigError as exc:
        code = EXIT_INVALID
        for p in exc.problems:
            print(f"error: {p}", file=sys.stderr)
        status = {"status": "invalid", "exit_code": code, "problems": exc.problems}
    except BudgetExceeded as exc:
        code = EXIT_BUDGET
        print(f"error: budget exceeded: {exc}", file=sys.stderr)
        status = {"status": "budget_exceeded", "exit_code": code, "message": str(exc)}
    except FitError as exc:
        code = EXIT_FIT
        print(f"error: fit did not converge: {exc}", file=sys.stderr)
        status = {"status": "not_converged", "exit_code": code, "message": str(exc),
                  "diagnostics": exc.diagnostics}
    except ValueError as exc:
        code = EXIT_INVALID
        print(f"error: {exc}", file=sys.stderr)
        status = {"status": "invalid", "exit_code": code, "problems": [str(exc)]}
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write_manifest(out, command, config, status)
    except OSError as exc:
        print(f"warning: could not write manifest: {exc}", file=sys.stderr)
    return code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
