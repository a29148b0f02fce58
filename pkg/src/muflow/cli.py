"""Command-line front end: simulations, peakon runs and numerical checks."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import densities, hamiltonian, lax, peakon
from .densities import GreensFamily, InertiaOperator
from .errors import MuflowError, UndefinedFunctional
from .grid import PeriodicField, PeriodicGrid, parse_initial
from .pde import FamilyConfig, SolverParams, integrate, initial_from_momentum

EXIT_CONFIG = 2
EXIT_NONFINITE = 3
EXIT_COLLISION = 4
EXIT_CHECK = 5

FAMILY_LAMBDA = {"mudp": 3.0, "much": 2.0, "muburgers": 3.0}


class ConfigError(Exception):
    pass


# ---- serialization ----

def _fmt(x: float) -> str:
    return "%.17g" % x


def _json_ready(obj):
    """Replace non-finite floats by None and arrays by lists."""
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    return obj


def _dumps(obj) -> str:
    # repr of a float is the shortest string that round-trips exactly
    return json.dumps(_json_ready(obj), sort_keys=True)


def _write_json(path: Path, obj):
    path.write_text(json.dumps(_json_ready(obj), sort_keys=True, indent=2) + "\n")


def _write_csv(path: Path, header: list[str], rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None or not np.isfinite(v) else _fmt(v) for v in row])


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from exc


# ---- helpers ----

def _family_config(family: str, lam: float | None, gauge: float = 0.0) -> FamilyConfig:
    if family == "mulambda":
        if lam is None:
            raise ConfigError("--lambda is required for --family mulambda")
    else:
        if lam is None:
            lam = FAMILY_LAMBDA[family]
    if lam == 1:
        raise ConfigError("lambda=1 not admissible for H0 normalization")
    if family == "muburgers":
        if lam != 3:
            raise ConfigError("muburgers has lambda = 3")
        return FamilyConfig.muburgers(gauge)
    return FamilyConfig(lam)


def _initial_field(args, grid: PeriodicGrid) -> PeriodicField:
    given = [v is not None for v in (args.initial, args.fourier, args.momentum)]
    if sum(given) != 1:
        raise ConfigError("give exactly one of --initial, --fourier, --momentum")
    if args.initial is not None:
        return parse_initial(args.initial, grid)
    if args.fourier is not None:
        return fourier_field(grid, args.fourier)
    m0 = parse_initial(args.momentum, grid)
    if args.family == "muburgers":
        raise ConfigError("--momentum inverts mu - d^2 and is not available for muburgers")
    return initial_from_momentum(m0)


def fourier_field(grid: PeriodicGrid, coef) -> PeriodicField:
    """a0 + sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x) from [a0, a1, b1, a2, b2, ...]."""
    coef = list(coef)
    if not coef:
        raise ConfigError("empty Fourier coefficient list")
    x = grid.points
    values = np.full(grid.n, float(coef[0]))
    rest = coef[1:]
    for k in range(1, (len(rest) + 1) // 2 + 1):
        a = rest[2 * k - 2]
        b = rest[2 * k - 1] if 2 * k - 1 < len(rest) else 0.0
        values += a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)
    return PeriodicField(grid, values)


def _seed(args) -> int:
    if args.seed is not None:
        return int(args.seed)
    env = os.environ.get("MUFLOW_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError(f"MUFLOW_SEED is not an integer: {env!r}") from exc


def _map(func, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [func(i) for i in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---- simulate ----

def cmd_simulate(args) -> int:
    config = _family_config(args.family, args.lam, args.gauge)
    params = SolverParams(args.n, args.dt, args.t_end, dealias=args.dealias,
                          blowup_slope_threshold=args.threshold, record_every=args.record_every,
                          adaptive=args.adaptive, track_flow=args.track_flow)
    grid = PeriodicGrid(args.n)
    u0 = _initial_field(args, grid)
    record = integrate(config, u0, params)
    out = _out_dir(args)

    with (out / "run.jsonl").open("w") as fh:
        for t, u in zip(record.times, record.snapshots):
            fh.write(_dumps({"t": t, "u": u}) + "\n")
    names = ["mean", "H0", "H1", "H2", "ux_inf", "pointwise_dev"]
    rows = ([t] + [record.invariants[k][i] for k in names] for i, t in enumerate(record.times))
    _write_csv(out / "invariants.csv", ["t"] + names, rows)

    drifts = {}
    for k in ("mean", "H0", "H1", "H2"):
        series = record.invariants[k]
        if np.all(np.isfinite(series)):
            # a relative drift of an invariant that starts at round-off level is meaningless
            meaningful = abs(series[0]) > 1e-12
            drifts[k] = {"absolute": record.drift(k),
                         "relative": record.drift(k, True) if meaningful else None}
    if config.is_muburgers:
        for p in (1, 2, 3):
            f = hamiltonian.Functional("MuB", p=p)
            vals = np.array([hamiltonian.eval_functional(f, record.field(i), config)
                             for i in range(len(record.times))])
            drifts[f"MuB{p}"] = {"absolute": float(np.max(np.abs(vals - vals[0]))), "relative": None}
    summary = {
        "command": "simulate",
        "family": args.family,
        "lambda": config.lam,
        "n": args.n,
        "dt": args.dt,
        "t_end": args.t_end,
        "termination": record.termination.as_dict(),
        "drifts": drifts,
    }
    if record.termination.kind == "BlowupDetected":
        summary["blowup_estimate"] = record.termination.t_est
    _write_json(out / "summary.json", summary)
    print(_dumps(summary))
    return EXIT_NONFINITE if record.termination.kind == "NonFinite" else 0


# ---- peakon commands ----

def _load_state(args, keys: tuple[str, ...]) -> dict:
    data = {}
    if args.state is not None:
        try:
            data = json.loads(Path(args.state).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read state file: {exc}") from exc
    for k in keys:
        v = getattr(args, k)
        if v is not None:
            data[k] = v
        if k not in data:
            raise ConfigError(f"missing {k} in peakon state")
    return data


def _write_trajectory(out: Path, traj: peakon.PeakonTrajectory):
    with (out / "trajectory.jsonl").open("w") as fh:
        for i, t in enumerate(traj.times):
            row = {"t": t, "q": traj.q[i], "p": traj.p[i]}
            if traj.s is not None:
                row["s"] = traj.s[i]
            fh.write(_dumps(row) + "\n")


def _weak_report(traj, lam: float, seed: int, count: int) -> dict:
    span = (float(traj.times[0]), float(traj.times[-1]))
    tests = peakon.random_tests(np.random.default_rng(seed), count, span)
    res = peakon.weak_form_residual(traj, lam, tests)
    return {"tests": count, "seed": seed, "max_abs": float(np.max(np.abs(res))), "tolerance": 1e-6,
            "pass": bool(np.max(np.abs(res)) < 1e-6)}


def cmd_peakon(args) -> int:
    lam = args.lam
    if lam in (0, 1):
        raise ConfigError(f"lambda={lam:g} is excluded for peakons")
    data = _load_state(args, ("q", "p"))
    family = GreensFamily(args.green)
    state = peakon.PeakonState(data["q"], data["p"])
    traj = peakon.integrate_peakons(state, lam, family, args.t_end, args.dt)
    out = _out_dir(args)
    _write_trajectory(out, traj)
    header = ["t", "sum_p"] + (["h"] if lam == 2 else [])
    rows = []
    for i, t in enumerate(traj.times):
        row = [t, float(np.sum(traj.p[i]))]
        if lam == 2:
            row.append(peakon.two_body_energy(traj.state(i), family))
        rows.append(row)
    _write_csv(out / "conserved.csv", header, rows)
    summary = {"command": "peakon", "lambda": lam, "status": traj.status, "t_final": traj.times[-1],
               "q_final": traj.q[-1], "q_lift_final": traj.q_lift[-1], "p_final": traj.p[-1],
               "sum_p_drift": float(np.ptp(traj.p.sum(axis=1)))}
    if lam == 2:
        h = np.array([r[2] for r in rows])
        summary["h_drift"] = float(np.ptp(h))
    if args.verify and traj.status == "Completed":
        if family is not GreensFamily.MU:
            raise ConfigError("--verify needs the mu Green's function")
        summary["weak_form"] = _weak_report(traj, lam, _seed(args), args.tests)
    _write_json(out / "summary.json", summary)
    print(_dumps(summary))
    return EXIT_COLLISION if traj.status != "Completed" else 0


def cmd_shock(args) -> int:
    data = _load_state(args, ("q", "p", "s"))
    state = peakon.ShockPeakonState(data["q"], data["p"], data["s"])
    traj = peakon.integrate_shock_peakons(state, args.t_end, args.dt)
    out = _out_dir(args)
    _write_trajectory(out, traj)
    _write_csv(out / "conserved.csv", ["t", "sum_p"],
               ([t, float(np.sum(traj.p[i]))] for i, t in enumerate(traj.times)))
    summary = {"command": "shock", "status": traj.status, "t_final": traj.times[-1],
               "q_final": traj.q[-1], "p_final": traj.p[-1], "s_final": traj.s[-1]}
    if args.verify and traj.status == "Completed":
        summary["weak_form"] = _weak_report(traj, 3.0, _seed(args), args.tests)
    _write_json(out / "summary.json", summary)
    print(_dumps(summary))
    return EXIT_COLLISION if traj.status != "Completed" else 0


def cmd_reduced2(args) -> int:
    data = _load_state(args, ("q", "p"))
    state = peakon.PeakonState(data["q"], data["p"])
    if state.size != 2:
        raise ConfigError("reduced2 needs exactly two peakons")
    full = peakon.integrate_peakons(state, 2.0, GreensFamily.MU, args.t_end, args.dt)
    r0 = peakon.ReducedTwoPeakon.from_state(state)
    times, Q, P = peakon.integrate_reduced(r0, args.t_end, args.dt)
    k = len(full.times)
    q_full = np.mod(full.q_lift[:, 1] - full.q_lift[:, 0], 1.0)
    p_full = full.p[:, 1] - full.p[:, 0]
    out = _out_dir(args)
    with (out / "trajectory.jsonl").open("w") as fh:
        for i in range(k):
            fh.write(_dumps({"t": times[i], "Q": Q[i], "P": P[i], "Q_full": q_full[i], "P_full": p_full[i]}) + "\n")
    summary = {"command": "reduced2", "status": full.status, "alpha": r0.alpha, "h": r0.h, "H0": r0.H0,
               "max_Q_error": float(np.max(np.abs(np.mod(Q[:k], 1.0) - q_full))),
               "max_P_error": float(np.max(np.abs(P[:k] - p_full)))}
    _write_json(out / "summary.json", summary)
    print(_dumps(summary))
    return EXIT_COLLISION if full.status != "Completed" else 0


# ---- checks ----

def _identity_trial(job):
    seed, n, trials = job
    rng = np.random.default_rng(seed)
    grid = PeriodicGrid(n)
    worst = 0.0
    for _ in range(trials):
        qi, qj = rng.uniform(0.0, 1.0, size=2)
        worst = max(worst, densities.identity_suite(qi, qj, grid).max_abs())
    return worst


def check_identities(args, seed: int) -> dict:
    children = np.random.SeedSequence(seed).spawn(max(1, args.jobs))
    sizes = np.array_split(np.arange(args.trials), len(children))
    jobs = [(c, args.n, len(s)) for c, s in zip(children, sizes) if len(s)]
    worst = max(_map(_identity_trial, jobs, args.jobs))
    return {"max_residual": worst, "tolerance": 1e-6, "pass": worst < 1e-6}


def _lax_probe(grid: PeriodicGrid, rng: np.random.Generator) -> PeriodicField:
    coef = rng.normal(size=9) / np.arange(1, 10)
    return fourier_field(grid, coef)


def check_lax(args, seed: int) -> dict:
    if args.family == "mudp":
        config = FamilyConfig.mudp()
        expr = args.u or "2 + 0.1*sin(2*pi*x) + 0.0001*cos(72*pi*x)"
    else:
        config = FamilyConfig.muburgers()
        expr = args.u or "sin(2*pi*x) + 0.3*cos(4*pi*x)"
    rng = np.random.default_rng(seed)
    result = {"family": args.family, "u": expr, "spectral_parameters": args.spectral_parameters}
    worst = {}
    for n in (args.n // 2, args.n):
        grid = PeriodicGrid(n)
        u = parse_initial(expr, grid)
        m_t = lax.pointwise_momentum_rate(u, config, 2.0) if args.wrong_coefficient else None
        probe_rng = np.random.default_rng(rng.integers(2**63))
        psi = _lax_probe(grid, probe_rng)
        worst[n] = max(lax.lax_residual(u, config, lax.LaxProbe(s, psi), m_t).sup()
                       for s in args.spectral_parameters)
    coarse, fine = worst[args.n // 2], worst[args.n]
    result.update({"residual": fine, "residual_coarse": coarse, "tolerance": 1e-8,
                   "wrong_coefficient": args.wrong_coefficient})
    result["pass"] = fine < 1e-8
    return result


def check_bihamiltonian(args, seed: int) -> dict:
    grid = PeriodicGrid(args.n)
    if args.family == "mudp":
        m = parse_initial(args.m or "2+sin(2*pi*x)", grid)
        r0, r2 = hamiltonian.bihamiltonian_residual(m)
    else:
        u = parse_initial(args.u or "sin(2*pi*x)+cos(4*pi*x)/2", grid)
        config = FamilyConfig.muburgers()
        m = densities.apply_A(InertiaOperator.MINUS_DXX, u)
        r0, r2 = hamiltonian.bihamiltonian_residual(m, config, velocity_mean=float(np.mean(u.values)))
    return {"family": args.family, "J0_residual": r0, "J2_residual": r2, "tolerance": 1e-4,
            "pass": max(r0, r2) < 1e-4}


def check_negative_flow(args, seed: int) -> dict:
    grid = PeriodicGrid(args.n)
    m = parse_initial(args.m or "2+sin(2*pi*x)", grid)
    rep = hamiltonian.negative_flow_check(m)
    measured = rep.j0 if args.route == "j0" else rep.j2_inverse
    return {"route": args.route, "j0_relative": rep.j0, "j2_forward_relative": rep.j2_forward,
            "j2_inverse_relative": rep.j2_inverse, "tolerance": 1e-4, "pass": measured < 1e-4}


def _random_diffeo(grid: PeriodicGrid, rng: np.random.Generator) -> densities.CircleMap:
    k = np.arange(1, 4)
    a = rng.normal(size=3) / (2 * np.pi * k) * 0.3 / 3
    b = rng.normal(size=3) / (2 * np.pi * k) * 0.3 / 3
    x = grid.points[:, None]
    disp = (a * np.sin(2 * np.pi * k * x) + b * (np.cos(2 * np.pi * k * x) - 1)).sum(axis=1)
    return densities.CircleMap(PeriodicField(grid, disp + rng.uniform(-0.5, 0.5)))


def check_orbit(args, seed: int) -> dict:
    grid = PeriodicGrid(args.n)
    rng = np.random.default_rng(seed)
    lam = args.lam
    m = parse_initial(args.m or "2+sin(2*pi*x)", grid)
    h = densities.h_minus1(m, lam)
    drift = 0.0
    for _ in range(args.trials):
        xi = _random_diffeo(grid, rng)
        drift = max(drift, abs(densities.h_minus1(densities.act_density(xi, m, lam), lam) - h))
    xi = densities.canonical_diffeo(m, lam)
    const = PeriodicField(grid, np.full(grid.n, np.sign(m.values[0]) * h**lam))
    roundtrip = (densities.act_density(xi, const, lam) - m).sup()
    return {"lambda": lam, "h_minus1": h, "invariance_drift": drift, "roundtrip_error": roundtrip,
            "tolerance": 1e-8, "pass": drift < 1e-8 and roundtrip < 1e-8}


def check_conservation(args, seed: int) -> dict:
    grid = PeriodicGrid(args.n)
    u0 = initial_from_momentum(parse_initial(args.m or "2+sin(2*pi*x)", grid))
    rec = integrate(FamilyConfig.mudp(), u0, SolverParams(args.n, args.dt, args.t_end))
    drifts = {k: rec.drift(k, True) for k in ("H0", "H1", "H2")}
    mean_drift = rec.drift("mean")
    ok = rec.termination.kind == "Completed" and max(drifts.values()) < 1e-6 and mean_drift < 1e-10
    return {"termination": rec.termination.as_dict(), "relative_drifts": drifts, "mean_drift": mean_drift,
            "tolerance_relative": 1e-6, "tolerance_mean": 1e-10, "pass": ok}


CHECKS = {
    "identities": check_identities,
    "lax": check_lax,
    "bihamiltonian": check_bihamiltonian,
    "negative-flow": check_negative_flow,
    "orbit": check_orbit,
    "conservation": check_conservation,
}


def cmd_check(args) -> int:
    seed = _seed(args)
    report = {"command": "check", "check": args.which, "seed": seed}
    report.update(CHECKS[args.which](args, seed))
    if args.out is not None:
        _write_json(_out_dir(args) / "report.json", report)
    print(_dumps(report))
    return 0 if report["pass"] else EXIT_CHECK


# ---- parser ----

def _common(p: argparse.ArgumentParser, out_default: str | None = "."):
    p.add_argument("--config", help="JSON file with parameter values; explicit flags take precedence")
    p.add_argument("--seed", type=int, help="global seed (falls back to MUFLOW_SEED, then 0)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")
    p.add_argument("--out", default=out_default, help="output directory")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="muflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("simulate", help="evolve the mu-family or muBurgers")
    p.add_argument("--family", choices=["mudp", "much", "muburgers", "mulambda"], default="mudp")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--initial", help="expression for u0 in x")
    p.add_argument("--fourier", type=_float_list, help="coefficients a0, a1, b1, a2, b2, ... of u0")
    p.add_argument("--momentum", help="expression for m0; u0 solves (mu - d^2) u0 = m0")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-end", dest="t_end", type=float, default=1.0)
    p.add_argument("--dealias", action="store_true")
    p.add_argument("--adaptive", action="store_true")
    p.add_argument("--record-every", dest="record_every", type=int, default=1)
    p.add_argument("--threshold", type=float, default=1e3, help="blow-up threshold on max |u_x|")
    p.add_argument("--track-flow", dest="track_flow", action="store_true")
    p.add_argument("--gauge", type=float, default=0.0, help="muBurgers gauge c = mean(u_t)")
    _common(p)
    p.set_defaults(handler=cmd_simulate)
    subs["simulate"] = p

    for name, handler, keys in (("peakon", cmd_peakon, "qp"), ("shock", cmd_shock, "qps"),
                                ("reduced2", cmd_reduced2, "qp")):
        p = sub.add_parser(name)
        if name == "peakon":
            p.add_argument("--lambda", dest="lam", type=float, default=3.0)
            p.add_argument("--green", choices=[f.value for f in GreensFamily], default="mu")
        for k in keys:
            p.add_argument(f"--{k}", type=float, nargs="+")
        p.add_argument("--state", help='JSON file {"q": [...], "p": [...]}')
        p.add_argument("--t-end", dest="t_end", type=float, default=1.0)
        p.add_argument("--dt", type=float, default=1e-3)
        if name != "reduced2":
            p.add_argument("--verify", action="store_true", help="report the weak-form residual")
            p.add_argument("--tests", type=int, default=20)
        _common(p)
        p.set_defaults(handler=handler)
        subs[name] = p

    p = sub.add_parser("check", help="run a numerical check and report pass/fail")
    p.add_argument("which", choices=sorted(CHECKS))
    p.add_argument("--n", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--family", choices=["mudp", "muburgers"], default="mudp")
    p.add_argument("--m", help="momentum expression")
    p.add_argument("--u", help="velocity expression")
    p.add_argument("--lambda", dest="lam", type=float, default=3.0)
    p.add_argument("--spectral-parameters", dest="spectral_parameters", type=_float_list, default=[0.5, 1.0, 2.0])
    p.add_argument("--wrong-coefficient", dest="wrong_coefficient", action="store_true")
    p.add_argument("--route", choices=["j2", "j0"], default="j2")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-end", dest="t_end", type=float, default=5.0)
    _common(p, out_default=None)
    p.set_defaults(handler=cmd_check)
    subs["check"] = p
    return parser, subs


CHECK_DEFAULTS = {
    "identities": {"n": 1024, "trials": 100},
    "lax": {"n": 256},
    "bihamiltonian": {"n": 128},
    "negative-flow": {"n": 128},
    "orbit": {"n": 256, "trials": 50},
    "conservation": {"n": 256},
}


def _apply_config(args, parser: argparse.ArgumentParser, sub: argparse.ArgumentParser, argv):
    """Fill options from --config wherever the flag was not given explicitly."""
    if not args.config:
        return args
    try:
        data = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    known = {a.dest: a for a in sub._actions}
    explicit = set()
    for a in sub._actions:
        if any(opt in argv or any(s.startswith(opt + "=") for s in argv) for opt in a.option_strings):
            explicit.add(a.dest)
    for key, value in data.items():
        dest = {"lambda": "lam", "t-end": "t_end"}.get(key, key.replace("-", "_"))
        if dest not in known or dest in ("config", "handler", "which"):
            raise ConfigError(f"unknown config key {key!r}")
        if dest not in explicit:
            setattr(args, dest, value)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config(args, parser, subs[args.command], argv)
        if args.command == "check":
            for k, v in CHECK_DEFAULTS[args.which].items():
                if getattr(args, k) is None:
                    setattr(args, k, v)
        return args.handler(args)
    except (ConfigError, UndefinedFunctional) as exc:
        print(f"muflow: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MuflowError, ValueError) as exc:
        print(f"muflow: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
