"""Command-line front end: sweeps to CSV, summaries to JSON.

Every subcommand is driven by a flat config record.  ``--print-config``
prints the effective record as JSON and exits; ``--config FILE`` loads one
(unknown keys are rejected) and explicit flags override it.  Errors are
reported as a JSON object on stderr with exit status 1.
"""

import argparse
import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
import json
import os
import sys

import numpy as np

THREADS_ENV = "KVDAMP_THREADS"


# --------------------------------------------------------------------------
# configs
# --------------------------------------------------------------------------


@dataclass
class BesselZerosConfig:
    """Diagonal Bessel zeros lambda_{alpha n, n}."""

    alpha: int = 8
    n_max: int = 20
    out: str = "zeros.csv"


@dataclass
class DnMapConfig:
    """Annulus DN values against the half-space symbol."""

    hbar: float = 0.1
    m_max: int = 40
    outer_radius: float = 2.0
    per_layer: float = 32.0
    out: str = "dn.csv"


@dataclass
class QuasimodeConfig:
    """Corrected quasi-mode sweep along m = alpha n."""

    alpha: int = 8
    n: str = "4:40"
    outer_radius: float = 2.0
    cutoff_width: float = 0.3
    ppw: float = 32.0
    out: str = "qm.csv"
    summary: str = ""


@dataclass
class ResolventScanConfig:
    """Per-mode resolvent norms on a lambda grid."""

    lam: str = "40:820:2"
    alpha: int = 8
    modes: str = "branch"
    outer_radius: float = 2.0
    nodes: int = 0
    node_factor: float = 1.0
    node_floor: int = 8000
    method: str = "auto"
    out: str = "resolvent.csv"
    summary: str = ""


@dataclass
class SpectrumConfig:
    """Eigenvalues of one mode near a shift."""

    m: int = 64
    shift_real: float = 0.0
    shift_imag: float = 77.5
    count: int = 8
    nodes: int = 0
    outer_radius: float = 2.0
    damping: float = 1.0
    out: str = "spec.json"


@dataclass
class EvolveConfig:
    """Time evolution of one state."""

    mode: str = "qm"
    alpha: int = 8
    n: int = 8
    m: int = 2
    seed: int = 7
    T: float = 100.0
    dt: str = "auto"
    nodes: int = 0
    record_every: int = 10
    outer_radius: float = 2.0
    out: str = "evolve.csv"


@dataclass
class DecayConfig:
    """Decay profile of the smooth sample family."""

    T: float = 200.0
    seed: int = 7
    dt: float = 0.02
    nodes: int = 2000
    record_every: int = 10
    outer_radius: float = 2.0
    out: str = "decay.csv"
    summary: str = ""


@dataclass
class RaysConfig:
    """Billiard rays and geometric control times."""

    grid: int = 64
    r0_outer: float = 2.0
    out: str = "rays.csv"


@dataclass
class ReportConfig:
    """Evaluate every acceptance check."""

    full: bool = False
    criteria: str = ""
    out: str = "report.json"


COMMANDS = {
    "bessel-zeros": BesselZerosConfig,
    "dn-map": DnMapConfig,
    "quasimode": QuasimodeConfig,
    "resolvent-scan": ResolventScanConfig,
    "spectrum": SpectrumConfig,
    "evolve": EvolveConfig,
    "decay": DecayConfig,
    "rays": RaysConfig,
    "report": ReportConfig,
}

# CSV column sets per command (documented and tested)
COLUMNS = {
    "bessel-zeros": ["m", "n", "lambda", "residual", "ratio"],
    "dn-map": ["m", "hbar", "nu_re", "nu_im", "symbol_re", "symbol_im", "gap"],
    "quasimode": ["n", "m", "lambda", "norm_U", "norm_F", "ratio", "g2_norm", "g2_scaled", "correction_h1", "grad_v1", "l2_v1", "grad_u1", "l2_u1", "trace_u1_h12", "dirichlet_mismatch", "neumann_mismatch"],
    "resolvent-scan": ["lambda", "m", "nodes", "norm", "norm_over_lambda"],
    "evolve": ["t", "energy", "dissipated", "drift"],
    "decay": ["t", "profile", "weighted"],
    "rays": ["x", "y", "dx", "dy", "time", "first_hit_r0", "classification"],
}

# flag spellings that differ from the config key
FLAG_NAMES = {("resolvent-scan", "lam"): "--lambda"}


def parse_range(text: str, integer: bool = True):
    """'a:b' or 'a:b:step' (inclusive), or a comma-separated list."""
    conv = int if integer else float
    text = str(text).strip()
    if "," in text:
        return [conv(x) for x in text.split(",") if x.strip()]
    parts = text.split(":")
    if len(parts) == 1:
        return [conv(parts[0])]
    if len(parts) not in (2, 3):
        raise ValueError(f"bad range {text!r}")
    a, b = conv(parts[0]), conv(parts[1])
    step = conv(parts[2]) if len(parts) == 3 else conv(1)
    if step <= 0 or b < a:
        raise ValueError(f"bad range {text!r}")
    k = int(np.floor((b - a) / step + 1e-9))
    vals = [a + i * step for i in range(k + 1)]
    return [conv(v) for v in vals] if integer else [float(np.round(v, 12)) for v in vals]


def _executor():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be >= 1")
    return ThreadPoolExecutor(max_workers=n) if n > 1 else None


def _pmap(fn, items):
    ex = _executor()
    if ex is None:
        return [fn(x) for x in items]
    with ex:
        return list(ex.map(fn, items))


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def write_json(path, obj):
    from .acceptance import _jsonable

    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _summary_path(cfg):
    return cfg.summary or os.path.splitext(cfg.out)[0] + ".json"


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def run_bessel_zeros(cfg: BesselZerosConfig):
    from .bessel import diagonal_zero

    rows = []
    for n in range(1, cfg.n_max + 1):
        z = diagonal_zero(cfg.alpha, n)
        rows.append({"m": z.m, "n": n, "lambda": z.value, "residual": z.residual, "ratio": z.m / z.value})
    write_csv(cfg.out, COLUMNS["bessel-zeros"], rows)
    return {"rows": len(rows), "out": cfg.out}


def run_dn_map(cfg: DnMapConfig):
    from .elliptic import dn_map_mode, dn_symbol, elliptic_grid
    from .model import DomainSpec

    spec = DomainSpec(outer_radius=cfg.outer_radius)

    def one(m):
        nu = dn_map_mode(elliptic_grid(spec, m, cfg.hbar, cfg.per_layer), m, cfg.hbar)
        s = dn_symbol(m, cfg.hbar)
        return {"m": m, "hbar": cfg.hbar, "nu_re": nu.real, "nu_im": nu.imag, "symbol_re": s.real, "symbol_im": s.imag, "gap": abs(nu - s)}

    rows = _pmap(one, range(cfg.m_max + 1))
    write_csv(cfg.out, COLUMNS["dn-map"], rows)
    return {"rows": len(rows), "out": cfg.out, "max_gap_over_hbar": max(r["gap"] for r in rows) / cfg.hbar}


def run_quasimode(cfg: QuasimodeConfig):
    from .model import DomainSpec
    from .quasimode import build_corrected, quasimode_grid, sweep_summary

    spec = DomainSpec(outer_radius=cfg.outer_radius)
    ns = parse_range(cfg.n)
    modes = _pmap(lambda n: build_corrected(cfg.alpha, n, quasimode_grid(spec, cfg.alpha, n, ppw=cfg.ppw), cfg.cutoff_width), ns)
    rows = []
    for q in modes:
        r = q.report
        rows.append({c: r[c] if c != "lambda" else q.lam for c in COLUMNS["quasimode"]})
    write_csv(cfg.out, COLUMNS["quasimode"], rows)
    summ = sweep_summary(modes) if len(modes) >= 3 else {"n": ns}
    write_json(_summary_path(cfg), summ)
    out = {"rows": len(rows), "out": cfg.out, "summary": _summary_path(cfg)}
    if "fits" in summ:
        out["residual_slope"] = summ["fits"]["norm_F_vs_lambda"]["slope"]
    return out


def _branch_modes(lam, alpha):
    """m = alpha n for the diagonal zero nearest to lam, and its neighbours."""
    from .bessel import diagonal_zero

    n = 1
    while diagonal_zero(alpha, n).value < lam:
        n += 1
    if n > 1 and lam - diagonal_zero(alpha, n - 1).value < diagonal_zero(alpha, n).value - lam:
        n -= 1
    return [alpha * k for k in (n - 1, n, n + 1) if k >= 1]


def run_resolvent_scan(cfg: ResolventScanConfig):
    from .bessel import diagonal_zero
    from .fitting import loglog_fit
    from .model import DomainSpec, assemble_mode_operators, build_grid
    from .pencil import nodes_for, resolvent_norm

    spec = DomainSpec(outer_radius=cfg.outer_radius)
    lams = parse_range(cfg.lam, integer=False)
    tasks = []
    for lam in lams:
        if cfg.modes == "branch":
            ms = _branch_modes(lam, cfg.alpha)
        elif cfg.modes == "all":
            ms = list(range(0, int(np.ceil(2 * abs(lam))) + 1))
        else:
            ms = parse_range(cfg.modes)
        for m in ms:
            tasks.append((lam, m))

    def one(task):
        lam, m = task
        N = cfg.nodes or nodes_for(lam, cfg.node_floor, cfg.node_factor)
        try:
            val = resolvent_norm(lam, assemble_mode_operators(build_grid(spec, N), m), cfg.method)
        except (ValueError, RuntimeError, np.linalg.LinAlgError):
            val = float("nan")
        return {"lambda": lam, "m": m, "nodes": N, "norm": val, "norm_over_lambda": val / lam}

    rows = _pmap(one, tasks)
    write_csv(cfg.out, COLUMNS["resolvent-scan"], rows)
    env = {}
    for r in rows:
        env[r["lambda"]] = np.nanmax([env.get(r["lambda"], np.nan), r["norm"]])
    lam_arr = np.array(sorted(env))
    norm_arr = np.array([env[x] for x in lam_arr])
    summ = {"lambda": lam_arr, "envelope": norm_arr, "n_points": len(rows), "n_failed": int(sum(np.isnan(r["norm"]) for r in rows))}
    ok = np.isfinite(norm_arr)
    if ok.sum() >= 3:
        summ["envelope_fit"] = loglog_fit(lam_arr[ok], norm_arr[ok]).as_dict()
    write_json(_summary_path(cfg), summ)
    return {"rows": len(rows), "out": cfg.out, "summary": _summary_path(cfg)}


def run_spectrum(cfg: SpectrumConfig):
    from .model import DomainSpec, build_grid
    from .pencil import nodes_for, spectrum_mode

    spec = DomainSpec(outer_radius=cfg.outer_radius, damping_value=cfg.damping)
    shift = complex(cfg.shift_real, cfg.shift_imag)
    N = cfg.nodes or nodes_for(max(abs(shift), 1.0))
    res = spectrum_mode(cfg.m, build_grid(spec, N), shift, cfg.count)
    out = {
        "m": res.m,
        "shift": [shift.real, shift.imag],
        "nodes": N,
        "eigenvalues": [[float(z.real), float(z.imag)] for z in res.eigenvalues],
        "residuals": res.residuals,
        "backward_errors": res.backward_errors,
        "converged": res.converged,
        "max_real": res.max_real,
    }
    write_json(cfg.out, out)
    return {"out": cfg.out, "max_real": res.max_real}


def run_evolve(cfg: EvolveConfig):
    from .bessel import diagonal_zero
    from .model import DomainSpec, assemble_mode_operators, build_grid
    from .pencil import nodes_for
    from .quasimode import build_corrected
    from .semigroup import evolve, smooth_samples

    spec = DomainSpec(outer_radius=cfg.outer_radius)
    if cfg.mode == "qm":
        z = diagonal_zero(cfg.alpha, cfg.n)
        N = cfg.nodes or nodes_for(z.value)
        grid = build_grid(spec, N)
        Q = build_corrected(cfg.alpha, cfg.n, grid)
        U0, ops, lam = Q.state(), assemble_mode_operators(grid, Q.m), Q.lam
        dt = 0.1 / lam if cfg.dt == "auto" else float(cfg.dt)
        tr = evolve(U0, ops, cfg.T, dt, cfg.record_every, reference=U0, reference_rate=lam)
    elif cfg.mode == "smooth":
        grid = build_grid(spec, cfg.nodes or 2000)
        U0, ops = smooth_samples(grid, modes=(cfg.m,), per_mode=1, seed=cfg.seed)[0]
        dt = 0.02 if cfg.dt == "auto" else float(cfg.dt)
        tr = evolve(U0, ops, cfg.T, dt, cfg.record_every)
    else:
        raise ValueError(f"mode must be 'qm' or 'smooth', got {cfg.mode!r}")
    drift = tr.drift if tr.drift is not None else np.full(tr.times.size, np.nan)
    rows = [{"t": t, "energy": e, "dissipated": d, "drift": r} for t, e, d, r in zip(tr.times, tr.energy, tr.dissipated, drift)]
    write_csv(cfg.out, COLUMNS["evolve"], rows)
    return {"out": cfg.out, "steps": tr.steps, "dt": dt, "dissipation_defect": tr.dissipation_defect()}


def run_decay(cfg: DecayConfig):
    from .model import DomainSpec, build_grid
    from .semigroup import decay_profile, smooth_samples

    grid = build_grid(DomainSpec(outer_radius=cfg.outer_radius), cfg.nodes)
    d = decay_profile(smooth_samples(grid, seed=cfg.seed), cfg.T, cfg.dt, cfg.record_every)
    rows = [{"t": t, "profile": p, "weighted": w} for t, p, w in zip(d["times"], d["profile"], d["weighted"])]
    write_csv(cfg.out, COLUMNS["decay"], rows)
    summ = {"max_weighted": d["max_weighted"], "dissipation_defect": d["dissipation_defect"], "T": cfg.T, "seed": cfg.seed}
    write_json(_summary_path(cfg), summ)
    return {"out": cfg.out, "summary": _summary_path(cfg), "max_weighted": d["max_weighted"]}


def run_rays(cfg: RaysConfig):
    from .rays import classify_hit, first_interface_hit, gcc_time, phase_space_samples

    g = gcc_time(cfg.grid, cfg.r0_outer)
    X, Y, DX, DY = phase_space_samples(cfg.grid, cfg.r0_outer)
    rows = []
    for i in range(X.size):
        if np.hypot(X[i], Y[i]) < 1.0:
            t, hx, hy = first_interface_hit(X[i], Y[i], DX[i], DY[i])
            hit = classify_hit(hx, hy, DX[i], DY[i], t)
            r0, kind = hit.r0, hit.kind
        else:
            r0, kind = float("nan"), "damped-start"
        rows.append({"x": X[i], "y": Y[i], "dx": DX[i], "dy": DY[i], "time": g["times"][i], "first_hit_r0": r0, "classification": kind})
    write_csv(cfg.out, COLUMNS["rays"], rows)
    return {"out": cfg.out, "max_time": g["max_time"], "bound": g["bound"], "flagged": len(g["flagged"])}


def run_report(cfg: ReportConfig):
    from .acceptance import CRITERIA, evaluate

    only = parse_range(cfg.criteria) if cfg.criteria else sorted(CRITERIA)
    results = [evaluate(k, cfg.full) for k in only]
    doc = {
        "full": cfg.full,
        "all_passed": all(r.passed for r in results),
        "criteria": {f"criterion_{r.number:02d}": r.as_dict() for r in results},
    }
    # wall-clock timings would break byte-identical output
    for v in doc["criteria"].values():
        v.pop("seconds", None)
    write_json(cfg.out, doc)
    for r in results:
        print(r.line())
    return {"out": cfg.out, "passed": sum(r.passed for r in results), "total": len(results)}


RUNNERS = {
    "bessel-zeros": run_bessel_zeros,
    "dn-map": run_dn_map,
    "quasimode": run_quasimode,
    "resolvent-scan": run_resolvent_scan,
    "spectrum": run_spectrum,
    "evolve": run_evolve,
    "decay": run_decay,
    "rays": run_rays,
    "report": run_report,
}


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------


def _flag(cmd, name):
    return FLAG_NAMES.get((cmd, name), "--" + name.replace("_", "-"))


def build_parser():
    p = argparse.ArgumentParser(prog="kvdamp", description="Kelvin-Voigt damped wave experiments in a disc-in-disc geometry.")
    sub = p.add_subparsers(dest="command", required=True)
    for cmd, cls in COMMANDS.items():
        sp = sub.add_parser(cmd, help=(cls.__doc__ or cmd).strip())
        sp.add_argument("--config", help="JSON file with a flat config record")
        sp.add_argument("--print-config", action="store_true", help="print the effective config and exit")
        for f in fields(cls):
            flag = _flag(cmd, f.name)
            if f.type is bool or isinstance(f.default, bool):
                sp.add_argument(flag, dest=f.name, action="store_true", default=None)
            else:
                typ = {int: int, float: float}.get(type(f.default), str)
                sp.add_argument(flag, dest=f.name, type=typ, default=None)
    return p


def load_config(cmd, path=None, overrides=None):
    """Defaults, then the JSON file, then explicit overrides."""
    cls = COMMANDS[cmd]
    values = asdict(cls())
    if path:
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(values))
        if unknown:
            raise ValueError(f"unknown config keys for {cmd}: {unknown}")
        for f in fields(cls):
            if f.name in data:
                values[f.name] = _coerce(f, data[f.name])
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    return cls(**values)


def _coerce(f, value):
    default = f.default
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ValueError(f"{f.name} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not float(value).is_integer():
            raise ValueError(f"{f.name} must be an integer")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool):
            raise ValueError(f"{f.name} must be a number")
        return float(value)
    return str(value)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    cmd = args.command
    try:
        overrides = {f.name: getattr(args, f.name) for f in fields(COMMANDS[cmd])}
        cfg = load_config(cmd, args.config, overrides)
        if args.print_config:
            print(json.dumps(asdict(cfg), indent=2, sort_keys=True))
            return 0
        info = RUNNERS[cmd](cfg)
        print(json.dumps({"command": cmd, "status": "ok", **_clean(info)}, sort_keys=True))
        return 0
    except Exception as exc:  # every failure becomes machine-readable
        err = {"command": cmd, "status": "error", "error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 1


def _clean(d):
    from .acceptance import _jsonable

    return _jsonable(d)


if __name__ == "__main__":
    sys.exit(main())
