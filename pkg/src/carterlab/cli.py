"""Command-line runner for the Carter-family checks.

``carterlab <subcommand> [--config FILE] [--set key.path=value ...]`` runs one
of the subcommands cert, slab-spectrum, slab-evolve, modes, kn-check or
horizon-extremal.  Outputs go to ``<output.path>.csv`` / ``.json`` with the
resolved config at ``<output.path>.config.json``.  Exit codes: 0 all checks
pass, 1 a mathematical check failed, 2 invalid input, 3 solver failure.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .config import SCHEMA_VERSION, apply_override, parse_scan, resolve
from .errors import CheckFailure, InputError, SolverError
from .metric import CarterParams, SlabSpec, build_coefficients

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# output helpers


def atomic_write(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def json_text(payload: dict) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


class Result:
    """What a subcommand hands back to the dispatcher."""

    def __init__(self, passed: bool, summary: dict, header=None, rows=None, verdict: str = "", plot=None):
        self.passed = passed
        self.summary = summary
        self.header = header
        self.rows = rows
        self.verdict = verdict
        self.plot = plot  # callable(stem) writing figures, used with --plot


# ---------------------------------------------------------------------------
# subcommands


def _carter_params(cfg) -> CarterParams:
    return CarterParams(**cfg["params"])


def _slab_spec(cfg) -> SlabSpec:
    return SlabSpec(**cfg["slab"])


def run_cert(cfg) -> Result:
    from .curvature import flip_gtphi_term, spot_check_random, verify_certificates

    opts = cfg["cert"]
    mutation = flip_gtphi_term if opts["fault"] else None
    header = rows = None
    if opts["mode"] == "spot":
        ok = spot_check_random(opts["points"], seed=cfg["numerics"]["seed"], mutation=mutation)
        summary = {"mode": "spot", "points": opts["points"], "seed": cfg["numerics"]["seed"],
                   "fault_injected": opts["fault"], "passed": ok}
    else:
        report = verify_certificates(mutation=mutation, raise_on_failure=False)
        summary = report.to_dict()
        summary.pop("elapsed_seconds", None)  # keep outputs byte-reproducible
        summary.update({"mode": "full", "fault_injected": opts["fault"]})
        ok = report.passed
        header = ("component", "zero", "terms_before_cancel")
        rows = [(n, z, c) for n, z, c in report.defect_components]
        rows += [("scalar", report.scalar_ok, ""), ("inverse", report.inverse_ok, "")]
    return Result(ok, summary, header, rows, verdict="certificate " + ("PASS" if ok else "FAIL"))


def run_slab_spectrum(cfg) -> Result:
    from .slab_spectral import (assemble_operators, build_slab, flat_slab, pencil_mode_scan,
                                solve_spectrum)

    num, sp = cfg["numerics"], cfg["spectrum"]
    n = num["resolution"]
    if sp["flat"]:
        slab = flat_slab(n)
        coarse = lambda m: flat_slab(sp["pencil_resolution"], m=m)
    else:
        c = build_coefficients(_carter_params(cfg))
        spec = _slab_spec(cfg)
        slab = build_slab(c, spec, n)
        coarse = lambda m: build_slab(c, spec, sp["pencil_resolution"], m=m)
    ops = assemble_operators(slab)
    spec_ = solve_spectrum(ops, num["count"], tol=num["tol"])
    lam = spec_.eigenvalues
    lam1 = spec_.lambda1
    psi0 = spec_.vectors[:, 0]
    cov = float(np.std(psi0) / abs(np.mean(psi0)))
    kernel_ok = abs(lam[0]) < 1e-10 * lam1 and cov < 1e-10
    pencil = {}
    pencil_ok = True
    for m in sp["pencil_modes"]:
        rep = pencil_mode_scan(assemble_operators(coarse(int(m))))
        entry = {"max_imag_over_radius": rep.relative_max_imag, "spectral_radius": rep.spectral_radius}
        ok = rep.relative_max_imag < 1e-8
        if rep.m == 0:
            entry.update({"dim_ker": rep.kernel_dim, "dim_ker2": rep.kernel2_dim,
                          "chain_residual": rep.chain_residual})
            ok = ok and rep.kernel_dim == 1 and rep.kernel2_dim == 2
        pencil[str(int(m))] = entry
        pencil_ok = pencil_ok and ok
    summary = {
        "lambda_1": lam1, "C_P": 1.0 / lam1, "lambda_0": float(lam[0]),
        "lambda0_over_lambda1": float(abs(lam[0]) / lam1), "kernel_vector_cov": cov,
        "kernel_ok": kernel_ok, "pencil": pencil, "pencil_ok": pencil_ok,
        "resolution": n, "flat": sp["flat"], "max_residual": float(np.max(spec_.residuals)),
    }
    rows = [(i, float(lam[i]), float(spec_.residuals[i])) for i in range(len(lam))]
    ok = kernel_ok and pencil_ok
    verdict = (f"lambda_1 = {lam1:.12g}; kernel {'ok' if kernel_ok else 'FAIL'}; "
               f"pencil {'ok' if pencil_ok else 'FAIL'}")
    return Result(ok, summary, ("index", "eigenvalue", "residual"), rows, verdict,
                  plot=lambda stem: _plot_spectrum(stem, lam))


def run_slab_evolve(cfg) -> Result:
    from .slab_evolution import run_boundedness_experiment
    from .slab_spectral import assemble_operators, build_slab, lowest_eigenpairs, solve_spectrum

    num, ev = cfg["numerics"], cfg["evolve"]
    c = build_coefficients(_carter_params(cfg))
    slab = build_slab(c, _slab_spec(cfg), num["resolution"], m=ev["m"])
    ops = assemble_operators(slab)
    n = ops.n
    rng = np.random.default_rng(num["seed"])
    kind = ev["data"]
    if kind == "threshold":
        if ops.m != 0:
            raise InputError("threshold data (1, 1) needs m = 0")
        data = (np.ones(n), np.ones(n))
    elif kind == "eigenmode":
        if ops.m == 0:
            psi = solve_spectrum(ops, 2).vectors[:, 1]
        else:
            psi = lowest_eigenpairs(ops, 1).vectors[:, 0]
        data = (psi, np.zeros(n))
    else:
        u0 = rng.standard_normal(n)
        u1 = rng.standard_normal(n)
        if ops.m == 0:
            u0 -= np.dot(ops.mass, u0) / np.sum(ops.mass)
            u1 -= np.dot(ops.mass, u1) / np.sum(ops.mass)
        data = (u0, u1)
    ts = run_boundedness_experiment(ops, data, num["T"], dt=num["dt"], record_every=num["record_every"])
    drift_ok = ts.energy_drift < ev["drift_tol"]
    scale = max(1.0, float(np.max(np.abs(ts.mean_u))), float(np.max(ts.norm_u)))
    affine_ok = ops.m != 0 or ts.affine_defect < 1e-10 * scale
    checks = {"energy_drift": drift_ok, "affine_law": affine_ok}
    if kind == "random":
        checks["bound"] = ts.bound_ok
    if kind == "eigenmode":
        checks["non_decay"] = ts.late_energy_ratio >= 0.99
    if kind == "threshold":
        checks["v_zero"] = bool(np.max(ts.norm_v) < 1e-8 * max(1.0, float(np.max(ts.norm_u))))
    summary = {
        "energy_drift": ts.energy_drift, "affine_defect": ts.affine_defect,
        "sup_ratio_standard": ts.sup_ratio_standard, "sup_ratio_weighted": ts.sup_ratio_weighted,
        "C_stab": ts.C_stab, "weighted_bound": ts.weighted_bound,
        "late_energy_ratio": ts.late_energy_ratio, "steps": len(ts.t) - 1, "data": kind, "m": ops.m,
        "checks": checks,
    }
    ok = all(checks.values())
    rows = list(ts.rows())
    return Result(ok, summary, ("t", "E", "Re_Pi0_u", "Re_Pi0_ut", "norm_v", "norm_vt"), rows,
                  f"drift {ts.energy_drift:.3e}; sup ratio {ts.sup_ratio_standard:.4g} vs C_stab {ts.C_stab:.4g}",
                  plot=lambda stem: _plot_series(stem, ts.t, {"E": ts.E, "norm_v": ts.norm_v,
                                                              "norm_vt": ts.norm_vt}, "t"))


def run_modes(cfg) -> Result:
    from .modes import (ModeParams, angular_eigenvalues, frobenius_data, integrate_radial,
                        zero_frequency_classify)

    mo, num = cfg["modes"], cfg["numerics"]
    task = mo["task"]
    if task == "zero-frequency":
        rows = []
        ok = True
        for ell in mo["ells"]:
            rep = zero_frequency_classify(mo["family"], cfg["M"], cfg["a"], cfg["Q"], int(ell))
            rows.append((rep.family, rep.ell, rep.regular_branch, rep.singular_branch, rep.infinity_behavior,
                         rep.admissible_state))
            ok = ok and not rep.admissible_state
        summary = {"task": task, "family": mo["family"], "admissible_states": not ok}
        return Result(ok, summary, ("family", "ell", "regular_branch", "singular_branch", "infinity", "admissible"),
                      rows, "no admissible zero-frequency state" if ok else "admissible state found")
    c = build_coefficients(_carter_params(cfg))
    if mo["scan"] is not None:
        sc = mo["scan"] if isinstance(mo["scan"], dict) else parse_scan(str(mo["scan"]))
        omegas = np.linspace(sc["start"], sc["stop"], int(sc["num"]))
    else:
        omegas = np.array([mo["Omega"]])
    if task == "angular":
        rows = []
        for om in omegas:
            lams = angular_eigenvalues(c, float(om), mo["m"], mo["interval"], mo["bc"], num["count"], num["tol"])
            rows += [(float(om), mo["m"], j, lam) for j, lam in enumerate(lams)]
        summary = {"task": task, "count": num["count"], "n_omega": len(omegas)}
        return Result(True, summary, ("Omega", "m", "j", "lambda"), rows, f"{len(rows)} angular eigenvalues",
                      plot=lambda stem: _plot_scan(stem, rows))
    if task == "radial":
        rows = []
        worst = 0.0
        for om in omegas:
            tr = integrate_radial(ModeParams(float(om), mo["m"], mo["lam"], c), mo["r_span"], 1.0, 0.5j,
                                  tol=num["tol"])
            worst = max(worst, tr.W_drift)
            rows.append((float(om), mo["m"], tr.W_drift, float(abs(tr.W[0]))))
        ok = worst < 1e-9
        return Result(ok, {"task": task, "max_wronskian_drift": worst}, ("Omega", "m", "W_drift", "abs_W"), rows,
                      f"max Wronskian drift {worst:.3e}")
    # frobenius at the outer horizon of the radial polynomial
    p = c.params
    roots = np.roots([p.alpha4, 0.0, p.alpha2, p.alpha1, p.alpha0])
    real = sorted(float(z.real) for z in roots if abs(z.imag) < 1e-12)
    if not real:
        raise InputError("Delta_r has no real root")
    r_h = real[-1]
    rows = []
    for om in omegas:
        fd = frobenius_data(c, r_h, float(om), mo["m"], num["order"], "radial", mo["lam"])
        rows.append((float(om), mo["m"], r_h, fd.kappa, fd.exponents[0].imag, fd.log_branch))
    return Result(True, {"task": task, "r_h": r_h}, ("Omega", "m", "r_h", "kappa", "sigma_h", "log_branch"),
                  rows, f"Frobenius data at r_h = {r_h:.12g}")


def run_kn_check(cfg) -> Result:
    from .kn import horizon_constants, nontrapping_margin, wall_jordan_obstruction

    kn = cfg["kn"]
    points = [(cfg["M"], cfg["a"], cfg["Q"])]
    if kn["sweep"] is not None:
        sw = kn["sweep"]
        points = [(cfg["M"], float(a), float(q)) for a in sw.get("a", [cfg["a"]]) for q in sw.get("Q", [cfg["Q"]])]
    bundles, rows = [], []
    ok = True
    for M, a, Q in points:
        hc = horizon_constants(M, a, Q)
        mr = nontrapping_margin(M, a, Q, kn["R_w"], strict_range=kn["strict_range"])
        ob = wall_jordan_obstruction(M, a, Q, kn["R_w"], strict_range=kn["strict_range"])
        point_ok = mr.identity_zero and mr.derivative_sign_agrees and ob.nonzero and ob.relative_gap < 1e-10
        ok = ok and point_ok
        bundles.append({"horizon": hc.to_dict(), "nontrapping": mr.to_dict(),
                        "obstruction": {k: v for k, v in ob.to_dict().items() if k != "samples"}, "ok": point_ok})
        rows.append((M, a, Q, kn["R_w"], mr.margin, mr.verdict, ob.numeric, ob.closed_form, ob.relative_gap))
    summary = bundles[0] if len(bundles) == 1 else {"points": bundles}
    return Result(ok, summary, ("M", "a", "Q", "R_w", "margin", "verdict", "obstruction", "closed_form", "rel_gap"),
                  rows, f"{rows[0][5]}; obstruction {rows[0][6]:.12g}")


def _horizon_data(cfg, M):
    h = cfg["horizon"]
    amp, sup = h["amplitude"], h["support"]
    if h["data"] == "constant":
        return lambda r, mu: amp + 0 * r
    if h["data"] == "step":
        # smooth step from amp at r <= M + sup/2 to 0 at r >= M + sup
        def f(r, mu):
            t = np.clip((r - M - 0.5 * sup) / (0.5 * sup), 0.0, 1.0)
            return amp * (1 - t**3 * (10 - 15 * t + 6 * t * t)) + 0 * mu
        return f
    return lambda r, mu: amp * np.where(r < M + sup, (M + sup - r) ** 3, 0.0) * (1 + 0.3 * mu**2)


def run_horizon(cfg) -> Result:
    from .horizon import (evolve_extremal_kn, evolve_extremal_rn, extremal_charge, make_state,
                          obstruction_verdict)

    h = cfg["horizon"]
    M, a, Q = cfg["M"], cfg["a"], cfg["Q"]
    u0 = _horizon_data(cfg, M)
    evolve = evolve_extremal_rn if a == 0 else evolve_extremal_kn

    def run(n_r):
        st = make_state(M, a, Q, u0, n_r=n_r, n_theta=h["n_theta"], collar=h["collar"] * M)
        horizon = st.window if math.isfinite(st.window) else 10.0 * M
        dv = h["dv"] if h["dv"] is not None else 0.999 * horizon / h["n_steps"]
        return st, evolve(st, dv, h["n_steps"])

    st, (final, series) = run(h["n_r"])
    summary = {"charge_axisymmetric": extremal_charge(st), "charge_sphere": extremal_charge(st, "sphere"),
               "drift": series.drift, "window": st.window if math.isfinite(st.window) else "inf",
               "scheme": "rn-characteristic" if a == 0 else "kn-experimental"}
    ok = True
    if h["refine"] and h["data"] != "constant":
        _, (_, s2) = run(2 * h["n_r"])
        order = math.log2(series.drift / s2.drift) if s2.drift > 0 and series.drift > 0 else float("inf")
        summary["drift_refined"] = s2.drift
        summary["order_estimate"] = order
        # measured-order floors: 2 for the RN characteristic scheme, 1 for the experimental KN scheme
        order_min = h["order_min"] if h["order_min"] is not None else (2.0 if a == 0 else 1.0)
        summary["order_min"] = order_min
        ok = order >= order_min
    if h["data"] == "constant":
        ok = series.drift <= 1e-9 * max(1.0, abs(summary["charge_axisymmetric"]))
    verdict = obstruction_verdict(series, M, a)
    summary["obstruction"] = dict(verdict.__dict__)
    rows = list(series.rows())
    return Result(ok, summary, ("v", "charge", "mean_dr_u", "mean_u", "mean_p"), rows,
                  f"charge drift {series.drift:.3e}; obstruction flag {verdict.flag}",
                  plot=lambda stem: _plot_series(stem, series.v, {"charge": series.charge,
                                                                  "mean_dr_u": series.mean_dr_u,
                                                                  "mean_u": series.mean_u}, "v"))


COMMANDS: dict[str, Callable] = {
    "cert": run_cert,
    "slab-spectrum": run_slab_spectrum,
    "slab-evolve": run_slab_evolve,
    "modes": run_modes,
    "kn-check": run_kn_check,
    "horizon-extremal": run_horizon,
}


# ---------------------------------------------------------------------------
# plotting (optional)


def _plot_series(stem, x, series: dict, xlabel: str):
    from .plotting import plot_series

    plot_series(f"{stem}.png", x, series, xlabel)


def _plot_spectrum(stem, lam):
    from .plotting import plot_spectrum

    plot_spectrum(f"{stem}.png", lam)


def _plot_scan(stem, rows):
    from .plotting import plot_scan

    plot_scan(f"{stem}.png", rows)


# ---------------------------------------------------------------------------
# dispatch


def _thread_limit():
    n = os.environ.get("CARTERLAB_THREADS")
    if not n:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover - optional
        return contextlib.nullcontext()
    return threadpool_limits(limits=max(1, int(n)))


def run(cfg: dict, plot: bool = False, stream=None) -> int:
    """Dispatch a resolved config; write outputs; return the exit code."""
    stream = sys.stdout if stream is None else stream
    cmd = cfg["command"]
    stem = Path(cfg["output"]["path"])
    try:
        with _thread_limit():
            result = COMMANDS[cmd](cfg)
    except CheckFailure as exc:
        print(f"{cmd}: FAIL {exc}", file=stream)
        return EXIT_CHECK
    except InputError as exc:
        print(f"{cmd}: invalid input: {exc}", file=stream)
        return EXIT_INPUT
    except SolverError as exc:
        print(f"{cmd}: solver failure: {exc}", file=stream)
        return EXIT_SOLVER
    except (ValueError, TypeError) as exc:
        print(f"{cmd}: invalid input: {exc}", file=stream)
        return EXIT_INPUT
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"{cmd}: solver failure: {exc}", file=stream)
        return EXIT_SOLVER
    summary = {"schema_version": SCHEMA_VERSION, "command": cmd, "passed": bool(result.passed),
               "version": __version__, "result": result.summary}
    atomic_write(stem.with_name(stem.name + ".config.json"), json_text({"schema_version": SCHEMA_VERSION,
                                                                         "config": cfg}))
    atomic_write(stem.with_name(stem.name + ".json"), json_text(summary))
    if cfg["output"]["format"] == "csv" and result.header is not None:
        atomic_write(stem.with_name(stem.name + ".csv"), csv_text(result.header, result.rows))
    if plot and result.plot is not None:
        result.plot(str(stem))
    print(f"{cmd}: {'PASS' if result.passed else 'FAIL'} {result.verdict}", file=stream)
    return EXIT_OK if result.passed else EXIT_CHECK


_HELP = {
    "cert": "exact curvature certificates (full symbolic or seeded spot check)",
    "slab-spectrum": "Neumann spectrum, kernel and pencil scan on a strict slab",
    "slab-evolve": "implicit-midpoint evolution: energy, affine law, boundedness",
    "modes": "separated radial/angular modes, Frobenius data, zero frequency",
    "kn-check": "Kerr-Newman wall: nontrapping margin and Jordan obstruction",
    "horizon-extremal": "extremal horizon charge, drift order and non-decay flag",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="carterlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"carterlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, help=_HELP[name])
        s.add_argument("--config", "-c", help="YAML config file")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key, e.g. numerics.resolution=64")
        s.add_argument("--out", help="output path stem (overrides output.path)")
        s.add_argument("--format", choices=("csv", "json"), help="output format")
        s.add_argument("--plot", action="store_true", help="also write a PNG next to the outputs")
        if name == "modes":
            s.add_argument("--scan", metavar="START:STOP:NUM", help="grid over Omega")
    r = sub.add_parser("run", help="run the command named inside a config file")
    r.add_argument("config")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--plot", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    import yaml

    from .errors import SchemaError

    args = build_parser().parse_args(argv)
    try:
        data: dict = {}
        path = getattr(args, "config", None)
        if path:
            text = Path(path).read_text(encoding="utf-8")
            data = yaml.safe_load(text) or {}
            if not isinstance(data, dict):
                raise SchemaError("", "top level must be a mapping")
        if args.command != "run":
            if "command" in data and data["command"] != args.command:
                raise SchemaError("command", f"config says '{data['command']}' but subcommand is '{args.command}'")
            data["command"] = args.command
        for assignment in args.set:
            apply_override(data, assignment)
        if getattr(args, "out", None):
            data.setdefault("output", {})["path"] = args.out
        if getattr(args, "format", None):
            data.setdefault("output", {})["format"] = args.format
        if getattr(args, "scan", None):
            data.setdefault("modes", {})["scan"] = parse_scan(args.scan)
        cfg = resolve(data)
    except (InputError, OSError, yaml.YAMLError) as exc:
        print(f"carterlab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return run(cfg, plot=args.plot)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
