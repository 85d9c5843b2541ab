"""Command line front end with reproducible, machine-readable output.

Every command writes a manifest JSON (resolved parameters, version, seeds,
tolerances, wall time, sha256 of each output) and each output file names
the manifest that produced it. CSV numbers carry 17 significant digits so
a re-read is exact.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import (NotErgodic, RetrialQError, TruncationLimit,
                     UndefinedRho)
from .genfun import (bivariate_residual, build_system, det_v, det_v_formula,
                     mmoo_moments, ode_residual)
from .model import ModelParams, derive, ergodicity
from .qbd import SolverOptions, solve
from .reduction import okubo_form, resolvent_decomposition, standardize
from .simulator import SimConfig, simulate
from .tail import analytic_singularity, fit_tail

SCHEMA = 1
RESIDUAL_GRID = tuple(0.1 * k for k in range(1, 10))

# exit codes shared by the subcommands
EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INVALID = 2
EXIT_NOT_ERGODIC = 3
EXIT_TRUNCATION = 4

_PARAM_ALIASES = {"lambda": "lam"}
_INT_FIELDS = {"s", "K"}


def _version() -> str:
    from . import __version__
    return __version__


def load_params(path: str) -> ModelParams:
    """Parse a `key = value` parameter file with # comments.

    `lambda` is accepted as an alias for `lam`. Unknown keys are errors.
    """
    kwargs = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = _PARAM_ALIASES.get(key, key)
            if key not in ModelParams.__dataclass_fields__:
                raise ValueError(f"{path}:{lineno}: unknown parameter {key!r}")
            kwargs[key] = int(value) if key in _INT_FIELDS else float(value)
    return ModelParams(**kwargs)


def _fmt(x: float) -> str:
    return "%.17g" % x


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(path: str, command: str, argv: list[str],
                    params: ModelParams | None, seed,
                    tolerances: dict, wall: float, outputs: list[str]) -> None:
    manifest = {
        "schema": SCHEMA,
        "command": command,
        "argv": argv,
        "params": params.asdict() if params is not None else None,
        "version": _version(),
        "seed": seed,
        "tolerances": tolerances,
        "wall_time_s": wall,
        "outputs": {os.path.basename(p): _sha256(p) for p in outputs},
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_dist_csv(path: str, pi: np.ndarray, manifest_name: str,
                    header: str = "i,j,probability",
                    half_width: np.ndarray | None = None) -> None:
    """Write (phase, level) cells in level-major order, skipping exact zeros."""
    with open(path, "w") as fh:
        fh.write(f"# manifest: {manifest_name}\n")
        fh.write(header + "\n")
        rows, cols = pi.shape
        for j in range(rows):
            for i in range(cols):
                v = pi[j, i]
                h = half_width[j, i] if half_width is not None else 0.0
                if v == 0.0 and h == 0.0:
                    continue
                if half_width is None:
                    fh.write(f"{i},{j},{_fmt(v)}\n")
                else:
                    fh.write(f"{i},{j},{_fmt(v)},{_fmt(h)}\n")


def _read_dist_csv(path: str) -> tuple[np.ndarray, np.ndarray | None]:
    """Read a distribution or simulation CSV back into dense arrays."""
    entries = []
    has_hw = False
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line[0].isalpha():
                has_hw = "half_width" in line
                continue
            parts = line.split(",")
            i, j = int(parts[0]), int(parts[1])
            v = float(parts[2])
            h = float(parts[3]) if len(parts) > 3 else 0.0
            entries.append((i, j, v, h))
    if not entries:
        raise ValueError(f"{path}: no data rows")
    imax = max(e[0] for e in entries)
    jmax = max(e[1] for e in entries)
    dense = np.zeros((jmax + 1, imax + 1))
    hw = np.zeros_like(dense)
    for i, j, v, h in entries:
        dense[j, i] = v
        hw[j, i] = h
    return dense, (hw if has_hw else None)


def _seed_from_env(default: int) -> int:
    env = os.environ.get("RETRIALQ_SEED")
    if env is not None:
        return int(env)
    return default


def _solver_options(args) -> SolverOptions:
    kwargs = {}
    if getattr(args, "jmax", None) is not None:
        kwargs["jmax"] = args.jmax
    if getattr(args, "eps", None) is not None:
        kwargs["eps"] = args.eps
        kwargs["tail_eps"] = args.eps
    if getattr(args, "jmin", None) is not None:
        kwargs["jmin"] = args.jmin
    return SolverOptions(**kwargs)


def _summary_payload(dist, params: ModelParams, manifest_name: str) -> dict:
    verdict = ergodicity(params)
    try:
        d = derive(params)
        z_r, xi = d.z_r, d.xi
    except UndefinedRho:
        z_r = xi = None
    return {
        "schema": SCHEMA,
        "manifest": manifest_name,
        "j_max": dist.j_max,
        "captured_mass": dist.captured_mass,
        "marginals": [float(v) for v in dist.phase_marginals()],
        "mean_orbit": dist.mean_orbit(),
        "blocking_probability": dist.blocking_probability(),
        "residuals": {"interior": dist.residual,
                      "boundary": dist.boundary_residual},
        "z_r": z_r,
        "xi": xi,
        "verdict": verdict.verdict,
        "warnings": list(dist.warnings),
    }


def cmd_solve(args, argv) -> int:
    t0 = time.perf_counter()
    try:
        params = load_params(args.paramfile)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    opts = _solver_options(args)
    try:
        dist = solve(params, opts)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NotErgodic as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_ERGODIC
    except TruncationLimit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION

    prefix = args.out or os.path.splitext(os.path.basename(args.paramfile))[0]
    dist_path = prefix + ".dist.csv"
    summary_path = prefix + ".summary.json"
    manifest_path = prefix + ".manifest.json"
    manifest_name = os.path.basename(manifest_path)

    _write_dist_csv(dist_path, dist.pi, manifest_name)
    with open(summary_path, "w") as fh:
        json.dump(_summary_payload(dist, params, manifest_name), fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(manifest_path, "solve", argv, params, None,
                    {"eps": opts.eps, "tail_eps": opts.tail_eps},
                    time.perf_counter() - t0, [dist_path, summary_path])
    print(f"wrote {dist_path}, {summary_path}, {manifest_path}")
    return EXIT_OK


def _check_entry(value: float, tol: float) -> dict:
    return {"status": "pass" if value <= tol else "fail",
            "value": float(value), "tol": tol}


def cmd_check(args, argv) -> int:
    t0 = time.perf_counter()
    try:
        params = load_params(args.paramfile)
        params.require_valid()
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        dist = solve(params)
    except RetrialQError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL

    rng = np.random.default_rng(0)
    zs = rng.uniform(0.05, 1.5, size=20)
    checks: dict[str, dict] = {}

    def det_check(variant: str) -> dict:
        corrupt = args.corrupt and variant in ("full", "simplified")
        system = build_system(params, variant) if corrupt else None
        if corrupt:
            # a subdiagonal bump breaks the triangular structure the
            # factorization relies on, so the check must go red
            system.v0[1, 0] += 1e-3
        worst = 0.0
        for z in zs:
            want = det_v_formula(params, variant, z)
            if corrupt:
                got = complex(np.linalg.det(system.v_at(z).astype(complex)))
                if variant == "full":
                    got /= params.nu ** system.dim
            else:
                got = det_v(params, variant, z)
            scale = max(abs(want), 1e-30)
            worst = max(worst, abs(got - want) / scale)
        return _check_entry(worst, 1e-12)

    checks["det_v_full"] = det_check("full")
    checks["det_v_simplified"] = det_check("simplified")
    if params.ab == 0.0:
        checks["det_v_reduced"] = det_check("reduced")
    else:
        checks["det_v_reduced"] = {"status": "skipped (not persistent)"}

    for variant in ("full", "simplified"):
        worst = max(ode_residual(dist, params, variant=variant, z=z)
                    for z in RESIDUAL_GRID)
        checks[f"ode_{variant}"] = _check_entry(worst, 1e-8)
    if params.ab == 0.0:
        worst = max(ode_residual(dist, params, variant="reduced", z=z)
                    for z in RESIDUAL_GRID)
        checks["ode_reduced"] = _check_entry(worst, 1e-8)
    else:
        checks["ode_reduced"] = {"status": "skipped (not persistent)"}

    okubo_ok = (params.ab == 0.0 and params.tht == 0.0
                and params.pt_a == 0.0 and params.p_a == 1.0)
    if okubo_ok:
        ok = okubo_form(params)
        checks["okubo_power"] = _check_entry(ok.power_identity_residual(), 1e-12)
        want = sorted(v for v, _ in ok.spectrum())
        got = np.sort(np.linalg.eigvals(ok.t).real)
        expanded = sorted(np.repeat([v for v, _ in ok.spectrum()],
                                    [m for _, m in ok.spectrum()]))
        checks["okubo_spectrum"] = _check_entry(
            float(np.max(np.abs(got - np.asarray(expanded)))), 1e-10)
        if params.s >= 3 and params.p > 0:
            std = standardize(ok)
            dec = resolvent_decomposition(std)
            ys = rng.uniform(2.0, 5.0, size=10)
            worst = max(dec.identity_residual(y) for y in ys)
            checks["resolvent"] = _check_entry(worst, 1e-10)
        else:
            checks["resolvent"] = {"status": "skipped (needs s >= 3)"}
    else:
        checks["okubo_power"] = {"status": "skipped (not Okubo form)"}
        checks["okubo_spectrum"] = {"status": "skipped (not Okubo form)"}
        checks["resolvent"] = {"status": "skipped (not Okubo form)"}

    checks["bivariate"] = _check_entry(
        bivariate_residual(dist, params, y=0.5, z=0.5), 1e-8)

    failed = [k for k, v in checks.items() if v.get("status") == "fail"]
    report = {
        "schema": SCHEMA,
        "params": params.asdict(),
        "checks": checks,
        "passed": not failed,
        "wall_time_s": time.perf_counter() - t0,
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if not failed else EXIT_FAIL


def cmd_simulate(args, argv) -> int:
    t0 = time.perf_counter()
    try:
        params = load_params(args.paramfile)
        params.require_valid()
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    seed = args.seed if args.seed is not None else _seed_from_env(SimConfig().seed)
    config = SimConfig(n_events=args.events, seed=seed, jcap=args.jcap)
    result = simulate(params, config)

    prefix = args.out or os.path.splitext(os.path.basename(args.paramfile))[0]
    sim_path = prefix + ".sim.csv"
    manifest_path = prefix + ".manifest.json"
    manifest_name = os.path.basename(manifest_path)
    _write_dist_csv(sim_path, result.estimate, manifest_name,
                    header="i,j,estimate,half_width",
                    half_width=result.half_width)
    _write_manifest(manifest_path, "simulate", argv, params, seed,
                    {"spill_budget": 1e-3}, time.perf_counter() - t0,
                    [sim_path])
    print(f"wrote {sim_path}, {manifest_path} "
          f"(time average over {result.sim_time:.6g} units)")
    return EXIT_OK


def cmd_compare(args, argv) -> int:
    try:
        ref, _ = _read_dist_csv(args.dist_csv)
        est, hw = _read_dist_csv(args.sim_csv)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if hw is None:
        hw = np.zeros_like(est)
    rows = max(ref.shape[0], est.shape[0])
    cols = max(ref.shape[1], est.shape[1])

    def pad(a, fill=0.0):
        out = np.full((rows, cols), fill)
        out[:a.shape[0], :a.shape[1]] = a
        return out

    ref_p, est_p, hw_p = pad(ref), pad(est), pad(hw)
    diffs = np.abs(ref_p - est_p)
    mask = ref_p > args.mass_floor
    within = diffs <= 3.0 * hw_p
    n_checked = int(mask.sum())
    n_within = int((within & mask).sum())
    frac = n_within / n_checked if n_checked else 1.0
    tv = 0.5 * float(diffs.sum())
    passed = frac >= 0.95 and tv <= 0.01
    report = {
        "schema": SCHEMA,
        "n_checked": n_checked,
        "n_within": n_within,
        "frac_within": frac,
        "tv_distance": tv,
        "passed": passed,
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if passed else EXIT_FAIL


def cmd_tail(args, argv) -> int:
    try:
        params = load_params(args.paramfile)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    opts = _solver_options(args)
    try:
        dist = solve(params, opts)
    except NotErgodic as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_ERGODIC
    except TruncationLimit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    window = None
    if args.window:
        lo, hi = args.window.split(":")
        window = (int(lo), int(hi))
    est = fit_tail(dist, window=window)
    try:
        sing = analytic_singularity(params)
        regime = sing.regime
    except UndefinedRho:
        regime = None
    report = {
        "schema": SCHEMA,
        "z_r": est.z_r,
        "regime": regime,
        "eta": est.eta,
        "beta": est.beta,
        "log_c": est.log_c,
        "eta_gap": est.eta_gap,
        "window": list(est.window),
        "fit_residual": est.fit_residual,
        "j_max": dist.j_max,
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_moments(args, argv) -> int:
    try:
        with open(args.phasefile) as fh:
            payload = json.load(fh)
        a = np.asarray(payload["A"], dtype=float)
        b = np.asarray(payload["B"], dtype=float)
        c = np.asarray(payload["C"], dtype=float)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    moments = mmoo_moments(a, b, c, kmax=args.kmax)
    report = {
        "schema": SCHEMA,
        "kmax": args.kmax,
        "moments": [[float(v) for v in m] for m in moments],
        "totals": [float(m.sum()) for m in moments],
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def _sweep_value(params: ModelParams, key: str, value: float) -> ModelParams:
    if key == "rho":
        # offered load; back out the arrival rate from the other knobs
        if params.at_0 <= 0:
            raise ValueError("cannot vary rho with at_0 = 0")
        lam = value * params.mu * params.thb * params.s / params.at_0
        return params.replace(lam=lam)
    if key not in ModelParams.__dataclass_fields__:
        raise ValueError(f"unknown sweep key {key!r}")
    if key in _INT_FIELDS:
        return params.replace(**{key: int(value)})
    return params.replace(**{key: value})


def _sweep_point(params: ModelParams, key: str, value: float) -> dict:
    row = {"key": key, "value": value}
    try:
        point = _sweep_value(params, key, value)
        dist = solve(point)
        row.update(status="ok",
                   mean_orbit=dist.mean_orbit(),
                   blocking_probability=dist.blocking_probability(),
                   j_max=dist.j_max)
        try:
            d = derive(point)
            row.update(xi=d.xi, z_r=d.z_r)
        except UndefinedRho:
            row.update(xi=None, z_r=None)
    except RetrialQError as exc:
        row.update(status=f"failed: {exc.code}", mean_orbit=None,
                   blocking_probability=None, j_max=None, xi=None, z_r=None)
    except ValueError as exc:
        row.update(status=f"failed: {exc}", mean_orbit=None,
                   blocking_probability=None, j_max=None, xi=None, z_r=None)
    return row


def cmd_sweep(args, argv) -> int:
    t0 = time.perf_counter()
    try:
        params = load_params(args.paramfile)
        key, spec_str = args.vary.split("=", 1)
        lo, hi, n = spec_str.split(":")
        values = np.linspace(float(lo), float(hi), int(n))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    key = _PARAM_ALIASES.get(key.strip(), key.strip())

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        rows = list(pool.map(lambda v: _sweep_point(params, key, v), values))

    prefix = args.out or os.path.splitext(os.path.basename(args.paramfile))[0]
    sweep_path = prefix + ".sweep.csv"
    manifest_path = prefix + ".sweep.manifest.json"
    manifest_name = os.path.basename(manifest_path)
    fields = ["key", "value", "status", "mean_orbit",
              "blocking_probability", "xi", "z_r", "j_max"]
    with open(sweep_path, "w") as fh:
        fh.write(f"# manifest: {manifest_name}\n")
        fh.write(",".join(fields) + "\n")
        for row in rows:
            cells = []
            for f in fields:
                v = row.get(f)
                if isinstance(v, float):
                    cells.append(_fmt(v))
                elif v is None:
                    cells.append("")
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")
    _write_manifest(manifest_path, "sweep", argv, params, None, {},
                    time.perf_counter() - t0, [sweep_path])
    n_ok = sum(1 for r in rows if r["status"] == "ok")
    print(f"wrote {sweep_path} ({n_ok}/{len(rows)} points solved)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="retrialq",
        description="multiserver retrial queue solver and diagnostics")
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="stationary distribution + summary")
    sp.add_argument("paramfile")
    sp.add_argument("--jmax", type=int, default=None)
    sp.add_argument("--jmin", type=int, default=None)
    sp.add_argument("--eps", type=float, default=None)
    sp.add_argument("--out", default=None, help="output file prefix")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("check", help="algebraic identity checks")
    sp.add_argument("paramfile")
    sp.add_argument("--corrupt", action="store_true",
                    help="perturb V to demonstrate det sensitivity")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("simulate", help="discrete-event simulation")
    sp.add_argument("paramfile")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--events", type=int, default=2_000_000)
    sp.add_argument("--jcap", type=int, default=2000)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", help="simulation vs solver CSVs")
    sp.add_argument("dist_csv")
    sp.add_argument("sim_csv")
    sp.add_argument("--mass-floor", type=float, default=1e-6)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("tail", help="fit geometric decay of the orbit tail")
    sp.add_argument("paramfile")
    sp.add_argument("--jmax", type=int, default=None)
    sp.add_argument("--jmin", type=int, default=None)
    sp.add_argument("--eps", type=float, default=None)
    sp.add_argument("--window", default=None, help="lo:hi level window")
    sp.set_defaults(func=cmd_tail)

    sp = sub.add_parser("moments", help="M/M/infinity factorial moments")
    sp.add_argument("phasefile", help="JSON with A, B, C matrices")
    sp.add_argument("--kmax", type=int, default=3)
    sp.set_defaults(func=cmd_moments)

    sp = sub.add_parser("sweep", help="solve over a parameter grid")
    sp.add_argument("paramfile")
    sp.add_argument("--vary", required=True, metavar="key=lo:hi:n")
    sp.add_argument("--jobs", type=int, default=4)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args, argv)


if __name__ == "__main__":
    sys.exit(main())
