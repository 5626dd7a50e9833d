"""Run orchestration: evolve, lightcone, sweep and check, with on-disk artifacts.

Exit statuses: 0 success, 2 invalid configuration, 3 solver failure,
4 invariant breach found by ``check``.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import shutil
import subprocess
import time
import uuid
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics as diag
from . import extrinsic as ex
from . import lightcone as lc
from .config import RunConfig, from_dict, parse_text
from .errors import GeometryError, SolverError
from .presets import make_initial_data
from .properties import PropertyResult, geometry_properties, potential_properties, result

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_BREACH = 0, 2, 3, 4


def version_string():
    """Package version with the git commit appended when available."""
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"], cwd=Path(__file__).parent,
            capture_output=True, text=True, timeout=5, check=True,
        ).stdout.strip()
        return f"{__version__}+g{rev}" if rev else __version__
    except (OSError, subprocess.SubprocessError):
        return __version__


@contextmanager
def atomic_dir(out):
    """Build the run directory under a private name, then move it into place."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.parent / f".{out.name}.tmp-{os.getpid()}-{uuid.uuid4().hex[:8]}"
    tmp.mkdir()
    try:
        yield tmp
    finally:
        trash = None
        if out.exists():
            trash = out.parent / f".{out.name}.old-{uuid.uuid4().hex[:8]}"
            os.replace(out, trash)
        os.replace(tmp, out)
        if trash is not None:
            shutil.rmtree(trash, ignore_errors=True)


def _fmt(values):
    return [repr(float(v)) for v in values]


def write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# --- evolve --------------------------------------------------------------------


def evolve_inputs(cfg: RunConfig):
    """Manifold, two-form, potential, grid and data callables for an evolve run.

    ``initial_data.scale`` = lam replaces the data by lam^beta u0(lam x) and
    lam^(beta+1) u1(lam x), the initial data of the rescaled solution.
    """
    m, B, V = cfg.manifold(), cfg.form(), cfg.potential()
    g = cfg.grid
    grid = ex.GridSpec.from_cfl(g.x_min, g.x_max, g.nx, g.cfl, g.t_final, g.boundary)
    params = dict(cfg.initial_data)
    preset = params.pop("preset")
    lam = float(params.pop("scale", 1.0))
    beta = float(params.pop("beta", 0.0))
    base0, base1 = make_initial_data(m, preset, params, cfg.seed)
    if lam == 1.0 and beta == 0.0:
        return m, B, V, grid, base0, base1

    def u0(x):
        return lam**beta * base0(lam * np.asarray(x))

    def u1(x):
        return lam ** (beta + 1) * base1(lam * np.asarray(x))

    return m, B, V, grid, u0, u1


def write_fields(path, x, state, q):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + [f"u{i}" for i in range(q)] + [f"ut{i}" for i in range(q)])
        for row in np.column_stack([x, state.u, state.ut]):
            w.writerow(_fmt(row))


def read_fields(path, t):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    q = (data.shape[1] - 1) // 2
    return ex.FieldState(t, data[:, 1 : 1 + q], data[:, 1 + q :])


GNUPLOT = """# gnuplot script: gnuplot -p plot.gp
set datafile separator ","
set key autotitle columnhead
set multiplot layout 2,1
set xlabel "t"
plot "diagnostics.csv" using 1:2 with lines title "E", "" using 1:11 with lines title "E_half"
set logscale y
plot "diagnostics.csv" using 1:5 with lines, "" using 1:6 with lines, "" using 1:7 with lines, "" using 1:8 with lines
unset multiplot
"""


def run_evolve(cfg: RunConfig, out) -> int:
    t0 = time.perf_counter()
    m, B, V, grid, u0, u1 = evolve_inputs(cfg)
    traj = ex.solve(u0, u1, grid, m, B, V, snapshot_every=cfg.output.snapshot_every, apriori=cfg.output.apriori)
    wall = time.perf_counter() - t0
    with atomic_dir(out) as tmp:
        snaps = []
        for idx, s in enumerate(traj.states):
            name = f"fields_{idx:04d}.csv"
            write_fields(tmp / name, grid.x, s, m.ambient_dim)
            snaps.append({"file": name, "t": s.t, "step": int(round(s.t / grid.dt))})
        traj.diagnostics.write_csv(tmp / "diagnostics.csv")
        (tmp / "plot.gp").write_text(GNUPLOT)
        E = traj.diagnostics.column("E")
        manifest = {
            "version": version_string(),
            "wall_time_s": wall,
            "mode": "evolve",
            "status": "ok" if traj.ok else "failed",
            "failure": traj.failure,
            "config": cfg.to_dict(),
            "resolved": {"dx": grid.dx, "dt": grid.dt, "cfl": grid.cfl, "n_steps": grid.n_steps,
                         "n_points": int(grid.x.size), "ambient_dim": m.ambient_dim},
            "snapshots": snaps,
            "summary": {"energy_initial": float(E[0]), "energy_drift": _drift(E)},
        }
        if traj.apriori_inequality is not None:
            lhs, rhs = traj.apriori_inequality
            manifest["summary"]["apriori_inequality"] = {"lhs": lhs, "rhs": rhs}
        write_json(tmp / "run.json", manifest)
    if not traj.ok:
        log.error("evolve failed: %s", traj.failure)
        return EXIT_SOLVER
    return EXIT_OK


def _drift(E):
    E = np.asarray(E, dtype=float)
    scale = abs(E[0]) if abs(E[0]) > 0 else 1.0
    return float(np.max(np.abs(E - E[0])) / scale)


# --- lightcone -----------------------------------------------------------------


def lightcone_data(cfg: RunConfig):
    m, B = cfg.manifold(), cfg.form()
    chart = m.default_chart()
    params = dict(cfg.initial_data)
    preset = params.pop("preset")
    u0, u1 = make_initial_data(m, preset, params, cfg.seed)
    return chart, B, lc.chart_data_from_ambient(u0, u1, chart, cfg.lightcone.L)


def write_state(path, state: lc.CharacteristicState):
    nv = lc.node_values(state)
    n = state.n
    header = ["xi", "eta"] + [f"y{i}" for i in range(n)] + [f"u{i}" for i in range(n)] + \
        [f"v{i}" for i in range(n)] + [f"z{i}" for i in range(n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in np.column_stack([nv["xi"], nv["eta"], nv["y"], nv["u"], nv["v"], nv["z"]]):
            w.writerow(_fmt(row))


def read_state(path, grid: lc.TriangleGrid) -> lc.CharacteristicState:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = (data.shape[1] - 2) // 4
    i = np.rint((data[:, 0] - grid.x_left / 2) / grid.h).astype(int)
    j = np.rint((-grid.x_left / 2 - data[:, 1]) / grid.h).astype(int)
    arrays = []
    for f in range(4):
        a = np.full((grid.P + 1, grid.P + 1, n), np.nan)
        a[i, j] = data[:, 2 + f * n : 2 + (f + 1) * n]
        arrays.append(a)
    y, u, v, z = arrays
    return lc.CharacteristicState(grid, y, z, u, v)


def _grid_dict(g: lc.TriangleGrid):
    return {"x_left": g.x_left, "h": g.h, "P": g.P, "levels": g.levels}


def lightcone_summary(state, chart, B):
    res = lc.system_residual(state, chart, B)
    return {"residuals": res, "yz_gap": lc.yz_gap(state), "isometry_drift": lc.isometry_drift(state, chart),
            "derivative_sup": lc.derivative_bound(state)}


def run_lightcone(cfg: RunConfig, out) -> int:
    t0 = time.perf_counter()
    chart, B, data = lightcone_data(cfg)
    lcfg = cfg.lightcone
    status, failure = EXIT_OK, None
    params = lc.compute_bounds(data, chart)
    k = lcfg.k if lcfg.k > 0 else lc.K_SAFETY * params.k
    grid = lc.TriangleGrid.triangle(k, lcfg.n_char)
    sol, glob = None, None
    try:
        init = lc.to_characteristic_data(data, grid, chart)
        sol = lc.solve_triangle(init, chart, B, lcfg.tol_fix, lcfg.max_iter)
        if lcfg.t_final > 0:
            glob = lc.extend_global(data, chart, B, lcfg.t_final, lcfg.n_char, k, lcfg.tol_fix, lcfg.max_iter)
    except (SolverError, GeometryError) as exc:
        status, failure = EXIT_SOLVER, f"{type(exc).__name__}: {exc}"
        log.error("lightcone failed: %s", failure)
    wall = time.perf_counter() - t0
    with atomic_dir(out) as tmp:
        manifest = {
            "version": version_string(), "wall_time_s": wall, "mode": "lightcone",
            "status": "ok" if status == EXIT_OK else "failed", "failure": failure,
            "config": cfg.to_dict(),
            "k": k, "a": params.a, "M": params.M, "L": params.L, "n": params.n, "k_bound": params.k,
            "h": grid.h, "grid": _grid_dict(grid),
        }
        if sol is not None:
            with open(tmp / "delta_log.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["iter", "delta"])
                for it, d in enumerate(sol.deltas, 1):
                    w.writerow([it, repr(float(d))])
            write_state(tmp / "snapshot.csv", sol.state)
            manifest["iterations"] = sol.iterations
            manifest.update(lightcone_summary(sol.state, chart, B))
        if glob is not None:
            stages = []
            for idx, st in enumerate(glob.stages):
                name = f"stage_{idx:02d}.csv"
                write_state(tmp / name, st.solution.state)
                stages.append({"file": name, "t0": st.t0, "iterations": st.solution.iterations,
                               "grid": _grid_dict(st.solution.state.grid)})
            manifest["global"] = {"t_reached": glob.t_reached, "exhausted": glob.exhausted,
                                  "report": glob.report, "stages": stages}
            log.info(glob.report)
        write_json(tmp / "run.json", manifest)
    return status


# --- sweep ---------------------------------------------------------------------


def sweep_config(cfg: RunConfig, lam: float) -> RunConfig:
    g = cfg.grid
    data = dict(cfg.initial_data, scale=lam, beta=cfg.sweep.beta)
    return cfg.replace(**{"mode": "evolve", "grid.x_min": g.x_min / lam, "grid.x_max": g.x_max / lam,
                          "grid.t_final": g.t_final / lam, "initial_data": data})


def _sweep_worker(cfg_dict, out):
    return run_evolve(from_dict(cfg_dict), out)


def _lam_name(lam):
    return f"lambda_{lam:g}"


def load_trajectory(run_dir) -> ex.Trajectory:
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "run.json").read_text())
    cfg = parse_text(json.dumps(manifest), ".json")
    g = cfg.grid
    grid = ex.GridSpec(g.x_min, g.x_max, g.nx, manifest["resolved"]["dt"], g.t_final, g.boundary)
    states = [read_fields(run_dir / s["file"], s["t"]) for s in manifest["snapshots"]]
    diags = diag.DiagnosticSeries.read_csv(run_dir / "diagnostics.csv")
    return ex.Trajectory(grid, [s.t for s in states], states, diags, manifest.get("failure"))


def run_sweep(cfg: RunConfig, out) -> int:
    lams = list(cfg.sweep.lambdas)
    subs = [sweep_config(cfg, lam) for lam in lams]
    with atomic_dir(out) as tmp:
        jobs = [(c.to_dict(), str(tmp / _lam_name(lam))) for c, lam in zip(subs, lams)]
        if cfg.sweep.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.sweep.workers) as pool:
                codes = list(pool.map(_sweep_worker, *zip(*jobs)))
        else:
            codes = [_sweep_worker(*job) for job in jobs]
        ref_lam = lams[0]
        ref = load_trajectory(tmp / _lam_name(ref_lam))
        rows = []
        for lam, code in zip(lams, codes):
            traj = load_trajectory(tmp / _lam_name(lam))
            err = float("nan")
            if code == EXIT_OK and ref.ok:
                err = scaling_error(ref, traj, lam / ref_lam, cfg.sweep.beta)
            E = traj.diagnostics.column("E")
            rows.append([lam, traj.grid.nx, traj.grid.dx, traj.grid.dt, traj.grid.t_final,
                         _drift(E), err, code])
        with open(tmp / "summary.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "nx", "dx", "dt", "t_final", "energy_drift", "scaling_error", "exit_code"])
            for row in rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        status = "ok" if all(c == EXIT_OK for c in codes) else "failed"
        write_json(tmp / "run.json", {"version": version_string(), "mode": "sweep", "status": status,
                                      "config": cfg.to_dict(), "runs": [_lam_name(lam) for lam in lams]})
    return EXIT_SOLVER if any(c != EXIT_OK for c in codes) else EXIT_OK


def scaling_error(ref: ex.Trajectory, traj: ex.Trajectory, lam: float, beta: float = 0.0) -> float:
    """Sup distance between ``traj`` and the rescaled ``ref`` at shared snapshot times."""
    moved = ex.scaling_transform(ref, lam, beta)
    same_grid = moved.grid.nx == traj.grid.nx and np.allclose(
        [moved.grid.x_min, moved.grid.x_max], [traj.grid.x_min, traj.grid.x_max], rtol=1e-12, atol=1e-12)
    if not same_grid:
        moved = ex.resample(moved, traj.grid)
    err = 0.0
    for s in traj.states:
        try:
            other = moved.state_at(s.t, tol=1e-8)
        except KeyError:
            continue
        err = max(err, float(np.max(np.abs(other.u - s.u))))
    return err


# --- check ---------------------------------------------------------------------


def allowed_apriori(V, m) -> bool:
    """The bound on the interaction functional is asserted for V <= 0 on the target."""
    return V.sup_on(m) <= 0.0


def check_run(run_dir, seed=None) -> list[PropertyResult]:
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "run.json").read_text())
    cfg = parse_text(json.dumps(manifest), ".json")
    seed = cfg.seed if seed is None else seed
    m, B, V = cfg.manifold(), cfg.form(), cfg.potential()
    ck = cfg.check
    out = [PropertyResult("run finished without solver failure", manifest.get("status") == "ok", 0.0, 0.0)]
    out += geometry_properties(m, ck.samples, seed)
    out += potential_properties(m, B, V, ck.samples, seed)
    if manifest["mode"] == "sweep":
        for sub in manifest["runs"]:
            out += [PropertyResult(f"{sub}: {r.name}", r.ok, r.value, r.tol) for r in check_run(run_dir / sub, seed)]
        return out
    if manifest["mode"] == "lightcone":
        out += _check_lightcone(run_dir, manifest, cfg)
    else:
        out += _check_evolve(run_dir, manifest, cfg, m, V)
    return out


def _check_evolve(run_dir, manifest, cfg, m, V):
    ck = cfg.check
    traj = load_trajectory(run_dir)
    grid = traj.grid
    series = traj.diagnostics
    out = []
    dist = max(float(np.max(m.distance(s.u))) for s in traj.states)
    out.append(result("snapshots lie on the target", dist, ck.manifold_tol * max(1.0, m.radius)))
    tang = max(float(np.max(np.abs(s.ut - m.project_tangent(s.u, s.ut, check=False)))) for s in traj.states)
    out.append(result("velocities are tangent", tang, ck.manifold_tol))
    out.append(result("one diagnostics row per step",
                      abs(len(series) - (manifest["resolved"]["n_steps"] + 1)), 0))
    for col in ("res_F_plus", "res_F_minus", "res_box_e", "res_stress_div"):
        vals = series.column(col)
        out.append(result(f"{col} stays below tolerance", np.max(np.abs(vals)) if vals.size else np.inf,
                          ck.residual_tol))
    E = series.column("E")
    if grid.periodic:
        out.append(result("energy is conserved", _drift(E), ck.energy_tol))
    times = series.column("t")
    recomputed = 0.0
    for s in traj.states:
        row = int(np.argmin(np.abs(times - s.t)))
        val = diag.energy_total(s, V, grid)
        recomputed = max(recomputed, abs(val - E[row]) / max(1.0, abs(E[row])))
    out.append(result("stored energies match recomputation", recomputed, 1e-12))
    Z = series.column("apriori_Z")
    bound = series.column("apriori_bound")
    if np.all(np.isfinite(Z)) and allowed_apriori(V, m):
        excess = np.max(Z - bound - 1e-6 * np.abs(bound))
        out.append(result("interaction functional within 4 E(0)^2", max(excess, 0.0), 0.0))
    return out


def _check_lightcone(run_dir, manifest, cfg):
    ck = cfg.check
    chart, B, _ = lightcone_data(cfg)
    out = []
    if "iterations" not in manifest:
        return out
    g = manifest["grid"]
    grid = lc.TriangleGrid(g["x_left"], g["h"], g["P"], g["levels"])
    state = read_state(run_dir / "snapshot.csv", grid)
    deltas = np.loadtxt(run_dir / "delta_log.csv", delimiter=",", skiprows=1, ndmin=2)[:, 1]
    out.append(result("Picard iteration converged", deltas[-1], cfg.lightcone.tol_fix))
    mask = grid.mask()
    radius = max(float(np.max(np.linalg.norm(state.y[mask], axis=-1))),
                 float(np.max(np.linalg.norm(state.z[mask], axis=-1))))
    out.append(result("chart constraint |y|, |z| <= 1", radius, chart.domain_radius))
    summary = lightcone_summary(state, chart, B)
    res = summary["residuals"]["max"]
    out.append(result("characteristic system residual", res, ck.residual_tol))
    out.append(result("stored residual matches recomputation", abs(res - manifest["residuals"]["max"]), 1e-12))
    out.append(result("y and z agree", summary["yz_gap"], 5 * res + 10 * cfg.lightcone.tol_fix))
    out.append(result("transport isometry drift", summary["isometry_drift"], ck.residual_tol))
    bound = manifest["M"] / manifest["a"] * (1 + 10 * grid.h)
    out.append(result("derivative bound M/a", summary["derivative_sup"], bound))
    return out


def report(results, stream=None):
    lines = [r.line() for r in results]
    failed = sum(not r.ok for r in results)
    lines.append(f"{len(results) - failed}/{len(results)} properties hold")
    text = "\n".join(lines)
    if stream is not None:
        print(text, file=stream)
    return text


def run(cfg: RunConfig, out=None) -> int:
    out = Path(out or cfg.output_dir)
    if cfg.mode == "evolve":
        return run_evolve(cfg, out)
    if cfg.mode == "lightcone":
        return run_lightcone(cfg, out)
    if cfg.mode == "sweep":
        return run_sweep(cfg, out)
    code = run_evolve(cfg.replace(mode="evolve"), out)
    if code != EXIT_OK:
        return code
    return EXIT_OK if all(r.ok for r in check_run(out)) else EXIT_BREACH
