"""Scenario configuration and task runners behind the command-line interface.

A scenario file (YAML or JSON) looks like::

    name: double-well reversibility
    seed: 7
    tolerances: {rtol: 1.0e-12}
    system: double_well            # default for every task below
    params: {coupling: 0.3}
    tasks:
      - task: CheckReversibility
      - task: ReturnMap
        options: {anchors: [0.0, 0.3]}

Each task writes CSV files into its own sub-directory and returns summary
rows.  Every summary row names the tolerance it was judged against.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import __version__
from . import io as rio
from .config import Tolerances
from .errors import ConfigError, RoundTripError
from .systems import CATALOG, build_system, recommended_seed


class Task(str, enum.Enum):
    FLOW = "Flow"
    FIND_CHORDS = "FindChords"
    CLASSIFY_ORBIT = "ClassifyOrbit"
    RETURN_MAP = "ReturnMap"
    CHECK_REVERSIBILITY = "CheckReversibility"
    LINSYS_CHECK = "LinsysCheck"
    MATRIX_LAB = "MatrixLab"


_ORBIT_OPTS = {"x0": None, "period": None, "method": "shoot", "samples": 400}

TASK_OPTIONS: dict[Task, dict[str, Any]] = {
    Task.FLOW: {"x0": None, "t": None, "samples": 400},
    Task.FIND_CHORDS: {"t_max": None, "grid": None, "n_scan": 800},
    Task.CLASSIFY_ORBIT: {**_ORBIT_OPTS, "sigma": True},
    Task.RETURN_MAP: {**_ORBIT_OPTS, "anchors": [0.0, 0.37]},
    Task.CHECK_REVERSIBILITY: {**_ORBIT_OPTS, "threshold": 1e-5, "point_checks": 0},
    Task.LINSYS_CHECK: {"d": 1, "T": 2.0, "pairs": 3, "bumps": 20, "violators": True,
                        "threshold": 1e-4, "agreement_tol": 1e-6, "n_grid": 101},
    Task.MATRIX_LAB: {"d": 1, "samples": 1000, "kind": "symplectic", "involution": "R0"},
}

NEEDS_SYSTEM = {Task.FLOW, Task.FIND_CHORDS, Task.CLASSIFY_ORBIT, Task.RETURN_MAP,
                Task.CHECK_REVERSIBILITY}


@dataclass(frozen=True)
class TaskItem:
    task: Task
    system: str | None
    params: dict
    options: dict

    def echo(self) -> dict:
        return {"task": self.task.value, "system": self.system, "params": self.params,
                "options": self.options}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    items: tuple[TaskItem, ...]
    tolerances: Tolerances = field(default_factory=Tolerances)
    output: str | None = None
    seed: int = 0

    def echo(self) -> dict:
        return {"name": self.name, "seed": self.seed, "output": self.output,
                "tolerances": self.tolerances.as_dict(), "tasks": [i.echo() for i in self.items]}


_TOP_KEYS = {"name", "seed", "output", "tolerances", "system", "params", "tasks"}
_ITEM_KEYS = {"task", "system", "params", "options"}


def parse_config(data: dict) -> ScenarioConfig:
    """Validate a scenario mapping; every problem found is listed in one error."""
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a mapping")
    problems: list[str] = []
    unknown = sorted(set(data) - _TOP_KEYS)
    if unknown:
        problems.append(f"unknown top-level keys: {unknown}")
    try:
        tol = Tolerances.from_dict(data.get("tolerances"))
    except (TypeError, ValueError) as exc:
        problems.append(f"tolerances: {exc}")
        tol = Tolerances()
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        problems.append("seed must be a non-negative integer")
    tasks = data.get("tasks")
    if not tasks:
        problems.append("task list is empty")
        tasks = []
    items = []
    for k, raw in enumerate(tasks):
        where = f"tasks[{k}]"
        if isinstance(raw, str):
            raw = {"task": raw}
        if not isinstance(raw, dict):
            problems.append(f"{where}: must be a mapping")
            continue
        bad = sorted(set(raw) - _ITEM_KEYS)
        if bad:
            problems.append(f"{where}: unknown keys {bad}")
        try:
            task = Task(raw.get("task"))
        except ValueError:
            problems.append(f"{where}: unknown task {raw.get('task')!r}; choose from "
                            f"{[t.value for t in Task]}")
            continue
        system = raw.get("system", data.get("system"))
        params = dict(data.get("params") or {}) if "system" not in raw else {}
        params.update(raw.get("params") or {})
        if task in NEEDS_SYSTEM:
            if system is None:
                problems.append(f"{where}: task {task.value} needs a system")
            elif system not in CATALOG:
                problems.append(f"{where}: unknown system {system!r}; choose from {sorted(CATALOG)}")
            else:
                try:
                    CATALOG[system].resolve(params)
                except ConfigError as exc:
                    problems.append(f"{where}: {exc}")
        opts = dict(TASK_OPTIONS[task])
        given = raw.get("options") or {}
        bad = sorted(set(given) - set(opts))
        if bad:
            problems.append(f"{where}: unknown options {bad} for {task.value}; allowed {sorted(opts)}")
        opts.update(given)
        items.append(TaskItem(task, system if task in NEEDS_SYSTEM else None, params, opts))
    if problems:
        raise ConfigError("invalid scenario:\n  - " + "\n  - ".join(problems))
    return ScenarioConfig(str(data.get("name", "scenario")), tuple(items), tol,
                          data.get("output"), int(seed))


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return parse_config(data)


# ---------------------------------------------------------------------------
# task runners


class Status(str, enum.Enum):
    OK = "ok"
    INCONCLUSIVE = "inconclusive"
    ERROR = "error"


@dataclass
class ItemResult:
    index: int
    task: str
    status: Status
    rows: list[dict]
    files: list[str]
    message: str = ""


def _orbit(item: TaskItem, tol: Tolerances):
    from .orbits import find_periodic_orbit, orbit_from_known_period
    H, u = build_system(item.system, item.params)
    x0, T = recommended_seed(item.system, item.params)
    o = item.options
    if o["x0"] is not None:
        x0 = np.asarray(o["x0"], dtype=float)
    if o["period"] is not None:
        T = float(o["period"])
    if o["method"] == "known":
        orbit = orbit_from_known_period(H, u, x0, T, tol)
    elif o["method"] == "shoot":
        orbit = find_periodic_orbit(H, u, x0, T, tol)
    else:
        raise ConfigError(f"orbit method must be 'shoot' or 'known', got {o['method']!r}")
    return H, u, orbit


def _run_flow(item, tol, rng, out: Path):
    from .hamsys import flow
    H, u = build_system(item.system, item.params)
    x0, T = recommended_seed(item.system, item.params)
    o = item.options
    x0 = x0 if o["x0"] is None else np.asarray(o["x0"], dtype=float)
    t = T if o["t"] is None else float(o["t"])
    seg = flow(H, u, x0, t, tol)
    f = rio.write_segment(out / "flow.csv", seg, t, H, u, o["samples"])
    row = {"quantity": "energy_drift", "value": seg.max_drift, "tolerance": tol.energy_drift_tol,
           "pass": seg.max_drift <= tol.energy_drift_tol * max(1.0, abs(seg.energy))}
    return Status.OK, [row], [f]


def _run_chords(item, tol, rng, out: Path):
    from .orbits import find_chords
    H, u = build_system(item.system, item.params)
    x0, T = recommended_seed(item.system, item.params)
    o = item.options
    n = x0.size // 2
    grid = [x0[:n]] if o["grid"] is None else [np.asarray(g, dtype=float) for g in o["grid"]]
    t_max = 1.1 * T if o["t_max"] is None else float(o["t_max"])
    chords = find_chords(H, u, t_max, grid, tol, n_scan=o["n_scan"])
    f = rio.write_chords(out / "chords.csv", chords)
    rows = [{"quantity": f"chord{k}_sigma_min", "value": c.transversality_sigma_min,
             "tolerance": tol.transv_tol, "pass": c.transverse} for k, c in enumerate(chords)]
    rows.append({"quantity": "chord_count", "value": len(chords), "tolerance": "", "pass": None})
    return Status.OK, rows, [f]


def _run_classify(item, tol, rng, out: Path):
    from .orbits import OrbitKind, classify_orbit, count_multiple_intersections, time_symmetry_sigma
    H, u, orbit = _orbit(item, tol)
    files = [rio.write_orbit(out / "orbit.csv", orbit, item.options["samples"])]
    cls = classify_orbit(orbit, tol)
    mult = count_multiple_intersections(orbit, tol)
    rows = [{"quantity": "kind", "value": cls.kind.value, "tolerance": tol.velocity_floor, "pass": None},
            {"quantity": "period", "value": orbit.period, "tolerance": "", "pass": None},
            {"quantity": "closure_residual", "value": orbit.closure_residual,
             "tolerance": max(1e-8, 100 * tol.newton_tol),
             "pass": orbit.closure_residual <= max(1e-8, 100 * tol.newton_tol)},
            {"quantity": "multiple_points", "value": mult.count, "tolerance": "triple-point residual 1e-9",
             "pass": not mult.inconclusive}]
    for k, nu in enumerate(cls.degenerate_times):
        rows.append({"quantity": f"turning_time{k}", "value": nu, "tolerance": "", "pass": None})
    status = Status.INCONCLUSIVE if cls.kind is OrbitKind.INCONCLUSIVE else Status.OK
    if cls.kind is OrbitKind.ROUND_TRIP and item.options["sigma"]:
        sig = time_symmetry_sigma(orbit, tol, cls.degenerate_times)
        files.append(rio.write_sigma(out / "sigma.csv", sig, item.options["samples"]))
        diag = sig.diagnostics
        rows += [{"quantity": "sigma_match_residual", "value": diag["match_residual"],
                  "tolerance": 1e-6, "pass": diag["match_residual"] <= 1e-6},
                 *({"quantity": f"sigma_rate_at_turning{k}", "value": v, "tolerance": 1e-4,
                    "pass": abs(v + 1.0) <= 1e-4} for k, v in enumerate(diag["sigma_prime"]))]
    return status, rows, files


def _run_return_map(item, tol, rng, out: Path):
    from .reduced import OrbitLinearization, reduced_return_map
    from .sympmat import classify_upsilon, match_eigenvalues, symplectic_residual
    H, u, orbit = _orbit(item, tol)
    lin = OrbitLinearization(orbit, tol)
    rows, files, eigs = [], [], []
    for k, frac in enumerate(item.options["anchors"]):
        M = reduced_return_map(H, u, orbit, float(frac) * orbit.period, lin, tol)
        files.append(rio.write_matrix(out / f"return_map_{k}.csv", M))
        files.append(rio.write_eigenvalues(out / f"eigenvalues_{k}.csv", M))
        v = classify_upsilon(M, tol.root_tol, tol.gap_tol, tol.k_max)
        eigs.append(np.linalg.eigvals(M))
        rows += [{"quantity": f"anchor{k}_symplectic_residual", "value": symplectic_residual(M),
                  "tolerance": tol.symplectic_tol * 1e3, "pass": symplectic_residual(M) <= tol.symplectic_tol * 1e3},
                 {"quantity": f"anchor{k}_in_upsilon", "value": v.reason.value,
                  "tolerance": f"root_tol={tol.root_tol:g};gap_tol={tol.gap_tol:g}", "pass": None}]
    for k in range(1, len(eigs)):
        r = match_eigenvalues(eigs[0], eigs[k])
        rows.append({"quantity": f"anchor_invariance_0_{k}", "value": r, "tolerance": 1e-6, "pass": r <= 1e-6})
    return Status.OK, rows, files


def _run_reversibility(item, tol, rng, out: Path):
    from .orbits import OrbitKind, classify_orbit
    from .reduced import OrbitLinearization, check_reversible_orbit, check_reversible_point
    H, u, orbit = _orbit(item, tol)
    cls = classify_orbit(orbit, tol)
    if cls.kind is not OrbitKind.ROUND_TRIP:
        return (Status.INCONCLUSIVE,
                [{"quantity": "kind", "value": cls.kind.value, "tolerance": "", "pass": False}], [])
    thr = float(item.options["threshold"])
    lin = OrbitLinearization(orbit, tol)
    v = check_reversible_orbit(H, u, orbit, cls.degenerate_times, lin, tol, thr)
    files = [rio.write_matrix(out / "R0.csv", v.R0), rio.write_matrix(out / "R1.csv", v.R1),
             rio.write_matrix(out / "return_map.csv", v.return_map)]
    rows = [{"quantity": "identity_residual", "value": v.identity_residual, "tolerance": thr,
             "pass": v.identity_residual <= thr},
            {"quantity": "antisymplectic_R0", "value": v.antisymplectic_residuals[0], "tolerance": thr,
             "pass": v.antisymplectic_residuals[0] <= thr},
            {"quantity": "antisymplectic_R1", "value": v.antisymplectic_residuals[1], "tolerance": thr,
             "pass": v.antisymplectic_residuals[1] <= thr},
            {"quantity": "half_period_offset", "value": v.half_period_offset, "tolerance": 1e-6,
             "pass": v.half_period_offset <= 1e-6},
            {"quantity": "reversible_structure", "value": v.reversible_structure_residual,
             "tolerance": thr, "pass": v.reversible_structure_residual <= thr}]
    n_pts = int(item.options["point_checks"])
    if n_pts > 0:
        nu0, nu1 = v.nu0, v.nu1
        ts = nu0 + (nu1 - nu0) * (np.arange(1, n_pts + 1) / (n_pts + 1))
        prows = []
        for t in ts:
            p = check_reversible_point(H, u, orbit, float(t), lin=lin, tol=tol)
            prows.append({"t": t, "scale": p.scale, "r1": p.residuals[0], "r2": p.residuals[1],
                          "r3": p.residuals[2], "tolerance": p.tolerances[0], "pass": p.reversible})
        files.append(rio.write_dict_rows(out / "points.csv", prows))
    return Status.OK, rows, files


def _run_linsys(item, tol, rng, out: Path):
    from .linsys import (check_three_conditions, m_identity_residuals, projection_agreement,
                         random_bump_ensemble, random_pair, violate_conformal, violate_conjugacy,
                         violate_ratio)
    o = item.options
    d, T = int(o["d"]), float(o["T"])
    thr, agree = float(o["threshold"]), float(o["agreement_tol"])
    rows, files = [], []
    for k in range(int(o["pairs"])):
        pair, info = random_pair(d, T, rng, n_grid=int(o["n_grid"]))
        ens = random_bump_ensemble(d, T, int(o["bumps"]), rng)
        variants = [("conjugate", pair)]
        if o["violators"]:
            variants += [("violate_ratio", violate_ratio(pair.L, pair.a)),
                         ("violate_conformal", violate_conformal(pair.L, pair.a)),
                         ("violate_conjugacy", violate_conjugacy(pair.L, pair.a))]
        for name, p in variants:
            c = check_three_conditions(p, thr)
            pa = projection_agreement(p, ens, tol).discrepancy
            row = {"pair": k, "variant": name, "alpha": info["alpha"],
                   "cond1": c.residuals[0], "cond2": c.residuals[1], "cond3": c.residuals[2],
                   "threshold": thr, "projection_discrepancy": pa, "agreement_tol": agree,
                   "conditions_pass": c.all_pass, "projections_agree": pa <= agree}
            if name == "conjugate":
                for n, r in enumerate(m_identity_residuals(p, 4), start=2):
                    row[f"m{n}_residual"] = r
            rows.append(row)
        if k == 0:
            files.append(rio.write_pair_bundle(out / "pair0", pair))
    files.append(rio.write_dict_rows(out / "linsys.csv", rows))
    # consistent means: the conditions and the projections give the same answer
    summary = [{"quantity": f"pair{r['pair']}_{r['variant']}_consistent",
                "value": r["projection_discrepancy"], "tolerance": agree,
                "pass": r["conditions_pass"] == r["projections_agree"]} for r in rows]
    return Status.OK, summary, files


def _run_matrix_lab(item, tol, rng, out: Path):
    from .sympmat import R0, R1, classify_upsilon, random_symplectic, sample_r_reversible
    o = item.options
    d, n = int(o["d"]), int(o["samples"])
    if o["kind"] == "symplectic":
        mats = [random_symplectic(d, rng) for _ in range(n)]
    elif o["kind"] == "r_reversible":
        R = {"R0": R0, "R1": R1}[o["involution"]](d)
        mats = sample_r_reversible(R, n, int(rng.integers(2**31)))
    else:
        raise ConfigError(f"MatrixLab kind must be 'symplectic' or 'r_reversible', got {o['kind']!r}")
    verdicts = [classify_upsilon(M, tol.root_tol, tol.gap_tol, tol.k_max) for M in mats]
    f = rio.write_csv(out / "upsilon.csv", ("sample",) + verdicts[0].CSV_HEADER,
                      ([k, *v.csv_row()] for k, v in enumerate(verdicts)))
    frac = float(np.mean([v.in_upsilon for v in verdicts]))
    rows = [{"quantity": "upsilon_fraction", "value": frac,
             "tolerance": f"root_tol={tol.root_tol:g};gap_tol={tol.gap_tol:g};k_max={tol.k_max}",
             "pass": frac <= 0.01}]
    return Status.OK, rows, [f]


RUNNERS = {
    Task.FLOW: _run_flow,
    Task.FIND_CHORDS: _run_chords,
    Task.CLASSIFY_ORBIT: _run_classify,
    Task.RETURN_MAP: _run_return_map,
    Task.CHECK_REVERSIBILITY: _run_reversibility,
    Task.LINSYS_CHECK: _run_linsys,
    Task.MATRIX_LAB: _run_matrix_lab,
}


def run_item(index: int, item: TaskItem, tol: Tolerances, seed_seq: np.random.SeedSequence,
             out_dir: str, plots: str = "none") -> ItemResult:
    """Run one task into ``out_dir/<index>_<task>``; errors become an ERROR result."""
    out = Path(out_dir) / f"{index:02d}_{item.task.value}"
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed_seq)
    try:
        status, rows, files = RUNNERS[item.task](item, tol, rng, out)
        if plots == "svg":
            from .plots import plot_item
            files += plot_item(item.task.value, out)
        msg = ""
    except (RoundTripError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        status, rows, files, msg = Status.ERROR, [], [], f"{type(exc).__name__}: {exc}"
    for r in rows:
        r.setdefault("tolerance", "")
    return ItemResult(index, item.task.value, status, rows, [str(Path(f).relative_to(out_dir)) for f in files],
                      msg)


@dataclass
class RunReport:
    scenario: dict
    results: list[ItemResult]
    wall_clock: float
    version: str = __version__

    @property
    def exit_code(self) -> int:
        if any(r.status is Status.ERROR for r in self.results):
            return 1
        if any(r.status is Status.INCONCLUSIVE for r in self.results):
            return 2
        return 0

    def as_dict(self) -> dict:
        return {"scenario": self.scenario, "version": self.version, "wall_clock_s": self.wall_clock,
                "exit_code": self.exit_code,
                "results": [{"index": r.index, "task": r.task, "status": r.status.value,
                             "message": r.message, "files": r.files, "rows": r.rows}
                            for r in self.results]}


def run(config: ScenarioConfig, out_dir: str | Path | None = None, jobs: int = 1,
        plots: str = "none", seed: int | None = None) -> RunReport:
    """Execute every task; results are assembled in task order regardless of ``jobs``."""
    if not config.items:
        raise ConfigError("task list is empty")
    out_dir = Path(out_dir or config.output or "out")
    seed = config.seed if seed is None else seed
    seeds = np.random.SeedSequence(seed).spawn(len(config.items))
    t0 = time.perf_counter()
    args = [(k, it, config.tolerances, seeds[k], str(out_dir), plots) for k, it in enumerate(config.items)]
    out_dir.mkdir(parents=True, exist_ok=True)
    if jobs > 1 and len(args) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_item, *zip(*args)))
    else:
        results = [run_item(*a) for a in args]
    report = RunReport({**config.echo(), "seed": seed}, results, time.perf_counter() - t0)
    rows = []
    for r in results:
        if not r.rows:
            rows.append({"item": r.index, "task": r.task, "status": r.status.value,
                         "quantity": "", "value": "", "tolerance": "", "pass": "", "message": r.message})
        for row in r.rows:
            rows.append({"item": r.index, "task": r.task, "status": r.status.value,
                         "quantity": row.get("quantity", ""), "value": row.get("value", ""),
                         "tolerance": row.get("tolerance", ""), "pass": row.get("pass", ""),
                         "message": r.message})
    rio.write_dict_rows(out_dir / "summary.csv", rows)
    rio.write_json(out_dir / "report.json", report.as_dict())
    return report
