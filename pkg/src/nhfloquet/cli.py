"""Command-line driver: ``nhfloquet CONFIG [--task NAME ...]``.

Runs the requested tasks in dependency order and writes CSV data, a
``resonance.json`` dump and a ``manifest.json`` with content hashes into
``run.output_dir``. Exit codes: 0 success, 2 config error, 3 solver failure,
4 convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager, nullcontext
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from . import observables as obs
from .basis import solve_field_free
from .config import TASKS, RunConfig
from .errors import ConfigError, ConvergenceError, DimensionError, EigenSolverError, NHFError
from .resonance import ResonanceSolution, solve_resonance, theta_trajectory

log = logging.getLogger("nhfloquet")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CONVERGENCE = 0, 2, 3, 4

_NEEDS = {
    "resonance": (),
    "hgs": ("resonance",),
    "sd": ("resonance",),
    "natural": ("resonance",),
    "ati": ("resonance",),
    "sweep": (),
    "converge": (),
}


def resolve_tasks(requested) -> list[str]:
    """Requested tasks plus their prerequisites, in canonical order."""
    wanted = set()
    for task in requested:
        if task not in _NEEDS:
            raise ConfigError(f"unknown task {task!r}; choose from {TASKS}")
        wanted.add(task)
        wanted.update(_NEEDS[task])
    return [t for t in TASKS if t in wanted]


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return "nan"
    return repr(float(value))


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@contextmanager
def _pool(workers: int):
    if workers <= 1:
        yield map
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            yield ex.map


@dataclass
class RunManifest:
    config: dict
    version: str = __version__
    started: str = ""
    finished: str = ""
    tasks: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK
    results: object = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "version": self.version,
            "timestamps": {"started": self.started, "finished": self.finished},
            "tasks": self.tasks,
            "diagnostics": self.diagnostics,
            "files": self.files,
            "exit_code": self.exit_code,
        }


class Runner:
    """Holds intermediate results so each task is computed at most once."""

    def __init__(self, config: RunConfig, out: Path):
        self.config = config
        self.out = out
        self.written: list[Path] = []
        self.diagnostics: dict = {}
        self._resonance: ResonanceSolution | None = None
        self._table = None
        self.trajectory = None

    def _emit(self, name, header, rows):
        self.written.append(write_csv(self.out / name, header, rows))

    @property
    def resonance(self) -> ResonanceSolution:
        if self._resonance is None:
            self.task_resonance()
        return self._resonance

    @property
    def table(self):
        if self._table is None:
            cfg = self.config
            self._table = obs.amplitude_table(
                self.resonance,
                n_photons=cfg["observables.n_photons"],
                force=cfg["observables.force"],
                window=cfg["observables.window"],
            )
        return self._table

    def task_resonance(self):
        cfg = self.config
        thetas = cfg.thetas()
        method, n_eigs = cfg["resonance.method"], cfg["resonance.n_eigs"]
        if thetas is None:
            res = solve_resonance(cfg.problem(), method=method, n_eigs=n_eigs)
        else:
            with _pool(cfg["run.workers"]) as map_fn:
                traj = theta_trajectory(cfg.problem(), thetas, method=method, n_eigs=n_eigs, map_fn=map_fn)
            res = traj.star
            self.trajectory = traj
            self._emit(
                "theta_trajectory.csv",
                ["theta", "re_E", "im_E"],
                [(t, e.real, e.imag) for t, e in zip(traj.thetas, traj.energies)],
            )
            self.diagnostics["theta_derivative_min"] = float(np.min(np.abs(traj.derivative)))
        self._resonance = res
        path = self.out / "resonance.json"
        res.write_json(path)
        self.written.append(path)
        self.diagnostics["resonance"] = {
            "residual": res.residual,
            "dominance": res.dominance,
            "theta_used": res.theta_used,
            "theta_star": res.theta_star,
            **res.diagnostics,
        }
        log.info("resonance E = %r", res.quasi_energy)

    def task_hgs(self):
        totals = self.table.values.sum(axis=0)
        series = obs.hgs(self.table)
        self._emit(
            "hgs.csv",
            ["N", "re_A_total", "im_A_total", "P", "log10_P"],
            [(int(n), a.real, a.imag, p, lp) for n, a, p, lp in zip(series.N, totals, series.values, series.log10)],
        )
        self.diagnostics["hgs_cutoff"] = obs.cutoff_order(series)

    def task_sd(self):
        series = obs.sd_series(self.table)
        self._emit("sd.csv", ["N", "SD"], [(int(n), v) for n, v in zip(series.N, series.values)])

    def task_natural(self):
        cfg = self.config
        exp = obs.natural_expansion(self.table, cfg["observables.convention"])
        self._emit(
            "natural.csv",
            ["l", "re_d", "im_d", "abs_d_sq", "degenerate"],
            [(l + 1, d.real, d.imag, abs(d) ** 2, g) for l, (d, g) in enumerate(zip(exp.weights, exp.degenerate))],
        )
        dists = obs.photon_distributions(exp, modes=tuple(cfg["observables.modes"]))
        rows = []
        for l, dist in zip(cfg["observables.modes"], dists):
            f = exp.photon_modes[:, l - 1]
            rows += [(l, int(n), fv.real, fv.imag, p) for n, fv, p in zip(exp.photon_numbers, f, dist.values)]
        self._emit("natural_modes.csv", ["l", "N", "re_f", "im_f", "prob_partial"], rows)
        total = dists[-1]
        self._emit("prob_total.csv", ["N", "prob_total"], [(int(n), v) for n, v in zip(total.N, total.values)])
        self.diagnostics["natural_reconstruction"] = float(np.abs(exp.reconstruct() - self.table.values).max())

    def task_ati(self):
        res = self.resonance
        n_photons = self.config["observables.n_photons"]
        channels = obs.ati_spectrum(res, n_photons)
        self._emit(
            "ati.csv",
            ["N", "k_N", "re_t", "im_t", "gamma_partial", "k_floquet", "re_t_force", "im_t_force"],
            [(c.N, c.k, c.t.real, c.t.imag, c.gamma, c.k_floquet, c.t_force.real, c.t_force.imag) for c in channels],
        )
        ati, sd = obs.ati_sd_overlay(res, N_range=range(1, n_photons + 1), table=self.table)
        self._emit("ati_sd.csv", ["N", "ATI", "SD"], zip(ati.N, ati.values, sd.values))
        total = sum(c.gamma for c in channels)
        self.diagnostics["ati_sum_rule"] = total / res.gamma if res.gamma > 0 else None

    def task_sweep(self):
        cfg = self.config
        key, values = cfg["sweep.parameter"], cfg["sweep.values"]
        configs = [cfg.replace(**{key: v}) for v in values]
        with _pool(cfg["run.workers"]) as map_fn:
            results = list(map_fn(_sweep_point, configs))
        self._emit(
            "sweep.csv",
            ["value", "re_E", "im_E", "Gamma", "dominance", "P_cutoff"],
            [(v, *r) for v, r in zip(values, results)],
        )

    def task_converge(self):
        cfg = self.config
        report = converge(cfg, cfg["converge.targets"])
        self._emit(
            "converge.csv",
            ["step", "target", "parameter", "n_box", "n_channels", "n_quad", "delta", "tol"],
            report,
        )
        self.diagnostics["converge_steps"] = max((r[0] for r in report), default=0)


def _sweep_point(cfg: RunConfig):
    res = solve_resonance(cfg.problem(), method=cfg["resonance.method"], n_eigs=cfg["resonance.n_eigs"])
    table = obs.amplitude_table(res, n_photons=cfg["observables.n_photons"], force=cfg["observables.force"])
    series = obs.hgs(table)
    cutoff = obs.cutoff_order(series)
    p_cutoff = series.at(cutoff) if cutoff is not None else float("nan")
    return (res.quasi_energy.real, res.quasi_energy.imag, res.gamma, res.dominance, p_cutoff)


# ------------------------------------------------------------- convergence

_LADDER = ("basis.n_box", "basis.n_channels", "basis.n_quad")
_RELEVANT = {"E1": ("basis.n_box", "basis.n_quad")}


def _target_value(cfg: RunConfig, target: str):
    if target == "E1":
        return solve_field_free(cfg.model(), cfg.spec()).ground_energy.real
    res = solve_resonance(cfg.problem(), method=cfg["resonance.method"], n_eigs=cfg["resonance.n_eigs"])
    if target == "E_resonance":
        return res.quasi_energy
    table = obs.amplitude_table(res, n_photons=cfg["observables.n_photons"], force=cfg["observables.force"])
    p = obs.hgs(table).values
    return p[[n - 1 for n in (9, 11, 13) if n <= len(p)]]


def _delta(target, a, b) -> float:
    if target == "HGS_cutoff_region":
        return float(np.max(np.abs(a / b - 1)))
    return float(abs(a - b))


def _doubled(cfg: RunConfig, key: str) -> RunConfig:
    changes = {key: 2 * cfg[key]}
    if key == "basis.n_box":
        changes["basis.n_quad"] = max(cfg["basis.n_quad"], 3 * changes[key])
    return cfg.replace(**changes)


def converge(config: RunConfig, targets) -> list[tuple]:
    """Doubling ladder over ``n_box``, ``n_channels`` and ``n_quad``.

    At step ``s`` each parameter is doubled on its own relative to the
    current base and the target delta recorded; if every delta is below
    tolerance the target is converged at step ``s``, otherwise the base is
    refined in all parameters that failed. Report rows are
    ``(step, target, parameter, n_box, n_channels, n_quad, delta, tol)``.
    """
    tolerances = {
        "E1": config["converge.tol_e1"],
        "E_resonance": config["converge.tol_resonance"],
        "HGS_cutoff_region": config["converge.tol_hgs"],
    }
    max_steps = config["converge.max_steps"]
    report = []
    for target in targets:
        tol = tolerances[target]
        base = config
        for step in range(max_steps + 1):
            if step == max_steps:
                raise ConvergenceError(
                    f"{target} not converged to {tol:g} after {max_steps} refinement steps",
                )
            reference = _target_value(base, target)
            failed = []
            for key in _RELEVANT.get(target, _LADDER):
                trial = _doubled(base, key)
                delta = _delta(target, reference, _target_value(trial, target))
                report.append((step, target, key, trial["basis.n_box"], trial["basis.n_channels"], trial["basis.n_quad"], delta, tol))
                if not delta < tol:
                    failed.append(key)
            if not failed:
                break
            for key in failed:
                base = _doubled(base, key)
    return report


# -------------------------------------------------------------------- entry


def _hash_config(values: dict) -> str:
    return hashlib.sha256(json.dumps(values, sort_keys=True).encode()).hexdigest()


def run(config: RunConfig, tasks=None) -> RunManifest:
    """Execute ``tasks`` (default ``run.tasks``) and write the manifest.

    Failures are recorded in the manifest; the exit code is set from the
    failure class and the exception is not re-raised.
    """
    out = Path(config["run.output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config=dict(config.values), started=time.strftime("%Y-%m-%dT%H:%M:%S%z"))
    manifest.diagnostics["config_sha256"] = _hash_config(config.values)
    runner = Runner(config, out)
    threads = os.environ.get("NHF_THREADS")
    limit = threadpool_limits(int(threads)) if threads else nullcontext()
    with limit:
        for task in resolve_tasks(tasks if tasks is not None else config["run.tasks"]):
            missing = [d for d in _NEEDS[task] if manifest.tasks.get(d, {}).get("status") != "ok"]
            if missing:
                manifest.tasks[task] = {"status": "skipped", "error": f"prerequisite failed: {missing}"}
                continue
            t0 = time.perf_counter()
            try:
                getattr(runner, f"task_{task}")()
                manifest.tasks[task] = {"status": "ok", "seconds": round(time.perf_counter() - t0, 3)}
            except NHFError as exc:
                code = EXIT_CONVERGENCE if isinstance(exc, ConvergenceError) else EXIT_SOLVER
                if isinstance(exc, ConfigError):
                    code = EXIT_CONFIG
                manifest.tasks[task] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
                manifest.exit_code = manifest.exit_code or code
                log.error("task %s failed: %s", task, exc)
    manifest.diagnostics.update(_jsonable(runner.diagnostics))
    manifest.files = {p.name: sha256(p) for p in sorted(set(runner.written))}
    manifest.finished = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    manifest.results = runner
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nhfloquet", description=__doc__.splitlines()[0])
    parser.add_argument("config", help="TOML run configuration")
    parser.add_argument("--task", action="append", choices=TASKS, help="override run.tasks (repeatable)")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        config = RunConfig.load(args.config)
        tasks = resolve_tasks(args.task or config["run.tasks"])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run(config, tasks)
    except (DimensionError, EigenSolverError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return manifest.exit_code


if __name__ == "__main__":
    sys.exit(main())
