"""Run a scenario configuration and write its tables.

Every table is written with ``%.10g`` floats so reruns are byte-identical.
``manifest.json`` lists the produced files with their SHA-256 and the hash
of the canonical configuration.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, apply_parameter, build_model
from .epochs import Epoch, epoch_coefficients
from .simulate import run, run_transient
from .spectral import find_roots
from .stationary import mxg1_reference, queue_moments, solve_boundary
from .transient import TransitionKernel, mean_curve

log = logging.getLogger(__name__)

PMF_TERMS = 4096
PMF_ROWS = 200


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return "%.10g" % float(x)


def config_hash(doc: dict) -> str:
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class TableWriter:
    """Writes tables into one directory and keeps the manifest."""

    out: Path
    delimiter: str = ","
    files: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.out = Path(self.out)
        self.out.mkdir(parents=True, exist_ok=True)

    @property
    def suffix(self) -> str:
        return ".tsv" if self.delimiter == "\t" else ".csv"

    def table(self, stem: str, header: list[str], rows) -> Path:
        path = self.out / (stem + self.suffix)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, delimiter=self.delimiter, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(x) for x in row])
        self.files[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
        return path

    def manifest(self, cfg_doc: dict, command: str) -> Path:
        path = self.out / "manifest.json"
        doc = {"command": command, "config_sha256": config_hash(cfg_doc),
               "config": cfg_doc, "files": dict(sorted(self.files.items()))}
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return path


def stationary_row(spec: dict) -> dict:
    m = build_model(spec)
    sol = solve_boundary(m)
    mean, var = queue_moments(sol)
    ref_mean, ref_var = mxg1_reference(m)
    return {"model": m, "solution": sol, "mean": mean, "variance": var,
            "mean_mxg1": ref_mean, "variance_mxg1": ref_var,
            "var_a": m.moments.var_a, "rho": m.rho}


def _parallel_map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def write_stationary(w: TableWriter, spec: dict, dump_roots: bool = False, tag: str = "") -> dict:
    row = stationary_row(spec)
    m, sol = row["model"], row["solution"]
    summary = [("rho", row["rho"]), ("var_a", row["var_a"]), ("mean", row["mean"]),
               ("variance", row["variance"]), ("mean_mxg1", row["mean_mxg1"]),
               ("variance_mxg1", row["variance_mxg1"]),
               ("condition_number", sol.condition_number)]
    summary += [(f"f0_{i + 1}", v) for i, v in enumerate(sol.f0)]
    summary += [(f"pi_{i + 1}", v) for i, v in enumerate(m.moments.pi)]
    w.table(f"stationary{tag}", ["quantity", "value"], summary)
    z = np.round(np.linspace(0.0, 0.99, 100), 12)
    F = sol.pgf(z + 0j)[1].real
    w.table(f"pgf{tag}", ["z", "F"], zip(z, F))
    coef = sol.coefficients(PMF_TERMS)
    w.table(f"pmf{tag}", ["k", "p"], zip(range(PMF_ROWS), coef[:PMF_ROWS]))
    if dump_roots:
        write_roots(w, sol.roots, tag)
    return row


def write_roots(w: TableWriter, roots, tag: str = "") -> None:
    w.table(f"roots{tag}", ["re", "im", "multiplicity", "r"],
            [(z.real, z.imag, k, roots.r) for z, k in roots.distinct()])


def write_sweep(w: TableWriter, cfg: ScenarioConfig, jobs: int = 1) -> list[dict]:
    name, grid = cfg.sweep
    specs = [apply_parameter(cfg.model, name, float(v)) for v in grid]
    rows = _parallel_map(stationary_row, specs, jobs)
    w.table("sweep", [name, "mean", "variance", "mean_mxg1", "variance_mxg1", "var_a", "rho"],
            [(v, r["mean"], r["variance"], r["mean_mxg1"], r["variance_mxg1"], r["var_a"], r["rho"])
             for v, r in zip(grid, rows)])
    return rows


def write_epochs(w: TableWriter, spec: dict, n_rows: int = PMF_ROWS) -> None:
    sol = solve_boundary(build_model(spec))
    cols = {e: epoch_coefficients(sol, e, PMF_TERMS) for e in Epoch}
    w.table("epochs", ["k"] + [e.value for e in Epoch],
            [(k, *(cols[e][k] for e in Epoch)) for k in range(n_rows)])


def write_transient(w: TableWriter, cfg: ScenarioConfig, jobs: int = 1) -> dict[str, np.ndarray]:
    opts = cfg.transient
    n_max = int(opts.get("n_max", 200))
    x0 = int(opts.get("x0", 0))
    initial = opts.get("initial_types")
    variants = cfg.models()

    def one(item):
        key, spec = item
        m = build_model(spec)
        curve = mean_curve(m, n_max, x0=x0, initial=initial, kernel=TransitionKernel.build(m))
        stat = queue_moments(solve_boundary(m))[0] if m.rho < 1 else float("nan")
        return key, curve, stat

    results = _parallel_map(one, list(variants.items()), jobs)
    rows, summary = [], []
    for key, curve, stat in results:
        rows += [(key, n, v, b) for n, (v, b) in enumerate(zip(curve.means, curve.bias_bound))]
        summary.append((key, stat, curve.means[-1], curve.truncation, curve.lost_mass[-1]))
    w.table("transient", ["scenario", "n", "mean", "bias_bound"], rows)
    w.table("transient_summary", ["scenario", "stationary_mean", "final_mean", "K", "lost_mass"], summary)
    return {key: curve.means for key, curve, _ in results}


def write_simulation(w: TableWriter, cfg: ScenarioConfig, departures: int, seed: int,
                     replications: int | None = None) -> None:
    for key, spec in cfg.models().items():
        tag = "" if key == "base" else f"_{key}"
        m = build_model(spec)
        if replications:
            n = int(cfg.transient.get("n_max", 200))
            sim = run_transient(m, n, replications, seed, x0=int(cfg.transient.get("x0", 0)),
                                start=cfg.transient.get("initial_types"))
            w.table(f"simulation_transient{tag}", ["n", "mean", "half_width"],
                    [(k, a, b) for k, (a, b) in enumerate(zip(sim.mean, sim.half_width))])
            continue
        rep = run(m, departures, seed)
        ok, z, thr = rep.pasta_check()
        stats_rows = [("num_departures", rep.num_departures, 0), ("seed", rep.seed, 0),
                      ("mean_depart", rep.mean_depart, rep.mean_half_width),
                      ("mean_time_avg", rep.mean_time_avg, rep.mean_time_avg_half_width),
                      ("rho_hat", rep.rho_hat, 1.959963985 * rep.rho_se),
                      ("pasta_max_z", float(np.abs(z).max()), thr)]
        stats_rows += [(f"type_freq_{j + 1}", f, 1.959963985 * s)
                       for j, (f, s) in enumerate(zip(rep.type_freq, rep.type_freq_se))]
        if m.rho < 1:
            stats_rows.append(("analytic_mean", queue_moments(solve_boundary(m))[0], 0))
        w.table(f"simulation{tag}", ["quantity", "estimate", "half_width"], stats_rows)
        width = min(PMF_ROWS, rep.pmf_depart.size)
        w.table(f"simulation_pmf{tag}", ["k", "departure", "time_average", "batch_arrival"],
                [(k, rep.pmf_depart[k], rep.pmf_time_avg[k], rep.pmf_batch_arrival[k])
                 for k in range(width)])


def run_scenario(cfg: ScenarioConfig, command: str = "analyze", out: str | None = None,
                 seed: int = 0, departures: int = 1_000_000, replications: int | None = None,
                 dump_roots: bool = False, jobs: int = 1) -> TableWriter:
    """Execute ``cfg`` and write its tables plus ``manifest.json``."""
    w = TableWriter(Path(out or cfg.output), "\t" if cfg.format == "tsv" else ",")
    doc = cfg.to_dict()
    if command == "simulate" or cfg.analysis == "simulate":
        doc["simulate"] = {"departures": departures, "seed": seed, "replications": replications}
        write_simulation(w, cfg, departures, seed, replications)
    elif cfg.sweep is not None and cfg.analysis in ("sweep", "stationary"):
        write_sweep(w, cfg, jobs)
    elif cfg.analysis == "transient":
        write_transient(w, cfg, jobs)
    elif cfg.analysis == "epochs":
        write_epochs(w, cfg.model)
    else:
        for key, spec in cfg.models().items():
            write_stationary(w, spec, dump_roots, "" if key == "base" else f"_{key}")
    if dump_roots and cfg.analysis != "stationary":
        for key, spec in cfg.models().items():
            write_roots(w, find_roots(build_model(spec), 1.0), "" if key == "base" else f"_{key}")
    w.manifest(doc, command)
    return w
