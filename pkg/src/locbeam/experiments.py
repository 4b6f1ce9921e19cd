"""Experiment studies, result tables and run manifests.

Every study expands into a list of independent points.  Points run
sequentially or on a thread pool; their rows are merged in point order so
output is identical either way.  A failing point contributes a single
``error`` row with a non-ok status instead of aborting the sweep.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .algorithm import (
    RobustInputs,
    evaluate_fixed_phases,
    fixed_beam_worst_snr,
    non_robust_baseline,
    run_algorithm1,
)
from .bound import csi_error_bound, monte_carlo_bound
from .config import ExperimentConfig
from .geometry import build_bs_ris_channel, reconstruct_ris_ue_los
from .phase import argument_rounding
from .robust import PhaseSet

logger = logging.getLogger(__name__)

COLUMNS = ("sweep_key", "metric", "value", "seed", "status", "wall_ms")


@dataclass
class Row:
    sweep_key: str
    metric: str
    value: float
    seed: int
    status: str = "ok"
    wall_ms: float | None = None


@dataclass
class ResultTable:
    rows: list[Row] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    @property
    def failures(self):
        return sum(1 for r in self.rows if r.status != "ok")

    def values(self, metric):
        return {r.sweep_key: r.value for r in self.rows if r.metric == metric}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            wall = "" if r.wall_ms is None else f"{r.wall_ms:.3f}"
            w.writerow([r.sweep_key, r.metric, format(float(r.value), ".17g"), r.seed, r.status, wall])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = []
        for d in csv.DictReader(io.StringIO(text)):
            wall = float(d["wall_ms"]) if d["wall_ms"] else None
            rows.append(Row(d["sweep_key"], d["metric"], float(d["value"]), int(d["seed"]), d["status"], wall))
        return cls(rows)


@dataclass
class Point:
    key: str
    seed: int
    fn: object
    args: tuple


def _derive_seed(base, index):
    return int(np.random.SeedSequence([base, index]).generate_state(1)[0])


def _channels(cfg: ExperimentConfig, L, p_hat=None):
    g = cfg.geometry(L)
    lam = cfg.channel.wavelength
    H = build_bs_ris_channel(g, cfg.path_loss, lam)
    h = reconstruct_ris_ue_los(g, cfg.path_loss, lam, cfg.p_hat if p_hat is None else p_hat)
    return g, H, h


def _inputs(cfg, H, h, eps_dh, phase_set=None):
    return RobustInputs(
        H,
        h,
        eps_dh,
        beta=cfg.channel.beta,
        phase_set=phase_set if phase_set is not None else PhaseSet.full(),
        P_T=cfg.P_T,
        sigma_n2=cfg.sigma_n2,
        delta_bu=cfg.channel.delta_bu,
        e_bu=cfg.channel.e_bu,
        eps_R=cfg.eps_R,
        tol_bnb=cfg.tol_bnb,
        max_nodes=cfg.max_nodes,
        T=cfg.T,
    )


def _worst(cfg, inputs, theta, w):
    return fixed_beam_worst_snr(theta, w, inputs.H_br, inputs.h_ru_hat, inputs.eps_dh, inputs.effective_delta_bu, cfg.P_T, cfg.sigma_n2)


# -- per-point workers; each returns a list of (metric, value) -------------


def _bound_point(cfg, L, eps_dp, p_hat, seed):
    g = cfg.geometry(L)
    res = csi_error_bound(g, cfg.channel, cfg.path_loss, p_hat, eps_dp)
    mc = monte_carlo_bound(g, cfg.channel, cfg.path_loss, p_hat, eps_dp, trials=cfg.mc_trials, seed=seed)
    return [
        ("eps_dh_theory", res.eps_total),
        ("eps_dh_mc", mc),
        ("eps_ru_los", res.eps_ru_los),
        ("omega_upp_max", res.omega_upp_max),
    ]


def _snr_point(cfg, L, eps_dp, seed):
    g, H, h = _channels(cfg, L)
    eps_dh = csi_error_bound(g, cfg.channel, cfg.path_loss, cfg.p_hat, eps_dp).eps_total
    inputs = _inputs(cfg, H, h, eps_dh)
    out = [("eps_dh", eps_dh)]
    sdr = run_algorithm1(inputs, "sdr", seed=seed)
    out += [("snr_robust_sdr", sdr.worst_case_snr), ("snr_robust_sdr_exact", _worst(cfg, inputs, sdr.theta_opt.theta, sdr.w_opt)), ("iterations_sdr", len(sdr.iterations))]
    if cfg.phase_solver == "bnb":
        bnb = run_algorithm1(inputs, "bnb", seed=seed)
        out += [("snr_robust_bnb", bnb.worst_case_snr), ("iterations_bnb", len(bnb.iterations))]
    b1 = non_robust_baseline(inputs, seed=seed)
    out += [("snr_b1_worst", b1.worst_case_snr), ("snr_b1_nominal", b1.nominal_snr)]
    return out


def _convergence_point(cfg, L, eps_dp, run, seed):
    g, H, h = _channels(cfg, L)
    eps_dh = csi_error_bound(g, cfg.channel, cfg.path_loss, cfg.p_hat, eps_dp).eps_total
    inputs = _inputs(cfg, H, h, eps_dh, cfg.phase_set)
    init = "zero" if run == 0 else "random"
    res = run_algorithm1(inputs, cfg.phase_solver, init=init, seed=seed)
    out = [(f"objective_t{r.t:03d}", r.objective) for r in res.iterations]
    out += [(f"mu_t{r.t:03d}", r.mu) for r in res.iterations]
    out += [("iterations", len(res.iterations)), ("converged", float(res.converged)), ("snr_robust", res.worst_case_snr)]
    return out


def _restricted_point(cfg, L, eps_dp, seed):
    g, H, h = _channels(cfg, L)
    eps_dh = csi_error_bound(g, cfg.channel, cfg.path_loss, cfg.p_hat, eps_dp).eps_total
    full_inputs = _inputs(cfg, H, h, eps_dh)
    full = run_algorithm1(full_inputs, "sdr", seed=seed)
    out = [("snr_full", full.worst_case_snr)]
    for lo, hi in cfg.restricted_sets:
        ps = PhaseSet.interval(lo, hi)
        tag = f"[{lo:.4g},{hi:.4g}]"
        inputs = _inputs(cfg, H, h, eps_dh, ps)
        bnb = run_algorithm1(inputs, "bnb", seed=seed)
        rounded = argument_rounding(full.theta_opt.theta, ps, cfg.channel.beta)
        rr = evaluate_fixed_phases(inputs, rounded.theta)
        out += [(f"snr_bnb{tag}", bnb.worst_case_snr), (f"snr_rounded{tag}", rr.worst_case_snr)]
    return out


def _points(cfg: ExperimentConfig, seed):
    pts = []

    def add(key, fn, *args):
        s = _derive_seed(seed, len(pts))
        pts.append(Point(key, s, fn, args))

    kind = cfg.kind
    if kind == "bound_sweep":
        for L in cfg.L_list:
            for e in cfg.eps_dp_list:
                add(f"N={L * L};eps_dp={e:g}", _bound_point, L, e, cfg.p_hat)
    elif kind == "bound_vs_position":
        axis = "xyz".index(cfg.position_axis)
        for v in cfg.position_values:
            p = list(cfg.p_hat)
            p[axis] = v
            for L in cfg.L_list:
                for e in cfg.eps_dp_list:
                    add(f"{cfg.position_axis}={v:g};N={L * L};eps_dp={e:g}", _bound_point, L, e, tuple(p))
    elif kind == "snr_vs_N":
        for e in cfg.eps_dp_list:
            for L in cfg.L_list:
                add(f"eps_dp={e:g};N={L * L}", _snr_point, L, e)
    elif kind == "snr_vs_eps":
        for L in cfg.L_list:
            for e in cfg.eps_dp_list:
                add(f"N={L * L};eps_dp={e:g}", _snr_point, L, e)
    elif kind == "convergence":
        for L in cfg.L_list:
            for e in cfg.eps_dp_list:
                for r in range(cfg.runs):
                    add(f"N={L * L};eps_dp={e:g};run={r}", _convergence_point, L, e, r)
    elif kind == "restricted_set":
        for L in cfg.L_list:
            for e in cfg.eps_dp_list:
                add(f"N={L * L};eps_dp={e:g}", _restricted_point, L, e)
    else:
        raise ValueError(f"unknown experiment kind {kind!r}")
    return pts


def _execute(cfg, point: Point, timing):
    t0 = time.perf_counter()
    try:
        pairs = point.fn(cfg, *point.args, point.seed)
        status = "ok"
    except Exception as exc:  # noqa: BLE001 - recorded per point, sweep continues
        logger.warning("point %s failed: %s", point.key, exc)
        pairs = [("error", float("nan"))]
        status = f"failed:{type(exc).__name__}"
    wall = (time.perf_counter() - t0) * 1e3 if timing else None
    return [Row(point.key, m, float(v), point.seed, status, wall) for m, v in pairs]


def run_experiment(cfg: ExperimentConfig, seed=None, jobs=1, timing=False) -> ResultTable:
    """Run the study selected by ``cfg.kind`` and return its table.

    ``wall_ms`` is left empty unless ``timing`` is set, so that tables for
    the same config and seed are byte-identical.
    """
    seed = cfg.seed if seed is None else int(seed)
    pts = _points(cfg, seed)
    if jobs > 1 and len(pts) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(lambda p: _execute(cfg, p, timing), pts))
    else:
        chunks = [_execute(cfg, p, timing) for p in pts]
    return ResultTable([r for c in chunks for r in c])


def make_manifest(cfg: ExperimentConfig, seed, table: ResultTable, csv_name):
    doc = cfg.to_dict()
    doc.setdefault("solver", {})["seed"] = int(seed)
    return {
        "kind": "run_manifest",
        "experiment": cfg.kind,
        "config": doc,
        "seed": int(seed),
        "rows": len(table),
        "failures": table.failures,
        "csv": csv_name,
        "versions": {
            "locbeam": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
    }


def write_outputs(cfg: ExperimentConfig, table: ResultTable, out_dir, seed, stem=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = stem or cfg.kind
    csv_path = out / f"{stem}.csv"
    csv_path.write_text(table.to_csv())
    man_path = out / f"{stem}_manifest.json"
    man_path.write_text(json.dumps(make_manifest(cfg, seed, table, csv_path.name), indent=2, sort_keys=True) + "\n")
    return csv_path, man_path
