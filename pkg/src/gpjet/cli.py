"""
Command-line runner for the experiment recipes.

``gpjet <experiment> [--config PATH] [--seed N] [--seeds A..B] [--plot] [--out DIR]``

Each run writes ``result.json`` (deterministic for a given config and
seed), ``trace.csv`` and, with ``--plot``, ``plot.svg`` to the output
directory.  Wall-clock timings go to ``timing.json`` so that the result
file stays byte-identical across reruns.  Exit codes: 0 success, 2
configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import gp_core, metrology, multi_fidelity, planner
from .errors import ConfigError, DegenerateDataWarning, GPJetError, UnstableRegime
from .physics_jet import DimensionlessGroups, RadiusProfile, default_pcl_groups
from .plot import PlotTrace, emit_plot
from .virtual_machine import MachineConfig, VirtualMachine

EXPERIMENTS = ("fig5a", "fig5b", "fig5c", "fig5d", "fig6a", "fig6b", "fig7", "fig8", "fig9",
               "metrology-bench")

N_RADIUS_GRID = 93
N_RATIO_GRID = 50
RATIO_RANGE = (0.1, 15.0)
N_LOW = 32
TAYLOR_CONE = 2.0

# indices into the 32-point low-fidelity grid (spacing chi / 31)
HF_DESIGN_6 = (4, 9, 15, 20, 26, 31)
HF_TAYLOR_INDEX = 2


def radius_grid(chi: float, n: int = N_RADIUS_GRID) -> np.ndarray:
    return np.linspace(0.0, chi, n)


def ratio_grid(n: int = N_RATIO_GRID, lo: float = RATIO_RANGE[0],
               hi: float = RATIO_RANGE[1]) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), n)


def hf_design(chi: float, taylor_point: bool) -> np.ndarray:
    """High-fidelity inputs on the low-fidelity grid; optionally one at z < 2."""
    zl = np.linspace(0.0, chi, N_LOW)
    idx = list(HF_DESIGN_6) + ([HF_TAYLOR_INDEX] if taylor_point else [])
    return zl[np.sort(idx)]


# ---------------------------------------------------------------------------
# configuration

_COMMON_KEYS = {"seed", "machine", "groups", "out"}
_OPTION_KEYS = {
    "fig5a": {"n_obs"},
    "fig5b": {"n_obs"},
    "fig5c": {"n_obs"},
    "fig5d": set(),
    "fig6a": {"n_low"},
    "fig6b": {"n_low"},
    "fig7": {"max_iter", "init", "train"},
    "fig8": {"max_iter", "init", "acquisition"},
    "fig9": {"max_evals", "init", "acquisition"},
    "metrology-bench": {"n_frames", "stride", "workers", "cf", "width", "height",
                        "lag_max_mm", "hd_frames"},
}


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    machine: dict = field(default_factory=dict)
    groups: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    @classmethod
    def build(cls, experiment: str, data: dict | None = None, seed: int | None = None):
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {experiment!r}")
        data = dict(data or {})
        data.pop("experiment", None)
        data.pop("out", None)
        allowed = _COMMON_KEYS | _OPTION_KEYS[experiment]
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys for {experiment}: {sorted(unknown)}")
        s = data.pop("seed", 0) if seed is None else seed
        data.pop("seed", None)
        if not isinstance(s, int) or isinstance(s, bool) or s < 0:
            raise ConfigError("seed must be a non-negative integer")
        machine = data.pop("machine", {}) or {}
        groups = data.pop("groups", {}) or {}
        if not isinstance(machine, dict) or not isinstance(groups, dict):
            raise ConfigError("machine and groups must be JSON objects")
        cfg = cls(experiment, s, machine, groups, data)
        cfg.virtual_machine()  # validate overrides early
        return cfg

    def virtual_machine(self) -> VirtualMachine:
        try:
            mc = MachineConfig.from_mapping(self.machine)
            g = DimensionlessGroups.from_mapping(self.groups, base=default_pcl_groups())
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return VirtualMachine(mc, g)

    def opt(self, key, default, kind=None):
        v = self.options.get(key, default)
        if kind is not None:
            try:
                v = kind(v)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {v!r}") from exc
        return v


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


# ---------------------------------------------------------------------------
# outputs


@dataclass
class Outcome:
    result: dict
    trace_header: list[str]
    trace_rows: list[list]
    plot: PlotTrace | None = None
    plot_log_x: bool = False
    extra_files: dict[str, str] = field(default_factory=dict)
    timing: dict = field(default_factory=dict)


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def _rmse(a, b, mask=None) -> float:
    d = np.asarray(a) - np.asarray(b)
    if mask is not None:
        d = d[mask]
    return float(np.sqrt(np.mean(d**2)))


# ---------------------------------------------------------------------------
# recipes


def _fig5_radius(cfg: ExperimentConfig, default_n: int) -> Outcome:
    vm = cfg.virtual_machine()
    n = cfg.opt("n_obs", default_n, int)
    if n < 2:
        raise ConfigError("n_obs must be >= 2")
    grid = radius_grid(vm.chi)
    truth = vm.radius_truth(grid)
    z, y = vm.observe_radius(np.linspace(0.0, vm.chi, n), seed=cfg.seed)
    model = gp_core.fit(z, y, seed=cfg.seed, domain=(0.0, vm.chi))
    mu, var = gp_core.predict(model, grid)
    sd = np.sqrt(var)
    m = planner.metrics(model, grid, truth)
    result = {"experiment": cfg.experiment, "seed": cfg.seed, "n_obs": n, "rmse": m["rmse"],
              "mciw": m["mciw"], "model": model.summary(),
              "observations": {"z": z, "R": y}}
    rows = [[a, b, c, d] for a, b, c, d in zip(grid, truth, mu, sd)]
    return Outcome(result, ["z_over_R0", "truth", "mean", "std"], rows,
                   PlotTrace(grid, mu, sd, z, y, f"{cfg.experiment} radius GP, n={n}"))


def _stable_settings(vm: VirtualMachine):
    ratios = vm.setting_ratios()
    ids = np.arange(1, len(ratios) + 1)
    stable = ratios >= 1.0
    order = np.argsort(ratios[stable])
    return ids[stable][order], ratios[stable][order], ids[~stable], ratios[~stable]


def _fig5_lag(cfg: ExperimentConfig, use_all: bool) -> Outcome:
    vm = cfg.virtual_machine()
    ids, ratios, bad_ids, bad_ratios = _stable_settings(vm)
    if use_all:
        pick = np.arange(len(ratios))
        n = len(ratios) + len(bad_ids)
    else:
        n = cfg.opt("n_obs", 3, int)
        if not 2 <= n <= len(ratios):
            raise ConfigError(f"n_obs must lie in [2, {len(ratios)}]")
        pick = np.unique(np.round(np.linspace(0, len(ratios) - 1, n)).astype(int))
    failures = []
    if use_all:
        for i, r in zip(bad_ids, bad_ratios):
            try:
                vm.observe_lag(float(r), seed=cfg.seed)
            except UnstableRegime:
                failures.append({"setting": int(i), "ratio": float(r)})
    x = ratios[pick]
    y = np.array([vm.observe_lag(float(r), seed=cfg.seed) for r in x])
    grid = ratio_grid()
    grid = grid[grid >= 1.0]
    truth = vm.lag_truth(grid)
    sur = planner.GPSurrogate((1.0, vm.config.ratio_max), log_inputs=True, seed=cfg.seed)
    model = sur.fit(x, y)
    mu, var = model.predict(np.log(grid))
    sd = np.sqrt(var)
    m = planner.metrics(model, grid, truth, transform=np.log)
    result = {"experiment": cfg.experiment, "seed": cfg.seed, "n_requested": int(n),
              "n_obs": int(len(x)), "settings": ids[pick], "rmse": m["rmse"],
              "mciw": m["mciw"], "model": model.summary(), "unstable_settings": failures,
              "observations": {"ratio": x, "lag_mm": y}}
    rows = [[a, b, c, d] for a, b, c, d in zip(grid, truth, mu, sd)]
    return Outcome(result, ["ratio", "truth_mm", "mean_mm", "std_mm"], rows,
                   PlotTrace(grid, mu, sd, x, y, f"{cfg.experiment} lag GP, n={len(x)}"),
                   plot_log_x=True)


def _fig6(cfg: ExperimentConfig, taylor_point: bool) -> Outcome:
    vm = cfg.virtual_machine()
    n_low = cfg.opt("n_low", N_LOW, int)
    if n_low != N_LOW:
        raise ConfigError(f"the high-fidelity design is defined on the {N_LOW}-point grid")
    chi = vm.chi
    grid = radius_grid(chi)
    truth = vm.radius_truth(grid)
    zl = np.linspace(0.0, chi, n_low)
    yl = vm.low_fidelity_radius(zl)
    zh, yh = vm.observe_radius(hf_design(chi, taylor_point), seed=cfg.seed)
    mf = multi_fidelity.fit_mf(zl, yl, zh, yh, seed=cfg.seed, domain=(0.0, chi))
    gp = gp_core.fit(zh, yh, seed=cfg.seed, domain=(0.0, chi))
    mu_mf, var_mf = mf.predict(grid)
    mu_gp, var_gp = gp.predict(grid)
    cone = grid < TAYLOR_CONE
    result = {
        "experiment": cfg.experiment, "seed": cfg.seed, "n_high": int(len(zh)),
        "n_low": n_low, "rmse_mf": _rmse(mu_mf, truth), "rmse_gp": _rmse(mu_gp, truth),
        "rmse_mf_taylor_cone": _rmse(mu_mf, truth, cone),
        "rmse_mf_outside_cone": _rmse(mu_mf, truth, ~cone),
        "mf": mf.summary(), "gp": gp.summary(),
        "observations": {"z": zh, "R": yh},
    }
    rows = [list(r) for r in zip(grid, truth, mu_mf, np.sqrt(var_mf), mu_gp, np.sqrt(var_gp))]
    return Outcome(result, ["z_over_R0", "truth", "mf_mean", "mf_std", "gp_mean", "gp_std"],
                   rows, PlotTrace(grid, mu_mf, np.sqrt(var_mf), zh, yh,
                                   f"{cfg.experiment} multi-fidelity GP, n_high={len(zh)}"))


def radius_oracle(vm: VirtualMachine, seed: int, grid) -> Callable[[float], float]:
    """Noisy radius at one grid point; the noise draw depends on seed and point."""
    grid = np.asarray(grid)

    def oracle(z: float) -> float:
        k = int(np.argmin(np.abs(grid - z)))
        return float(vm.observe_radius([z], seed=seed * 1000 + k)[1][0])
    return oracle


def fig7_records(vm: VirtualMachine, seed: int, max_iter: int = 6, init=None,
                 train: str = "initial"):
    """Paired active-learning runs (plain GP, multi-fidelity GP) from the same start."""
    chi = vm.chi
    grid = radius_grid(chi)
    truth = vm.radius_truth(grid)
    init = [0.0, chi] if init is None else init
    oracle = radius_oracle(vm, seed, grid)
    gp_sur = planner.GPSurrogate((0.0, chi), seed=seed, train=train)
    mf_sur = planner.MFSurrogate((0.0, chi), vm.low_fidelity_radius,
                                 np.linspace(0.0, chi, N_LOW), seed=seed, train=train)
    out = {}
    for name, sur in (("gp", gp_sur), ("mf", mf_sur)):
        out[name] = planner.run_active_learning(oracle, grid, sur, init=init,
                                                max_iter=max_iter, mciw_floor=0.0,
                                                eval_grid=grid, truth=truth, seed=seed)
    return out, (gp_sur, mf_sur)


def _record_summary(rec: planner.RunRecord) -> dict:
    return {"initial_x": rec.initial_x, "initial_y": rec.initial_y,
            "x": [r.x for r in rec.acquisitions], "y": [r.y for r in rec.acquisitions],
            "rmse": [r.rmse for r in rec.iterations], "mciw": [r.mciw for r in rec.iterations],
            "final_rmse": rec.iterations[-1].rmse if rec.iterations else None,
            "final_mciw": rec.iterations[-1].mciw if rec.iterations else None,
            "aborted": rec.aborted}


def _trace_rows(name, rec):
    return [[name, r.iter, r.x, r.y, _opt(r.rmse), _opt(r.mciw), _opt(r.min_regret)]
            for r in rec.iterations]


def _opt(v):
    return "" if v is None else float(v)


def _fig7(cfg: ExperimentConfig) -> Outcome:
    vm = cfg.virtual_machine()
    train = cfg.opt("train", "initial", str)
    if train not in ("every", "initial"):
        raise ConfigError("train must be 'every' or 'initial'")
    recs, (_, mf_sur) = fig7_records(vm, cfg.seed, cfg.opt("max_iter", 6, int),
                                     cfg.options.get("init"), train)
    result = {"experiment": "fig7", "seed": cfg.seed,
              "gp": _record_summary(recs["gp"]), "mf": _record_summary(recs["mf"])}
    rows = _trace_rows("gp", recs["gp"]) + _trace_rows("mf", recs["mf"])
    grid = radius_grid(vm.chi)
    mf = recs["mf"]
    xs = np.array(mf.initial_x + [r.x for r in mf.acquisitions])
    ys = np.array(mf.initial_y + [r.y for r in mf.acquisitions])
    model = mf_sur.fit(xs, ys)
    mu, var = model.predict(grid)
    files = {"run_gp.jsonl": recs["gp"].to_jsonl(), "run_mf.jsonl": recs["mf"].to_jsonl()}
    return Outcome(result, ["model", "iter", "x", "y", "rmse", "mciw", "min_regret"], rows,
                   PlotTrace(grid, mu, np.sqrt(var), xs, ys, "fig7 active learning, MF-GP"),
                   extra_files=files)


def _acq_spec(cfg, default):
    a = cfg.options.get("acquisition", {"kind": default})
    if isinstance(a, str):
        a = {"kind": a}
    try:
        return planner.AcquisitionSpec(**a)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad acquisition: {exc}") from exc


def fig8_record(vm: VirtualMachine, seed: int, max_iter: int = 4, init=None, spec=None):
    grid = ratio_grid()
    stable = grid[grid >= 1.0]
    truth = vm.lag_truth(stable)
    sur = planner.GPSurrogate((1.0, vm.config.ratio_max), log_inputs=True, seed=seed)
    rec = planner.run_active_learning(lambda r: vm.observe_lag(r, seed=seed), stable, sur,
                                      spec or planner.AcquisitionSpec("variance"),
                                      init=[5.0] if init is None else init,
                                      max_iter=max_iter, mciw_floor=0.0, eval_grid=stable,
                                      truth=truth, seed=seed)
    return rec, sur


def fig9_record(vm: VirtualMachine, seed: int, max_evals: int = 3, init=None, spec=None):
    """EI minimization of the lag over the full ratio grid from ratio 5."""
    grid = ratio_grid()
    stable = grid[grid >= 1.0]
    truth = vm.lag_truth(stable)
    i = int(np.argmin(truth))
    sur = planner.GPSurrogate(RATIO_RANGE, log_inputs=True, seed=seed)
    rec = planner.run_bayesian_optimization(
        lambda r: vm.observe_lag(r, seed=seed), grid, sur,
        spec or planner.AcquisitionSpec("ei"), init=[5.0] if init is None else init,
        max_evals=max_evals, eval_grid=stable, truth=truth, truth_fn=vm.lag_truth,
        true_opt=float(truth[i]), seed=seed)
    return rec, sur, float(stable[i]), float(truth[i])


def _lag_plot(sur, rec, grid, title):
    ok = [(r.x, r.y) for r in rec.acquisitions if not r.failed]
    xs = np.array(rec.initial_x + [a for a, _ in ok])
    ys = np.array(rec.initial_y + [b for _, b in ok])
    model = sur.fit(xs, ys)
    mu, var = model.predict(np.log(grid))
    return PlotTrace(grid, mu, np.sqrt(var), xs, ys, title)


def _fig8(cfg: ExperimentConfig) -> Outcome:
    vm = cfg.virtual_machine()
    rec, sur = fig8_record(vm, cfg.seed, cfg.opt("max_iter", 4, int), cfg.options.get("init"),
                           _acq_spec(cfg, "variance"))
    result = {"experiment": "fig8", "seed": cfg.seed, **_record_summary(rec)}
    grid = ratio_grid()
    grid = grid[grid >= 1.0]
    return Outcome(result, ["model", "iter", "x", "y", "rmse", "mciw", "min_regret"],
                   _trace_rows("gp", rec), _lag_plot(sur, rec, grid, "fig8 lag active learning"),
                   plot_log_x=True, extra_files={"run.jsonl": rec.to_jsonl()})


def _fig9(cfg: ExperimentConfig) -> Outcome:
    vm = cfg.virtual_machine()
    spec = _acq_spec(cfg, "ei")
    if spec.kind not in ("ei", "lcb"):
        raise ConfigError("fig9 takes an 'ei' or 'lcb' acquisition")
    rec, sur, x_opt, f_opt = fig9_record(vm, cfg.seed, cfg.opt("max_evals", 3, int),
                                         cfg.options.get("init"), spec)
    ok = [r for r in rec.iterations if not r.failed]
    result = {
        "experiment": "fig9", "seed": cfg.seed, "best_ratio": rec.best_x, "best_lag": rec.best_y,
        "true_minimizer": x_opt, "true_min_lag": f_opt,
        "regret": [r.min_regret for r in ok],
        "n_successful": rec.n_successful,
        "n_failed": sum(r.failed for r in rec.iterations),
        "failed_ratios": [r.x for r in rec.iterations if r.failed],
        "evaluated": [{"ratio": x, "lag_mm": y} for x, y in
                      zip(rec.initial_x + [r.x for r in rec.acquisitions if not r.failed],
                          rec.initial_y + [r.y for r in rec.acquisitions if not r.failed])],
    }
    grid = ratio_grid()
    return Outcome(result, ["model", "iter", "x", "y", "rmse", "mciw", "min_regret"],
                   _trace_rows("gp", rec), _lag_plot(sur, rec, grid, "fig9 lag minimization"),
                   plot_log_x=True, extra_files={"run.jsonl": rec.to_jsonl()})


def bench_frames(vm: VirtualMachine, n_frames: int, cf: float = 0.005, width: int = 640,
                 height: int = 480, lag_max_mm: float = 1.0):
    """Jitter-free frames with the lag swept linearly from 0 to ``lag_max_mm``."""
    sol_profile = RadiusProfile(radius_grid(vm.chi), vm.low_fidelity_radius(radius_grid(vm.chi)))
    lags = np.linspace(0.0, lag_max_mm, n_frames) if n_frames > 1 else np.zeros(n_frames)
    collector = height - max(4, height // 24)
    frames = [metrology.render_synthetic_frame(sol_profile, float(L), cf=cf, width=width,
                                               height=height, nozzle_x=width // 2,
                                               collector_row=collector)
              for L in lags]
    return frames, lags, sol_profile


def _metrology_bench(cfg: ExperimentConfig) -> Outcome:
    vm = cfg.virtual_machine()
    n = cfg.opt("n_frames", 100, int)
    stride = cfg.opt("stride", metrology.DEFAULT_STRIDE, int)
    if n < 1 or stride < 1:
        raise ConfigError("n_frames and stride must be >= 1")
    workers = cfg.opt("workers", metrology.default_workers(), int)
    cf = cfg.opt("cf", 0.005, float)
    frames, lags, profile = bench_frames(vm, n, cf, cfg.opt("width", 640, int),
                                         cfg.opt("height", 480, int),
                                         cfg.opt("lag_max_mm", 1.0, float))
    feats, _ = metrology.process_stream(frames, stride, workers, "parallel")
    f0 = frames[0]
    R0_mm = f0.collector_row * cf / profile.chi
    rows = feats[0].rows
    true_d = 2 * profile(rows * cf / R0_mm) * R0_mm
    d_err = max(float(np.max(np.abs(f.diameter - true_d))) for f in feats)
    lag_err = max(abs(f.lag - L) for f, L in zip(feats, lags))
    vel = [float(metrology.jet_velocity(a, b, cf, f0.fps)[-1]) for a, b in zip(feats, feats[1:])]
    timing = metrology.throughput_report(frames, stride, workers)
    hd = cfg.opt("hd_frames", 5, int)
    if hd > 0:
        hd_frames, _, _ = bench_frames(vm, hd, cf=0.002, width=1920, height=1080)
        _, rep = metrology.process_stream(hd_frames, stride, workers, "parallel")
        timing["hd_1080p"] = rep.to_dict()
    result = {
        "experiment": "metrology-bench", "seed": cfg.seed, "n_frames": n, "stride": stride,
        "cf": cf, "max_diameter_error_mm": d_err, "max_lag_error_mm": lag_err,
        "within_one_pixel": bool(d_err <= cf + 1e-12 and lag_err <= cf + 1e-12),
        "mean_bottom_velocity_mm_s": float(np.mean(vel)) if vel else 0.0,
    }
    frame_rows = [[k, f.lag] for k, f in enumerate(feats)]
    return Outcome(result, ["frame", "lag_mm"], frame_rows,
                   extra_files={"features.csv": metrology.features_csv(feats)}, timing=timing)


RECIPES: dict[str, Callable[[ExperimentConfig], Outcome]] = {
    "fig5a": lambda c: _fig5_radius(c, 5),
    "fig5b": lambda c: _fig5_radius(c, 10),
    "fig5c": lambda c: _fig5_lag(c, use_all=False),
    "fig5d": lambda c: _fig5_lag(c, use_all=True),
    "fig6a": lambda c: _fig6(c, taylor_point=False),
    "fig6b": lambda c: _fig6(c, taylor_point=True),
    "fig7": _fig7,
    "fig8": _fig8,
    "fig9": _fig9,
    "metrology-bench": _metrology_bench,
}


def run(cfg: ExperimentConfig, out: Path, plot: bool = False) -> Outcome:
    """Run one recipe and write its artifacts to ``out``."""
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateDataWarning)
        outcome = RECIPES[cfg.experiment](cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "result.json").write_text(
        json.dumps(_clean(outcome.result), indent=2, sort_keys=True) + "\n")
    (out / "trace.csv").write_text(_csv(outcome.trace_header, outcome.trace_rows))
    for name, text in outcome.extra_files.items():
        (out / name).write_text(text)
    if plot and outcome.plot is not None:
        (out / "plot.svg").write_text(emit_plot(outcome.plot, cfg.experiment,
                                                log_x=outcome.plot_log_x))
    timing = dict(outcome.timing, wall_time_s=time.perf_counter() - t0)
    (out / "timing.json").write_text(json.dumps(_clean(timing), indent=2, sort_keys=True) + "\n")
    return outcome


def _parse_seeds(text: str) -> list[int]:
    m = re.fullmatch(r"(\d+)\.\.(\d+)", text.strip())
    if not m or int(m.group(2)) < int(m.group(1)):
        raise ConfigError(f"--seeds expects A..B with A <= B, got {text!r}")
    return list(range(int(m.group(1)), int(m.group(2)) + 1))


def _run_one(args):
    cfg, out, plot = args
    run(cfg, out, plot)
    return cfg.seed


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpjet", description="Run a jet-learning experiment.")
    p.add_argument("experiment", help=f"one of: {', '.join(EXPERIMENTS)}")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    p.add_argument("--seeds", help="seed sweep A..B, run concurrently")
    p.add_argument("--plot", action="store_true", help="also write plot.svg")
    p.add_argument("--out", help="output directory (default: results/<experiment>)")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {args.experiment!r}; "
                              f"choose from {', '.join(EXPERIMENTS)}")
        data = load_config(args.config)
        out = Path(args.out or data.get("out") or Path("results") / args.experiment)
        if args.seeds:
            seeds = _parse_seeds(args.seeds)
            jobs = [(ExperimentConfig.build(args.experiment, data, s), out / f"seed_{s}",
                     args.plot) for s in seeds]
        else:
            jobs = [(ExperimentConfig.build(args.experiment, data, args.seed), out, args.plot)]
    except ConfigError as exc:
        print(f"gpjet: config error: {exc}", file=sys.stderr)
        return 2
    try:
        if len(jobs) == 1:
            _run_one(jobs[0])
        else:
            workers = min(len(jobs), int(os.environ.get("GPJET_THREADS", 0)) or os.cpu_count()
                          or 1)
            with ProcessPoolExecutor(max_workers=workers) as pool:
                list(pool.map(_run_one, jobs))
    except ConfigError as exc:
        print(f"gpjet: config error: {exc}", file=sys.stderr)
        return 2
    except (GPJetError, ValueError, ArithmeticError, OSError) as exc:
        print(f"gpjet: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
