"""Compose kernel policy, estimator, dynamics and target into one seeded run."""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .. import dynamics as dyn
from ..errors import NonFiniteError, ParviError
from ..fields import ESTIMATORS, default_gfsf_reg, svgd_field
from ..kernel import BandwidthPolicy, KernelConfig, median_bandwidth
from ..targets import BlrModel, Dataset, TargetModel, blr_metrics, gaussian_target, load_dataset
from ..targets import synthetic_logistic_data, toy_bimodal_target
from .config import RunConfig
from .diagnostics import gaussian_w2_proxy, mean_nn_distance, mode_balance

log = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_BLOWUP = "blowup"


@dataclass
class RunResult:
    status: str
    final: np.ndarray
    metrics: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


@dataclass
class Problem:
    """A target plus the evaluation hook used for metric records."""

    target: TargetModel
    evaluate: callable
    init_prior: callable = None


def _vec(values, dim):
    arr = np.asarray(values, dtype=float)
    return np.full(dim, arr[0]) if arr.size == 1 else arr


def build_problem(cfg: RunConfig, rng: np.random.Generator) -> Problem:
    if cfg.target == "gaussian":
        mean = _vec(cfg.target_mean, cfg.target_dim)
        cov = np.diag(_vec(cfg.target_var, cfg.target_dim))
        target = gaussian_target(mean, cov)

        def evaluate(x):
            w2, jittered = gaussian_w2_proxy(x, mean, cov, return_flag=True) if x.shape[0] > x.shape[1] else (None, False)
            out = {"w2": w2}
            if jittered:
                out["w2_jittered"] = True
            return out

        return Problem(target, evaluate)

    if cfg.target == "toy_bimodal":
        return Problem(
            toy_bimodal_target(),
            lambda x: {"mode_balance": mode_balance(x), "nn_dist": mean_nn_distance(x)},
        )

    base = cfg.resolved.get("base_dir") or ""
    if cfg.dataset == "synthetic":
        data_rng = np.random.default_rng(cfg.split_seed)
        feats, labels, _ = synthetic_logistic_data(cfg.synthetic_n, cfg.synthetic_d, data_rng)
        feats = np.column_stack([feats, np.ones(len(labels))])
        perm = data_rng.permutation(len(labels))
        n_train = int(round(cfg.train_fraction * len(labels)))
        train = Dataset(feats[perm[:n_train]], labels[perm[:n_train]])
        test = Dataset(feats[perm[n_train:]], labels[perm[n_train:]])
    else:
        path = cfg.dataset if os.path.isabs(cfg.dataset) else os.path.join(base, cfg.dataset)
        train, test = load_dataset(path, cfg.split_seed, cfg.train_fraction, skip_header=cfg.dataset_header)
    model = BlrModel(train.features, train.labels, a0=cfg.a0, b0=cfg.b0, batch_size=cfg.batch_size)

    def evaluate(x):
        acc, ll = blr_metrics(x, test)
        return {"accuracy": acc, "log_lik": ll}

    return Problem(model.target(rng), evaluate, init_prior=model.sample_prior)


def initial_particles(cfg: RunConfig, problem: Problem, rng: np.random.Generator) -> np.ndarray:
    if cfg.init == "prior":
        return problem.init_prior(cfg.n_particles, rng)
    dim = problem.target.dim
    mean = _vec(cfg.init_mean, dim)
    return mean + cfg.init_std * rng.standard_normal((cfg.n_particles, dim))


def make_field_fn(cfg: RunConfig, grad_log_p):
    """Return ``field(points, h)`` for the configured estimator."""
    if cfg.estimator == "svgd":
        if not cfg.svgd_unit_kernel:
            return lambda x, h: svgd_field(x, grad_log_p, h)
        # unit-peak kernel K(x, x) = 1
        return lambda x, h: svgd_field(x, grad_log_p, h) * (2.0 * math.pi * h) ** (x.shape[1] / 2.0)
    if cfg.estimator == "gfsf":
        fn = ESTIMATORS["gfsf"]
        if cfg.gfsf_reg_mode == "relative":
            return lambda x, h: fn(x, grad_log_p, h, default_gfsf_reg(h, x.shape[1], cfg.gfsf_reg))
        return lambda x, h: fn(x, grad_log_p, h, cfg.gfsf_reg)
    fn = ESTIMATORS[cfg.estimator]
    return lambda x, h: fn(x, grad_log_p, h)


def _json_value(v):
    # strict JSON has no NaN/Infinity
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    return v


def _fmt(v):
    return repr(float(v))


def write_snapshot(path, x):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in x:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def run_experiment(cfg: RunConfig, target: TargetModel | None = None, write: bool = True) -> RunResult:
    """Run one configured simulation.

    ``target`` overrides the configured target's gradient oracle (the
    configured evaluation metrics are kept).  With ``write`` the run writes
    ``metrics.jsonl``, ``snap_{iter}.csv``, ``final.csv`` and ``run.json``
    into ``cfg.output_dir``.  A non-finite particle or field stops the run
    with status ``"blowup"``; outputs written so far stay valid.
    """
    init_ss, dyn_ss, batch_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    init_rng = np.random.default_rng(init_ss)
    problem = build_problem(cfg, np.random.default_rng(batch_ss))
    if target is not None:
        problem = Problem(target, problem.evaluate, problem.init_prior)
    x0 = initial_particles(cfg, problem, init_rng)

    params = cfg.accel_params()
    state = dyn.init_state(x0, params, rng=np.random.default_rng(dyn_ss))
    h0 = cfg.h0 if cfg.h0 is not None else median_bandwidth(x0)
    kcfg = KernelConfig(
        bandwidth=h0,
        policy=BandwidthPolicy(cfg.bandwidth),
        he_trust_ratio=cfg.he_trust_ratio,
        he_probe_delta=cfg.he_probe_delta,
    )
    field_at = make_field_fn(cfg, problem.target.grad_log_p)
    last_norm = [None]

    def field_fn(points):
        h = kcfg.update(points)
        v = field_at(points, h)
        last_norm[0] = float(np.mean(np.linalg.norm(v, axis=1))) if np.all(np.isfinite(v)) else None
        return v

    out_dir = cfg.output_dir
    metrics_fh = None
    if write:
        os.makedirs(out_dir, exist_ok=True)
        metrics_fh = open(os.path.join(out_dir, "metrics.jsonl"), "w", encoding="utf-8", newline="\n")

    result = RunResult(status=STATUS_OK, final=x0)
    t_start = time.perf_counter()

    def record(k, x):
        rec = {"iter": k, "h": _json_value(kcfg.bandwidth), "field_norm": _json_value(last_norm[0])}
        with np.errstate(all="ignore"):
            rec.update({k: _json_value(v) for k, v in problem.evaluate(x).items()})
        rec["wall_ms"] = round(1e3 * (time.perf_counter() - t_start), 3) if cfg.record_wall_clock else None
        result.metrics.append(rec)
        if metrics_fh is not None:
            metrics_fh.write(json.dumps(rec, allow_nan=False) + "\n")
            metrics_fh.flush()

    def snapshot(k, x):
        result.snapshots[k] = x.copy()
        if write:
            write_snapshot(os.path.join(out_dir, f"snap_{k}.csv"), x)

    try:
        record(0, state.x)
        snapshot(0, state.x)
        for _ in range(cfg.n_iterations):
            state = dyn.step(state, field_fn, params)
            k = state.k
            if k % cfg.metrics_stride == 0:
                record(k, state.x)
            if k % cfg.snapshot_stride == 0:
                snapshot(k, state.x)
    except (NonFiniteError, FloatingPointError) as exc:
        result.status = STATUS_BLOWUP
        result.message = str(exc)
        log.warning("run halted: %s", exc)
    except ParviError as exc:
        # e.g. a singular GFSF system mid-run: numerical failure, not a config error
        result.status = STATUS_BLOWUP
        result.message = f"{type(exc).__name__}: {exc}"
        log.warning("run halted: %s", result.message)
    finally:
        result.final = state.x
        if metrics_fh is not None:
            metrics_fh.close()
    if write:
        write_snapshot(os.path.join(out_dir, "final.csv"), state.x)
        meta = {
            "status": result.status,
            "message": result.message,
            "iterations_completed": state.k,
            "seed": cfg.seed,
            "resolved": {k: v for k, v in cfg.resolved.items() if k != "base_dir"},
            "config": cfg.to_dict(),
        }
        with open(os.path.join(out_dir, "run.json"), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return result
