"""Experiment definitions, configuration, seeding, and output plumbing.

Each experiment is a pure function of an ``ExperimentConfig``: the config
and its base seed fully determine every output byte.  Seeding uses
``np.random.default_rng`` with integer-list keys ``[seed, stream, ...]``
so repeats and conditions get independent, reproducible streams no
matter how work is distributed.  Repeats run on a process pool capped by
the ``LOGBANDIT_THREADS`` environment variable (default: hardware
parallelism); results are merged in task order, so the pool size never
changes the output.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import figures, results
from .bandit import Environment, baseline_policy, run_homer
from .core import ArmSet, mudot
from .design import g_optimal, h_optimal, naive_warmup_design
from .errors import ConfigError
from .glm import exact_bias_1d, warmup_check
from .warmup import (
    WarParams,
    naive_warmup,
    oracle_warmup,
    war,
    warmup_sample_count,
)

__all__ = [
    "ExperimentConfig",
    "load_config",
    "config_from_dict",
    "make_arms",
    "standard_regret_config",
    "table1_experiment",
    "warmup_bench_experiment",
    "design_contrast_experiment",
    "bias_experiment",
    "regret_experiment",
    "run_experiment",
    "pool_size",
]

_KINDS = {"table1", "design-contrast", "bias", "regret", "design", "warmup-bench"}
_ARM_KINDS = {"unit_sphere", "circle", "grid", "angles", "file"}
_WAR_KEYS = {"l", "u", "r", "choice"}
_COMMAND_KINDS = {
    "table1": {"table1"},
    "warmup-bench": {"warmup-bench", "table1"},
    "design": {"design", "design-contrast"},
    "bias": {"bias"},
    "regret": {"regret"},
}

TABLE1_COLUMNS = ["method", "S", "repeat", "samples_probing", "samples_planning", "total"]
WARMUP_BENCH_COLUMNS = TABLE1_COLUMNS + ["xi2", "satisfied"]
BIAS_COLUMNS = ["estimator", "c", "N", "bias", "normalized_bias"]
REGRET_COLUMNS = ["policy", "seed", "t", "cum_regret", "phase"]


@dataclass
class ExperimentConfig:
    experiment: str
    d: int = None
    arms: dict = None
    s: object = None
    theta: list = None
    delta: float = 0.05
    eps: float = 1.0
    t: int = 0
    repeats: int = 5
    seed: int = 0
    war: dict = field(default_factory=dict)
    out: str = "."
    policies: list = None
    etc_m: int = 500


def load_config(path):
    """Load and validate a JSON experiment config."""
    return config_from_dict(json.loads(Path(path).read_text()))


def _require(cond, message, fld):
    if not cond:
        raise ConfigError(message, field=fld)


def _check_arms_spec(spec):
    _require(isinstance(spec, dict), "arms must be an object with a 'kind'", "arms")
    unknown = set(spec) - {"kind", "k", "lo", "hi", "angles", "radii", "path"}
    _require(not unknown, "unknown arms keys: %s" % ", ".join(sorted(unknown)), "arms")
    kind = spec.get("kind")
    _require(kind in _ARM_KINDS, "arms kind must be one of %s" % sorted(_ARM_KINDS), "arms")
    if kind in ("unit_sphere", "circle", "grid"):
        _require(isinstance(spec.get("k"), int) and spec["k"] >= 1,
                 "arms needs a positive integer count k", "arms")
    if kind == "angles":
        _require(isinstance(spec.get("angles"), list) and spec["angles"],
                 "arms of kind angles needs a nonempty angle list", "arms")
        radii = spec.get("radii")
        if radii is not None:
            _require(isinstance(radii, list) and len(radii) == len(spec["angles"])
                     and all(0.0 < r <= 1.0 for r in radii),
                     "radii must match the angle list with values in (0, 1]", "arms")
    if kind == "file":
        _require(isinstance(spec.get("path"), str) and spec["path"],
                 "arms of kind file needs a path", "arms")


def config_from_dict(data):
    """Build a validated ExperimentConfig, rejecting unknown keys by name."""
    _require(isinstance(data, dict), "config must be a JSON object", "config")
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    for key in data:
        if key not in known:
            raise ConfigError("unknown config key %r" % key, field=key)
    cfg = ExperimentConfig(**data)
    _require(cfg.experiment in _KINDS,
             "experiment must be one of %s" % sorted(_KINDS), "experiment")
    _require(0.0 < cfg.delta <= math.exp(-1.0) + 1e-15,
             "delta must lie in (0, exp(-1)]", "delta")
    _require(cfg.eps > 0.0, "eps must be positive", "eps")
    _require(isinstance(cfg.repeats, int) and cfg.repeats >= 1,
             "repeats must be a positive integer", "repeats")
    _require(isinstance(cfg.seed, int), "seed must be an integer", "seed")
    if cfg.d is not None:
        _require(isinstance(cfg.d, int) and cfg.d >= 1, "d must be a positive integer", "d")
    _require(isinstance(cfg.war, dict), "war must be an object", "war")
    unknown_war = set(cfg.war) - _WAR_KEYS
    _require(not unknown_war, "unknown war keys: %s" % ", ".join(sorted(unknown_war)), "war")

    kind = cfg.experiment
    if kind in ("table1", "warmup-bench"):
        _require(cfg.arms is not None, "missing arms", "arms")
        _check_arms_spec(cfg.arms)
        _require(isinstance(cfg.s, list) and cfg.s and all(v > 0 for v in cfg.s),
                 "table1 needs a nonempty list of positive S values", "s")
        if cfg.arms["kind"] == "unit_sphere":
            _require(cfg.d is not None, "unit_sphere arms need d", "d")
    elif kind in ("design", "design-contrast"):
        _require(cfg.arms is not None, "missing arms", "arms")
        _check_arms_spec(cfg.arms)
        _require(isinstance(cfg.theta, list) and cfg.theta, "missing theta", "theta")
    elif kind == "bias":
        _require(isinstance(cfg.s, (int, float)) and cfg.s >= 0,
                 "bias needs a scalar natural parameter s >= 0", "s")
    elif kind == "regret":
        _require(cfg.arms is not None, "missing arms", "arms")
        _check_arms_spec(cfg.arms)
        _require(isinstance(cfg.theta, list) and cfg.theta, "missing theta", "theta")
        _require(isinstance(cfg.t, int) and cfg.t >= 1, "regret needs a horizon t >= 1", "t")
        _require(isinstance(cfg.s, (int, float)) and cfg.s > 0,
                 "regret needs the norm bound s", "s")
        policies = cfg.policies or ["homer", "uniform", "etc"]
        _require(all(p in ("homer", "uniform", "etc") for p in policies),
                 "policies must be homer/uniform/etc", "policies")
        _require(isinstance(cfg.etc_m, int) and cfg.etc_m >= 1,
                 "etc_m must be a positive integer", "etc_m")
    return cfg


def make_arms(spec, d=None, rng=None):
    """Generate an ArmSet from a config arm spec."""
    kind = spec["kind"]
    if kind == "unit_sphere":
        if rng is None or d is None:
            raise ConfigError("unit_sphere arms need d and a seeded generator", field="arms")
        g = rng.standard_normal((spec["k"], d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return ArmSet(g)
    if kind == "circle":
        i = np.arange(spec["k"])
        ang = 2.0 * np.pi * i / spec["k"]
        return ArmSet(np.column_stack([np.cos(ang), np.sin(ang)]))
    if kind == "grid":
        lo = float(spec.get("lo", -1.0))
        hi = float(spec.get("hi", 1.0))
        return ArmSet(np.linspace(lo, hi, spec["k"])[:, None])
    if kind == "angles":
        ang = np.asarray(spec["angles"], dtype=float)
        vec = np.column_stack([np.cos(ang), np.sin(ang)])
        if spec.get("radii") is not None:
            vec *= np.asarray(spec["radii"], dtype=float)[:, None]
        return ArmSet(vec)
    if kind == "file":
        path = Path(spec["path"])
        if path.suffix == ".json":
            return ArmSet(np.asarray(json.loads(path.read_text()), dtype=float))
        return ArmSet(np.atleast_2d(np.loadtxt(path, delimiter=",")))
    raise ConfigError("unknown arms kind %r" % kind, field="arms")


def pool_size():
    raw = os.environ.get("LOGBANDIT_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError("LOGBANDIT_THREADS must be an integer",
                              field="LOGBANDIT_THREADS")
    return os.cpu_count() or 1


def _run_tasks(fn, tasks):
    workers = min(pool_size(), len(tasks))
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def _war_params(cfg, s):
    w = cfg.war or {}
    return WarParams(
        l=float(w.get("l", 1.0)),
        u=float(w.get("u", 2.399)),
        r=float(w.get("r", 2.0)),
        delta=cfg.delta,
        s=float(s),
    )


def _draw_instance(cfg, repeat):
    rng = np.random.default_rng([cfg.seed, 101, repeat])
    arms = make_arms(cfg.arms, cfg.d, rng)
    direction = rng.standard_normal(arms.d)
    direction /= np.linalg.norm(direction)
    return arms, direction


def _table1_repeat(payload):
    cfg, repeat = payload
    arms, direction = _draw_instance(cfg, repeat)
    rows = []
    for si, s in enumerate(cfg.s):
        theta_star = float(s) * direction
        nai = naive_warmup_design(arms, float(s))
        n_naive = warmup_sample_count(nai.objective, arms.d, len(arms), cfg.delta)
        ora = g_optimal(arms, theta=theta_star)
        n_oracle = warmup_sample_count(ora.objective, arms.d, len(arms), cfg.delta)
        env = Environment(arms, theta_star, np.random.default_rng([cfg.seed, 202, repeat, si]))
        report = war(env, arms, _war_params(cfg, s))
        rows.append({"method": "naive", "S": float(s), "repeat": repeat,
                     "samples_probing": 0.0, "samples_planning": n_naive,
                     "total": n_naive})
        rows.append({"method": "oracle", "S": float(s), "repeat": repeat,
                     "samples_probing": 0.0, "samples_planning": n_oracle,
                     "total": n_oracle})
        rows.append({"method": "war", "S": float(s), "repeat": repeat,
                     "samples_probing": float(report.samples_probing),
                     "samples_planning": float(report.samples_planning),
                     "total": float(report.total)})
    return rows


def table1_experiment(cfg):
    """Warmup sample counts per (method, S, repeat).

    Naive and oracle counts are the idealized real-valued design costs;
    WAR rows report actual simulated pulls split into probing and
    planning.
    """
    chunks = _run_tasks(_table1_repeat, [(cfg, r) for r in range(cfg.repeats)])
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r["method"], r["S"], r["repeat"]))
    return rows


def _warmup_bench_repeat(payload):
    cfg, repeat = payload
    arms, direction = _draw_instance(cfg, repeat)
    rows = []
    for si, s in enumerate(cfg.s):
        theta_star = float(s) * direction
        for mi, method in enumerate(("naive", "war", "oracle")):
            env = Environment(
                arms, theta_star, np.random.default_rng([cfg.seed, 303, repeat, si, mi])
            )
            if method == "naive":
                report = naive_warmup(env, arms, float(s), cfg.delta)
            elif method == "war":
                report = war(env, arms, _war_params(cfg, s))
            else:
                report = oracle_warmup(env, arms, theta_star, cfg.delta)
            check = warmup_check(arms, report.planning_log, theta_star, cfg.delta)
            rows.append({
                "method": method, "S": float(s), "repeat": repeat,
                "samples_probing": float(report.samples_probing),
                "samples_planning": float(report.samples_planning),
                "total": float(report.total),
                "xi2": float(check.xi2),
                "satisfied": bool(check.satisfied),
            })
    return rows


def warmup_bench_experiment(cfg):
    """Simulate all three warmups, recording samples and the warmup check at θ*."""
    chunks = _run_tasks(_warmup_bench_repeat, [(cfg, r) for r in range(cfg.repeats)])
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r["method"], r["S"], r["repeat"]))
    return rows


def design_contrast_experiment(cfg):
    """Solve the g and h designs on one instance and package the contrast."""
    arms = make_arms(cfg.arms, cfg.d, np.random.default_rng([cfg.seed, 404]))
    theta = np.asarray(cfg.theta, dtype=float)
    gsol = g_optimal(arms, theta=theta, tol=1e-6)
    hsol = h_optimal(arms, theta=theta, tol=1e-6)

    def stats(sol):
        supp = sol.weights.support
        dots = np.abs(arms.vectors[supp] @ theta)
        return supp, float(dots.mean())

    g_supp, g_dot = stats(gsol)
    h_supp, h_dot = stats(hsol)
    payload = {
        "instance": {"arms": cfg.arms, "theta": [float(v) for v in theta]},
        "g": {"objective": float(gsol.objective),
              "weights": [float(w) for w in gsol.weights.weights]},
        "h": {"objective": float(hsol.objective),
              "weights": [float(w) for w in hsol.weights.weights]},
        "support_stats": {
            "g_support": [int(i) for i in g_supp],
            "h_support": [int(i) for i in h_supp],
            "g_support_size": int(g_supp.size),
            "h_support_size": int(h_supp.size),
            "g_mean_abs_dot": g_dot,
            "h_mean_abs_dot": h_dot,
        },
    }
    return payload, gsol, hsol, arms


def bias_experiment(cfg):
    """Exact 1-d estimator biases over the doubling N grid at c = s."""
    c = float(cfg.s)
    mud = float(mudot(c))
    ns = sorted({int(round(2.0**j / mud)) for j in range(1, 8)})
    rows = []
    for est in ("mle", "kt"):
        for n in ns:
            b = exact_bias_1d(est, c, n)
            scale = n * mud if est == "mle" else (n * mud) ** 2
            rows.append({"estimator": est, "c": c, "N": n,
                         "bias": float(b), "normalized_bias": float(b * scale)})
    return rows


def _regret_run(payload):
    cfg, pi, policy, rep = payload
    arms = make_arms(cfg.arms, cfg.d, np.random.default_rng([cfg.seed, 404]))
    theta_star = np.asarray(cfg.theta, dtype=float)
    env = Environment(arms, theta_star, np.random.default_rng([cfg.seed, 505, pi, rep]))
    if policy == "homer":
        choice = (cfg.war or {}).get("choice", "naive")
        result = run_homer(env, arms, cfg.t, cfg.delta, eps=cfg.eps,
                           warmup_choice=choice, s=float(cfg.s))
        ledger = result.ledger
    elif policy == "uniform":
        ledger, _ = baseline_policy("uniform", env, arms, cfg.t)
    else:
        ledger, _ = baseline_policy("etc", env, arms, cfg.t, m=cfg.etc_m)
    tt, cum, phase = ledger.curve(1000)
    rows = [
        {"policy": policy, "seed": rep, "t": int(t), "cum_regret": float(c),
         "phase": str(p)}
        for t, c, p in zip(tt, cum, phase)
    ]
    return rows, (policy, rep, [int(v) for v in tt], [float(v) for v in cum])


def regret_experiment(cfg):
    """Run every configured policy over the repeats; downsampled curves + summaries."""
    policies = cfg.policies or ["homer", "uniform", "etc"]
    tasks = [(cfg, pi, policy, rep)
             for pi, policy in enumerate(policies)
             for rep in range(cfg.repeats)]
    outputs = _run_tasks(_regret_run, tasks)
    rows = []
    curves = {}
    finals = {p: [] for p in policies}
    for chunk, (policy, rep, tt, cum) in outputs:
        rows.extend(chunk)
        curves[(policy, rep)] = (np.asarray(tt), np.asarray(cum))
        finals[policy].append(cum[-1])
    for policy in policies:
        rows.append({"policy": policy, "seed": -1, "t": int(cfg.t),
                     "cum_regret": float(np.mean(finals[policy])),
                     "phase": "summary"})
    return rows, curves


def standard_regret_config():
    """The built-in d=2, K=10 regret instance used when no config is given.

    Arm 0 is the best arm (mean 0.870), arm 1 the runner-up (gap 0.105,
    and the only source of second-coordinate information), and arms 2-9
    are short near-collinear decoys at gap ~0.63 that no optimal design
    needs.  Both designs therefore concentrate on the two low-gap arms,
    and the horizon truncates the second elimination round on arm 0.
    """
    return {
        "experiment": "regret",
        "d": 2,
        "arms": {"kind": "angles",
                 "angles": [0.0, 0.9007, 3.04, 3.07, 3.1, 3.13, 3.16, 3.19, 3.22, 3.25],
                 "radii": [1.0, 1.0, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6, 0.6]},
        "theta": [1.9, 0.0],
        "s": 1.9,
        "delta": 0.1,
        "eps": 0.05,
        "t": 200000,
        "repeats": 30,
        "seed": 0,
        "policies": ["homer", "uniform", "etc"],
        "etc_m": 500,
    }


def run_experiment(cfg, command=None):
    """Dispatch a config, write its outputs under cfg.out, return the paths."""
    if command is not None:
        allowed = _COMMAND_KINDS[command]
        if cfg.experiment not in allowed:
            raise ConfigError(
                "experiment %r cannot run under the %s subcommand"
                % (cfg.experiment, command),
                field="experiment",
            )
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    kind = cfg.experiment
    if kind == "table1" and command != "warmup-bench":
        rows = table1_experiment(cfg)
        written.append(results.write_table(out / "table1.csv", TABLE1_COLUMNS, rows))
        written.append(figures.table1_figure(out / "table1.png", rows))
    elif kind in ("table1", "warmup-bench"):
        rows = warmup_bench_experiment(cfg)
        written.append(
            results.write_table(out / "warmup_bench.csv", WARMUP_BENCH_COLUMNS, rows)
        )
        written.append(figures.warmup_bench_figure(out / "warmup_bench.png", rows))
    elif kind in ("design", "design-contrast"):
        payload, gsol, hsol, arms = design_contrast_experiment(cfg)
        written.append(results.write_json(out / "design_contrast.json", payload))
        written.append(
            figures.design_figure(out / "design_contrast.png", arms.vectors,
                                  gsol.weights.weights, hsol.weights.weights,
                                  np.asarray(cfg.theta, dtype=float))
        )
    elif kind == "bias":
        rows = bias_experiment(cfg)
        written.append(results.write_table(out / "bias.csv", BIAS_COLUMNS, rows))
        written.append(figures.bias_figure(out / "bias.png", rows))
    elif kind == "regret":
        rows, curves = regret_experiment(cfg)
        written.append(results.write_table(out / "regret.csv", REGRET_COLUMNS, rows))
        written.append(figures.regret_figure(out / "regret.png", curves))
    else:
        raise ConfigError("unknown experiment %r" % kind, field="experiment")
    return written
