"""Experiment harness: JSON config in, CSV sweep records out.

Every experiment is a grid of pure tasks keyed by (grid index, replicate);
tasks are distributed over a worker pool and merged in sorted task order, so
the CSV is byte-identical across reruns and worker counts.  Wall-clock
timing is recorded only when `record_timing` is set, because measured times
would break that determinism contract.

Exit-status contract (used by the CLI): 0 success, 2 config validation
failure, 3 budget violation, 4 invariant violation detected mid-run.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np

from . import crf, dobrushin, entropy, peierls
from .inference import stability_metric
from .lattice import LatticeWindow, ModelParams, SeedSpec, beta_from_p
from .mcmc import ChainSchedule

EXPERIMENTS = (
    "stability-sweep",
    "dobrushin-cert",
    "peierls-cert",
    "entropy-suite",
    "crf-uniqueness",
    "crf-mixing",
    "blackwell-demo",
)

CSV_HEADER = [
    "experiment",
    "p",
    "beta",
    "k",
    "m",
    "box",
    "replicates",
    "estimate",
    "std_error",
    "cert_value",
    "cert_holds",
    "seed",
    "wall_ms",
]

SEED_ENV_VAR = "CONDPHASE_SEED"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    replicates: int = 100
    p_values: list[float] = field(default_factory=list)
    k_values: list[int] = field(default_factory=lambda: [4])
    m_values: list[int] = field(default_factory=lambda: [2])
    method: str = "transfer"
    box: tuple[int, int] = (3, 3)
    beta_values: list[float] = field(default_factory=list)
    channel_p: float = 0.3
    flip_rate: float = 0.2
    horizon: int = 4
    schedule: dict = field(default_factory=lambda: {"burn_in": 200, "measure": 800})
    output: str = "sweep.csv"
    workers: int = 1
    record_timing: bool = False

    @classmethod
    def from_json(cls, path_or_dict) -> "ExperimentConfig":
        if isinstance(path_or_dict, dict):
            raw = dict(path_or_dict)
        else:
            with open(path_or_dict) as fh:
                raw = json.load(fh)
        raw.setdefault("experiment", "")
        for scalar_key, list_key in (("p", "p_values"), ("k", "k_values"),
                                     ("m", "m_values"), ("beta", "beta_values")):
            if scalar_key in raw:
                raw[list_key] = [raw.pop(scalar_key)]
        if "box" in raw:
            raw["box"] = tuple(raw["box"])
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        env = os.environ.get(SEED_ENV_VAR)
        if env is not None:
            cfg.seed = int(env)
        return cfg


def validate(config: ExperimentConfig) -> dict:
    """Dry-run feasibility report: errors, budgets and size estimates, no
    computation."""
    errors: list[str] = []
    report: dict = {"experiment": config.experiment, "grid": []}
    if config.experiment not in EXPERIMENTS:
        errors.append(f"unknown experiment {config.experiment!r}")
        report["errors"] = errors
        report["ok"] = False
        return report
    needs_p = config.experiment in (
        "stability-sweep", "dobrushin-cert", "peierls-cert", "crf-mixing"
    )
    if needs_p and not config.p_values:
        errors.append("empty p grid")
    for p in config.p_values:
        if not 0.0 <= p <= 0.5:
            errors.append(f"p={p} outside [0, 1/2]")
    if config.replicates < 1:
        errors.append("replicates must be >= 1")
    if config.experiment == "stability-sweep":
        for k in config.k_values:
            for m in config.m_values:
                sites = k * (2 * m + 1)
                entry = {"k": k, "m": m, "interior_sites": sites}
                if config.method == "enumeration":
                    entry["states"] = 2**sites
                    entry["memory_mb"] = round(2**sites * 8 / 1e6, 3)
                    if sites > 24:
                        errors.append(f"enumeration budget exceeded: {sites} sites")
                elif config.method == "transfer":
                    entry["column_states"] = 2 ** (2 * m + 1)
                    if 2 * m + 1 > 15:
                        errors.append(f"transfer budget exceeded: column {2*m+1}")
                report["grid"].append(entry)
    if config.experiment in ("crf-uniqueness", "crf-mixing"):
        sites = config.box[0] * config.box[1]
        report["grid"].append({"box": list(config.box), "sites": sites})
        if config.experiment == "crf-mixing" and sites > crf.MAX_BOX_SITES:
            errors.append(f"exact mixing budget exceeded: {sites} sites")
    if config.experiment in ("entropy-suite", "blackwell-demo"):
        bits = 2 * config.horizon + 1
        report["grid"].append({"horizon": config.horizon, "table_bits": bits})
        if bits > entropy.MAX_TABLE_BITS:
            errors.append("joint table too large")
    report["errors"] = errors
    report["ok"] = not errors
    return report


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _row(config, *, p=None, beta=None, k=None, m=None, box=None, estimate=None,
         std_error=None, cert_value=None, cert_holds=None, seed=None, wall_ms=0):
    return {
        "experiment": config.experiment,
        "p": p,
        "beta": beta,
        "k": k,
        "m": m,
        "box": box,
        "replicates": config.replicates,
        "estimate": estimate,
        "std_error": std_error,
        "cert_value": cert_value,
        "cert_holds": cert_holds,
        "seed": seed,
        "wall_ms": wall_ms,
    }


def _task_list(config: ExperimentConfig) -> list[dict]:
    exp = config.experiment
    if exp == "stability-sweep":
        return [
            {"p": p, "k": k, "m": m}
            for p in config.p_values
            for k in config.k_values
            for m in config.m_values
        ]
    if exp in ("dobrushin-cert", "peierls-cert", "crf-mixing"):
        return [{"p": p} for p in config.p_values]
    if exp == "crf-uniqueness":
        betas = config.beta_values or [0.2]
        return [{"beta": b} for b in betas]
    if exp in ("entropy-suite", "blackwell-demo"):
        return [{"k": k} for k in range(1, config.horizon + 1)]
    raise ConfigError(f"unknown experiment {exp!r}")


def _run_task(config: ExperimentConfig, index: int, task: dict) -> dict:
    t0 = time.perf_counter()
    exp = config.experiment
    seed = SeedSpec(config.seed, exp, sweep=index)
    seed_label = f"{config.seed}:{index}"
    if exp == "stability-sweep":
        p, k, m = task["p"], task["k"], task["m"]
        params = ModelParams(p)
        est, se = stability_metric(params, k, m, config.replicates, seed, config.method)
        row = _row(config, p=p, beta=params.beta, k=k, m=m,
                   estimate=est, std_error=se, seed=seed_label)
    elif exp == "dobrushin-cert":
        p = task["p"]
        params = ModelParams(p)
        k, m = config.k_values[0], config.m_values[0]
        window = LatticeWindow(k, m)
        data = dobrushin.build_dobrushin_data(window, params, [(k, 0)])
        sup, holds = dobrushin.dobrushin_condition(data)
        bound = dobrushin.comparison_bound(data) if holds else None
        row = _row(config, p=p, beta=params.beta, k=k, m=m, estimate=bound,
                   cert_value=sup, cert_holds=holds, seed=seed_label)
    elif exp == "peierls-cert":
        p = task["p"]
        k, m = config.k_values[0], config.m_values[0]
        try:
            cert = peierls.instability_probability_bound(p, k, m)
            row = _row(config, p=p, beta=beta_from_p(p), k=k, m=m,
                       estimate=cert.c1, cert_value=cert.c2, cert_holds=True,
                       seed=seed_label)
        except dobrushin.CertificateUnavailable:
            row = _row(config, p=p, beta=beta_from_p(p), k=k, m=m,
                       cert_holds=False, seed=seed_label)
    elif exp == "entropy-suite":
        k = task["k"]
        hmm = entropy.spin_flip_chain(config.flip_rate, config.channel_p)
        gap = entropy.filter_stability_gap(hmm, k)[-1]
        lhs, rhs = entropy.information_identity_check(hmm, k)
        row = _row(config, p=config.channel_p, k=k, estimate=gap,
                   cert_value=abs(lhs - rhs), cert_holds=abs(lhs - rhs) <= 1e-10,
                   seed=seed_label)
    elif exp == "blackwell-demo":
        k = task["k"]
        hmm = entropy.blackwell_fixture()
        pooled_dev, cond_dev = entropy.blackwell_conditionals(hmm, k)
        row = _row(config, p=0.0, k=k, estimate=0.5 + pooled_dev,
                   cert_value=cond_dev, cert_holds=max(pooled_dev, cond_dev) == 0.0,
                   seed=seed_label)
    elif exp == "crf-uniqueness":
        beta = task["beta"]
        box = crf.Box(*config.box)
        spec = crf.ising_spec(box, beta)
        channel = crf.VertexChannel.uniform(box, config.channel_p)
        schedule = ChainSchedule(**config.schedule)
        gaps = []
        for rep in range(config.replicates):
            rep_seed = seed.replicate_spec(rep)
            x = crf.sample_gibbs(spec, None, rep_seed) if box.n_sites <= crf.MAX_BOX_SITES \
                else _chain_sample(spec, rep_seed, schedule)
            y = channel.sample(x, SeedSpec(config.seed, exp + "/y", index, rep).generator())
            cond = crf.ConditionalSpecification(spec, channel, y)
            result = crf.plus_minus_experiment(
                cond, schedule, SeedSpec(config.seed, exp + "/pm", index, rep),
                check_monotone=(rep == 0),
            )
            gaps.append(result.global_gap)
        gaps = np.array(gaps)
        se = float(gaps.std(ddof=1) / math.sqrt(len(gaps))) if len(gaps) > 1 else 0.0
        row = _row(config, p=config.channel_p, beta=beta, box=f"{config.box[0]}x{config.box[1]}",
                   estimate=float(gaps.mean()), std_error=se, cert_holds=True,
                   seed=seed_label)
    elif exp == "crf-mixing":
        p = task["p"]
        box = crf.Box(*config.box)
        spec = crf.iid_spec(box)
        channel = crf.EdgeChannel(p)
        center = (box.rows // 2, box.cols // 2)
        inner = [center]
        outer = [s for s in box.sites
                 if abs(s[0] - center[0]) <= 1 and abs(s[1] - center[1]) <= 1]
        est, se = crf.conditional_mixing_metric(
            spec, channel, inner, outer, config.replicates, seed, bc=None
        )
        row = _row(config, p=p, beta=beta_from_p(p), box=f"{config.box[0]}x{config.box[1]}",
                   estimate=est, std_error=se, seed=seed_label)
    else:
        raise ConfigError(f"unknown experiment {exp!r}")
    if config.record_timing:
        row["wall_ms"] = int((time.perf_counter() - t0) * 1000)
    return row


def _chain_sample(spec, seed, schedule):
    from .mcmc import run_chain

    ctx = crf.CRFGibbsContext(spec, None)
    res = run_chain(ctx, np.ones(ctx.n_sites, dtype=np.int8), schedule, seed, target=0)
    return res.final


def _pool_run(config: ExperimentConfig, tasks: list[dict]) -> list[dict]:
    if config.workers <= 1 or len(tasks) <= 1:
        return [_run_task(config, i, t) for i, t in enumerate(tasks)]
    ctx = get_context("fork")
    with ctx.Pool(config.workers) as pool:
        indexed = pool.starmap(
            _run_task, [(config, i, t) for i, t in enumerate(tasks)]
        )
    return indexed  # starmap preserves task order


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow([_fmt(row[col]) for col in CSV_HEADER])
    return buf.getvalue()


def run(config: ExperimentConfig, output: str | None = None) -> str:
    """Execute the configured experiment, write the CSV, return its path."""
    report = validate(config)
    if not report["ok"]:
        raise ConfigError("; ".join(report["errors"]))
    tasks = _task_list(config)
    rows = _pool_run(config, tasks)
    path = output or config.output
    text = rows_to_csv(rows)
    with open(path, "w") as fh:
        fh.write(text)
    for row in rows:
        bits = [f"{c}={_fmt(row[c])}" for c in ("p", "beta", "k", "m", "box", "estimate", "std_error", "cert_value", "cert_holds") if row[c] is not None]
        print(f"[{config.experiment}] " + " ".join(bits))
    if config.experiment == "blackwell-demo":
        print("P[X_k=1 | X_0, Y_1..k] = 1_{X_k=1} (exact), P[X_k=1 | Y_1..k] = 1/2 (exact)")
    print(f"wrote {len(rows)} rows to {path}")
    return path
