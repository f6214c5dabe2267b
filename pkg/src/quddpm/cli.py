"""Experiment runner.

Presets encode one hyperparameter row each (n, n_A, L, T, N, metric) plus the
task's target-ensemble recipe; ``--set key=value`` overrides any field. Every
run writes a self-contained ``runs/<name>-<seed>/`` directory with
manifest.json, curves.csv, metrics.json and model.json, so a run can be
replayed bit-exactly from its manifest.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from math import pi, sin, sqrt

import numpy as np

from . import __version__
from .baselines import benchmark_compare
from .datasets import (
    Ensemble,
    EnsembleSpec,
    _magnetization_diag,
    gen_haar,
    generate,
    save_ensemble,
)
from .diffusion import diffusion_distance_curve, mean_fidelity_to_state
from .distance import ShotBudget, mmd, wasserstein
from .rng import substream
from .statevector import StateVector
from .training import TrainConfig, generalization_error, test_generate, train

FM_THRESHOLD = 0.5  # |M| above this counts as ferromagnetic

PRESETS: dict[str, dict] = {
    "cluster1q": {
        "task": "cluster", "n": 1, "n_a": 1, "layers": 4, "T": 20, "N": 100,
        "metric": "MMD", "lr": 0.05, "iters_per_cycle": 300,
        "plateau_rtol": 1e-6, "params": {"epsilon": 0.08},
    },
    "cluster2q": {
        "task": "cluster", "n": 2, "n_a": 1, "layers": 6, "T": 20, "N": 100,
        "metric": "MMD", "lr": 0.02, "iters_per_cycle": 400,
        "plateau_rtol": 1e-7, "params": {"epsilon": 0.08},
    },
    "cluster4q-generror": {
        "task": "cluster", "n": 4, "n_a": 2, "layers": 8, "T": 20, "N": 100,
        "metric": "MMD", "gradient": "adjoint", "params": {"epsilon": 0.08},
        "generror": True,
    },
    "corrnoise": {
        "task": "correlated_noise", "n": 2, "n_a": 2, "layers": 6, "T": 20, "N": 500,
        "metric": "MMD", "gradient": "adjoint", "lr": 0.015,
        "iters_per_cycle": 800, "plateau_rtol": 1e-8,
        "params": {"c0": 1 / sqrt(3), "c1": 1 / sqrt(3), "c3": 1 / sqrt(3),
                   "p": 0.3, "delta0": pi / 3},
    },
    "tfim": {
        "task": "tfim", "n": 4, "n_a": 2, "layers": 12, "T": 30, "N": 100,
        "metric": "MMD", "gradient": "adjoint", "lr": 0.02,
        "iters_per_cycle": 300, "plateau_rtol": 1e-7,
        "params": {"g_min": 0.2, "g_max": 0.4},
    },
    "circle": {
        # W1 is evaluated in sampled mode: the branched expansion multiplies
        # the ensemble by 2**n_A, pushing the transport LP off the fast path.
        # Sampled W1 losses are noisy, so the plateau window is widened and
        # the SPSA probe step enlarged. Warm starts keep the late
        # concentrating cycles from stalling at a fresh random init.
        "task": "circle", "n": 1, "n_a": 2, "layers": 6, "T": 40, "N": 500,
        "metric": "W1", "mode": "sampled", "lr": 0.03, "spsa_c": 0.05,
        "spsa_probes": 6, "iters_per_cycle": 300, "plateau_window": 50,
        "plateau_rtol": 1e-7, "warm_start": True, "params": {},
    },
    "benchmark2q": {
        "task": "cluster", "n": 2, "n_a": 1, "layers": 6, "T": 20, "N": 100,
        "metric": "MMD", "gradient": "adjoint", "lr": 0.02,
        "iters_per_cycle": 400, "plateau_rtol": 1e-7,
        "params": {"epsilon": 0.08}, "benchmark": True,
    },
}

# TrainConfig fields settable via --set
_CFG_KEYS = ("n", "n_a", "layers", "T", "N", "N_te", "metric", "mode", "gradient",
             "lr", "iters_per_cycle", "plateau_window", "plateau_rtol",
             "init_scale", "warm_start", "spsa_c", "spsa_probes")


@dataclass
class RunManifest:
    """Everything needed to reproduce and locate one run's outputs."""

    preset: str
    seed: int
    version: str
    config: dict
    task: str
    task_params: dict
    overrides: dict = field(default_factory=dict)
    durations: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "RunManifest":
        return RunManifest(**json.loads(text))


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(preset: dict, overrides: dict) -> dict:
    """Merged preset: ``task.<key>`` targets the task params, others TrainConfig."""
    merged = {**preset, "params": dict(preset["params"])}
    for key, value in overrides.items():
        if key.startswith("task."):
            merged["params"][key[len("task."):]] = value
        elif key in _CFG_KEYS or key == "shots":
            merged[key] = value
        else:
            raise KeyError(f"unknown override key {key!r}")
    return merged


def dump_curves(rows: list[tuple], path) -> None:
    """CSV with header t,metric,value,phase."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "metric", "value", "phase"])
        for t, metric, value, phase in rows:
            w.writerow([t, metric, repr(float(value)), phase])


def _mean_y_squared(ens: Ensemble) -> float:
    a = ens.to_array()
    y = 2.0 * (a[:, 0].conj() * a[:, 1]).imag
    return float(ens.weights @ y**2)


def _sin2_mean(delta0: float) -> float:
    # E[sin^2 delta] for delta ~ U[-delta0, delta0]
    return 0.5 * (1.0 - sin(2.0 * delta0) / (2.0 * delta0))


def compute_metrics(generated: Ensemble, task: str, params: dict | None = None) -> dict:
    """Task-specific quality metrics of a generated ensemble."""
    params = params or {}
    n = generated.n_qubits
    out: dict = {}
    if task == "cluster":
        out["F0"] = mean_fidelity_to_state(generated, StateVector.zero(n))
    elif task == "correlated_noise":
        amps10 = np.zeros(4, dtype=complex)
        amps10[0b10] = 1.0
        f10 = mean_fidelity_to_state(generated, StateVector(2, amps10))
        out["F10"] = f10
        c1 = params.get("c1", 1 / sqrt(3))
        norm = abs(params.get("c0", 1 / sqrt(3))) ** 2 + abs(c1) ** 2 \
            + abs(params.get("c3", 1 / sqrt(3))) ** 2
        c1sq = abs(c1) ** 2 / norm
        out["p_estimate"] = f10 / (c1sq * _sin2_mean(params.get("delta0", pi / 3)))
    elif task == "tfim":
        m_diag = _magnetization_diag(n)
        a = generated.to_array()
        mags = np.einsum("bi,i,bi->b", a.conj(), m_diag, a).real
        hist, edges = np.histogram(mags, bins=20, range=(-1.0, 1.0))
        out["magnetization"] = mags.tolist()
        out["histogram"] = hist.tolist()
        out["histogram_edges"] = edges.tolist()
        out["fm_fraction"] = float(
            generated.weights @ (np.abs(mags) > FM_THRESHOLD)
        )
    elif task == "circle":
        out["mean_Y_sq"] = _mean_y_squared(generated)
    else:
        raise ValueError(f"unknown task {task!r}")
    return out


def _run_benchmark(merged: dict, seed: int, run_dir: str,
                   manifest: RunManifest) -> None:
    cfg = _make_config(merged, seed)
    spec = EnsembleSpec(merged["task"], cfg.n, cfg.N, seed, merged["params"])
    target = generate(spec, substream(seed, "data", "train"))
    t0 = time.perf_counter()
    report = benchmark_compare(target, cfg)
    manifest.durations["benchmark"] = time.perf_counter() - t0
    rows = []
    for model in ("quddpm", "qudt", "qugan"):
        manifest.metrics[model] = {
            k: v for k, v in report[model].items() if np.isscalar(v)
        }
        for it, loss in enumerate(_flat_losses(report, model)):
            rows.append((it, "loss", loss, f"training-{model}"))
    dump_curves(rows, os.path.join(run_dir, "curves.csv"))
    manifest.outputs["curves"] = os.path.join(run_dir, "curves.csv")


def _flat_losses(report: dict, model: str) -> list[float]:
    if model == "quddpm":
        return []  # per-cycle curves belong to the standard pipeline
    recs = report["records"]["qudt" if model == "qudt" else "qugan"]
    return [loss for r in recs for loss in r.losses]


def _make_config(merged: dict, seed: int) -> TrainConfig:
    shots = merged.get("shots", "exact")
    return TrainConfig(
        n=merged["n"], n_a=merged["n_a"], layers=merged["layers"],
        T=merged["T"], N=merged["N"], N_te=merged.get("N_te", 100),
        metric=merged["metric"], mode=merged.get("mode", "branched"),
        gradient=merged.get("gradient", "shift"),
        lr=merged.get("lr", 0.05),
        iters_per_cycle=merged.get("iters_per_cycle", 200),
        plateau_window=merged.get("plateau_window", 20),
        plateau_rtol=merged.get("plateau_rtol", 1e-5),
        init_scale=merged.get("init_scale", 0.1),
        spsa_c=merged.get("spsa_c", 0.01),
        spsa_probes=merged.get("spsa_probes", 4),
        shots=ShotBudget.parse(shots) if isinstance(shots, (str, int)) else shots,
        seed=seed,
    )


def run_preset(name: str, overrides: dict | None = None, seed: int = 0,
               out_dir: str = "runs", dump_ensemble: bool = False) -> RunManifest:
    """Execute one experiment preset end to end and write its artifacts."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}")
    overrides = overrides or {}
    merged = apply_overrides(PRESETS[name], overrides)
    cfg = _make_config(merged, seed)
    run_dir = os.path.join(out_dir, f"{name}-{seed}")
    os.makedirs(run_dir, exist_ok=True)
    manifest = RunManifest(
        preset=name, seed=seed, version=__version__,
        config={k: merged[k] for k in ("n", "n_a", "layers", "T", "N", "metric")},
        task=merged["task"], task_params=merged["params"], overrides=overrides,
    )
    manifest.config["mode"] = cfg.mode
    manifest.config["shots"] = cfg.shots.m if cfg.shots.m is not None else "exact"

    if merged.get("benchmark"):
        _run_benchmark(merged, seed, run_dir, manifest)
    else:
        _run_standard(merged, cfg, seed, run_dir, manifest, dump_ensemble)

    for key, value in list(manifest.metrics.items()):
        if isinstance(value, float) and not np.isfinite(value):
            raise FloatingPointError(f"metric {key} is not finite")
    manifest_path = os.path.join(run_dir, "manifest.json")
    with open(manifest_path, "w") as f:
        f.write(manifest.to_json())
    manifest.outputs["manifest"] = manifest_path
    return manifest


def _run_standard(merged: dict, cfg: TrainConfig, seed: int, run_dir: str,
                  manifest: RunManifest, dump_ensemble: bool) -> None:
    task, params = merged["task"], merged["params"]
    spec = EnsembleSpec(task, cfg.n, cfg.N, seed, params)
    target = generate(spec, substream(seed, "data", "train"))
    target_te = generate(
        EnsembleSpec(task, cfg.n, cfg.N_te, seed, params),
        substream(seed, "data", "test"),
    )

    t0 = time.perf_counter()
    model, records, traj = train(cfg, target)
    manifest.durations["training"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    d_fwd = diffusion_distance_curve(traj, target, cfg.metric)
    gen_te = test_generate(model, cfg.N_te, substream(seed, "noise", "test"))
    manifest.durations["evaluation"] = time.perf_counter() - t0

    rows = [(t, cfg.metric, v, "diffusion") for t, v in enumerate(d_fwd)]
    rows += [(r.step_trained - 1, cfg.metric, r.d_to_snapshot, "training")
             for r in records]
    d_test = _distance(gen_te, target_te, cfg.metric)
    rows.append((0, cfg.metric, d_test, "testing"))
    curves_path = os.path.join(run_dir, "curves.csv")
    dump_curves(rows, curves_path)
    manifest.outputs["curves"] = curves_path

    manifest.metrics["D_final_train"] = records[-1].d_to_target
    manifest.metrics["D_final_test"] = d_test
    manifest.metrics.update(
        {f"train_{k}": v for k, v in compute_metrics_from_model(
            model, cfg, seed, task, params, train_set=True).items()
         if np.isscalar(v)})
    for k, v in compute_metrics(gen_te, task, params).items():
        manifest.metrics[f"test_{k}" if np.isscalar(v) else k] = v

    if merged.get("generror"):
        noise_tr = gen_haar(cfg.n, cfg.N, substream(seed, "noise", "train"))
        noise_te = gen_haar(cfg.n, cfg.N_te, substream(seed, "noise", "test"))
        manifest.metrics["E_gen"] = generalization_error(
            model, target, target_te, noise_tr, noise_te, cfg)

    model_path = os.path.join(run_dir, "model.json")
    with open(model_path, "w") as f:
        f.write(model.to_json({"preset": manifest.preset, "seed": seed}))
    manifest.outputs["model"] = model_path
    if dump_ensemble:
        for tag, ens in (("target", target), ("generated", gen_te)):
            path = os.path.join(run_dir, f"{tag}.qens")
            save_ensemble(path, ens)
            manifest.outputs[tag] = path

    metrics_path = os.path.join(run_dir, "metrics.json")
    with open(metrics_path, "w") as f:
        json.dump(manifest.metrics, f, indent=2, sort_keys=True)
    manifest.outputs["metrics"] = metrics_path


def compute_metrics_from_model(model, cfg: TrainConfig, seed: int, task: str,
                               params: dict, train_set: bool) -> dict:
    tag = "train" if train_set else "test"
    gen = test_generate(
        model, cfg.N if train_set else cfg.N_te, substream(seed, "metrics", tag)
    )
    return compute_metrics(gen, task, params)


def _distance(a: Ensemble, b: Ensemble, metric: str) -> float:
    return mmd(a, b) if metric == "MMD" else wasserstein(a, b, p=1)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quddpm", description=__doc__)
    p.add_argument("--preset", required=True, help=", ".join(PRESETS))
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (task.* targets task params)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="BLAS thread cap (default: all cores)")
    p.add_argument("--mode", choices=["branched", "sampled"], default=None)
    p.add_argument("--shots", default=None, help='"exact" or a shot count')
    p.add_argument("--dump-ensemble", action="store_true")
    p.add_argument("--out-dir", default="runs")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    overrides: dict = {}
    for item in args.set:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return 2
        key, _, value = item.partition("=")
        overrides[key] = _parse_value(value)
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.shots is not None:
        overrides["shots"] = _parse_value(args.shots)
    try:
        manifest = run_preset(args.preset, overrides, args.seed,
                              args.out_dir, args.dump_ensemble)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    except (ValueError, TypeError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except FloatingPointError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 3
    print(f"run complete: {manifest.outputs['manifest']}")
    for key in sorted(manifest.metrics):
        value = manifest.metrics[key]
        if np.isscalar(value):
            print(f"  {key}: {value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
