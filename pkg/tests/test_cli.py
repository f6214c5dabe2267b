"""CLI presets, overrides, artifacts, and replay determinism."""
import csv
import json

import numpy as np
import pytest

from quddpm.cli import (
    PRESETS,
    RunManifest,
    apply_overrides,
    compute_metrics,
    dump_curves,
    main,
    run_preset,
)
from quddpm.datasets import Ensemble, gen_haar
from quddpm.rng import substream
from quddpm.statevector import StateVector

TINY_SETS = ["T=2", "layers=2", "N=16", "N_te=16", "iters_per_cycle=15"]


def test_preset_table_matches_hyperparameter_rows():
    assert PRESETS["cluster1q"]["n"] == 1 and PRESETS["cluster1q"]["T"] == 20
    assert PRESETS["circle"]["metric"] == "W1"
    assert PRESETS["circle"]["T"] == 40 and PRESETS["circle"]["N"] == 500
    assert PRESETS["tfim"]["layers"] == 12 and PRESETS["tfim"]["T"] == 30
    assert PRESETS["benchmark2q"]["benchmark"]


def test_unknown_preset_and_bad_override_exit_2(tmp_path, capsys):
    assert main(["--preset", "nope", "--out-dir", str(tmp_path)]) == 2
    assert main(["--preset", "cluster1q", "--set", "bogus_key=1",
                 "--out-dir", str(tmp_path)]) == 2
    assert main(["--preset", "cluster1q", "--set", "novalue",
                 "--out-dir", str(tmp_path)]) == 2


def test_apply_overrides():
    merged = apply_overrides(PRESETS["cluster1q"], {"T": 5, "task.epsilon": 0.2})
    assert merged["T"] == 5
    assert merged["params"]["epsilon"] == 0.2
    assert PRESETS["cluster1q"]["params"]["epsilon"] == 0.08  # no mutation
    with pytest.raises(KeyError):
        apply_overrides(PRESETS["cluster1q"], {"qqq": 1})


def test_run_writes_all_artifacts(tmp_path):
    code = main(["--preset", "cluster1q", "--seed", "3", "--out-dir", str(tmp_path),
                 "--dump-ensemble"] + [x for s in TINY_SETS for x in ("--set", s)])
    assert code == 0
    run_dir = tmp_path / "cluster1q-3"
    for name in ("manifest.json", "curves.csv", "metrics.json", "model.json",
                 "target.qens", "generated.qens"):
        assert (run_dir / name).exists(), name
    with open(run_dir / "curves.csv") as f:
        rows = list(csv.DictReader(f))
    assert set(rows[0]) == {"t", "metric", "value", "phase"}
    diffusion_rows = [r for r in rows if r["phase"] == "diffusion"]
    assert len(diffusion_rows) == 2 + 1  # T + 1
    assert {r["phase"] for r in rows} == {"diffusion", "training", "testing"}
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["seed"] == 3
    assert manifest["config"]["metric"] == "MMD"


def test_replay_is_bit_exact(tmp_path):
    args = ["--preset", "cluster1q", "--seed", "9"] + \
        [x for s in TINY_SETS for x in ("--set", s)]
    assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
    assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
    for name in ("metrics.json", "curves.csv"):
        a = (tmp_path / "a" / "cluster1q-9" / name).read_bytes()
        b = (tmp_path / "b" / "cluster1q-9" / name).read_bytes()
        assert a == b, name


def test_manifest_json_round_trip(tmp_path):
    m = run_preset("cluster1q", {k: v for k, v in
                                 (("T", 2), ("layers", 2), ("N", 16),
                                  ("N_te", 16), ("iters_per_cycle", 10))},
                   seed=1, out_dir=str(tmp_path))
    back = RunManifest.from_json(m.to_json())
    assert back.to_json() == m.to_json()


def test_dump_curves_format(tmp_path):
    path = tmp_path / "c.csv"
    dump_curves([(0, "MMD", 0.5, "diffusion"), (1, "MMD", 0.25, "training")], path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,metric,value,phase"
    assert len(lines) == 3
    assert "." in lines[1].split(",")[2]


# ---------------------------------------------------------------------------
# metric maps
# ---------------------------------------------------------------------------

def test_cluster_metric_trivial_case():
    ens = Ensemble.uniform([StateVector.zero(2)] * 3)
    assert compute_metrics(ens, "cluster")["F0"] == pytest.approx(1.0)


def test_tfim_metric_alternating_spins():
    amps = np.zeros(16, dtype=complex)
    amps[0b0101] = 1.0
    ens = Ensemble.uniform([StateVector(4, amps)])
    out = compute_metrics(ens, "tfim")
    assert out["magnetization"][0] == pytest.approx(0.0, abs=1e-12)
    assert out["fm_fraction"] == 0.0


def test_circle_metric_haar_baseline():
    ens = gen_haar(1, 3000, substream(1, "h"))
    out = compute_metrics(ens, "circle")
    # E[<Y>^2] over Haar is 1/3; 3 sigma of the sample mean
    assert out["mean_Y_sq"] == pytest.approx(1 / 3, abs=3 * 0.3 / np.sqrt(3000))


def test_corrnoise_metric_recovers_error_probability():
    from quddpm.datasets import gen_correlated_noise
    p, delta0, c = 0.3, np.pi / 3, 1 / np.sqrt(3)
    ens = gen_correlated_noise(c, c, c, p, delta0, 4000, substream(2, "cn"))
    out = compute_metrics(ens, "correlated_noise",
                          {"c0": c, "c1": c, "c3": c, "p": p, "delta0": delta0})
    assert out["p_estimate"] == pytest.approx(p, abs=0.05)


def test_unknown_task_rejected():
    ens = gen_haar(1, 2, substream(3))
    with pytest.raises(ValueError):
        compute_metrics(ens, "nope")
