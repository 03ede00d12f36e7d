"""Acceptance suite: one test per criterion, each printing a pass line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
The benchmark criteria share one full 7-scheme x 3-withheld x 2-model plan on
the seeded synthetic multi-scale corpus (42 training runs); it executes once
per session through the CLI and once in-process for the audit log.
"""

import json
import time

import numpy as np
import pytest

from tsnorm import (
    Dataset,
    ExperimentPlan,
    Instance,
    LinearForecaster,
    LossKind,
    Method,
    NormStats,
    Scheme,
    SyntheticSpec,
    TokenizerSpec,
    fit_dataset_stats,
    fit_instance_stats,
    generate_synthetic,
    loss_gaussian_nll,
    loss_mae,
    loss_mse,
    loss_token_ce,
    mase,
    naive_mae,
    normalize,
    denormalize,
    raw_stats,
    sample_instances,
    train,
)
from tsnorm.cli import main
from tsnorm.core import Forecast, ForecastKind, Scope
from tsnorm.harness import AVERAGE_ID, run_plan
from tsnorm.models import prepare_training_pool

from conftest import central_difference
from test_metrics import brute_force_mase

BENCH_SYNTH = {
    "n_datasets": 4,
    "channels": 2,
    "length": 2400,
    "scale_exponents": [0.5, 0.0, -2.0, -3.0],
    "level_shifts": 2,
    "seed": 11,
    "seasonal_period": 24,
    "split_fraction": 0.8,
}

BENCH_PLAN = {
    "seed": 7,
    "context_len": 96,
    "steps": 5000,
    "lr": 6e-4,
    "instances_per_dataset": 256,
    "schemes": ["revin", "meanabs", "hybrid", "standardization", "minmax", "maxabs", "raw"],
    "models": ["point_mse", "gaussian_nll"],
    "withheld": ["synth0", "synth1", "synth2"],
    "synthetic": BENCH_SYNTH,
}

MEAN_STD_TRIO = ("revin", "hybrid", "standardization")


def ok(line: str) -> None:
    print(f"\n[PASS] {line}")


@pytest.fixture(scope="session")
def bench_run(tmp_path_factory):
    """Full benchmark executed through the CLI; returns (out dir, report, seconds)."""
    root = tmp_path_factory.mktemp("bench")
    plan_path = root / "plan.json"
    plan_path.write_text(json.dumps(BENCH_PLAN))
    out = root / "out"
    started = time.perf_counter()
    assert main(["run", "--plan", str(plan_path), "--out", str(out)]) == 0
    elapsed = time.perf_counter() - started
    report = json.loads((out / "report.json").read_text())
    return plan_path, out, report, elapsed


@pytest.fixture(scope="session")
def bench_result():
    """The same benchmark in-process, for the audit log and model handles."""
    datasets = {d.name: d for d in generate_synthetic(SyntheticSpec.from_dict(BENCH_SYNTH))}
    plan = ExperimentPlan.from_datasets(
        list(datasets.values()),
        schemes=[Scheme(s) for s in BENCH_PLAN["schemes"]],
        model_kinds=[LossKind(m) for m in BENCH_PLAN["models"]],
        context_len=BENCH_PLAN["context_len"],
        withheld=BENCH_PLAN["withheld"],
        steps=BENCH_PLAN["steps"],
        lr=BENCH_PLAN["lr"],
        seed=BENCH_PLAN["seed"],
        instances_per_dataset=BENCH_PLAN["instances_per_dataset"],
    )
    return datasets, plan, run_plan(plan, datasets)


def test_criterion_1_normalization_correctness():
    started = time.perf_counter()
    rng = np.random.default_rng(1001)
    worst_rel = 0.0
    for _ in range(1000):
        x = rng.normal(rng.uniform(-5, 5), rng.uniform(0.5, 4.0), (64, 3))
        d = Dataset("x", x, "1h", 1, 63)
        stats_by_method = {
            Method.STANDARDIZATION: fit_dataset_stats(d, Method.STANDARDIZATION),
            Method.MINMAX: fit_dataset_stats(d, Method.MINMAX),
            Method.MAXABS: fit_dataset_stats(d, Method.MAXABS),
            Method.REVIN: fit_instance_stats(x, Method.REVIN),
            Method.MEANABS: fit_instance_stats(x, Method.MEANABS),
            Method.RAW: raw_stats(3),
        }
        for stats in stats_by_method.values():
            back = denormalize(normalize(x, stats), stats)
            worst_rel = max(worst_rel, float(np.abs((back - x) / x).max()))

        z = normalize(d.train_values, stats_by_method[Method.STANDARDIZATION])
        assert np.abs(z.mean(axis=0)).max() <= 1e-9
        assert np.abs(z.std(axis=0) - 1.0).max() <= 1e-9
        z = normalize(d.train_values, stats_by_method[Method.MINMAX])
        assert (z.min(axis=0) == 0.0).all() and (z.max(axis=0) == 1.0).all()
        z = normalize(d.train_values, stats_by_method[Method.MAXABS])
        assert (np.abs(z).max(axis=0) == 1.0).all()
        z = normalize(x, stats_by_method[Method.REVIN])
        assert np.abs(z.mean(axis=0)).max() <= 1e-9
        assert np.abs(z.std(axis=0) - 1.0).max() <= 1e-9
    elapsed = time.perf_counter() - started
    assert worst_rel <= 1e-9
    assert elapsed < 5.0
    ok(f"criterion 1: round-trip/moment suite on 1000 matrices, worst rel err "
       f"{worst_rel:.2e}, {elapsed:.2f}s < 5s")


def test_criterion_2_nll_scale_invariance():
    started = time.perf_counter()
    rng = np.random.default_rng(1002)
    t = np.arange(40)
    base = np.column_stack([np.sin(2 * np.pi * t / 8) + 2.0,
                            np.cos(2 * np.pi * t / 8) - 1.0])
    base += rng.normal(0, 0.1, base.shape)
    model = LinearForecaster.create(LossKind.GAUSSIAN_NLL, 32, 8, seed=5)
    runs = {}
    for c in (1e-3, 1.0, 1e3):
        inst = Instance(context=c * base[:32], horizon=c * base[32:], origin=("a", 0))
        runs[c] = train(model, [inst], Scheme.REVIN, steps=25, lr=0.05, seed=1)
    ref_model, ref_trace = runs[1.0]
    for c in (1e-3, 1e3):
        m, tr = runs[c]
        assert np.abs(m.weights - ref_model.weights).max() <= 1e-9
        assert np.abs(m.bias - ref_model.bias).max() <= 1e-9
        assert np.abs(m.sigma_weights - ref_model.sigma_weights).max() <= 1e-9
        np.testing.assert_allclose(tr.losses - ref_trace.losses, np.log(c), atol=1e-9)
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    ok(f"criterion 2: Gaussian-NLL gradients invariant across c in {{1e-3,1,1e3}} "
       f"under window standardization; loss offset = log c +- 1e-9 ({elapsed:.2f}s < 1s)")


def test_criterion_3_token_ce_scale_decoupling():
    rng = np.random.default_rng(1003)
    t = np.arange(40)
    base = np.column_stack([np.sin(2 * np.pi * t / 8) + 2.0,
                            0.5 * np.cos(2 * np.pi * t / 8) + 1.0])
    base += rng.normal(0, 0.1, base.shape)
    model = LinearForecaster.create(LossKind.TOKEN_CE, 32, 8, seed=6,
                                    tokenizer=TokenizerSpec())
    ref_pool, _ = prepare_training_pool(
        [Instance(context=base[:32], horizon=base[32:], origin=("a", 0))],
        Scheme.MEANABS, model)
    ref_model, ref_trace = train(
        model, [Instance(context=base[:32], horizon=base[32:], origin=("a", 0))],
        Scheme.MEANABS, steps=30, lr=0.1, seed=2)
    for c in (1e-3, 1e3):
        inst = Instance(context=c * base[:32], horizon=c * base[32:], origin=("a", 0))
        pool, _ = prepare_training_pool([inst], Scheme.MEANABS, model)
        np.testing.assert_array_equal(pool[0].target, ref_pool[0].target)
        np.testing.assert_array_equal(pool[0].inputs, ref_pool[0].inputs)
        trained, trace = train(model, [inst], Scheme.MEANABS, steps=30, lr=0.1, seed=2)
        np.testing.assert_array_equal(trace.losses, ref_trace.losses)
        np.testing.assert_array_equal(trained.token_weights, ref_model.token_weights)
        np.testing.assert_array_equal(trained.token_bias, ref_model.token_bias)
    ok("criterion 3: token sequences, losses, and gradients bitwise identical "
       "under mean-abs scaling for c in {1e-3, 1, 1e3}")


def test_criterion_4_mse_magnitude_bias():
    rng = np.random.default_rng(1004)
    t = np.arange(40)
    ch1 = np.sin(2 * np.pi * t / 8) + rng.normal(0, 0.1, 40) + 2.0
    series = np.column_stack([ch1, 1e3 * ch1])
    inst = Instance(context=series[:32], horizon=series[32:], origin=("a", 0))
    model = LinearForecaster.create(LossKind.MSE, 32, 8, seed=7)
    _, raw_trace = train(model, [inst], Scheme.RAW, steps=1, lr=0.0, seed=0)
    raw_ratio = raw_trace.grad_norms[0][1] / raw_trace.grad_norms[0][0]
    _, revin_trace = train(model, [inst], Scheme.REVIN, steps=1, lr=0.0, seed=0)
    revin_ratio = revin_trace.grad_norms[0][1] / revin_trace.grad_norms[0][0]
    assert abs(raw_ratio - 1e6) <= 0.01 * 1e6
    assert abs(revin_ratio - 1.0) <= 0.01
    ok(f"criterion 4: per-channel MSE gradient-norm ratio raw {raw_ratio:.4g} "
       f"(=1e6 +-1%), window-standardized {revin_ratio:.4g} (=1 +-1%)")


def test_criterion_5_gradient_oracle():
    rng = np.random.default_rng(1005)
    checked = 0
    worst = 0.0

    def check(analytic, fd):
        nonlocal checked, worst
        worst = max(worst, float(np.abs(analytic - fd).max()))
        assert np.abs(analytic - fd).max() <= 1e-6
        checked += 1

    for _ in range(25):  # MSE
        shape = (int(rng.integers(1, 5)), int(rng.integers(1, 4)))
        pred, target = rng.normal(0, 2, shape), rng.normal(0, 2, shape)
        check(loss_mse(pred, target)[1],
              central_difference(lambda p: loss_mse(p, target)[0], pred))
    for _ in range(25):  # MAE, kept away from the kink
        shape = (int(rng.integers(1, 5)), int(rng.integers(1, 4)))
        target = rng.normal(0, 2, shape)
        pred = target + rng.choice([-1.0, 1.0], shape) * rng.uniform(0.5, 2.0, shape)
        check(loss_mae(pred, target)[1],
              central_difference(lambda p: loss_mae(p, target)[0], pred))
    for _ in range(25):  # Gaussian NLL, both heads
        shape = (int(rng.integers(1, 4)), 2)
        mean = rng.normal(0, 1, shape)
        log_std = rng.normal(0, 0.3, shape)
        target = rng.normal(0, 2, shape)
        stats = NormStats(rng.normal(0, 2, 2), rng.uniform(0.5, 3.0, 2),
                          Scope.INSTANCE, Method.REVIN)

        def nll(mean_arr, log_std_arr):
            f = Forecast(kind=ForecastKind.GAUSSIAN, gauss_mean=mean_arr,
                         gauss_std=np.exp(log_std_arr))
            return loss_gaussian_nll(f, target, stats)[0]

        f = Forecast(kind=ForecastKind.GAUSSIAN, gauss_mean=mean,
                     gauss_std=np.exp(log_std))
        _, (d_mean, d_log_std) = loss_gaussian_nll(f, target, stats)
        check(d_mean, central_difference(lambda m: nll(m, log_std), mean))
        check(d_log_std, central_difference(lambda s: nll(mean, s), log_std))
    for _ in range(25):  # token cross-entropy
        shape = (int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(2, 6)))
        logits = rng.normal(0, 1.5, shape)
        targets = rng.integers(0, shape[2], shape[:2])
        check(loss_token_ce(logits, targets)[1],
              central_difference(lambda lg: loss_token_ce(lg, targets)[0], logits))
    assert checked >= 100
    ok(f"criterion 5: {checked} analytic gradients match central differences, "
       f"worst abs dev {worst:.2e} <= 1e-6")


def test_criterion_6_clipping_contract():
    # plateau series: long near-constant stretches with large jumps between
    # them force tiny context scales ahead of out-of-scale horizons
    rng = np.random.default_rng(1006)
    levels = np.repeat([5.0, 50.0, 5.0, 50.0], 300)
    noisy = levels + rng.normal(0, 1e-3, levels.size)
    d = Dataset("plateau", noisy[:, None], "1h", 24, 960)
    instances = sample_instances(d, 96, 24, 400, seed=3)
    model = LinearForecaster.create(LossKind.MSE, 96, 24, seed=8)
    pool, rejected = prepare_training_pool(instances, Scheme.REVIN, model)
    assert rejected > 0
    assert pool, "some instances must survive clipping"
    worst = max(
        max(np.abs(s.inputs).max(), np.abs(s.target).max()) for s in pool
    )
    assert worst <= 10.0
    trained, trace = train(model, instances, Scheme.REVIN, steps=50, lr=1e-3, seed=4)
    assert trace.rejected == rejected and trace.rejection_rate > 0.0
    ok(f"criterion 6: clipping rejected {rejected}/{len(instances)} instances "
       f"(rate {trace.rejection_rate:.1%} > 0); max |normalized| reaching the "
       f"trainer = {worst:.3f} <= 10")


def test_criterion_7_mase_oracle():
    rng = np.random.default_rng(1007)
    worst = 0.0
    for _ in range(50):
        h, c, L = int(rng.integers(1, 10)), int(rng.integers(1, 4)), int(rng.integers(10, 40))
        m = int(rng.integers(1, 5))
        context = rng.normal(5.0, 3.0, (L, c))
        actual = rng.normal(5.0, 3.0, (h, c))
        pred = actual + rng.normal(0, 1.5, (h, c))
        ours = mase(pred, actual, naive_mae(context, m))
        oracle = brute_force_mase(pred, actual, context, m)
        worst = max(worst, abs(ours - oracle))
        assert abs(ours - oracle) <= 1e-9
    context = rng.normal(10.0, 4.0, (48, 3))
    actual = rng.normal(10.0, 4.0, (12, 3))
    pred = actual + rng.normal(0, 2.0, (12, 3))
    base = mase(pred, actual, naive_mae(context, 3))
    for c in (1e-3, 1e3, 17.0):
        scaled = mase(c * pred, c * actual, naive_mae(c * context, 3))
        assert abs(scaled - base) <= 1e-9 * base
    ok(f"criterion 7: MASE matches brute-force oracle on 50 fixtures "
       f"(worst dev {worst:.2e}) and is rescaling-invariant to 1e-9")


def test_criterion_8_directional_reproduction(bench_run):
    _, out, report, elapsed = bench_run
    assert elapsed < 600.0
    agg = report["aggregates"][AVERAGE_ID]
    zs = {method: agg[method]["zs"]["mean"] for method in agg}
    assert zs["raw"] >= 2.0 * zs["revin"]
    trio = [zs[m] for m in MEAN_STD_TRIO]
    assert (max(trio) - min(trio)) / min(trio) <= 0.10
    delta = report["improvements"]["zs"]["raw"]["revin"]
    assert delta > 50.0
    n_checkpoints = len(list((out / "checkpoints").glob("*.json")))
    assert n_checkpoints == 42  # 7 schemes x 3 withheld x 2 model kinds
    ok(
        "criterion 8: 42-run plan in "
        f"{elapsed:.0f}s < 600s; ZS means {{"
        + ", ".join(f"{m}: {zs[m]:.2f}" for m in
                    ("revin", "hybrid", "standardization", "minmax", "maxabs", "meanabs", "raw"))
        + f"}}; raw/revin = {zs['raw'] / zs['revin']:.2f} >= 2; trio spread "
        f"{(max(trio) - min(trio)) / min(trio):.1%} <= 10%; Δ(raw→revin) = {delta:.1f}% > 50%"
    )


def test_criterion_9_protocol_hygiene(bench_run, bench_result, tmp_path):
    datasets, plan, result = bench_result
    events = result.audit.events
    assert events, "audit log must not be empty"
    training_side = [(v, k, n, lo, hi) for v, k, n, lo, hi in events if k != "evaluate"]
    for variant, kind, name, lo, hi in training_side:
        withheld = variant.rsplit("|", 1)[-1]
        assert name != withheld, "withheld dataset touched before evaluation"
        assert hi <= datasets[name].split_index, "training access crossed the split"
    result.audit.verify(datasets)

    plan_path, out, _, _ = bench_run
    rerun = tmp_path / "rerun"
    assert main(["run", "--plan", str(plan_path), "--out", str(rerun)]) == 0
    first = (out / "report.json").read_bytes()
    second = (rerun / "report.json").read_bytes()
    assert first == second
    ok(f"criterion 9: {len(training_side)} training-side accesses all inside "
       f"train rows and never on the withheld dataset; identical seeds gave "
       f"byte-identical report.json twice ({len(first)} bytes)")
