"""Acceptance suite.

Each test implements one release criterion at its stated tolerance and
prints a [PASS]/[FAIL] line (visible with ``pytest -s``).  Training-based
criteria share module-scoped fixtures; everything is seed-fixed and runs on
a laptop CPU.
"""

import hashlib
import json
import time

import numpy as np
import pytest

from helpers import analytic_grads, finite_diff_grads, max_rel_err
from mmfusion.attribution import (
    occlusion_importance,
    pairwise_order_agreement,
    region_attribution,
)
from mmfusion.cli import main as cli_main
from mmfusion.data import (
    Batch,
    SyntheticConfig,
    bayes_accuracy_table,
    batch_from_samples,
    generate_synthetic,
)
from mmfusion.errors import FormatError
from mmfusion.evaluation import evaluate
from mmfusion.losses import kl_to_annotator, label_smoothed_ce
from mmfusion.models import (
    DUAL_STREAM,
    EARLY_FUSION_AVG,
    IMAGE_ONLY,
    SINGLE_STREAM,
    FusionWeights,
    ModelConfig,
    build_model,
    load_checkpoint_bytes,
    save_checkpoint,
    validate_class_probabilities,
)
from mmfusion.optim import AdamW, ScheduleConfig, lr_at
from mmfusion.training import OptimizerConfig, RunConfig, train_model

SEED = 1234
TRAIN_STEPS = 500
TRAIN_ACC_TARGET = 0.95


def check(name: str, condition: bool, detail: str) -> None:
    print(f"[{'PASS' if condition else 'FAIL'}] {name}: {detail}")
    assert condition, f"{name}: {detail}"


@pytest.fixture(scope="module")
def dataset():
    return generate_synthetic(SEED, 2000, SyntheticConfig())


def _family_config(dataset, family, **overrides):
    base = dict(
        num_classes=9,
        vocab_size=len(dataset.vocab),
        encoder_layers=2,
        heads=4,
        model_dim=64,
        ff_dim=128,
        max_text_len=12,
        num_regions=4,
        region_feature_dim=16,
        dropout=0.1,
    )
    base.update(overrides)
    return ModelConfig(family=family, **base)


def _train(dataset, config, seed=7):
    run = RunConfig(
        model=config,
        schedule=ScheduleConfig(peak_lr=2e-3, warmup_steps=50, total_steps=TRAIN_STEPS),
        optimizer=OptimizerConfig(weight_decay=0.01),
        seed=seed,
        batch_size=64,
        eval_every=100,
    )
    model = build_model(config, run.seed)
    started = time.time()
    history = train_model(model, dataset, run)
    elapsed = time.time() - started
    best = max(r["accuracy"] for r in history if r["split"] == "train")
    return model, best, elapsed


@pytest.fixture(scope="module")
def trained(dataset):
    models = {}
    for family in (EARLY_FUSION_AVG, DUAL_STREAM, SINGLE_STREAM):
        models[family] = _train(dataset, _family_config(dataset, family))
    return models


@pytest.fixture(scope="module")
def trained_text_only(dataset):
    config = _family_config(dataset, SINGLE_STREAM, num_regions=0)
    return _train(dataset, config)


class TestGradientCorrectness:
    """End-to-end backward pass vs central finite differences, per family."""

    def test_all_families_match_finite_differences(self):
        rng = np.random.default_rng(0)
        batch = Batch(
            sample_ids=["a", "b"],
            token_ids=rng.integers(3, 10, size=(2, 4)).astype(np.int64),
            token_keep=np.array([[True] * 4, [True, True, True, False]]),
            regions=rng.normal(size=(2, 2, 4)),
            labels=np.array([0, 2], dtype=np.int64),
            distributions=rng.dirichlet(np.ones(3), size=2),
        )
        started = time.time()
        worst = {}
        for family in (EARLY_FUSION_AVG, DUAL_STREAM, SINGLE_STREAM, IMAGE_ONLY):
            config = ModelConfig(
                family=family,
                num_classes=3,
                vocab_size=10,
                encoder_layers=1,
                heads=2,
                model_dim=8,
                ff_dim=8,
                max_text_len=6,
                num_regions=2,
                region_feature_dim=4,
                dropout=0.0,
                cls_hidden_dim=6,
            )
            model = build_model(config, seed=3)
            params = list(model.parameters().values())
            fn = lambda: model.training_loss(batch, training=False)  # noqa: E731
            exact = analytic_grads(fn, params)
            approx = finite_diff_grads(fn, params, h=1e-5)
            worst[family] = max(max_rel_err(a, b) for a, b in zip(exact, approx))
        elapsed = time.time() - started
        worst_err = max(worst.values())
        check(
            "gradient-correctness",
            worst_err < 1e-4 and elapsed < 60.0,
            f"max rel err {worst_err:.2e} across {len(worst)} families in {elapsed:.1f}s",
        )


class TestTrainability:
    def test_three_families_reach_train_accuracy(self, trained):
        for family, (model, best, elapsed) in trained.items():
            check(
                f"trainability[{family}]",
                best >= TRAIN_ACC_TARGET and elapsed < 300.0,
                f"train acc {best:.4f} within {TRAIN_STEPS} steps in {elapsed:.0f}s",
            )


class TestMultimodalAdvantage:
    def test_single_stream_beats_text_only_by_ten_points(
        self, dataset, trained, trained_text_only
    ):
        test_split = dataset.split("test")
        multimodal = evaluate(trained[SINGLE_STREAM][0], test_split, dataset.class_names)
        text_only = evaluate(trained_text_only[0], test_split, dataset.class_names)
        ceilings = bayes_accuracy_table(SyntheticConfig())
        margin = multimodal.accuracy - text_only.accuracy
        consistent = (
            text_only.accuracy <= ceilings["text_only"] + 0.1
            and multimodal.accuracy <= ceilings["multimodal"] + 1e-9
        )
        check(
            "multimodal-advantage",
            margin >= 0.10 and consistent,
            f"multimodal {multimodal.accuracy:.4f} vs text-only {text_only.accuracy:.4f} "
            f"(margin {margin:.2f}; ceilings {ceilings['text_only']:.2f}/1.00)",
        )


class TestFusionInvariants:
    def test_degenerate_and_random_weights(self, dataset):
        config = _family_config(dataset, DUAL_STREAM, dropout=0.0)
        model = build_model(config, seed=5)
        batch = batch_from_samples(dataset.split("val")[:16], 9)
        p_img, p_txt = model.stream_probabilities(batch)
        fused_img = model.predict_proba(batch, fusion=FusionWeights.create(1.0, 0.0))
        bit_exact = np.array_equal(fused_img, p_img)

        rng = np.random.default_rng(99)
        all_valid = True
        for _ in range(1000):
            w = rng.uniform(0.0, 4.0, size=2)
            if w.sum() == 0.0:
                continue
            fused = model.predict_proba(batch, fusion=FusionWeights.create(*w))
            try:
                validate_class_probabilities(fused)
            except Exception:
                all_valid = False
                break
        check(
            "fusion-invariants",
            bit_exact and all_valid,
            f"w1=1 bitwise equal: {bit_exact}; 1000 random weight pairs valid: {all_valid}",
        )


class TestLossOracles:
    def test_closed_form_values(self):
        from mmfusion.tensor import Tensor

        # uniform logits, K=9: loss equals ln 9 for any smoothing strength
        ce_err = max(
            abs(label_smoothed_ce(Tensor(np.zeros(9)), [c], eps, 9).item() - np.log(9.0))
            for eps in (0.0, 0.1, 0.5, 1.0)
            for c in (0, 4, 8)
        )

        target = np.array([0.2, 0.3, 0.5])
        kl_zero = abs(kl_to_annotator(Tensor(np.log(target)), target).item())
        kl_positive = kl_to_annotator(
            Tensor(np.log(target) + np.array([0.3, 0.0, -0.2])), target
        ).item()

        p = Tensor(np.array([1.0]), requires_grad=True)
        p.grad = np.array([1.0])
        opt = AdamW({"w": p}, lr=0.1, beta1=0.0, beta2=0.0, eps=0.0, weight_decay=0.0)
        opt.step()
        adam_err = abs(p.data[0] - 0.9)

        check(
            "loss-oracles",
            ce_err < 1e-12 and kl_zero < 1e-9 and kl_positive > 0 and adam_err < 1e-12,
            f"CE-uniform err {ce_err:.1e}; KL-at-match {kl_zero:.1e}; "
            f"KL-off-match {kl_positive:.2e}; optimizer hand-step err {adam_err:.1e}",
        )


class TestSchedule:
    def test_peak_and_closed_form(self):
        sched = ScheduleConfig(peak_lr=6e-5, warmup_steps=1000, total_steps=10000)
        exact_peak = lr_at(1000, sched) == 6e-5

        def closed_form(step):
            if step <= 1000:
                return 6e-5 * step / 1000
            if step >= 10000:
                return 0.0
            return 6e-5 * (10000 - step) / 9000

        rng = np.random.default_rng(1)
        steps = rng.integers(0, 12000, size=10000)
        # 1e-18 absolute = sub-ulp at this lr scale (tolerates association order)
        worst = max(abs(lr_at(int(s), sched) - closed_form(int(s))) for s in steps)
        check(
            "schedule",
            exact_peak and worst < 1e-18,
            f"peak exact: {exact_peak}; max deviation over 10000 sampled steps: {worst:.1e}",
        )


class TestMetricsOracle:
    @staticmethod
    def _brute_force(y_true, y_pred, C):
        confusion = [[0] * C for _ in range(C)]
        for t, p in zip(y_true, y_pred):
            confusion[t][p] += 1
        precision, recall, f1 = [], [], []
        for c in range(C):
            tp = confusion[c][c]
            fp = sum(confusion[r][c] for r in range(C)) - tp
            fn = sum(confusion[c]) - tp
            pr = tp / (tp + fp) if tp + fp else 0.0
            rc = tp / (tp + fn) if tp + fn else 0.0
            precision.append(pr)
            recall.append(rc)
            f1.append(2 * pr * rc / (pr + rc) if pr + rc else 0.0)
        accuracy = sum(confusion[c][c] for c in range(C)) / len(y_true)
        return confusion, precision, recall, f1, accuracy, sum(f1) / C

    def test_twenty_crafted_sets(self):
        from mmfusion.evaluation import report_from_predictions

        rng = np.random.default_rng(2)
        cases = [
            ([0, 1, 2], [0, 1, 2], 3),  # perfect
            ([0, 1, 2, 1], [2, 2, 2, 2], 3),  # constant predictor
            ([0, 0, 0, 1, 1, 1], [1, 1, 1, 0, 0, 0], 3),  # total confusion + empty class
            ([0], [0], 2),  # single sample
        ]
        while len(cases) < 20:
            C = int(rng.integers(2, 10))
            n = int(rng.integers(1, 80))
            cases.append(
                (list(rng.integers(0, C, size=n)), list(rng.integers(0, C, size=n)), C)
            )

        worst_f1_err = 0.0
        counts_exact = True
        for y_true, y_pred, C in cases:
            report = report_from_predictions(y_true, y_pred, [f"c{i}" for i in range(C)])
            confusion, precision, recall, f1, accuracy, macro = self._brute_force(
                list(map(int, y_true)), list(map(int, y_pred)), C
            )
            counts_exact &= report.confusion.tolist() == confusion
            counts_exact &= report.accuracy == accuracy
            worst_f1_err = max(
                worst_f1_err,
                abs(report.macro_f1 - macro),
                max(abs(a - b) for a, b in zip(report.precision, precision)),
                max(abs(a - b) for a, b in zip(report.recall, recall)),
                max(abs(a - b) for a, b in zip(report.f1, f1)),
            )
        check(
            "metrics-oracle",
            counts_exact and worst_f1_err < 1e-12,
            f"20 cases: counts exact {counts_exact}, max F1 deviation {worst_f1_err:.1e}",
        )


class TestAttribution:
    def test_normalization_and_occlusion_agreement(self, dataset, trained):
        model = trained[SINGLE_STREAM][0]
        samples = dataset.split("test")[:50]
        agreements = []
        max_norm_ok = True
        for sample in samples:
            report = region_attribution(model, sample, sample.label)
            max_norm_ok &= report.normalized.max() == 1.0
            changes = occlusion_importance(model, sample, sample.label)
            agreements.append(pairwise_order_agreement(report.raw, changes))
        mean_agreement = float(np.mean(agreements))
        check(
            "attribution",
            max_norm_ok and mean_agreement >= 0.70,
            f"normalization max=1: {max_norm_ok}; "
            f"occlusion ordering agreement {mean_agreement:.3f} on {len(samples)} samples",
        )


class TestDeterminismAndPersistence:
    def _digest(self, path):
        with open(path, "rb") as fh:
            return hashlib.sha256(fh.read()).hexdigest()

    def test_pipeline_reproduces_bit_exactly(self, tmp_path):
        data = str(tmp_path / "data")
        assert cli_main(["gen", "--seed", "21", "--samples", "360", "--out", data]) == 0
        config_path = str(tmp_path / "run.json")
        with open(config_path, "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "model": {
                        "family": "single_stream_bitransformer",
                        "num_classes": 9,
                        "vocab_size": 32,
                        "encoder_layers": 1,
                        "heads": 2,
                        "model_dim": 32,
                        "ff_dim": 64,
                        "max_text_len": 12,
                        "num_regions": 4,
                        "region_feature_dim": 16,
                        "dropout": 0.1,
                    },
                    "schedule": {"peak_lr": 2e-3, "warmup_steps": 20, "total_steps": 120},
                    "seed": 3,
                    "batch_size": 32,
                    "eval_every": 40,
                },
                fh,
            )
        digests = []
        for name in ("one", "two"):
            out = str(tmp_path / name)
            assert cli_main(["train", "--config", config_path, "--data", data, "--out", out]) == 0
            report = str(tmp_path / f"report_{name}")
            assert cli_main(
                ["eval", "--checkpoint", f"{out}/checkpoint.mmfl", "--data", data,
                 "--split", "test", "--report-out", report]
            ) == 0
            digests.append(
                (
                    self._digest(f"{out}/metrics.jsonl"),
                    self._digest(f"{out}/checkpoint.mmfl"),
                    self._digest(f"{report}.json"),
                    self._digest(f"{report}.csv"),
                )
            )
        check(
            "determinism",
            digests[0] == digests[1],
            "train->save->load->eval reproduced bit-exactly across two seeded runs",
        )

    def test_checkpoint_truncation_fuzz_never_crashes(self, tmp_path):
        config = ModelConfig(
            family=IMAGE_ONLY,
            num_classes=3,
            vocab_size=8,
            num_regions=2,
            region_feature_dim=4,
            cls_hidden_dim=4,
            model_dim=8,
            heads=2,
        )
        model = build_model(config, seed=1)
        path = str(tmp_path / "tiny.mmfl")
        save_checkpoint(model, path)
        with open(path, "rb") as fh:
            blob = fh.read()
        rejected = 0
        for cut in range(len(blob)):
            try:
                load_checkpoint_bytes(blob[:cut])
            except FormatError:
                rejected += 1
            # any other exception propagates and fails the test
        check(
            "persistence-fuzz",
            rejected == len(blob),
            f"all {len(blob)} truncation prefixes rejected cleanly",
        )
