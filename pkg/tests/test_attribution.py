"""Gradient-based region importance and its occlusion cross-check."""

import numpy as np
import pytest

from mmfusion.attribution import (
    occlusion_importance,
    pairwise_order_agreement,
    region_attribution,
)
from mmfusion.data import batch_from_samples, generate_synthetic
from mmfusion.errors import ConfigError, InvariantError
from mmfusion.models import ModelConfig, build_model
from mmfusion.optim import AdamW
from mmfusion.tensor import Tape


def _dataset_and_model(family="early_fusion_avg", seed=11, trained=False):
    dataset = generate_synthetic(41, 180)
    config = ModelConfig(
        family=family,
        num_classes=9,
        vocab_size=len(dataset.vocab),
        encoder_layers=1,
        heads=2,
        model_dim=16,
        ff_dim=32,
        max_text_len=12,
        num_regions=4,
        region_feature_dim=16,
        dropout=0.0,
    )
    model = build_model(config, seed=seed)
    if trained:
        opt = AdamW(model.parameters(), weight_decay=0.0)
        batch = batch_from_samples(dataset.split("train")[:96], 9)
        for _ in range(120):
            with Tape() as tape:
                tape.backward(model.training_loss(batch))
            opt.step(5e-3)
            opt.zero_grad()
    return dataset, model


class TestRegionAttribution:
    def test_normalization_peaks_at_exactly_one(self):
        dataset, model = _dataset_and_model()
        report = region_attribution(model, dataset.samples[0], target_class=2)
        assert report.normalized.max() == 1.0
        assert (report.normalized >= 0).all() and (report.normalized <= 1).all()
        assert not report.all_zero

    def test_zeroed_region_path_flags_all_zero(self):
        dataset, model = _dataset_and_model()
        # silence every hidden unit's region inputs (features sit after the
        # pooled text embedding in the concatenated head input)
        model.head.hidden.weight.data[model.config.model_dim :, :] = 0.0
        report = region_attribution(model, dataset.samples[0], target_class=2)
        assert report.all_zero
        np.testing.assert_array_equal(report.raw, 0.0)
        np.testing.assert_array_equal(report.normalized, 0.0)
        assert [entry["index"] for entry in report.top3] == [0, 1, 2]

    def test_duplicated_regions_get_equal_importance(self):
        dataset, model = _dataset_and_model()
        sample = dataset.samples[0]
        sample.region_features[1] = sample.region_features[0]
        report = region_attribution(model, sample, target_class=1)
        assert abs(report.raw[0] - report.raw[1]) < 1e-12

    def test_top3_sorted_with_ties_broken_by_lowest_index(self):
        dataset, model = _dataset_and_model()
        sample = dataset.samples[0]
        sample.region_features[2] = sample.region_features[1]
        report = region_attribution(model, sample, target_class=0)
        order = [entry["index"] for entry in report.top3]
        assert len(order) == 3
        values = report.raw[order]
        assert values[0] >= values[1] >= values[2]
        assert order.index(1) < order.index(2)  # equal scores keep index order

    def test_gradient_norm_method_flag(self):
        dataset, model = _dataset_and_model()
        report = region_attribution(model, dataset.samples[0], target_class=2, method="grad_l2")
        assert report.method == "grad_l2"
        assert report.normalized.max() == 1.0
        default = region_attribution(model, dataset.samples[0], target_class=2)
        assert default.method == "grad_x_input"
        assert not np.allclose(report.raw, default.raw)

    def test_textonly_model_rejected(self):
        dataset, _ = _dataset_and_model()
        config = ModelConfig(
            family="single_stream_bitransformer",
            num_classes=9,
            vocab_size=len(dataset.vocab),
            model_dim=16,
            ff_dim=32,
            heads=2,
            max_text_len=12,
            num_regions=0,
            dropout=0.0,
        )
        model = build_model(config, seed=0)
        with pytest.raises(InvariantError, match="region"):
            region_attribution(model, dataset.samples[0], target_class=0)

    def test_bad_inputs_rejected(self):
        dataset, model = _dataset_and_model()
        with pytest.raises(ConfigError):
            region_attribution(model, dataset.samples[0], 0, method="occlusion")
        with pytest.raises(InvariantError):
            region_attribution(model, dataset.samples[0], target_class=99)

    @pytest.mark.parametrize(
        "family", ["early_fusion_avg", "dual_stream_late_fusion", "single_stream_bitransformer"]
    )
    def test_all_region_consuming_families_supported(self, family):
        dataset, model = _dataset_and_model(family=family)
        report = region_attribution(model, dataset.samples[0], target_class=3)
        assert report.raw.shape == (4,)
        assert report.normalized.max() == 1.0


class TestOcclusionAgreement:
    def test_pairwise_agreement_measure(self):
        assert pairwise_order_agreement(np.array([3.0, 2.0, 1.0]), np.array([3.0, 2.0, 1.0])) == 1.0
        assert pairwise_order_agreement(np.array([3.0, 2.0, 1.0]), np.array([1.0, 2.0, 3.0])) == 0.0

    def test_occlusion_needs_two_regions(self):
        dataset, _ = _dataset_and_model()
        config = ModelConfig(
            family="image_only_mlp",
            num_classes=9,
            vocab_size=len(dataset.vocab),
            num_regions=1,
            region_feature_dim=16,
        )
        model = build_model(config, seed=0)
        with pytest.raises(InvariantError):
            occlusion_importance(model, dataset.samples[0], 0)

    def test_gradient_ranking_tracks_occlusion_on_a_trained_model(self):
        # smoke-level check; the strict >= 0.7 bound runs in the acceptance suite
        dataset, model = _dataset_and_model(family="single_stream_bitransformer", trained=True)
        agreements = []
        for sample in dataset.split("train")[:10]:
            grads = region_attribution(model, sample, sample.label).raw
            changes = occlusion_importance(model, sample, sample.label)
            agreements.append(pairwise_order_agreement(grads, changes))
        assert float(np.mean(agreements)) >= 0.5
