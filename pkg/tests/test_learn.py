"""Classifiers, cross-validation metrics, and model serialization."""

import json

import numpy as np
import pytest

from hydramon.errors import (
    CorruptModel,
    EmptyDataset,
    FeatureOrderMismatch,
    NonFiniteFeature,
    TooFewRows,
    VersionMismatch,
)
from hydramon.features import FEATURE_COLUMNS, Dataset, FeatureVector
from hydramon.learn import (
    ForestParams,
    ModelSpec,
    TreeParams,
    cross_validate,
    fold_metrics,
    load_model,
    model_from_json,
    model_to_json,
    predict,
    predict_proba,
    render_report,
    save_model,
    stratified_folds,
    train_forest,
    train_nbayes,
    train_tree,
)
from hydramon.signal_core import HydrationLevel

from conftest import synthetic_feature_dataset


def vec(values, label=None, start=0.0, session="s"):
    return FeatureVector(values=np.asarray(values, dtype=float),
                         window_start=start, session=session, label=label)


def simple_dataset(seed=0, n=80):
    """One informative column (index 0), the rest small noise."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        c = i % 4
        v = rng.normal(0.0, 0.01, 36)
        v[0] = c + rng.normal(0.0, 0.1)
        rows.append(vec(v, HydrationLevel(c), start=float(i)))
    return Dataset(rows=tuple(rows))


class TestTree:
    def test_separable_data_memorized(self):
        data = simple_dataset()
        model = train_tree(data, TreeParams(max_depth=12, min_leaf=1))
        preds = [predict(model, row)[0] for row in data.rows]
        acc = np.mean([p == row.label for p, row in zip(preds, data.rows)])
        assert acc > 0.95

    def test_deterministic(self):
        data = simple_dataset()
        a = model_to_json(train_tree(data))
        b = model_to_json(train_tree(data))
        assert a == b

    def test_monotone_rescaling_invariance(self):
        """Axis-aligned splits depend only on feature order, so any strictly
        increasing per-feature transform leaves predictions unchanged."""
        data = simple_dataset()
        model = train_tree(data)
        scaled_rows = tuple(
            vec(3.0 * row.values + 7.0, row.label, row.window_start)
            for row in data.rows)
        scaled_model = train_tree(Dataset(rows=scaled_rows))
        for row, srow in zip(data.rows, scaled_rows):
            assert predict(model, row)[0] == predict(scaled_model, srow)[0]

    def test_constant_features_give_majority_class(self):
        rows = tuple(vec(np.ones(36), HydrationLevel(i % 2), start=float(i))
                     for i in range(9))
        model = train_tree(Dataset(rows=rows))
        level, _ = predict(model, rows[0])
        assert level == HydrationLevel.WELL_HYDRATED  # majority (5 of 9)

    def test_empty_dataset(self):
        with pytest.raises(EmptyDataset):
            train_tree(Dataset(rows=()))


class TestForest:
    def test_seeded_determinism(self):
        data = simple_dataset()
        a = model_to_json(train_forest(data, ForestParams(n_trees=10, seed=3)))
        b = model_to_json(train_forest(data, ForestParams(n_trees=10, seed=3)))
        assert a == b

    def test_different_seeds_differ(self):
        data = simple_dataset()
        a = model_to_json(train_forest(data, ForestParams(n_trees=10, seed=3)))
        b = model_to_json(train_forest(data, ForestParams(n_trees=10, seed=4)))
        assert a != b

    def test_probabilities_normalized(self):
        data = simple_dataset()
        model = train_forest(data, ForestParams(n_trees=10))
        p = predict_proba(model, data.rows[0])
        assert p.shape == (4,)
        assert p.sum() == pytest.approx(1.0)
        assert p.min() >= 0.0


class TestNaiveBayes:
    def test_priors_from_class_frequencies(self):
        # 3:1 class ratio with identical likelihoods -> posterior (0.75, 0.25)
        rows = tuple(
            vec(np.zeros(36), HydrationLevel.WELL_HYDRATED, start=float(i))
            for i in range(3)
        ) + (vec(np.zeros(36), HydrationLevel.HYDRATED, start=3.0),)
        model = train_nbayes(Dataset(rows=rows))
        p = predict_proba(model, rows[0])
        assert p[0] == pytest.approx(0.75)
        assert p[1] == pytest.approx(0.25)
        assert p[2] == p[3] == 0.0

    def test_zero_variance_handled(self):
        rows = tuple(vec(np.full(36, float(i % 2)), HydrationLevel(i % 2),
                         start=float(i)) for i in range(8))
        model = train_nbayes(Dataset(rows=rows))
        assert predict(model, rows[0])[0] == HydrationLevel.WELL_HYDRATED
        assert predict(model, rows[1])[0] == HydrationLevel.HYDRATED


class TestPredict:
    def test_tie_breaks_to_lower_level(self):
        rows = (vec(np.zeros(36), HydrationLevel.HYDRATED, start=0.0),
                vec(np.zeros(36), HydrationLevel.DEHYDRATED, start=1.0))
        model = train_nbayes(Dataset(rows=rows))
        level, conf = predict(model, rows[0])
        assert level == HydrationLevel.HYDRATED
        assert conf == pytest.approx(0.5)

    def test_feature_order_mismatch(self):
        model = train_tree(simple_dataset())
        bad = model_from_json(
            json.dumps({**json.loads(model_to_json(model)),
                        "feature_order_hash": "0" * 64}))
        with pytest.raises(FeatureOrderMismatch):
            predict(bad, simple_dataset().rows[0])

    def test_non_finite_feature(self):
        model = train_tree(simple_dataset())
        row = vec(np.zeros(36))
        row.values[5] = np.nan
        with pytest.raises(NonFiniteFeature):
            predict(model, row)


class TestFolds:
    def test_stratified_counts(self):
        labels = np.array([0, 1, 2, 3] * 10)
        folds = stratified_folds(labels, k=5, seed=0)
        assert len(folds) == 5
        all_idx = np.sort(np.concatenate(folds))
        np.testing.assert_array_equal(all_idx, np.arange(40))
        for fold in folds:
            counts = np.bincount(labels[fold], minlength=4)
            np.testing.assert_array_equal(counts, 2)

    def test_metrics_oracle(self):
        # two classes, one error: acc 0.75; per-class OVR rates by hand
        true = np.array([0, 0, 1, 1])
        pred = np.array([0, 1, 1, 1])
        acc, sens, spec = fold_metrics(true, pred)
        assert acc == pytest.approx(0.75)
        # class0: sens 1/2, class1: 2/2 -> macro 0.75 (only present classes)
        assert sens == pytest.approx(0.75)
        # class0 spec: 2/2, class1 spec: 1/2 -> macro 0.75
        assert spec == pytest.approx(0.75)

    def test_perfect_prediction(self):
        true = np.array([0, 1, 2, 3])
        acc, sens, spec = fold_metrics(true, true.copy())
        assert (acc, sens, spec) == (1.0, 1.0, 1.0)


class TestCrossValidate:
    def test_accuracies_and_recount(self):
        data = synthetic_feature_dataset()
        for kind, floor in (("tree", 0.95), ("forest", 0.95), ("nbayes", 0.90)):
            report = cross_validate(data, ModelSpec(kind=kind), k=10, seed=0)
            assert report.accuracy[0] >= floor, kind
            # recount accuracy independently from the per-fold records
            accs = [np.mean(np.asarray(t) == np.asarray(p))
                    for t, p in report.fold_records]
            assert np.mean(accs) == pytest.approx(report.accuracy[0])
            assert np.std(accs) == pytest.approx(report.accuracy[1])

    def test_confusion_totals(self):
        data = synthetic_feature_dataset()
        report = cross_validate(data, ModelSpec(kind="tree"), k=10, seed=0)
        assert int(report.confusion.sum()) == len(data)

    def test_too_few_rows(self):
        data = Dataset(rows=tuple(synthetic_feature_dataset().rows[:8]))
        with pytest.raises(TooFewRows):
            cross_validate(data, ModelSpec(kind="tree"), k=10, seed=0)


class TestSerialization:
    @pytest.mark.parametrize("kind", ["tree", "forest", "nbayes"])
    def test_round_trip_predictions_identical(self, kind, tmp_path):
        data = simple_dataset()
        model = ModelSpec(kind=kind).train(data)
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        for row in data.rows[:20]:
            assert predict(model, row) == predict(back, row)

    def test_version_mismatch(self):
        model = train_tree(simple_dataset())
        doc = json.loads(model_to_json(model))
        doc["v"] = 99
        with pytest.raises(VersionMismatch):
            model_from_json(json.dumps(doc))

    def test_corrupt_model(self):
        with pytest.raises(CorruptModel):
            model_from_json("{not json")


class TestRenderReport:
    def test_table_format(self):
        data = synthetic_feature_dataset()
        reports = {kind: cross_validate(data, ModelSpec(kind=kind), k=10, seed=0)
                   for kind in ("tree", "forest", "nbayes")}
        table = render_report(reports)
        lines = table.splitlines()
        assert "Decision Tree" in lines[0]
        assert "Random Forest" in lines[0]
        assert "Naive Bayes" in lines[0]
        assert lines[1].startswith("Accuracy")
        assert any(l.startswith("Sensitivity") for l in lines)
        assert any(l.startswith("Specificity") for l in lines)
        # every metric cell reads like "97.5±0.1"
        import re
        cells = re.findall(r"\d+\.\d±\d+\.\d", table)
        assert len(cells) == 9
        assert table.rstrip().endswith(
            "Values are percent, mean±std across 10-fold "
            "cross-validation folds.")
