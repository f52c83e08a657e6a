import numpy as np
import pytest

from flowsentry.artifact import (
    load_container,
    load_dataset,
    load_ensemble,
    load_forest,
    load_pseudo_labels,
    save_container,
    save_dataset,
    save_ensemble,
    save_forest,
    save_pseudo_labels,
)
from flowsentry.dataio import FlowDataset
from flowsentry.ensemble import EnsembleConfig, build_ensemble, weigh_learners
from flowsentry.refinement import (
    ReviewDecision,
    information_gain,
    make_pseudo_labels,
    rf_predict_batch,
    restrict,
    train_refinement,
)


class TestContainer:
    def test_round_trip_arrays_meta_pickles(self, tmp_path):
        path = tmp_path / "box.fsc"
        arrays = {"a": np.arange(10.0), "grp/b": np.eye(3)}
        meta = {"artifact": "test", "note": "hello"}
        checksum = save_container(path, arrays=arrays, meta=meta, pickles={"obj": {"x": 1}})
        got_arrays, got_meta, got_pickles = load_container(path)
        np.testing.assert_array_equal(got_arrays["a"], arrays["a"])
        np.testing.assert_array_equal(got_arrays["grp/b"], arrays["grp/b"])
        assert got_meta["note"] == "hello"
        assert got_pickles["obj"] == {"x": 1}
        assert len(checksum) == 64

    def test_byte_identical_rewrites(self, tmp_path):
        a = tmp_path / "a.fsc"
        b = tmp_path / "b.fsc"
        arrays = {"x": np.linspace(0, 1, 100)}
        save_container(a, arrays=arrays, meta={"k": 1})
        save_container(b, arrays=arrays, meta={"k": 1})
        assert a.read_bytes() == b.read_bytes()

    def test_corruption_detected(self, tmp_path):
        path = tmp_path / "box.fsc"
        save_container(path, arrays={"x": np.ones(4)}, meta={})
        raw = bytearray(path.read_bytes())
        # flip one byte inside meta.json's compressed payload
        idx = raw.find(b"meta.json") + len(b"meta.json") + 2
        raw[idx] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(Exception):
            load_container(path)

    def test_missing_file_reported(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_container(tmp_path / "absent.fsc")


@pytest.fixture(scope="module")
def trained_ensemble():
    rng = np.random.default_rng(5)
    benign = FlowDataset(
        rng.normal(size=(250, 5)) * 0.3 + 0.5,
        [f"c{i}" for i in range(5)],
        labels=np.zeros(250, dtype=int),
    )
    val_feats = np.vstack(
        [rng.normal(size=(100, 5)) * 0.3 + 0.5, rng.normal(size=(100, 5)) * 0.4 + 2.5]
    )
    validation = FlowDataset(
        val_feats, benign.feature_names, labels=np.array([0] * 100 + [1] * 100)
    )
    cfg = EnsembleConfig(
        n_lof=2, n_iforest=2, lof_k=4, lof_contamination=0.1,
        iforest_n_trees=12, iforest_max_samples="auto", iforest_contamination=0.1,
        pca_components_lof=2, pca_components_iforest=3,
    )
    ens = build_ensemble(benign, cfg, master_seed=31)
    weigh_learners(ens, validation)
    return ens, validation


class TestEnsembleArtifact:
    def test_round_trip_bit_identical_votes(self, tmp_path, trained_ensemble):
        ens, validation = trained_ensemble
        path = tmp_path / "ens.fsc"
        save_ensemble(path, ens)
        loaded = load_ensemble(path)
        probe = validation.features[:50]
        np.testing.assert_array_equal(
            ens.learner_votes(probe), loaded.learner_votes(probe)
        )
        np.testing.assert_array_equal(ens.weights, loaded.weights)
        assert loaded.master_seed == ens.master_seed
        assert loaded.config.to_dict() == ens.config.to_dict()

    def test_lof_scores_survive_round_trip_exactly(self, tmp_path, trained_ensemble):
        ens, validation = trained_ensemble
        path = tmp_path / "ens.fsc"
        save_ensemble(path, ens)
        loaded = load_ensemble(path)
        probe = validation.features[:20]
        for a, b in zip(ens.learners, loaded.learners):
            pa = ens.project(probe, a.kind)
            pb = loaded.project(probe, b.kind)
            np.testing.assert_array_equal(a.scores(pa), b.scores(pb))


class TestForestArtifact:
    def test_round_trip_predictions(self, tmp_path):
        rng = np.random.default_rng(0)
        x0 = np.concatenate([rng.uniform(0, 0.4, 40), rng.uniform(0.6, 1, 40)])
        ds = FlowDataset(
            np.column_stack([x0, rng.normal(size=80)]),
            ["x0", "x1"],
            labels=(x0 > 0.5).astype(int),
        )
        model, _ = train_refinement(
            ds, information_gain(ds), {"n_estimators": [7]}, folds=3, seed=1
        )
        path = tmp_path / "rf.fsc"
        save_forest(path, model)
        loaded = load_forest(path)
        probe = restrict(ds.features, model)
        la, pa = rf_predict_batch(model, probe)
        lb, pb = rf_predict_batch(loaded, probe)
        np.testing.assert_array_equal(la, lb)
        np.testing.assert_array_equal(pa, pb)
        assert loaded.selected_features == model.selected_features


class TestPseudoLabelArtifact:
    def test_round_trip_with_decisions(self, tmp_path):
        decisions = [
            ReviewDecision(0, "approve"),
            ReviewDecision(1, "relabel", 0),
            ReviewDecision(2, "reject"),
        ]
        ps = make_pseudo_labels(np.array([1, 1, 1]), "reviewed", decisions=decisions)
        path = tmp_path / "pseudo.fsc"
        save_pseudo_labels(path, ps)
        loaded = load_pseudo_labels(path)
        np.testing.assert_array_equal(loaded.rows, ps.rows)
        np.testing.assert_array_equal(loaded.pseudo_labels, ps.pseudo_labels)
        assert loaded.mode == "reviewed"
        assert [d.action for d in loaded.decisions] == ["approve", "relabel", "reject"]


class TestDatasetArtifact:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        ds = FlowDataset(
            rng.normal(size=(30, 3)),
            ["a", "b", "c"],
            labels=rng.integers(0, 2, 30),
            class_names=np.array(["dos" if i % 2 else "normal" for i in range(30)], dtype=object),
            categories={"b": ["x", "y"]},
            provenance="test",
        )
        path = tmp_path / "ds.fsc"
        save_dataset(path, ds)
        loaded = load_dataset(path)
        np.testing.assert_array_equal(loaded.features, ds.features)
        np.testing.assert_array_equal(loaded.labels, ds.labels)
        assert list(loaded.class_names) == list(ds.class_names)
        assert loaded.categories == ds.categories
