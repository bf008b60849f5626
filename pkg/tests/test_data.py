import gzip
import os

import numpy as np
import pytest

from fedsim.data import (
    ClassExhaustedError,
    Dataset,
    IdxFormatError,
    generate_synthetic,
    load_idx,
    partition_non_iid,
    stratified_holdout,
    stratified_subset,
    write_idx,
)
from fedsim.learner import Architecture, TrainConfig, evaluate, init_model, local_train

DATA_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "data", "mnist_subset")


class TestGenerateSynthetic:
    def test_counting(self):
        ds = generate_synthetic(2, 2, 3, 0.1, seed=7)
        assert ds.features.shape == (6, 2)
        assert ds.labels.tolist() == [0, 0, 0, 1, 1, 1]
        assert ds.num_classes == 2

    def test_determinism(self):
        a = generate_synthetic(2, 2, 3, 0.1, seed=7)
        b = generate_synthetic(2, 2, 3, 0.1, seed=7)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_seed_changes_draw(self):
        a = generate_synthetic(2, 2, 3, 0.1, seed=7)
        b = generate_synthetic(2, 2, 3, 0.1, seed=8)
        assert not np.array_equal(a.features, b.features)

    def test_separable_oracle(self):
        # Means are separable by construction, so a plain softmax trained on
        # half the draw must clear 0.9 on the other half.
        ds = generate_synthetic(4, 8, 50, 0.3, seed=1)
        train_idx, test_idx = stratified_holdout(ds, (0.5,), seed=0)
        model = init_model(Architecture((8, 4)), seed=0)
        cfg = TrainConfig(epochs=50, batch_size=32, learning_rate=0.5, seed=0)
        trained = local_train(model, ds.features[train_idx], ds.labels[train_idx], cfg)
        out = evaluate(trained, ds.features[test_idx], ds.labels[test_idx])
        assert out["accuracy"] > 0.9

    def test_bad_args(self):
        with pytest.raises(ValueError):
            generate_synthetic(1, 2, 3, 0.1, seed=0)
        with pytest.raises(ValueError):
            generate_synthetic(2, 2, 0, 0.1, seed=0)
        with pytest.raises(ValueError):
            generate_synthetic(2, 2, 3, 0.0, seed=0)


class TestDatasetValidation:
    def test_label_out_of_range(self):
        feats = np.zeros((3, 2))
        with pytest.raises(ValueError):
            Dataset(feats, np.array([0, 1, 2]), num_classes=2)

    def test_nonfinite_features(self):
        feats = np.array([[0.0, np.nan], [1.0, 2.0]])
        with pytest.raises(ValueError):
            Dataset(feats, np.array([0, 1]), num_classes=2)

    def test_empty(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((0, 2)), np.zeros(0, dtype=int), num_classes=2)


class TestPartitionNonIid:
    def test_degenerate_single_client(self):
        ds = generate_synthetic(3, 2, 10, 0.5, seed=2)
        part = partition_non_iid(ds, 1, (3, 3), (10, 10), seed=0)
        assert len(part.shards) == 1
        assert sorted(part.shards[0].tolist()) == list(range(30))

    def test_single_class_shards(self):
        ds = generate_synthetic(2, 2, 40, 0.5, seed=2)
        part = partition_non_iid(ds, 2, (1, 1), (5, 10), seed=3)
        for shard in part.shards:
            assert len(set(ds.labels[shard].tolist())) == 1

    def test_sizes_and_disjointness(self):
        ds = generate_synthetic(10, 4, 200, 0.5, seed=4)
        part = partition_non_iid(ds, 10, (1, 4), (10, 30), seed=3)
        seen = set()
        for shard in part.shards:
            assert 10 <= len(shard) <= 120
            assert not (seen & set(shard.tolist()))
            seen.update(shard.tolist())

    def test_exhaustion_names_class(self):
        ds = generate_synthetic(2, 2, 5, 0.5, seed=0)
        with pytest.raises(ClassExhaustedError) as err:
            partition_non_iid(ds, 4, (2, 2), (4, 4), seed=1)
        assert "class" in str(err.value)

    def test_properties_randomized(self):
        # Disjointness, determinism, exact label-skew, and per-class draw
        # bounds over many random configurations.
        rng = np.random.default_rng(11)
        for _ in range(120):
            C = int(rng.integers(2, 6))
            per_class = int(rng.integers(30, 60))
            ds = generate_synthetic(C, 3, per_class, 0.8, seed=int(rng.integers(1 << 30)))
            N = int(rng.integers(1, 5))
            k = int(rng.integers(1, C + 1))
            s_min = int(rng.integers(1, 4))
            s_max = int(rng.integers(s_min, 7))
            seed = int(rng.integers(1 << 30))
            part = partition_non_iid(ds, N, (k, k), (s_min, s_max), seed)
            again = partition_non_iid(ds, N, (k, k), (s_min, s_max), seed)
            seen = set()
            for shard, shard2 in zip(part.shards, again.shards):
                assert np.array_equal(shard, shard2)
                labs = ds.labels[shard]
                assert len(set(labs.tolist())) == k
                counts = np.bincount(labs, minlength=C)
                present = counts[counts > 0]
                assert present.min() >= s_min and present.max() <= s_max
                assert not (seen & set(shard.tolist()))
                seen.update(shard.tolist())


class TestStratifiedHoldout:
    def test_fraction_sizes_and_disjointness(self):
        ds = generate_synthetic(4, 3, 100, 0.5, seed=5)
        eval_idx, server_idx, rest = stratified_holdout(ds, (0.2, 0.1), seed=1)
        assert len(eval_idx) == 80
        assert len(server_idx) == 40
        assert len(rest) == 280
        all_idx = np.concatenate([eval_idx, server_idx, rest])
        assert len(set(all_idx.tolist())) == 400

    def test_stratification(self):
        ds = generate_synthetic(4, 3, 100, 0.5, seed=5)
        eval_idx, _, _ = stratified_holdout(ds, (0.2, 0.1), seed=1)
        counts = np.bincount(ds.labels[eval_idx], minlength=4)
        assert counts.tolist() == [20, 20, 20, 20]

    def test_determinism(self):
        ds = generate_synthetic(3, 3, 50, 0.5, seed=6)
        a = stratified_holdout(ds, (0.25,), seed=9)
        b = stratified_holdout(ds, (0.25,), seed=9)
        for left, right in zip(a, b):
            assert np.array_equal(left, right)


class TestStratifiedSubset:
    def test_proportions(self):
        ds = generate_synthetic(5, 2, 100, 0.5, seed=3)
        sub = stratified_subset(ds, 200, seed=0)
        assert sub.features.shape[0] == 200
        assert np.bincount(sub.labels, minlength=5).tolist() == [40] * 5

    def test_uneven_seats(self):
        # 100 requested from 3 equal classes: largest-remainder seats still
        # land on exactly the requested total.
        ds = generate_synthetic(3, 2, 50, 0.5, seed=3)
        sub = stratified_subset(ds, 100, seed=0)
        assert sub.features.shape[0] == 100
        assert np.bincount(sub.labels, minlength=3).sum() == 100


class TestIdx:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        images = rng.integers(0, 256, size=(4, 3, 3), dtype=np.uint8)
        labels = np.array([3, 1, 0, 2], dtype=np.uint8)
        ipath = tmp_path / "img.idx"
        lpath = tmp_path / "lab.idx"
        write_idx(images, labels, ipath, lpath)
        ds = load_idx(ipath, lpath)
        assert ds.features.shape == (4, 9)
        assert np.array_equal(ds.labels, labels)
        # pixels scaled to [0,1]; undo the scaling and compare bytes
        recovered = np.rint(ds.features * 255).astype(np.uint8)
        assert np.array_equal(recovered, images.reshape(4, 9))

    def test_gzip_transparent(self, tmp_path):
        rng = np.random.default_rng(1)
        images = rng.integers(0, 256, size=(2, 2, 2), dtype=np.uint8)
        labels = np.array([1, 0], dtype=np.uint8)
        ipath = tmp_path / "img.idx.gz"
        lpath = tmp_path / "lab.idx.gz"
        write_idx(images, labels, ipath, lpath)
        with gzip.open(ipath, "rb") as fh:
            assert fh.read(4) == b"\x00\x00\x08\x03"
        ds = load_idx(ipath, lpath)
        assert ds.features.shape == (2, 4)

    def test_bad_magic(self, tmp_path):
        ipath = tmp_path / "bad.idx"
        ipath.write_bytes(b"\x00\x00\x01\x01" + b"\x00" * 16)
        lpath = tmp_path / "lab.idx"
        write_idx(np.zeros((1, 1, 1), dtype=np.uint8), np.zeros(1, dtype=np.uint8),
                  tmp_path / "ok.idx", lpath)
        with pytest.raises(IdxFormatError):
            load_idx(ipath, lpath)

    def test_count_mismatch(self, tmp_path):
        images = np.zeros((4, 2, 2), dtype=np.uint8)
        labels = np.zeros(4, dtype=np.uint8)
        write_idx(images, labels, tmp_path / "i4.idx", tmp_path / "l4.idx")
        write_idx(np.zeros((5, 2, 2), dtype=np.uint8), np.zeros(5, dtype=np.uint8),
                  tmp_path / "i5.idx", tmp_path / "l5.idx")
        with pytest.raises(IdxFormatError):
            load_idx(tmp_path / "i4.idx", tmp_path / "l5.idx")

    def test_truncated(self, tmp_path):
        images = np.zeros((4, 2, 2), dtype=np.uint8)
        labels = np.zeros(4, dtype=np.uint8)
        write_idx(images, labels, tmp_path / "i.idx", tmp_path / "l.idx")
        raw = (tmp_path / "i.idx").read_bytes()
        (tmp_path / "trunc.idx").write_bytes(raw[:-3])
        with pytest.raises(IdxFormatError):
            load_idx(tmp_path / "trunc.idx", tmp_path / "l.idx")

    def test_bundled_subset(self):
        ds = load_idx(os.path.join(DATA_DIR, "images-idx3-ubyte.gz"),
                      os.path.join(DATA_DIR, "labels-idx1-ubyte.gz"))
        assert ds.features.shape == (3000, 784)
        assert ds.num_classes == 10
        assert np.bincount(ds.labels, minlength=10).tolist() == [300] * 10
        assert ds.features.min() >= 0.0 and ds.features.max() <= 1.0

    @pytest.mark.skipif("MNIST_DIR" not in os.environ,
                        reason="full MNIST not bundled; set MNIST_DIR to run")
    def test_official_training_pair(self):
        root = os.environ["MNIST_DIR"]
        ds = load_idx(os.path.join(root, "train-images-idx3-ubyte.gz"),
                      os.path.join(root, "train-labels-idx1-ubyte.gz"))
        assert ds.features.shape[0] == 60000
        assert ds.num_classes == 10
