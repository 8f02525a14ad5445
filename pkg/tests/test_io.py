import dataclasses

import numpy as np
import pytest

from structsparse.core import BlockPartition
from structsparse.datagen import LabeledDataset
from structsparse.dfdl import dfdl_fit, dfdl_predict
from structsparse.dlsi import dlsi_predict, dlsi_train
from structsparse.io import (
    ARRAY_MAGIC,
    FormatError,
    load_model,
    read_array,
    read_dataset,
    read_dataset_csv,
    save_model,
    write_array,
    write_dataset,
    write_dataset_csv,
)
from structsparse.lrsdl import lrsdl_predict, lrsdl_train
from structsparse.tensor import ConfuserThresholds, SparsityMode, TensorDictionary, TensorModel, tensor_predict


def toy(seed=0, d=10, n=8):
    rng = np.random.default_rng(seed)
    B = [rng.standard_normal((d, 2)) for _ in range(2)]
    Y = np.hstack([b @ rng.uniform(0.2, 1, (2, n)) for b in B])
    return Y, np.repeat([1, 2], n)


def assert_same(a, b):
    for f in dataclasses.fields(a):
        x, y = getattr(a, f.name), getattr(b, f.name)
        if isinstance(x, list) and x and isinstance(x[0], np.ndarray):
            for u, v in zip(x, y):
                np.testing.assert_array_equal(u, v)
        elif isinstance(x, (np.ndarray, list)):
            np.testing.assert_array_equal(np.asarray(x), np.asarray(y))
        else:
            assert x == y, f.name


class TestArrays:
    @pytest.mark.parametrize("shape", [(3, 4), (5, 2, 3), (1, 1)])
    def test_round_trip_bitwise(self, tmp_path, shape):
        a = np.random.default_rng(0).standard_normal(shape)
        a.flat[0] = np.nextafter(1.0, 2.0)
        write_array(tmp_path / "a.ssa", a)
        b = read_array(tmp_path / "a.ssa")
        assert b.shape == a.shape
        assert a.tobytes() == b.tobytes()

    def test_header_layout(self, tmp_path):
        write_array(tmp_path / "a.ssa", np.arange(6.0).reshape(2, 3))
        raw = (tmp_path / "a.ssa").read_bytes()
        assert raw[:8] == ARRAY_MAGIC
        assert np.frombuffer(raw[8:40], "<u8").tolist() == [1, 2, 3, 1]
        np.testing.assert_array_equal(np.frombuffer(raw[40:], "<f8"), [0, 3, 1, 4, 2, 5])

    def test_keep_channel_axis(self, tmp_path):
        write_array(tmp_path / "a.ssa", np.ones((2, 3)))
        assert read_array(tmp_path / "a.ssa", squeeze=False).shape == (2, 3, 1)


class TestDatasets:
    @pytest.mark.parametrize("T", [1, 3])
    def test_binary_round_trip(self, tmp_path, T):
        rng = np.random.default_rng(T)
        X = rng.standard_normal((4, 6, T)) if T > 1 else rng.standard_normal((4, 6))
        ds = LabeledDataset(X, np.array([0, 1, 2, 2, 1, 0]), "test")
        write_dataset(tmp_path / "d.ssd", ds)
        back = read_dataset(tmp_path / "d.ssd")
        assert back.samples.tobytes() == ds.samples.tobytes()
        np.testing.assert_array_equal(back.labels, ds.labels)
        assert back.split == "test"

    @pytest.mark.parametrize("T", [1, 2])
    def test_csv_round_trip(self, tmp_path, T):
        rng = np.random.default_rng(T)
        X = rng.standard_normal((3, 5, T)) * 1e-7 if T > 1 else rng.standard_normal((3, 5)) * 1e9
        ds = LabeledDataset(X, np.arange(5), "train")
        write_dataset_csv(tmp_path / "d.csv", ds)
        back = read_dataset_csv(tmp_path / "d.csv")
        assert back.samples.tobytes() == ds.samples.tobytes()
        np.testing.assert_array_equal(back.labels, ds.labels)


class TestModels:
    def test_lrsdl(self, tmp_path):
        Y, y = toy()
        m = lrsdl_train(Y, y, 2, 1, 0.01, 0.01, 0.1, iters=2)
        save_model(tmp_path / "m.ssm", m)
        back = load_model(tmp_path / "m.ssm")
        assert_same(m, back)
        np.testing.assert_array_equal(lrsdl_predict(Y, m), lrsdl_predict(Y, back))

    def test_dlsi(self, tmp_path):
        Y, y = toy()
        m = dlsi_train(Y, y, 2, 0.01, 0.1, iters=2)
        save_model(tmp_path / "m.ssm", m)
        back = load_model(tmp_path / "m.ssm")
        assert_same(m, back)
        np.testing.assert_array_equal(dlsi_predict(Y, m), dlsi_predict(Y, back))

    def test_dfdl(self, tmp_path):
        Y, y = toy()
        m = dfdl_fit(Y, y, 3, 0.1, 0.1, 0.01, iters=2)
        save_model(tmp_path / "m.ssm", m)
        back = load_model(tmp_path / "m.ssm")
        assert_same(m, back)
        np.testing.assert_array_equal(dfdl_predict(Y, m), dfdl_predict(Y, back))

    @pytest.mark.parametrize("th", [None, ConfuserThresholds(0.1, 2.5)])
    def test_tensor(self, tmp_path, th):
        rng = np.random.default_rng(0)
        td = TensorDictionary(rng.standard_normal((6, 5, 2)), BlockPartition((2, 2), 1), np.array([3, 7]))
        m = TensorModel(td, SparsityMode.GT, 0.03, True, th)
        save_model(tmp_path / "m.ssm", m)
        back = load_model(tmp_path / "m.ssm")
        assert back.dictionary.D.tobytes() == td.D.tobytes()
        assert back.dictionary.partition == td.partition
        np.testing.assert_array_equal(back.dictionary.classes, td.classes)
        assert (back.mode, back.lam, back.nonneg, back.thresholds) == (m.mode, m.lam, m.nonneg, m.thresholds)
        Y = rng.standard_normal((6, 4, 2))
        np.testing.assert_array_equal(tensor_predict(Y, m), tensor_predict(Y, back))

    def test_unknown_model_type(self, tmp_path):
        with pytest.raises(TypeError):
            save_model(tmp_path / "m.ssm", object())


class TestMalformed:
    def test_wrong_magic(self, tmp_path):
        (tmp_path / "x").write_bytes(b"NOTMAGIC" + bytes(32))
        for reader in (read_array, read_dataset, load_model):
            with pytest.raises(FormatError):
                reader(tmp_path / "x")

    def test_truncated(self, tmp_path):
        write_array(tmp_path / "a.ssa", np.ones((4, 4)))
        raw = (tmp_path / "a.ssa").read_bytes()
        (tmp_path / "b.ssa").write_bytes(raw[:-3])
        with pytest.raises(FormatError):
            read_array(tmp_path / "b.ssa")

    def test_trailing_bytes(self, tmp_path):
        write_array(tmp_path / "a.ssa", np.ones((2, 2)))
        with open(tmp_path / "a.ssa", "ab") as f:
            f.write(b"\0")
        with pytest.raises(FormatError):
            read_array(tmp_path / "a.ssa")

    def test_bad_version(self, tmp_path):
        write_array(tmp_path / "a.ssa", np.ones((2, 2)))
        raw = bytearray((tmp_path / "a.ssa").read_bytes())
        raw[8] = 9
        (tmp_path / "a.ssa").write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            read_array(tmp_path / "a.ssa")

    def test_bad_split(self, tmp_path):
        write_dataset(tmp_path / "d.ssd", LabeledDataset(np.ones((2, 2)), np.array([1, 2])))
        raw = bytearray((tmp_path / "d.ssd").read_bytes())
        raw[40] = 7
        (tmp_path / "d.ssd").write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            read_dataset(tmp_path / "d.ssd")

    def test_csv_ragged_row(self, tmp_path):
        (tmp_path / "d.csv").write_text("# channels=1\nlabel,f0,f1\n1,0.5,0.25\n2,0.5\n")
        with pytest.raises(FormatError):
            read_dataset_csv(tmp_path / "d.csv")

    def test_csv_non_numeric(self, tmp_path):
        (tmp_path / "d.csv").write_text("# channels=1\nlabel,f0\n1,abc\n")
        with pytest.raises(FormatError):
            read_dataset_csv(tmp_path / "d.csv")

    def test_csv_channel_mismatch(self, tmp_path):
        (tmp_path / "d.csv").write_text("# channels=2\nlabel,f0,f1,f2\n1,1,2,3\n")
        with pytest.raises(FormatError):
            read_dataset_csv(tmp_path / "d.csv")
